#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

// Failure taxonomy used across the library. The CLI maps these onto process
// exit codes (config/usage -> 2, malformed input -> 3, numeric trouble -> 4),
// so keeping the categories distinct matters more than the messages.
namespace splink {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A caller passed an argument outside the documented domain (negative rate,
// zero divergence, dt >= correlation time, ...).
struct parameter_error : error {
    using error::error;
};

// Data that is individually well-formed but mutually inconsistent: epochs out
// of order, all slices masked, repetition rate not a multiple of the ranging
// rate, impossible shutter schedule.
struct validation_error : error {
    using error::error;
};

// Malformed input file. Carries the 1-based line number of the offender.
struct parse_error : error {
    parse_error(const std::string& msg, std::size_t line_no)
        : error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    std::size_t line;
};

// A physically meaningful quantity was requested outside its physical
// interval (slant range beyond the horizon, transmission of a negative range).
struct domain_error : error {
    using error::error;
};

// Query outside the covered span of a table or grid.
struct span_error : error {
    using error::error;
};

// An iteration failed to converge or an internal numeric audit tripped.
struct numeric_error : error {
    using error::error;
};

} // namespace splink
