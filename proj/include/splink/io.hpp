#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "splink/analysis.hpp"
#include "splink/errors.hpp"
#include "splink/geometry.hpp"
#include "splink/montecarlo.hpp"
#include "splink/timing.hpp"

// Text formats shared between subcommands and external tooling. Everything is
// CSV with a fixed header; numbers are written with std::to_chars so output
// is locale-independent, byte-stable, and round-trips exactly.
namespace splink::io {

inline std::string format_double(double v) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open input file: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw error("cannot open output file: " + path);
    return out;
}

// Split a CSV line into exactly n fields.
template <std::size_t N>
std::array<std::string_view, N> fields(std::string_view line, std::size_t line_no) {
    std::array<std::string_view, N> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t comma = line.find(',', start);
        if (i + 1 < N) {
            if (comma == std::string_view::npos)
                throw parse_error("expected " + std::to_string(N) + " comma-separated fields",
                                  line_no);
            out[i] = line.substr(start, comma - start);
            start = comma + 1;
        } else {
            if (comma != std::string_view::npos)
                throw parse_error("expected " + std::to_string(N) + " comma-separated fields",
                                  line_no);
            out[i] = line.substr(start);
        }
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw parse_error("malformed number '" + std::string(s) + "'", line_no);
    return v;
}

inline std::int64_t parse_int(std::string_view s, std::size_t line_no) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw parse_error("malformed integer '" + std::string(s) + "'", line_no);
    return v;
}

// Strip a trailing carriage return so files written on other platforms parse.
inline std::string_view trimmed(const std::string& line) {
    std::string_view v(line);
    if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
    return v;
}

inline void expect_header(std::ifstream& in, std::string_view expected) {
    std::string line;
    if (!std::getline(in, line) || trimmed(line) != expected)
        throw parse_error("expected header '" + std::string(expected) + "'", 1);
}

} // namespace detail

// --- ephemeris: t_s,R_m,vR_mps ---

inline void write_ephemeris(const std::string& path,
                            const std::vector<geometry::EphemerisSample>& samples) {
    auto out = detail::open_output(path);
    out << "t_s,R_m,vR_mps\n";
    for (const auto& s : samples)
        out << format_double(s.t) << ',' << format_double(s.range) << ','
            << format_double(s.radial_velocity) << '\n';
}

inline std::vector<geometry::EphemerisSample> read_ephemeris_samples(const std::string& path) {
    auto in = detail::open_input(path);
    detail::expect_header(in, "t_s,R_m,vR_mps");
    std::vector<geometry::EphemerisSample> samples;
    std::string line;
    for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
        const auto v = detail::trimmed(line);
        if (v.empty()) continue;
        const auto f = detail::fields<3>(v, line_no);
        samples.push_back({detail::parse_double(f[0], line_no),
                           detail::parse_double(f[1], line_no),
                           detail::parse_double(f[2], line_no)});
    }
    return samples;
}

// --- ranging pairs: t_exit_ps,t_return_ps ---

inline void write_slr(const std::string& path, const std::vector<timing::SlrEpochPair>& pairs) {
    auto out = detail::open_output(path);
    out << "t_exit_ps,t_return_ps\n";
    for (const auto& p : pairs)
        out << consts::round_ps(p.t_exit) << ',' << consts::round_ps(p.t_return) << '\n';
}

inline std::vector<timing::SlrEpochPair> read_slr(const std::string& path) {
    auto in = detail::open_input(path);
    detail::expect_header(in, "t_exit_ps,t_return_ps");
    std::vector<timing::SlrEpochPair> pairs;
    std::string line;
    for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
        const auto v = detail::trimmed(line);
        if (v.empty()) continue;
        const auto f = detail::fields<2>(v, line_no);
        pairs.push_back({static_cast<double>(detail::parse_int(f[0], line_no)) * 1e-12,
                         static_cast<double>(detail::parse_int(f[1], line_no)) * 1e-12});
    }
    return pairs;
}

// --- time tags: channel,timestamp_ps ---

inline void write_tags(const std::string& path,
                       const std::vector<montecarlo::TimeTagRecord>& tags) {
    auto out = detail::open_output(path);
    out << "channel,timestamp_ps\n";
    for (const auto& t : tags)
        out << static_cast<int>(t.channel) << ',' << t.timestamp_ps << '\n';
}

inline std::vector<montecarlo::TimeTagRecord> read_tags(const std::string& path) {
    auto in = detail::open_input(path);
    detail::expect_header(in, "channel,timestamp_ps");
    std::vector<montecarlo::TimeTagRecord> tags;
    std::string line;
    std::int64_t previous = std::numeric_limits<std::int64_t>::min();
    for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
        const auto v = detail::trimmed(line);
        if (v.empty()) continue;
        const auto f = detail::fields<2>(v, line_no);
        const auto ch = detail::parse_int(f[0], line_no);
        if (ch < 0 || ch > 2) throw parse_error("channel must be 0, 1 or 2", line_no);
        const auto ts = detail::parse_int(f[1], line_no);
        if (ts < previous) throw parse_error("timestamps must be sorted", line_no);
        previous = ts;
        tags.push_back({ts, static_cast<montecarlo::Channel>(ch)});
    }
    return tags;
}

// --- histogram dump: delta_ns,count ---

inline void write_histogram(const std::string& path, const analysis::ResidualHistogram& hist) {
    auto out = detail::open_output(path);
    out << "delta_ns,count\n";
    for (std::size_t i = 0; i < hist.centers.size(); ++i)
        out << format_double(hist.centers[i] * 1e9) << ',' << hist.counts[i] << '\n';
}

} // namespace splink::io
