#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splink/analysis.hpp"
#include "splink/errors.hpp"
#include "splink/geometry.hpp"
#include "splink/io.hpp"
#include "splink/linkbudget.hpp"
#include "splink/montecarlo.hpp"

// Run configuration: a flat key=value text file ('#' starts a comment, SI
// units unless the key name says otherwise). Values are kept exactly as given
// (degrees stay degrees) so a write-parse round trip is lossless.
namespace splink::config {

struct RunConfig {
    // pass geometry ("synthetic" builds an overhead-pass model; anything else
    // is read as an ephemeris CSV path)
    std::string ephemeris = "synthetic";
    double h_s = 5620e3;
    double h_t = 537.0;
    double earth_radius = 6371e3;
    double max_elevation_deg = 90.0;
    double pass_duration = 2580.0;
    double ephemeris_dt = 1.0;
    double ephemeris_noise_sigma = 0.0;
    std::uint64_t ephemeris_noise_seed = 0;

    // link budget
    double alpha = 237.0;
    double t0 = 0.89;
    double h_scale = 1.2e3;
    double theta_t = 130.5e-6;
    double pulse_energy = 1.1e-9;
    double wavelength = 532e-9;
    double f_rep = 100e6;
    double f_slr = 10.0;
    double a_ccr = 11.4e-4;
    double cross_section = 15e6;
    double rho = 0.89;
    double n_eff = 9.88;
    double a_t = 1.7357;
    double eta_rx = 0.1306;
    double eta_det = 0.1;

    // detector preset plus optional field overrides
    std::string detector = "pmt";
    std::optional<double> detector_efficiency;
    std::optional<double> detector_dark_rate;
    std::optional<double> detector_jitter_fwhm;
    std::optional<double> detector_tdc_bin;

    // pointing process
    double pointing_mean = 0.0;
    double pointing_sigma = 0.0;
    double pointing_tau = 10.0;
    std::optional<double> pointing_excess_begin;
    std::optional<double> pointing_excess_end;
    std::optional<double> pointing_excess_error;

    // generation
    std::string mu_policy = "physical";
    double mu_fixed = 0.6;
    double background_rate = -1.0; // counts/s; negative -> detector dark rate
    double shutter_period = 0.0;
    double shutter_receive_fraction = 1.0;
    std::optional<std::uint64_t> seed;
    double sim_dt = 1.0;

    // analysis
    double bin_ns = 0.4;
    double slice_coarse = 60.0;
    double slice_fine = 10.0;
    std::vector<std::pair<double, double>> mask;
    std::string class_filter = "le1";
    std::string out_dir = ".";

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    linkbudget::LinkParams link_params() const {
        linkbudget::LinkParams p;
        p.alpha = alpha;
        p.T_0 = t0;
        p.h_t = h_t;
        p.R_e = earth_radius;
        p.h_s = h_s;
        p.h_scale = h_scale;
        p.theta_t = theta_t;
        p.theta_p = pointing_mean;
        p.pulse_energy = pulse_energy;
        p.wavelength = wavelength;
        p.f_rep = f_rep;
        p.f_slr = f_slr;
        p.A_ccr = a_ccr;
        p.Sigma = cross_section;
        p.rho = rho;
        p.N_eff = n_eff;
        p.A_t = a_t;
        p.eta_rx = eta_rx;
        p.eta_det = eta_det;
        return p;
    }

    montecarlo::DetectorModel detector_model() const {
        auto det = montecarlo::DetectorModel::by_name(detector);
        if (detector_efficiency) det.efficiency = *detector_efficiency;
        if (detector_dark_rate) det.dark_rate = *detector_dark_rate;
        if (detector_jitter_fwhm) det.jitter_fwhm = *detector_jitter_fwhm;
        if (detector_tdc_bin) det.tdc_bin = *detector_tdc_bin;
        det.validate();
        return det;
    }

    montecarlo::PointingModel pointing_model() const {
        montecarlo::PointingModel m;
        m.mean_error = pointing_mean;
        m.sigma = pointing_sigma;
        m.correlation_time = pointing_tau;
        const int given = (pointing_excess_begin ? 1 : 0) + (pointing_excess_end ? 1 : 0) +
                          (pointing_excess_error ? 1 : 0);
        if (given == 3) {
            m.zenith_excess = montecarlo::ZenithExcess{*pointing_excess_begin,
                                                       *pointing_excess_end,
                                                       *pointing_excess_error};
        } else if (given != 0) {
            throw validation_error(
                "config: pointing_excess_begin/end/error must be given together");
        }
        m.validate();
        return m;
    }

    montecarlo::MuPolicy policy() const {
        if (mu_policy == "physical") return montecarlo::MuPolicy::physical();
        if (mu_policy == "fixed") return montecarlo::MuPolicy::fixed(mu_fixed);
        throw validation_error("config: mu_policy must be 'physical' or 'fixed'");
    }

    montecarlo::ShutterSchedule shutter() const {
        montecarlo::ShutterSchedule s{shutter_period, shutter_receive_fraction};
        s.validate();
        return s;
    }

    analysis::ClassFilter class_filter_enum() const {
        if (class_filter == "le1") return analysis::ClassFilter::le1;
        if (class_filter == "le2") return analysis::ClassFilter::le2;
        if (class_filter == "all") return analysis::ClassFilter::all;
        throw validation_error("config: class must be 'le1', 'le2' or 'all'");
    }

    std::uint64_t require_seed() const {
        if (!seed) throw validation_error("config: seed is required for simulation");
        return *seed;
    }
};

namespace detail {

inline std::string_view trim(std::string_view v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r'))
        v.remove_suffix(1);
    return v;
}

inline double value_double(std::string_view v, std::size_t line_no) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw validation_error("config: malformed number '" + std::string(v) + "' (line " +
                               std::to_string(line_no) + ")");
    return out;
}

inline std::uint64_t value_u64(std::string_view v, std::size_t line_no) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw validation_error("config: malformed integer '" + std::string(v) + "' (line " +
                               std::to_string(line_no) + ")");
    return out;
}

inline std::pair<double, double> value_interval(std::string_view v, std::size_t line_no) {
    const auto colon = v.find(':');
    if (colon == std::string_view::npos)
        throw validation_error("config: mask expects START:END (line " +
                               std::to_string(line_no) + ")");
    const double a = value_double(trim(v.substr(0, colon)), line_no);
    const double b = value_double(trim(v.substr(colon + 1)), line_no);
    if (!(b > a))
        throw validation_error("config: mask interval must have positive length (line " +
                               std::to_string(line_no) + ")");
    return {a, b};
}

} // namespace detail

inline RunConfig parse_config_text(std::string_view text) {
    RunConfig cfg;
    cfg.mask.clear();
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw validation_error("config: expected key=value (line " +
                                   std::to_string(line_no) + ")");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        const auto num = [&] { return detail::value_double(value, line_no); };

        if (key == "ephemeris") cfg.ephemeris = std::string(value);
        else if (key == "h_s") cfg.h_s = num();
        else if (key == "h_t") cfg.h_t = num();
        else if (key == "earth_radius") cfg.earth_radius = num();
        else if (key == "max_elevation_deg") cfg.max_elevation_deg = num();
        else if (key == "pass_duration") cfg.pass_duration = num();
        else if (key == "ephemeris_dt") cfg.ephemeris_dt = num();
        else if (key == "ephemeris_noise_sigma") cfg.ephemeris_noise_sigma = num();
        else if (key == "ephemeris_noise_seed")
            cfg.ephemeris_noise_seed = detail::value_u64(value, line_no);
        else if (key == "alpha") cfg.alpha = num();
        else if (key == "t0") cfg.t0 = num();
        else if (key == "h_scale") cfg.h_scale = num();
        else if (key == "theta_t") cfg.theta_t = num();
        else if (key == "pulse_energy") cfg.pulse_energy = num();
        else if (key == "wavelength") cfg.wavelength = num();
        else if (key == "f_rep") cfg.f_rep = num();
        else if (key == "f_slr") cfg.f_slr = num();
        else if (key == "a_ccr") cfg.a_ccr = num();
        else if (key == "cross_section") cfg.cross_section = num();
        else if (key == "rho") cfg.rho = num();
        else if (key == "n_eff") cfg.n_eff = num();
        else if (key == "a_t") cfg.a_t = num();
        else if (key == "eta_rx") cfg.eta_rx = num();
        else if (key == "eta_det") cfg.eta_det = num();
        else if (key == "detector") cfg.detector = std::string(value);
        else if (key == "detector_efficiency") cfg.detector_efficiency = num();
        else if (key == "detector_dark_rate") cfg.detector_dark_rate = num();
        else if (key == "detector_jitter_fwhm") cfg.detector_jitter_fwhm = num();
        else if (key == "detector_tdc_bin") cfg.detector_tdc_bin = num();
        else if (key == "pointing_mean") cfg.pointing_mean = num();
        else if (key == "pointing_sigma") cfg.pointing_sigma = num();
        else if (key == "pointing_tau") cfg.pointing_tau = num();
        else if (key == "pointing_excess_begin") cfg.pointing_excess_begin = num();
        else if (key == "pointing_excess_end") cfg.pointing_excess_end = num();
        else if (key == "pointing_excess_error") cfg.pointing_excess_error = num();
        else if (key == "mu_policy") cfg.mu_policy = std::string(value);
        else if (key == "mu_fixed") cfg.mu_fixed = num();
        else if (key == "background_rate") cfg.background_rate = num();
        else if (key == "shutter_period") cfg.shutter_period = num();
        else if (key == "shutter_receive_fraction") cfg.shutter_receive_fraction = num();
        else if (key == "seed") cfg.seed = detail::value_u64(value, line_no);
        else if (key == "sim_dt") cfg.sim_dt = num();
        else if (key == "bin_ns") cfg.bin_ns = num();
        else if (key == "slice_coarse") cfg.slice_coarse = num();
        else if (key == "slice_fine") cfg.slice_fine = num();
        else if (key == "mask") cfg.mask.push_back(detail::value_interval(value, line_no));
        else if (key == "class") cfg.class_filter = std::string(value);
        else if (key == "out_dir") cfg.out_dir = std::string(value);
        else
            throw validation_error("config: unknown key '" + key + "' (line " +
                                   std::to_string(line_no) + ")");
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    const auto put = [&](const char* key, double v) {
        out << key << " = " << io::format_double(v) << '\n';
    };
    const auto put_opt = [&](const char* key, const std::optional<double>& v) {
        if (v) put(key, *v);
    };
    out << "ephemeris = " << cfg.ephemeris << '\n';
    put("h_s", cfg.h_s);
    put("h_t", cfg.h_t);
    put("earth_radius", cfg.earth_radius);
    put("max_elevation_deg", cfg.max_elevation_deg);
    put("pass_duration", cfg.pass_duration);
    put("ephemeris_dt", cfg.ephemeris_dt);
    put("ephemeris_noise_sigma", cfg.ephemeris_noise_sigma);
    out << "ephemeris_noise_seed = " << cfg.ephemeris_noise_seed << '\n';
    put("alpha", cfg.alpha);
    put("t0", cfg.t0);
    put("h_scale", cfg.h_scale);
    put("theta_t", cfg.theta_t);
    put("pulse_energy", cfg.pulse_energy);
    put("wavelength", cfg.wavelength);
    put("f_rep", cfg.f_rep);
    put("f_slr", cfg.f_slr);
    put("a_ccr", cfg.a_ccr);
    put("cross_section", cfg.cross_section);
    put("rho", cfg.rho);
    put("n_eff", cfg.n_eff);
    put("a_t", cfg.a_t);
    put("eta_rx", cfg.eta_rx);
    put("eta_det", cfg.eta_det);
    out << "detector = " << cfg.detector << '\n';
    put_opt("detector_efficiency", cfg.detector_efficiency);
    put_opt("detector_dark_rate", cfg.detector_dark_rate);
    put_opt("detector_jitter_fwhm", cfg.detector_jitter_fwhm);
    put_opt("detector_tdc_bin", cfg.detector_tdc_bin);
    put("pointing_mean", cfg.pointing_mean);
    put("pointing_sigma", cfg.pointing_sigma);
    put("pointing_tau", cfg.pointing_tau);
    put_opt("pointing_excess_begin", cfg.pointing_excess_begin);
    put_opt("pointing_excess_end", cfg.pointing_excess_end);
    put_opt("pointing_excess_error", cfg.pointing_excess_error);
    out << "mu_policy = " << cfg.mu_policy << '\n';
    put("mu_fixed", cfg.mu_fixed);
    put("background_rate", cfg.background_rate);
    put("shutter_period", cfg.shutter_period);
    put("shutter_receive_fraction", cfg.shutter_receive_fraction);
    if (cfg.seed) out << "seed = " << *cfg.seed << '\n';
    put("sim_dt", cfg.sim_dt);
    put("bin_ns", cfg.bin_ns);
    put("slice_coarse", cfg.slice_coarse);
    put("slice_fine", cfg.slice_fine);
    for (const auto& [a, b] : cfg.mask)
        out << "mask = " << io::format_double(a) << ':' << io::format_double(b) << '\n';
    out << "class = " << cfg.class_filter << '\n';
    out << "out_dir = " << cfg.out_dir << '\n';
    return out.str();
}

} // namespace splink::config
