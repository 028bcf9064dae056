#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "splink/analysis.hpp"
#include "splink/config.hpp"
#include "splink/constants.hpp"
#include "splink/errors.hpp"
#include "splink/geometry.hpp"
#include "splink/io.hpp"
#include "splink/linkbudget.hpp"
#include "splink/montecarlo.hpp"
#include "splink/projection.hpp"
#include "splink/timing.hpp"

// Subcommand bodies shared by the CLI and the tests: each stage reads and
// writes the documented file formats, so a full run is reproducible from the
// files alone. All JSON uses ordered keys to keep output byte-stable.
namespace splink::pipeline {

using json = nlohmann::ordered_json;

inline geometry::EphemerisTable build_table(const config::RunConfig& cfg) {
    if (cfg.ephemeris == "synthetic")
        return geometry::synthetic_pass(cfg.h_s, cfg.max_elevation_deg * consts::pi / 180.0,
                                        cfg.pass_duration, cfg.ephemeris_dt, cfg.earth_radius,
                                        cfg.h_t, cfg.ephemeris_noise_sigma,
                                        cfg.ephemeris_noise_seed);
    return geometry::EphemerisTable(io::read_ephemeris_samples(cfg.ephemeris), cfg.h_s, cfg.h_t);
}

namespace detail {

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw error("cannot create output directory: " + dir);
    return p;
}

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw error("cannot open output file: " + path.string());
    out << doc.dump(2) << '\n';
}

inline json fit_to_json(const analysis::GaussFit& fit) {
    return json{{"delta0_ns", fit.delta0 * 1e9},
                {"delta0_err_ns", fit.delta0_err * 1e9},
                {"sigma_g_ns", fit.sigma_g * 1e9},
                {"sigma_g_err_ns", fit.sigma_g_err * 1e9},
                {"amplitude", fit.amplitude},
                {"amplitude_err", fit.amplitude_err},
                {"baseline", fit.baseline},
                {"baseline_err", fit.baseline_err},
                {"degenerate", fit.degenerate}};
}

inline const char* class_name(analysis::MuClass c) {
    switch (c) {
        case analysis::MuClass::le1: return "le1";
        case analysis::MuClass::gt1le2: return "gt1le2";
        case analysis::MuClass::gt2: return "gt2";
    }
    return "le1";
}

inline json slice_to_json(const analysis::SliceStats& s, bool with_mu) {
    json j{{"t_start", s.t_start},
           {"t_end", s.t_end},
           {"raw_rate", s.raw_rate},
           {"background_rate", s.background_rate},
           {"net_rate", s.net_rate}};
    if (with_mu) {
        j["mu_rec"] = s.mu_rec;
        j["mu_sat"] = s.mu_sat;
        j["mean_range_m"] = s.mean_range;
        j["downlink_db"] = s.downlink_db;
        j["class"] = class_name(s.mu_class);
    }
    return j;
}

inline json peak_to_json(const analysis::PeakStats& p) {
    return json{{"integration_time_s", p.integration_time},
                {"significance", p.significance},
                {"significance_err", p.significance_err},
                {"snr", p.snr},
                {"mean_rate", p.mean_rate},
                {"mean_mu_sat", p.mean_mu_sat},
                {"mean_downlink_db", p.mean_downlink_db},
                {"region_counts", p.region_counts},
                {"expected_background", p.expected_background},
                {"region_bins", p.region_bins},
                {"sideband_bins", p.sideband_bins},
                {"pooled_tags", p.pooled_tags}};
}

} // namespace detail

// simulate: synthesize the pass, write tags.csv, slr.csv and the truth
// sidecar (true pointing/gain/mu series) for downstream validation.
inline montecarlo::SimulatedPass cmd_simulate(const config::RunConfig& cfg,
                                              const std::string& out_dir) {
    const auto dir = detail::ensure_dir(out_dir);
    const auto table = build_table(cfg);
    const auto sim = montecarlo::simulate_pass(table, cfg.link_params(), cfg.detector_model(),
                                               cfg.pointing_model(), cfg.policy(), cfg.shutter(),
                                               cfg.require_seed(), cfg.background_rate,
                                               cfg.sim_dt);
    io::write_tags((dir / "tags.csv").string(), sim.tags);
    io::write_slr((dir / "slr.csv").string(), sim.slr_pairs);

    json truth{{"mean_gain", sim.truth.mean_gain},
               {"dt", sim.truth.dt},
               {"duty", sim.truth.duty},
               {"signal_count", sim.truth.signal_count},
               {"background_count", sim.truth.background_count}};
    json series = json::array();
    for (const auto& s : sim.truth.series)
        series.push_back(json{{"t", s.t},
                              {"theta_p", s.theta_p},
                              {"gain", s.gain},
                              {"mu_rec", s.mu_rec},
                              {"mu_sat", s.mu_sat},
                              {"range_m", s.range}});
    truth["series"] = std::move(series);
    detail::write_json_file(dir / "truth.json", truth);
    return sim;
}

struct AnalyzeResult {
    analysis::GaussFit fit;
    std::optional<double> background;
    std::optional<linkbudget::GainEstimate> gain;
    std::vector<analysis::SliceStats> coarse;
    std::vector<analysis::SliceStats> fine;
    std::optional<analysis::PeakStats> peak;
};

// analyze: rebuild the pass geometry from the ranging echoes alone,
// reconstruct the arrival comb, then run the statistics chain. Writes
// report.json plus the full and pooled residual histograms.
inline AnalyzeResult cmd_analyze(const config::RunConfig& cfg, const std::string& tags_path,
                                 const std::string& slr_path, const std::string& out_dir) {
    const auto dir = detail::ensure_dir(out_dir);
    const auto tags = io::read_tags(tags_path);
    const auto pairs = io::read_slr(slr_path);
    if (pairs.size() < 3) throw validation_error("need at least three ranging pairs");

    const auto table = timing::ephemeris_from_ranging(pairs, cfg.h_s, cfg.h_t);
    const auto grid = timing::reconstruct_tref(pairs, cfg.f_rep, pairs.front().t_exit,
                                               pairs.back().t_exit);
    const linkbudget::LinkParams p = cfg.link_params();
    const double bin_width = cfg.bin_ns * 1e-9;

    const auto hist = analysis::residual_histogram(tags, grid, bin_width);
    io::write_histogram((dir / "hist_full.csv").string(), hist);

    AnalyzeResult result;
    result.fit = analysis::gaussian_fit(hist);

    // record only the filenames: the report lives next to its inputs, and
    // embedding absolute paths would break byte-reproducibility across runs
    json report{{"tags_file", std::filesystem::path(tags_path).filename().string()},
                {"slr_file", std::filesystem::path(slr_path).filename().string()},
                {"slr_pairs", pairs.size()},
                {"coverage_begin_s", grid.coverage_begin()},
                {"coverage_end_s", grid.coverage_end()},
                {"in_coverage_tags", hist.total_tags},
                {"gauss_fit", detail::fit_to_json(result.fit)},
                {"background_rate", nullptr},
                {"gain_fit", nullptr},
                {"class", cfg.class_filter},
                {"peak", nullptr},
                {"slices_coarse", nullptr},
                {"slices_fine", nullptr}};

    // Without a resolved peak there is no sigma_g to slice against; the
    // flagged fit is the whole result.
    if (!result.fit.degenerate) {
        const double sigma_g = result.fit.sigma_g;
        const double duration = grid.coverage_end() - grid.coverage_begin();
        result.background = analysis::background_rate(tags, grid, sigma_g, duration);
        report["background_rate"] = *result.background;

        result.coarse = analysis::sliced_rates(tags, grid, sigma_g, cfg.slice_coarse);
        const auto gain = analysis::fit_transmitter_gain(result.coarse, table, p, cfg.mask);
        result.gain = gain;
        report["gain_fit"] = json{{"g_t", gain.G_t}, {"std_error", gain.std_error}};

        result.fine = analysis::mu_slices(tags, grid, table, p, sigma_g, cfg.slice_fine);
        const auto filter = cfg.class_filter_enum();
        result.peak = analysis::pooled_peak_stats(tags, grid, result.fine, filter, sigma_g,
                                                  bin_width, result.fit.delta0);
        report["peak"] = detail::peak_to_json(*result.peak);

        const auto pooled = analysis::histogram_from_residuals(
            analysis::pooled_residuals(tags, grid, result.fine, filter), bin_width,
            grid.period_ps());
        io::write_histogram((dir / "hist_peak.csv").string(), pooled);

        json coarse = json::array();
        for (const auto& s : result.coarse) coarse.push_back(detail::slice_to_json(s, false));
        report["slices_coarse"] = std::move(coarse);
        json fine = json::array();
        for (const auto& s : result.fine) fine.push_back(detail::slice_to_json(s, true));
        report["slices_fine"] = std::move(fine);
    }

    detail::write_json_file(dir / "report.json", report);
    return result;
}

// project: upgrade scenarios against a measured baseline. mu_sat_obs
// overrides the preset observation when the report provides one.
inline std::vector<projection::ProjectionReport> cmd_project(
    const std::vector<std::string>& scenarios, double baseline_snr,
    std::optional<double> mu_sat_obs, const std::string& out_dir) {
    const auto dir = detail::ensure_dir(out_dir);
    json doc{{"baseline_snr", baseline_snr}};
    json list = json::array();
    std::vector<projection::ProjectionReport> reports;
    for (const auto& name : scenarios) {
        auto scenario = projection::scenario_by_name(name);
        if (mu_sat_obs) scenario.mu_sat_obs = *mu_sat_obs;
        const auto r = projection::project(scenario, baseline_snr);
        reports.push_back(r);
        list.push_back(json{{"scenario", r.scenario},
                            {"mu_sat_obs", scenario.mu_sat_obs},
                            {"rate_factor", r.rate_factor},
                            {"noise_factor", r.noise_factor},
                            {"distance_factor", r.distance_factor},
                            {"dark_override_factor", r.dark_override_factor},
                            {"snr_projected", r.snr_projected},
                            {"qber", r.qber},
                            {"notes", r.notes}});
    }
    doc["scenarios"] = std::move(list);
    detail::write_json_file(dir / "projection.json", doc);
    return reports;
}

inline std::vector<std::string> all_scenarios() {
    return {"si-meo", "si-gnss", "snspd-meo", "snspd-gnss"};
}

// full-run: simulate, analyze the files just written, then project all
// scenarios off the measured peak. Also echoes the effective configuration
// and the ephemeris actually used, so a run directory is self-describing.
inline AnalyzeResult full_run(const config::RunConfig& cfg, const std::string& out_dir) {
    const auto dir = detail::ensure_dir(out_dir);
    {
        std::ofstream echo(dir / "config_echo.cfg", std::ios::trunc);
        if (!echo) throw error("cannot open output file: " + (dir / "config_echo.cfg").string());
        echo << config::serialize_config(cfg);
    }
    io::write_ephemeris((dir / "ephemeris.csv").string(), build_table(cfg).samples());
    cmd_simulate(cfg, out_dir);
    auto result = cmd_analyze(cfg, (dir / "tags.csv").string(), (dir / "slr.csv").string(),
                              out_dir);
    if (result.peak && result.peak->snr > 0.0)
        cmd_project(all_scenarios(), result.peak->snr,
                    result.peak->mean_mu_sat > 0.0 ? std::optional<double>(result.peak->mean_mu_sat)
                                                   : std::nullopt,
                    out_dir);
    return result;
}

} // namespace splink::pipeline
