#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "splink/config.hpp"
#include "splink/errors.hpp"
#include "splink/pipeline.hpp"

namespace {

std::pair<double, double> parse_mask_arg(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw splink::parameter_error("--mask expects START:END in seconds");
    std::size_t used_a = 0, used_b = 0;
    double a = 0.0, b = 0.0;
    try {
        a = std::stod(s.substr(0, colon), &used_a);
        b = std::stod(s.substr(colon + 1), &used_b);
    } catch (const std::exception&) {
        throw splink::parameter_error("--mask expects numeric START:END");
    }
    if (used_a != colon || used_b != s.size() - colon - 1)
        throw splink::parameter_error("--mask expects numeric START:END");
    if (!(b > a)) throw splink::parameter_error("--mask interval must have positive length");
    return {a, b};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-photon satellite-link simulator and analysis toolkit"};
    app.require_subcommand(1);

    std::string config_path, tags_path, slr_path, out_dir, report_path;
    std::string class_filter;
    std::vector<std::string> mask_args, scenario_args;
    std::uint64_t seed = 0;
    double bin_ns = 0.0, snr_arg = 0.0, mu_arg = 0.0;

    auto* cmd_sim = app.add_subcommand("simulate", "generate a synthetic pass: tags.csv, slr.csv, truth.json");
    auto* cmd_ana = app.add_subcommand("analyze", "reconstruct the arrival comb and run the statistics chain");
    auto* cmd_fit = app.add_subcommand("fit-gain", "analyze, reporting just the transmitter-gain fit");
    auto* cmd_prj = app.add_subcommand("project", "detector-upgrade and orbit-scaling projections");
    auto* cmd_all = app.add_subcommand("full-run", "simulate, analyze and project in one output directory");

    CLI::Option *sim_seed = nullptr, *all_seed = nullptr;
    CLI::Option *sim_out = nullptr, *ana_out = nullptr, *fit_out = nullptr, *prj_out = nullptr,
                *all_out = nullptr;
    CLI::Option *ana_bin = nullptr, *fit_bin = nullptr, *all_bin = nullptr;
    CLI::Option *ana_cls = nullptr, *fit_cls = nullptr, *all_cls = nullptr;
    CLI::Option *prj_snr = nullptr, *prj_mu = nullptr, *prj_rep = nullptr;

    cmd_sim->add_option("--config", config_path, "run configuration file")->required();
    sim_seed = cmd_sim->add_option("--seed", seed, "override the configured seed");
    sim_out = cmd_sim->add_option("--out", out_dir, "output directory (default: config out_dir)");

    for (auto* c : {cmd_ana, cmd_fit}) {
        c->add_option("--config", config_path, "run configuration file")->required();
        c->add_option("--tags", tags_path, "time-tag CSV (channel,timestamp_ps)")->required();
        c->add_option("--slr", slr_path, "ranging CSV (t_exit_ps,t_return_ps)")->required();
    }
    ana_out = cmd_ana->add_option("--out", out_dir, "output directory (default: config out_dir)");
    fit_out = cmd_fit->add_option("--out", out_dir, "output directory (default: config out_dir)");
    ana_bin = cmd_ana->add_option("--bin-ns", bin_ns, "histogram bin width in ns");
    fit_bin = cmd_fit->add_option("--bin-ns", bin_ns, "histogram bin width in ns");
    ana_cls = cmd_ana->add_option("--class", class_filter, "slice selection: le1, le2 or all");
    fit_cls = cmd_fit->add_option("--class", class_filter, "slice selection: le1, le2 or all");
    cmd_ana->add_option("--mask", mask_args, "exclude interval START:END seconds (repeatable)");
    cmd_fit->add_option("--mask", mask_args, "exclude interval START:END seconds (repeatable)");

    prj_rep = cmd_prj->add_option("--report", report_path, "take baseline SNR and mu_sat from a report.json");
    prj_snr = cmd_prj->add_option("--snr", snr_arg, "baseline SNR (alternative to --report)");
    prj_mu = cmd_prj->add_option("--mu", mu_arg, "observed mu_sat (with --snr; default 0.55)");
    cmd_prj->add_option("--scenario", scenario_args,
                        "si-meo, si-gnss, snspd-meo, snspd-gnss (repeatable; default all)");
    prj_out = cmd_prj->add_option("--out", out_dir, "output directory (default: .)");

    cmd_all->add_option("--config", config_path, "run configuration file")->required();
    all_seed = cmd_all->add_option("--seed", seed, "override the configured seed");
    all_out = cmd_all->add_option("--out", out_dir, "output directory (default: config out_dir)");
    all_bin = cmd_all->add_option("--bin-ns", bin_ns, "histogram bin width in ns");
    all_cls = cmd_all->add_option("--class", class_filter, "slice selection: le1, le2 or all");
    cmd_all->add_option("--mask", mask_args, "exclude interval START:END seconds (repeatable)");

    CLI11_PARSE(app, argc, argv);

    const auto load_config = [&](CLI::Option* seed_opt, CLI::Option* bin_opt,
                                 CLI::Option* cls_opt) {
        auto cfg = splink::config::parse_config(config_path);
        if (seed_opt && seed_opt->count()) cfg.seed = seed;
        if (bin_opt && bin_opt->count()) cfg.bin_ns = bin_ns;
        if (cls_opt && cls_opt->count()) cfg.class_filter = class_filter;
        for (const auto& m : mask_args) cfg.mask.push_back(parse_mask_arg(m));
        return cfg;
    };
    const auto resolve_out = [&](CLI::Option* opt, const std::string& fallback) {
        return opt->count() ? out_dir : fallback;
    };

    const auto print_analysis = [](const splink::pipeline::AnalyzeResult& r, bool gain_only) {
        std::cout << std::setprecision(4);
        if (r.fit.degenerate) {
            std::cout << "analyze: no distinguishable peak (degenerate fit flagged)\n";
            return;
        }
        if (!gain_only)
            std::cout << "peak: delta0 = " << r.fit.delta0 * 1e9 << " ns, sigma_g = "
                      << r.fit.sigma_g * 1e9 << " ns\n";
        if (r.gain)
            std::cout << "transmitter gain: " << r.gain->G_t << " +/- " << r.gain->std_error
                      << '\n';
        if (!gain_only && r.peak)
            std::cout << "pooled " << r.peak->integration_time << " s: rate "
                      << r.peak->mean_rate << " c/s, snr " << r.peak->snr << ", significance "
                      << r.peak->significance << " +/- " << r.peak->significance_err
                      << ", mean mu_sat " << r.peak->mean_mu_sat << '\n';
    };

    const auto body = [&]() {
        if (cmd_sim->parsed()) {
            const auto cfg = load_config(sim_seed, nullptr, nullptr);
            const auto dir = resolve_out(sim_out, cfg.out_dir);
            const auto sim = splink::pipeline::cmd_simulate(cfg, dir);
            std::cout << "simulate: " << sim.tags.size() << " tags ("
                      << sim.truth.signal_count << " signal, " << sim.truth.background_count
                      << " background), " << sim.slr_pairs.size() << " ranging pairs -> " << dir
                      << '\n';
        } else if (cmd_ana->parsed() || cmd_fit->parsed()) {
            const bool gain_only = cmd_fit->parsed();
            const auto cfg = load_config(nullptr, gain_only ? fit_bin : ana_bin,
                                         gain_only ? fit_cls : ana_cls);
            const auto dir = resolve_out(gain_only ? fit_out : ana_out, cfg.out_dir);
            const auto result = splink::pipeline::cmd_analyze(cfg, tags_path, slr_path, dir);
            print_analysis(result, gain_only);
            std::cout << "report written to " << dir << "/report.json\n";
        } else if (cmd_prj->parsed()) {
            double baseline = 0.0;
            std::optional<double> mu;
            if (prj_rep->count()) {
                std::ifstream in(report_path);
                if (!in) throw splink::validation_error("cannot open report: " + report_path);
                const auto doc = nlohmann::ordered_json::parse(in, nullptr, true);
                if (!doc.contains("peak") || doc["peak"].is_null())
                    throw splink::validation_error("report has no peak statistics to project from");
                baseline = doc["peak"]["snr"].get<double>();
                const double m = doc["peak"]["mean_mu_sat"].get<double>();
                if (m > 0.0) mu = m;
            } else if (prj_snr->count()) {
                baseline = snr_arg;
                if (prj_mu->count()) mu = mu_arg;
            } else {
                throw splink::parameter_error("project needs --report or --snr");
            }
            const auto scenarios =
                scenario_args.empty() ? splink::pipeline::all_scenarios() : scenario_args;
            const auto dir = resolve_out(prj_out, ".");
            const auto reports = splink::pipeline::cmd_project(scenarios, baseline, mu, dir);
            std::cout << std::setprecision(4);
            for (const auto& r : reports)
                std::cout << r.scenario << ": snr " << r.snr_projected << ", qber "
                          << r.qber * 100.0 << "%\n";
        } else if (cmd_all->parsed()) {
            const auto cfg = load_config(all_seed, all_bin, all_cls);
            const auto dir = resolve_out(all_out, cfg.out_dir);
            const auto result = splink::pipeline::full_run(cfg, dir);
            print_analysis(result, false);
            std::cout << "full run written to " << dir << '\n';
        }
    };

    try {
        body();
    } catch (const splink::parse_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const splink::numeric_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const splink::parameter_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const splink::validation_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const splink::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const splink::span_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
