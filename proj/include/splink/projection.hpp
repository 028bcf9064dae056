#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "splink/errors.hpp"
#include "splink/montecarlo.hpp"

// Detector-upgrade and orbit-scaling arithmetic: how the measured link would
// perform with a faster/quieter detector, a modulated retroreflector holding
// the satellite photon number constant, and a longer slant range.
namespace splink::projection {

struct ProjectionScenario {
    std::string name;
    montecarlo::DetectorModel baseline = montecarlo::DetectorModel::pmt();
    montecarlo::DetectorModel upgraded = montecarlo::DetectorModel::pmt();
    double mu_fixed = 0.6;       // photons/pulse held by a modulated retroreflector
    double mu_sat_obs = 0.55;    // observed mean photons/pulse at the satellite
    double r_baseline = 7000e3;  // m
    double r_target = 7000e3;    // m
    std::optional<double> dark_target; // counts/s, assumed improved dark rate
    double mu_safety_bound = 1.0;      // single-photon security limit on mu_fixed
    std::vector<std::string> notes;

    void validate() const {
        baseline.validate();
        upgraded.validate();
        if (!(mu_fixed > 0.0)) throw parameter_error("mu_fixed must be positive");
        if (!(mu_fixed <= mu_safety_bound))
            throw parameter_error("mu_fixed exceeds the configured safety bound");
        if (!(mu_sat_obs > 0.0)) throw parameter_error("observed mu_sat must be positive");
        if (!(r_baseline > 0.0 && r_target > 0.0))
            throw parameter_error("ranges must be positive");
        if (dark_target && !(*dark_target > 0.0))
            throw parameter_error("dark-rate target must be positive");
    }
};

struct ProjectionReport {
    std::string scenario;
    double rate_factor = 1.0;
    double noise_factor = 1.0;
    double distance_factor = 1.0;      // signal reduction, (R_target / R_baseline)^2
    double dark_override_factor = 1.0; // upgraded dark rate / assumed target
    double snr_projected = 0.0;
    double qber = 0.0;
    std::vector<std::string> notes;
};

// Detection-rate gain: photon-number headroom times efficiency ratio.
inline double rate_factor(const ProjectionScenario& s) {
    if (!(s.baseline.efficiency > 0.0))
        throw parameter_error("baseline efficiency must be positive");
    if (!(s.mu_sat_obs > 0.0)) throw parameter_error("observed mu_sat must be positive");
    return (s.mu_fixed / s.mu_sat_obs) * (s.upgraded.efficiency / s.baseline.efficiency);
}

// In-window noise reduction: dark-rate ratio times coincidence-window ratio.
inline double noise_factor(const ProjectionScenario& s) {
    if (!(s.upgraded.dark_rate > 0.0))
        throw parameter_error("upgraded dark rate must be positive");
    if (!(s.upgraded.jitter_fwhm > 0.0))
        throw parameter_error("upgraded jitter must be positive");
    return (s.baseline.dark_rate / s.upgraded.dark_rate) *
           (s.baseline.jitter_fwhm / s.upgraded.jitter_fwhm);
}

inline double distance_scaling(double r_baseline, double r_target) {
    if (!(r_baseline > 0.0 && r_target > 0.0)) throw parameter_error("ranges must be positive");
    return (r_target / r_baseline) * (r_target / r_baseline);
}

// QBER model: accidental fraction N/(S+N) = 1/(1+SNR). This is the single
// documented transformation; scenarios whose quoted reference values come
// from an unstated noise model carry the discrepancy in their notes.
inline double qber_from_snr(double snr) {
    if (!(snr >= 0.0)) throw parameter_error("snr must be nonnegative");
    return std::clamp(1.0 / (1.0 + snr), 0.0, 0.5);
}

inline ProjectionReport project(const ProjectionScenario& s, double baseline_snr) {
    s.validate();
    if (!(baseline_snr > 0.0)) throw parameter_error("baseline snr must be positive");
    ProjectionReport r;
    r.scenario = s.name;
    r.rate_factor = rate_factor(s);
    r.noise_factor = noise_factor(s);
    r.distance_factor = distance_scaling(s.r_baseline, s.r_target);
    if (s.dark_target) r.dark_override_factor = s.upgraded.dark_rate / *s.dark_target;
    r.snr_projected = baseline_snr * r.rate_factor * r.noise_factor * r.dark_override_factor /
                      r.distance_factor;
    r.qber = qber_from_snr(r.snr_projected);
    r.notes = s.notes;
    return r;
}

// Named upgrade scenarios against the 7000 km single-photon baseline. GNSS
// scenarios use the 23000 km upper slant bound.
inline ProjectionScenario scenario_by_name(std::string_view name) {
    ProjectionScenario s;
    s.name = std::string(name);
    if (name == "si-meo") {
        s.upgraded = montecarlo::DetectorModel::si_spad();
        s.notes = {"reference value for this scenario: QBER ~ 3.6% (SNR gain ~ 18); "
                   "the 1/(1+snr) model reproduces it within 0.1%"};
    } else if (name == "si-gnss") {
        s.upgraded = montecarlo::DetectorModel::si_spad();
        s.r_target = 23000e3;
        s.dark_target = 100.0;
        s.notes = {"reference value for this scenario: QBER ~ 6.6%; the documented "
                   "1/(1+snr) model gives ~10% because the noise transformation behind "
                   "the reference figure is not stated; both are reported"};
    } else if (name == "snspd-meo") {
        s.upgraded = montecarlo::DetectorModel::snspd();
        s.notes = {"reference value for this scenario: QBER ~ 0.5%; the documented "
                   "1/(1+snr) model gives ~0.05%; see the si-gnss note on model "
                   "discrepancies"};
    } else if (name == "snspd-gnss") {
        s.upgraded = montecarlo::DetectorModel::snspd();
        s.r_target = 23000e3;
        s.notes = {"reference value for this scenario: QBER ~ 3%; the documented "
                   "1/(1+snr) model gives ~0.5%; see the si-gnss note on model "
                   "discrepancies"};
    } else {
        throw parameter_error("unknown projection scenario '" + std::string(name) +
                              "' (expected si-meo, si-gnss, snspd-meo or snspd-gnss)");
    }
    return s;
}

} // namespace splink::projection
