#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "splink/constants.hpp"
#include "splink/errors.hpp"
#include "splink/rng.hpp"

// Pass geometry: slant range and range rate of the satellite as seen from the
// ground station, either synthesized from a circular-orbit model or loaded
// from an external ephemeris.
namespace splink::geometry {

struct EphemerisSample {
    double t;                // s, pass-relative epoch
    double range;            // m, station-to-satellite slant range
    double radial_velocity;  // m/s, dR/dt (positive = receding)
};

// Slant range when the satellite is tangent to the station's horizon.
inline double horizon_slant_range(double h_s, double h_t, double earth_radius) {
    const double r_s = earth_radius + h_s;
    const double r_t = earth_radius + h_t;
    if (r_s <= r_t) throw parameter_error("satellite altitude must exceed station altitude");
    return std::sqrt(r_s * r_s - r_t * r_t);
}

// Analytic overhead-pass model: circular orbit around a spherical Earth, the
// sub-satellite track a great circle offset from the station by a fixed
// cross-track angle chosen to reach the requested culmination elevation.
// Earth rotation is folded into the (Keplerian) relative angular rate; the
// model is meant to produce realistic R(t) profiles, not real ephemerides.
class OverheadPassModel {
public:
    OverheadPassModel(double h_s, double max_elevation, double duration,
                      double earth_radius, double h_t)
        : r_s_(earth_radius + h_s), r_t_(earth_radius + h_t), duration_(duration) {
        if (duration <= 0.0) throw parameter_error("pass duration must be positive");
        if (r_s_ <= r_t_) throw parameter_error("satellite altitude must exceed station altitude");
        if (max_elevation <= 0.0 || max_elevation > consts::pi / 2.0 + 1e-12)
            throw parameter_error("max elevation must lie in (0, pi/2]");

        omega_ = std::sqrt(consts::earth_mu / (r_s_ * r_s_ * r_s_));
        gamma_horizon_ = std::acos(r_t_ / r_s_);
        offset_ = solve_offset(std::min(max_elevation, consts::pi / 2.0));

        // Keep the whole pass above the horizon; beyond it the station no
        // longer sees the satellite and the link formulas lose meaning. The
        // half-window solves cos(offset) cos(omega tau) = cos(gamma_horizon);
        // testing endpoint elevation instead would wrap around (and pass)
        // once the duration exceeds a full orbital period.
        const double ratio =
            std::clamp(std::cos(gamma_horizon_) / std::cos(offset_), -1.0, 1.0);
        const double half_window = std::acos(ratio) / omega_;
        if (duration / 2.0 > half_window * (1.0 + 1e-12))
            throw parameter_error("pass duration exceeds the horizon-to-horizon visibility window");
    }

    // Central angle between station and satellite position vectors.
    double central_angle(double t) const {
        const double c = std::cos(offset_) * std::cos(omega_ * (t - duration_ / 2.0));
        return std::acos(std::clamp(c, -1.0, 1.0));
    }

    double range(double t) const {
        const double cg = std::cos(offset_) * std::cos(omega_ * (t - duration_ / 2.0));
        return std::sqrt(r_s_ * r_s_ + r_t_ * r_t_ - 2.0 * r_s_ * r_t_ * cg);
    }

    // dR/dt, exact derivative of range() above.
    double radial_velocity(double t) const {
        const double dt = t - duration_ / 2.0;
        return r_s_ * r_t_ * std::cos(offset_) * omega_ * std::sin(omega_ * dt) / range(t);
    }

    double elevation(double t) const {
        const double cg = std::cos(offset_) * std::cos(omega_ * (t - duration_ / 2.0));
        return std::asin(std::clamp((r_s_ * cg - r_t_) / range(t), -1.0, 1.0));
    }

    double angular_rate() const { return omega_; }
    double cross_track_offset() const { return offset_; }
    double duration() const { return duration_; }

private:
    // Elevation is monotone decreasing in the central angle, so the offset
    // that culminates at the requested elevation comes from a bisection.
    double solve_offset(double max_elevation) const {
        if (max_elevation >= consts::pi / 2.0 - 1e-12) return 0.0;
        auto elev_at = [&](double gamma) {
            const double r = std::sqrt(r_s_ * r_s_ + r_t_ * r_t_ - 2.0 * r_s_ * r_t_ * std::cos(gamma));
            return std::asin(std::clamp((r_s_ * std::cos(gamma) - r_t_) / r, -1.0, 1.0));
        };
        double lo = 0.0, hi = gamma_horizon_;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (elev_at(mid) > max_elevation ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    double r_s_, r_t_, duration_;
    double omega_ = 0.0, gamma_horizon_ = 0.0, offset_ = 0.0;
};

// Sampled pass geometry with interpolating accessors. Samples must be
// strictly ordered in time and no closer than the zenith geometry allows.
class EphemerisTable {
public:
    EphemerisTable(std::vector<EphemerisSample> samples, double h_s, double h_t)
        : samples_(std::move(samples)), h_s_(h_s), h_t_(h_t) {
        if (samples_.size() < 2) throw validation_error("ephemeris needs at least two samples");
        const double floor_range = h_s_ - h_t_;
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            if (i > 0 && !(samples_[i].t > samples_[i - 1].t))
                throw validation_error("ephemeris epochs must be strictly increasing");
            // 1 mm slack: ranging-derived tables carry ps-level round-trip rounding
            if (samples_[i].range + 1e-3 < floor_range)
                throw validation_error("slant range below the zenith minimum h_s - h_t");
            if (!std::isfinite(samples_[i].range) || !std::isfinite(samples_[i].radial_velocity))
                throw validation_error("non-finite ephemeris sample");
        }
    }

    const std::vector<EphemerisSample>& samples() const { return samples_; }
    double h_s() const { return h_s_; }
    double h_t() const { return h_t_; }
    double t_begin() const { return samples_.front().t; }
    double t_end() const { return samples_.back().t; }

    // Piecewise-cubic Hermite interpolation with three-point finite-difference
    // tangents: local (no global solve), exact at the samples, C1 across
    // segments, and exact end to end for quadratic range histories.
    double slant_range_at(double t) const {
        const std::size_t i = segment_index(t);
        const auto& a = samples_[i];
        const auto& b = samples_[i + 1];
        const double h = b.t - a.t;
        const double s = (t - a.t) / h;
        const double s2 = s * s, s3 = s2 * s;
        const double m0 = tangent(i), m1 = tangent(i + 1);
        return (2 * s3 - 3 * s2 + 1) * a.range + (s3 - 2 * s2 + s) * h * m0 +
               (-2 * s3 + 3 * s2) * b.range + (s3 - s2) * h * m1;
    }

    // Range rate is diagnostic only; linear interpolation is plenty.
    double radial_velocity_at(double t) const {
        const std::size_t i = segment_index(t);
        const auto& a = samples_[i];
        const auto& b = samples_[i + 1];
        const double s = (t - a.t) / (b.t - a.t);
        return (1.0 - s) * a.radial_velocity + s * b.radial_velocity;
    }

private:
    std::size_t segment_index(double t) const {
        if (!(t >= t_begin() && t <= t_end()))
            throw span_error("epoch outside the ephemeris span");
        auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                   [](double v, const EphemerisSample& s) { return v < s.t; });
        std::size_t i = static_cast<std::size_t>(it - samples_.begin());
        if (i == 0) return 0;
        if (i >= samples_.size()) return samples_.size() - 2;
        return i - 1;
    }

    // Derivative of the Newton quadratic through the three nearest samples.
    // Interior points recover the central difference on uniform grids; the
    // boundary stencils stay second order (a one-sided two-point difference
    // would leak O(h) tangent error into the first and last segments).
    double tangent(std::size_t i) const {
        const auto& s = samples_;
        if (s.size() == 2) return (s[1].range - s[0].range) / (s[1].t - s[0].t);
        const std::size_t j = i == 0 ? 0 : (i == s.size() - 1 ? s.size() - 3 : i - 1);
        const double d01 = (s[j + 1].range - s[j].range) / (s[j + 1].t - s[j].t);
        const double d12 = (s[j + 2].range - s[j + 1].range) / (s[j + 2].t - s[j + 1].t);
        const double d012 = (d12 - d01) / (s[j + 2].t - s[j].t);
        return d01 + d012 * (2.0 * s[i].t - s[j].t - s[j + 1].t);
    }

    std::vector<EphemerisSample> samples_;
    double h_s_, h_t_;
};

// Sample the analytic pass model on a uniform grid. noise_sigma, when
// nonzero, adds independent Gaussian range noise (residual ranging error)
// to the stored ranges; the velocities stay those of the smooth model.
inline EphemerisTable synthetic_pass(double h_s, double max_elevation, double duration,
                                     double dt, double earth_radius, double h_t,
                                     double noise_sigma = 0.0, std::uint64_t noise_seed = 0) {
    if (dt <= 0.0) throw parameter_error("sample spacing must be positive");
    if (duration < dt) throw parameter_error("pass shorter than one sample interval");
    OverheadPassModel model(h_s, max_elevation, duration, earth_radius, h_t);

    rng::Stream noise(rng::Key{noise_seed}.child(0x67656F6D)); // "geom"
    std::vector<EphemerisSample> samples;
    const auto n = static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
    samples.reserve(n + 1);
    const double floor_range = h_s - h_t;
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) * dt;
        double r = model.range(t);
        if (noise_sigma > 0.0) r = std::max(floor_range, r + noise_sigma * noise.next_gaussian());
        samples.push_back({t, r, model.radial_velocity(t)});
    }
    return EphemerisTable(std::move(samples), h_s, h_t);
}

} // namespace splink::geometry
