#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "splink/constants.hpp"
#include "splink/errors.hpp"
#include "splink/geometry.hpp"
#include "splink/linkbudget.hpp"

// Pulse timing: two-way light time, ranging epochs, and reconstruction of the
// expected single-photon arrival comb ("reference times") from sparse ranging
// echoes. Internally everything absolute is integer picoseconds; round-trip
// times are small enough (tens of ms) to keep sub-picosecond resolution in a
// double, and absolute epochs never pass through floating point.
namespace splink::timing {

struct SlrEpochPair {
    double t_exit;    // s, ranging pulse emission epoch
    double t_return;  // s, ranging pulse return epoch
};

// Two-way light time for a pulse emitted at t_emit toward the satellite and
// retroreflected back to the (static) station: solve the implicit bounce time
// t_b = t_emit + R(t_b)/c by fixed-point iteration. The iteration contracts
// at |dR/dt|/c ~ 1e-5 per step, so a handful of rounds reaches the 0.05 ps
// stopping tolerance.
inline double round_trip_time(const geometry::EphemerisTable& table, double t_emit,
                              double c = consts::speed_of_light) {
    // Iterate on the one-way light time rather than the absolute bounce
    // epoch: late in a pass one ULP of t is coarser than the convergence
    // threshold, while the light time itself (tens of ms) has plenty of
    // resolution left.
    double up = table.slant_range_at(t_emit) / c; // seed: ignore motion
    for (int i = 0; i < 50; ++i) {
        const double next = table.slant_range_at(t_emit + up) / c;
        const double step = next - up;
        up = next;
        if (std::fabs(step) < 0.05e-12)
            return up + table.slant_range_at(t_emit + up) / c;
    }
    throw numeric_error("round-trip light-time iteration did not converge");
}

// Received pulse separation for a nominal emitted separation dt at radial
// velocity v_r: dt * (1 + 2 v_r / c), to first order in v_r/c.
inline double doppler_pulse_separation(double nominal_dt, double v_r,
                                       double c = consts::speed_of_light) {
    if (nominal_dt <= 0.0) throw parameter_error("pulse separation must be positive");
    return nominal_dt * (1.0 + 2.0 * v_r / c);
}

// Noiseless ranging epochs on the shared-oscillator fire grid: exits at the
// multiples of 1/f_slr inside the table span, returns after the exact
// two-way light time. Exits whose bounce falls off the table are dropped
// (this trims at most the final fraction of a second of a pass).
inline std::vector<SlrEpochPair> generate_slr_epochs(const geometry::EphemerisTable& table,
                                                     const linkbudget::LinkParams& p) {
    if (p.f_slr <= 0.0) throw parameter_error("ranging rate must be positive");
    if (table.t_end() - table.t_begin() < 1.0 / p.f_slr)
        throw validation_error("ephemeris spans less than one ranging period");
    std::vector<SlrEpochPair> pairs;
    const auto k_first = static_cast<std::int64_t>(std::ceil(table.t_begin() * p.f_slr - 1e-9));
    for (std::int64_t k = k_first;; ++k) {
        const double t_exit = static_cast<double>(k) / p.f_slr;
        if (t_exit > table.t_end()) break;
        try {
            pairs.push_back({t_exit, t_exit + round_trip_time(table, t_exit, p.c)});
        } catch (const span_error&) {
            break; // bounce beyond the table: end of usable epochs
        }
    }
    return pairs;
}

enum class TrefMode {
    batch,  // centered three-pair windows (default)
    causal  // trailing three-pair windows, usable in streaming settings
};

// Expected-arrival comb: for every transmitter pulse k (emission k / f_rep)
// the reconstructed arrival is emission + RTT^(t), with RTT^ a piecewise
// quadratic through sliding three-pair windows of the ranging echoes. Stored
// compressed (one quadratic per window); per-pulse arrays would need one
// entry per 10 ns over the whole pass.
class TrefGrid {
public:
    TrefGrid(std::vector<SlrEpochPair> pairs, double f_rep, double span_begin,
             double span_end, TrefMode mode = TrefMode::batch) {
        if (pairs.size() < 3) throw validation_error("need at least three ranging pairs");
        if (f_rep <= 0.0) throw parameter_error("repetition rate must be positive");
        const double period_s = 1.0 / f_rep;
        const double period_ps_real = period_s * 1e12;
        period_ps_ = std::llround(period_ps_real);
        if (std::fabs(period_ps_real - static_cast<double>(period_ps_)) > 1e-6)
            throw validation_error("pulse period must be an integer number of picoseconds");

        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (i > 0 && !(pairs[i].t_exit > pairs[i - 1].t_exit))
                throw validation_error("ranging exits must be strictly increasing");
            if (!(pairs[i].t_return > pairs[i].t_exit))
                throw validation_error("ranging return precedes its exit");
            // Shared oscillator: every exit must sit on the pulse grid.
            const double frac = pairs[i].t_exit * f_rep;
            if (std::fabs(frac - std::round(frac)) > 1e-3)
                throw validation_error("ranging exit not aligned with the pulse grid");
        }

        const std::size_t n = pairs.size();

        if (mode == TrefMode::batch) {
            // Window centered on pair i, valid between the midpoints toward
            // its neighbours; the first/last windows absorb the end gaps.
            for (std::size_t i = 1; i + 1 < n; ++i) {
                Segment s;
                s.t_lo = (i == 1) ? pairs[0].t_exit
                                  : 0.5 * (pairs[i - 1].t_exit + pairs[i].t_exit);
                s.t_hi = (i + 2 == n) ? pairs[n - 1].t_exit
                                      : 0.5 * (pairs[i].t_exit + pairs[i + 1].t_exit);
                fill_quadratic(s, pairs[i - 1], pairs[i], pairs[i + 1]);
                segments_.push_back(s);
            }
        } else {
            // Causal: the window ending at pair i extrapolates forward to
            // pair i+1's exit, using only already-received echoes.
            for (std::size_t i = 2; i < n; ++i) {
                Segment s;
                s.t_lo = pairs[i].t_exit;
                s.t_hi = (i + 1 < n) ? pairs[i + 1].t_exit : pairs[i].t_exit + (pairs[i].t_exit - pairs[i - 1].t_exit);
                fill_quadratic(s, pairs[i - 2], pairs[i - 1], pairs[i]);
                segments_.push_back(s);
            }
        }

        coverage_lo_ = std::max(span_begin, segments_.front().t_lo);
        coverage_hi_ = std::min(span_end, segments_.back().t_hi);
        if (!(coverage_hi_ > coverage_lo_))
            throw validation_error("requested span does not overlap the ranging coverage");

        first_pulse_ = static_cast<std::int64_t>(std::ceil(coverage_lo_ * f_rep - 1e-9));
        last_pulse_ = static_cast<std::int64_t>(std::floor(coverage_hi_ * f_rep + 1e-9));
        if (last_pulse_ < first_pulse_)
            throw validation_error("no pulse emission epochs inside the covered span");

        // Tags within half a period of the edge arrivals still belong to the
        // edge pulses, so pad the assignable window accordingly.
        arrival_lo_ps_ = emission_ps(first_pulse_) +
                         std::llround(rtt_ps_at(emission_seconds(first_pulse_))) - period_ps_ / 2;
        arrival_hi_ps_ = emission_ps(last_pulse_) +
                         std::llround(rtt_ps_at(emission_seconds(last_pulse_))) + period_ps_ / 2;
    }

    std::int64_t first_pulse() const { return first_pulse_; }
    std::int64_t last_pulse() const { return last_pulse_; }
    std::int64_t period_ps() const { return period_ps_; }
    double coverage_begin() const { return coverage_lo_; }
    double coverage_end() const { return coverage_hi_; }

    std::int64_t emission_ps(std::int64_t pulse) const { return pulse * period_ps_; }
    double emission_seconds(std::int64_t pulse) const {
        return static_cast<double>(pulse) * static_cast<double>(period_ps_) * 1e-12;
    }

    // Interpolated round-trip time at an emission epoch, in picoseconds.
    double rtt_ps_at(double t_emit) const {
        const Segment& s = segment_for(t_emit);
        const double u0 = t_emit - s.x0;
        const double u1 = t_emit - s.x1;
        return (s.y0 + s.d01 * u0 + s.d012 * u0 * u1) * 1e12;
    }

    // Signed offset of a tag from the reconstructed arrival of a given pulse.
    // Computed as (tag - emission) - RTT^: the integer subtraction is exact,
    // and the remaining doubles are tens of ms at sub-fs resolution.
    double residual_ps_for(std::int64_t tag_ps, std::int64_t pulse) const {
        const double from_emission = static_cast<double>(tag_ps - emission_ps(pulse));
        return from_emission - rtt_ps_at(emission_seconds(pulse));
    }

    // Pulse whose reconstructed arrival is nearest to the tag.
    std::int64_t nearest_pulse(std::int64_t tag_ps) const {
        require_in_coverage(tag_ps);
        // Invert tag = emission + RTT(emission) by fixed point on the
        // emission epoch, then compare the integer neighbours.
        double t_emit = clamp_emission(static_cast<double>(tag_ps) * 1e-12);
        for (int i = 0; i < 4; ++i)
            t_emit = clamp_emission((static_cast<double>(tag_ps) - rtt_ps_at(t_emit)) * 1e-12);
        const auto center = static_cast<std::int64_t>(std::llround(
            t_emit * 1e12 / static_cast<double>(period_ps_)));
        std::int64_t best = 0;
        double best_abs = 0.0;
        bool have = false;
        for (std::int64_t k = center - 1; k <= center + 1; ++k) {
            if (k < first_pulse_ || k > last_pulse_) continue;
            const double r = std::fabs(residual_ps_for(tag_ps, k));
            if (!have || r < best_abs) {
                best = k;
                best_abs = r;
                have = true;
            }
        }
        if (!have) throw span_error("tag outside the reconstructed comb");
        return best;
    }

    double nearest_residual_ps(std::int64_t tag_ps) const {
        return residual_ps_for(tag_ps, nearest_pulse(tag_ps));
    }

    std::optional<double> try_nearest_residual_ps(std::int64_t tag_ps) const {
        if (tag_ps < arrival_lo_ps_ || tag_ps > arrival_hi_ps_) return std::nullopt;
        return nearest_residual_ps(tag_ps);
    }

    // Spacing between consecutive reconstructed arrivals, in picoseconds.
    double arrival_spacing_ps(std::int64_t pulse) const {
        return static_cast<double>(period_ps_) + rtt_ps_at(emission_seconds(pulse + 1)) -
               rtt_ps_at(emission_seconds(pulse));
    }

private:
    struct Segment {
        double t_lo, t_hi;       // emission-epoch validity window
        double x0, x1;           // Newton nodes (first two pair exits)
        double y0, d01, d012;    // Newton coefficients of RTT(t), seconds
    };

    static void fill_quadratic(Segment& s, const SlrEpochPair& a, const SlrEpochPair& b,
                               const SlrEpochPair& c) {
        const double y0 = a.t_return - a.t_exit;
        const double y1 = b.t_return - b.t_exit;
        const double y2 = c.t_return - c.t_exit;
        s.x0 = a.t_exit;
        s.x1 = b.t_exit;
        s.y0 = y0;
        s.d01 = (y1 - y0) / (b.t_exit - a.t_exit);
        const double d12 = (y2 - y1) / (c.t_exit - b.t_exit);
        s.d012 = (d12 - s.d01) / (c.t_exit - a.t_exit);
    }

    const Segment& segment_for(double t_emit) const {
        if (!(t_emit >= segments_.front().t_lo - 1e-12 && t_emit <= segments_.back().t_hi + 1e-12))
            throw span_error("emission epoch outside the ranging coverage");
        auto it = std::upper_bound(segments_.begin(), segments_.end(), t_emit,
                                   [](double v, const Segment& s) { return v < s.t_lo; });
        if (it != segments_.begin()) --it;
        return *it;
    }

    double clamp_emission(double t) const {
        return std::clamp(t, segments_.front().t_lo, segments_.back().t_hi);
    }

    void require_in_coverage(std::int64_t tag_ps) const {
        if (tag_ps < arrival_lo_ps_ || tag_ps > arrival_hi_ps_)
            throw span_error("tag outside the reconstructed comb");
    }

    std::vector<Segment> segments_;
    std::int64_t period_ps_ = 0;
    std::int64_t first_pulse_ = 0, last_pulse_ = 0;
    std::int64_t arrival_lo_ps_ = 0, arrival_hi_ps_ = 0;
    double coverage_lo_ = 0.0, coverage_hi_ = 0.0;
};

inline TrefGrid reconstruct_tref(std::vector<SlrEpochPair> pairs, double f_rep,
                                 double span_begin, double span_end,
                                 TrefMode mode = TrefMode::batch) {
    return TrefGrid(std::move(pairs), f_rep, span_begin, span_end, mode);
}

// Seconds-facing convenience wrapper around the picosecond machinery.
inline double nearest_tref_residual(const TrefGrid& grid, double tag_seconds) {
    return grid.nearest_residual_ps(consts::round_ps(tag_seconds)) * 1e-12;
}

// Rebuild pass geometry from the ranging echoes themselves: each pair gives
// one range sample R = c * RTT / 2 at the bounce epoch t_exit + RTT / 2
// (exact for a static station). Range rate comes from central differences.
inline geometry::EphemerisTable ephemeris_from_ranging(const std::vector<SlrEpochPair>& pairs,
                                                       double h_s, double h_t,
                                                       double c = consts::speed_of_light) {
    if (pairs.size() < 3) throw validation_error("need at least three ranging pairs");
    std::vector<geometry::EphemerisSample> samples(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double rtt = pairs[i].t_return - pairs[i].t_exit;
        if (!(rtt > 0.0)) throw validation_error("ranging return precedes its exit");
        samples[i].t = pairs[i].t_exit + 0.5 * rtt;
        samples[i].range = 0.5 * c * rtt;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::size_t lo = (i == 0) ? 0 : i - 1;
        const std::size_t hi = (i + 1 == samples.size()) ? i : i + 1;
        samples[i].radial_velocity =
            (samples[hi].range - samples[lo].range) / (samples[hi].t - samples[lo].t);
    }
    return geometry::EphemerisTable(std::move(samples), h_s, h_t);
}

} // namespace splink::timing
