#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splink/constants.hpp"
#include "splink/errors.hpp"
#include "splink/geometry.hpp"
#include "splink/linkbudget.hpp"
#include "splink/rng.hpp"
#include "splink/timing.hpp"

// Synthetic time-tag generation for a pass. A 43-minute pass carries ~2.6e11
// transmitter pulses, so nothing here ever loops per pulse: detections are
// drawn by thinning a bounding-rate Poisson process (cost proportional to the
// number of detections), then snapped onto the pulse lattice.
namespace splink::montecarlo {

struct DetectorModel {
    std::string name;
    double efficiency;   // photon detection efficiency
    double dark_rate;    // counts/s, datasheet dark/stray rate
    double jitter_fwhm;  // s, detector timing jitter (FWHM)
    double tdc_bin;      // s, time-to-digital converter resolution

    static DetectorModel pmt() { return {"pmt", 0.10, 50.0, 1.22e-9, 81e-12}; }
    static DetectorModel si_spad() { return {"si-spad", 0.48, 350.0, 50e-12, 81e-12}; }
    static DetectorModel snspd() { return {"snspd", 0.80, 10.0, 40e-12, 81e-12}; }

    static DetectorModel by_name(std::string_view n) {
        if (n == "pmt") return pmt();
        if (n == "si-spad") return si_spad();
        if (n == "snspd") return snspd();
        throw parameter_error("unknown detector preset '" + std::string(n) +
                              "' (expected pmt, si-spad or snspd)");
    }

    void validate() const {
        // efficiency 0 is allowed: it models a blocked detector (dark counts only)
        if (!(efficiency >= 0.0 && efficiency <= 1.0))
            throw parameter_error("detector efficiency must be in [0, 1]");
        if (!(dark_rate >= 0.0)) throw parameter_error("dark rate must be nonnegative");
        if (!(jitter_fwhm > 0.0)) throw parameter_error("jitter FWHM must be positive");
        if (!(tdc_bin > 0.0)) throw parameter_error("TDC bin must be positive");
    }
};

enum class Channel : int { detector = 0, slr_exit = 1, slr_return = 2 };

struct TimeTagRecord {
    std::int64_t timestamp_ps;
    Channel channel;

    friend bool operator<(const TimeTagRecord& a, const TimeTagRecord& b) {
        if (a.timestamp_ps != b.timestamp_ps) return a.timestamp_ps < b.timestamp_ps;
        return static_cast<int>(a.channel) < static_cast<int>(b.channel);
    }
    friend bool operator==(const TimeTagRecord& a, const TimeTagRecord& b) {
        return a.timestamp_ps == b.timestamp_ps && a.channel == b.channel;
    }
};

// Extra pointing error over a time window, e.g. the mid-pass tracking
// degradation visible as a rate drop near culmination.
struct ZenithExcess {
    double t_begin;      // s
    double t_end;        // s, exclusive
    double added_error;  // rad
};

struct PointingModel {
    double mean_error = 0.0;        // rad
    double sigma = 0.0;             // rad, stationary spread
    double correlation_time = 10.0; // s
    std::optional<ZenithExcess> zenith_excess;

    void validate() const {
        if (!(sigma >= 0.0)) throw parameter_error("pointing sigma must be nonnegative");
        if (!(correlation_time > 0.0))
            throw parameter_error("pointing correlation time must be positive");
        if (zenith_excess) {
            if (!(zenith_excess->t_end > zenith_excess->t_begin))
                throw parameter_error("pointing excess window must have positive length");
            if (!(zenith_excess->added_error >= 0.0))
                throw parameter_error("pointing excess must be nonnegative");
        }
    }
};

// Mean-reverting (Ornstein-Uhlenbeck) pointing-error series on a uniform
// grid i*dt, i = 0..ceil(duration/dt). The recursion runs on the unclipped
// process; the returned magnitudes are clipped at zero after adding any
// windowed excess, so the clipping does not distort the dynamics.
inline std::vector<double> pointing_error_series(const PointingModel& model, double duration,
                                                 double dt, rng::Key key) {
    model.validate();
    if (!(duration >= 0.0)) throw parameter_error("duration must be nonnegative");
    if (!(dt > 0.0)) throw parameter_error("time step must be positive");
    if (!(dt < model.correlation_time))
        throw parameter_error("time step must resolve the pointing correlation time");

    const auto n = static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
    const double phi = std::exp(-dt / model.correlation_time);
    const double kick = model.sigma * std::sqrt(1.0 - phi * phi);

    rng::Stream stream(key);
    std::vector<double> series(n + 1);
    double x = model.mean_error + model.sigma * stream.next_gaussian();
    for (std::size_t i = 0; i <= n; ++i) {
        if (i > 0) x = model.mean_error + (x - model.mean_error) * phi + kick * stream.next_gaussian();
        double theta = x;
        if (model.zenith_excess) {
            const double t = static_cast<double>(i) * dt;
            if (t >= model.zenith_excess->t_begin && t < model.zenith_excess->t_end)
                theta += model.zenith_excess->added_error;
        }
        series[i] = std::max(0.0, theta);
    }
    return series;
}

struct MuPolicy {
    enum class Kind { physical, fixed };
    Kind kind = Kind::physical;
    double mu_sat = 0.0; // photons/pulse at the satellite, used when kind == fixed

    static MuPolicy physical() { return {Kind::physical, 0.0}; }
    static MuPolicy fixed(double mu) {
        if (!(mu >= 0.0)) throw parameter_error("fixed mu_sat must be nonnegative");
        return {Kind::fixed, mu};
    }
};

// Optional transmit/receive alternation: the detector accepts events only
// during the leading receive_fraction of each period. The default (period 0)
// keeps the receiver open for the whole pass.
struct ShutterSchedule {
    double period = 0.0;           // s; <= 0 disables gating
    double receive_fraction = 1.0; // fraction of each period spent receiving

    void validate() const {
        if (period > 0.0) {
            if (!(receive_fraction > 0.0))
                throw validation_error("shutter schedule never receives");
            if (!(receive_fraction <= 1.0))
                throw validation_error("shutter receive fraction above 1");
        } else if (period < 0.0) {
            throw validation_error("shutter period must be nonnegative");
        }
    }

    bool receiving(double t) const {
        if (period <= 0.0 || receive_fraction >= 1.0) return true;
        const double phase = t / period - std::floor(t / period);
        return phase < receive_fraction;
    }

    double duty() const { return period <= 0.0 ? 1.0 : receive_fraction; }
};

// Lewis-Shedler thinning over [t_lo, t_hi): candidate events at constant
// bounding rate r_max, each kept with probability rate_fn(t)/r_max. The
// caller promises rate_fn <= r_max on the span; violations are audited at
// every candidate rather than trusted.
template <typename RateFn>
std::vector<double> thinned_poisson_events(RateFn&& rate_fn, double r_max, double t_lo,
                                           double t_hi, rng::Stream& stream) {
    if (!(t_hi >= t_lo)) throw parameter_error("event span end precedes its start");
    std::vector<double> events;
    if (r_max <= 0.0) return events;
    double t = t_lo;
    for (;;) {
        t += stream.next_exponential(r_max);
        if (t >= t_hi) break;
        const double r = rate_fn(t);
        if (r > r_max * (1.0 + 1e-12))
            throw numeric_error("event rate exceeds the thinning envelope");
        if (stream.next_double() * r_max < r) events.push_back(t);
    }
    return events;
}

struct TruthSample {
    double t;        // s
    double theta_p;  // rad, pointing error
    double gain;     // transmitter gain at theta_p
    double mu_rec;   // photons/pulse at the detector
    double mu_sat;   // photons/pulse at the satellite
    double range;    // m
};

struct PassTruth {
    std::vector<TruthSample> series; // on the simulation grid
    double dt = 1.0;
    double mean_gain = 0.0;          // plain time average of the gain series
    double duty = 1.0;
    std::int64_t signal_count = 0;
    std::int64_t background_count = 0;
};

struct SimulatedPass {
    std::vector<TimeTagRecord> tags;             // sorted by (timestamp, channel)
    std::vector<timing::SlrEpochPair> slr_pairs; // the ranging epochs, in seconds
    PassTruth truth;
};

namespace detail {

inline constexpr std::uint64_t salt_pointing = 0x706F696E74; // "point"
inline constexpr std::uint64_t salt_signal = 0x7369676E;     // "sign"
inline constexpr std::uint64_t salt_background = 0x6261636B; // "back"

inline std::int64_t integral_ps(double seconds, const char* what) {
    const double ps = seconds * 1e12;
    const auto q = std::llround(ps);
    if (!(q > 0) || std::fabs(ps - static_cast<double>(q)) > 1e-6)
        throw validation_error(std::string(what) + " must be an integer number of picoseconds");
    return q;
}

inline std::int64_t quantize_ps(std::int64_t v, std::int64_t q) {
    // nearest multiple of q, halves away from zero
    const std::int64_t m = v >= 0 ? (v + q / 2) / q : -((-v + q / 2) / q);
    return m * q;
}

} // namespace detail

// Generate the full tag stream of one pass: DETECTOR signal tags placed at
// per-pulse round-trip arrival + detector jitter, TDC-quantized; dark/stray
// counts as a homogeneous Poisson process over the receive windows; ranging
// exit/return tags on the shared-oscillator grid. Randomness is drawn from
// per-slice substreams of the master seed, so the output is reproducible and
// slices could be generated out of order without changing a single byte.
inline SimulatedPass simulate_pass(const geometry::EphemerisTable& table,
                                   const linkbudget::LinkParams& p, const DetectorModel& det,
                                   const PointingModel& pointing, const MuPolicy& policy,
                                   const ShutterSchedule& schedule, std::uint64_t seed,
                                   double background_rate = -1.0, double dt = 1.0) {
    det.validate();
    pointing.validate();
    schedule.validate();
    if (!(dt > 0.0)) throw parameter_error("simulation step must be positive");
    if (!(p.f_rep > 0.0)) throw parameter_error("repetition rate must be positive");
    if (!(p.eta_det > 0.0)) throw parameter_error("reference detector efficiency must be positive");

    const std::int64_t period_ps = detail::integral_ps(1.0 / p.f_rep, "pulse period");
    const std::int64_t tdc_ps = detail::integral_ps(det.tdc_bin, "TDC bin");

    const double t0 = table.t_begin();
    const double t1 = table.t_end();
    const double duration = t1 - t0;
    const double bg_rate = background_rate >= 0.0 ? background_rate : det.dark_rate;

    const rng::Key master{seed};
    const auto theta = pointing_error_series(pointing, duration, dt,
                                             master.child(detail::salt_pointing));

    auto theta_at = [&](double t) {
        const double u = std::clamp((t - t0) / dt, 0.0, static_cast<double>(theta.size() - 1));
        const auto i = std::min(static_cast<std::size_t>(u), theta.size() - 2);
        const double f = u - static_cast<double>(i);
        return theta[i] * (1.0 - f) + theta[i + 1] * f;
    };

    // The radar coefficient was calibrated with the reference receiver, so a
    // different detector only rescales the detected mean photon number by the
    // efficiency ratio; using det.efficiency outright would count the
    // reference efficiency twice.
    const double det_scale = det.efficiency / p.eta_det;
    const double photons = linkbudget::pulse_photons(p);
    const linkbudget::LinkParams p_det = p.with_detector_efficiency(det.efficiency);

    auto mu_rec_at = [&](double t) {
        const double tc = std::clamp(t, t0, t1);
        const double range = table.slant_range_at(tc);
        if (policy.kind == MuPolicy::Kind::fixed)
            return policy.mu_sat * linkbudget::downlink_transmittance(range, p_det);
        const double gain = linkbudget::transmitter_gain(p.theta_t, theta_at(tc));
        return photons * linkbudget::link_ratio(range, gain, p) * det_scale;
    };
    auto signal_rate = [&](double t) { return p.f_rep * (1.0 - std::exp(-mu_rec_at(t))); };

    SimulatedPass out;
    const rng::Key signal_key = master.child(detail::salt_signal);
    const rng::Key background_key = master.child(detail::salt_background);

    const auto n_slices = static_cast<std::uint64_t>(std::ceil(duration / dt - 1e-9));
    for (std::uint64_t i = 0; i < n_slices; ++i) {
        const double s_lo = t0 + static_cast<double>(i) * dt;
        const double s_hi = std::min(s_lo + dt, t1);
        if (!(s_hi > s_lo)) continue;

        // Envelope: lattice maximum with headroom; the audit inside the
        // thinning loop catches any rate spike the lattice missed.
        double r_peak = 0.0;
        for (int j = 0; j <= 4; ++j)
            r_peak = std::max(r_peak, signal_rate(s_lo + (s_hi - s_lo) * j / 4.0));
        const double r_max = 1.05 * r_peak;
        if (r_max <= 0.0) continue;

        rng::Stream stream(signal_key.child(i));
        double t = s_lo;
        for (;;) {
            t += stream.next_exponential(r_max);
            if (t >= s_hi) break;
            const double r = signal_rate(t);
            if (r > r_max * (1.0 + 1e-12))
                throw numeric_error("signal rate exceeds the thinning envelope");
            if (!(stream.next_double() * r_max < r)) continue;

            // Snap the accepted event onto the pulse lattice.
            const auto pulse = std::llround(t * p.f_rep);
            const double t_emit = static_cast<double>(pulse) / p.f_rep;
            if (t_emit < t0 || t_emit > t1) continue;
            double rtt;
            try {
                rtt = timing::round_trip_time(table, t_emit, p.c);
            } catch (const span_error&) {
                continue; // bounce ran off the table: inside the final light-time
            }
            if (!schedule.receiving(t_emit + rtt)) continue;
            const double jitter =
                stream.next_gaussian() * det.jitter_fwhm / consts::fwhm_over_sigma;
            const std::int64_t arrival =
                pulse * period_ps + std::llround((rtt + jitter) * 1e12);
            out.tags.push_back({detail::quantize_ps(arrival, tdc_ps), Channel::detector});
            ++out.truth.signal_count;
        }
    }

    // Background covers arrivals, which lag emissions by up to one light time.
    const double bg_end = t1 + 2.0 * table.slant_range_at(t1) / p.c;
    if (bg_rate > 0.0) {
        const auto n_bg = static_cast<std::uint64_t>(std::ceil((bg_end - t0) / dt - 1e-9));
        for (std::uint64_t i = 0; i < n_bg; ++i) {
            const double s_lo = t0 + static_cast<double>(i) * dt;
            const double s_hi = std::min(s_lo + dt, bg_end);
            rng::Stream stream(background_key.child(i));
            for (double t : thinned_poisson_events([&](double) { return bg_rate; }, bg_rate,
                                                   s_lo, s_hi, stream)) {
                if (!schedule.receiving(t)) continue;
                out.tags.push_back(
                    {detail::quantize_ps(consts::round_ps(t), tdc_ps), Channel::detector});
                ++out.truth.background_count;
            }
        }
    }

    out.slr_pairs = timing::generate_slr_epochs(table, p);
    for (const auto& pair : out.slr_pairs) {
        out.tags.push_back({consts::round_ps(pair.t_exit), Channel::slr_exit});
        out.tags.push_back({consts::round_ps(pair.t_return), Channel::slr_return});
    }
    std::sort(out.tags.begin(), out.tags.end());

    out.truth.dt = dt;
    out.truth.duty = schedule.duty();
    const auto n_grid = static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
    double gain_sum = 0.0;
    for (std::size_t i = 0; i <= n_grid; ++i) {
        TruthSample s;
        s.t = std::min(t0 + static_cast<double>(i) * dt, t1);
        s.theta_p = theta_at(s.t);
        s.gain = linkbudget::transmitter_gain(p.theta_t, s.theta_p);
        s.mu_rec = mu_rec_at(s.t);
        s.range = table.slant_range_at(s.t);
        const double down = linkbudget::downlink_transmittance(s.range, p_det);
        s.mu_sat = down > 0.0 ? s.mu_rec / down : 0.0;
        gain_sum += s.gain;
        out.truth.series.push_back(s);
    }
    out.truth.mean_gain = gain_sum / static_cast<double>(n_grid + 1);
    return out;
}

} // namespace splink::montecarlo
