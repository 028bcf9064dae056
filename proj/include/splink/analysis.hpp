#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "splink/constants.hpp"
#include "splink/errors.hpp"
#include "splink/geometry.hpp"
#include "splink/linkbudget.hpp"
#include "splink/montecarlo.hpp"
#include "splink/rng.hpp"
#include "splink/timing.hpp"

// The statistics chain applied to a tag stream: residual histograms around
// the reconstructed arrival comb, Gaussian peak fits, sideband background
// estimation, slice rates, the one-parameter transmitter-gain fit, per-slice
// mean photon numbers with their classification, and pooled peak
// significance/SNR over selected slices.
namespace splink::analysis {

struct ResidualHistogram {
    double bin_width = 0.4e-9;          // s
    std::vector<double> centers;        // s, uniformly spaced, 0 is a center
    std::vector<std::int64_t> counts;
    std::int64_t total_tags = 0;        // tags that landed in the histogram
};

struct GaussFit {
    double delta0 = 0.0;     // s, peak offset
    double sigma_g = 0.0;    // s, peak width
    double amplitude = 0.0;  // counts at peak above baseline
    double baseline = 0.0;   // counts per bin
    double delta0_err = 0.0, sigma_g_err = 0.0, amplitude_err = 0.0, baseline_err = 0.0;
    bool degenerate = false; // peak indistinguishable from baseline fluctuations
};

enum class MuClass { le1, gt1le2, gt2 };

struct SliceStats {
    double t_start = 0.0, t_end = 0.0;   // s
    double raw_rate = 0.0;               // counts/s
    double background_rate = 0.0;        // counts/s
    double net_rate = 0.0;               // counts/s
    double mu_rec = 0.0;                 // photons/pulse at the detector
    double mu_sat = 0.0;                 // photons/pulse at the satellite
    double mean_range = 0.0;             // m
    double downlink_db = 0.0;            // dB
    MuClass mu_class = MuClass::le1;
    std::int64_t raw_count = 0;
};

struct PeakStats {
    double integration_time = 0.0;       // s, total selected slice time
    double significance = 0.0;           // sigma units over sideband dispersion
    double significance_err = 0.0;       // bootstrap dispersion over resampled sidebands
    double snr = 0.0;                    // (peak - background) / background in the region
    double mean_rate = 0.0;              // counts/s, time-weighted net rate
    double mean_mu_sat = 0.0;
    double mean_downlink_db = 0.0;
    std::int64_t region_counts = 0;
    double expected_background = 0.0;    // counts expected in the peak region
    int region_bins = 0;
    int sideband_bins = 0;
    std::int64_t pooled_tags = 0;
};

namespace detail {

// Odd bin count spanning at least one inter-pulse period with 0 as a center.
inline int histogram_bin_count(double bin_width_s, std::int64_t period_ps) {
    const double ratio = static_cast<double>(period_ps) * 1e-12 / bin_width_s;
    const int half = static_cast<int>(std::ceil((ratio - 1.0) / 2.0 - 1e-9));
    return 2 * std::max(half, 0) + 1;
}

inline std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> a,
                                    std::array<double, 4> b) {
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        if (std::fabs(a[piv][c]) < 1e-300) throw numeric_error("singular normal equations");
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < 4; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int k = c; k < 4; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::array<double, 4> x{};
    for (int r = 3; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < 4; ++k) s -= a[r][k] * x[k];
        x[r] = s / a[r][r];
    }
    return x;
}

// In-coverage detector tags as (arrival seconds, residual ps) pairs.
inline std::vector<std::pair<double, double>> residual_events(
    const std::vector<montecarlo::TimeTagRecord>& tags, const timing::TrefGrid& grid) {
    std::vector<std::pair<double, double>> events;
    for (const auto& tag : tags) {
        if (tag.channel != montecarlo::Channel::detector) continue;
        if (auto r = grid.try_nearest_residual_ps(tag.timestamp_ps))
            events.emplace_back(static_cast<double>(tag.timestamp_ps) * 1e-12, *r);
    }
    return events;
}

} // namespace detail

// Histogram of residuals (in picoseconds) over one inter-pulse period.
inline ResidualHistogram histogram_from_residuals(const std::vector<double>& residuals_ps,
                                                  double bin_width_s, std::int64_t period_ps) {
    if (!(bin_width_s > 0.0)) throw parameter_error("bin width must be positive");
    if (!(period_ps > 0)) throw parameter_error("period must be positive");
    const int n = detail::histogram_bin_count(bin_width_s, period_ps);
    const int mid = (n - 1) / 2;

    ResidualHistogram hist;
    hist.bin_width = bin_width_s;
    hist.centers.resize(n);
    hist.counts.assign(n, 0);
    for (int j = 0; j < n; ++j) hist.centers[j] = (j - mid) * bin_width_s;
    const double w_ps = bin_width_s * 1e12;
    for (double r : residuals_ps) {
        const auto j = static_cast<int>(std::llround(r / w_ps)) + mid;
        ++hist.counts[std::clamp(j, 0, n - 1)];
        ++hist.total_tags;
    }
    return hist;
}

// Residuals of every in-coverage detector tag against its nearest
// reconstructed arrival, histogrammed over one period centered at zero.
inline ResidualHistogram residual_histogram(const std::vector<montecarlo::TimeTagRecord>& tags,
                                            const timing::TrefGrid& grid,
                                            double bin_width = 0.4e-9) {
    std::vector<double> residuals;
    for (const auto& tag : tags) {
        if (tag.channel != montecarlo::Channel::detector) continue;
        if (auto r = grid.try_nearest_residual_ps(tag.timestamp_ps)) residuals.push_back(*r);
    }
    return histogram_from_residuals(residuals, bin_width, grid.period_ps());
}

// Least-squares fit of baseline + amplitude * exp(-(x-delta0)^2 / 2 sigma^2)
// to the histogram, by Levenberg-Marquardt with an analytic Jacobian. Works
// in nanoseconds internally so the normal equations stay well conditioned.
inline GaussFit gaussian_fit(const ResidualHistogram& hist) {
    const std::size_t n = hist.centers.size();
    std::size_t nonempty = 0;
    for (auto c : hist.counts) nonempty += c > 0 ? 1 : 0;
    if (nonempty < 6) throw validation_error("need at least six nonempty histogram bins");

    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = hist.centers[i] * 1e9;
        y[i] = static_cast<double>(hist.counts[i]);
    }
    const double w_ns = hist.bin_width * 1e9;

    // Initialization: peak bin, median baseline, half-max width.
    std::size_t peak = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (y[i] > y[peak]) peak = i;
    std::vector<double> sorted_y = y;
    std::nth_element(sorted_y.begin(), sorted_y.begin() + n / 2, sorted_y.end());
    const double baseline0 = sorted_y[n / 2];
    const double amp0 = y[peak] - baseline0;

    auto degenerate_result = [&](double b, double a, double mu, double s) {
        GaussFit fit;
        fit.baseline = std::max(0.0, b);
        fit.amplitude = std::max(0.0, a);
        fit.delta0 = mu * 1e-9;
        fit.sigma_g = s * 1e-9;
        fit.degenerate = true;
        return fit;
    };

    const double half = baseline0 + amp0 / 2.0;
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && y[lo] > half) --lo;
    while (hi + 1 < n && y[hi] > half) ++hi;
    double sigma0 = ((x[hi] - x[lo]) / 2.0) / 1.177;
    sigma0 = std::clamp(sigma0, w_ns / 2.0, x.back() - x.front());

    if (amp0 < 2.0 * std::sqrt(std::max(baseline0, 0.0)) || amp0 <= 0.0)
        return degenerate_result(baseline0, amp0, x[peak], sigma0);

    std::array<double, 4> q{baseline0, amp0, x[peak], sigma0}; // b, A, mu, sigma
    auto ssr_at = [&](const std::array<double, 4>& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (x[i] - p[2]) / p[3];
            const double r = y[i] - (p[0] + p[1] * std::exp(-0.5 * u * u));
            s += r * r;
        }
        return s;
    };

    double ssr = ssr_at(q);
    double lambda = 1e-3;
    double last_rel = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::array<std::array<double, 4>, 4> jtj{};

    for (int iter = 0; iter < 200 && !converged; ++iter) {
        jtj = {};
        std::array<double, 4> jtr{};
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (x[i] - q[2]) / q[3];
            const double e = std::exp(-0.5 * u * u);
            const std::array<double, 4> j{1.0, e, q[1] * e * u / q[3], q[1] * e * u * u / q[3]};
            const double r = y[i] - (q[0] + q[1] * e);
            for (int a = 0; a < 4; ++a) {
                jtr[a] += j[a] * r;
                for (int b = 0; b < 4; ++b) jtj[a][b] += j[a] * j[b];
            }
        }

        bool stepped = false;
        std::array<double, 4> delta{};
        for (int damp = 0; damp < 40 && !stepped; ++damp) {
            auto a = jtj;
            for (int d = 0; d < 4; ++d) a[d][d] *= 1.0 + lambda;
            try {
                delta = detail::solve4(a, jtr);
            } catch (const numeric_error&) {
                lambda *= 10.0;
                continue;
            }
            std::array<double, 4> cand{q[0] + delta[0], q[1] + delta[1], q[2] + delta[2],
                                       std::fabs(q[3] + delta[3])};
            if (cand[3] < 1e-6) cand[3] = 1e-6;
            if (ssr_at(cand) < ssr) {
                q = cand;
                ssr = ssr_at(cand);
                lambda = std::max(lambda / 10.0, 1e-12);
                stepped = true;
            } else {
                lambda *= 10.0;
                if (lambda > 1e14) break;
            }
        }
        last_rel = 0.0;
        for (int a = 0; a < 4; ++a)
            last_rel = std::max(last_rel, std::fabs(delta[a]) / std::max(std::fabs(q[a]), 1e-3));
        if (!stepped) break;           // no improving step left: at the optimum
        if (last_rel < 1e-8) converged = true;
    }
    if (!converged && last_rel > 1e-6)
        throw numeric_error("peak fit did not converge");

    GaussFit fit;
    fit.baseline = std::max(0.0, q[0]);
    fit.amplitude = std::max(0.0, q[1]);
    fit.delta0 = q[2] * 1e-9;
    fit.sigma_g = std::fabs(q[3]) * 1e-9;
    fit.degenerate = q[1] < 2.0 * std::sqrt(std::max(q[0], 0.0));

    // Covariance: ssr/(n-4) * inverse of the undamped normal matrix.
    if (n > 4) {
        const double var = ssr / static_cast<double>(n - 4);
        try {
            std::array<double, 4> err{};
            for (int c = 0; c < 4; ++c) {
                std::array<double, 4> unit{};
                unit[c] = 1.0;
                err[c] = detail::solve4(jtj, unit)[c]; // diagonal of the inverse
            }
            fit.baseline_err = std::sqrt(std::max(0.0, var * err[0]));
            fit.amplitude_err = std::sqrt(std::max(0.0, var * err[1]));
            fit.delta0_err = std::sqrt(std::max(0.0, var * err[2])) * 1e-9;
            fit.sigma_g_err = std::sqrt(std::max(0.0, var * err[3])) * 1e-9;
        } catch (const numeric_error&) {
            fit.degenerate = true;
        }
    }
    return fit;
}

// Background rate from the sidebands: tags farther than 6 sigma_g from the
// comb, rescaled by the sideband fraction of the period to the equivalent
// full-period rate.
inline double background_rate(const std::vector<montecarlo::TimeTagRecord>& tags,
                              const timing::TrefGrid& grid, double sigma_g, double duration) {
    if (!(sigma_g > 0.0)) throw parameter_error("sigma_g must be positive");
    if (!(duration > 0.0)) throw parameter_error("duration must be positive");
    const double period_s = static_cast<double>(grid.period_ps()) * 1e-12;
    const double sideband_fraction = (period_s - 12.0 * sigma_g) / period_s;
    if (!(sideband_fraction > 0.0))
        throw validation_error("sideband vanishes: 12 sigma_g exceeds the pulse period");

    const double cut_ps = 6.0 * sigma_g * 1e12;
    std::int64_t sideband = 0;
    for (const auto& tag : tags) {
        if (tag.channel != montecarlo::Channel::detector) continue;
        if (auto r = grid.try_nearest_residual_ps(tag.timestamp_ps))
            sideband += std::fabs(*r) > cut_ps ? 1 : 0;
    }
    return static_cast<double>(sideband) / (duration * sideband_fraction);
}

namespace detail {

// Shared per-slice rate computation over the grid coverage. Slices start at
// the coverage begin; a trailing fragment shorter than half a slice is
// dropped (it carries almost no counts but a wild rate variance).
inline std::vector<SliceStats> rate_slices(const std::vector<montecarlo::TimeTagRecord>& tags,
                                           const timing::TrefGrid& grid, double sigma_g,
                                           double slice_len) {
    if (!(slice_len > 0.0)) throw parameter_error("slice length must be positive");
    if (!(sigma_g > 0.0)) throw parameter_error("sigma_g must be positive");
    const double t0 = grid.coverage_begin();
    const double t1 = grid.coverage_end();
    if (!(t1 - t0 > slice_len)) throw validation_error("pass shorter than one slice");
    const double period_s = static_cast<double>(grid.period_ps()) * 1e-12;
    const double sideband_fraction = (period_s - 12.0 * sigma_g) / period_s;
    if (!(sideband_fraction > 0.0))
        throw validation_error("sideband vanishes: 12 sigma_g exceeds the pulse period");
    const double cut_ps = 6.0 * sigma_g * 1e12;

    const auto events = residual_events(tags, grid);
    std::vector<SliceStats> slices;
    std::size_t cursor = 0;
    for (double start = t0; start < t1; start += slice_len) {
        const double end = std::min(start + slice_len, t1);
        if (end - start < 0.5 * slice_len) break;
        SliceStats s;
        s.t_start = start;
        s.t_end = end;
        std::int64_t sideband = 0;
        while (cursor < events.size() && events[cursor].first < end) {
            if (events[cursor].first >= start) {
                ++s.raw_count;
                sideband += std::fabs(events[cursor].second) > cut_ps ? 1 : 0;
            }
            ++cursor;
        }
        const double len = end - start;
        s.raw_rate = static_cast<double>(s.raw_count) / len;
        s.background_rate = static_cast<double>(sideband) / (len * sideband_fraction);
        s.net_rate = s.raw_rate - s.background_rate;
        slices.push_back(s);
    }
    return slices;
}

// Time-averaged slant range over a slice (trapezoid on ~1 s steps), with the
// evaluation clamped to the ephemeris span.
inline double slice_mean_range(const geometry::EphemerisTable& table, double t_start,
                               double t_end) {
    const auto steps = std::max<int>(2, static_cast<int>(std::ceil(t_end - t_start)));
    double sum = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double t = std::clamp(t_start + (t_end - t_start) * i / steps, table.t_begin(),
                                    table.t_end());
        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
        sum += w * table.slant_range_at(t);
    }
    return sum / steps;
}

} // namespace detail

// Mean rates per slice (default 60 s): raw, sideband background, net.
inline std::vector<SliceStats> sliced_rates(const std::vector<montecarlo::TimeTagRecord>& tags,
                                            const timing::TrefGrid& grid, double sigma_g,
                                            double slice_len = 60.0) {
    return detail::rate_slices(tags, grid, sigma_g, slice_len);
}

// One-parameter least squares of net slice rates against the radar-equation
// shape f_rep * photons/pulse * alpha * T_a^2 / R^4 evaluated at the
// slice-mean range; the transmitter gain is the only free parameter. Slices
// intersecting a masked interval are excluded.
inline linkbudget::GainEstimate fit_transmitter_gain(
    const std::vector<SliceStats>& slices, const geometry::EphemerisTable& table,
    const linkbudget::LinkParams& p,
    const std::vector<std::pair<double, double>>& mask = {}) {
    const double scale = p.f_rep * linkbudget::pulse_photons(p) * p.alpha;
    double sum_my = 0.0, sum_mm = 0.0;
    std::vector<std::pair<double, double>> used; // (model, net rate)
    for (const auto& s : slices) {
        bool masked = false;
        for (const auto& [m0, m1] : mask)
            masked = masked || (s.t_start < m1 && s.t_end > m0);
        if (masked) continue;
        const double range = detail::slice_mean_range(table, s.t_start, s.t_end);
        const double ta = linkbudget::atmospheric_transmission(range, p);
        const double m = scale * ta * ta / (range * range * range * range);
        used.emplace_back(m, s.net_rate);
        sum_my += m * s.net_rate;
        sum_mm += m * m;
    }
    if (used.size() < 5) throw validation_error("fewer than five unmasked slices");
    const double gain = sum_my / sum_mm;
    double ssr = 0.0;
    for (const auto& [m, yv] : used) {
        const double r = yv - gain * m;
        ssr += r * r;
    }
    const double se =
        std::sqrt(ssr / static_cast<double>(used.size() - 1) / sum_mm);
    return {gain, se};
}

// Per-slice mean photon numbers (default 10 s): mu_rec from the net rate,
// mu_sat through the downlink transmittance at the slice-mean range, and the
// occupancy class used for pooled statistics.
inline std::vector<SliceStats> mu_slices(const std::vector<montecarlo::TimeTagRecord>& tags,
                                         const timing::TrefGrid& grid,
                                         const geometry::EphemerisTable& table,
                                         const linkbudget::LinkParams& p, double sigma_g,
                                         double slice_len = 10.0) {
    auto slices = detail::rate_slices(tags, grid, sigma_g, slice_len);
    for (auto& s : slices) {
        s.mean_range = detail::slice_mean_range(table, s.t_start, s.t_end);
        const double down = linkbudget::downlink_transmittance(s.mean_range, p);
        s.downlink_db = linkbudget::to_decibel(down);
        s.mu_rec = s.net_rate / p.f_rep;
        s.mu_sat = s.mu_rec / down; // keeps the sign of a negative net rate
        s.mu_class = s.mu_sat <= 1.0 ? MuClass::le1
                                     : (s.mu_sat <= 2.0 ? MuClass::gt1le2 : MuClass::gt2);
    }
    return slices;
}

enum class ClassFilter { le1, le2, all };

inline bool selects(ClassFilter filter, MuClass c) {
    switch (filter) {
        case ClassFilter::le1: return c == MuClass::le1;
        case ClassFilter::le2: return c != MuClass::gt2;
        case ClassFilter::all: return true;
    }
    return false;
}

// Residuals (ps) of the detector tags that fall inside slices selected by
// the occupancy filter.
inline std::vector<double> pooled_residuals(const std::vector<montecarlo::TimeTagRecord>& tags,
                                            const timing::TrefGrid& grid,
                                            const std::vector<SliceStats>& slices,
                                            ClassFilter filter) {
    const auto events = detail::residual_events(tags, grid);
    std::vector<double> residuals;
    std::size_t cursor = 0;
    for (const auto& s : slices) {
        if (!selects(filter, s.mu_class)) continue;
        while (cursor < events.size() && events[cursor].first < s.t_end) {
            if (events[cursor].first >= s.t_start) residuals.push_back(events[cursor].second);
            ++cursor;
        }
    }
    return residuals;
}

// Pool the slices selected by the occupancy filter and measure the central
// peak against the sideband prediction: significance in units of the
// sideband bin-count dispersion scaled to the region size, SNR against the
// expected background, plus the time-weighted slice summaries. The quoted
// significance_err is the dispersion over deterministic bootstrap resamples
// of the sideband bins.
inline PeakStats pooled_peak_stats(const std::vector<montecarlo::TimeTagRecord>& tags,
                                   const timing::TrefGrid& grid,
                                   const std::vector<SliceStats>& slices, ClassFilter filter,
                                   double sigma_g, double bin_width = 0.4e-9,
                                   double delta0 = 0.0) {
    if (!(sigma_g > 0.0)) throw parameter_error("sigma_g must be positive");
    std::vector<const SliceStats*> selected;
    for (const auto& s : slices)
        if (selects(filter, s.mu_class)) selected.push_back(&s);
    if (selected.empty()) throw validation_error("no slices match the class filter");

    const auto hist = histogram_from_residuals(pooled_residuals(tags, grid, slices, filter),
                                               bin_width, grid.period_ps());

    PeakStats stats;
    stats.pooled_tags = hist.total_tags;
    double region = 0.0;
    std::vector<double> sideband;
    for (std::size_t i = 0; i < hist.centers.size(); ++i) {
        const double d = std::fabs(hist.centers[i] - delta0);
        if (d <= 3.0 * sigma_g) {
            region += static_cast<double>(hist.counts[i]);
            ++stats.region_bins;
        } else if (d > 6.0 * sigma_g) {
            sideband.push_back(static_cast<double>(hist.counts[i]));
        }
    }
    if (stats.region_bins == 0 || sideband.size() < 2)
        throw validation_error("peak region or sideband empty at this sigma_g");
    stats.sideband_bins = static_cast<int>(sideband.size());
    stats.region_counts = static_cast<std::int64_t>(region);

    const auto side_mean = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double c : v) m += c;
        return m / static_cast<double>(v.size());
    };
    const auto side_sd = [&](const std::vector<double>& v) {
        const double m = side_mean(v);
        double ss = 0.0;
        for (double c : v) ss += (c - m) * (c - m);
        double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        if (sd <= 0.0) sd = std::sqrt(std::max(m, 1.0)); // flat sideband: Poisson floor
        return sd;
    };

    const double n_region = static_cast<double>(stats.region_bins);
    const double mean_bg = side_mean(sideband);
    stats.expected_background = mean_bg * n_region;
    const double dispersion = side_sd(sideband) * std::sqrt(n_region);
    stats.significance = (region - stats.expected_background) / dispersion;
    stats.snr = stats.expected_background > 0.0
                    ? (region - stats.expected_background) / stats.expected_background
                    : 0.0;

    // Bootstrap the sideband bins (fixed seed: the quoted error must not
    // change from run to run).
    rng::Stream boot(rng::Key{0x73696465}.child(sideband.size())); // "side"
    const int replicas = 200;
    double sum = 0.0, sum2 = 0.0;
    std::vector<double> resampled(sideband.size());
    for (int b = 0; b < replicas; ++b) {
        for (auto& v : resampled)
            v = sideband[static_cast<std::size_t>(boot.next_double() *
                                                  static_cast<double>(sideband.size()))];
        const double s = (region - side_mean(resampled) * n_region) /
                         (side_sd(resampled) * std::sqrt(n_region));
        sum += s;
        sum2 += s * s;
    }
    const double mean_s = sum / replicas;
    stats.significance_err = std::sqrt(std::max(0.0, sum2 / replicas - mean_s * mean_s));

    double time = 0.0, rate = 0.0, mu = 0.0, db = 0.0;
    for (const auto* s : selected) {
        const double len = s->t_end - s->t_start;
        time += len;
        rate += s->net_rate * len;
        mu += s->mu_sat * len;
        db += s->downlink_db * len;
    }
    stats.integration_time = time;
    stats.mean_rate = rate / time;
    stats.mean_mu_sat = mu / time;
    stats.mean_downlink_db = db / time;
    return stats;
}

} // namespace splink::analysis
