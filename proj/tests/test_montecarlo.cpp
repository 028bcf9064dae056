#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splink/montecarlo.hpp"

using namespace splink;
using Catch::Approx;

namespace {

geometry::EphemerisTable static_table(double range, double duration) {
    std::vector<geometry::EphemerisSample> s;
    for (double t = 0.0; t <= duration + 1e-9; t += 1.0) s.push_back({t, range, 0.0});
    return {std::move(s), 5620e3, 537.0};
}

std::size_t detector_tags(const montecarlo::SimulatedPass& sim) {
    return static_cast<std::size_t>(
        std::count_if(sim.tags.begin(), sim.tags.end(), [](const auto& t) {
            return t.channel == montecarlo::Channel::detector;
        }));
}

} // namespace

TEST_CASE("detector presets and validation") {
    const auto pmt = montecarlo::DetectorModel::pmt();
    CHECK(pmt.efficiency == 0.10);
    CHECK(pmt.dark_rate == 50.0);
    CHECK(pmt.jitter_fwhm == 1.22e-9);
    CHECK(pmt.tdc_bin == 81e-12);
    CHECK(montecarlo::DetectorModel::si_spad().efficiency == 0.48);
    CHECK(montecarlo::DetectorModel::snspd().dark_rate == 10.0);
    CHECK(montecarlo::DetectorModel::by_name("si-spad").name == "si-spad");
    CHECK_THROWS_AS(montecarlo::DetectorModel::by_name("emccd"), parameter_error);

    auto d = pmt;
    d.efficiency = 1.2;
    CHECK_THROWS_AS(d.validate(), parameter_error);
    d = pmt;
    d.efficiency = 0.0; // blocked detector is legal: dark counts only
    CHECK_NOTHROW(d.validate());
    d = pmt;
    d.dark_rate = -1.0;
    CHECK_THROWS_AS(d.validate(), parameter_error);
    d = pmt;
    d.tdc_bin = 0.0;
    CHECK_THROWS_AS(d.validate(), parameter_error);
}

TEST_CASE("shutter schedule") {
    montecarlo::ShutterSchedule s{2.0, 0.25};
    CHECK_NOTHROW(s.validate());
    CHECK(s.duty() == 0.25);
    CHECK(s.receiving(0.1));
    CHECK(s.receiving(2.49));
    CHECK_FALSE(s.receiving(0.6));
    CHECK_FALSE(s.receiving(1.99));
    CHECK(montecarlo::ShutterSchedule{}.receiving(12345.6));
    CHECK(montecarlo::ShutterSchedule{}.duty() == 1.0);
    CHECK_THROWS_AS((montecarlo::ShutterSchedule{2.0, 0.0}.validate()), validation_error);
    CHECK_THROWS_AS((montecarlo::ShutterSchedule{2.0, 1.5}.validate()), validation_error);
    CHECK_THROWS_AS((montecarlo::ShutterSchedule{-1.0, 0.5}.validate()), validation_error);
}

TEST_CASE("thinned poisson events: constant rate count") {
    rng::Stream stream(rng::Key{99});
    const auto events =
        montecarlo::thinned_poisson_events([](double) { return 1000.0; }, 1000.0, 0.0, 10.0,
                                           stream);
    // N ~ Poisson(10^4)
    CHECK(std::fabs(static_cast<double>(events.size()) - 1e4) < 5.0 * 100.0);
    CHECK(std::is_sorted(events.begin(), events.end()));
    for (double t : events) {
        CHECK(t >= 0.0);
        CHECK(t < 10.0);
    }
}

TEST_CASE("thinned poisson events: linear ramp splits 1:3") {
    rng::Stream stream(rng::Key{7});
    const auto events = montecarlo::thinned_poisson_events([](double t) { return 100.0 * t; },
                                                           1000.0, 0.0, 10.0, stream);
    const auto half = static_cast<double>(
        std::count_if(events.begin(), events.end(), [](double t) { return t < 5.0; }));
    const double n = static_cast<double>(events.size());
    // expectations 1250 / 5000 within 5 sigma each
    CHECK(std::fabs(n - 5000.0) < 5.0 * std::sqrt(5000.0));
    CHECK(std::fabs(half - 1250.0) < 5.0 * std::sqrt(1250.0));
}

TEST_CASE("thinning audits envelope violations") {
    rng::Stream stream(rng::Key{1});
    CHECK_THROWS_AS(montecarlo::thinned_poisson_events([](double) { return 2.0; }, 1.0, 0.0,
                                                       10.0, stream),
                    numeric_error);
}

TEST_CASE("pointing series: deterministic, stationary, clipped") {
    montecarlo::PointingModel m{200e-6, 10e-6, 5.0, std::nullopt};
    const auto a = montecarlo::pointing_error_series(m, 100.0, 0.1, rng::Key{17});
    const auto b = montecarlo::pointing_error_series(m, 100.0, 0.1, rng::Key{17});
    const auto c = montecarlo::pointing_error_series(m, 100.0, 0.1, rng::Key{18});
    REQUIRE(a.size() == 1001);
    CHECK(a == b);
    CHECK(a != c);

    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    double var = 0.0;
    for (double x : a) var += (x - mean) * (x - mean);
    var /= static_cast<double>(a.size() - 1);
    // correlated samples: ~dt*N/(2 tau) effective draws, so keep bands wide
    CHECK(std::fabs(mean - 200e-6) < 20e-6);
    CHECK(std::sqrt(var) > 3e-6);
    CHECK(std::sqrt(var) < 25e-6);
    CHECK(std::all_of(a.begin(), a.end(), [](double x) { return x >= 0.0; }));
}

TEST_CASE("pointing series: zero sigma pins the mean") {
    montecarlo::PointingModel m{55e-6, 0.0, 10.0, std::nullopt};
    const auto s = montecarlo::pointing_error_series(m, 10.0, 1.0, rng::Key{3});
    REQUIRE(s.size() == 11);
    CHECK(std::all_of(s.begin(), s.end(), [](double x) { return x == 55e-6; }));
}

TEST_CASE("pointing excess is windowed on top of the same trajectory") {
    montecarlo::PointingModel base{200e-6, 10e-6, 5.0, std::nullopt};
    auto bumped = base;
    bumped.zenith_excess = montecarlo::ZenithExcess{30.0, 60.0, 50e-6};
    const auto plain = montecarlo::pointing_error_series(base, 100.0, 0.1, rng::Key{4});
    const auto extra = montecarlo::pointing_error_series(bumped, 100.0, 0.1, rng::Key{4});
    REQUIRE(plain.size() == extra.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        const double t = static_cast<double>(i) * 0.1;
        if (t > 30.05 && t < 59.95)
            CHECK(extra[i] - plain[i] == Approx(50e-6).margin(1e-12));
        else if (t < 29.95 || t > 60.05)
            CHECK(extra[i] == plain[i]);
    }
}

TEST_CASE("pointing model validation") {
    montecarlo::PointingModel m{50e-6, -1e-6, 10.0, std::nullopt};
    CHECK_THROWS_AS(m.validate(), parameter_error);
    m = {50e-6, 10e-6, 0.0, std::nullopt};
    CHECK_THROWS_AS(m.validate(), parameter_error);
    m = {50e-6, 10e-6, 10.0, montecarlo::ZenithExcess{60.0, 30.0, 5e-6}};
    CHECK_THROWS_AS(m.validate(), parameter_error);
    // dt must resolve tau
    m = {50e-6, 10e-6, 0.5, std::nullopt};
    CHECK_THROWS_AS(montecarlo::pointing_error_series(m, 10.0, 1.0, rng::Key{0}),
                    parameter_error);
}

TEST_CASE("simulated pass is deterministic in the seed") {
    const auto table = static_table(7e6, 30.0);
    linkbudget::LinkParams p;
    const auto a = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), {},
                                             montecarlo::MuPolicy::fixed(20.0), {}, 5);
    const auto b = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), {},
                                             montecarlo::MuPolicy::fixed(20.0), {}, 5);
    const auto c = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), {},
                                             montecarlo::MuPolicy::fixed(20.0), {}, 6);
    CHECK(a.tags == b.tags);
    CHECK(a.tags != c.tags);
    CHECK(a.truth.signal_count == b.truth.signal_count);
    CHECK(std::is_sorted(a.tags.begin(), a.tags.end()));
}

TEST_CASE("fixed-mu pass hits the Poisson count expectations") {
    const double mu_sat = 100.0;
    const auto table = static_table(7e6, 60.0);
    linkbudget::LinkParams p;
    const auto det = montecarlo::DetectorModel::pmt();
    const double mu_rec = mu_sat * linkbudget::downlink_transmittance(
                                       7e6, p.with_detector_efficiency(det.efficiency));
    const double lam_sig = p.f_rep * (1.0 - std::exp(-mu_rec)) * 60.0;
    const double bg_rate = 30.0;
    const double lam_bg = bg_rate * (60.0 + 2.0 * 7e6 / consts::speed_of_light);

    const auto sim = montecarlo::simulate_pass(table, p, det, {},
                                               montecarlo::MuPolicy::fixed(mu_sat), {}, 11,
                                               bg_rate);
    CHECK(std::fabs(static_cast<double>(sim.truth.signal_count) - lam_sig) <
          5.0 * std::sqrt(lam_sig));
    CHECK(std::fabs(static_cast<double>(sim.truth.background_count) - lam_bg) <
          5.0 * std::sqrt(lam_bg));
    CHECK(detector_tags(sim) ==
          static_cast<std::size_t>(sim.truth.signal_count + sim.truth.background_count));
}

TEST_CASE("detector timestamps land on the TDC lattice") {
    const auto table = static_table(7e6, 20.0);
    linkbudget::LinkParams p;
    const auto sim = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), {},
                                               montecarlo::MuPolicy::fixed(50.0), {}, 2, 20.0);
    REQUIRE(detector_tags(sim) > 100);
    for (const auto& t : sim.tags) {
        if (t.channel != montecarlo::Channel::detector) continue;
        CHECK(t.timestamp_ps % 81 == 0);
    }
}

TEST_CASE("zero-efficiency detector records only background") {
    const auto table = static_table(7e6, 20.0);
    linkbudget::LinkParams p;
    auto det = montecarlo::DetectorModel::pmt();
    det.efficiency = 0.0;
    const auto sim = montecarlo::simulate_pass(table, p, det, {},
                                               montecarlo::MuPolicy::fixed(50.0), {}, 9, 40.0);
    CHECK(sim.truth.signal_count == 0);
    CHECK(sim.truth.background_count > 0);
}

TEST_CASE("shutter gates both signal and background") {
    const auto table = static_table(7e6, 40.0);
    linkbudget::LinkParams p;
    const montecarlo::ShutterSchedule shutter{2.0, 0.5};
    const auto sim = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), {},
                                               montecarlo::MuPolicy::fixed(50.0), shutter, 13,
                                               30.0);
    CHECK(sim.truth.duty == 0.5);
    REQUIRE(detector_tags(sim) > 200);
    for (const auto& t : sim.tags) {
        if (t.channel != montecarlo::Channel::detector) continue;
        const double sec = static_cast<double>(t.timestamp_ps) * 1e-12;
        const double phase = sec / 2.0 - std::floor(sec / 2.0);
        // gate applies pre-jitter; allow a few ns of leakage at the edges
        CHECK(phase < 0.5 + 1e-8);
    }
}

TEST_CASE("ranging channels are embedded in the tag stream") {
    const auto table = static_table(7e6, 10.0);
    linkbudget::LinkParams p;
    const auto sim = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), {},
                                               montecarlo::MuPolicy::fixed(1.0), {}, 1, 0.0);
    const auto exits = std::count_if(sim.tags.begin(), sim.tags.end(), [](const auto& t) {
        return t.channel == montecarlo::Channel::slr_exit;
    });
    const auto returns = std::count_if(sim.tags.begin(), sim.tags.end(), [](const auto& t) {
        return t.channel == montecarlo::Channel::slr_return;
    });
    CHECK(exits == static_cast<std::ptrdiff_t>(sim.slr_pairs.size()));
    CHECK(returns == exits);
    // exits sit on the 0.1 s fire grid, rounded to ps
    for (const auto& t : sim.tags)
        if (t.channel == montecarlo::Channel::slr_exit) CHECK(t.timestamp_ps % 100000000000 == 0);
}

TEST_CASE("residual spread matches jitter plus TDC quantization") {
    const auto table = static_table(7e6, 60.0);
    linkbudget::LinkParams p;
    const auto det = montecarlo::DetectorModel::pmt();
    // pick mu for ~3e4 detections, background off
    const double mu_rec_target = 5e-6;
    const double mu_sat = mu_rec_target / linkbudget::downlink_transmittance(
                                              7e6, p.with_detector_efficiency(det.efficiency));
    const auto sim = montecarlo::simulate_pass(table, p, det, {},
                                               montecarlo::MuPolicy::fixed(mu_sat), {}, 21, 0.0);
    REQUIRE(sim.truth.signal_count > 20000);

    const auto grid = timing::reconstruct_tref(sim.slr_pairs, p.f_rep,
                                               sim.slr_pairs.front().t_exit,
                                               sim.slr_pairs.back().t_exit);
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (const auto& t : sim.tags) {
        if (t.channel != montecarlo::Channel::detector) continue;
        const auto r = grid.try_nearest_residual_ps(t.timestamp_ps);
        if (!r) continue;
        sum += *r;
        sum2 += *r * *r;
        ++n;
    }
    REQUIRE(n > 20000);
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sum2 / static_cast<double>(n) - mean * mean);
    const double expected_ps = std::sqrt(std::pow(det.jitter_fwhm / consts::fwhm_over_sigma, 2) +
                                         det.tdc_bin * det.tdc_bin / 12.0) *
                               1e12;
    CHECK(sd == Approx(expected_ps).epsilon(0.05));
    CHECK(std::fabs(mean) < 5.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("physical policy responds to pointing") {
    const auto table = geometry::synthetic_pass(5620e3, consts::pi / 2, 120.0, 1.0, 6371e3,
                                                537.0);
    linkbudget::LinkParams p;
    p.theta_t = 100e-6;
    const montecarlo::PointingModel good{0.0, 0.0, 10.0, std::nullopt};
    const montecarlo::PointingModel bad{120e-6, 0.0, 10.0, std::nullopt};
    const auto a = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), good,
                                             montecarlo::MuPolicy::physical(), {}, 3, 0.0);
    const auto b = montecarlo::simulate_pass(table, p, montecarlo::DetectorModel::pmt(), bad,
                                             montecarlo::MuPolicy::physical(), {}, 3, 0.0);
    // 120 urad off a 100 urad beam costs e^{-2*1.44} ~ 5.6% of the rate
    CHECK(static_cast<double>(b.truth.signal_count) <
          0.2 * static_cast<double>(a.truth.signal_count));
    CHECK(a.truth.mean_gain == Approx(8.0 / (100e-6 * 100e-6)).epsilon(1e-12));
}
