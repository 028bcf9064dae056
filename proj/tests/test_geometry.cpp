#include <catch2/catch_amalgamated.hpp>

#include "splink/geometry.hpp"

using namespace splink;
using Catch::Approx;

namespace {
geometry::OverheadPassModel zenith_pass() {
    return {5620e3, consts::pi / 2, 2580.0, 6371e3, 537.0};
}
} // namespace

TEST_CASE("horizon slant range from geometry") {
    // sqrt(a^2 - b^2) with a = h_s + R_e, b = h_t + R_e
    CHECK(geometry::horizon_slant_range(5620e3, 537.0, 6371e3) ==
          Approx(10158129.614).margin(0.01));
    CHECK(geometry::horizon_slant_range(20000e3, 537.0, 6371e3) >
          geometry::horizon_slant_range(5620e3, 537.0, 6371e3));
}

TEST_CASE("zenith pass range profile") {
    const auto pass = zenith_pass();
    // culmination sits at mid-pass and equals the altitude difference
    CHECK(pass.range(1290.0) == Approx(5620e3 - 537.0).margin(1e-6));
    CHECK(pass.range(0.0) == Approx(7748641.9).margin(0.5));
    CHECK(pass.range(300.0) == Approx(6968910.0).margin(0.5));
    CHECK(pass.range(600.0) == Approx(6317515.0).margin(0.5));
    CHECK(pass.range(900.0) == Approx(5852955.0).margin(0.5));
    CHECK(pass.range(1020.0) == Approx(5732731.0).margin(0.5));
    // symmetric about culmination
    CHECK(pass.range(2580.0) == Approx(pass.range(0.0)).margin(1e-6));
    CHECK(pass.range(1290.0 + 400.0) == Approx(pass.range(1290.0 - 400.0)).margin(1e-6));
}

TEST_CASE("zenith pass kinematics") {
    const auto pass = zenith_pass();
    CHECK(pass.angular_rate() == Approx(4.8082361e-4).epsilon(1e-6));
    // approaching before culmination, receding after, stationary at it
    CHECK(pass.radial_velocity(600.0) < 0.0);
    CHECK(pass.radial_velocity(1290.0) == Approx(0.0).margin(1e-9));
    CHECK(pass.radial_velocity(2000.0) > 0.0);
    CHECK(pass.radial_velocity(1290.0 + 300.0) ==
          Approx(-pass.radial_velocity(1290.0 - 300.0)).margin(1e-9));
    // |v_R| stays well below orbital speed
    CHECK(std::fabs(pass.radial_velocity(0.0)) < 8000.0);
    // v_R matches numerical differentiation of R(t)
    const double h = 1e-3;
    const double v_num = (pass.range(700.0 + h) - pass.range(700.0 - h)) / (2 * h);
    CHECK(pass.radial_velocity(700.0) == Approx(v_num).margin(1e-4));
}

TEST_CASE("max elevation below 90 degrees lifts the culmination range") {
    const geometry::OverheadPassModel pass{5620e3, 60.0 * consts::pi / 180.0, 2000.0,
                                           6371e3, 537.0};
    const double r_cul = pass.range(1000.0);
    CHECK(r_cul > 5620e3 - 537.0);
    const double elev = pass.elevation(1000.0);
    CHECK(elev == Approx(60.0 * consts::pi / 180.0).margin(1e-9));
    // elevation decreases away from culmination
    CHECK(pass.elevation(400.0) < elev);
}

TEST_CASE("pass rejects a duration longer than the visibility window") {
    CHECK_THROWS_AS(geometry::OverheadPassModel(5620e3, consts::pi / 2, 50000.0, 6371e3, 537.0),
                    parameter_error);
    CHECK_THROWS_AS(geometry::OverheadPassModel(5620e3, 0.1, 2580.0, 6371e3, 537.0),
                    parameter_error);
}

TEST_CASE("ephemeris table validates its samples") {
    using geometry::EphemerisSample;
    std::vector<EphemerisSample> good{{0.0, 7e6, -1500.0}, {1.0, 7e6 - 1500.0, -1500.0}};
    CHECK_NOTHROW(geometry::EphemerisTable(good, 5620e3, 537.0));

    CHECK_THROWS_AS(geometry::EphemerisTable({{0.0, 7e6, 0.0}}, 5620e3, 537.0), validation_error);
    CHECK_THROWS_AS(geometry::EphemerisTable({{0.0, 7e6, 0.0}, {0.0, 7e6, 0.0}}, 5620e3, 537.0),
                    validation_error);
    // below the zenith floor h_s - h_t
    CHECK_THROWS_AS(geometry::EphemerisTable({{0.0, 5.0e6, 0.0}, {1.0, 5.0e6, 0.0}}, 5620e3,
                                             537.0),
                    validation_error);
}

TEST_CASE("table interpolation is exact at nodes and C1 between them") {
    const auto table = geometry::synthetic_pass(5620e3, consts::pi / 2, 2580.0, 1.0, 6371e3, 537.0);
    const auto pass = zenith_pass();
    for (double t : {0.0, 100.0, 1290.0, 2580.0})
        CHECK(table.slant_range_at(t) == Approx(pass.range(t)).margin(1e-9));
    // Hermite interpolation with exact derivatives: mid-node error stays tiny
    for (double t : {100.5, 777.25, 1290.5, 2100.75})
        CHECK(table.slant_range_at(t) == Approx(pass.range(t)).margin(1e-4));
    // outside the span is a hard error
    CHECK_THROWS_AS(table.slant_range_at(-0.5), span_error);
    CHECK_THROWS_AS(table.slant_range_at(2580.5), span_error);
}

TEST_CASE("synthetic pass range noise is seeded and bounded") {
    const auto a = geometry::synthetic_pass(5620e3, consts::pi / 2, 600.0, 1.0, 6371e3, 537.0,
                                            0.5, 42);
    const auto b = geometry::synthetic_pass(5620e3, consts::pi / 2, 600.0, 1.0, 6371e3, 537.0,
                                            0.5, 42);
    const auto c = geometry::synthetic_pass(5620e3, consts::pi / 2, 600.0, 1.0, 6371e3, 537.0,
                                            0.5, 43);
    const auto clean = geometry::synthetic_pass(5620e3, consts::pi / 2, 600.0, 1.0, 6371e3, 537.0);
    REQUIRE(a.samples().size() == clean.samples().size());
    bool identical_ab = true, identical_ac = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.samples().size(); ++i) {
        identical_ab &= a.samples()[i].range == b.samples()[i].range;
        identical_ac &= a.samples()[i].range == c.samples()[i].range;
        worst = std::max(worst, std::fabs(a.samples()[i].range - clean.samples()[i].range));
    }
    CHECK(identical_ab);
    CHECK_FALSE(identical_ac);
    CHECK(worst > 0.0);
    CHECK(worst < 0.5 * 6.0); // a 6-sigma excursion would be suspicious
}
