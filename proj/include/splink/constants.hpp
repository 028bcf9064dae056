#pragma once

#include <cmath>
#include <cstdint>

namespace splink::consts {

inline constexpr double speed_of_light = 299792458.0;   // m/s
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double earth_mu = 3.986004418e14;      // m^3/s^2, gravitational parameter
inline constexpr double pi = 3.14159265358979323846;

// FWHM of a Gaussian = 2*sqrt(2*ln 2) * sigma.
inline constexpr double fwhm_over_sigma = 2.3548200450309493;

// Internal clock: timestamps are integer picoseconds. 64-bit picoseconds
// overflow after ~107 days, far beyond any satellite pass.
inline constexpr std::int64_t ps_per_second = 1000000000000LL;

inline double to_ps(double seconds) { return seconds * 1e12; }
inline double to_seconds(double ps) { return ps * 1e-12; }
inline std::int64_t round_ps(double seconds) { return std::llround(seconds * 1e12); }

} // namespace splink::consts
