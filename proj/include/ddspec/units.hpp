#pragma once

#include <numbers>

// Internal units: time in microseconds, angular frequency in rad/us, decay
// rates (and spectral densities) in 1/us. Files and the command line use
// ordinary frequency in kHz, time in us and rates in 1/ms.
namespace ddspec {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 13C gyromagnetic ratio in kHz/G.
inline constexpr double kDefaultGammaC = 1.0705;

constexpr double khz_to_angular(double khz) { return kTwoPi * khz * 1e-3; }
constexpr double angular_to_khz(double omega) { return omega / kTwoPi * 1e3; }

constexpr double per_ms_to_per_us(double rate) { return rate * 1e-3; }
constexpr double per_us_to_per_ms(double rate) { return rate * 1e3; }

}  // namespace ddspec
