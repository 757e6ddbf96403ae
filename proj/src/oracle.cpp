#include "ddspec/oracle.hpp"

#include <cmath>
#include <random>

#include "ddspec/error.hpp"
#include "ddspec/filter.hpp"
#include "ddspec/nuclei.hpp"

namespace ddspec {

void SpinBath::validate() const {
  require(std::isfinite(omega0) && omega0 > 0.0, "spin bath: omega0 must be > 0");
  for (const auto& s : spins) s.validate();
}

SpinBath random_bath(const RandomBathOptions& options) {
  require(options.count >= 0, "random_bath: count must be >= 0");
  require(options.omega0 > 0.0 && options.ratio >= 0.0, "random_bath: need omega0 > 0, ratio >= 0");
  const double perp_scale = options.ratio * options.omega0;
  const double par_scale = (options.par_ratio < 0.0 ? options.ratio : options.par_ratio) * options.omega0;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  SpinBath bath;
  bath.omega0 = options.omega0;
  bath.seed = options.seed;
  bath.spins.reserve(static_cast<std::size_t>(options.count));
  for (int k = 0; k < options.count; ++k) {
    const double draw = unit(rng);
    const double perp = options.fixed_magnitude ? perp_scale : std::abs(draw) * perp_scale;
    const double par = unit(rng) * par_scale;
    bath.spins.push_back({par, perp});
  }
  return bath;
}

double exact_coherence(const PulseSequence& seq, const SpinBath& bath, int ms) {
  bath.validate();
  require(!bath.spins.empty(), "exact_coherence: bath is empty");
  return 0.5 * (1.0 + conditional_modulation(seq, bath.spins, bath.omega0, ms));
}

double magnus_coherence(const PulseSequence& seq, const SpinBath& bath) {
  bath.validate();
  double par2 = 0.0;
  double perp2 = 0.0;
  for (const auto& s : bath.spins) {
    par2 += s.omega_par * s.omega_par;
    perp2 += s.omega_perp * s.omega_perp;
  }
  // pi * kernel is |Y|^2 / w^2; at w = 0 it is (int y dt)^2.
  const double static_part = par2 * kPi * filter_kernel(seq, 0.0);
  const double transverse = perp2 * kPi * filter_kernel(seq, bath.omega0);
  return 0.5 + 0.5 * std::exp(-(static_part + transverse) / 8.0);
}

double magnus_ramsey(const SpinBath& bath, double total_time) {
  bath.validate();
  require(total_time >= 0.0, "magnus_ramsey: total_time must be >= 0");
  double par2 = 0.0;
  double perp2 = 0.0;
  for (const auto& s : bath.spins) {
    par2 += s.omega_par * s.omega_par;
    perp2 += s.omega_perp * s.omega_perp;
  }
  const double w0 = bath.omega0;
  const double s = std::sin(0.5 * w0 * total_time);
  const double exponent = total_time * total_time * par2 / 8.0 + perp2 * s * s / (2.0 * w0 * w0);
  return 0.5 + 0.5 * std::exp(-exponent);
}

double magnus_cpmg(const SpinBath& bath, int n_cycles, double cycle_time) {
  bath.validate();
  require(n_cycles >= 1, "magnus_cpmg: n_cycles must be >= 1");
  require(cycle_time > 0.0, "magnus_cpmg: cycle_time must be > 0");
  const double w0 = bath.omega0;
  const double c = std::cos(0.5 * cycle_time * w0);
  if (std::abs(c) < 1e-8)
    throw NumericalError("magnus_cpmg: filter resonance (cos(T w0 / 2) = 0); use exact_coherence");
  double perp2 = 0.0;
  for (const auto& s : bath.spins) perp2 += s.omega_perp * s.omega_perp;
  const double s4 = std::pow(std::sin(0.25 * cycle_time * w0), 4);
  const double sn = std::sin(n_cycles * cycle_time * w0);
  return 0.5 + 0.5 * std::exp(-2.0 * perp2 * s4 * sn * sn / (w0 * w0 * c * c));
}

PulseSequence magnus_cpmg_sequence(int n_cycles, double cycle_time) {
  return equidistant(2 * n_cycles, 0.5 * cycle_time, Family::cpmg);
}

ClassicalEquivalent equivalent_classical_nsd(const SpinBath& bath, double width, int samples) {
  bath.validate();
  require(width > 0.0, "equivalent_classical_nsd: width must be > 0");
  require(samples >= 3, "equivalent_classical_nsd: need at least 3 samples");
  ClassicalEquivalent out;
  for (const auto& s : bath.spins) {
    out.static_variance += s.omega_par * s.omega_par;
    out.transverse_weight += s.omega_perp * s.omega_perp;
  }
  const double area = kPi / 8.0 * out.transverse_weight;
  const double height = area / (std::sqrt(kTwoPi) * width);
  const double span = 7.0 * width;
  const double lo = std::max(0.0, bath.omega0 - span);
  const double hi = bath.omega0 + span;
  for (int i = 0; i < samples; ++i) {
    const double w = lo + (hi - lo) * i / (samples - 1);
    const double d = (w - bath.omega0) / width;
    out.nsd.omega.push_back(w);
    out.nsd.value.push_back(i == 0 || i == samples - 1 ? 0.0 : height * std::exp(-0.5 * d * d));
  }
  return out;
}

}  // namespace ddspec
