#pragma once

#include <cstdint>
#include <vector>

#include "ddspec/model.hpp"
#include "ddspec/sequences.hpp"

namespace ddspec {

/// Non-interacting spin-1/2 bath coupled to the probe like a resolved nucleus.
struct SpinBath {
  std::vector<NuclearCoupling> spins;
  double omega0 = 1.0;  // rad/us, bath Larmor frequency
  std::uint64_t seed = 0;

  void validate() const;
};

struct RandomBathOptions {
  int count = 100;
  double omega0 = 1.0;
  double ratio = 0.01;      // scale of |w_perp| / omega0 (half-normal)
  double par_ratio = -1.0;  // scale of w_par / omega0 (normal); negative = same as ratio
  // Every spin gets |w_perp| = ratio * omega0 exactly; only w_par is drawn.
  bool fixed_magnitude = false;
  std::uint64_t seed = 0;
};

SpinBath random_bath(const RandomBathOptions& options);

/// (1 + prod_k M_k) / 2 with the exact conditional propagators, bath maximally mixed.
double exact_coherence(const PulseSequence& seq, const SpinBath& bath, int ms = -1);

/// First-order Magnus (average Hamiltonian) coherence for an arbitrary sequence:
/// 1/2 + 1/2 exp(-(1/8) sum_k [w_par^2 (int y)^2 + w_perp^2 |Y(omega0)|^2 / omega0^2]).
double magnus_coherence(const PulseSequence& seq, const SpinBath& bath);

/// Free evolution: 1/2 + 1/2 exp(-T^2 sum w_par^2 / 8) exp(-sum w_perp^2 sin^2(omega0 T/2) / (2 omega0^2)).
double magnus_ramsey(const SpinBath& bath, double total_time);

/// CPMG with n_cycles cycles of two pi pulses, interpulse spacing cycle_time
/// (pulses at (2k-1) T/2, total time 2 n T):
/// 1/2 + 1/2 exp(-2 sum w_perp^2 sin^4(T w0/4) sin^2(n T w0) / (w0^2 cos^2(T w0/2))).
/// Throws NumericalError at the filter resonance |cos(T w0 / 2)| < 1e-8.
double magnus_cpmg(const SpinBath& bath, int n_cycles, double cycle_time);

/// The sequence magnus_cpmg describes.
PulseSequence magnus_cpmg_sequence(int n_cycles, double cycle_time);

struct ClassicalEquivalent {
  double static_variance = 0.0;   // sum_k w_par^2
  double transverse_weight = 0.0;  // sum_k w_perp^2
  /// Narrow Gaussian around omega0 standing in for the delta line. Scaled so
  /// that chi against it reproduces the first-order transverse exponent, which
  /// puts (pi / 8) transverse_weight under the curve.
  TabulatedNsd nsd;
};

ClassicalEquivalent equivalent_classical_nsd(const SpinBath& bath, double width, int samples = 401);

}  // namespace ddspec
