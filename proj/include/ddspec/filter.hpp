#pragma once

#include "ddspec/model.hpp"
#include "ddspec/quadrature.hpp"
#include "ddspec/sequences.hpp"

namespace ddspec {

/// |Y(w)|^2 with Y(w) = sum_k (-1)^k (e^{i w t_{k+1}} - e^{i w t_k}), t_0 = 0,
/// t_{n+1} = T. Normalized so that (1/pi) int_0^inf |Y|^2 / w^2 dw = T.
double filter_y_squared(const PulseSequence& seq, double omega);

/// |Y(w)|^2 / (pi w^2), the weight multiplying S(w) under the coherence
/// integral. Finite at w = 0.
double filter_kernel(const PulseSequence& seq, double omega);

/// (1/pi) int_lo^hi |Y|^2 / w^2 dw by adaptive quadrature.
QuadratureResult filter_weight(const PulseSequence& seq, double omega_lo, double omega_hi,
                               double rel_tol = 1e-6);

struct ChiOptions {
  double rel_tol = 1e-6;
  int max_intervals = 200000;
  // Half-width of the integrated Gaussian peak, in units of its width.
  double peak_span = 12.0;
};

struct ChiResult {
  double value = 0.0;
  double abs_error = 0.0;
};

/// Decoherence functional chi = int dw S(w) |Y(w)|^2 / (pi w^2) over w > 0.
/// The constant floor of the spectrum is integrated in closed form (the kernel
/// integrates to T); only the remainder is integrated numerically.
/// Throws NumericalError if the quadrature misses rel_tol.
ChiResult chi_with_error(const PulseSequence& seq, const Nsd& nsd, const ChiOptions& options = {});

inline double chi(const PulseSequence& seq, const Nsd& nsd, const ChiOptions& options = {}) {
  return chi_with_error(seq, nsd, options).value;
}

/// Harmonic comb estimate of 1/T2^L at probe frequency omega:
/// (8 / pi^2) sum_{l=0}^{l_max} S((2l+1) omega) / (2l+1)^2.
double comb_rate(const Nsd& nsd, double omega, int l_max = 2);

}  // namespace ddspec
