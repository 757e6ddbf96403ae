#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "ddspec/model.hpp"
#include "ddspec/sequences.hpp"

namespace ddspec {

/// Nuclear Hamiltonians conditioned on the probe state, H = b . I with I = sigma / 2.
/// h0 = wL Iz; h1 = (ms w_par + wL) Iz + ms w_perp Ix.
struct ConditionalHamiltonians {
  Eigen::Vector3d h0;
  Eigen::Vector3d h1;

  static Eigen::Matrix2cd matrix(const Eigen::Vector3d& b);
};

ConditionalHamiltonians conditional_hamiltonians(const NuclearCoupling& c, double omega_l, int ms);

/// exp(-i t b . sigma / 2) in closed form.
template <class Scalar>
Eigen::Matrix<std::complex<Scalar>, 2, 2> spin_half_propagator(const Eigen::Matrix<Scalar, 3, 1>& b,
                                                               Scalar t) {
  using std::cos;
  using std::sin;
  using C = std::complex<Scalar>;
  const Scalar norm = b.norm();
  const Scalar half = Scalar(0.5) * norm * t;
  Eigen::Matrix<Scalar, 3, 1> axis = Eigen::Matrix<Scalar, 3, 1>::Zero();
  if (norm > Scalar(0)) axis = b / norm;
  const Scalar c = cos(half);
  const Scalar s = sin(half);
  Eigen::Matrix<C, 2, 2> u;
  u << C(c, -s * axis.z()), C(-s * axis.y(), -s * axis.x()),
       C(s * axis.y(), -s * axis.x()), C(c, s * axis.z());
  return u;
}

/// Same rotation as a unit quaternion (w, x, y, z) <-> w - i (x, y, z) . sigma.
/// Products compose like the matrices; used for long pulse trains.
Eigen::Quaterniond spin_half_rotation(const Eigen::Vector3d& b, double t);

/// M(T) = Re Tr(U0 U1^dagger) / 2. U0 starts with h0 and alternates at each
/// pulse; U1 starts with h1.
double conditional_modulation(const PulseSequence& seq, const NuclearCoupling& c, double omega_l,
                              int ms);

/// Product of the single-nucleus modulations.
double conditional_modulation(const PulseSequence& seq, const std::vector<NuclearCoupling>& nuclei,
                              double omega_l, int ms);

/// phi: per-pulse nuclear phase. phi_prime = pi - phi, the form used by
/// Taminiau et al. Both give the same M at even n.
enum class PhaseConvention { phi, phi_prime };

double modulation_phase(double t1, const NuclearCoupling& c, double omega_l, int ms,
                        PhaseConvention convention = PhaseConvention::phi);

/// Closed-form M for n equidistant pulses (n even, n >= 2) with spacing 2 t1.
/// Evaluated at non-even n it interpolates, and there the two conventions differ.
double analytic_modulation(double n, double t1, const NuclearCoupling& c, double omega_l, int ms,
                           PhaseConvention convention = PhaseConvention::phi);

/// Envelope of 1 - M over n at fixed t1, clipped to [0, 2].
double modulation_amplitude(const NuclearCoupling& c, double omega_l, double t1, int ms);

}  // namespace ddspec
