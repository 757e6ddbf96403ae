#include "ddspec/nuclei.hpp"

#include <algorithm>
#include <cmath>

#include "ddspec/error.hpp"

namespace ddspec {

Eigen::Matrix2cd ConditionalHamiltonians::matrix(const Eigen::Vector3d& b) {
  using C = std::complex<double>;
  Eigen::Matrix2cd h;
  h << C(b.z(), 0.0), C(b.x(), -b.y()),
       C(b.x(), b.y()), C(-b.z(), 0.0);
  return 0.5 * h;
}

ConditionalHamiltonians conditional_hamiltonians(const NuclearCoupling& c, double omega_l, int ms) {
  require(ms == 1 || ms == -1, "conditional_hamiltonians: ms must be +1 or -1");
  ConditionalHamiltonians h;
  h.h0 = Eigen::Vector3d(0.0, 0.0, omega_l);
  h.h1 = Eigen::Vector3d(ms * c.omega_perp, 0.0, ms * c.omega_par + omega_l);
  return h;
}

Eigen::Quaterniond spin_half_rotation(const Eigen::Vector3d& b, double t) {
  const double norm = b.norm();
  if (norm == 0.0) return Eigen::Quaterniond::Identity();
  const double half = 0.5 * norm * t;
  const Eigen::Vector3d v = std::sin(half) / norm * b;
  return Eigen::Quaterniond(std::cos(half), v.x(), v.y(), v.z());
}

double conditional_modulation(const PulseSequence& seq, const NuclearCoupling& c, double omega_l,
                              int ms) {
  const auto h = conditional_hamiltonians(c, omega_l, ms);
  Eigen::Quaterniond u0 = Eigen::Quaterniond::Identity();
  Eigen::Quaterniond u1 = Eigen::Quaterniond::Identity();
  bool swapped = false;
  for (double tau : free_intervals(seq)) {
    const auto r0 = spin_half_rotation(h.h0, tau);
    const auto r1 = spin_half_rotation(h.h1, tau);
    u0 = (swapped ? r1 : r0) * u0;
    u1 = (swapped ? r0 : r1) * u1;
    swapped = !swapped;
  }
  // Re Tr(U0 U1^dagger) / 2 is the 4-vector overlap of the two quaternions.
  return std::clamp(u0.coeffs().dot(u1.coeffs()), -1.0, 1.0);
}

double conditional_modulation(const PulseSequence& seq, const std::vector<NuclearCoupling>& nuclei,
                              double omega_l, int ms) {
  double m = 1.0;
  for (const auto& c : nuclei) m *= conditional_modulation(seq, c, omega_l, ms);
  return m;
}

namespace {

struct PhaseTerms {
  double prefactor;  // 2 (w_perp / w1)^2 sin^2(w1 t1 / 2) sin^2(wL t1 / 2)
  double cos_phi;
};

PhaseTerms phase_terms(double t1, const NuclearCoupling& c, double omega_l, int ms) {
  require(ms == 1 || ms == -1, "analytic_modulation: ms must be +1 or -1");
  const double par = ms * c.omega_par + omega_l;
  const double w1 = std::hypot(par, c.omega_perp);
  if (w1 == 0.0) return {0.0, std::cos(0.0)};
  const double s1 = std::sin(0.5 * w1 * t1);
  const double sl = std::sin(0.5 * omega_l * t1);
  const double mx = c.omega_perp / w1;
  const double cos_phi = par / w1 * std::sin(w1 * t1) * std::sin(omega_l * t1) -
                         std::cos(w1 * t1) * std::cos(omega_l * t1);
  return {2.0 * mx * mx * s1 * s1 * sl * sl, std::clamp(cos_phi, -1.0, 1.0)};
}

// sin^2(n a / 2) / sin^2(a / 2), with sin^2(a / 2) passed in to keep precision.
double comb_ratio(double n, double angle, double sin2_half) {
  if (std::abs(angle) < 1e-6) return n * n * (1.0 - (n * n - 1.0) * angle * angle / 12.0);
  const double s = std::sin(0.5 * n * angle);
  return s * s / sin2_half;
}

}  // namespace

double modulation_phase(double t1, const NuclearCoupling& c, double omega_l, int ms,
                        PhaseConvention convention) {
  const double phi = std::acos(phase_terms(t1, c, omega_l, ms).cos_phi);
  return convention == PhaseConvention::phi ? phi : kPi - phi;
}

double analytic_modulation(double n, double t1, const NuclearCoupling& c, double omega_l, int ms,
                           PhaseConvention convention) {
  require(n >= 0.0, "analytic_modulation: n must be >= 0");
  require(t1 > 0.0, "analytic_modulation: t1 must be > 0");
  const auto terms = phase_terms(t1, c, omega_l, ms);
  if (terms.prefactor == 0.0) return 1.0;
  const double phi = std::acos(terms.cos_phi);
  const double sin2_half = 0.5 * (1.0 - terms.cos_phi);
  // In the primed form the denominator reads cos^2(phi'/2), the same number.
  if (convention == PhaseConvention::phi_prime && phi >= 1e-6) {
    const double s = std::sin(0.5 * n * (kPi - phi));
    return 1.0 - terms.prefactor * s * s / sin2_half;
  }
  return 1.0 - terms.prefactor * comb_ratio(n, phi, sin2_half);
}

double modulation_amplitude(const NuclearCoupling& c, double omega_l, double t1, int ms) {
  require(t1 > 0.0, "modulation_amplitude: t1 must be > 0");
  const auto terms = phase_terms(t1, c, omega_l, ms);
  if (terms.prefactor == 0.0) return 0.0;
  const double sin2_half = 0.5 * (1.0 - terms.cos_phi);
  if (sin2_half <= 0.0) return 2.0;
  return std::clamp(terms.prefactor / sin2_half, 0.0, 2.0);
}

}  // namespace ddspec
