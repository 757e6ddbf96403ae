#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ddspec/filter.hpp"
#include "ddspec/least_squares.hpp"
#include "ddspec/model.hpp"
#include "ddspec/nuclei.hpp"

namespace ddspec {

template <class Params>
struct FitResult {
  Params params;
  Eigen::MatrixXd covariance;  // natural (internal-unit) parameters
  double chi_nu = 0.0;         // reduced chi^2 at the solution
  int n_points = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  Eigen::VectorXd errors() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

// --- T2^L -------------------------------------------------------------------

struct T2lOptions {
  int n_min = 8;
  double min_w = 0.05;  // collapse-depth guard on W = 2P - 1
  // W = W0 exp(-T / T2L) with free W0; false pins W0 = 1.
  bool free_amplitude = true;
  // With fewer than 3 usable records at n >= n_min, also admit smaller n.
  bool admit_small_n = false;
  LeastSquaresOptions solver;
};

struct T2lResult {
  double t2l = 0.0;      // us
  double t2l_err = 0.0;  // us
  double rate = 0.0;     // 1/us
  double rate_err = 0.0;
  double amplitude = 1.0;
  double amplitude_err = 0.0;
  double chi_nu = 0.0;
  int n_used = 0;
};

T2lResult fit_t2l(const CoherenceTrace& trace, const T2lOptions& options = {});

/// Rate point for an equidistant trace: omega = pi / (2 t1), rate = 1 / T2L.
RatePoint rate_point(const CoherenceTrace& trace, int harmonic_hint, const T2lOptions& options = {});

// --- scan planning ------------------------------------------------------------

struct ScanPoint {
  double t1 = 0.0;  // us
  int harmonic = 0;
};

/// t1 values placing harmonic (2l+1) pi / (2 t1) on a uniform grid over
/// [nu_l - window, nu_l + window] (kHz) for every requested l.
std::vector<ScanPoint> plan_scan(double nu_l_khz, std::span<const int> harmonics, double window_khz,
                                 int points);

// --- NSD reconstruction ---------------------------------------------------------

struct ReconstructOptions {
  int l_max = 2;
  std::optional<double> fixed_center;  // rad/us
  std::optional<GaussianNsd> initial;
  LeastSquaresOptions solver;
};

/// Weighted fit of rate = comb_rate(Gaussian, omega, l_max). Parameter order
/// in the covariance: y0, amplitude, center, width.
FitResult<GaussianNsd> reconstruct_nsd(std::span<const RatePoint> points,
                                       const ReconstructOptions& options = {});

// --- resolved nuclei ----------------------------------------------------------------

struct AmplitudePoint {
  double omega = 0.0;  // probe pi / (2 t1), rad/us
  double amplitude = 0.0;
  int harmonic = 0;    // filter harmonic l the scan window was planned for
};

struct DetectOptions {
  double omega_l = 1.0;  // rad/us
  int ms = -1;
  // Estimates closer than this (rad/us) are merged into one group.
  double merge_tol = 0.0;
};

/// Local maxima of the 3-point-median-smoothed scan with amplitude above
/// threshold * max. Each maximum at probe w in window l is read as the
/// resonance (2l+1) 2 w = wL + w1 with w1 = |wL + ms w_par|, giving a w_par
/// guess. Close guesses are merged; returned sorted by peak height.
std::vector<double> detect_nuclei(std::span<const AmplitudePoint> scan, double threshold,
                                  const DetectOptions& options);

struct CouplingFitOptions {
  double omega_l = 1.0;
  int ms = -1;
  PhaseConvention convention = PhaseConvention::phi;
  bool multi_start = true;
  ChiOptions chi;
  LeastSquaresOptions solver;
};

/// Fit of P = (1 + e^{-chi(n)} M(n; w_par, w_perp)) / 2 at fixed t1 over even-n
/// records. Parameter order: omega_par, omega_perp. Flags an unidentifiable
/// coupling as a warning (modulation depth below the noise).
FitResult<NuclearCoupling> fit_coupling(const CoherenceTrace& trace, const NuclearCoupling& initial,
                                        const Nsd& nsd, const CouplingFitOptions& options = {});

inline constexpr const char* kUnidentifiable = "unidentifiable";

// --- direct multi-sequence fit -----------------------------------------------------

struct DirectFitOptions {
  std::optional<GaussianNsd> initial;
  int threads = 1;
  ChiOptions chi;
  LeastSquaresOptions solver;
};

/// Simultaneous fit of (y0, amplitude, width) to every record of every trace,
/// center fixed at `center` (rad/us). Nuclei, field and ms come from `env`.
/// Covariance order: y0, amplitude, center (zero), width.
FitResult<GaussianNsd> fit_nsd_direct(std::span<const CoherenceTrace> traces,
                                      const EnvironmentModel& env, double center,
                                      const DirectFitOptions& options = {});

}  // namespace ddspec
