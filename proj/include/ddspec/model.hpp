#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ddspec/units.hpp"

namespace ddspec {

/// Gaussian noise spectral density on top of a flat floor:
/// S(w) = y0 + A exp(-(w - w_c)^2 / (2 s^2)).
/// Rates in 1/us, center and width in rad/us.
struct GaussianNsd {
  double y0 = 0.0;
  double amplitude = 0.0;
  double center = 1.0;
  double width = 1.0;

  /// Boundary constructor: rates in 1/ms, center and width in kHz.
  static GaussianNsd from_lab_units(double y0_per_ms, double amplitude_per_ms,
                                    double nu_l_khz, double sigma_khz);

  void validate() const;
};

/// Piecewise-linear spectrum, clamped to the end values outside the table.
struct TabulatedNsd {
  std::vector<double> omega;  // rad/us, strictly increasing
  std::vector<double> value;  // 1/us, non-negative

  void validate() const;
};

using Nsd = std::variant<GaussianNsd, TabulatedNsd>;

double nsd_eval(const GaussianNsd& nsd, double omega);
double nsd_eval(const TabulatedNsd& nsd, double omega);
double nsd_eval(const Nsd& nsd, double omega);

void validate(const Nsd& nsd);

/// Hyperfine coupling of one resolved nucleus, angular rad/us.
/// omega_par carries a sign; omega_perp >= 0 (its phase is unobservable).
struct NuclearCoupling {
  double omega_par = 0.0;
  double omega_perp = 0.0;

  static NuclearCoupling from_khz(double par_khz, double perp_khz) {
    return {khz_to_angular(par_khz), khz_to_angular(perp_khz)};
  }
  void validate() const;
};

/// 13C Larmor frequency in rad/us for a bias field in gauss.
double larmor(double b_field_gauss, double gamma_c_khz_per_g = kDefaultGammaC);

struct EnvironmentModel {
  double b_field = 1.0;  // G
  double gamma_c = kDefaultGammaC;  // kHz/G
  int ms = -1;
  Nsd nsd = GaussianNsd{};
  std::vector<NuclearCoupling> nuclei;

  double omega_l() const { return larmor(b_field, gamma_c); }
  void validate() const;
};

enum class Family { cpmg, xy8, udd, axy, custom };

std::string_view to_string(Family family);
Family parse_family(std::string_view text);
bool is_equidistant(Family family);

struct CoherenceRecord {
  int n = 0;
  double total_time = 0.0;  // us
  double p = 1.0;
  double sigma_p = 0.0;
};

/// One measured or simulated data set. For equidistant families t1 is the
/// half interpulse spacing and total_time = 2 n t1 for every record.
struct CoherenceTrace {
  Family family = Family::cpmg;
  std::optional<double> t1;
  std::optional<double> r_m;  // axy block compression
  std::optional<int> harmonic_hint;  // filter harmonic the t1 was planned for
  std::vector<CoherenceRecord> records;
  std::string label;

  void validate() const;
};

/// 1/T2^L measured at probe frequency omega = pi / (2 t1).
struct RatePoint {
  double omega = 0.0;     // rad/us
  double rate = 0.0;      // 1/us
  double rate_err = 0.0;  // 1/us
  int harmonic_hint = 0;

  void validate() const;
};

}  // namespace ddspec
