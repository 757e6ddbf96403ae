#include "ddspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddspec/error.hpp"

namespace ddspec {

GaussianNsd GaussianNsd::from_lab_units(double y0_per_ms, double amplitude_per_ms,
                                        double nu_l_khz, double sigma_khz) {
  GaussianNsd nsd{per_ms_to_per_us(y0_per_ms), per_ms_to_per_us(amplitude_per_ms),
                  khz_to_angular(nu_l_khz), khz_to_angular(sigma_khz)};
  nsd.validate();
  return nsd;
}

void GaussianNsd::validate() const {
  require(std::isfinite(y0) && y0 >= 0.0, "gaussian nsd: y0 must be >= 0");
  require(std::isfinite(amplitude) && amplitude >= 0.0, "gaussian nsd: amplitude must be >= 0");
  require(std::isfinite(center) && center > 0.0, "gaussian nsd: center must be > 0");
  require(std::isfinite(width) && width > 0.0, "gaussian nsd: width must be > 0");
}

void TabulatedNsd::validate() const {
  require(!omega.empty(), "tabulated nsd: no samples");
  require(omega.size() == value.size(), "tabulated nsd: omega/value length mismatch");
  for (std::size_t i = 0; i < omega.size(); ++i) {
    require(std::isfinite(omega[i]) && std::isfinite(value[i]), "tabulated nsd: non-finite sample");
    require(value[i] >= 0.0, "tabulated nsd: negative spectral value");
    if (i > 0) require(omega[i] > omega[i - 1], "tabulated nsd: omega must be strictly increasing");
  }
}

double nsd_eval(const GaussianNsd& nsd, double omega) {
  const double d = (omega - nsd.center) / nsd.width;
  return nsd.y0 + nsd.amplitude * std::exp(-0.5 * d * d);
}

double nsd_eval(const TabulatedNsd& nsd, double omega) {
  const auto& x = nsd.omega;
  const auto& y = nsd.value;
  if (omega <= x.front()) return y.front();
  if (omega >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), omega);
  const auto hi = static_cast<std::size_t>(it - x.begin());
  const auto lo = hi - 1;
  const double f = (omega - x[lo]) / (x[hi] - x[lo]);
  return y[lo] + f * (y[hi] - y[lo]);
}

double nsd_eval(const Nsd& nsd, double omega) {
  return std::visit([omega](const auto& s) { return nsd_eval(s, omega); }, nsd);
}

void validate(const Nsd& nsd) {
  std::visit([](const auto& s) { s.validate(); }, nsd);
}

void NuclearCoupling::validate() const {
  require(std::isfinite(omega_par) && std::isfinite(omega_perp), "nuclear coupling: non-finite value");
  require(omega_perp >= 0.0, "nuclear coupling: omega_perp must be >= 0");
}

double larmor(double b_field_gauss, double gamma_c_khz_per_g) {
  require(std::isfinite(b_field_gauss) && b_field_gauss > 0.0, "larmor: field must be > 0 G");
  require(std::isfinite(gamma_c_khz_per_g) && gamma_c_khz_per_g > 0.0,
          "larmor: gyromagnetic ratio must be > 0");
  return khz_to_angular(gamma_c_khz_per_g * b_field_gauss);
}

void EnvironmentModel::validate() const {
  require(std::isfinite(b_field) && b_field > 0.0, "environment: b_field must be > 0");
  require(std::isfinite(gamma_c) && gamma_c > 0.0, "environment: gamma_c must be > 0");
  require(ms == 1 || ms == -1, "environment: ms must be +1 or -1");
  ddspec::validate(nsd);
  for (const auto& c : nuclei) c.validate();
}

std::string_view to_string(Family family) {
  switch (family) {
    case Family::cpmg: return "cpmg";
    case Family::xy8: return "xy8";
    case Family::udd: return "udd";
    case Family::axy: return "axy";
    case Family::custom: return "custom";
  }
  return "custom";
}

Family parse_family(std::string_view text) {
  if (text == "cpmg") return Family::cpmg;
  if (text == "xy8") return Family::xy8;
  if (text == "udd") return Family::udd;
  if (text == "axy") return Family::axy;
  if (text == "custom") return Family::custom;
  throw InvalidArgument("unknown sequence family '" + std::string(text) + "'");
}

bool is_equidistant(Family family) { return family == Family::cpmg || family == Family::xy8; }

void CoherenceTrace::validate() const {
  require(!records.empty(), "trace: no records");
  if (t1) require(std::isfinite(*t1) && *t1 > 0.0, "trace: t1 must be > 0");
  if (is_equidistant(family)) require(t1.has_value(), "trace: equidistant family needs t1");
  if (family == Family::axy) require(r_m.has_value(), "trace: axy family needs r_m");
  for (const auto& r : records) {
    require(r.n >= 0, "trace: negative pulse count");
    require(std::isfinite(r.total_time) && r.total_time > 0.0, "trace: total_time must be > 0");
    require(std::isfinite(r.p), "trace: non-finite p");
    require(std::isfinite(r.sigma_p) && r.sigma_p > 0.0, "trace: sigma_p must be > 0");
    if (is_equidistant(family) && t1) {
      const double expected = 2.0 * r.n * *t1;
      require(std::abs(r.total_time - expected) <= 1e-9 * expected,
              "trace: total_time inconsistent with 2 n t1 at n=" + std::to_string(r.n));
    }
  }
}

void RatePoint::validate() const {
  require(std::isfinite(omega) && omega > 0.0, "rate point: omega must be > 0");
  require(std::isfinite(rate) && rate >= 0.0, "rate point: rate must be >= 0");
  require(std::isfinite(rate_err) && rate_err > 0.0, "rate point: rate_err must be > 0");
  require(harmonic_hint >= 0, "rate point: harmonic hint must be >= 0");
}

}  // namespace ddspec
