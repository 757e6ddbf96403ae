#include "ddspec/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "ddspec/error.hpp"

namespace ddspec {

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

bool has_equidistant_layout(const PulseSequence& seq) {
  return is_equidistant(seq.family) && seq.params.t1 > 0.0 &&
         seq.params.n == static_cast<int>(seq.pulse_times.size()) && seq.params.n > 0;
}

// |Y(w)|^2 / w^2 from the switching intervals. Each interval contributes
// s_k * tau_k * sinc(w tau_k / 2) * e^{i w c_k}, which stays finite at w = 0.
double kernel_general(const PulseSequence& seq, double omega) {
  std::complex<double> z{0.0, 0.0};
  double start = 0.0;
  double sign = 1.0;
  const std::size_t n = seq.pulse_times.size();
  for (std::size_t k = 0; k <= n; ++k) {
    const double stop = k < n ? seq.pulse_times[k] : seq.total_time;
    const double tau = stop - start;
    const double mid = 0.5 * (start + stop);
    z += sign * tau * sinc(0.5 * omega * tau) * std::polar(1.0, omega * mid);
    sign = -sign;
    start = stop;
  }
  return std::norm(z);
}

// Closed form for n pulses at (2k-1) t1:
// |Y|^2 = 16 sin^4(x/2) g^2 / cos^2 x, x = w t1, g = sin(n x) (n even) or cos(n x) (n odd).
double kernel_equidistant(const PulseSequence& seq, double omega) {
  const double t1 = seq.params.t1;
  const int n = seq.params.n;
  const double x = omega * t1;
  const double c = std::cos(x);
  if (std::abs(c) < 1e-3) return kernel_general(seq, omega);
  const double g = (n % 2 == 0) ? std::sin(n * x) : std::cos(n * x);
  const double s = sinc(0.5 * x);
  const double envelope = t1 * x * s * s;
  const double ratio = g / c;
  return envelope * envelope * ratio * ratio;
}

double y_over_omega_squared(const PulseSequence& seq, double omega) {
  return has_equidistant_layout(seq) ? kernel_equidistant(seq, omega) : kernel_general(seq, omega);
}

// Panel edges over [lo, hi] no wider than max_width, plus any extra points inside.
std::vector<double> panel_edges(double lo, double hi, double max_width, std::vector<double> extra,
                                int max_panels) {
  const double span = hi - lo;
  int count = std::max(8, static_cast<int>(std::ceil(span / max_width)));
  count = std::min(count, max_panels);
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(count) + 1 + extra.size());
  for (int i = 0; i <= count; ++i) edges.push_back(lo + span * i / count);
  for (double e : extra)
    if (e > lo && e < hi) edges.push_back(e);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

[[noreturn]] void report_nonconvergence(const QuadratureResult& r, double rel_tol) {
  std::ostringstream msg;
  msg << "chi quadrature did not converge: achieved abs error " << r.abs_error << " on value "
      << r.value << " (requested rel tol " << rel_tol << ", " << r.intervals << " panels)";
  throw NumericalError(msg.str());
}

ChiResult chi_gaussian(const PulseSequence& seq, const GaussianNsd& nsd, const ChiOptions& options) {
  const double total = seq.total_time;
  const double floor = nsd.y0 * total;
  if (nsd.amplitude == 0.0) return {floor, 0.0};

  const double lo = std::max(0.0, nsd.center - options.peak_span * nsd.width);
  const double hi = nsd.center + options.peak_span * nsd.width;
  if (!(hi > lo)) return {floor, 0.0};
  const auto edges = panel_edges(lo, hi, kPi / total, {nsd.center}, options.max_intervals / 4);

  auto integrand = [&](double w) {
    const double d = (w - nsd.center) / nsd.width;
    return nsd.amplitude * std::exp(-0.5 * d * d) * y_over_omega_squared(seq, w) / kPi;
  };
  QuadratureOptions q{options.rel_tol, options.rel_tol * floor, options.max_intervals};
  const auto r = integrate(integrand, edges, q);
  if (!r.converged) report_nonconvergence(r, options.rel_tol);
  return {floor + r.value, r.abs_error};
}

ChiResult chi_tabulated(const PulseSequence& seq, const TabulatedNsd& nsd, const ChiOptions& options) {
  const double total = seq.total_time;
  const double tail = nsd.value.back();
  const double floor = tail * total;
  const double hi = nsd.omega.back();
  if (!(hi > 0.0)) return {floor, 0.0};

  const auto edges = panel_edges(0.0, hi, kPi / total, nsd.omega, options.max_intervals / 4);
  auto integrand = [&](double w) {
    return (nsd_eval(nsd, w) - tail) * y_over_omega_squared(seq, w) / kPi;
  };
  QuadratureOptions q{options.rel_tol, options.rel_tol * floor, options.max_intervals};
  const auto r = integrate(integrand, edges, q);
  if (!r.converged) report_nonconvergence(r, options.rel_tol);
  return {floor + r.value, r.abs_error};
}

}  // namespace

double filter_y_squared(const PulseSequence& seq, double omega) {
  return omega * omega * y_over_omega_squared(seq, omega);
}

double filter_kernel(const PulseSequence& seq, double omega) {
  return y_over_omega_squared(seq, omega) / kPi;
}

QuadratureResult filter_weight(const PulseSequence& seq, double omega_lo, double omega_hi,
                               double rel_tol) {
  require(omega_hi > omega_lo && omega_lo >= 0.0, "filter_weight: need 0 <= lo < hi");
  const auto edges = panel_edges(omega_lo, omega_hi, kPi / seq.total_time, {}, 1 << 20);
  QuadratureOptions q{rel_tol, 0.0, 1 << 22};
  return integrate([&](double w) { return filter_kernel(seq, w); }, edges, q);
}

ChiResult chi_with_error(const PulseSequence& seq, const Nsd& nsd, const ChiOptions& options) {
  return std::visit(
      [&](const auto& s) -> ChiResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianNsd>)
          return chi_gaussian(seq, s, options);
        else
          return chi_tabulated(seq, s, options);
      },
      nsd);
}

double comb_rate(const Nsd& nsd, double omega, int l_max) {
  require(omega > 0.0, "comb_rate: omega must be > 0");
  require(l_max >= 0, "comb_rate: l_max must be >= 0");
  double sum = 0.0;
  for (int l = 0; l <= l_max; ++l) {
    const double h = 2.0 * l + 1.0;
    sum += nsd_eval(nsd, h * omega) / (h * h);
  }
  return 8.0 / (kPi * kPi) * sum;
}

}  // namespace ddspec
