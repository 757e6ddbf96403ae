#include "ddspec/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ddspec/error.hpp"
#include "ddspec/forward.hpp"
#include "ddspec/parallel.hpp"
#include "ddspec/sequences.hpp"

namespace ddspec {

namespace {

double reduced(double cost, int n, int k) { return n > k ? cost / (n - k) : 0.0; }

struct Usable {
  std::vector<double> time;
  std::vector<double> w;
  std::vector<double> sigma;
};

Usable select_records(const CoherenceTrace& trace, const T2lOptions& options, bool any_n) {
  Usable u;
  for (const auto& r : trace.records) {
    const double w = 2.0 * r.p - 1.0;
    if ((any_n || r.n >= options.n_min) && w >= options.min_w) {
      u.time.push_back(r.total_time);
      u.w.push_back(w);
      u.sigma.push_back(2.0 * r.sigma_p);
    }
  }
  return u;
}

}  // namespace

T2lResult fit_t2l(const CoherenceTrace& trace, const T2lOptions& options) {
  trace.validate();
  require(options.n_min >= 0, "fit_t2l: n_min must be >= 0");
  const bool collapsed = std::all_of(trace.records.begin(), trace.records.end(),
                                     [](const CoherenceRecord& r) { return 2.0 * r.p - 1.0 <= 0.0; });
  if (collapsed) throw NumericalError("fit_t2l: trace fully collapsed (all W <= 0)");

  Usable u = select_records(trace, options, false);
  if (u.w.size() < 3 && options.admit_small_n) u = select_records(trace, options, true);
  if (u.w.size() < 3) {
    std::ostringstream msg;
    msg << "fit_t2l: " << u.w.size() << " usable records (need 3 with n >= " << options.n_min
        << " and W >= " << options.min_w << ")";
    throw NumericalError(msg.str());
  }
  const auto m = static_cast<Eigen::Index>(u.w.size());
  const Eigen::Map<const Eigen::VectorXd> t(u.time.data(), m);
  const Eigen::Map<const Eigen::VectorXd> w(u.w.data(), m);
  const Eigen::Map<const Eigen::VectorXd> s(u.sigma.data(), m);

  // Weighted log-linear start: ln W = ln W0 - rate T.
  const Eigen::VectorXd lw = w.array().log();
  const Eigen::VectorXd wt = (w.array() / s.array()).square();
  Eigen::MatrixXd a(m, 2);
  a.col(0).setOnes();
  a.col(1) = -t;
  const Eigen::VectorXd sq = wt.cwiseSqrt();
  const Eigen::Vector2d start =
      (sq.asDiagonal() * a).colPivHouseholderQr().solve(sq.asDiagonal() * lw);

  LeastSquaresResult fit;
  if (options.free_amplitude) {
    auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return ((x[1] * (-x[0] * t.array()).exp()) - w.array()) / s.array();
    };
    fit = levenberg_marquardt(residual, Eigen::Vector2d(start[1], std::exp(start[0])), options.solver);
  } else {
    auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return ((-x[0] * t.array()).exp() - w.array()) / s.array();
    };
    Eigen::VectorXd x0(1);
    x0 << std::max(start[1], 0.0);
    fit = levenberg_marquardt(residual, x0, options.solver);
  }
  if (!fit.converged) throw NumericalError("fit_t2l: least squares did not converge");

  T2lResult out;
  out.rate = fit.x[0];
  out.rate_err = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
  if (options.free_amplitude) {
    out.amplitude = fit.x[1];
    out.amplitude_err = std::sqrt(std::max(fit.covariance(1, 1), 0.0));
  }
  out.t2l = out.rate > 0.0 ? 1.0 / out.rate : std::numeric_limits<double>::infinity();
  out.t2l_err = out.rate > 0.0 ? out.rate_err / (out.rate * out.rate)
                               : std::numeric_limits<double>::infinity();
  out.n_used = static_cast<int>(m);
  out.chi_nu = reduced(fit.cost, out.n_used, static_cast<int>(fit.x.size()));
  return out;
}

RatePoint rate_point(const CoherenceTrace& trace, int harmonic_hint, const T2lOptions& options) {
  require(trace.t1.has_value(), "rate_point: trace has no t1");
  const auto fit = fit_t2l(trace, options);
  RatePoint p;
  p.omega = kPi / (2.0 * *trace.t1);
  p.rate = std::max(fit.rate, 0.0);
  p.rate_err = std::max(fit.rate_err, 1e-15);
  p.harmonic_hint = harmonic_hint;
  return p;
}

std::vector<ScanPoint> plan_scan(double nu_l_khz, std::span<const int> harmonics, double window_khz,
                                 int points) {
  require(!harmonics.empty(), "plan_scan: no harmonics requested");
  require(nu_l_khz > 0.0 && window_khz >= 0.0 && points >= 1, "plan_scan: invalid window");
  require(window_khz < nu_l_khz, "plan_scan: window reaches zero frequency");
  std::vector<ScanPoint> out;
  for (int l : harmonics) {
    require(l >= 0, "plan_scan: harmonic must be >= 0");
    for (int i = 0; i < points; ++i) {
      const double nu = points == 1 ? nu_l_khz
                                    : nu_l_khz - window_khz + 2.0 * window_khz * i / (points - 1);
      // (2l+1) pi / (2 t1) = 2 pi nu  ->  t1 = (2l+1) / (4 nu), nu in MHz.
      out.push_back({(2.0 * l + 1.0) * 1e3 / (4.0 * nu), l});
    }
  }
  return out;
}

// --- NSD reconstruction ---------------------------------------------------------

namespace {

struct NsdParam {
  bool fixed_center;
  double center;

  GaussianNsd decode(const Eigen::VectorXd& x) const {
    GaussianNsd g;
    g.y0 = std::exp(x[0]);
    g.amplitude = std::exp(x[1]);
    g.center = fixed_center ? center : x[2];
    g.width = std::exp(x[fixed_center ? 2 : 3]);
    return g;
  }

  Eigen::VectorXd encode(const GaussianNsd& g) const {
    Eigen::VectorXd x(fixed_center ? 3 : 4);
    x[0] = std::log(std::max(g.y0, 1e-12));
    x[1] = std::log(std::max(g.amplitude, 1e-12));
    if (fixed_center) {
      x[2] = std::log(g.width);
    } else {
      x[2] = g.center;
      x[3] = std::log(g.width);
    }
    return x;
  }

  // Covariance of (y0, amplitude, center, width) from the transformed one.
  Eigen::Matrix4d natural_covariance(const GaussianNsd& g, const Eigen::MatrixXd& cov) const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(4, cov.rows());
    d(0, 0) = g.y0;
    d(1, 1) = g.amplitude;
    if (fixed_center) {
      d(3, 2) = g.width;
    } else {
      d(2, 2) = 1.0;
      d(3, 3) = g.width;
    }
    return d * cov * d.transpose();
  }
};

double effective_omega(const RatePoint& p) { return (2.0 * p.harmonic_hint + 1.0) * p.omega; }

GaussianNsd initial_guess(std::span<const RatePoint> points, const ReconstructOptions& options) {
  const auto top = std::max_element(points.begin(), points.end(),
                                    [](const RatePoint& a, const RatePoint& b) { return a.rate < b.rate; });
  const auto low = std::min_element(points.begin(), points.end(),
                                    [](const RatePoint& a, const RatePoint& b) { return a.rate < b.rate; });
  const double h = 2.0 * top->harmonic_hint + 1.0;
  GaussianNsd g;
  g.center = options.fixed_center.value_or(effective_omega(*top));
  g.y0 = std::max(low->rate, 1e-6 * top->rate);
  g.amplitude = std::max(top->rate - low->rate, 1e-6 * top->rate) * kPi * kPi / 8.0 * h * h;

  // Width from the half-maximum crossings among points of the same harmonic.
  const double half = 0.5 * (top->rate + low->rate);
  double lo = effective_omega(*top);
  double hi = lo;
  double spacing = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.harmonic_hint != top->harmonic_hint) continue;
    const double w = effective_omega(p);
    if (w != effective_omega(*top)) spacing = std::min(spacing, std::abs(w - effective_omega(*top)));
    if (p.rate >= half) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
  }
  double width = (hi - lo) / 2.355;
  if (!(width > 0.0)) width = std::isfinite(spacing) ? spacing : 0.01 * g.center;
  g.width = width;
  return g;
}

}  // namespace

FitResult<GaussianNsd> reconstruct_nsd(std::span<const RatePoint> points,
                                       const ReconstructOptions& options) {
  require(points.size() >= 5, "reconstruct_nsd: need at least 5 rate points");
  require(options.l_max >= 0, "reconstruct_nsd: l_max must be >= 0");
  for (const auto& p : points) p.validate();

  const NsdParam param{options.fixed_center.has_value(), options.fixed_center.value_or(0.0)};
  const auto m = static_cast<Eigen::Index>(points.size());
  auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const GaussianNsd g = param.decode(x);
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      r[i] = (comb_rate(g, p.omega, options.l_max) - p.rate) / p.rate_err;
    }
    return r;
  };

  GaussianNsd start = options.initial.value_or(initial_guess(points, options));
  if (options.fixed_center) start.center = *options.fixed_center;

  LeastSquaresResult best;
  bool have = false;
  const double factors[] = {1.0, 0.5, 2.0, 0.25};
  const int tries = options.initial ? 1 : 4;
  for (int k = 0; k < tries; ++k) {
    GaussianNsd g = start;
    g.width *= factors[k];
    const auto fit = levenberg_marquardt(residual, param.encode(g), options.solver);
    // with no peak in the data the width can run off to infinity
    const GaussianNsd d = param.decode(fit.x);
    const bool finite = std::isfinite(d.y0) && std::isfinite(d.amplitude) && std::isfinite(d.width) &&
                        std::isfinite(d.center) && d.width > 0.0;
    if (fit.converged && finite && (!have || fit.cost < best.cost)) {
      best = fit;
      have = true;
    }
  }
  if (!have) throw NumericalError("reconstruct_nsd: least squares did not converge to a finite peak");

  FitResult<GaussianNsd> out;
  out.params = param.decode(best.x);
  out.covariance = param.natural_covariance(out.params, best.covariance);
  out.n_points = static_cast<int>(m);
  out.iterations = best.iterations;
  out.converged = true;
  out.chi_nu = reduced(best.cost, out.n_points, static_cast<int>(best.x.size()));

  if (!options.fixed_center) {
    int below = 0;
    int above = 0;
    for (const auto& p : points) {
      if (p.harmonic_hint > options.l_max) continue;
      (effective_omega(p) < out.params.center ? below : above) += 1;
    }
    if (below == 0 || above == 0)
      throw NumericalError("reconstruct_nsd: rank-deficient data, all rate points on one side of the peak");
  }
  if (best.rank < best.x.size())
    out.warnings.push_back("rank-deficient Jacobian; errors along degenerate directions are unreliable");
  return out;
}

// --- resolved nuclei ----------------------------------------------------------------

std::vector<double> detect_nuclei(std::span<const AmplitudePoint> scan, double threshold,
                                  const DetectOptions& options) {
  require(!scan.empty(), "detect_nuclei: empty scan");
  require(threshold >= 0.0 && threshold <= 1.0, "detect_nuclei: threshold must lie in [0, 1]");
  require(options.ms == 1 || options.ms == -1, "detect_nuclei: ms must be +1 or -1");

  std::vector<int> harmonics;
  for (const auto& p : scan) harmonics.push_back(p.harmonic);
  std::sort(harmonics.begin(), harmonics.end());
  harmonics.erase(std::unique(harmonics.begin(), harmonics.end()), harmonics.end());

  double global_max = 0.0;
  for (const auto& p : scan) global_max = std::max(global_max, p.amplitude);
  if (!(global_max > 0.0)) return {};

  struct Peak {
    double height;
    double omega_par;
  };
  std::vector<Peak> peaks;
  for (int l : harmonics) {
    std::vector<AmplitudePoint> window;
    for (const auto& p : scan)
      if (p.harmonic == l) window.push_back(p);
    std::sort(window.begin(), window.end(),
              [](const AmplitudePoint& a, const AmplitudePoint& b) { return a.omega < b.omega; });
    const std::size_t n = window.size();
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == 0 || i + 1 == n) {
        s[i] = window[i].amplitude;
        continue;
      }
      double v[3] = {window[i - 1].amplitude, window[i].amplitude, window[i + 1].amplitude};
      std::sort(v, v + 3);
      s[i] = v[1];
    }
    // Runs of equal values count as one maximum, located at the run center.
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && s[j + 1] == s[i]) ++j;
      const bool left = i == 0 || s[i - 1] < s[i];
      const bool right = j + 1 == n || s[j + 1] < s[i];
      if (left && right && s[i] > 0.0 && s[i] >= threshold * global_max) {
        const double w = 0.5 * (window[i].omega + window[j].omega);
        const double w1 = 2.0 * (2.0 * l + 1.0) * w - options.omega_l;
        peaks.push_back({s[i], options.ms * (w1 - options.omega_l)});
      }
      i = j + 1;
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.height > b.height; });
  const double tol = options.merge_tol > 0.0 ? options.merge_tol : 0.05 * options.omega_l;
  std::vector<double> out;
  for (const auto& p : peaks) {
    const bool seen = std::any_of(out.begin(), out.end(),
                                  [&](double g) { return std::abs(g - p.omega_par) < tol; });
    if (!seen) out.push_back(p.omega_par);
  }
  return out;
}

FitResult<NuclearCoupling> fit_coupling(const CoherenceTrace& trace, const NuclearCoupling& initial,
                                        const Nsd& nsd, const CouplingFitOptions& options) {
  trace.validate();
  require(trace.t1.has_value(), "fit_coupling: trace has no t1");
  require(options.ms == 1 || options.ms == -1, "fit_coupling: ms must be +1 or -1");
  const double t1 = *trace.t1;

  std::vector<CoherenceRecord> recs;
  for (const auto& r : trace.records)
    if (r.n >= 2 && r.n % 2 == 0) recs.push_back(r);
  require(recs.size() >= 3, "fit_coupling: need at least 3 even-n records");

  const auto m = static_cast<Eigen::Index>(recs.size());
  Eigen::VectorXd decay(m);
  for (Eigen::Index i = 0; i < m; ++i)
    decay[i] = std::exp(-chi(equidistant(recs[static_cast<std::size_t>(i)].n, t1), nsd, options.chi));

  auto model = [&](Eigen::Index i, double par, double perp) {
    const NuclearCoupling c{par, std::abs(perp)};
    const auto& r = recs[static_cast<std::size_t>(i)];
    return 0.5 * (1.0 + decay[i] * analytic_modulation(r.n, t1, c, options.omega_l, options.ms,
                                                        options.convention));
  };
  auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& rec = recs[static_cast<std::size_t>(i)];
      r[i] = (model(i, x[0], x[1]) - rec.p) / rec.sigma_p;
    }
    return r;
  };

  std::vector<Eigen::Vector2d> starts{{initial.omega_par, initial.omega_perp}};
  if (options.multi_start) {
    for (double fp : {0.95, 1.0, 1.05})
      for (double fq : {0.5, 1.0, 2.0})
        if (fp != 1.0 || fq != 1.0)
          starts.emplace_back(initial.omega_par * fp, std::max(initial.omega_perp, 1e-3) * fq);
  }

  LeastSquaresResult best;
  bool have = false;
  for (const auto& s : starts) {
    const auto fit = levenberg_marquardt(residual, s, options.solver);
    if (fit.converged && (!have || fit.cost < best.cost)) {
      best = fit;
      have = true;
    }
  }
  if (!have) throw NumericalError("fit_coupling: least squares did not converge");

  FitResult<NuclearCoupling> out;
  out.params = {best.x[0], std::abs(best.x[1])};
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  if (best.x[1] < 0.0) d(1, 1) = -1.0;
  out.covariance = d * best.covariance * d.transpose();
  out.n_points = static_cast<int>(m);
  out.iterations = best.iterations;
  out.converged = true;
  out.chi_nu = reduced(best.cost, out.n_points, 2);

  // Largest imprint of the fitted modulation on P, against the typical error bar.
  double depth = 0.0;
  std::vector<double> sig;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = recs[static_cast<std::size_t>(i)];
    depth = std::max(depth, std::abs(model(i, out.params.omega_par, out.params.omega_perp) -
                                     0.5 * (1.0 + decay[i])));
    sig.push_back(r.sigma_p);
  }
  std::nth_element(sig.begin(), sig.begin() + static_cast<std::ptrdiff_t>(sig.size() / 2), sig.end());
  const double typical = sig[sig.size() / 2];
  const Eigen::VectorXd err = out.errors();
  if (!(err[0] < std::abs(out.params.omega_par)) || !(err[1] < std::max(out.params.omega_perp, 1e-12)))
    out.warnings.push_back(
        "linearized errors exceed the estimate; the likelihood is not quadratic here "
        "(t1 close to the phase resonance of this nucleus)");
  if (depth < 2.0 * typical || best.rank < 2) {
    std::ostringstream msg;
    msg << kUnidentifiable << ": modulation depth " << depth << " vs sigma_p " << typical;
    out.warnings.push_back(msg.str());
  }
  return out;
}

// --- direct multi-sequence fit -----------------------------------------------------

FitResult<GaussianNsd> fit_nsd_direct(std::span<const CoherenceTrace> traces,
                                      const EnvironmentModel& env, double center,
                                      const DirectFitOptions& options) {
  require(traces.size() >= 2, "fit_nsd_direct: need at least 2 traces");
  require(std::isfinite(center) && center > 0.0, "fit_nsd_direct: center must be > 0");
  env.validate();

  struct Row {
    PulseSequence seq;
    double modulation;
    double p;
    double sigma;
  };
  std::vector<Row> rows;
  for (const auto& tr : traces) {
    tr.validate();
    for (const auto& r : tr.records) {
      auto seq = record_sequence(tr, r);
      const double mod = env.nuclei.empty()
                             ? 1.0
                             : conditional_modulation(seq, env.nuclei, env.omega_l(), env.ms);
      rows.push_back({std::move(seq), mod, r.p, r.sigma_p});
    }
  }

  const NsdParam param{true, center};
  const auto m = static_cast<Eigen::Index>(rows.size());
  auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Nsd g = param.decode(x);
    Eigen::VectorXd r(m);
    parallel_for(rows.size(), options.threads, [&](std::size_t i) {
      const auto& row = rows[i];
      const double p = 0.5 * (1.0 + std::exp(-chi(row.seq, g, options.chi)) * row.modulation);
      r[static_cast<Eigen::Index>(i)] = (p - row.p) / row.sigma;
    });
    return r;
  };

  GaussianNsd start;
  if (options.initial) {
    start = *options.initial;
  } else if (const auto* g = std::get_if<GaussianNsd>(&env.nsd)) {
    start = *g;
  } else {
    start = {1e-3, 0.1, center, 0.02 * center};
  }
  start.center = center;

  // y0 -> infinity gives p = 1/2 everywhere, a flat finite-cost plateau on
  // decayed data. A start with too little area slides onto it, so retry with
  // larger amplitudes.
  std::vector<GaussianNsd> starts = {start};
  for (const double f : {10.0, 100.0, 1e3, 1e4}) {
    GaussianNsd g = start;
    g.amplitude *= f;
    g.y0 = 1e-4 * g.amplitude;
    g.width = std::max(g.width, 0.05 * center);
    starts.push_back(g);
  }
  auto plateau = [&](const GaussianNsd& g) {
    const Nsd nsd = g;
    for (const auto& row : rows)
      if (std::exp(-chi(row.seq, nsd, options.chi)) * std::abs(row.modulation) > 1e-6) return false;
    return true;
  };
  LeastSquaresResult fit;
  bool have = false;
  for (const auto& s0 : starts) {
    fit = levenberg_marquardt(residual, param.encode(s0), options.solver);
    const GaussianNsd d = param.decode(fit.x);
    have = fit.converged && std::isfinite(d.y0) && std::isfinite(d.amplitude) && std::isfinite(d.width) &&
           d.width > 0.0 && !plateau(d);
    if (have) break;
  }
  if (!have) throw NumericalError("fit_nsd_direct: least squares found no finite, non-saturated spectrum");

  FitResult<GaussianNsd> out;
  out.params = param.decode(fit.x);
  out.covariance = param.natural_covariance(out.params, fit.covariance);
  out.n_points = static_cast<int>(m);
  out.iterations = fit.iterations;
  out.converged = true;
  out.chi_nu = reduced(fit.cost, out.n_points, 3);

  const bool same = std::all_of(traces.begin(), traces.end(), [&](const CoherenceTrace& t) {
    return t.family == traces.front().family && t.t1 == traces.front().t1;
  });
  if (same) out.warnings.push_back("insufficient spectral leverage: all traces share family and t1");
  if (fit.rank < fit.x.size())
    out.warnings.push_back("rank-deficient Jacobian; errors along degenerate directions are unreliable");
  return out;
}

}  // namespace ddspec
