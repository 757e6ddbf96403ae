#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ddspec/error.hpp"
#include "ddspec/forward.hpp"
#include "ddspec/nuclei.hpp"
#include "ddspec/spectroscopy.hpp"

using namespace ddspec;

namespace {

CoherenceTrace exponential_trace(double t1, double rate, double w0, double sigma) {
  CoherenceTrace t;
  t.family = Family::cpmg;
  t.t1 = t1;
  for (int n = 2; n <= 64; n += 2) {
    const double T = 2 * n * t1;
    t.records.push_back({n, T, 0.5 * (1 + w0 * std::exp(-rate * T)), sigma});
  }
  return t;
}

EnvironmentModel env_700g() {
  EnvironmentModel env;
  env.b_field = 700.0;
  env.nsd = GaussianNsd::from_lab_units(5.0, 600.0, 750.0, 9.0);
  return env;
}

std::vector<RatePoint> comb_points(const GaussianNsd& g, std::span<const int> harmonics, double window, int points,
                                   int l_max) {
  std::vector<RatePoint> out;
  for (const auto& sp : plan_scan(angular_to_khz(g.center), harmonics, window, points)) {
    const double w = kPi / (2 * sp.t1);
    const double rate = comb_rate(g, w, l_max);
    out.push_back({w, rate, 1e-3 * rate + 1e-6, sp.harmonic});
  }
  return out;
}

}  // namespace

TEST_CASE("fit_t2l recovers a pure exponential") {
  const auto t = exponential_trace(0.4, 0.013, 1.0, 0.01);
  const auto free = fit_t2l(t);
  CHECK(free.rate == doctest::Approx(0.013).epsilon(1e-6));
  CHECK(free.amplitude == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(free.t2l == doctest::Approx(1 / 0.013).epsilon(1e-6));
  CHECK(free.n_used == 29);  // n >= 8

  T2lOptions pinned;
  pinned.free_amplitude = false;
  CHECK(fit_t2l(t, pinned).rate == doctest::Approx(0.013).epsilon(1e-6));

  const auto scaled = exponential_trace(0.4, 0.013, 0.8, 0.01);
  CHECK(fit_t2l(scaled).amplitude == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("fit_t2l point estimate ignores a uniform rescaling of sigma_p") {
  auto t = exponential_trace(0.4, 0.02, 0.95, 0.01);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& r : t.records) r.p += noise(rng);
  const auto a = fit_t2l(t);
  for (auto& r : t.records) r.sigma_p *= 3.0;
  const auto b = fit_t2l(t);
  CHECK(b.rate == doctest::Approx(a.rate).epsilon(1e-9));
  CHECK(b.rate_err == doctest::Approx(3.0 * a.rate_err).epsilon(1e-6));
  CHECK(b.chi_nu == doctest::Approx(a.chi_nu / 9.0).epsilon(1e-6));
}

TEST_CASE("fit_t2l on a flat spectrum returns the floor") {
  EnvironmentModel env;
  env.b_field = 700.0;
  env.nsd = GaussianNsd{0.006, 0.0, 1.0, 0.1};
  const std::vector<int> n_list = {8, 12, 16, 24, 32, 48, 64, 96};
  DatasetOptions o;
  o.shot_sigma = 0.005;
  o.seed = 17;
  const auto fit = fit_t2l(decay_dataset(0.5, n_list, env, o));
  CHECK(std::abs(fit.rate - 0.006) <= 3 * fit.rate_err);
}

TEST_CASE("fit_t2l failure modes") {
  auto t = exponential_trace(0.4, 0.013, 1.0, 0.01);
  T2lOptions strict;
  strict.n_min = 64;
  CHECK_THROWS_AS(fit_t2l(t, strict), NumericalError);
  strict.admit_small_n = true;
  CHECK_NOTHROW(fit_t2l(t, strict));

  for (auto& r : t.records) r.p = 0.45;
  CHECK_THROWS_AS(fit_t2l(t), NumericalError);
}

TEST_CASE("scan planning") {
  const std::vector<int> l0 = {0};
  const auto one = plan_scan(750.0, l0, 0.0, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].t1 == doctest::Approx(1.0 / 3.0));
  const std::vector<int> l1 = {1};
  CHECK(plan_scan(750.0, l1, 0.0, 1)[0].t1 == doctest::Approx(1.0));

  // probe frequency pi / (2 t1) of the l = 1, 2 windows sits at nu_L / 3 and nu_L / 5
  const double nu = angular_to_khz(larmor(635.0));
  const std::vector<int> l12 = {1, 2};
  const auto plan = plan_scan(nu, l12, 30.0, 21);
  REQUIRE(plan.size() == 42);
  for (const auto& p : plan) {
    const double probe_khz = 1e3 / (4 * p.t1);
    const double centre = nu / (2 * p.harmonic + 1);
    CHECK(std::abs(probe_khz - centre) <= 30.0 / (2 * p.harmonic + 1) + 1e-9);
  }
  CHECK(1e3 / (4 * plan[10].t1) == doctest::Approx(nu / 3));
  CHECK(1e3 / (4 * plan[31].t1) == doctest::Approx(nu / 5));
}

TEST_CASE("reconstruct_nsd is exact on comb-generated rates") {
  const auto g = GaussianNsd::from_lab_units(5.0, 600.0, 750.0, 9.0);
  const std::vector<int> l12 = {1, 2};
  const auto pts = comb_points(g, l12, 40.0, 21, 2);
  ReconstructOptions o;
  o.initial = GaussianNsd::from_lab_units(4.0, 400.0, 748.0, 12.0);
  const auto fit = reconstruct_nsd(pts, o);
  CHECK(fit.params.center == doctest::Approx(g.center).epsilon(1e-7));
  CHECK(fit.params.amplitude == doctest::Approx(g.amplitude).epsilon(1e-6));
  CHECK(fit.params.width == doctest::Approx(g.width).epsilon(1e-6));
  CHECK(fit.params.y0 == doctest::Approx(g.y0).epsilon(1e-5));

  ReconstructOptions fixed;
  fixed.fixed_center = g.center;
  const auto f2 = reconstruct_nsd(pts, fixed);
  CHECK(f2.params.center == g.center);
  CHECK(f2.params.width == doctest::Approx(g.width).epsilon(1e-6));
}

TEST_CASE("reconstruct_nsd refuses one-sided data") {
  const auto g = GaussianNsd::from_lab_units(5.0, 600.0, 750.0, 9.0);
  std::vector<RatePoint> pts;
  for (int i = 0; i < 8; ++i) {
    const double w = g.center * (1.02 + 0.005 * i);
    pts.push_back({w, comb_rate(g, w, 0), 1e-4, 0});
  }
  ReconstructOptions o;
  o.l_max = 0;
  CHECK_THROWS_AS(reconstruct_nsd(pts, o), NumericalError);
  pts.resize(4);
  CHECK_THROWS_AS(reconstruct_nsd(pts, o), InvalidArgument);
}

TEST_CASE("0th-order reconstruction broadens a narrow peak") {
  const auto env = env_700g();
  const auto& g = std::get<GaussianNsd>(env.nsd);
  const std::vector<int> l0 = {0};
  const std::vector<int> n_list = {1, 2, 3, 4, 6, 8, 12, 16, 24, 32};
  T2lOptions t2l;
  t2l.n_min = 1;
  std::vector<RatePoint> pts;
  for (const auto& sp : plan_scan(750.0, l0, 60.0, 25)) {
    const auto trace = decay_dataset(sp.t1, n_list, env);
    pts.push_back(rate_point(trace, 0, t2l));
  }
  ReconstructOptions o;
  o.l_max = 0;
  const auto fit = reconstruct_nsd(pts, o);
  CHECK(fit.params.width > 1.2 * g.width);
  CHECK(fit.params.amplitude < g.amplitude / 1.2);
}

TEST_CASE("simulate, fit T2L and reconstruct: pulls over 20 replicates") {
  // noise-free P is computed once; replicates differ only in the injected noise
  auto env = env_700g();
  env.nsd = GaussianNsd::from_lab_units(5.0, 600.0, 750.0, 30.0);
  const auto& g = std::get<GaussianNsd>(env.nsd);
  const std::vector<int> l12 = {1, 2};
  const std::vector<int> n_list = {8, 12, 16, 24, 32, 48, 64, 96, 128};
  std::vector<CoherenceTrace> clean;
  const auto plan = plan_scan(750.0, l12, 90.0, 13);
  for (const auto& sp : plan) clean.push_back(decay_dataset(sp.t1, n_list, env));

  const double sigma = 0.01;
  std::vector<double> pulls[3];
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    std::vector<RatePoint> pts;
    for (std::size_t k = 0; k < clean.size(); ++k) {
      auto t = clean[k];
      add_shot_noise(t, sigma, 1000 * rep + k);
      pts.push_back(rate_point(t, plan[k].harmonic));
    }
    const auto fit = reconstruct_nsd(pts);
    const auto e = fit.errors();
    pulls[0].push_back((fit.params.amplitude - g.amplitude) / e[1]);
    pulls[1].push_back((fit.params.center - g.center) / e[2]);
    pulls[2].push_back((fit.params.width - g.width) / e[3]);
  }
  for (const auto& p : pulls) {
    double mean = 0.0, var = 0.0;
    for (double v : p) mean += v / p.size();
    for (double v : p) var += (v - mean) * (v - mean) / (p.size() - 1);
    CHECK(std::abs(mean) < 0.5);
    CHECK(std::sqrt(var) < 2.0);
  }
}

TEST_CASE("detect_nuclei") {
  const double wl = larmor(635.0);
  const std::vector<NuclearCoupling> table = {NuclearCoupling::from_khz(-698, 148), NuclearCoupling::from_khz(-73, 59),
                                              NuclearCoupling::from_khz(-25, 42)};
  auto scan_of = [&](const std::vector<NuclearCoupling>& nuclei) {
    std::vector<AmplitudePoint> scan;
    // l = 0 window over the first resonances (wL + w1) / 2; wider windows alias
    // odd sub-harmonics of the strong nucleus into the scan
    for (double nu = 600.0; nu <= 1100.0; nu += 0.5) {
      const double w = khz_to_angular(nu);
      const double t1 = kPi / (2 * w);
      double amp = 0.0;
      for (const auto& c : nuclei) amp += modulation_amplitude(c, wl, t1, -1);
      scan.push_back({w, amp, 0});
    }
    return scan;
  };
  DetectOptions o;
  o.omega_l = wl;
  const auto found = detect_nuclei(scan_of(table), 0.2, o);
  CHECK(found.size() == 3);
  for (const auto& c : table) {
    const bool hit = std::any_of(found.begin(), found.end(),
                                 [&](double g) { return std::abs(g - c.omega_par) < 0.15 * std::abs(c.omega_par) + 0.02 * wl; });
    CHECK(hit);
  }

  CHECK(detect_nuclei(scan_of({NuclearCoupling{-0.3, 0.0}}), 0.2, o).empty());

  const auto single = detect_nuclei(scan_of({table[0]}), 0.2, o);
  REQUIRE(!single.empty());
  CHECK(single[0] == doctest::Approx(table[0].omega_par).epsilon(0.1));
}

TEST_CASE("fit_coupling flags a coupling without transverse part") {
  EnvironmentModel env;
  env.b_field = 635.0;
  env.nsd = GaussianNsd::from_lab_units(3.7, 380.0, 679.9, 8.5);
  env.nuclei = {NuclearCoupling::from_khz(-698, 0.0)};
  std::vector<int> n_list;
  for (int n = 2; n <= 32; n += 2) n_list.push_back(n);
  DatasetOptions d;
  d.shot_sigma = 0.02;
  d.seed = 4;
  const auto trace = decay_dataset(0.242, n_list, env, d);
  CouplingFitOptions o;
  o.omega_l = env.omega_l();
  const auto fit = fit_coupling(trace, NuclearCoupling::from_khz(-650, 100), env.nsd, o);
  const bool flagged = std::any_of(fit.warnings.begin(), fit.warnings.end(),
                                   [](const std::string& w) { return w.rfind(kUnidentifiable, 0) == 0; });
  CHECK(flagged);
}

TEST_CASE("fit_coupling gives the same even-n fit in both phase conventions") {
  EnvironmentModel env;
  env.b_field = 635.0;
  env.nsd = GaussianNsd::from_lab_units(3.7, 380.0, 679.9, 8.5);
  env.nuclei = {NuclearCoupling::from_khz(-698, 148)};
  std::vector<int> n_list;
  for (int n = 2; n <= 32; n += 2) n_list.push_back(n);
  DatasetOptions d;
  d.shot_sigma = 0.02;
  d.seed = 2;
  const auto trace = decay_dataset(0.242, n_list, env, d);
  CouplingFitOptions a;
  a.omega_l = env.omega_l();
  CouplingFitOptions b = a;
  b.convention = PhaseConvention::phi_prime;
  const auto init = NuclearCoupling::from_khz(-650, 100);
  const auto fa = fit_coupling(trace, init, env.nsd, a);
  const auto fb = fit_coupling(trace, init, env.nsd, b);
  CHECK(fa.chi_nu == doctest::Approx(fb.chi_nu).epsilon(1e-6));
  CHECK(fa.params.omega_par == doctest::Approx(fb.params.omega_par).epsilon(1e-5));
  CHECK(fa.params.omega_perp == doctest::Approx(fb.params.omega_perp).epsilon(1e-5));
  // between the even records the two readings interpolate differently
  const double t1 = 0.242;
  CHECK(std::abs(analytic_modulation(3, t1, fa.params, a.omega_l, -1) -
                 analytic_modulation(3, t1, fa.params, a.omega_l, -1, PhaseConvention::phi_prime)) > 1e-6);
}

TEST_CASE("fit_nsd_direct recovers a self-consistent model") {
  EnvironmentModel env;
  env.b_field = 635.0;
  env.nsd = GaussianNsd::from_lab_units(3.7, 380.0, 679.9, 8.5);
  env.nuclei = {NuclearCoupling::from_khz(-698, 148)};
  const auto& g = std::get<GaussianNsd>(env.nsd);
  const double period = kTwoPi / g.center;

  std::vector<CoherenceTrace> traces;
  CoherenceTrace u;
  u.family = Family::udd;
  for (int i = 1; i <= 30; ++i) u.records.push_back({32, 16 * period * (0.85 + 0.01 * i), 0.0, 0.01});
  CoherenceTrace a = u;
  a.family = Family::axy;
  a.r_m = 0.5;
  for (auto& r : a.records) {
    r.n = 40;
    r.total_time *= 40.0 / 32.0;
  }
  const std::vector<int> n_list = {8, 16, 24, 32, 48, 64};
  traces = {u, a, decay_dataset(kPi / (2 * g.center) * 3, n_list, env)};
  for (auto& t : traces) {
    const auto p = simulate_trace(t, env);
    for (std::size_t i = 0; i < p.size(); ++i) t.records[i].p = p[i];
  }

  DirectFitOptions o;
  o.initial = GaussianNsd::from_lab_units(3.0, 300.0, 679.9, 11.0);
  const auto fit = fit_nsd_direct(traces, env, g.center, o);
  const auto e = fit.errors();
  CHECK(std::abs(fit.params.amplitude - g.amplitude) <= e[1]);
  CHECK(std::abs(fit.params.width - g.width) <= e[3]);
  CHECK(std::abs(fit.params.y0 - g.y0) <= e[0]);
  CHECK(fit.params.center == g.center);
  CHECK(fit.chi_nu < 1e-3);

  const std::vector<CoherenceTrace> same = {traces[2], traces[2]};
  const auto weak = fit_nsd_direct(same, env, g.center, o);
  CHECK(std::any_of(weak.warnings.begin(), weak.warnings.end(),
                    [](const std::string& w) { return w.find("leverage") != std::string::npos; }));
}
