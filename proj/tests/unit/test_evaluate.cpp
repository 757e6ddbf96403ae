#include <doctest.h>

#include <algorithm>
#include <random>

#include "ddspec/error.hpp"
#include "ddspec/evaluate.hpp"
#include "ddspec/forward.hpp"

using namespace ddspec;

TEST_CASE("reduced chi squared") {
  const std::vector<double> sim = {0.9, 0.8, 0.7, 0.6};
  std::vector<CoherenceRecord> data = {{1, 1, 0.91, 0.01}, {2, 2, 0.78, 0.02}, {3, 3, 0.7, 0.01}, {4, 4, 0.5, 0.05}};
  // (1 + 1 + 0 + 4) / 3
  CHECK(chi_nu_squared(sim, data) == doctest::Approx(2.0));

  auto scaled = data;
  for (auto& r : scaled) r.sigma_p *= 4.0;
  CHECK(chi_nu_squared(sim, scaled) == chi_nu_squared(sim, data) / 16.0);

  std::vector<std::size_t> idx = {2, 0, 3, 1};
  std::vector<double> sim_p;
  std::vector<CoherenceRecord> data_p;
  for (auto i : idx) {
    sim_p.push_back(sim[i]);
    data_p.push_back(data[i]);
  }
  CHECK(chi_nu_squared(sim_p, data_p) == doctest::Approx(chi_nu_squared(sim, data)));

  CHECK_THROWS_AS(chi_nu_squared(std::vector<double>{0.5}, std::vector<CoherenceRecord>{{1, 1, 0.5, 0.1}}),
                  InvalidArgument);
  data[1].sigma_p = 0.0;
  CHECK_THROWS_AS(chi_nu_squared(sim, data), InvalidArgument);
  CHECK_THROWS_AS(chi_nu_squared(std::vector<double>{0.5, 0.4}, data), InvalidArgument);
}

TEST_CASE("pooled statistic counts every record once") {
  CoherenceTrace a, b;
  a.family = b.family = Family::udd;
  a.records = {{1, 1, 0.5, 0.1}, {1, 2, 0.6, 0.1}};
  b.records = {{2, 1, 0.7, 0.1}};
  const std::vector<std::vector<double>> sims = {{0.6, 0.6}, {0.5}};
  const std::vector<CoherenceTrace> traces = {a, b};
  // (1 + 0 + 4) / 2
  CHECK(pooled_chi_nu_squared(sims, traces) == doctest::Approx(2.5));
}

namespace {

std::vector<CoherenceTrace> weak_dataset(const EnvironmentModel& env, double sigma, std::uint64_t seed) {
  const auto& g = std::get<GaussianNsd>(env.nsd);
  const double period = kTwoPi / g.center;
  CoherenceTrace echo;
  echo.family = Family::udd;
  for (int i = 1; i <= 20; ++i) echo.records.push_back({1, 0.2 * period * i, 0.0, sigma});
  CoherenceTrace many;
  many.family = Family::udd;
  for (int i = 1; i <= 20; ++i) many.records.push_back({32, 16 * period * (0.9 + 0.01 * i), 0.0, sigma});
  std::vector<CoherenceTrace> out = {echo, many};
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto p = simulate_trace(out[k], env);
    for (std::size_t i = 0; i < p.size(); ++i) out[k].records[i].p = p[i];
    add_shot_noise(out[k], sigma, seed + k);
  }
  return out;
}

}  // namespace

TEST_CASE("regime report on self-consistent data") {
  EnvironmentModel env;
  env.b_field = 394.0;
  env.nsd = GaussianNsd::from_lab_units(6.1, 420.0, larmor(394.0) / kTwoPi * 1e3, 4.8);
  const auto traces = weak_dataset(env, 0.01, 3);
  const auto rep = regime_report(env, env, traces);
  REQUIRE(rep.groups.size() == 2);
  for (const auto& g : rep.groups) {
    CHECK(g.n_points == 20);
    CHECK(g.chi_m1 == g.chi_m2);
    CHECK(g.chi_m1 == doctest::Approx(1.0).epsilon(0.6));
  }
  CHECK(rep.combined_points == 40);
  CHECK(rep.combined == doctest::Approx(1.0).epsilon(0.5));

  const auto j = rep.to_json();
  CHECK(j["groups"].size() == 2);
  CHECK(j["two_model"]["n_points"] == 40);
  CHECK(rep.to_table().find("two-model") != std::string::npos);

  // a wrong second model only hurts the high-n score of model 2
  EnvironmentModel off = env;
  std::get<GaussianNsd>(off.nsd).amplitude *= 3.0;
  const auto rep2 = regime_report(env, off, traces);
  CHECK(rep2.find("high-n")->chi_m2 > 3.0 * rep2.find("high-n")->chi_m1);
  CHECK(rep2.find("low-n")->chi_m1 == rep.find("low-n")->chi_m1);
}

TEST_CASE("a single group reduces to chi_nu_squared") {
  EnvironmentModel env;
  env.b_field = 394.0;
  env.nsd = GaussianNsd::from_lab_units(6.1, 420.0, larmor(394.0) / kTwoPi * 1e3, 4.8);
  const auto traces = weak_dataset(env, 0.01, 8);
  const std::vector<CoherenceTrace> only_low = {traces[0]};
  const auto rep = regime_report(env, env, only_low);
  REQUIRE(rep.groups.size() == 1);
  const auto sim = simulate_trace(traces[0], env);
  CHECK(rep.combined == doctest::Approx(chi_nu_squared(sim, traces[0].records)));

  CoherenceTrace mid = traces[0];
  for (auto& r : mid.records) r.n = 10;
  const std::vector<CoherenceTrace> none = {mid};
  CHECK_THROWS_AS(regime_report(env, env, none), InvalidArgument);
}
