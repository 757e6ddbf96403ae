#include <doctest.h>

#include <cmath>
#include <random>

#include "ddspec/error.hpp"
#include "ddspec/sequences.hpp"

using namespace ddspec;

TEST_CASE("equidistant examples") {
  const auto echo = equidistant(1, 5.0);
  REQUIRE(echo.size() == 1);
  CHECK(echo.pulse_times[0] == 5.0);
  CHECK(echo.total_time == 10.0);

  const auto four = equidistant(4, 1.0);
  CHECK(four.pulse_times == std::vector<double>{1.0, 3.0, 5.0, 7.0});
  CHECK(four.total_time == 8.0);

  CHECK(equidistant(32, 0.242).total_time == doctest::Approx(15.488));
}

TEST_CASE("equidistant free intervals are t1, 2 t1, ..., t1") {
  const double t1 = 0.37;
  const auto tau = free_intervals(equidistant(9, t1));
  REQUIRE(tau.size() == 10);
  CHECK(tau.front() == t1);
  CHECK(tau.back() == doctest::Approx(t1).epsilon(1e-15));
  for (std::size_t k = 1; k + 1 < tau.size(); ++k) CHECK(tau[k] == doctest::Approx(2 * t1).epsilon(1e-15));
}

TEST_CASE("xy8 phase pattern") {
  const auto s = equidistant(16, 1.0, Family::xy8);
  const double x = 0.0, y = kPi / 2;
  const std::vector<double> cycle = {x, y, x, y, y, x, y, x};
  for (int k = 0; k < 16; ++k) CHECK(s.phases[k] == cycle[k % 8]);
  CHECK(s.params.cycles == 2);
}

TEST_CASE("udd examples") {
  CHECK(udd(1, 10.0).pulse_times[0] == doctest::Approx(5.0));
  const auto two = udd(2, 8.0);
  CHECK(two.pulse_times[0] == doctest::Approx(2.0));
  CHECK(two.pulse_times[1] == doctest::Approx(6.0));

  const double T = 13.7;
  const auto s = udd(32, T);
  REQUIRE(s.size() == 32);
  for (int j = 0; j < 32; ++j) CHECK(s.pulse_times[j] + s.pulse_times[31 - j] == doctest::Approx(T));
}

TEST_CASE("axy pulse positions") {
  const double T = 80.0;
  const auto full = axy(8, 1.0, T);
  REQUIRE(full.size() == 40);
  for (int k = 0; k < 40; ++k) CHECK(full.pulse_times[k] == doctest::Approx((2 * k + 1) * T / 80));

  const auto half = axy(8, 0.5, T);
  for (int i = 1; i <= 8; ++i)
    for (int j = 1; j <= 5; ++j)
      CHECK(half.pulse_times[(i - 1) * 5 + j - 1] == doctest::Approx(T * (10 * i + j - 8) / 80));

  const auto tight = axy(8, kMinCompression, T);
  for (int i = 1; i <= 8; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(tight.pulse_times[(i - 1) * 5 + j] == doctest::Approx((2 * i - 1) * T / 16).epsilon(1e-5));
}

TEST_CASE("axy at r_m = 1 matches equidistant") {
  for (int blocks : {4, 8}) {
    const double T = 17.3;
    const auto a = axy(blocks, 1.0, T);
    const auto e = equidistant(5 * blocks, T / (10.0 * blocks));
    REQUIRE(a.size() == e.size());
    for (std::size_t k = 0; k < a.size(); ++k)
      CHECK(std::abs(a.pulse_times[k] - e.pulse_times[k]) <= 1e-12 * e.pulse_times[k]);
  }
}

TEST_CASE("axy knill phases") {
  const auto a = axy(8, 0.5, 10.0);
  const double y = kPi / 2;
  // first block along X, second along Y
  CHECK(a.phases[0] == doctest::Approx(kPi / 6));
  CHECK(a.phases[2] == doctest::Approx(kPi / 2));
  CHECK(a.phases[5] == doctest::Approx(y + kPi / 6));
  CHECK(a.phases[7] == doctest::Approx(y + kPi / 2));
}

TEST_CASE("builders reject bad parameters") {
  CHECK_THROWS_AS(equidistant(0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(equidistant(2, -1.0), InvalidArgument);
  CHECK_THROWS_AS(udd(0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(axy(8, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(axy(8, 1.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(axy(6, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(custom({5.0, 3.0}, 10.0), InvalidArgument);
  CHECK_THROWS_AS(custom({10.0}, 10.0), InvalidArgument);
  CHECK_THROWS_AS(custom({0.0}, 10.0), InvalidArgument);
}

TEST_CASE("custom sequences") {
  const auto ramsey = custom({}, 10.0);
  CHECK(ramsey.size() == 0);
  CHECK(free_intervals(ramsey) == std::vector<double>{10.0});

  CHECK(custom({5.0}, 10.0).pulse_times == equidistant(1, 5.0).pulse_times);

  const auto u = udd(32, 7.0);
  CHECK(custom(u.pulse_times, 7.0).pulse_times == u.pulse_times);
}

TEST_CASE("time reversal is an involution") {
  const auto u = axy(8, 0.3, 11.0);
  const auto r = time_reversed(u);
  CHECK(r.pulse_times.front() == doctest::Approx(11.0 - u.pulse_times.back()));
  const auto rr = time_reversed(r);
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(rr.pulse_times[k] == doctest::Approx(u.pulse_times[k]));
}

TEST_CASE("random builder draws satisfy the sequence invariants") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> n_dist(1, 64);
  std::uniform_real_distribution<double> t_dist(1e-3, 100.0);
  std::uniform_real_distribution<double> r_dist(kMinCompression, 1.0);
  for (int i = 0; i < 10000; ++i) {
    PulseSequence s;
    switch (i % 3) {
      case 0: s = equidistant(n_dist(rng), t_dist(rng)); break;
      case 1: s = udd(n_dist(rng), t_dist(rng)); break;
      default: s = axy(i % 2 ? 4 : 8, r_dist(rng), t_dist(rng)); break;
    }
    REQUIRE_NOTHROW(s.validate());
  }
}

TEST_CASE("sequence spec build") {
  SequenceSpec cp;
  cp.family = Family::cpmg;
  cp.n = 4;
  cp.total_time = 8.0;
  CHECK(cp.build().pulse_times == equidistant(4, 1.0).pulse_times);

  SequenceSpec ax;
  ax.family = Family::axy;
  ax.n = 40;
  ax.r_m = 0.5;
  ax.total_time = 80.0;
  CHECK(ax.build().size() == 40);
  ax.n = 8;
  CHECK(ax.build().size() == 40);

  SequenceSpec missing;
  missing.family = Family::udd;
  missing.n = 3;
  CHECK_THROWS_AS(missing.build(), InvalidArgument);
}
