#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ddspec/error.hpp"
#include "ddspec/io.hpp"

using namespace ddspec;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ddspec_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("environment round trip in lab units") {
  EnvironmentModel env;
  env.b_field = 635.0;
  env.nsd = GaussianNsd::from_lab_units(3.7, 380.0, 679.9, 8.5);
  env.nuclei = {NuclearCoupling::from_khz(-698, 148), NuclearCoupling::from_khz(-25, 42)};
  const auto j = env_to_json(env);
  CHECK(j["nsd"]["a"].get<double>() == doctest::Approx(380.0));
  CHECK(j["nsd"]["sigma_khz"].get<double>() == doctest::Approx(8.5));
  const auto back = env_from_json(j);
  const auto& g = std::get<GaussianNsd>(back.nsd);
  const auto& g0 = std::get<GaussianNsd>(env.nsd);
  CHECK(g.amplitude == doctest::Approx(g0.amplitude).epsilon(1e-15));
  CHECK(g.width == doctest::Approx(g0.width).epsilon(1e-15));
  REQUIRE(back.nuclei.size() == 2);
  CHECK(back.nuclei[0].omega_par == doctest::Approx(env.nuclei[0].omega_par).epsilon(1e-15));
  CHECK(back.b_field == 635.0);

  auto extra = j;
  extra["comment"] = "ignored";
  CHECK_NOTHROW(env_from_json(extra));
}

TEST_CASE("schema errors name the offending field") {
  Json j = Json::parse(R"({"b_field_gauss": 635, "nsd": {"type": "gaussian", "y0": 1, "a": "x", "nu_l_khz": 680, "sigma_khz": 8}})");
  try {
    env_from_json(j);
    FAIL("expected a schema error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("model.nsd.a") != std::string::npos);
  }
  j["nsd"]["a"] = 10;
  j["nsd"]["type"] = "lorentzian";
  CHECK_THROWS_AS(env_from_json(j), InvalidArgument);
  CHECK_THROWS_AS(env_from_json(Json::parse(R"({"nsd": {}})")), InvalidArgument);
}

TEST_CASE("tabulated nsd round trip") {
  TabulatedNsd t{{khz_to_angular(1.0), khz_to_angular(2.0)}, {1e-3, 2e-3}};
  const auto back = std::get<TabulatedNsd>(nsd_from_json(nsd_to_json(t)));
  CHECK(back.omega[1] == doctest::Approx(t.omega[1]).epsilon(1e-15));
  CHECK(back.value[1] == doctest::Approx(2e-3).epsilon(1e-15));
}

TEST_CASE("sequence spec round trip") {
  SequenceSpec s;
  s.family = Family::axy;
  s.n = 40;
  s.r_m = 0.25;
  s.total_time = 30.0;
  const auto back = sequence_spec_from_json(sequence_spec_to_json(s));
  CHECK(back.build().pulse_times == s.build().pulse_times);

  const auto c = sequence_spec_from_json(Json::parse(R"({"family": "custom", "total_time_us": 10, "times_us": [5]})"));
  CHECK(c.build().pulse_times == std::vector<double>{5.0});
  CHECK_THROWS_AS(sequence_spec_from_json(Json::parse(R"({"family": "hahn"})")), InvalidArgument);
}

TEST_CASE("bath from explicit spins or a random draw") {
  const auto explicit_bath = bath_from_json(Json::parse(
      R"({"omega0_khz": 100, "spins": [{"omega_par_khz": 1, "omega_perp_khz": 2}]})"));
  REQUIRE(explicit_bath.spins.size() == 1);
  CHECK(explicit_bath.omega0 == doctest::Approx(khz_to_angular(100.0)));
  CHECK(explicit_bath.spins[0].omega_perp == doctest::Approx(khz_to_angular(2.0)));

  const auto j = Json::parse(R"({"omega0_khz": 100, "random": {"count": 12, "ratio": 0.5, "fixed_magnitude": true, "seed": 5}})");
  const auto a = bath_from_json(j);
  CHECK(a.spins.size() == 12);
  CHECK(a.spins[3].omega_perp == doctest::Approx(0.5 * khz_to_angular(100.0)));
  const auto rt = bath_from_json(bath_to_json(a));
  CHECK(rt.spins[7].omega_par == doctest::Approx(a.spins[7].omega_par).epsilon(1e-15));
}

TEST_CASE("trace csv round trip keeps every bit") {
  CoherenceTrace t;
  t.family = Family::axy;
  t.r_m = 0.75;
  t.harmonic_hint = 1;
  t.label = "axy_075";
  t.records = {{40, 12.345678901234567, 0.1 + 0.2, 0.02}, {40, 13.0, 0.987654321, 1e-3}};
  const Json cfg = {{"seed", 3}, {"note", "x"}};
  const auto text = trace_to_csv(t, &cfg);
  CHECK(text.rfind("# config: ", 0) == 0);
  CHECK(embedded_config(text) == cfg);
  const auto back = trace_from_csv(text, "mem.csv");
  CHECK(back.family == Family::axy);
  CHECK(*back.r_m == 0.75);
  CHECK(*back.harmonic_hint == 1);
  CHECK(back.label == "axy_075");
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].total_time == t.records[0].total_time);
  CHECK(back.records[0].p == t.records[0].p);
  CHECK(trace_to_csv(back, &cfg) == text);
}

TEST_CASE("csv diagnostics carry the line number") {
  const std::string bad = "family,t1_us,n,total_time_us,p,sigma_p\ncpmg,0.5,2,2,0.9,0.01\ncpmg,0.5,4,4,abc,0.01\n";
  try {
    trace_from_csv(bad, "bad.csv");
    FAIL("expected a parse error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
  CHECK_THROWS_AS(trace_from_csv("n,p\n1,2\n", "h.csv"), InvalidArgument);
  CHECK_THROWS_AS(trace_from_csv("family,t1_us,n,total_time_us,p,sigma_p\ncpmg,0.5,2,2\n", "c.csv"), InvalidArgument);
  CHECK_THROWS_AS(trace_from_csv("family,t1_us,n,total_time_us,p,sigma_p\ncpmg,0.5,2,3,0.9,0.01\n", "t.csv"),
                  InvalidArgument);
  CHECK(embedded_config("family,t1_us,n,total_time_us,p,sigma_p\n").is_null());
}

TEST_CASE("atomic writes and directory reads") {
  const auto dir = scratch_dir("atomic");
  CoherenceTrace t;
  t.family = Family::cpmg;
  t.t1 = 0.5;
  t.records = {{2, 2.0, 0.9, 0.01}, {4, 4.0, 0.8, 0.01}};
  write_text_atomic(dir / "b.csv", trace_to_csv(t));
  t.t1 = 0.25;
  t.records = {{2, 1.0, 0.95, 0.01}};
  write_text_atomic(dir / "a.csv", trace_to_csv(t));
  std::ofstream(dir / "notes.txt") << "skip me";
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().extension() != ".tmp");

  const auto traces = read_trace_dir(dir);
  REQUIRE(traces.size() == 2);
  CHECK(traces[0].label == "a");
  CHECK(*traces[1].t1 == 0.5);

  write_text_atomic(dir / "nested" / "x.csv", "x");
  CHECK(read_text(dir / "nested" / "x.csv") == "x");
  CHECK_THROWS_AS(read_text(dir / "nope.csv"), InvalidArgument);
  fs::remove_all(dir);
}

TEST_CASE("config hash and number formatting") {
  const Json a = {{"seed", 1}, {"x", 2.5}};
  const Json b = {{"x", 2.5}, {"seed", 1}};
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(Json{{"seed", 2}, {"x", 2.5}}));
  CHECK(config_hash(a).size() == 16);
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5})
    CHECK(std::stod(format_double(v)) == v);
}
