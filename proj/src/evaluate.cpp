#include "ddspec/evaluate.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ddspec/error.hpp"
#include "ddspec/forward.hpp"
#include "ddspec/parallel.hpp"

namespace ddspec {

namespace {

double sum_sq(std::span<const double> sim, std::span<const CoherenceRecord> data) {
  require(sim.size() == data.size(), "chi_nu_squared: simulation and data lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    require(data[i].sigma_p > 0.0, "chi_nu_squared: sigma_p must be > 0");
    const double r = (sim[i] - data[i].p) / data[i].sigma_p;
    s += r * r;
  }
  return s;
}

}  // namespace

double chi_nu_squared(std::span<const double> sim, std::span<const CoherenceRecord> data) {
  require(data.size() >= 2, "chi_nu_squared: need at least 2 points");
  return sum_sq(sim, data) / static_cast<double>(data.size() - 1);
}

double pooled_chi_nu_squared(std::span<const std::vector<double>> sims,
                             std::span<const CoherenceTrace> traces) {
  require(sims.size() == traces.size(), "pooled_chi_nu_squared: one simulation per trace");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    s += sum_sq(sims[k], traces[k].records);
    n += traces[k].records.size();
  }
  require(n >= 2, "pooled_chi_nu_squared: need at least 2 points");
  return s / static_cast<double>(n - 1);
}

const GroupScore* RegimeReport::find(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return &g;
  return nullptr;
}

nlohmann::json RegimeReport::to_json() const {
  nlohmann::json j;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : groups)
    j["groups"].push_back(
        {{"name", g.name}, {"n_points", g.n_points}, {"chi_nu_m1", g.chi_m1}, {"chi_nu_m2", g.chi_m2}});
  j["two_model"] = {{"chi_nu", combined}, {"n_points", combined_points}};
  return j;
}

std::string RegimeReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "group" << std::right << std::setw(8) << "points"
     << std::setw(14) << "chi2nu(m1)" << std::setw(14) << "chi2nu(m2)" << "\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& g : groups)
    os << std::left << std::setw(12) << g.name << std::right << std::setw(8) << g.n_points
       << std::setw(14) << g.chi_m1 << std::setw(14) << g.chi_m2 << "\n";
  os << std::left << std::setw(12) << "two-model" << std::right << std::setw(8) << combined_points
     << std::setw(14) << combined << "\n";
  return os.str();
}

RegimeReport regime_report(const EnvironmentModel& m1, const EnvironmentModel& m2,
                           std::span<const CoherenceTrace> traces, const RegimeOptions& options) {
  require(options.low_max <= options.high_min, "regime_report: low_max must not exceed high_min");
  require(m1.nuclei.size() == m2.nuclei.size(), "regime_report: models must share their nuclei");

  struct Item {
    const CoherenceTrace* trace;
    const CoherenceRecord* record;
    bool low;
  };
  std::vector<Item> items;
  for (const auto& t : traces)
    for (const auto& r : t.records) {
      if (r.n < options.low_max) items.push_back({&t, &r, true});
      else if (r.n >= options.high_min) items.push_back({&t, &r, false});
    }

  std::vector<double> p1(items.size());
  std::vector<double> p2(items.size());
  parallel_for(items.size(), options.threads, [&](std::size_t i) {
    const auto seq = record_sequence(*items[i].trace, *items[i].record);
    p1[i] = coherence(seq, m1, options.chi);
    p2[i] = coherence(seq, m2, options.chi);
  });

  RegimeReport report;
  double combined = 0.0;
  for (bool low : {true, false}) {
    GroupScore g;
    g.name = low ? "low-n" : "high-n";
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].low != low) continue;
      const auto& r = *items[i].record;
      const double r1 = (p1[i] - r.p) / r.sigma_p;
      const double r2 = (p2[i] - r.p) / r.sigma_p;
      s1 += r1 * r1;
      s2 += r2 * r2;
      ++g.n_points;
    }
    if (g.n_points < 2) continue;
    g.chi_m1 = s1 / (g.n_points - 1);
    g.chi_m2 = s2 / (g.n_points - 1);
    combined += low ? s1 : s2;
    report.combined_points += g.n_points;
    report.groups.push_back(g);
  }
  require(!report.groups.empty(), "regime_report: both record groups are empty");
  report.combined = combined / (report.combined_points - 1);
  return report;
}

}  // namespace ddspec
