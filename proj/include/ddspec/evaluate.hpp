#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddspec/filter.hpp"
#include "ddspec/model.hpp"

namespace ddspec {

/// (1 / (N - 1)) sum_i (s_i - y_i)^2 / sigma_i^2.
double chi_nu_squared(std::span<const double> sim, std::span<const CoherenceRecord> data);

/// Same statistic pooled over several data sets, every record counted once.
double pooled_chi_nu_squared(std::span<const std::vector<double>> sims,
                             std::span<const CoherenceTrace> traces);

struct RegimeOptions {
  int low_max = 8;    // low-n group: n < low_max
  int high_min = 20;  // high-n group: n >= high_min
  int threads = 1;
  ChiOptions chi;
};

struct GroupScore {
  std::string name;
  int n_points = 0;
  double chi_m1 = 0.0;
  double chi_m2 = 0.0;
};

struct RegimeReport {
  std::vector<GroupScore> groups;
  double combined = 0.0;  // model 1 on low-n records, model 2 on high-n records
  int combined_points = 0;

  const GroupScore* find(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Scores two environment models on the low-n and high-n records of the
/// traces. A group with fewer than 2 records is left out; both empty throws.
RegimeReport regime_report(const EnvironmentModel& m1, const EnvironmentModel& m2,
                           std::span<const CoherenceTrace> traces, const RegimeOptions& options = {});

}  // namespace ddspec
