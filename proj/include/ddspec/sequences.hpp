#pragma once

#include <optional>
#include <vector>

#include "ddspec/model.hpp"

namespace ddspec {

/// Family parameters a sequence was built from; zero when not applicable.
struct SequenceParams {
  int n = 0;          // pulse count (block count for axy)
  double t1 = 0.0;    // half interpulse spacing, equidistant families
  double r_m = 0.0;   // axy block compression
  int cycles = 0;     // repetitions of the base cycle (xy8: n / 8)
};

/// Ideal instantaneous pi pulses on [0, total_time]. Phases are carried as
/// metadata only: none of the simulation paths depend on them.
struct PulseSequence {
  Family family = Family::custom;
  double total_time = 0.0;
  std::vector<double> pulse_times;
  std::vector<double> phases;
  SequenceParams params;

  std::size_t size() const { return pulse_times.size(); }
  void validate() const;
};

/// n pulses at (2k - 1) t1, k = 1..n; total time 2 n t1.
PulseSequence equidistant(int n, double t1, Family family = Family::cpmg);

/// Uhrig timing t_j = T sin^2(j pi / (2n + 2)).
PulseSequence udd(int n, double total_time);

/// Adaptive XY-N: n_blocks blocks of five Knill-phased pulses; r_m in (0, 1]
/// sets how tightly the five pulses of a block are packed around its center.
PulseSequence axy(int n_blocks, double r_m, double total_time, double base_phase = 0.0);

PulseSequence custom(std::vector<double> times, double total_time);

/// Free evolution intervals tau_0 .. tau_n between consecutive pulses.
std::vector<double> free_intervals(const PulseSequence& seq);

/// t_k -> T - t_{n+1-k}.
PulseSequence time_reversed(const PulseSequence& seq);

inline constexpr double kMinCompression = 1e-6;

/// File-level description of a sequence; only family-relevant fields are set.
struct SequenceSpec {
  Family family = Family::cpmg;
  std::optional<int> n;
  std::optional<double> t1;
  std::optional<double> total_time;
  std::optional<double> r_m;
  std::vector<double> times;

  PulseSequence build() const;
};

}  // namespace ddspec
