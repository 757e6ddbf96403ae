#include "ddspec/sequences.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "ddspec/error.hpp"

namespace ddspec {

namespace {

constexpr double kX = 0.0;
constexpr double kY = kPi / 2.0;
constexpr std::array<double, 8> kXy8Phases = {kX, kY, kX, kY, kY, kX, kY, kX};

}  // namespace

void PulseSequence::validate() const {
  require(std::isfinite(total_time) && total_time > 0.0, "sequence: total_time must be > 0");
  for (std::size_t k = 0; k < pulse_times.size(); ++k) {
    const double t = pulse_times[k];
    require(std::isfinite(t), "sequence: non-finite pulse time");
    require(t > 0.0 && t < total_time,
            "sequence: pulse " + std::to_string(k) + " outside (0, total_time)");
    if (k > 0) require(t > pulse_times[k - 1], "sequence: pulse times must be strictly increasing");
  }
  require(phases.empty() || phases.size() == pulse_times.size(),
          "sequence: phase list length differs from pulse count");
}

PulseSequence equidistant(int n, double t1, Family family) {
  require(n >= 1, "equidistant: n must be >= 1");
  require(std::isfinite(t1) && t1 > 0.0, "equidistant: t1 must be > 0");
  require(is_equidistant(family), "equidistant: family must be cpmg or xy8");

  PulseSequence seq;
  seq.family = family;
  seq.total_time = 2.0 * n * t1;
  seq.params.n = n;
  seq.params.t1 = t1;
  seq.params.cycles = family == Family::xy8 ? (n + 7) / 8 : n;
  seq.pulse_times.reserve(static_cast<std::size_t>(n));
  seq.phases.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    seq.pulse_times.push_back((2.0 * k - 1.0) * t1);
    seq.phases.push_back(family == Family::xy8 ? kXy8Phases[static_cast<std::size_t>((k - 1) % 8)]
                                               : kY);
  }
  return seq;
}

PulseSequence udd(int n, double total_time) {
  require(n >= 1, "udd: n must be >= 1");
  require(std::isfinite(total_time) && total_time > 0.0, "udd: total_time must be > 0");

  PulseSequence seq;
  seq.family = Family::udd;
  seq.total_time = total_time;
  seq.params.n = n;
  seq.params.cycles = 1;
  for (int j = 1; j <= n; ++j) {
    const double s = std::sin(j * kPi / (2.0 * n + 2.0));
    seq.pulse_times.push_back(total_time * s * s);
    seq.phases.push_back(kY);
  }
  seq.validate();
  return seq;
}

PulseSequence axy(int n_blocks, double r_m, double total_time, double base_phase) {
  require(n_blocks == 4 || n_blocks == 8, "axy: block count must be 4 or 8");
  require(std::isfinite(r_m) && r_m >= kMinCompression && r_m <= 1.0, "axy: r_m must lie in (0, 1]");
  require(std::isfinite(total_time) && total_time > 0.0, "axy: total_time must be > 0");

  constexpr int kPerBlock = 5;
  const std::array<double, kPerBlock> knill = {kPi / 6.0, 0.0, kPi / 2.0, 0.0, kPi / 6.0};

  PulseSequence seq;
  seq.family = Family::axy;
  seq.total_time = total_time;
  seq.params.n = n_blocks;
  seq.params.r_m = r_m;
  seq.params.cycles = 1;
  const double n = n_blocks;
  const double m = kPerBlock;
  for (int i = 1; i <= n_blocks; ++i) {
    const double block_phase = base_phase + kXy8Phases[static_cast<std::size_t>((i - 1) % 8)];
    for (int j = 1; j <= kPerBlock; ++j) {
      const double t = total_time / n * ((2.0 * i - 1.0) / 2.0 + r_m * (2.0 * j - m - 1.0) / (2.0 * m));
      seq.pulse_times.push_back(t);
      seq.phases.push_back(block_phase + knill[static_cast<std::size_t>(j - 1)]);
    }
  }
  seq.validate();
  return seq;
}

PulseSequence custom(std::vector<double> times, double total_time) {
  PulseSequence seq;
  seq.family = Family::custom;
  seq.total_time = total_time;
  seq.pulse_times = std::move(times);
  seq.params.n = static_cast<int>(seq.pulse_times.size());
  seq.validate();
  return seq;
}

std::vector<double> free_intervals(const PulseSequence& seq) {
  std::vector<double> tau;
  tau.reserve(seq.pulse_times.size() + 1);
  double prev = 0.0;
  for (double t : seq.pulse_times) {
    tau.push_back(t - prev);
    prev = t;
  }
  tau.push_back(seq.total_time - prev);
  return tau;
}

PulseSequence time_reversed(const PulseSequence& seq) {
  PulseSequence out = seq;
  out.family = Family::custom;
  std::reverse(out.pulse_times.begin(), out.pulse_times.end());
  for (double& t : out.pulse_times) t = seq.total_time - t;
  std::reverse(out.phases.begin(), out.phases.end());
  return out;
}

PulseSequence SequenceSpec::build() const {
  switch (family) {
    case Family::cpmg:
    case Family::xy8: {
      require(n.has_value(), "sequence spec: '" + std::string(to_string(family)) + "' needs n");
      if (t1) return equidistant(*n, *t1, family);
      require(total_time.has_value(), "sequence spec: equidistant family needs t1_us or total_time_us");
      require(*n >= 1, "sequence spec: n must be >= 1");
      return equidistant(*n, *total_time / (2.0 * *n), family);
    }
    case Family::udd:
      require(n && total_time, "sequence spec: udd needs n and total_time_us");
      return udd(*n, *total_time);
    case Family::axy: {
      require(n && total_time && r_m, "sequence spec: axy needs n, r_m and total_time_us");
      // n may be given either as block count (4, 8) or pulse count (20, 40).
      const int blocks = (*n == 20 || *n == 40) ? *n / 5 : *n;
      return axy(blocks, *r_m, *total_time);
    }
    case Family::custom:
      require(total_time.has_value(), "sequence spec: custom needs total_time_us");
      return custom(times, *total_time);
  }
  throw InvalidArgument("sequence spec: unknown family");
}

}  // namespace ddspec
