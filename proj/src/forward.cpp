#include "ddspec/forward.hpp"

#include <cmath>
#include <random>

#include "ddspec/error.hpp"
#include "ddspec/nuclei.hpp"
#include "ddspec/parallel.hpp"

namespace ddspec {

double coherence(const PulseSequence& seq, const EnvironmentModel& env, const ChiOptions& options) {
  const double x = chi(seq, env.nsd, options);
  const double m =
      env.nuclei.empty() ? 1.0 : conditional_modulation(seq, env.nuclei, env.omega_l(), env.ms);
  return 0.5 * (1.0 + std::exp(-x) * m);
}

void add_shot_noise(CoherenceTrace& trace, double sigma, std::uint64_t seed) {
  require(std::isfinite(sigma) && sigma >= 0.0, "shot noise: sigma must be >= 0");
  if (sigma == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& r : trace.records) {
    r.p += noise(rng);
    r.sigma_p = sigma;
  }
}

CoherenceTrace decay_dataset(double t1, std::span<const int> n_list, const EnvironmentModel& env,
                             const DatasetOptions& options) {
  require(!n_list.empty(), "decay_dataset: n_list is empty");
  require(std::isfinite(t1) && t1 > 0.0, "decay_dataset: t1 must be > 0");
  require(is_equidistant(options.family), "decay_dataset: family must be cpmg or xy8");
  env.validate();

  CoherenceTrace trace;
  trace.family = options.family;
  trace.t1 = t1;
  trace.records.resize(n_list.size());
  parallel_for(n_list.size(), options.threads, [&](std::size_t i) {
    const auto seq = equidistant(n_list[i], t1, options.family);
    trace.records[i] = {n_list[i], seq.total_time, coherence(seq, env, options.chi), kNominalSigma};
  });
  if (options.shot_sigma && *options.shot_sigma > 0.0)
    add_shot_noise(trace, *options.shot_sigma, options.seed);
  return trace;
}

PulseSequence record_sequence(const CoherenceTrace& trace, const CoherenceRecord& record) {
  switch (trace.family) {
    case Family::cpmg:
    case Family::xy8:
      require(trace.t1.has_value(), "record_sequence: equidistant trace without t1");
      return equidistant(record.n, *trace.t1, trace.family);
    case Family::udd:
      return udd(record.n, record.total_time);
    case Family::axy:
      require(trace.r_m.has_value(), "record_sequence: axy trace without r_m");
      require(record.n % 5 == 0, "record_sequence: axy pulse count must be a multiple of 5");
      return axy(record.n / 5, *trace.r_m, record.total_time);
    case Family::custom:
      if (record.n == 0) return custom({}, record.total_time);
      break;
  }
  throw InvalidArgument("record_sequence: custom traces carry no pulse timing beyond free evolution");
}

std::vector<double> simulate_trace(const CoherenceTrace& trace, const EnvironmentModel& env,
                                   int threads, const ChiOptions& options) {
  std::vector<double> p(trace.records.size());
  parallel_for(p.size(), threads, [&](std::size_t i) {
    p[i] = coherence(record_sequence(trace, trace.records[i]), env, options);
  });
  return p;
}

SweepRow make_sweep_row(const SequenceSpec& spec, const EnvironmentModel& env,
                        const ChiOptions& options) {
  const auto seq = spec.build();
  return {spec, seq.total_time, coherence(seq, env, options)};
}

std::vector<SweepRow> sweep_coherence(std::span<const SequenceSpec> grid, const EnvironmentModel& env,
                                      int threads, const ChiOptions& options) {
  env.validate();
  std::vector<SweepRow> rows(grid.size());
  parallel_for(grid.size(), threads,
               [&](std::size_t i) { rows[i] = make_sweep_row(grid[i], env, options); });
  return rows;
}

}  // namespace ddspec
