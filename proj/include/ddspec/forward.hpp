#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ddspec/filter.hpp"
#include "ddspec/model.hpp"
#include "ddspec/sequences.hpp"

namespace ddspec {

/// P = (1 + e^{-chi} prod_i M_i) / 2.
double coherence(const PulseSequence& seq, const EnvironmentModel& env,
                 const ChiOptions& options = {});

/// sigma_p recorded on noise-free traces, where the true error is zero.
inline constexpr double kNominalSigma = 1e-3;

struct DatasetOptions {
  Family family = Family::cpmg;
  std::optional<double> shot_sigma;  // additive Gaussian noise on P
  std::uint64_t seed = 0;
  int threads = 1;
  ChiOptions chi;
};

/// Equidistant trace at fixed t1, one record per n. Noise is drawn after all
/// P values are computed, in n_list order, so the result does not depend on
/// the thread count.
CoherenceTrace decay_dataset(double t1, std::span<const int> n_list, const EnvironmentModel& env,
                             const DatasetOptions& options = {});

struct SweepRow {
  SequenceSpec spec;
  double total_time = 0.0;
  double p = 0.0;
};

SweepRow make_sweep_row(const SequenceSpec& spec, const EnvironmentModel& env,
                        const ChiOptions& options = {});

/// coherence() over a grid of sequence specs, in grid order.
std::vector<SweepRow> sweep_coherence(std::span<const SequenceSpec> grid, const EnvironmentModel& env,
                                      int threads = 1, const ChiOptions& options = {});

/// Sequence behind one record: equidistant(n, t1), udd(n, T) or axy with n
/// pulses (n / 5 blocks). Custom traces are only accepted for n = 0 (free evolution).
PulseSequence record_sequence(const CoherenceTrace& trace, const CoherenceRecord& record);

/// Model P for every record of the trace, in record order.
std::vector<double> simulate_trace(const CoherenceTrace& trace, const EnvironmentModel& env,
                                   int threads = 1, const ChiOptions& options = {});

/// Adds independent N(0, sigma) noise to every record and sets sigma_p.
void add_shot_noise(CoherenceTrace& trace, double sigma, std::uint64_t seed);

}  // namespace ddspec
