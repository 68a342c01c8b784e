#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qamc/gibbs_target.hpp"
#include "qamc/proposal_kernels.hpp"
#include "qamc/rng.hpp"
#include "qamc/sk_instance.hpp"

namespace qamc {

struct ProposalRecord {
  SpinConfig proposed;
  bool accepted = false;
  // exp(log A) of this proposal, kept for Rao-Blackwellized acceptance.
  double accept_prob = 0.0;
};

// states[0] is the initial configuration; states[t + 1] is the state after
// step t, so states.size() == proposals.size() + 1. The MCMC samples
// sigma^(1..steps) are states[1..].
struct ChainTrace {
  std::vector<SpinConfig> states;
  std::vector<ProposalRecord> proposals;
  std::uint64_t seed = 0;

  std::size_t steps() const { return proposals.size(); }
  SpinConfig initial() const { return states.front(); }
  std::span<const SpinConfig> samples() const { return std::span(states).subspan(1); }
};

SpinConfig random_configuration(unsigned n, Stream& stream);

// propose -> log_acceptance -> accept_step, `steps` times.
ChainTrace run_chain(const SKInstance& inst, const TargetDistribution& target, const KernelSpec& kernel,
                     std::size_t steps, SpinConfig init, Stream& stream);

// Normalized histogram of samples[burn_in..]; burn_in < steps.
std::vector<double> empirical_distribution(const ChainTrace& trace, std::size_t burn_in, std::size_t dim);

// Half the L1 distance. Both inputs must be normalized within 1e-9
// (std::domain_error otherwise) and of equal length.
double tv_distance(std::span<const double> p, std::span<const double> q);

// Cumulative distribution of the flip-count distance between current and
// proposed state over all proposal events; entry d is P(distance <= d),
// d = 0..n.
std::vector<double> hamming_cumulative(const ChainTrace& trace, unsigned n);
// Pooled over several traces.
std::vector<double> hamming_cumulative(std::span<const ChainTrace> traces, unsigned n);

// Exact empirical CDF of a sample: cdf[i] = P(X <= values[i]) on the sorted
// distinct support.
struct EmpiricalCdf {
  std::vector<double> values;
  std::vector<double> cdf;

  double at(double x) const;
  // Smallest support value whose CDF reaches 1/2.
  double median() const;
};

// |E(current) - E(proposed)| over all proposal events.
EmpiricalCdf energy_gap_cumulative(const ChainTrace& trace, std::span<const double> energies);
EmpiricalCdf energy_gap_cumulative(std::span<const ChainTrace> traces, std::span<const double> energies);

// Checkpoints 1, 2, 4, ..., plus the final step.
std::vector<std::size_t> log2_checkpoints(std::size_t steps);

struct ObservableSeries {
  std::vector<double> running_mean_energy;  // index t-1 holds mean of E(sigma^(1..t))
  std::vector<double> abs_error;            // |running_mean - exact|
  std::vector<std::size_t> checkpoints;
  std::vector<double> tv_to_target;  // at checkpoints, empirical over sigma^(1..checkpoint)
  double acceptance_rate = 0.0;
  double mean_accept_prob = 0.0;
};

ObservableSeries compute_observables(const ChainTrace& trace, std::span<const double> energies,
                                     const TargetDistribution& target, double exact_mean);

}  // namespace qamc
