#include "qamc/mh_chain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qamc {

SpinConfig random_configuration(unsigned n, Stream& stream) {
  return SpinConfig{static_cast<std::uint32_t>(stream.below(state_count(n)))};
}

ChainTrace run_chain(const SKInstance& inst, const TargetDistribution& target, const KernelSpec& kernel,
                     std::size_t steps, SpinConfig init, Stream& stream) {
  if (steps < 1) throw std::invalid_argument("a chain needs at least one step");
  if (init.index >= state_count(inst.n())) throw std::invalid_argument("initial state outside the state space");
  if (kernel.n() != inst.n() || target.size() != state_count(inst.n()))
    throw std::invalid_argument("kernel, target and instance disagree on the spin count");

  ChainTrace trace;
  trace.seed = stream.seed();
  trace.states.reserve(steps + 1);
  trace.proposals.reserve(steps);
  trace.states.push_back(init);

  SpinConfig current = init;
  for (std::size_t t = 0; t < steps; ++t) {
    const SpinConfig proposed = propose(kernel, current, stream);
    const double log_a = log_acceptance(kernel, target, current, proposed);
    const bool accepted = accept_step(log_a, stream);
    trace.proposals.push_back(ProposalRecord{proposed, accepted, std::exp(log_a)});
    if (accepted) current = proposed;
    trace.states.push_back(current);
  }
  return trace;
}

std::vector<double> empirical_distribution(const ChainTrace& trace, std::size_t burn_in, std::size_t dim) {
  const auto samples = trace.samples();
  if (burn_in >= samples.size()) throw std::invalid_argument("burn-in must be shorter than the chain");
  std::vector<double> hist(dim, 0.0);
  for (std::size_t t = burn_in; t < samples.size(); ++t) hist.at(samples[t].index) += 1.0;
  const double count = static_cast<double>(samples.size() - burn_in);
  for (double& h : hist) h /= count;
  return hist;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("distributions differ in length");
  double sp = 0.0, sq = 0.0, l1 = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sp += p[k];
    sq += q[k];
    l1 += std::abs(p[k] - q[k]);
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::domain_error("total variation distance needs normalized distributions");
  return 0.5 * l1;
}

std::vector<double> hamming_cumulative(std::span<const ChainTrace> traces, unsigned n) {
  std::vector<double> cum(n + 1, 0.0);
  double total = 0.0;
  for (const auto& trace : traces) {
    for (std::size_t t = 0; t < trace.proposals.size(); ++t)
      cum[hamming_distance(trace.states[t], trace.proposals[t].proposed)] += 1.0;
    total += static_cast<double>(trace.proposals.size());
  }
  if (total == 0.0) throw std::invalid_argument("empty trace");
  double acc = 0.0;
  for (double& c : cum) {
    acc += c;
    c = acc / total;
  }
  return cum;
}

std::vector<double> hamming_cumulative(const ChainTrace& trace, unsigned n) {
  return hamming_cumulative(std::span<const ChainTrace>(&trace, 1), n);
}

double EmpiricalCdf::at(double x) const {
  auto it = std::upper_bound(values.begin(), values.end(), x);
  if (it == values.begin()) return 0.0;
  return cdf[static_cast<std::size_t>(it - values.begin()) - 1];
}

double EmpiricalCdf::median() const {
  auto it = std::lower_bound(cdf.begin(), cdf.end(), 0.5);
  return values[static_cast<std::size_t>(it - cdf.begin())];
}

EmpiricalCdf energy_gap_cumulative(std::span<const ChainTrace> traces, std::span<const double> energies) {
  std::vector<double> gaps;
  for (const auto& trace : traces) {
    for (std::size_t t = 0; t < trace.proposals.size(); ++t)
      gaps.push_back(std::abs(energies[trace.states[t].index] - energies[trace.proposals[t].proposed.index]));
  }
  if (gaps.empty()) throw std::invalid_argument("empty trace");
  std::sort(gaps.begin(), gaps.end());

  EmpiricalCdf out;
  const double total = static_cast<double>(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (i + 1 < gaps.size() && gaps[i + 1] == gaps[i]) continue;
    out.values.push_back(gaps[i]);
    out.cdf.push_back(static_cast<double>(i + 1) / total);
  }
  return out;
}

EmpiricalCdf energy_gap_cumulative(const ChainTrace& trace, std::span<const double> energies) {
  return energy_gap_cumulative(std::span<const ChainTrace>(&trace, 1), energies);
}

std::vector<std::size_t> log2_checkpoints(std::size_t steps) {
  std::vector<std::size_t> out;
  for (std::size_t c = 1; c <= steps; c *= 2) out.push_back(c);
  if (out.empty() || out.back() != steps) out.push_back(steps);
  return out;
}

ObservableSeries compute_observables(const ChainTrace& trace, std::span<const double> energies,
                                     const TargetDistribution& target, double exact_mean) {
  const auto samples = trace.samples();
  const std::size_t steps = samples.size();
  ObservableSeries obs;
  obs.running_mean_energy.resize(steps);
  obs.abs_error.resize(steps);
  obs.checkpoints = log2_checkpoints(steps);
  obs.tv_to_target.reserve(obs.checkpoints.size());

  std::vector<double> counts(target.size(), 0.0);
  std::vector<double> hist(target.size());
  double sum = 0.0;
  std::size_t next = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    sum += energies[samples[t].index];
    counts[samples[t].index] += 1.0;
    const double mean = sum / static_cast<double>(t + 1);
    obs.running_mean_energy[t] = mean;
    obs.abs_error[t] = std::abs(mean - exact_mean);
    if (next < obs.checkpoints.size() && obs.checkpoints[next] == t + 1) {
      const double inv = 1.0 / static_cast<double>(t + 1);
      for (std::size_t k = 0; k < counts.size(); ++k) hist[k] = counts[k] * inv;
      obs.tv_to_target.push_back(tv_distance(hist, target.probs));
      ++next;
    }
  }

  std::size_t accepted = 0;
  double prob_sum = 0.0;
  for (const auto& p : trace.proposals) {
    accepted += p.accepted;
    prob_sum += p.accept_prob;
  }
  obs.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(steps);
  obs.mean_accept_prob = prob_sum / static_cast<double>(steps);
  return obs;
}

}  // namespace qamc
