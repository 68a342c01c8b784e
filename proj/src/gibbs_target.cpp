#include "qamc/gibbs_target.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qamc {

TargetDistribution build_target(std::span<const double> energies, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::domain_error("temperature must be positive, got " + std::to_string(temperature));
  }
  if (energies.empty()) throw std::invalid_argument("empty energy vector");

  TargetDistribution t;
  t.beta = std::isinf(temperature) ? 0.0 : 1.0 / temperature;
  t.log_weights.resize(energies.size());
  for (std::size_t k = 0; k < energies.size(); ++k) t.log_weights[k] = -t.beta * energies[k];

  // Max-shifted log-sum-exp.
  const double shift = *std::max_element(t.log_weights.begin(), t.log_weights.end());
  double sum = 0.0;
  for (double lw : t.log_weights) sum += std::exp(lw - shift);
  t.log_z = shift + std::log(sum);

  t.probs.resize(energies.size());
  for (std::size_t k = 0; k < energies.size(); ++k) t.probs[k] = std::exp(t.log_weights[k] - t.log_z);
  return t;
}

TargetDistribution build_target(const SKInstance& inst, double temperature) {
  return build_target(all_energies(inst), temperature);
}

double exact_mean_energy(const TargetDistribution& target, std::span<const double> energies) {
  if (energies.size() != target.size()) throw std::invalid_argument("energy vector length mismatch");
  double mean = 0.0;
  for (std::size_t k = 0; k < energies.size(); ++k) mean += target.probs[k] * energies[k];
  return mean;
}

double min_probability(const TargetDistribution& target) {
  // From the log domain so the value stays exact when it is far below the
  // largest probability.
  const double lw = *std::min_element(target.log_weights.begin(), target.log_weights.end());
  return std::exp(lw - target.log_z);
}

std::vector<std::uint32_t> ground_states(std::span<const double> energies, double abs_tol) {
  const double emin = *std::min_element(energies.begin(), energies.end());
  std::vector<std::uint32_t> out;
  for (std::size_t k = 0; k < energies.size(); ++k)
    if (energies[k] <= emin + abs_tol) out.push_back(static_cast<std::uint32_t>(k));
  return out;
}

std::size_t count_dominant_states(const TargetDistribution& target, double threshold) {
  return static_cast<std::size_t>(
      std::count_if(target.probs.begin(), target.probs.end(), [threshold](double p) { return p > threshold; }));
}

}  // namespace qamc
