#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qamc/sk_instance.hpp"

namespace qamc {

// Exact Gibbs-Boltzmann distribution mu(s) = exp(-beta E(s)) / Z over all
// basis states. Ratios between states must go through log_prob(); the
// normalized probs are for reporting and for quantities that need them
// directly (TV distance, stationarity checks).
struct TargetDistribution {
  double beta = 0.0;
  std::vector<double> log_weights;  // -beta E(s)
  double log_z = 0.0;
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double log_prob(std::size_t k) const { return log_weights[k] - log_z; }
};

// temperature may be +infinity (beta = 0). Throws std::domain_error for
// temperature <= 0 or NaN.
TargetDistribution build_target(std::span<const double> energies, double temperature);
TargetDistribution build_target(const SKInstance& inst, double temperature);

double exact_mean_energy(const TargetDistribution& target, std::span<const double> energies);

double min_probability(const TargetDistribution& target);

// All indices attaining the minimum energy (within abs_tol).
std::vector<std::uint32_t> ground_states(std::span<const double> energies, double abs_tol = 0.0);

// Number of states with mu(s) > threshold.
std::size_t count_dominant_states(const TargetDistribution& target, double threshold);

}  // namespace qamc
