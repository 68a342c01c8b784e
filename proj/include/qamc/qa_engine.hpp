#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "qamc/rng.hpp"
#include "qamc/sk_instance.hpp"

namespace qamc {

struct QuantumState {
  unsigned n = 0;
  std::vector<std::complex<double>> amplitudes;

  double norm_squared() const;
};

// Annealing run under
//   H(t) = s(t) H_0 - (1 - s(t)) sum_i X_i,   s(t) = t / tau,
// starting from the ground state of the driver. hbar = 1.
struct AnnealSpec {
  double tau = 1.0;
  // Upper bound on the integrator step. Defaults to tau (no extra limit).
  double dt_max = 1.0;
  // When set, s is held at this value for the whole run (time-independent
  // Hamiltonian); used to validate the integrator against exact propagators.
  std::optional<double> frozen_s;

  static AnnealSpec linear(double tau) { return AnnealSpec{tau, tau, std::nullopt}; }
  static AnnealSpec frozen(double s, double duration) { return AnnealSpec{duration, duration, s}; }

  // Throws std::invalid_argument unless tau > 0, 0 < dt_max <= tau and
  // frozen_s (if any) is in [0, 1].
  void validate() const;
};

struct EvolutionReport {
  std::size_t steps = 0;
  double dt = 0.0;
  double hamiltonian_scale = 0.0;
  double norm_drift = 0.0;  // |<psi|psi> - 1| at the end, before renormalization
  bool renormalized = false;
};

// Uniform superposition, the ground state of -sum_i X_i.
QuantumState initial_state(unsigned n);

// Integrator step actually used for a run: min(dt_max, tau/1000, 0.1/scale)
// shrunk so that an integer number of steps covers tau exactly.
// scale = max(E_max - E_min, n).
struct StepPlan {
  std::size_t steps;
  double dt;
  double hamiltonian_scale;
};
StepPlan plan_steps(std::span<const double> energies, unsigned n, const AnnealSpec& spec);

// Second-order Strang splitting: half diagonal phase, exact transverse-field
// rotation on every qubit, half diagonal phase; s at the step midpoint.
// Adjacent diagonal half steps are fused. Throws IntegratorError on a
// non-finite amplitude.
QuantumState evolve(std::span<const double> energies, unsigned n, const AnnealSpec& spec,
                    EvolutionReport* report = nullptr);
QuantumState evolve(const SKInstance& inst, const AnnealSpec& spec, EvolutionReport* report = nullptr);

// A state-independent proposal distribution with a cumulative table for
// inverse-CDF sampling.
class ProposalDistribution {
 public:
  // probs must be non-negative and sum to 1 within 1e-9.
  explicit ProposalDistribution(std::vector<double> probs, bool floor_applied = false);

  const std::vector<double>& probs() const { return probs_; }
  double prob(std::size_t k) const { return probs_[k]; }
  double log_prob(std::size_t k) const { return log_probs_[k]; }
  bool floor_applied() const { return floor_applied_; }
  std::size_t size() const { return probs_.size(); }

  // Inverse CDF: smallest k with cdf[k] > u * total.
  SpinConfig sample(Stream& stream) const;

 private:
  std::vector<double> probs_;
  std::vector<double> log_probs_;
  std::vector<double> cdf_;
  bool floor_applied_;
};

inline constexpr double kDefaultBornFloor = 1e-300;

// |amplitude|^2 clamped below at floor, then renormalized.
ProposalDistribution born_distribution(const QuantumState& state, double floor = kDefaultBornFloor);

ProposalDistribution uniform_distribution(unsigned n);

inline SpinConfig sample(const ProposalDistribution& prop, Stream& stream) { return prop.sample(stream); }

// evolve -> born_distribution.
ProposalDistribution qa_proposal(std::span<const double> energies, unsigned n, double tau);

// CSV "index,prob".
void write_distribution_csv(const ProposalDistribution& prop, const std::filesystem::path& path);

}  // namespace qamc
