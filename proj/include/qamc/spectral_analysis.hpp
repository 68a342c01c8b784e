#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qamc/gibbs_target.hpp"
#include "qamc/proposal_kernels.hpp"
#include "qamc/qa_engine.hpp"

namespace qamc {

// Dense Metropolis-Hastings kernel, entries(s, s') = P(s' | s).
struct TransitionMatrix {
  Eigen::MatrixXd entries;
  KernelKind kernel_kind = KernelKind::local;

  std::size_t dim() const { return static_cast<std::size_t>(entries.rows()); }
};

// Off-diagonal entries are Q(s'|s) A(s'|s), evaluated as a single exp of a
// log-domain minimum; the diagonal takes the remaining mass. Throws
// ConsistencyError if a diagonal comes out below -1e-12.
TransitionMatrix build_transition_matrix(const TargetDistribution& target, const KernelSpec& kernel);

// max over pairs of |mu(s) P(s'|s) - mu(s') P(s|s')| / max(both terms).
double detailed_balance_residual(const TransitionMatrix& tm, const TargetDistribution& target);

// || mu P - mu ||_1.
double stationarity_error(const TransitionMatrix& tm, const TargetDistribution& target);

// Largest |row sum - 1|.
double row_sum_error(const TransitionMatrix& tm);

struct SpectralReport {
  double gap = 0.0;                          // 1 - second_eigenvalue_magnitude
  double second_eigenvalue_magnitude = 0.0;  // max |lambda| over the non-unit spectrum
  double lambda2 = 0.0;                      // largest non-unit eigenvalue (signed)
  double lambda_min = 0.0;                   // smallest eigenvalue
  double stationary_cosine = 0.0;            // cos(S sqrt(mu), sqrt(mu))
  Eigen::VectorXd spectrum;                  // ascending, unit eigenvalue included
};

// Absolute spectral gap via the symmetrized kernel S = D^1/2 P D^-1/2,
// D = diag(mu). The unit eigenvector sqrt(mu) is checked and projected out
// before a dense symmetric eigensolve. Throws ReversibilityError when S is
// asymmetric beyond 1e-10 or sqrt(mu) is not its unit eigenvector.
SpectralReport spectral_gap(const TransitionMatrix& tm, const TargetDistribution& target);

// Exact absolute gap of a Metropolized independence sampler:
// 1 - lambda_2 = min_s Q(s) / mu(s), all non-unit eigenvalues lying in
// [0, 1). Agrees with spectral_gap() on the dense matrix of the same kernel.
double independence_gap(const TargetDistribution& target, const ProposalDistribution& proposal);
double uniform_gap(const TargetDistribution& target);

struct MixingBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool bounded = true;  // false for a non-mixing chain (gap == 0)
};

// (1 - 1/gap) ln(2 eps) <= t_eps <= -(1/gap) ln(eps min_mu), lower bound
// floored at 0. Requires 0 < eps < 1/2, gap in [0, 1], min_mu > 0.
MixingBounds mixing_bounds(double gap, double epsilon, double min_mu);

struct TauScanPoint {
  double tau;
  double gap;
};

struct TauSearchOptions {
  double tau_min = 1e-2;
  double tau_max = 1e3;
  unsigned points_per_decade = 8;
  unsigned budget = 64;      // total objective evaluations
  double rel_tol = 0.05;     // stop refining when hi/lo - 1 < rel_tol
};

struct TauSearchResult {
  double tau_star = 0.0;
  double gap_star = 0.0;
  std::vector<TauScanPoint> scan;  // every evaluation, sorted by tau
};

// Log-spaced grid over [tau_min, tau_max], then golden-section refinement in
// log tau around the best grid point. Deterministic. Throws ConfigError if
// the budget cannot cover the grid or is below 10.
TauSearchResult maximize_over_tau(const std::function<double(double)>& objective, const TauSearchOptions& options);

enum class GapMethod {
  dense,        // build_transition_matrix + spectral_gap
  closed_form,  // independence_gap
};

double qa_gap(std::span<const double> energies, unsigned n, const TargetDistribution& target, double tau,
              GapMethod method);

// tau maximizing the QA-kernel gap.
TauSearchResult optimize_tau(std::span<const double> energies, unsigned n, const TargetDistribution& target,
                             const TauSearchOptions& options, GapMethod method = GapMethod::closed_form);
TauSearchResult optimize_tau(const SKInstance& inst, const TargetDistribution& target,
                             const TauSearchOptions& options, GapMethod method = GapMethod::closed_form);

}  // namespace qamc
