#include "qamc/spectral_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "qamc/errors.hpp"

namespace qamc {

namespace {

constexpr double kNegativeDiagonalTolerance = 1e-12;
constexpr double kSymmetryTolerance = 1e-10;
constexpr double kCosineTolerance = 1e-8;

}  // namespace

TransitionMatrix build_transition_matrix(const TargetDistribution& target, const KernelSpec& kernel) {
  const std::size_t dim = target.size();
  if (dim != state_count(kernel.n())) throw std::invalid_argument("kernel and target disagree on the state space");
  const auto& lw = target.log_weights;
  const auto d = static_cast<Eigen::Index>(dim);

  TransitionMatrix tm;
  tm.kernel_kind = kernel.kind();
  tm.entries = Eigen::MatrixXd::Zero(d, d);
  auto& P = tm.entries;

  if (kernel.kind() == KernelKind::local) {
    const double log_q = -std::log(static_cast<double>(kernel.n()));
    for (std::size_t s = 0; s < dim; ++s) {
      for (unsigned i = 0; i < kernel.n(); ++i) {
        const std::size_t t = s ^ (std::size_t{1} << i);
        P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = std::exp(log_q + std::min(0.0, lw[t] - lw[s]));
      }
    }
  } else {
    // log P(s'|s) = log Q(s') + min(0, lw' - lw + log Q(s) - log Q(s'))
    //             = min(log Q(s'), lw' - lw + log Q(s)).
    std::vector<double> log_q(dim);
    for (std::size_t k = 0; k < dim; ++k) log_q[k] = kernel.log_proposal(SpinConfig{0}, SpinConfig{static_cast<std::uint32_t>(k)});
    for (std::size_t t = 0; t < dim; ++t) {
      const auto col = static_cast<Eigen::Index>(t);
      for (std::size_t s = 0; s < dim; ++s) {
        if (s == t) continue;
        P(static_cast<Eigen::Index>(s), col) = std::exp(std::min(log_q[t], lw[t] - lw[s] + log_q[s]));
      }
    }
  }

  const Eigen::VectorXd off = P.rowwise().sum();
  for (Eigen::Index s = 0; s < d; ++s) {
    double hold = 1.0 - off(s);
    if (hold < -kNegativeDiagonalTolerance) {
      throw ConsistencyError("negative holding probability " + std::to_string(hold) + " at state " +
                             std::to_string(s));
    }
    P(s, s) = std::max(hold, 0.0);
  }
  return tm;
}

double detailed_balance_residual(const TransitionMatrix& tm, const TargetDistribution& target) {
  const auto& P = tm.entries;
  double worst = 0.0;
  for (Eigen::Index s = 0; s < P.rows(); ++s) {
    for (Eigen::Index t = s + 1; t < P.cols(); ++t) {
      const double forward = target.probs[static_cast<std::size_t>(s)] * P(s, t);
      const double backward = target.probs[static_cast<std::size_t>(t)] * P(t, s);
      const double scale = std::max(forward, backward);
      if (scale > 0.0) worst = std::max(worst, std::abs(forward - backward) / scale);
    }
  }
  return worst;
}

double stationarity_error(const TransitionMatrix& tm, const TargetDistribution& target) {
  const Eigen::Map<const Eigen::VectorXd> mu(target.probs.data(), static_cast<Eigen::Index>(target.size()));
  const Eigen::VectorXd moved = tm.entries.transpose() * mu;
  return (moved - mu).lpNorm<1>();
}

double row_sum_error(const TransitionMatrix& tm) {
  return (tm.entries.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

SpectralReport spectral_gap(const TransitionMatrix& tm, const TargetDistribution& target) {
  const auto d = static_cast<Eigen::Index>(tm.dim());
  if (static_cast<std::size_t>(d) != target.size()) throw std::invalid_argument("matrix and target sizes differ");

  Eigen::VectorXd half_log_mu(d);
  for (Eigen::Index k = 0; k < d; ++k) half_log_mu(k) = 0.5 * target.log_prob(static_cast<std::size_t>(k));

  // S(s, t) = P(s, t) sqrt(mu(s) / mu(t)).
  Eigen::MatrixXd S(d, d);
  for (Eigen::Index t = 0; t < d; ++t)
    for (Eigen::Index s = 0; s < d; ++s) S(s, t) = tm.entries(s, t) * std::exp(half_log_mu(s) - half_log_mu(t));

  double asym = 0.0;
  for (Eigen::Index t = 0; t < d; ++t)
    for (Eigen::Index s = t + 1; s < d; ++s) asym = std::max(asym, std::abs(S(s, t) - S(t, s)));
  if (asym > kSymmetryTolerance) {
    throw ReversibilityError("transition matrix is not reversible w.r.t. the target (asymmetry " +
                             std::to_string(asym) + ")");
  }
  S = 0.5 * (S + S.transpose()).eval();

  const Eigen::VectorXd root_mu = half_log_mu.array().exp().matrix();
  const Eigen::VectorXd image = S * root_mu;
  SpectralReport report;
  report.stationary_cosine = image.dot(root_mu) / (image.norm() * root_mu.norm());
  const double rayleigh = image.dot(root_mu) / root_mu.squaredNorm();
  if (!(report.stationary_cosine > 1.0 - kCosineTolerance) || std::abs(rayleigh - 1.0) > kCosineTolerance) {
    throw ReversibilityError("sqrt(mu) is not the unit eigenvector of the symmetrized kernel (cosine " +
                             std::to_string(report.stationary_cosine) + ")");
  }

  // Remove the unit eigenpair identified by its eigenvector; the remaining
  // spectrum is that of S with the unit eigenvalue replaced by 0.
  S.noalias() -= root_mu * root_mu.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver did not converge");
  const Eigen::VectorXd& rest = solver.eigenvalues();  // ascending

  report.lambda_min = rest(0);
  report.lambda2 = rest(d - 1);
  report.second_eigenvalue_magnitude = std::max(std::abs(rest(0)), std::abs(rest(d - 1)));
  report.gap = std::clamp(1.0 - report.second_eigenvalue_magnitude, 0.0, 1.0);

  // Full spectrum: drop the placeholder zero, append the unit eigenvalue.
  Eigen::Index placeholder = 0;
  rest.cwiseAbs().minCoeff(&placeholder);
  report.spectrum.resize(d);
  Eigen::Index out = 0;
  for (Eigen::Index k = 0; k < d; ++k)
    if (k != placeholder) report.spectrum(out++) = rest(k);
  report.spectrum(d - 1) = 1.0;
  std::sort(report.spectrum.begin(), report.spectrum.end());
  return report;
}

double independence_gap(const TargetDistribution& target, const ProposalDistribution& proposal) {
  if (proposal.size() != target.size()) throw std::invalid_argument("proposal and target sizes differ");
  double min_log_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < target.size(); ++k)
    min_log_ratio = std::min(min_log_ratio, proposal.log_prob(k) - target.log_prob(k));
  return std::min(1.0, std::exp(min_log_ratio));
}

double uniform_gap(const TargetDistribution& target) {
  const double log_q = -std::log(static_cast<double>(target.size()));
  const double max_log_mu = *std::max_element(target.log_weights.begin(), target.log_weights.end()) - target.log_z;
  return std::min(1.0, std::exp(log_q - max_log_mu));
}

MixingBounds mixing_bounds(double gap, double epsilon, double min_mu) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("epsilon must lie in (0, 1/2)");
  if (!(gap >= 0.0 && gap <= 1.0)) throw std::invalid_argument("gap must lie in [0, 1]");
  if (!(min_mu > 0.0)) throw std::invalid_argument("min_mu must be positive");
  if (gap == 0.0) {
    const double inf = std::numeric_limits<double>::infinity();
    return MixingBounds{inf, inf, false};
  }
  const double relax = 1.0 / gap;
  MixingBounds b;
  b.lower = std::max(0.0, (1.0 - relax) * std::log(2.0 * epsilon));
  b.upper = -relax * std::log(epsilon * min_mu);
  return b;
}

TauSearchResult maximize_over_tau(const std::function<double(double)>& objective, const TauSearchOptions& options) {
  if (!(options.tau_min > 0.0) || !(options.tau_max > options.tau_min))
    throw ConfigError("tau range must satisfy 0 < tau_min < tau_max");
  if (options.points_per_decade < 1) throw ConfigError("need at least one grid point per decade");
  if (options.budget < 10) throw ConfigError("tau search budget must be at least 10 evaluations");

  const double decades = std::log10(options.tau_max / options.tau_min);
  const auto intervals = static_cast<std::size_t>(std::ceil(decades * options.points_per_decade - 1e-9));
  const std::size_t grid_points = intervals + 1;
  if (grid_points > options.budget) {
    throw ConfigError("budget of " + std::to_string(options.budget) + " evaluations cannot cover the " +
                      std::to_string(grid_points) + "-point tau grid");
  }

  const double lo_log = std::log(options.tau_min);
  const double hi_log = std::log(options.tau_max);
  std::map<double, double> evaluated;
  auto eval = [&](double log_tau) {
    const double tau = log_tau == lo_log ? options.tau_min : log_tau == hi_log ? options.tau_max : std::exp(log_tau);
    auto it = evaluated.find(tau);
    if (it != evaluated.end()) return it->second;
    const double g = objective(tau);
    evaluated.emplace(tau, g);
    return g;
  };

  std::vector<double> grid(grid_points);
  std::size_t best = 0;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points; ++i) {
    grid[i] = i == intervals ? hi_log : lo_log + (hi_log - lo_log) * static_cast<double>(i) / static_cast<double>(intervals);
    const double g = eval(grid[i]);
    if (g > best_gap) {
      best_gap = g;
      best = i;
    }
  }

  // Golden-section search for the maximum on the bracket around the best grid point.
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, grid_points - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  auto remaining = [&] { return options.budget - evaluated.size(); };
  if (remaining() >= 2 && std::exp(b - a) - 1.0 >= options.rel_tol) {
    double fc = eval(c);
    double fd = eval(d);
    while (std::exp(b - a) - 1.0 >= options.rel_tol && remaining() >= 1) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = eval(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = eval(d);
      }
    }
  }

  TauSearchResult result;
  result.gap_star = -std::numeric_limits<double>::infinity();
  for (const auto& [tau, g] : evaluated) {
    result.scan.push_back({tau, g});
    if (g > result.gap_star) {
      result.gap_star = g;
      result.tau_star = tau;
    }
  }
  return result;
}

double qa_gap(std::span<const double> energies, unsigned n, const TargetDistribution& target, double tau,
              GapMethod method) {
  ProposalDistribution q = qa_proposal(energies, n, tau);
  if (method == GapMethod::closed_form) return independence_gap(target, q);
  const KernelSpec kernel = KernelSpec::qa(std::move(q));
  return spectral_gap(build_transition_matrix(target, kernel), target).gap;
}

TauSearchResult optimize_tau(std::span<const double> energies, unsigned n, const TargetDistribution& target,
                             const TauSearchOptions& options, GapMethod method) {
  return maximize_over_tau([&](double tau) { return qa_gap(energies, n, target, tau, method); }, options);
}

TauSearchResult optimize_tau(const SKInstance& inst, const TargetDistribution& target,
                             const TauSearchOptions& options, GapMethod method) {
  const auto energies = all_energies(inst);
  return optimize_tau(energies, inst.n(), target, options, method);
}

}  // namespace qamc
