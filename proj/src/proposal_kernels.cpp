#include "qamc/proposal_kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qamc {

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::local:
      return "local";
    case KernelKind::uniform:
      return "uniform";
    case KernelKind::qa:
      return "qa";
  }
  return "?";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "local") return KernelKind::local;
  if (name == "uniform") return KernelKind::uniform;
  if (name == "qa") return KernelKind::qa;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "' (expected local, uniform or qa)");
}

KernelSpec KernelSpec::local(unsigned n) { return KernelSpec(KernelKind::local, n, nullptr); }

KernelSpec KernelSpec::uniform(unsigned n) { return KernelSpec(KernelKind::uniform, n, nullptr); }

KernelSpec KernelSpec::qa(ProposalDistribution proposal) {
  const std::size_t dim = proposal.size();
  if (dim < 2 || (dim & (dim - 1)) != 0) throw std::invalid_argument("proposal size must be a power of two");
  const auto n = static_cast<unsigned>(std::countr_zero(dim));
  return KernelSpec(KernelKind::qa, n, std::make_shared<const ProposalDistribution>(std::move(proposal)));
}

double KernelSpec::log_proposal(SpinConfig from, SpinConfig to) const {
  switch (kind_) {
    case KernelKind::local:
      return hamming_distance(from, to) == 1 ? -std::log(static_cast<double>(n_))
                                             : -std::numeric_limits<double>::infinity();
    case KernelKind::uniform:
      return -static_cast<double>(n_) * std::log(2.0);
    case KernelKind::qa:
      return proposal_->log_prob(to.index);
  }
  return -std::numeric_limits<double>::infinity();
}

SpinConfig propose(const KernelSpec& kernel, SpinConfig current, Stream& stream) {
  switch (kernel.kind()) {
    case KernelKind::local:
      return current.flipped(static_cast<unsigned>(stream.below(kernel.n())));
    case KernelKind::uniform:
      return SpinConfig{static_cast<std::uint32_t>(stream.below(state_count(kernel.n())))};
    case KernelKind::qa:
      return kernel.proposal()->sample(stream);
  }
  return current;
}

double log_acceptance(const KernelSpec& kernel, const TargetDistribution& target, SpinConfig current,
                      SpinConfig proposal) {
  // Z cancels: log mu' - log mu = log_weight' - log_weight.
  double log_ratio = target.log_weights[proposal.index] - target.log_weights[current.index];
  if (kernel.kind() == KernelKind::qa) {
    const auto* q = kernel.proposal();
    log_ratio += q->log_prob(current.index) - q->log_prob(proposal.index);
  }
  // Uniform Q is constant, so its ratio is exactly 1; local Q is symmetric.
  if (std::isnan(log_ratio)) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, log_ratio);
}

bool accept_step(double log_a, Stream& stream) {
  const double u = stream.uniform();
  if (log_a >= 0.0) return true;
  return u < std::exp(log_a);
}

}  // namespace qamc
