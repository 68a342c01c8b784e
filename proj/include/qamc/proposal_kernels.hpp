#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include "qamc/gibbs_target.hpp"
#include "qamc/qa_engine.hpp"
#include "qamc/rng.hpp"
#include "qamc/sk_instance.hpp"

namespace qamc {

enum class KernelKind { local, uniform, qa };

std::string_view to_string(KernelKind kind);
// Throws std::invalid_argument for anything but "local", "uniform", "qa".
KernelKind parse_kernel_kind(std::string_view name);

// Proposal mechanism of a Metropolis-Hastings chain.
//   local   : flip one uniformly chosen spin, Q symmetric
//   uniform : independent uniform proposal over all 2^n states
//   qa      : independent proposal from a fixed distribution, normally the
//             Born distribution of an annealed state
class KernelSpec {
 public:
  static KernelSpec local(unsigned n);
  static KernelSpec uniform(unsigned n);
  static KernelSpec qa(ProposalDistribution proposal);

  KernelKind kind() const { return kind_; }
  unsigned n() const { return n_; }
  bool independent() const { return kind_ != KernelKind::local; }
  // Present iff kind() == qa.
  const ProposalDistribution* proposal() const { return proposal_.get(); }

  // log Q(to | from). -inf where the move is impossible.
  double log_proposal(SpinConfig from, SpinConfig to) const;

 private:
  KernelSpec(KernelKind kind, unsigned n, std::shared_ptr<const ProposalDistribution> proposal)
      : kind_(kind), n_(n), proposal_(std::move(proposal)) {}

  KernelKind kind_;
  unsigned n_;
  std::shared_ptr<const ProposalDistribution> proposal_;
};

SpinConfig propose(const KernelSpec& kernel, SpinConfig current, Stream& stream);

// log A(proposal | current), always <= 0.
//   local              : min(0, log mu' - log mu)
//   uniform / qa       : min(0, log mu' - log mu + log Q(current) - log Q(proposal))
double log_acceptance(const KernelSpec& kernel, const TargetDistribution& target, SpinConfig current,
                      SpinConfig proposal);

// Consumes exactly one uniform draw. exp(log_a) underflowing to 0 rejects.
bool accept_step(double log_a, Stream& stream);

}  // namespace qamc
