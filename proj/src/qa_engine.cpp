#include "qamc/qa_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qamc/errors.hpp"

namespace qamc {

namespace {

constexpr std::size_t kPhaseResyncInterval = 256;
constexpr std::size_t kFiniteCheckInterval = 4096;
constexpr double kNormTolerance = 1e-9;

// Amplitudes split into real and imaginary planes so the inner loops vectorize.
struct Planes {
  std::vector<double> re;
  std::vector<double> im;
};

void multiply(Planes& psi, const Planes& w) {
  const std::size_t dim = psi.re.size();
  double* __restrict ar = psi.re.data();
  double* __restrict ai = psi.im.data();
  const double* __restrict wr = w.re.data();
  const double* __restrict wi = w.im.data();
  for (std::size_t k = 0; k < dim; ++k) {
    const double r = ar[k] * wr[k] - ai[k] * wi[k];
    const double i = ar[k] * wi[k] + ai[k] * wr[k];
    ar[k] = r;
    ai[k] = i;
  }
}

// w <- exp(-i coef E).
void exact_phase(Planes& w, std::span<const double> energies, double coef) {
  for (std::size_t k = 0; k < energies.size(); ++k) {
    const double angle = coef * energies[k];
    w.re[k] = std::cos(angle);
    w.im[k] = -std::sin(angle);
  }
}

// (a, b) <- (c a + i s b, i s a + c b), i.e. exp(i theta X) on one qubit.
inline void rotate_pair(double& ar, double& ai, double& br, double& bi, double c, double s) {
  const double nar = c * ar - s * bi;
  const double nai = c * ai + s * br;
  const double nbr = c * br - s * ai;
  const double nbi = c * bi + s * ar;
  ar = nar;
  ai = nai;
  br = nbr;
  bi = nbi;
}

// prod_j exp(i theta X_j).
void rotate_all(Planes& psi, unsigned n, double c, double s) {
  const std::size_t dim = psi.re.size();
  double* __restrict re = psi.re.data();
  double* __restrict im = psi.im.data();
  unsigned j = 0;
  if (n >= 2) {
    // Qubits 0 and 1 together on blocks of four contiguous amplitudes.
    for (std::size_t b = 0; b < dim; b += 4) {
      rotate_pair(re[b], im[b], re[b + 1], im[b + 1], c, s);
      rotate_pair(re[b + 2], im[b + 2], re[b + 3], im[b + 3], c, s);
      rotate_pair(re[b], im[b], re[b + 2], im[b + 2], c, s);
      rotate_pair(re[b + 1], im[b + 1], re[b + 3], im[b + 3], c, s);
    }
    j = 2;
  }
  for (; j < n; ++j) {
    const std::size_t stride = std::size_t{1} << j;
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
      double* __restrict ar = re + base;
      double* __restrict ai = im + base;
      double* __restrict br = re + base + stride;
      double* __restrict bi = im + base + stride;
      for (std::size_t k = 0; k < stride; ++k) {
        const double nar = c * ar[k] - s * bi[k];
        const double nai = c * ai[k] + s * br[k];
        const double nbr = c * br[k] - s * ai[k];
        const double nbi = c * bi[k] + s * ar[k];
        ar[k] = nar;
        ai[k] = nai;
        br[k] = nbr;
        bi[k] = nbi;
      }
    }
  }
}

double norm_squared(const Planes& psi) {
  double sum = 0.0;
  for (std::size_t k = 0; k < psi.re.size(); ++k) sum += psi.re[k] * psi.re[k] + psi.im[k] * psi.im[k];
  return sum;
}

}  // namespace

double QuantumState::norm_squared() const {
  double sum = 0.0;
  for (const auto& a : amplitudes) sum += std::norm(a);
  return sum;
}

void AnnealSpec::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("annealing time must be positive and finite");
  if (!(dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
  if (dt_max > tau) throw std::invalid_argument("dt_max must not exceed the annealing time");
  if (frozen_s && !(*frozen_s >= 0.0 && *frozen_s <= 1.0))
    throw std::invalid_argument("frozen schedule value must lie in [0, 1]");
}

QuantumState initial_state(unsigned n) {
  QuantumState st;
  st.n = n;
  const std::size_t dim = state_count(n);
  st.amplitudes.assign(dim, std::complex<double>(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
  return st;
}

StepPlan plan_steps(std::span<const double> energies, unsigned n, const AnnealSpec& spec) {
  spec.validate();
  const auto [lo, hi] = std::minmax_element(energies.begin(), energies.end());
  const double scale = std::max(*hi - *lo, static_cast<double>(n));
  const double dt_rule = std::min({spec.dt_max, spec.tau / 1000.0, 0.1 / scale});
  const auto steps = static_cast<std::size_t>(std::ceil(spec.tau / dt_rule * (1.0 - 1e-12)));
  return StepPlan{std::max<std::size_t>(steps, 1), spec.tau / static_cast<double>(std::max<std::size_t>(steps, 1)),
                  scale};
}

QuantumState evolve(std::span<const double> energies, unsigned n, const AnnealSpec& spec, EvolutionReport* report) {
  if (energies.size() != state_count(n)) throw std::invalid_argument("energy vector does not match spin count");
  const StepPlan plan = plan_steps(energies, n, spec);
  const std::size_t K = plan.steps;
  const double dt = plan.dt;
  const std::size_t dim = energies.size();

  auto s_at = [&](std::size_t k) {
    return spec.frozen_s ? *spec.frozen_s : (static_cast<double>(k) + 0.5) / static_cast<double>(K);
  };

  Planes psi{std::vector<double>(dim, 1.0 / std::sqrt(static_cast<double>(dim))), std::vector<double>(dim, 0.0)};
  Planes w{std::vector<double>(dim), std::vector<double>(dim)};

  exact_phase(w, energies, 0.5 * dt * s_at(0));
  multiply(psi, w);

  // Between driver steps k and k+1 the two diagonal half steps fuse into
  // exp(-i dt (s_k + s_{k+1}) / 2 E). On the linear schedule this is
  // exp(-i dt (k+1)/K E) = r^(k+1) with r = exp(-i dt/K E), advanced by one
  // complex multiply per step and resynchronized periodically.
  Planes r{std::vector<double>(dim), std::vector<double>(dim)};
  if (spec.frozen_s) {
    exact_phase(w, energies, dt * *spec.frozen_s);
  } else {
    exact_phase(r, energies, dt / static_cast<double>(K));
    std::fill(w.re.begin(), w.re.end(), 1.0);
    std::fill(w.im.begin(), w.im.end(), 0.0);
  }

  for (std::size_t k = 0; k < K; ++k) {
    const double theta = dt * (1.0 - s_at(k));
    rotate_all(psi, n, std::cos(theta), std::sin(theta));

    if (k + 1 < K) {
      if (!spec.frozen_s) {
        if ((k + 1) % kPhaseResyncInterval == 0) {
          exact_phase(w, energies, dt * static_cast<double>(k + 1) / static_cast<double>(K));
        } else {
          multiply(w, r);
        }
      }
      multiply(psi, w);
    } else {
      Planes last{std::vector<double>(dim), std::vector<double>(dim)};
      exact_phase(last, energies, 0.5 * dt * s_at(k));
      multiply(psi, last);
    }

    if ((k + 1) % kFiniteCheckInterval == 0 && !std::isfinite(norm_squared(psi))) {
      throw IntegratorError("non-finite amplitude during annealing", static_cast<double>(k + 1) * dt, dt);
    }
  }

  const double norm2 = norm_squared(psi);
  if (!std::isfinite(norm2)) throw IntegratorError("non-finite amplitude during annealing", spec.tau, dt);
  const double drift = std::abs(norm2 - 1.0);
  const bool renormalize = drift > kNormTolerance;

  QuantumState out;
  out.n = n;
  out.amplitudes.resize(dim);
  const double scale = renormalize ? 1.0 / std::sqrt(norm2) : 1.0;
  for (std::size_t k = 0; k < dim; ++k) out.amplitudes[k] = {psi.re[k] * scale, psi.im[k] * scale};

  if (report) *report = EvolutionReport{K, dt, plan.hamiltonian_scale, drift, renormalize};
  return out;
}

QuantumState evolve(const SKInstance& inst, const AnnealSpec& spec, EvolutionReport* report) {
  return evolve(all_energies(inst), inst.n(), spec, report);
}

ProposalDistribution::ProposalDistribution(std::vector<double> probs, bool floor_applied)
    : probs_(std::move(probs)), floor_applied_(floor_applied) {
  if (probs_.empty()) throw std::invalid_argument("empty proposal distribution");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("proposal probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("proposal distribution sums to " + std::to_string(total) + ", not 1");
  }
  log_probs_.resize(probs_.size());
  cdf_.resize(probs_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < probs_.size(); ++k) {
    log_probs_[k] = std::log(probs_[k]);
    acc += probs_[k];
    cdf_[k] = acc;
  }
}

SpinConfig ProposalDistribution::sample(Stream& stream) const {
  const double u = stream.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return SpinConfig{static_cast<std::uint32_t>(it - cdf_.begin())};
}

ProposalDistribution born_distribution(const QuantumState& state, double floor) {
  std::vector<double> probs(state.amplitudes.size());
  bool clamped = false;
  double total = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    double p = std::norm(state.amplitudes[k]);
    if (p < floor) {
      p = floor;
      clamped = true;
    }
    probs[k] = p;
    total += p;
  }
  for (double& p : probs) p /= total;
  return ProposalDistribution(std::move(probs), clamped);
}

ProposalDistribution uniform_distribution(unsigned n) {
  const std::size_t dim = state_count(n);
  return ProposalDistribution(std::vector<double>(dim, 1.0 / static_cast<double>(dim)));
}

ProposalDistribution qa_proposal(std::span<const double> energies, unsigned n, double tau) {
  return born_distribution(evolve(energies, n, AnnealSpec::linear(tau)));
}

void write_distribution_csv(const ProposalDistribution& prop, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "index,prob\n";
  char buf[64];
  for (std::size_t k = 0; k < prop.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, prop.prob(k));
    out << buf;
  }
}

}  // namespace qamc
