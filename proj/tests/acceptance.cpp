// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run every criterion
//   acceptance 3 7        run only criteria 3 and 7
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qamc/experiment_harness.hpp"
#include "qamc/gibbs_target.hpp"
#include "qamc/mh_chain.hpp"
#include "qamc/proposal_kernels.hpp"
#include "qamc/qa_engine.hpp"
#include "qamc/rng.hpp"
#include "qamc/sk_instance.hpp"
#include "qamc/spectral_analysis.hpp"

using namespace qamc;

namespace {

constexpr std::uint64_t kMasterSeed = 1;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

KernelSpec kernel_for(KernelKind kind, std::span<const double> energies, unsigned n, double tau) {
  switch (kind) {
    case KernelKind::local:
      return KernelSpec::local(n);
    case KernelKind::uniform:
      return KernelSpec::uniform(n);
    case KernelKind::qa:
      return KernelSpec::qa(qa_proposal(energies, n, tau));
  }
  std::abort();
}

const KernelKind kAllKernels[] = {KernelKind::local, KernelKind::uniform, KernelKind::qa};

// Every transition matrix of the detailed-balance matrix, with its target.
struct BuiltMatrix {
  std::string label;
  TargetDistribution target;
  TransitionMatrix tm;
};

const std::vector<BuiltMatrix>& balance_matrices() {
  static const std::vector<BuiltMatrix> built = [] {
    std::vector<BuiltMatrix> out;
    for (unsigned n : {2U, 4U, 6U}) {
      const auto inst = generate_instance(n, instance_seed(kMasterSeed, n, 0));
      const auto energies = all_energies(inst);
      for (double t : {0.1, 1.0, 10.0}) {
        const auto target = build_target(energies, t);
        for (KernelKind k : kAllKernels) {
          // qa at a short, an intermediate and a near-adiabatic annealing time.
          const std::vector<double> taus = k == KernelKind::qa ? std::vector<double>{0.01, 1.0, 100.0}
                                                               : std::vector<double>{0.0};
          for (double tau : taus) {
            out.push_back({fmt("n=%u T=%g %s tau=%g", n, t, std::string(to_string(k)).c_str(), tau), target,
                           build_transition_matrix(target, kernel_for(k, energies, n, tau))});
          }
        }
      }
    }
    return out;
  }();
  return built;
}

Outcome criterion_detailed_balance() {
  double worst = 0.0;
  std::string where;
  for (const auto& m : balance_matrices()) {
    const double r = detailed_balance_residual(m.tm, m.target);
    if (r > worst || where.empty()) {
      worst = std::max(worst, r);
      where = m.label;
    }
  }
  return {worst < 1e-12, fmt("max relative residual %.3e over %zu matrices (worst %s), need < 1e-12", worst,
                             balance_matrices().size(), where.c_str())};
}

Outcome criterion_stationarity() {
  double worst = 0.0;
  std::size_t count = 0;
  for (const auto& m : balance_matrices()) {
    worst = std::max(worst, stationarity_error(m.tm, m.target));
    ++count;
  }
  // The n=4 mixing-bound matrices as well.
  for (double t : {0.5, 1.0, 5.0}) {
    const auto inst = generate_instance(4, instance_seed(kMasterSeed, 4, 1));
    const auto energies = all_energies(inst);
    const auto target = build_target(energies, t);
    const double tau = optimize_tau(energies, 4, target, TauSearchOptions{}).tau_star;
    for (KernelKind k : kAllKernels) {
      worst = std::max(worst, stationarity_error(build_transition_matrix(target, kernel_for(k, energies, 4, tau)), target));
      ++count;
    }
  }
  return {worst < 1e-10, fmt("max ||mu P - mu||_1 = %.3e over %zu matrices, need < 1e-10", worst, count)};
}

// exp(-iHt) psi0 by eigendecomposition of the dense frozen Hamiltonian.
std::vector<double> exact_frozen_born(std::span<const double> energies, unsigned n, double s, double t) {
  using cd = std::complex<double>;
  const int d = 1 << n;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    h(k, k) = s * energies[k];
    for (unsigned i = 0; i < n; ++i) h(k, k ^ (1 << i)) -= 1.0 - s;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::VectorXcd psi0 = Eigen::VectorXcd::Constant(d, cd(1.0 / std::sqrt(double(d)), 0.0));
  Eigen::VectorXcd c = es.eigenvectors().transpose().cast<cd>() * psi0;
  for (int k = 0; k < d; ++k) c[k] *= std::exp(cd(0.0, -es.eigenvalues()[k] * t));
  const Eigen::VectorXcd psi = es.eigenvectors().cast<cd>() * c;
  std::vector<double> p(d);
  for (int k = 0; k < d; ++k) p[k] = std::norm(psi[k]);
  return p;
}

std::vector<double> born(const QuantumState& st) {
  std::vector<double> p(st.amplitudes.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(st.amplitudes[k]);
  return p;
}

double tv(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

Outcome criterion_integrator() {
  double worst_tv = 0.0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (unsigned n : {2U, 3U, 4U}) {
    const auto inst = generate_instance(n, instance_seed(kMasterSeed, n, 2));
    const auto energies = all_energies(inst);
    for (double s : {0.2, 0.5, 0.9}) {
      // Default step control over unit time.
      const auto exact = exact_frozen_born(energies, n, s, 1.0);
      worst_tv = std::max(worst_tv, tv(born(evolve(energies, n, AnnealSpec::frozen(s, 1.0))), exact));

      // Error reduction per dt halving with an explicit step cap.
      const double t = 20.0;
      const auto exact_t = exact_frozen_born(energies, n, s, t);
      double prev = 0.0;
      for (double dt : {0.002, 0.001, 0.0005}) {
        AnnealSpec spec = AnnealSpec::frozen(s, t);
        spec.dt_max = dt;
        const double err = tv(born(evolve(energies, n, spec)), exact_t);
        if (prev > 0.0) worst_ratio = std::min(worst_ratio, prev / err);
        prev = err;
      }
    }
  }
  const bool pass = worst_tv < 1e-6 && worst_ratio >= 3.5;
  return {pass, fmt("max TV vs exact propagator %.3e (need < 1e-6); min error ratio per dt halving %.3f (need >= 3.5)",
                    worst_tv, worst_ratio)};
}

EnsembleConfig gap_config(std::vector<unsigned> n_values, double temperature, std::vector<KernelKind> kernels,
                          const std::string& tau) {
  EnsembleConfig c;
  c.n_values = std::move(n_values);
  c.temperatures = {temperature};
  c.kernels = std::move(kernels);
  c.instances_per_point = 20;
  c.master_seed = kMasterSeed;
  c.tau = TauPolicy::parse(tau);
  return c;
}

Outcome criterion_high_temperature() {
  const auto cfg = gap_config({10}, 100.0, {KernelKind::uniform, KernelKind::qa}, "fixed:0.01");
  const auto res = run_gap_sweep(cfg);
  const double u = res.find(10, 100.0, KernelKind::uniform).gap.mean;
  const double q = res.find(10, 100.0, KernelKind::qa).gap.mean;
  const double rel = std::abs(q - u) / std::max(q, u);
  const bool pass = rel <= 0.05 && u >= 0.95 && q >= 0.95;
  return {pass, fmt("T=100 n=10: <gap> qa %.4f, uniform %.4f, relative difference %.2e (need <= 0.05, both >= 0.95)",
                    q, u, rel)};
}

Outcome criterion_low_temperature() {
  const auto cfg = gap_config({10}, 0.1, {KernelKind::local, KernelKind::uniform, KernelKind::qa}, "optimize");
  const auto res = run_gap_sweep(cfg);
  const double l = res.find(10, 0.1, KernelKind::local).gap.mean;
  const double u = res.find(10, 0.1, KernelKind::uniform).gap.mean;
  const double q = res.find(10, 0.1, KernelKind::qa).gap.mean;
  const bool pass = q >= 0.9 && l <= 0.2 && u <= 0.2;
  return {pass, fmt("T=0.1 n=10: <gap> qa %.4f (need >= 0.9), local %.3e, uniform %.3e (need <= 0.2)", q, l, u)};
}

Outcome criterion_gap_scaling() {
  const auto cfg = gap_config({4, 6, 8, 10, 12}, 1.0, {KernelKind::local, KernelKind::uniform, KernelKind::qa},
                              "optimize");
  const auto res = run_gap_sweep(cfg);
  const auto fits = fit_gap_records(res.records, 1.0);
  std::map<std::string, FitResult> by;
  for (const auto& f : fits) by[f.kernel] = f.fit;
  const double au = by["uniform"].exponent, al = by["local"].exponent, aq = by["qa"].exponent;
  const bool in_u = std::abs(au - 0.939) <= 0.15;
  const bool in_l = std::abs(al - 0.855) <= 0.15;
  const bool in_q = std::abs(aq - 0.254) <= 0.10;
  const bool order = aq < al && al < au;
  return {in_u && in_l && in_q && order,
          fmt("alpha uniform %.3f+-%.3f (0.939+-0.15 %s), local %.3f+-%.3f (0.855+-0.15 %s), qa %.3f+-%.3f "
              "(0.254+-0.10 %s), ordering qa<local<uniform %s",
              au, by["uniform"].std_error, in_u ? "ok" : "MISS", al, by["local"].std_error, in_l ? "ok" : "MISS", aq,
              by["qa"].std_error, in_q ? "ok" : "MISS", order ? "ok" : "MISS")};
}

// Hard-instance chains shared by the convergence criteria.
const ConvergenceSweepResult& hard_instance_chains() {
  static const ConvergenceSweepResult result = [] {
    EnsembleConfig c;
    c.n_values = {10};
    c.temperatures = {1.0};
    c.instances_per_point = 20;
    c.chain_steps = 100000;
    c.chain_replicas = 32;
    c.master_seed = kMasterSeed;
    c.tau = TauPolicy::parse("optimize");
    c.hard_instances = true;
    c.run_convergence = true;
    return run_convergence_sweep(c);
  }();
  return result;
}

std::map<KernelKind, std::vector<const KernelConvergence*>> runs_by_kernel() {
  std::map<KernelKind, std::vector<const KernelConvergence*>> by;
  for (const auto& r : hard_instance_chains().runs) by[r.kernel].push_back(&r);
  return by;
}

Outcome criterion_convergence_ordering() {
  const auto by = runs_by_kernel();
  std::map<KernelKind, double> mean_cross;
  std::map<KernelKind, std::size_t> censored;
  for (const auto& [k, runs] : by) {
    double sum = 0.0;
    for (const auto* r : runs) {
      // Not reached within the run counts as one step past its end.
      if (!r->crossing) ++censored[k];
      sum += static_cast<double>(r->crossing.value_or(r->mean_abs_error.size() + 1));
    }
    mean_cross[k] = sum / static_cast<double>(runs.size());
  }
  const double q = mean_cross[KernelKind::qa], l = mean_cross[KernelKind::local], u = mean_cross[KernelKind::uniform];
  const double ratio = std::max(l, u) / q;
  const bool pass = q < l && q < u && ratio >= 5.0;
  return {pass, fmt("mean first-crossing step of |E_bar-E_ex|=0.1: qa %.1f, local %.1f (%zu not reached), uniform "
                    "%.1f (%zu not reached); slower/qa = %.2f (need qa fastest and >= 5x)",
                    q, l, censored[KernelKind::local], u, censored[KernelKind::uniform], ratio)};
}

Outcome criterion_tv_ordering() {
  const auto by = runs_by_kernel();
  std::map<KernelKind, double> tv_final;
  for (const auto& [k, runs] : by) {
    double sum = 0.0;
    for (const auto* r : runs) sum += r->mean_tv.back();
    tv_final[k] = sum / static_cast<double>(runs.size());
  }
  const double q = tv_final[KernelKind::qa], l = tv_final[KernelKind::local], u = tv_final[KernelKind::uniform];
  return {q < u && q < l, fmt("mean TV at 1e5 steps: qa %.4f, uniform %.4f, local %.4f (need qa lowest)", q, u, l)};
}

Outcome criterion_sample_diagnostics() {
  const auto by = runs_by_kernel();
  const unsigned n = 10;

  // Local: every proposal flips exactly one spin.
  double local_d1 = 1.0;
  for (const auto* r : by.at(KernelKind::local))
    local_d1 = std::min(local_d1, r->hamming_cdf[1] - r->hamming_cdf[0]);

  // Uniform: pooled flip-count histogram against Binomial(10, 1/2).
  std::vector<double> counts(n + 1, 0.0);
  double total = 0.0;
  for (const auto* r : by.at(KernelKind::uniform)) {
    const double proposals = static_cast<double>(r->mean_abs_error.size()) * static_cast<double>(r->replicas.size() /
                                                                                                   r->checkpoints.size());
    double prev = 0.0;
    for (unsigned d = 0; d <= n; ++d) {
      counts[d] += std::round((r->hamming_cdf[d] - prev) * proposals);
      prev = r->hamming_cdf[d];
    }
    total += proposals;
  }
  double worst_z = 0.0;
  for (unsigned d = 0; d <= n; ++d) {
    double binom = 1.0;
    for (unsigned i = 0; i < d; ++i) binom = binom * (n - i) / (i + 1);
    const double p = binom / 1024.0;
    const double z = std::abs(counts[d] - total * p) / std::sqrt(total * p * (1.0 - p));
    worst_z = std::max(worst_z, z);
  }

  auto mean_of = [&](KernelKind k, auto field) {
    double s = 0.0;
    for (const auto* r : by.at(k)) s += field(*r);
    return s / static_cast<double>(by.at(k).size());
  };
  const double med_q = mean_of(KernelKind::qa, [](const KernelConvergence& r) { return r.median_delta_e.mean; });
  const double med_u = mean_of(KernelKind::uniform, [](const KernelConvergence& r) { return r.median_delta_e.mean; });
  const double acc_q = mean_of(KernelKind::qa, [](const KernelConvergence& r) { return r.acceptance.mean; });
  const double acc_u = mean_of(KernelKind::uniform, [](const KernelConvergence& r) { return r.acceptance.mean; });

  const bool pass = local_d1 == 1.0 && worst_z <= 5.0 && med_q < med_u && acc_q > acc_u;
  return {pass, fmt("local P(d=1) min %.6f (need 1); uniform flip counts max |z| %.2f over %.0f proposals (need <= 5); "
                    "median |dE| qa %.3f vs uniform %.3f; acceptance qa %.4f vs uniform %.4f",
                    local_d1, worst_z, total, med_q, med_u, acc_q, acc_u)};
}

// Smallest t with max_s TV(P^t(s, .), mu) <= eps, by repeated multiplication.
std::size_t measured_mixing_time(const TransitionMatrix& tm, const TargetDistribution& target, double eps,
                                 std::size_t cap) {
  const Eigen::Map<const Eigen::RowVectorXd> mu(target.probs.data(), static_cast<Eigen::Index>(target.size()));
  Eigen::MatrixXd pt = tm.entries;
  for (std::size_t t = 1; t <= cap; ++t) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < pt.rows(); ++s) worst = std::max(worst, 0.5 * (pt.row(s) - mu).cwiseAbs().sum());
    if (worst <= eps) return t;
    pt = pt * tm.entries;
  }
  return cap + 1;
}

Outcome criterion_mixing_bounds() {
  const double eps = 0.01;
  std::size_t checked = 0, violations = 0;
  std::string first_violation;
  for (std::size_t idx = 0; idx < 3; ++idx) {
    const auto inst = generate_instance(4, instance_seed(kMasterSeed, 4, idx));
    const auto energies = all_energies(inst);
    for (double t : {0.5, 1.0, 5.0}) {
      const auto target = build_target(energies, t);
      const double tau = optimize_tau(energies, 4, target, TauSearchOptions{}).tau_star;
      for (KernelKind k : kAllKernels) {
        const auto tm = build_transition_matrix(target, kernel_for(k, energies, 4, tau));
        const auto rep = spectral_gap(tm, target);
        const auto b = mixing_bounds(rep.gap, eps, min_probability(target));
        const auto cap = static_cast<std::size_t>(std::ceil(b.upper)) + 10;
        const auto measured = measured_mixing_time(tm, target, eps, cap);
        ++checked;
        if (!(b.lower <= static_cast<double>(measured) && static_cast<double>(measured) <= b.upper)) {
          ++violations;
          if (first_violation.empty())
            first_violation = fmt(" first: instance %zu T=%g %s measured %zu not in [%.2f, %.2f]", idx, t,
                                  std::string(to_string(k)).c_str(), measured, b.lower, b.upper);
        }
      }
    }
  }
  return {violations == 0,
          fmt("n=4, eps=0.01: %zu of %zu (instance, T, kernel) mixing times inside [lower, upper]%s", checked - violations,
              checked, first_violation.c_str())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "detailed balance", criterion_detailed_balance},
      {2, "stationarity", criterion_stationarity},
      {3, "integrator validity", criterion_integrator},
      {4, "high-temperature limit", criterion_high_temperature},
      {5, "low-temperature gap", criterion_low_temperature},
      {6, "gap-scaling exponents", criterion_gap_scaling},
      {7, "convergence ordering", criterion_convergence_ordering},
      {8, "TV-distance ordering", criterion_tv_ordering},
      {9, "sample diagnostics", criterion_sample_diagnostics},
      {10, "mixing-bound consistency", criterion_mixing_bounds},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
