#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

#include "qamc/errors.hpp"
#include "qamc/gibbs_target.hpp"
#include "qamc/qa_engine.hpp"
#include "qamc/sk_instance.hpp"
#include "test_util.hpp"

using namespace qamc;
using cd = std::complex<double>;

namespace {

Eigen::MatrixXd dense_hamiltonian(std::span<const double> e, unsigned n, double s) {
  const int d = 1 << n;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    h(k, k) = s * e[k];
    for (unsigned i = 0; i < n; ++i) h(k, k ^ (1 << i)) -= 1.0 - s;
  }
  return h;
}

Eigen::VectorXcd propagate(const Eigen::MatrixXd& h, const Eigen::VectorXcd& psi, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::MatrixXcd v = es.eigenvectors().cast<cd>();
  Eigen::VectorXcd c = v.adjoint() * psi;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(cd(0.0, -es.eigenvalues()[k] * t));
  return v * c;
}

Eigen::VectorXcd uniform_vector(unsigned n) {
  const int d = 1 << n;
  return Eigen::VectorXcd::Constant(d, cd(1.0 / std::sqrt(double(d)), 0.0));
}

// Piecewise-constant exact propagators at step midpoints of the linear schedule.
Eigen::VectorXcd anneal_oracle(std::span<const double> e, unsigned n, double tau, double dt) {
  const auto steps = static_cast<int>(std::llround(tau / dt));
  Eigen::VectorXcd psi = uniform_vector(n);
  for (int k = 0; k < steps; ++k) psi = propagate(dense_hamiltonian(e, n, (k + 0.5) / steps), psi, tau / steps);
  return psi;
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

}  // namespace

TEST_CASE("initial state") {
  const auto one = initial_state(1);
  REQUIRE(one.amplitudes.size() == 2);
  CHECK(one.amplitudes[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(one.amplitudes[1].real() == doctest::Approx(1.0 / std::sqrt(2.0)));

  for (const auto& a : initial_state(10).amplitudes) CHECK(std::norm(a) == doctest::Approx(1.0 / 1024));

  // <psi| -sum X |psi> = -n.
  const auto st = initial_state(4);
  double expect = 0.0;
  for (std::uint32_t k = 0; k < 16; ++k)
    for (unsigned i = 0; i < 4; ++i) expect -= std::real(std::conj(st.amplitudes[k]) * st.amplitudes[k ^ (1U << i)]);
  CHECK(expect == doctest::Approx(-4.0));
}

TEST_CASE("step plan") {
  const std::vector<double> e{-3.0, 1.0, 2.0, 0.0};  // range 5
  auto p = plan_steps(e, 2, AnnealSpec::linear(10.0));
  CHECK(p.hamiltonian_scale == 5.0);
  CHECK(p.dt == doctest::Approx(0.01));  // tau/1000 vs 0.1/5 = 0.02
  CHECK(p.steps == 1000);

  p = plan_steps(e, 2, AnnealSpec::linear(100.0));
  CHECK(p.dt == doctest::Approx(0.02));
  CHECK(p.steps == 5000);

  AnnealSpec capped = AnnealSpec::linear(100.0);
  capped.dt_max = 0.003;
  p = plan_steps(e, 2, capped);
  CHECK(p.dt <= 0.003);
  CHECK(p.dt * static_cast<double>(p.steps) == doctest::Approx(100.0));

  // n dominates a narrow spectrum.
  CHECK(plan_steps(std::vector<double>(16, 0.0), 4, AnnealSpec::linear(1000.0)).hamiltonian_scale == 4.0);
}

TEST_CASE("anneal spec validation") {
  CHECK_THROWS_AS(AnnealSpec::linear(0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(AnnealSpec::linear(-1.0).validate(), std::invalid_argument);
  AnnealSpec s = AnnealSpec::linear(1.0);
  s.dt_max = 2.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(AnnealSpec::frozen(1.5, 1.0).validate(), std::invalid_argument);
}

TEST_CASE("vanishing annealing time leaves the initial state") {
  const auto e = all_energies(generate_instance(6, 1));
  const auto st = evolve(e, 6, AnnealSpec::linear(1e-12));
  for (const auto& a : st.amplitudes) {
    CHECK(std::norm(a) == doctest::Approx(1.0 / 64).epsilon(1e-9));
  }
}

TEST_CASE("one spin matches a piecewise exact propagator") {
  // h_1 = 1: E(+1) = 1, E(-1) = -1.
  const std::vector<double> e{1.0, -1.0};
  const auto psi = anneal_oracle(e, 1, 1.0, 1e-4);
  const auto st = evolve(e, 1, AnnealSpec::linear(1.0));
  const auto q = born_distribution(st);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(q.prob(k) - std::norm(psi[k])) < 1e-6);
}

TEST_CASE("annealed Born distribution matches the piecewise oracle for small systems") {
  for (unsigned n : {2U, 3U}) {
    const auto e = all_energies(generate_instance(n, 60 + n));
    for (double tau : {0.5, 2.0}) {
      const auto psi = anneal_oracle(e, n, tau, tau / 4000);
      std::vector<double> ref(psi.size());
      for (Eigen::Index k = 0; k < psi.size(); ++k) ref[k] = std::norm(psi[k]);
      CHECK(tv(born(evolve(e, n, AnnealSpec::linear(tau))), ref) < 1e-5);
    }
  }
}

TEST_CASE("frozen Hamiltonian: exact-propagator agreement and second-order convergence") {
  for (unsigned n : {2U, 4U}) {
    const auto e = all_energies(generate_instance(n, 5 + n));
    const double s = 0.5;
    {
      const auto psi = propagate(dense_hamiltonian(e, n, s), uniform_vector(n), 1.0);
      std::vector<double> ref(psi.size());
      for (Eigen::Index k = 0; k < psi.size(); ++k) ref[k] = std::norm(psi[k]);
      CHECK(tv(born(evolve(e, n, AnnealSpec::frozen(s, 1.0))), ref) < 1e-6);
    }
    const double t = 10.0;
    const auto psi = propagate(dense_hamiltonian(e, n, s), uniform_vector(n), t);
    std::vector<double> errs;
    for (double dt : {0.004, 0.002, 0.001}) {
      AnnealSpec spec = AnnealSpec::frozen(s, t);
      spec.dt_max = dt;
      const auto st = evolve(e, n, spec);
      double l2 = 0.0;
      for (std::size_t k = 0; k < st.amplitudes.size(); ++k) l2 += std::norm(st.amplitudes[k] - psi[k]);
      errs.push_back(std::sqrt(l2));
    }
    CHECK(errs[0] / errs[1] >= 3.5);
    CHECK(errs[1] / errs[2] >= 3.5);
  }
}

TEST_CASE("norm is preserved without renormalization") {
  for (unsigned n : {4U, 8U, 10U}) {
    const auto e = all_energies(generate_instance(n, 70 + n));
    for (double tau : {0.01, 1.0, 10.0, 100.0}) {
      EvolutionReport rep;
      const auto st = evolve(e, n, AnnealSpec::linear(tau), &rep);
      CHECK(rep.norm_drift < 1e-9);
      CHECK_FALSE(rep.renormalized);
      CHECK(std::abs(st.norm_squared() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("halving dt_max changes the Born distribution by less than 1e-6") {
  for (unsigned n : {4U, 6U, 8U}) {
    const auto e = all_energies(generate_instance(n, 90 + n));
    for (double tau : {0.1, 1.0, 3.0, 10.0, 30.0, 100.0}) {
      AnnealSpec spec = AnnealSpec::linear(tau);
      spec.dt_max = std::min(tau, 1e-3);
      AnnealSpec half = spec;
      half.dt_max = spec.dt_max / 2;
      const double d = tv(born(evolve(e, n, spec)), born(evolve(e, n, half)));
      CHECK_MESSAGE(d < 1e-6, "n=" << n << " tau=" << tau << " tv=" << d);
    }
  }
}

TEST_CASE("default step control is accurate to 1e-5") {
  for (unsigned n : {4U, 8U}) {
    const auto e = all_energies(generate_instance(n, 90 + n));
    for (double tau : {0.1, 1.0, 10.0, 30.0}) {
      const auto spec = AnnealSpec::linear(tau);
      AnnealSpec half = spec;
      half.dt_max = plan_steps(e, n, spec).dt / 2;
      const double d = tv(born(evolve(e, n, spec)), born(evolve(e, n, half)));
      CHECK_MESSAGE(d < 1e-5, "n=" << n << " tau=" << tau << " tv=" << d);
    }
  }
}

TEST_CASE("long anneal reaches the ground state") {
  // First n=4 instance (in seed order) with a clear classical gap.
  std::uint64_t seed = 0;
  std::vector<double> e;
  while (true) {
    e = all_energies(generate_instance(4, seed));
    auto sorted = e;
    std::sort(sorted.begin(), sorted.end());
    if (sorted[1] - sorted[0] > 1.0) break;
    ++seed;
  }
  const auto gs = ground_states(e);
  REQUIRE(gs.size() == 1);
  const double p100 = born_distribution(evolve(e, 4, AnnealSpec::linear(100.0))).prob(gs[0]);
  const double p1000 = born_distribution(evolve(e, 4, AnnealSpec::linear(1000.0))).prob(gs[0]);
  CHECK(p1000 >= 0.99);
  CHECK(p1000 >= p100);
}

TEST_CASE("short anneal stays close to uniform") {
  const auto e = all_energies(generate_instance(10, 8));
  const auto q = qa_proposal(e, 10, 0.01);
  const auto u = uniform_distribution(10);
  CHECK(tv(q.probs(), u.probs()) < 1e-3);
}

TEST_CASE("born distribution and flooring") {
  const auto u = born_distribution(initial_state(4));
  CHECK_FALSE(u.floor_applied());
  for (double p : u.probs()) CHECK(p == doctest::Approx(1.0 / 16));

  QuantumState basis;
  basis.n = 3;
  basis.amplitudes.assign(8, 0.0);
  basis.amplitudes[0] = 1.0;
  const auto ind = born_distribution(basis);
  CHECK(ind.floor_applied());
  CHECK(ind.prob(0) == doctest::Approx(1.0));
  for (int k = 1; k < 8; ++k) {
    CHECK(ind.prob(k) > 0.0);
    CHECK(ind.prob(k) < 1e-299);
    CHECK(std::isfinite(ind.log_prob(k)));
  }
}

TEST_CASE("proposal distribution validation") {
  CHECK_THROWS_AS(ProposalDistribution({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(ProposalDistribution({1.5, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ProposalDistribution({}), std::invalid_argument);
  CHECK_NOTHROW(ProposalDistribution({0.25, 0.25, 0.5}));
}

TEST_CASE("sampling") {
  SUBCASE("indicator") {
    const ProposalDistribution d({0.0, 0.0, 1.0, 0.0});
    Stream s(3);
    for (int i = 0; i < 1000; ++i) CHECK(d.sample(s).index == 2);
  }
  SUBCASE("uniform within 5 sigma") {
    const auto d = uniform_distribution(4);
    Stream s(11);
    std::vector<double> counts(16, 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) counts[sample(d, s).index] += 1;
    const double p = 1.0 / 16, sigma = std::sqrt(draws * p * (1 - p));
    for (double c : counts) CHECK(std::abs(c - draws * p) < 5 * sigma);
  }
  SUBCASE("reproducible") {
    const auto d = born_distribution(evolve(all_energies(generate_instance(5, 2)), 5, AnnealSpec::linear(2.0)));
    Stream a(42), b(42);
    for (int i = 0; i < 500; ++i) CHECK(d.sample(a) == d.sample(b));
  }
}

TEST_CASE("non-finite energies raise an integrator error") {
  std::vector<double> e(16, 0.0);
  e[3] = std::nan("");
  CHECK_THROWS_AS(evolve(e, 4, AnnealSpec::linear(1.0)), IntegratorError);
}

TEST_CASE("distribution CSV dump") {
  testing::TempDir dir("qa");
  write_distribution_csv(ProposalDistribution({0.25, 0.75}), dir / "q.csv");
  CHECK(testing::read_file(dir / "q.csv") == "index,prob\n0,0.25\n1,0.75\n");
}
