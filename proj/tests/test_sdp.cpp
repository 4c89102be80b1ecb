#include <cmath>

#include "doctest.h"
#include "oracle.hpp"

#include "lipcert/errors.hpp"
#include "lipcert/estimators.hpp"
#include "lipcert/sdp.hpp"
#include "lipcert/spectral.hpp"

using namespace lipcert;
using doctest::Approx;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

/// The layer LMI written out block by block with Eigen.
Eigen::MatrixXd reference_lmi(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Wn, const Vector& lam, double c) {
  const Eigen::Index d = F.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F);
  const Eigen::MatrixXd S =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  Eigen::VectorXd l(d);
  for (Eigen::Index k = 0; k < d; ++k) l(k) = lam[k];
  const Eigen::MatrixXd L = l.asDiagonal();
  Eigen::MatrixXd A(2 * d, 2 * d);
  A << L - c * Wn.transpose() * Wn, 0.5 * L * S, 0.5 * S * L, Eigen::MatrixXd::Identity(d, d);
  return A;
}

LmiProblem scalar_problem(double w1, double w2) {
  return build_layer_lmi(Matrix{{w1}}, SymMatrix::identity(1), Matrix{{w2}});
}

}  // namespace

TEST_CASE("scalar layer LMI layout") {
  const LmiProblem prob = scalar_problem(1.0, 1.0);
  CHECK(prob.dim == 2);
  CHECK(prob.n_vars() == 2);
  const double lam = 1.7, c = 0.3;
  const SymMatrix a = prob.evaluate(layer_point(Vector{lam}, c));
  CHECK(a(0, 0) == Approx(lam - c).epsilon(1e-15));
  CHECK(a(0, 1) == Approx(lam / 2).epsilon(1e-15));
  CHECK(a(1, 1) == 1.0);
  CHECK(prob.objective == Vector{0.0, 1.0});
}

TEST_CASE("constant term of the layer LMI") {
  const LmiProblem prob = build_layer_lmi(oracle::gaussian(3, 4, 1), oracle::random_spd(4, 2), oracle::gaussian(2, 3, 3));
  const SymMatrix a = prob.evaluate(Vector(prob.n_vars(), 0.0));
  CHECK(a == prob.F0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(a(i, j) == (i == j && i >= 3 ? 1.0 : 0.0));
  CHECK_FALSE(check_pd(a).is_pd);
}

TEST_CASE("layer LMI dimensions") {
  const LmiProblem prob = build_layer_lmi(oracle::gaussian(5, 3, 1), SymMatrix::identity(3), oracle::gaussian(2, 5, 2));
  CHECK(prob.n_vars() == 6);
  CHECK(prob.dim == 10);
  CHECK_THROWS_AS(build_layer_lmi(oracle::gaussian(5, 3, 1), SymMatrix::identity(3), oracle::gaussian(2, 4, 2)),
                  ShapeError);
  CHECK_THROWS_AS(build_layer_lmi(SymMatrix::diagonal(Vector{1.0, -1.0}), Matrix::identity(2)), NotPsd);
}

TEST_CASE("layer LMI matches the block formula") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix w = oracle::gaussian(6, 4, seed), wn = oracle::gaussian(3, 6, seed + 1);
    const SymMatrix m = oracle::random_spd(4, seed + 2);
    const LmiProblem prob = build_layer_lmi(w, m, wn);
    const Vector lam = oracle::uniform_vec(6, 0.1, 2.0, seed + 3);
    const double c = 0.37;
    const Eigen::MatrixXd W = oracle::to_eigen(w);
    const Eigen::MatrixXd F = W * oracle::to_eigen(m).inverse() * W.transpose();
    const Eigen::MatrixXd ref = reference_lmi(F, oracle::to_eigen(wn), lam, c);
    const Eigen::MatrixXd got = oracle::to_eigen(prob.evaluate(layer_point(lam, c)));
    CHECK((got - ref).norm() <= 1e-7 * ref.norm());
    // coefficient(k) is the dense F_k
    Eigen::MatrixXd sum = oracle::to_eigen(prob.F0);
    for (std::size_t k = 0; k < prob.n_vars(); ++k)
      sum += (k < 6 ? lam[k] : c) * oracle::to_eigen(prob.coefficient(k));
    CHECK((sum - got).norm() <= 1e-12 * got.norm());
  }
}

TEST_CASE("factored derivatives match the dense trace formulas") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix w = oracle::gaussian(5, 4, seed), wn = oracle::gaussian(3, 5, seed + 1);
    const LmiProblem prob = build_layer_lmi(w, SymMatrix::identity(4), wn);
    const auto [lam, c] = feasible_start(w, SymMatrix::identity(4), wn);
    const SymMatrix a = prob.evaluate(layer_point(lam, c));
    const Eigen::MatrixXd B = oracle::to_eigen(a).inverse();
    const BarrierDerivatives der = barrier_derivatives(prob, oracle::from_eigen(B));
    for (std::size_t j = 0; j < prob.n_vars(); ++j) {
      const Eigen::MatrixXd Fj = oracle::to_eigen(prob.coefficient(j));
      CHECK(der.grad[j] == Approx((B * Fj).trace()).epsilon(1e-10));
      for (std::size_t k = 0; k < prob.n_vars(); ++k) {
        const Eigen::MatrixXd Fk = oracle::to_eigen(prob.coefficient(k));
        const double h = (B * Fj * B * Fk).trace();
        CHECK(std::abs(der.hess(j, k) - h) <= 1e-10 * (1 + std::abs(h)));
      }
    }
  }
  // joint problem, layer variant with block coefficients
  const Network net = random_network(hidden_dims(3, 4), 2);
  const LmiProblem joint = build_joint_lmi(net, JointVariant::layer);
  Vector x(joint.n_vars(), 0.0);
  const Certificate fast = estimate_fast(net);
  for (std::size_t i = 0; i + 1 < joint.n_vars(); ++i) x[i] = fast.lambdas[i][0];
  x.back() = 0.5 / fast.inv_F;
  const Eigen::MatrixXd B = oracle::to_eigen(joint.evaluate(x)).inverse();
  const BarrierDerivatives der = barrier_derivatives(joint, oracle::from_eigen(B));
  for (std::size_t j = 0; j < joint.n_vars(); ++j)
    for (std::size_t k = 0; k < joint.n_vars(); ++k) {
      const double h =
          (B * oracle::to_eigen(joint.coefficient(j)) * B * oracle::to_eigen(joint.coefficient(k))).trace();
      CHECK(std::abs(der.hess(j, k) - h) <= 1e-10 * (1 + std::abs(h)));
    }
}

TEST_CASE("feasible start examples") {
  const auto [lam, c] = feasible_start(Matrix{{1.0}}, SymMatrix::identity(1), Matrix{{1.0}});
  CHECK(lam == Vector{2.0});
  CHECK(c == Approx(0.9).epsilon(1e-15));
  CHECK(lam[0] - lam[0] * lam[0] / 4 - c == Approx(0.1));
  const auto [lam4, c4] = feasible_start(Matrix::identity(4), SymMatrix::identity(4), Matrix::identity(4));
  CHECK(lam4 == Vector(4, 2.0));
  CHECK(c4 == Approx(0.9).epsilon(1e-15));
}

TEST_CASE("feasible start is strictly feasible on random triples") {
  int feasible = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const std::size_t dp = 2 + seed % 6, d = 2 + (seed / 3) % 9, dn = 1 + (seed / 7) % 5;
    const Matrix w = oracle::gaussian(d, dp, seed), wn = oracle::gaussian(dn, d, seed + 500);
    const SymMatrix m = oracle::random_spd(dp, seed + 900, 0.05);
    const LmiProblem prob = build_layer_lmi(w, m, wn);
    const auto [lam, c] = feasible_start(w, m, wn);
    feasible += sym_min_eig(prob.evaluate(layer_point(lam, c))) > 0.0;
  }
  CHECK(feasible == 100);
}

TEST_CASE("maximize_c on scalar layers") {
  {
    const LmiProblem prob = scalar_problem(1.0, 1.0);
    const auto [lam, c] = feasible_start(Matrix{{1.0}}, SymMatrix::identity(1), Matrix{{1.0}});
    const SdpSolution sol = maximize_c(prob, layer_point(lam, c));
    CHECK(sol.status == SolveStatus::converged);
    CHECK(rel(sol.objective, 1.0) <= 1e-4);
    CHECK(sol.objective <= 1.0);
    CHECK(sol.x[0] == Approx(2.0).epsilon(1e-3));
    CHECK(sol.margin > 0.0);
  }
  {
    const LmiProblem prob = scalar_problem(2.0, 3.0);
    const auto [lam, c] = feasible_start(Matrix{{2.0}}, SymMatrix::identity(1), Matrix{{3.0}});
    const SdpSolution sol = maximize_c(prob, layer_point(lam, c));
    CHECK(sol.status == SolveStatus::converged);
    CHECK(rel(sol.objective, 1.0 / 36.0) <= 1e-4);
    CHECK(sol.margin > 0.0);
  }
}

TEST_CASE("maximize_c on the identity layer") {
  const Matrix id = Matrix::identity(4);
  const LmiProblem prob = build_layer_lmi(id, SymMatrix::identity(4), id);
  const auto [lam, c] = feasible_start(id, SymMatrix::identity(4), id);
  const SdpSolution sol = maximize_c(prob, layer_point(lam, c));
  CHECK(rel(sol.objective, 1.0) <= 1e-4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(sol.x[k] == Approx(2.0).epsilon(1e-2));
}

TEST_CASE("barrier path is monotone and always feasible") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix w = oracle::gaussian(6, 4, seed), wn = oracle::gaussian(3, 6, seed + 1);
    const LmiProblem prob = build_layer_lmi(w, SymMatrix::identity(4), wn);
    const auto [lam, c] = feasible_start(w, SymMatrix::identity(4), wn);
    const SdpSolution sol = maximize_c(prob, layer_point(lam, c));
    CHECK(sol.status == SolveStatus::converged);
    CHECK(sol.margin > 0.0);
    CHECK(sym_min_eig(prob.evaluate(sol.x)) > 0.0);
    CHECK(sol.objective >= c);
    for (std::size_t k = 1; k < sol.history.size(); ++k) CHECK(sol.history[k] >= sol.history[k - 1]);
    for (std::size_t k = 0; k + 1 < sol.x.size(); ++k) CHECK(sol.x[k] > 0.0);
  }
}

TEST_CASE("maximize rejects infeasible starts") {
  const LmiProblem prob = scalar_problem(1.0, 1.0);
  CHECK_THROWS_AS(maximize_c(prob, Vector{2.0, 1.5}), ArgumentError);
  CHECK_THROWS_AS(maximize_c(prob, Vector{2.0}), ShapeError);
}

TEST_CASE("bisection backend agrees with the barrier") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Matrix w = oracle::gaussian(5, 4, seed), wn = oracle::gaussian(3, 5, seed + 1);
    const LmiProblem prob = build_layer_lmi(w, SymMatrix::identity(4), wn);
    const auto [lam, c] = feasible_start(w, SymMatrix::identity(4), wn);
    const SdpSolution a = maximize_c(prob, layer_point(lam, c), 1e-9);
    const SdpSolution b = maximize_c_bisection(prob, layer_point(lam, c), 1e-7);
    CHECK(rel(b.objective, a.objective) <= 1e-4);
    CHECK(b.margin > 0.0);
  }
  const SdpSolution s = maximize_c_bisection(scalar_problem(1.0, 1.0), Vector{2.0, 0.9}, 1e-7);
  CHECK(rel(s.objective, 1.0) <= 1e-4);
}

TEST_CASE("timeouts are cooperative") {
  const LmiProblem prob = scalar_problem(1.0, 1.0);
  BarrierOptions opts;
  opts.deadline = Deadline::after(0.0);
  CHECK_THROWS_AS(maximize(prob, Vector{2.0, 0.9}, opts), Timeout);
}

TEST_CASE("joint problem layout") {
  const Network net = oracle::scalar_chain({1.0, 1.0});
  const LmiProblem prob = build_joint_lmi(net, JointVariant::neuron);
  CHECK(prob.n_vars() == 2);
  const SymMatrix a = prob.evaluate(Vector{2.0, 0.9});
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 1) == -1.0);
  CHECK(a(1, 1) == Approx(1.1));

  const Network rnd = random_network(hidden_dims(4, 5), 3);
  const LmiProblem neuron = build_joint_lmi(rnd, JointVariant::neuron);
  const LmiProblem layer = build_joint_lmi(rnd, JointVariant::layer);
  CHECK(neuron.n_vars() == 5 + 5 + 5 + 1);
  CHECK(layer.n_vars() == 3 + 1);
  CHECK(neuron.dim == rnd.monolithic_dim());
  std::vector<Vector> lambdas{oracle::uniform_vec(5, 0.5, 2, 1), oracle::uniform_vec(5, 0.5, 2, 2),
                              oracle::uniform_vec(5, 0.5, 2, 3)};
  Vector x;
  for (const auto& l : lambdas) x.insert(x.end(), l.begin(), l.end());
  x.push_back(0.3);
  CHECK(neuron.evaluate(x) == assemble_monolithic(rnd, lambdas, 0.3).P);
}

TEST_CASE("joint LipSDP examples") {
  const Network one = oracle::from_weights({oracle::gaussian(3, 4, 9)});
  const double s = oracle::sigma_max(oracle::to_eigen(one.weight(0)));
  CHECK(rel(solve_joint_lipsdp(one, JointVariant::neuron).L, s) <= 1e-4);

  const Certificate chain = solve_joint_lipsdp(oracle::scalar_chain({0.5, 2.0, 1.5}), JointVariant::neuron);
  CHECK(chain.L == Approx(1.5).epsilon(1e-3));
  CHECK(chain.algo == Algo::joint_neuron);

  for (JointVariant v : {JointVariant::neuron, JointVariant::layer}) {
    const Certificate id = solve_joint_lipsdp(oracle::identity_network(3, 4), v);
    CHECK(std::abs(id.L - 1.0) <= 1e-3);
    CHECK(id.L >= 1.0);
  }
}

TEST_CASE("joint LipSDP versus layer restriction") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Network net = random_network(hidden_dims(3, 5), seed);
    const Certificate neuron = solve_joint_lipsdp(net, JointVariant::neuron);
    const Certificate layer = solve_joint_lipsdp(net, JointVariant::layer);
    CHECK(verify_monolithic(net, neuron).ok);
    CHECK(verify_chain(net, neuron).ok);
    CHECK(neuron.L <= layer.L * (1 + 1e-6));
    CHECK(neuron.L <= estimate_fast(net).L * (1 + 1e-6));
  }
  CHECK_THROWS_AS(solve_joint_lipsdp(random_network(hidden_dims(3, 200), 1), JointVariant::neuron), SizeError);
}
