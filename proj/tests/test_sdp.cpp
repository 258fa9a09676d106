#include "doctest.h"

#include <Eigen/Eigenvalues>

#include <cstdlib>
#include <random>
#include <sstream>

#include "cgrelax/sdp.hpp"

using namespace cgrelax::sdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ConicProgram two_by_two() {
  ConicProgram p;
  p.num_vars = 2;
  p.c = VectorXd::Ones(2);
  LmiBlock b(2);
  b.add(0, 0, 0, 1.0);
  b.add(1, 1, 1, 1.0);
  b.add(-1, 0, 1, 1.0);
  p.blocks.push_back(b);
  p.f.resize(0);
  return p;
}

// Blocks built around an interior point z0 with a dual-feasible objective.
ConicProgram random_feasible(std::mt19937& rng, int m, int side, int nblocks, int neq) {
  std::normal_distribution<double> N(0.0, 1.0);
  ConicProgram p;
  p.num_vars = m;
  VectorXd z0(m);
  for (int k = 0; k < m; ++k) z0(k) = N(rng);
  p.c = VectorXd::Zero(m);
  for (int b = 0; b < nblocks; ++b) {
    LmiBlock blk(side);
    MatrixXd acc = MatrixXd::Zero(side, side);
    MatrixXd Y = MatrixXd::NullaryExpr(side, side, [&]() { return N(rng); });
    Y = Y * Y.transpose() + MatrixXd::Identity(side, side);
    for (int k = 0; k < m; ++k) {
      MatrixXd Bk = MatrixXd::Zero(side, side);
      for (int i = 0; i < side; ++i)
        for (int j = i; j < side; ++j) {
          if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.3) {
            const double v = N(rng);
            blk.add(k, i, j, v);
            Bk(i, j) += v;
            if (i != j) Bk(j, i) += v;
          }
        }
      acc += z0(k) * Bk;
      p.c(k) += (Bk.cwiseProduct(Y)).sum();
    }
    MatrixXd B0 = MatrixXd::Identity(side, side) - acc;
    for (int i = 0; i < side; ++i)
      for (int j = i; j < side; ++j) blk.add(-1, i, j, B0(i, j));
    p.blocks.push_back(blk);
  }
  std::vector<Eigen::Triplet<double>> t;
  for (int r = 0; r < neq; ++r)
    for (int k = 0; k < m; ++k)
      if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.5 || k == r) t.emplace_back(r, k, N(rng));
  p.E.resize(neq, m);
  p.E.setFromTriplets(t.begin(), t.end());
  p.f = p.E * z0;
  return p;
}

}  // namespace

TEST_CASE("scalar block") {
  ConicProgram p;
  p.num_vars = 1;
  p.c = VectorXd::Ones(1);
  LmiBlock b(1);
  b.add(0, 0, 0, 1.0);
  p.blocks.push_back(b);
  p.f.resize(0);
  auto s = solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(std::abs(s.z(0)) < 1e-7);
}

TEST_CASE("two by two determinant example") {
  auto p = two_by_two();
  auto s = solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.primal_objective == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(s.z(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(s.z(1) == doctest::Approx(1.0).epsilon(1e-5));

  // brute force over z1 z2 >= 1 on a grid
  double best = 1e9;
  for (int i = 1; i <= 4000; ++i) {
    const double z1 = 0.001 * i;
    best = std::min(best, z1 + 1.0 / z1);
  }
  CHECK(s.primal_objective == doctest::Approx(best).epsilon(1e-6));

  auto rep = certify(p, s);
  CHECK(rep.certified());
  CHECK(rep.primal_residual <= 1e-7);
  CHECK(rep.dual_residual <= 1e-7);
  CHECK(rep.gap_rel <= 1e-7);
  CHECK(rep.weak_duality);

  auto bad = s;
  bad.z(0) -= 1e-3;
  auto rep2 = certify(p, bad);
  CHECK_FALSE(rep2.primal_feasible);
}

TEST_CASE("infeasible block is detected and certify refuses") {
  ConicProgram p;
  p.num_vars = 1;
  p.c = VectorXd::Ones(1);
  LmiBlock b(1);
  b.add(-1, 0, 0, -1.0);
  p.blocks.push_back(b);
  p.f.resize(0);
  auto s = solve(p);
  CHECK(s.status == Status::infeasible);
  CHECK(s.infeasibility == Infeasibility::primal);
  CHECK(certify(p, s).refused);
}

TEST_CASE("unbounded program reports dual infeasibility") {
  ConicProgram p;
  p.num_vars = 1;
  p.c = -VectorXd::Ones(1);
  LmiBlock b(1);
  b.add(0, 0, 0, 1.0);
  p.blocks.push_back(b);
  p.f.resize(0);
  auto s = solve(p);
  CHECK(s.status == Status::infeasible);
  CHECK(s.infeasibility == Infeasibility::dual);
}

TEST_CASE("rank deficient equalities are rejected") {
  auto p = two_by_two();
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {1, 0, 2.0}};
  p.E.resize(2, 2);
  p.E.setFromTriplets(t.begin(), t.end());
  p.f = VectorXd::Ones(2);
  CHECK_THROWS_AS(solve(p), EqualityRankError);
}

TEST_CASE("equality constrained 2x2") {
  auto p = two_by_two();
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}};
  p.E.resize(1, 2);
  p.E.setFromTriplets(t.begin(), t.end());
  p.f = VectorXd::Constant(1, 2.0);
  auto s = solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.primal_objective == doctest::Approx(2.5).epsilon(1e-7));
  CHECK(certify(p, s).certified());
}

TEST_CASE("random feasible instances") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const int side = 3 + trial * 4;
    const int m = 2 + trial * 3;
    auto p = random_feasible(rng, m, side, 1 + trial % 3, trial % 4);
    SolveOptions o;
    o.verbose = std::getenv("SDP_VERBOSE") != nullptr;
    auto s = solve(p, o);
    INFO("trial " << trial << " side " << side);
    REQUIRE(s.status == Status::optimal);
    CHECK(s.iterations <= 100);
    CHECK(s.gap_rel <= 1e-8);
    CHECK(s.dual_objective <= s.primal_objective + 1e-8 * std::max(1.0, std::abs(s.primal_objective)));
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      MatrixXd B = p.blocks[b].evaluate(s.z);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(B);
      CHECK(es.eigenvalues()(0) >= -1e-8 * (1.0 + B.norm()));
    }
    CHECK(certify(p, s).certified());
  }
}

TEST_CASE("determinism and scale equivariance") {
  std::mt19937 rng(11);
  auto p = random_feasible(rng, 8, 10, 2, 2);
  auto a = solve(p);
  auto b = solve(p);
  REQUIRE(a.status == Status::optimal);
  CHECK(a.iterations == b.iterations);
  CHECK((a.z - b.z).norm() == 0.0);
  CHECK(a.primal_objective == b.primal_objective);

  auto q = p;
  q.c *= 3.5;
  auto c = solve(q);
  REQUIRE(c.status == Status::optimal);
  CHECK(c.primal_objective == doctest::Approx(3.5 * a.primal_objective).epsilon(1e-7));
  CHECK((c.z - a.z).norm() <= 1e-6 * (1.0 + a.z.norm()));
}

TEST_CASE("text format round trip is exact") {
  std::mt19937 rng(3);
  auto p = random_feasible(rng, 5, 4, 2, 2);
  p.c(1) = 1.0 / 3.0;
  std::stringstream ss;
  write_text(ss, p);
  auto q = read_text(ss);
  CHECK(q.num_vars == p.num_vars);
  CHECK((q.c - p.c).norm() == 0.0);
  REQUIRE(q.blocks.size() == p.blocks.size());
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    CHECK((q.blocks[b].constant_matrix() - p.blocks[b].constant_matrix()).norm() == 0.0);
    for (int k = 0; k < p.num_vars; ++k)
      CHECK((q.blocks[b].coefficient_matrix(k) - p.blocks[b].coefficient_matrix(k)).norm() == 0.0);
  }
  CHECK((MatrixXd(q.E) - MatrixXd(p.E)).norm() == 0.0);
  CHECK((q.f - p.f).norm() == 0.0);

  std::stringstream again;
  write_text(again, q);
  std::stringstream first;
  write_text(first, p);
  CHECK(again.str() == first.str());
}

TEST_CASE("malformed text is rejected") {
  std::stringstream ss("cgrelax-sdp 1\nnvars 1\nnblocks 1\nblocksizes 2\nobjective 0\nentries 1\n0 0 1 0 1.0\n");
  CHECK_THROWS_AS(read_text(ss), cgrelax::ValidationError);
}
