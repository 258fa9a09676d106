#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "cgrelax/envelope.hpp"
#include "cgrelax/moments.hpp"

using namespace cgrelax;

namespace {

const Eigen::Matrix2d kA{{1.15, 0.65}, {0.65, 1.15}};

ProblemSpec square_spec(const Eigen::MatrixXd& A) {
  ProblemSpec spec;
  spec.n = static_cast<std::size_t>(A.rows());
  spec.box.assign(spec.n, {0.0, 1.0});
  spec.energy = svk_energy(0.0, 4.0, spec.n);
  spec.boundary = affine_boundary(A);
  return spec;
}

ProblemSpec quadratic_spec() {
  auto spec = square_spec(Eigen::Matrix2d{{0.8, 0.0}, {0.1, -1.0}});
  const auto el = spec.space();
  const auto x1 = Poly::variable(el, 0), x2 = Poly::variable(el, 1);
  spec.boundary[0] += 1.1 * x1 * x1 + 0.5 * x1 * x2 + 1.0 * x2 * x2;
  return spec;
}

double min_eig(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues()(0);
}

double row_value(const SparseRow& row, const Eigen::VectorXd& z) {
  double v = 0.0;
  for (const auto& [k, c] : row.entries) v += c * z(k);
  return v;
}

// max |y|^2 + |grad y|^2 on a grid over the box
double field_size(const std::vector<Poly>& y, const Box& box, int k = 41) {
  const auto& sp = y[0].space();
  const std::size_t n = sp.dimension();
  double best = 0.0;
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.arity()));
  std::vector<int> idx(n, 0);
  while (true) {
    for (std::size_t a = 0; a < n; ++a)
      pt(static_cast<Eigen::Index>(a)) = box[a].lo + box[a].width() * idx[a] / (k - 1.0);
    double s = 0.0;
    for (const auto& c : y) {
      s += std::pow(evaluate(c, pt), 2);
      for (std::size_t i = 0; i < n; ++i) s += std::pow(evaluate(differentiate(c, sp.x(i)), pt), 2);
    }
    best = std::max(best, s);
    std::size_t a = 0;
    for (; a < n; ++a) {
      if (++idx[a] < k) break;
      idx[a] = 0;
    }
    if (a == n) break;
  }
  return best;
}

}  // namespace

TEST_CASE("basis sizes and ordering") {
  CHECK(build_basis(VariableSpace::elasticity(2), 1).size() == 45);
  const auto b2 = build_basis(VariableSpace::elasticity(2), 2);
  CHECK(b2.size() == 495);
  CHECK(b2.prefix(2) == 45);
  CHECK(b2.prefix(1) == 9);
  for (std::size_t i = 0; i < b2.size(); ++i) CHECK(b2.at(b2.entries[i]) == static_cast<int>(i));
  for (std::size_t i = 1; i < b2.size(); ++i) CHECK(b2.entries[i - 1].degree() <= b2.entries[i].degree());

  const auto b1 = build_basis(VariableSpace::generic(1), 1);
  REQUIRE(b1.size() == 3);
  for (int d = 0; d < 3; ++d) CHECK(b1.entries[static_cast<std::size_t>(d)][0] == d);
  CHECK_THROWS_AS(build_basis(VariableSpace::generic(1), 0), ValidationError);
  CHECK_THROWS_AS(b1.at(MultiIndex(std::vector<int>{3})), StructuralError);
}

TEST_CASE("divergence examples") {
  const auto el = VariableSpace::elasticity(2);
  const auto zero = Poly(el);
  const auto x1 = Poly::variable(el, el.x(0)), x2 = Poly::variable(el, el.x(1));
  const auto y1 = Poly::variable(el, el.y(0)), y2 = Poly::variable(el, el.y(1));
  auto Z = [&](std::size_t j, std::size_t i) { return Poly::variable(el, el.Z(j, i)); };

  CHECK(divergence({x1, zero}) == Poly::constant(el, 1.0));
  CHECK(divergence({y1, y2}) == Z(0, 0) + Z(1, 1));

  // psi(x) y_j on component i
  const auto psi = x1 * x1 * x2 + 3.0 * x2;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<Poly> phi(2, zero);
      const auto yj = Poly::variable(el, el.y(j));
      phi[i] = psi * yj;
      CHECK(divergence(phi) == differentiate(psi, el.x(i)) * yj + psi * Z(j, i));
    }
  CHECK_THROWS_AS(divergence({Z(0, 0), zero}), ValidationError);
}

TEST_CASE("boundary functional examples") {
  const auto spec = square_spec(kA);
  const auto el = spec.space();
  const auto zero = Poly(el);
  const auto one = Poly::constant(el, 1.0);
  CHECK(std::abs(boundary_functional({one, zero}, spec.boundary, spec.box)) <= 1e-15);
  CHECK(std::abs(boundary_functional({zero, one}, spec.boundary, spec.box)) <= 1e-15);
  const auto x1 = Poly::variable(el, el.x(0)), x2 = Poly::variable(el, el.x(1));
  CHECK(boundary_functional({x1, x2}, spec.boundary, spec.box) == doctest::Approx(2.0).epsilon(1e-15));
  const auto y1 = Poly::variable(el, el.y(0));
  CHECK(boundary_functional({y1, zero}, spec.boundary, spec.box) == doctest::Approx(kA(0, 0)).epsilon(1e-15));
  CHECK(boundary_functional({zero, y1}, spec.boundary, spec.box) == doctest::Approx(kA(0, 1)).epsilon(1e-15));
}

TEST_CASE("stokes row count and constant-field rows") {
  const auto spec = square_spec(kA);
  const auto basis = build_basis(spec.space(), 1);
  const auto rows = stokes_rows(spec, basis, Scaling::identity(2), 1);
  CHECK(rows.size() == 10);
  // identity scaling: occupation moments of Ax satisfy every row
  const auto z = occupation_moments(spec.boundary, spec.box, basis, Scaling::identity(2));
  for (const auto& row : rows) CHECK(std::abs(row_value(row, z) - row.rhs) <= 1e-12);
  // test monomials per component: 1, x1, x2, y1, y2
  const auto el = spec.space();
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(rows[i * 5].entries.empty());
    CHECK(rows[i * 5].rhs == doctest::Approx(0.0));
    // x_i e_i fixes the mass
    const auto& mass = rows[i * 5 + 1 + i];
    REQUIRE(mass.entries.size() == 1);
    CHECK(mass.entries[0].first == 0);
    CHECK(mass.rhs == doctest::Approx(1.0));
    // y_j e_i fixes the mean gradient entry A_ji
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& g = rows[i * 5 + 3 + j];
      REQUIRE(g.entries.size() == 1);
      MultiIndex m(el.arity());
      m.set(el.Z(j, i), 1);
      CHECK(g.entries[0].first == basis.at(m));
      CHECK(g.rhs == doctest::Approx(kA(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))));
    }
  }
}

TEST_CASE("localizing structure examples") {
  const auto g1 = VariableSpace::generic(1);
  const auto basis = build_basis(g1, 1);
  const auto t = Poly::variable(g1, 0);
  const auto M = localizing_structure(Poly::constant(g1, 1.0), basis, 1);
  REQUIRE(M.size == 2);
  const Eigen::Vector3d z(0.7, 0.2, 0.9);
  const Eigen::Matrix2d expect{{0.7, 0.2}, {0.2, 0.9}};
  CHECK((M.evaluate(z) - expect).norm() == doctest::Approx(0.0));

  const auto L = localizing_structure(t * (Poly::constant(g1, 1.0) - t), basis, 1);
  REQUIRE(L.size == 1);
  CHECK(L.evaluate(z)(0, 0) == doctest::Approx(0.2 - 0.9));
  CHECK_THROWS_AS(localizing_structure(t * t * t, basis, 1), ValidationError);

  const auto spec = square_spec(kA);
  const auto rel = assemble_relaxation(spec, 2, 20.0);
  REQUIRE(rel.block_names.size() == 4);
  CHECK(rel.block_names[0] == "moment");
  CHECK(rel.blocks[0].size == 45);
  CHECK(rel.blocks[1].size == 9);
  CHECK(rel.blocks[2].size == 9);
  CHECK(rel.block_names[3] == "ball");
  CHECK(rel.blocks[3].size == 9);
  for (const auto& b : rel.blocks)
    for (const auto& [k, e] : b.coefficients) CHECK(k < static_cast<int>(rel.basis.size()));
}

TEST_CASE("minimal order") {
  const auto spec = square_spec(kA);
  CHECK(minimal_order(spec) == 2);
  CHECK_THROWS_WITH_AS(assemble_relaxation(spec, 1, 20.0), doctest::Contains("r_min = 2"), ValidationError);
  CHECK_THROWS_AS(assemble_relaxation(spec, 2, -1.0), ValidationError);
}

TEST_CASE("occupation moment examples") {
  const auto spec = square_spec(kA);
  const auto el = spec.space();
  const auto basis = build_basis(el, 1);
  const auto id = Scaling::identity(2);
  const auto z = occupation_moments(spec.boundary, spec.box, basis, id);
  MultiIndex z11(el.arity());
  z11.set(el.Z(0, 0), 1);
  CHECK(z(basis.at(z11)) == doctest::Approx(kA(0, 0)).epsilon(1e-15));
  CHECK(z(0) == doctest::Approx(1.0));

  const auto zi = occupation_moments(affine_boundary(Eigen::Matrix2d::Identity()), spec.box, basis, id);
  MultiIndex y1(el.arity());
  y1.set(el.y(0), 1);
  CHECK(zi(basis.at(y1)) == doctest::Approx(0.5).epsilon(1e-15));

  // scaled moments: y = s * ys, so l(ys_1) = 1 / (2 s)
  const auto sc = Scaling::for_box(spec.box, 4.0);
  const auto zs = occupation_moments(affine_boundary(Eigen::Matrix2d::Identity()), spec.box, basis, sc);
  CHECK(zs(basis.at(y1)) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("occupation moments of random deformations are feasible") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto base = quadratic_spec();
  const auto el = base.space();
  const auto x1 = Poly::variable(el, 0), x2 = Poly::variable(el, 1);
  const auto bubble = x1 * (Poly::constant(el, 1.0) - x1) * x2 * (Poly::constant(el, 1.0) - x2);
  const auto q_monos = monomials_up_to(2, 2);

  double worst_row = 0.0, worst_eig = 0.0;
  for (int t = 0; t < 50; ++t) {
    auto y = base.boundary;
    for (std::size_t j = 0; j < 2; ++j) {
      Poly q(el);
      for (const auto& m : q_monos) {
        MultiIndex mm(el.arity());
        mm.set(0, m[0]);
        mm.set(1, m[1]);
        q.add_term(mm, 3.0 * u(rng));
      }
      y[j] += bubble * q;
    }
    const double R = 1.25 * std::sqrt(field_size(y, base.box)) + 0.5;
    const auto rel = assemble_relaxation(base, 2, R);
    const auto z = occupation_moments(y, base.box, rel.basis, rel.scaling);
    for (const auto& row : rel.stokes) {
      worst_row = std::max(worst_row, std::abs(row_value(row, z) - row.rhs));
    }
    for (const auto& b : rel.blocks) worst_eig = std::min(worst_eig, min_eig(b.evaluate(z)));
    // upper-bound sandwich: l(W) of a feasible point dominates the relaxation value
    if (t < 3) {
      const auto s = solve_relaxation(base, 2, R);
      REQUIRE(s.solution.status == sdp::Status::optimal);
      CHECK(rel.value(z) >= s.value - 1e-6);
    }
  }
  CHECK(worst_row <= 1e-9);
  CHECK(worst_eig >= -1e-8);
}

TEST_CASE("first relaxation with linear boundary data") {
  const auto spec = square_spec(kA);
  const double R = initial_radius(spec);
  const auto s = solve_relaxation(spec, 2, R);
  REQUIRE(s.solution.status == sdp::Status::optimal);
  CHECK(std::abs(s.value - 5.0176) <= 1e-6);
  CHECK(std::abs(s.value - 5.017560) <= 1e-4);

  const auto& z = s.solution.z;
  const auto& rel = s.relax;
  const auto el = spec.space();
  const double sc = rel.scaling.s;
  CHECK(z(0) == doctest::Approx(1.0).epsilon(1e-8));
  Eigen::Matrix2d G, meanZ;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      MultiIndex m(el.arity());
      m.set(el.Z(j, i), 1);
      meanZ(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = sc * z(rel.basis.at(m));
      double g = 0.0;
      for (std::size_t k = 0; k < 2; ++k) {
        MultiIndex q(el.arity());
        q.set(el.Z(k, i), q[el.Z(k, i)] + 1);
        q.set(el.Z(k, j), q[el.Z(k, j)] + 1);
        g += sc * sc * z(rel.basis.at(q));
      }
      G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g;
    }
  CHECK((meanZ - kA).cwiseAbs().maxCoeff() <= 1e-7);
  // Schur complement of the moment matrix
  CHECK(min_eig(G - kA.transpose() * kA) >= -1e-7);

  const auto cert = sdp::certify(s.conic.program, s.solution);
  CHECK(cert.certified());
}

TEST_CASE("microstructure gap") {
  const Eigen::Matrix2d A = 0.7 * Eigen::Matrix2d::Identity();
  const auto spec = square_spec(A);
  const auto s = solve_relaxation(spec, 2, initial_radius(spec));
  REQUIRE(s.solution.status == sdp::Status::optimal);
  CHECK(std::abs(s.value) <= 1e-6);
  CHECK(spec.energy(A) == doctest::Approx(0.5202).epsilon(1e-12));
}

TEST_CASE("truncation monotonicity") {
  const auto spec = quadratic_spec();
  const double R0 = initial_radius(spec);
  double prev = 1e300;
  for (double f : {0.5, 1.0, 2.0, 4.0}) {
    const auto s = solve_relaxation(spec, 2, f * R0);
    REQUIRE(s.solution.status == sdp::Status::optimal);
    CHECK(s.value <= prev + 1e-6);
    prev = s.value;
  }
}

TEST_CASE("hierarchy monotonicity in one dimension") {
  ProblemSpec spec;
  spec.n = 1;
  spec.box = {{0.0, 1.0}};
  spec.energy = svk_energy(0.0, 4.0, 1);
  const auto el = spec.space();
  const auto x = Poly::variable(el, 0);
  spec.boundary = {1.5 * x - 0.9 * x * x};
  const double R = initial_radius(spec);
  double prev = -1e300;
  for (int r = minimal_order(spec); r <= minimal_order(spec) + 2; ++r) {
    const auto s = solve_relaxation(spec, r, R);
    REQUIRE(s.solution.status == sdp::Status::optimal);
    CHECK(s.value >= prev - 1e-6);
    prev = s.value;
  }
}

TEST_CASE("row deduplication") {
  std::vector<SparseRow> rows(4);
  rows[0] = {{{0, 1.0}, {1, 1.0}}, 2.0};
  rows[1] = {{{0, 2.0}, {1, 2.0}}, 4.0};
  rows[2] = {{{2, 1.0}}, 1.0};
  rows[3] = {{{0, 1.0}, {1, 1.0}, {2, 1.0}}, 3.0};
  auto d = deduplicate_rows(rows, 3);
  CHECK(d.rank == 2);
  CHECK(d.kept.size() == 2);
  CHECK(d.inconsistency <= 1e-14);
  rows[3].rhs = 3.5;
  d = deduplicate_rows(rows, 3);
  CHECK(d.inconsistency >= 0.1);

  // the solver sees only independent rows
  const auto rel = assemble_relaxation(square_spec(kA), 2, 20.0);
  const auto cr = to_conic_program(rel);
  CHECK(cr.program.num_equalities() == cr.dedup.rank);
  CHECK(cr.program.num_equalities() < static_cast<int>(rel.stokes.size()));
}

TEST_CASE("problem json round trip and validation") {
  auto spec = quadratic_spec();
  spec.R = 30.0;
  spec.orders = {2, 3};
  const auto back = problem_from_json(problem_to_json(spec));
  CHECK(back.n == 2);
  CHECK(back.R.value() == 30.0);
  CHECK(back.orders == spec.orders);
  for (std::size_t j = 0; j < 2; ++j) CHECK(back.boundary[j] == spec.boundary[j]);
  CHECK(back.energy.w == spec.energy.w);

  auto j = problem_to_json(spec);
  j["box"][0] = {1.0, 0.0};
  CHECK_THROWS_AS(problem_from_json(j), ValidationError);
  j = problem_to_json(spec);
  j.erase("boundary");
  CHECK_THROWS_AS(problem_from_json(j), ValidationError);

  spec.R = 0.5;
  CHECK_NOTHROW(spec.validate());
  CHECK_THROWS_AS(spec.check_radius(), ValidationError);
  CHECK(boundary_sup(spec) > 0.5);
}
