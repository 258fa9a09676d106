#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cgrelax/envelope.hpp"
#include "cgrelax/extract.hpp"

using namespace cgrelax;

namespace {

const Eigen::Matrix2d kA{{1.15, 0.65}, {0.65, 1.15}};

ProblemSpec square_spec(const Eigen::Matrix2d& A) {
  ProblemSpec spec;
  spec.box = {{0.0, 1.0}, {0.0, 1.0}};
  spec.energy = svk_energy(0.0, 4.0);
  spec.boundary = affine_boundary(A);
  return spec;
}

double spectral(const Eigen::MatrixXd& F) { return spectral_truncation_envelope(F); }

double max_coeff_diff(const Poly& a, const Poly& b) {
  const auto d = a - b;
  double w = 0.0;
  for (const auto& [m, c] : d.terms()) w = std::max(w, std::abs(c));
  return w;
}

}  // namespace

TEST_CASE("barycenter recovers polynomial deformations") {
  const auto spec = square_spec(kA);
  const auto rel = assemble_relaxation(spec, 2, 12.0);
  const auto z = occupation_moments(spec.boundary, spec.box, rel.basis, rel.scaling);
  const auto f = barycenter(z, rel, 1);
  CHECK(f.order == 2);
  CHECK(f.degree == 1);
  for (std::size_t j = 0; j < 2; ++j) CHECK(max_coeff_diff(f.components[j], spec.boundary[j]) <= 1e-9);

  // a quadratic field needs d = 2
  const auto el = spec.space();
  const auto x1 = Poly::variable(el, 0), x2 = Poly::variable(el, 1);
  std::vector<Poly> y = {0.3 * x1 * x2 + x1 - 0.2 * x2 * x2, 0.5 * x1 * x1 + x2 + Poly::constant(el, 0.1)};
  const auto zq = occupation_moments(y, spec.box, rel.basis, rel.scaling);
  const auto fq = barycenter(zq, rel, 2);
  for (std::size_t j = 0; j < 2; ++j) CHECK(max_coeff_diff(fq.components[j], y[j]) <= 1e-9);

  CHECK_THROWS_AS(barycenter(z, rel, 3), ValidationError);
}

TEST_CASE("gram matrix of a feasible moment vector is the Lebesgue one") {
  const auto spec = square_spec(kA);
  const auto s = solve_relaxation(spec, 2, initial_radius(spec));
  REQUIRE(s.solution.status == sdp::Status::optimal);
  const auto sbox = s.relax.scaling.scaled_box(spec.box);
  for (int d = 0; d <= 2; ++d) {
    const auto G = x_gram(s.solution.z, s.relax, d);
    CHECK((G - lebesgue_gram(sbox, d)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(lebesgue_gram(spec.box, 1)(0, 1) == doctest::Approx(0.5));
  CHECK(lebesgue_gram(spec.box, 1)(1, 1) == doctest::Approx(1.0 / 3.0));

  // the first relaxation is exact: the barycenter is A x
  const auto f = barycenter(s.solution.z, s.relax, 1);
  double worst = 0.0;
  for (const auto& p : wireframe(f)) worst = std::max(worst, (p.y - kA * p.x).cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-4);
  CHECK(boundary_trace_error(f, spec.boundary) <= 1e-4);
}

TEST_CASE("barycenter is linear in the cross moments") {
  const auto spec = square_spec(kA);
  const auto rel = assemble_relaxation(spec, 2, 12.0);
  const auto el = spec.space();
  const auto x1 = Poly::variable(el, 0), x2 = Poly::variable(el, 1);
  const auto za = occupation_moments(spec.boundary, spec.box, rel.basis, rel.scaling);
  const auto zb = occupation_moments({x1 * x2, x1 - x2 * x2}, spec.box, rel.basis, rel.scaling);
  const double t = 0.3;
  const auto fa = barycenter(za, rel, 2);
  const auto fb = barycenter(zb, rel, 2);
  const auto fm = barycenter((1 - t) * za + t * zb, rel, 2);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(max_coeff_diff(fm.components[j], (1 - t) * fa.components[j] + t * fb.components[j]) <= 1e-10);
  }
}

TEST_CASE("quasiconvex objective examples") {
  const auto spec = square_spec(kA);
  const auto f = make_field(spec.boundary, spec.box, 1);
  CHECK(std::abs(quasiconvex_objective(f, spectral) - 5.0176) <= 1e-12);
  CHECK(std::abs(quasiconvex_objective(f, spectral, 3) - 5.0176) <= 1e-12);
  const auto g = make_field(affine_boundary(0.7 * Eigen::Matrix2d::Identity()), spec.box, 1);
  CHECK(quasiconvex_objective(g, spectral) == doctest::Approx(0.0));

  // box volume enters: [0,2] x [0,1]
  auto h = g;
  h.box = {{0.0, 2.0}, {0.0, 1.0}};
  const auto k = make_field(affine_boundary(kA), h.box, 1);
  CHECK(quasiconvex_objective(k, spectral) == doctest::Approx(2 * 5.0176).epsilon(1e-12));
  CHECK_THROWS_AS(quasiconvex_objective(k, spectral, 0), ValidationError);
}

TEST_CASE("wireframe examples") {
  const Box box{{0.0, 1.0}, {0.0, 1.0}};
  const auto id = make_field(affine_boundary(Eigen::Matrix2d::Identity()), box, 1);
  const auto pts = wireframe(id, 7, 80);
  CHECK(pts.size() == 2 * 7 * 80);
  for (const auto& p : pts) CHECK((p.y - p.x).norm() == doctest::Approx(0.0));
  CHECK(pts.front().line_id == 0);
  CHECK(pts.back().line_id == 13);
  CHECK(pts[79].t == 1.0);

  const auto af = make_field(affine_boundary(kA), box, 1);
  const auto ap = wireframe(af, 7, 80);
  for (const std::size_t i : {std::size_t{0}, std::size_t{79}, std::size_t{600}})
    CHECK((ap[i].y - kA * ap[i].x).norm() <= 1e-14);

  std::ostringstream csv;
  write_wireframe_csv(csv, ap);
  const auto text = csv.str();
  CHECK(text.rfind("line_id,t,x1,x2,y1,y2\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 1120);

  const auto svg = wireframe_svg(ap);
  std::size_t count = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
  CHECK(count == 28);
  CHECK(svg.find("<svg") == 0);

  CHECK_THROWS_AS(wireframe(af, 1, 80), ValidationError);
}

TEST_CASE("sandwich on the quadratic boundary problem") {
  auto spec = square_spec(Eigen::Matrix2d{{0.8, 0.0}, {0.1, -1.0}});
  const auto el = spec.space();
  const auto x1 = Poly::variable(el, 0), x2 = Poly::variable(el, 1);
  spec.boundary[0] += 1.1 * x1 * x1 + 0.5 * x1 * x2 + 1.0 * x2 * x2;
  const auto s = solve_relaxation(spec, 2, initial_radius(spec));
  REQUIRE(s.solution.status == sdp::Status::optimal);
  const auto f = barycenter(s.solution.z, s.relax, 2);
  const double q = quasiconvex_objective(f, spectral);
  CHECK(q >= s.value - 1e-3);
  CHECK(boundary_trace_error(f, spec.boundary) > 0.0);

  const ObjectiveReport rep{2, s.value, q, boundary_trace_error(f, spec.boundary)};
  const auto j = objective_report_json(rep);
  CHECK(j.at("order") == 2);
  CHECK(j.at("barycentric_value").get<double>() == q);
}
