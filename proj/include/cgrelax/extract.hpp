#pragma once

// Approximate minimizers from moment vectors: polynomial conditional barycenters,
// quadrature of the relaxed energy along them, wireframes and SVG output.

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgrelax/moments.hpp"

namespace cgrelax {

struct DeformationField {
  std::vector<Poly> components;  // elasticity space, x block only
  Box box;
  int order = 0;   // relaxation order the moments came from
  int degree = 0;  // ansatz degree

  std::size_t dimension() const { return components.size(); }
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd gradient(const Eigen::VectorXd& x) const;
};

/// Field from explicit polynomials (used for oracles and the identity map).
DeformationField make_field(std::vector<Poly> components, Box box, int degree = 0);

/// Least-squares fit of y against x-monomials of degree <= d under the moment functional.
/// Requires d <= r so that the Gram matrix only uses available moments.
DeformationField barycenter(const Eigen::VectorXd& z, const MomentRelaxation& relax, int d);

/// Gram matrix l(xs^a xs^b) in scaled coordinates for |a|, |b| <= d.
Eigen::MatrixXd x_gram(const Eigen::VectorXd& z, const MomentRelaxation& relax, int d);

/// Normalized Lebesgue moments (1/|box|) int x^(a+b) dx; x_gram of a feasible z matches them on the scaled box.
Eigen::MatrixXd lebesgue_gram(const Box& box, int d);

using EnvelopeOracle = std::function<double(const Eigen::MatrixXd&)>;

/// |Omega| times the midpoint-rule mean of oracle(grad field) with `cells` cells per axis.
double quasiconvex_objective(const DeformationField& field, const EnvelopeOracle& oracle, int cells = 80);

/// max |field - y_d| over points sampled on the box boundary.
double boundary_trace_error(const DeformationField& field, const std::vector<Poly>& boundary, int samples = 81);

struct WireframePoint {
  int line_id = 0;
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// `lines` lines along each axis of a 2-d box, `pts` points per line.
std::vector<WireframePoint> wireframe(const DeformationField& field, int lines = 7, int pts = 80);

void write_wireframe_csv(std::ostream& os, const std::vector<WireframePoint>& pts);

struct SvgPolyline {
  std::vector<Eigen::Vector2d> points;
  std::string stroke = "black";
  double width = 1.0;
};

/// Polylines fitted into a width x height canvas with y pointing up.
std::string svg_document(const std::vector<SvgPolyline>& lines, double width = 480, double height = 480);

/// Reference grid in grey under the deformed grid.
std::string wireframe_svg(const std::vector<WireframePoint>& pts);

struct ObjectiveReport {
  int order = 0;
  double lower_bound = 0.0;
  double barycentric_value = 0.0;
  double boundary_trace_error = 0.0;
};
nlohmann::json objective_report_json(const ObjectiveReport& r);

}  // namespace cgrelax
