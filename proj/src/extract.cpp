#include "cgrelax/extract.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace cgrelax {

Eigen::VectorXd DeformationField::operator()(const Eigen::VectorXd& x) const {
  const auto n = static_cast<Eigen::Index>(dimension());
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(components[0].space().arity()));
  pt.head(n) = x;
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j) out(j) = evaluate(components[static_cast<std::size_t>(j)], pt);
  return out;
}

Eigen::MatrixXd DeformationField::gradient(const Eigen::VectorXd& x) const {
  const auto n = static_cast<Eigen::Index>(dimension());
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(components[0].space().arity()));
  pt.head(n) = x;
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      G(j, i) = evaluate(differentiate(components[static_cast<std::size_t>(j)], static_cast<std::size_t>(i)), pt);
  return G;
}

DeformationField make_field(std::vector<Poly> components, Box box, int degree) {
  if (components.empty() || components.size() != box.size()) {
    throw StructuralError("field needs one component per box axis");
  }
  const auto n = components.size();
  for (const auto& c : components)
    if (!c.depends_only_on(0, n)) throw ValidationError("field components may depend on x only");
  DeformationField f;
  f.components = std::move(components);
  f.box = std::move(box);
  f.degree = degree;
  return f;
}

namespace {

std::vector<MultiIndex> x_monomials(const VariableSpace& sp, int d) {
  std::vector<MultiIndex> out;
  for (const auto& m : monomials_up_to(sp.dimension(), d)) {
    MultiIndex full(sp.arity());
    for (std::size_t i = 0; i < sp.dimension(); ++i) full.set(i, m[i]);
    out.push_back(full);
  }
  return out;
}

void check_degree(const MomentRelaxation& relax, int d) {
  if (d < 0) throw ValidationError("extraction degree must be non-negative");
  if (d > relax.r) {
    throw ValidationError("extraction degree " + std::to_string(d) + " exceeds the relaxation order " +
                          std::to_string(relax.r));
  }
}

}  // namespace

Eigen::MatrixXd x_gram(const Eigen::VectorXd& z, const MomentRelaxation& relax, int d) {
  check_degree(relax, d);
  const auto phi = x_monomials(relax.basis.space, d);
  const auto N = static_cast<Eigen::Index>(phi.size());
  Eigen::MatrixXd G(N, N);
  for (Eigen::Index a = 0; a < N; ++a)
    for (Eigen::Index b = a; b < N; ++b) {
      G(a, b) = G(b, a) = z(relax.basis.at(phi[static_cast<std::size_t>(a)] + phi[static_cast<std::size_t>(b)]));
    }
  return G;
}

Eigen::MatrixXd lebesgue_gram(const Box& box, int d) {
  const auto sp = VariableSpace::generic(box.size());
  const auto phi = monomials_up_to(box.size(), d);
  const auto N = static_cast<Eigen::Index>(phi.size());
  const double vol = box_volume(box);
  Eigen::MatrixXd G(N, N);
  for (Eigen::Index a = 0; a < N; ++a)
    for (Eigen::Index b = a; b < N; ++b) {
      const auto m = Poly::monomial(sp, phi[static_cast<std::size_t>(a)] + phi[static_cast<std::size_t>(b)]);
      G(a, b) = G(b, a) = integrate_box_value(m, box) / vol;
    }
  return G;
}

DeformationField barycenter(const Eigen::VectorXd& z, const MomentRelaxation& relax, int d) {
  const auto& sp = relax.basis.space;
  const std::size_t n = sp.dimension();
  const auto phi = x_monomials(sp, d);
  const auto N = static_cast<Eigen::Index>(phi.size());
  Eigen::MatrixXd G = x_gram(z, relax, d);
  const double reg = 1e-12 * std::max(1.0, G.diagonal().cwiseAbs().maxCoeff());
  G.diagonal().array() += reg;

  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    throw SolverError("x-moment Gram matrix is not positive definite; moments are too inaccurate for extraction");
  }
  const double rcond = llt.rcond();
  if (!(rcond > 1e-14)) {
    throw SolverError("x-moment Gram matrix is ill-conditioned (rcond " + std::to_string(rcond) + ")");
  }

  std::vector<Poly> comps;
  for (std::size_t j = 0; j < n; ++j) {
    Eigen::VectorXd rhs(N);
    for (Eigen::Index a = 0; a < N; ++a) {
      MultiIndex m = phi[static_cast<std::size_t>(a)];
      m.set(sp.y(j), 1);
      rhs(a) = z(relax.basis.at(m));
    }
    const Eigen::VectorXd c = llt.solve(rhs);
    Poly ps(sp);
    for (Eigen::Index a = 0; a < N; ++a) ps.add_term(phi[static_cast<std::size_t>(a)], c(a));
    // ys(xs) back to y(x) = s ys((x - c) / h)
    comps.push_back(relax.scaling.s * relax.scaling.from_scaled(ps));
  }
  Box box;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    box.push_back({relax.scaling.center(k) - relax.scaling.half(k), relax.scaling.center(k) + relax.scaling.half(k)});
  }
  auto f = make_field(std::move(comps), std::move(box), d);
  f.order = relax.r;
  return f;
}

double quasiconvex_objective(const DeformationField& field, const EnvelopeOracle& oracle, int cells) {
  if (cells < 1) throw ValidationError("quadrature needs at least one cell per axis");
  const std::size_t n = field.dimension();
  const auto N = static_cast<Eigen::Index>(n);
  std::vector<std::vector<Poly>> dy(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) dy[j].push_back(differentiate(field.components[j], i));

  Eigen::VectorXd pt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(field.components[0].space().arity()));
  Eigen::MatrixXd F(N, N);
  std::vector<int> idx(n, 0);
  double sum = 0.0;
  long count = 0;
  while (true) {
    for (std::size_t a = 0; a < n; ++a) {
      const auto& iv = field.box[a];
      pt(static_cast<Eigen::Index>(a)) = iv.lo + iv.width() * (idx[a] + 0.5) / cells;
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        F(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = evaluate(dy[j][i], pt);
    sum += oracle(F);
    ++count;
    std::size_t a = 0;
    for (; a < n; ++a) {
      if (++idx[a] < cells) break;
      idx[a] = 0;
    }
    if (a == n) break;
  }
  return box_volume(field.box) * sum / static_cast<double>(count);
}

double boundary_trace_error(const DeformationField& field, const std::vector<Poly>& boundary, int samples) {
  const std::size_t n = field.dimension();
  if (boundary.size() != n) throw StructuralError("boundary data and field dimensions differ");
  const int k = std::max(2, samples);
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(field.components[0].space().arity()));
  double worst = 0.0;
  for (const auto& [facet, sign] : box_facets(field.box)) {
    (void)sign;
    std::vector<int> idx(n, 0);
    while (true) {
      for (std::size_t a = 0; a < n; ++a) {
        const auto& iv = field.box[a];
        pt(static_cast<Eigen::Index>(a)) = a == facet.axis ? facet.value : iv.lo + iv.width() * idx[a] / (k - 1.0);
      }
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += std::pow(evaluate(field.components[j], pt) - evaluate(boundary[j], pt), 2);
      worst = std::max(worst, std::sqrt(s));
      std::size_t a = 0;
      for (; a < n; ++a) {
        if (a == facet.axis) continue;
        if (++idx[a] < k) break;
        idx[a] = 0;
      }
      if (a == n) break;
    }
  }
  return worst;
}

std::vector<WireframePoint> wireframe(const DeformationField& field, int lines, int pts) {
  if (field.dimension() != 2) throw ValidationError("wireframes are drawn for two-dimensional fields");
  if (lines < 2 || pts < 2) throw ValidationError("wireframe needs at least 2 lines and 2 points per line");
  std::vector<WireframePoint> out;
  out.reserve(static_cast<std::size_t>(2 * lines * pts));
  const auto& b = field.box;
  for (int dir = 0; dir < 2; ++dir) {
    // dir 0: lines of constant x2, dir 1: lines of constant x1
    const std::size_t along = dir == 0 ? 0 : 1, across = 1 - along;
    for (int l = 0; l < lines; ++l) {
      const double c = b[across].lo + b[across].width() * l / (lines - 1.0);
      for (int i = 0; i < pts; ++i) {
        WireframePoint p;
        p.line_id = dir * lines + l;
        p.t = i / (pts - 1.0);
        p.x = Eigen::Vector2d::Zero();
        p.x(static_cast<Eigen::Index>(along)) = b[along].lo + b[along].width() * p.t;
        p.x(static_cast<Eigen::Index>(across)) = c;
        p.y = field(p.x);
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

void write_wireframe_csv(std::ostream& os, const std::vector<WireframePoint>& pts) {
  os << "line_id,t,x1,x2,y1,y2\n";
  char buf[160];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.line_id, p.t, p.x(0), p.x(1), p.y(0), p.y(1));
    os << buf;
  }
}

std::string svg_document(const std::vector<SvgPolyline>& lines, double width, double height) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const auto& l : lines)
    for (const auto& p : l.points) {
      x0 = std::min(x0, p.x());
      x1 = std::max(x1, p.x());
      y0 = std::min(y0, p.y());
      y1 = std::max(y1, p.y());
    }
  if (!std::isfinite(x0)) x0 = y0 = 0.0, x1 = y1 = 1.0;
  const double margin = 12.0;
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  const double scale = std::min(width, height) - 2 * margin;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
     << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[64];
  for (const auto& l : lines) {
    os << "<polyline fill=\"none\" stroke=\"" << l.stroke << "\" stroke-width=\"" << l.width << "\" points=\"";
    for (std::size_t i = 0; i < l.points.size(); ++i) {
      const double px = margin + (l.points[i].x() - x0) / span * scale;
      const double py = height - margin - (l.points[i].y() - y0) / span * scale;
      std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", i ? " " : "", px, py);
      os << buf;
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string wireframe_svg(const std::vector<WireframePoint>& pts) {
  std::vector<SvgPolyline> ref, def;
  int current = -1;
  for (const auto& p : pts) {
    if (p.line_id != current) {
      ref.push_back({{}, "#bbbbbb", 0.75});
      def.push_back({{}, "#1f4e9c", 1.25});
      current = p.line_id;
    }
    ref.back().points.emplace_back(p.x(0), p.x(1));
    def.back().points.emplace_back(p.y(0), p.y(1));
  }
  ref.insert(ref.end(), def.begin(), def.end());
  return svg_document(ref);
}

nlohmann::json objective_report_json(const ObjectiveReport& r) {
  return {{"order", r.order},
          {"lower_bound", r.lower_bound},
          {"barycentric_value", r.barycentric_value},
          {"boundary_trace_error", r.boundary_trace_error}};
}

}  // namespace cgrelax
