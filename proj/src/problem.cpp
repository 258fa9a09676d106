#include "cgrelax/problem.hpp"

#include <cmath>
#include <fstream>

#include "cgrelax/poly_json.hpp"

namespace cgrelax {

void ProblemSpec::validate() const {
  if (n < 1 || n > 3) throw ValidationError("dimension n must be 1, 2 or 3");
  if (box.size() != n) throw ValidationError("box needs one interval per axis");
  for (const auto& iv : box)
    if (!(iv.hi > iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw ValidationError("box interval must satisfy lo < hi");
    }
  if (energy.n != n) throw ValidationError("energy dimension does not match n");
  if (boundary.size() != n) throw ValidationError("boundary needs one polynomial per component");
  for (const auto& b : boundary) {
    if (!(b.space() == space())) throw ValidationError("boundary polynomial lives in the wrong space");
    if (!b.depends_only_on(0, n)) throw ValidationError("boundary polynomials may depend on x only");
  }
  for (int r : orders)
    if (r < 1) throw ValidationError("relaxation orders must be positive");
  if (R && !(*R > 0.0)) throw ValidationError("truncation radius must be positive");
}

void ProblemSpec::check_radius() const {
  if (R) {
    const double sup = boundary_sup(*this);
    if (!(*R > sup)) {
      throw ValidationError("truncation radius " + std::to_string(*R) + " does not exceed sup|y_d| = " +
                            std::to_string(sup));
    }
  }
}

std::vector<Poly> affine_boundary(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const auto n = static_cast<std::size_t>(A.rows());
  if (A.cols() != A.rows()) throw StructuralError("boundary matrix must be square");
  const auto el = VariableSpace::elasticity(n);
  std::vector<Poly> out;
  for (std::size_t j = 0; j < n; ++j) {
    Poly p(el);
    if (b.size() > 0) p += Poly::constant(el, b(static_cast<Eigen::Index>(j)));
    for (std::size_t i = 0; i < n; ++i)
      p += A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * Poly::variable(el, el.x(i));
    out.push_back(p);
  }
  return out;
}

double boundary_sup(const ProblemSpec& spec, int samples_per_edge) {
  const std::size_t n = spec.n;
  const auto el = spec.space();
  const int k = n <= 2 ? samples_per_edge : std::max(2, static_cast<int>(std::sqrt(samples_per_edge * 50.0)));
  double best = 0.0;
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(el.arity()));
  for (const auto& [facet, sign] : box_facets(spec.box)) {
    (void)sign;
    // walk a tensor grid over the other axes
    std::vector<int> idx(n, 0);
    while (true) {
      for (std::size_t a = 0; a < n; ++a) {
        const auto& iv = spec.box[a];
        pt(static_cast<Eigen::Index>(a)) =
            a == facet.axis ? facet.value : iv.lo + (iv.hi - iv.lo) * idx[a] / static_cast<double>(k - 1);
      }
      double s = 0.0;
      for (const auto& b : spec.boundary) {
        const double v = evaluate(b, pt);
        s += v * v;
      }
      best = std::max(best, std::sqrt(s));
      std::size_t a = 0;
      for (; a < n; ++a) {
        if (a == facet.axis) continue;
        if (++idx[a] < k) break;
        idx[a] = 0;
      }
      if (a == n) break;
    }
  }
  return best;
}

Eigen::MatrixXd mean_boundary_gradient(const ProblemSpec& spec) {
  const auto N = static_cast<Eigen::Index>(spec.n);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, N);
  for (const auto& [facet, sign] : box_facets(spec.box)) {
    for (Eigen::Index j = 0; j < N; ++j) {
      G(j, static_cast<Eigen::Index>(facet.axis)) +=
          sign * integrate_facet(spec.boundary[static_cast<std::size_t>(j)], spec.box, facet);
    }
  }
  return G / box_volume(spec.box);
}

double initial_radius(const ProblemSpec& spec) {
  return 4.0 * (1.0 + boundary_sup(spec) + mean_boundary_gradient(spec).norm());
}

nlohmann::json problem_to_json(const ProblemSpec& spec) {
  nlohmann::json j;
  if (!spec.name.empty()) j["name"] = spec.name;
  j["n"] = spec.n;
  auto box = nlohmann::json::array();
  for (const auto& iv : spec.box) box.push_back({iv.lo, iv.hi});
  j["box"] = box;
  j["energy"] = energy_to_json(spec.energy);
  // boundary terms are written with x exponents only
  const auto xs = VariableSpace::generic(spec.n);
  auto bnd = nlohmann::json::array();
  for (const auto& b : spec.boundary) {
    Poly px(xs);
    for (const auto& [m, c] : b.terms()) {
      MultiIndex mx(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i) mx.set(i, m[i]);
      px.add_term(mx, c);
    }
    bnd.push_back(polynomial_to_json(px));
  }
  j["boundary"] = bnd;
  if (spec.R) {
    j["R"] = *spec.R;
  } else {
    j["R"] = "auto";
  }
  j["orders"] = spec.orders;
  return j;
}

ProblemSpec problem_from_json(const nlohmann::json& j, bool require_definite) {
  try {
    ProblemSpec spec;
    if (!j.is_object()) throw ValidationError("problem must be a JSON object");
    spec.name = j.value("name", std::string());
    spec.n = j.at("n").get<std::size_t>();
    if (spec.n < 1 || spec.n > 3) throw ValidationError("dimension n must be 1, 2 or 3");
    for (const auto& iv : j.at("box")) {
      if (!iv.is_array() || iv.size() != 2) throw ValidationError("box entries must be [lo, hi]");
      spec.box.push_back({iv[0].get<double>(), iv[1].get<double>()});
    }
    auto ej = j.at("energy");
    if (!ej.contains("n")) ej["n"] = spec.n;
    spec.energy = energy_from_json(ej, require_definite);
    const auto el = spec.space();
    for (const auto& bj : j.at("boundary")) {
      if (!bj.is_array()) throw ValidationError("boundary entries must be polynomial term arrays");
      Poly p(el);
      for (const auto& term : bj) {
        const auto exps = term.at("exponents").get<std::vector<int>>();
        if (exps.size() != spec.n && exps.size() != el.arity()) {
          throw ValidationError("boundary term exponents must have length n or 2n+n^2");
        }
        MultiIndex m(el.arity());
        for (std::size_t i = 0; i < exps.size(); ++i) m.set(i, exps[i]);
        p.add_term(m, term.at("coeff").get<double>());
      }
      spec.boundary.push_back(p);
    }
    const auto& R = j.at("R");
    if (R.is_string()) {
      if (R.get<std::string>() != "auto") throw ValidationError("R must be a number or \"auto\"");
    } else {
      spec.R = R.get<double>();
    }
    spec.orders = j.value("orders", std::vector<int>{});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("problem schema: ") + e.what());
  }
}

ProblemSpec load_problem(const std::string& path, bool require_definite) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open problem file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("problem file '" + path + "' is not valid JSON: " + e.what());
  }
  auto spec = problem_from_json(j, require_definite);
  if (spec.name.empty()) spec.name = path;
  return spec;
}

}  // namespace cgrelax
