#include "cgrelax/moments.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace cgrelax {

std::size_t MonomialBasis::prefix(int d) const {
  auto it = std::partition_point(entries.begin(), entries.end(), [d](const MultiIndex& m) { return m.degree() <= d; });
  return static_cast<std::size_t>(it - entries.begin());
}

int MonomialBasis::at(const MultiIndex& m) const {
  const int i = find(m);
  if (i < 0) throw StructuralError("monomial of degree " + std::to_string(m.degree()) + " exceeds the basis order");
  return i;
}

MonomialBasis build_basis(VariableSpace space, int r) {
  if (r < 1) throw ValidationError("relaxation order must be at least 1");
  MonomialBasis b;
  b.space = space;
  b.order = r;
  b.entries = monomials_up_to(space.arity(), 2 * r);
  b.index.reserve(b.entries.size());
  for (std::size_t i = 0; i < b.entries.size(); ++i) b.index.emplace(b.entries[i], static_cast<int>(i));
  return b;
}

Scaling Scaling::identity(std::size_t n) {
  Scaling s;
  s.center = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.half = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  s.s = 1.0;
  return s;
}

Scaling Scaling::for_box(const Box& box, double radius) {
  if (!(radius > 0.0)) throw ValidationError("scaling radius must be positive");
  Scaling s;
  const auto n = static_cast<Eigen::Index>(box.size());
  s.center.resize(n);
  s.half.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.center(i) = 0.5 * (box[static_cast<std::size_t>(i)].lo + box[static_cast<std::size_t>(i)].hi);
    s.half(i) = 0.5 * box[static_cast<std::size_t>(i)].width();
  }
  s.s = radius;
  return s;
}

Box Scaling::scaled_box(const Box& box) const {
  Box out;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.push_back({(box[i].lo - center(k)) / half(k), (box[i].hi - center(k)) / half(k)});
  }
  return out;
}

Poly Scaling::to_scaled(const Poly& p) const {
  const auto& sp = p.space();
  const std::size_t n = sp.dimension();
  std::vector<Poly> images;
  for (std::size_t v = 0; v < sp.arity(); ++v) {
    const auto var = Poly::variable(sp, v);
    if (v < n) {
      const auto k = static_cast<Eigen::Index>(v);
      images.push_back(half(k) * var + Poly::constant(sp, center(k)));
    } else {
      images.push_back(s * var);
    }
  }
  return substitute(p, images, sp);
}

Poly Scaling::from_scaled(const Poly& p) const {
  const auto& sp = p.space();
  const std::size_t n = sp.dimension();
  std::vector<Poly> images;
  for (std::size_t v = 0; v < sp.arity(); ++v) {
    const auto var = Poly::variable(sp, v);
    if (v < n) {
      const auto k = static_cast<Eigen::Index>(v);
      images.push_back((1.0 / half(k)) * (var - Poly::constant(sp, center(k))));
    } else {
      images.push_back((1.0 / s) * var);
    }
  }
  return substitute(p, images, sp);
}

Poly divergence(const std::vector<Poly>& phi, const Eigen::VectorXd& x_weights) {
  if (phi.empty()) throw StructuralError("divergence of an empty field");
  const auto& sp = phi[0].space();
  const std::size_t n = sp.dimension();
  if (sp.kind() != VariableSpace::Kind::elasticity || phi.size() != n) {
    throw StructuralError("test field needs n components over the elasticity space");
  }
  Poly d(sp);
  for (std::size_t i = 0; i < n; ++i) {
    if (!phi[i].depends_only_on(0, 2 * n)) throw ValidationError("test fields may not depend on Z");
    const double w = x_weights.size() > 0 ? x_weights(static_cast<Eigen::Index>(i)) : 1.0;
    d += w * differentiate(phi[i], sp.x(i));
    for (std::size_t j = 0; j < n; ++j) {
      d += differentiate(phi[i], sp.y(j)) * Poly::variable(sp, sp.Z(j, i));
    }
  }
  return d;
}

namespace {

// Facet integrals of phi_axis(x, y_d(x)) per axis, signed by the outward normal.
Eigen::VectorXd boundary_flux(const std::vector<Poly>& phi, const std::vector<Poly>& boundary, const Box& box) {
  const auto& sp = phi[0].space();
  const std::size_t n = sp.dimension();
  std::map<std::size_t, Poly> subs;
  for (std::size_t j = 0; j < n; ++j) subs.emplace(sp.y(j), boundary[j]);
  Eigen::VectorXd flux = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<Poly> traced(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!phi[i].is_zero()) traced[i] = compose(phi[i], subs);
  for (const auto& [facet, sign] : box_facets(box)) {
    const auto& t = phi[facet.axis];
    if (t.is_zero()) continue;
    flux(static_cast<Eigen::Index>(facet.axis)) += sign * integrate_facet(traced[facet.axis], box, facet);
  }
  return flux;
}

}  // namespace

double boundary_functional(const std::vector<Poly>& phi, const std::vector<Poly>& boundary, const Box& box) {
  if (phi.size() != box.size() || boundary.size() != box.size()) {
    throw StructuralError("test field, boundary data and box dimensions differ");
  }
  return boundary_flux(phi, boundary, box).sum();
}

SparseRow moment_row(const Poly& p, const MonomialBasis& basis) {
  SparseRow row;
  row.entries.reserve(p.size());
  for (const auto& [m, c] : p.terms()) row.entries.emplace_back(basis.at(m), c);
  return row;
}

sdp::LmiBlock localizing_structure(const Poly& g, const MonomialBasis& basis, int r) {
  const int rj = (g.degree() + 1) / 2;
  if (rj > r) throw ValidationError("localizing polynomial degree exceeds 2r");
  const auto side = basis.prefix(r - rj);
  sdp::LmiBlock block(static_cast<int>(side));
  for (std::size_t a = 0; a < side; ++a)
    for (std::size_t b = a; b < side; ++b) {
      const auto ab = basis.entries[a] + basis.entries[b];
      for (const auto& [m, c] : g.terms()) block.add(basis.at(ab + m), static_cast<int>(a), static_cast<int>(b), c);
    }
  return block;
}

int minimal_order(const ProblemSpec& spec) { return std::max(1, (spec.energy.w.degree() + 1) / 2); }

std::vector<SparseRow> stokes_rows(const ProblemSpec& spec, const MonomialBasis& basis, const Scaling& scaling, int r) {
  const auto sp = spec.space();
  const std::size_t n = spec.n;
  const Box sbox = scaling.scaled_box(spec.box);
  const double volume = box_volume(spec.box);
  std::vector<Poly> sbound;
  for (const auto& b : spec.boundary) sbound.push_back((1.0 / scaling.s) * scaling.to_scaled(b));
  const Eigen::VectorXd weights = scaling.half.cwiseInverse();

  // Facet measure in x relative to the scaled facet, divided by |Omega|.
  Eigen::VectorXd facet_factor(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double f = 1.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) f *= scaling.half(static_cast<Eigen::Index>(k));
    facet_factor(static_cast<Eigen::Index>(i)) = f / volume;
  }

  std::vector<SparseRow> rows;
  const auto tests = monomials_up_to(2 * n, 2 * r - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& t : tests) {
      MultiIndex m(sp.arity());
      for (std::size_t k = 0; k < 2 * n; ++k) m.set(k, t[k]);
      std::vector<Poly> phi(n, Poly(sp));
      phi[i] = Poly::monomial(sp, m);
      const auto d = divergence(phi, weights);
      if (d.degree() > 2 * r) throw StructuralError("divergence degree exceeds 2r");
      auto row = moment_row(d, basis);
      row.rhs = boundary_flux(phi, sbound, sbox).cwiseProduct(facet_factor).sum();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<SparseRow> marginal_rows(const ProblemSpec& spec, const MonomialBasis& basis, const Scaling& scaling, int r) {
  const auto sp = spec.space();
  const std::size_t n = spec.n;
  const Box sbox = scaling.scaled_box(spec.box);
  const double svol = box_volume(sbox);
  const auto gx = VariableSpace::generic(n);
  std::vector<SparseRow> rows;
  for (const auto& a : monomials_up_to(n, 2 * r)) {
    if (a.degree() < 2 * r - 1) continue;
    MultiIndex m(sp.arity());
    for (std::size_t i = 0; i < n; ++i) m.set(i, a[i]);
    SparseRow row;
    row.entries.emplace_back(basis.at(m), 1.0);
    row.rhs = integrate_box_value(Poly::monomial(gx, a), sbox) / svol;
    rows.push_back(std::move(row));
  }
  return rows;
}

MomentRelaxation assemble_relaxation(const ProblemSpec& spec, int r, double radius) {
  const int rmin = minimal_order(spec);
  if (r < rmin) {
    throw ValidationError("relaxation order " + std::to_string(r) + " is below r_min = " + std::to_string(rmin));
  }
  if (!(radius > 0.0)) throw ValidationError("truncation radius must be positive");
  const auto sp = spec.space();
  const std::size_t n = spec.n;
  MomentRelaxation rel;
  rel.r = r;
  rel.r_min = rmin;
  rel.radius = radius;
  rel.volume = box_volume(spec.box);
  rel.basis = build_basis(sp, r);
  // (y, Z) are scaled by the size of the boundary data rather than by R; moments of
  // high degree in y / R are too small for the interior-point iterations.
  const double typical = 1.0 + boundary_sup(spec, 101) + mean_boundary_gradient(spec).norm();
  rel.scaling = Scaling::for_box(spec.box, std::min(radius, typical));

  rel.scaled_energy = rel.scaling.to_scaled(spec.energy.w);
  rel.objective = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rel.basis.size()));
  for (const auto& [idx, c] : moment_row(rel.scaled_energy, rel.basis).entries) rel.objective(idx) += c;

  const auto one = Poly::constant(sp, 1.0);
  rel.block_names.push_back("moment");
  rel.blocks.push_back(localizing_structure(one, rel.basis, r));
  const Box sbox = rel.scaling.scaled_box(spec.box);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = Poly::variable(sp, sp.x(i));
    const auto g = (xi - Poly::constant(sp, sbox[i].lo)) * (Poly::constant(sp, sbox[i].hi) - xi);
    rel.block_names.push_back("box" + std::to_string(i + 1));
    rel.blocks.push_back(localizing_structure(g, rel.basis, r));
  }
  const double rho = radius / rel.scaling.s;
  Poly ball = Poly::constant(sp, rho * rho);
  for (std::size_t v = n; v < sp.arity(); ++v) {
    const auto t = Poly::variable(sp, v);
    ball -= t * t;
  }
  rel.block_names.push_back("ball");
  rel.blocks.push_back(localizing_structure(ball, rel.basis, r));

  rel.stokes = stokes_rows(spec, rel.basis, rel.scaling, r);
  for (auto& row : marginal_rows(spec, rel.basis, rel.scaling, r)) rel.stokes.push_back(std::move(row));
  return rel;
}

DedupResult deduplicate_rows(const std::vector<SparseRow>& rows, int num_cols, double threshold) {
  const auto R = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd Et = Eigen::MatrixXd::Zero(num_cols, R);
  Eigen::VectorXd f(R);
  for (Eigen::Index k = 0; k < R; ++k) {
    for (const auto& [c, v] : rows[static_cast<std::size_t>(k)].entries) Et(c, k) += v;
    f(k) = rows[static_cast<std::size_t>(k)].rhs;
  }
  DedupResult out;
  if (R == 0) return out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Et);
  qr.setThreshold(threshold);
  const auto rank = qr.rank();
  out.rank = static_cast<int>(rank);
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = 0; k < rank; ++k) out.kept.push_back(perm(k));
  std::sort(out.kept.begin(), out.kept.end());

  // Least-norm solution of the kept rows, then the residual on every row.
  Eigen::VectorXd fk(rank);
  for (Eigen::Index k = 0; k < rank; ++k) fk(k) = f(perm(k));
  const auto R11 = qr.matrixR().topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(num_cols);
  w.head(rank) = R11.transpose().solve(fk);
  const Eigen::VectorXd z0 = qr.householderQ() * w;
  const Eigen::VectorXd res = Et.transpose() * z0 - f;
  out.inconsistency = res.size() ? res.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

ConicRelaxation to_conic_program(const MomentRelaxation& relax) {
  ConicRelaxation out;
  const int m = static_cast<int>(relax.basis.size());
  out.dedup = deduplicate_rows(relax.stokes, m);
  double fscale = 1.0;
  for (const auto& row : relax.stokes) fscale = std::max(fscale, std::abs(row.rhs));
  if (out.dedup.inconsistency > 1e-8 * fscale) {
    throw StructuralError("Stokes rows are inconsistent (residual " + std::to_string(out.dedup.inconsistency) + ")");
  }
  auto& p = out.program;
  p.num_vars = m;
  out.objective_scale = 1.0;
  p.c = relax.objective / out.objective_scale;
  p.blocks = relax.blocks;
  std::vector<Eigen::Triplet<double>> trips;
  p.f.resize(static_cast<Eigen::Index>(out.dedup.kept.size()));
  for (std::size_t k = 0; k < out.dedup.kept.size(); ++k) {
    const auto& row = relax.stokes[static_cast<std::size_t>(out.dedup.kept[k])];
    for (const auto& [c, v] : row.entries) trips.emplace_back(static_cast<int>(k), c, v);
    p.f(static_cast<Eigen::Index>(k)) = row.rhs;
  }
  p.E.resize(static_cast<Eigen::Index>(out.dedup.kept.size()), m);
  p.E.setFromTriplets(trips.begin(), trips.end());
  return out;
}

RelaxationSolution solve_relaxation(const ProblemSpec& spec, int r, double radius, const sdp::SolveOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  RelaxationSolution out;
  out.relax = assemble_relaxation(spec, r, radius);
  out.conic = to_conic_program(out.relax);
  out.solution = sdp::solve(out.conic.program, opts);
  out.value = out.relax.volume * out.conic.objective_scale * out.solution.primal_objective;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Eigen::VectorXd occupation_moments(const std::vector<Poly>& y, const Box& box, const MonomialBasis& basis,
                                   const Scaling& scaling) {
  const auto& sp = basis.space;
  const std::size_t n = sp.dimension();
  if (y.size() != n) throw StructuralError("deformation needs n components");
  std::vector<Poly> images(sp.arity(), Poly(sp));
  for (std::size_t i = 0; i < n; ++i) images[sp.x(i)] = Poly::variable(sp, sp.x(i));
  for (std::size_t j = 0; j < n; ++j) {
    if (!y[j].depends_only_on(0, n)) throw ValidationError("deformation may depend on x only");
    images[sp.y(j)] = (1.0 / scaling.s) * scaling.to_scaled(y[j]);
    for (std::size_t i = 0; i < n; ++i) {
      images[sp.Z(j, i)] = (1.0 / scaling.s) * scaling.to_scaled(differentiate(y[j], sp.x(i)));
    }
  }
  const Box sbox = scaling.scaled_box(box);
  const double vol = box_volume(sbox);
  std::vector<Poly> prod(basis.size());
  Eigen::VectorXd z(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const auto& m = basis.entries[a];
    if (m.degree() == 0) {
      prod[a] = Poly::constant(sp, 1.0);
    } else {
      std::size_t k = 0;
      while (m[k] == 0) ++k;
      MultiIndex prev = m;
      prev.set(k, m[k] - 1);
      prod[a] = prod[static_cast<std::size_t>(basis.at(prev))] * images[k];
    }
    z(static_cast<Eigen::Index>(a)) = integrate_box_value(prod[a], sbox) / vol;
  }
  return z;
}

}  // namespace cgrelax
