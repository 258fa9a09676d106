#include "cgrelax/energy.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cgrelax/poly_json.hpp"
#include "cgrelax/sdp.hpp"

namespace cgrelax {

StiffnessForm isotropic_stiffness(double lam, double mu) {
  StiffnessForm s;
  s.D = Eigen::Matrix3d{{lam + 2 * mu, lam, 0.0}, {lam, lam + 2 * mu, 0.0}, {0.0, 0.0, mu}};
  s.lam = lam;
  s.mu = mu;
  return s;
}

Poly compose_with_cauchy_green(const Poly& wtilde, std::size_t n) {
  const auto strain = VariableSpace::strain(n);
  const auto el = VariableSpace::elasticity(n);
  if (!(wtilde.space() == strain)) throw StructuralError("wtilde must live in the strain space");
  std::vector<Poly> images(strain.arity(), Poly(el));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      Poly c(el);
      for (std::size_t k = 0; k < n; ++k) c += Poly::variable(el, el.Z(k, i)) * Poly::variable(el, el.Z(k, j));
      images[strain.C(i, j)] = c;
    }
  }
  return substitute(wtilde, images, el);
}

Eigen::VectorXd strain_coordinates(const Eigen::MatrixXd& C) {
  const auto n = static_cast<std::size_t>(C.rows());
  const auto space = VariableSpace::strain(n);
  Eigen::VectorXd v(static_cast<Eigen::Index>(space.arity()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      v(static_cast<Eigen::Index>(space.C(i, j))) = C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return v;
}

Eigen::VectorXd gradient_point(const Eigen::MatrixXd& F) {
  const auto n = static_cast<std::size_t>(F.rows());
  const auto el = VariableSpace::elasticity(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(el.arity()));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      v(static_cast<Eigen::Index>(el.Z(j, i))) = F(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  return v;
}

double EnergyDensity::operator()(const Eigen::MatrixXd& F) const { return evaluate(w, gradient_point(F)); }

double EnergyDensity::strain_value(const Eigen::MatrixXd& C) const {
  return evaluate(wtilde, strain_coordinates(C));
}

EnergyDensity custom_energy(const Poly& wtilde) {
  if (wtilde.space().kind() != VariableSpace::Kind::strain) {
    throw StructuralError("energy density must be given in strain coordinates");
  }
  EnergyDensity e;
  e.n = wtilde.space().dimension();
  e.kind = EnergyKind::custom;
  e.wtilde = wtilde;
  e.w = compose_with_cauchy_green(wtilde, e.n);
  e.p_growth = e.w.degree();
  return e;
}

namespace {

// Symmetric matrix of strain polynomials X = C - I.
std::vector<std::vector<Poly>> strain_minus_identity(std::size_t n) {
  const auto space = VariableSpace::strain(n);
  std::vector<std::vector<Poly>> X(n, std::vector<Poly>(n, Poly(space)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      X[i][j] = Poly::variable(space, space.C(i, j));
      if (i == j) X[i][j] -= Poly::constant(space, 1.0);
    }
  }
  return X;
}

}  // namespace

EnergyDensity svk_energy(double lam, double mu, std::size_t n) {
  if (!(lam >= 0.0) || !(mu >= 0.0)) throw ValidationError("Lame parameters must be non-negative");
  if (lam == 0.0 && mu == 0.0) throw ValidationError("Lame parameters are both zero");
  const auto space = VariableSpace::strain(n);
  const auto X = strain_minus_identity(n);
  // E = X / 2
  Poly trace(space), trace_sq(space);
  for (std::size_t i = 0; i < n; ++i) {
    trace += X[i][i] * 0.5;
    for (std::size_t j = 0; j < n; ++j) trace_sq += (X[i][j] * 0.5) * (X[j][i] * 0.5);
  }
  auto e = custom_energy((lam / 2.0) * (trace * trace) + mu * trace_sq);
  e.kind = EnergyKind::svk;
  e.lam = lam;
  e.mu = mu;
  if (n == 2) e.stiffness = isotropic_stiffness(lam, mu);
  return e;
}

EnergyDensity anisotropic_energy(const StiffnessForm& form, bool require_definite) {
  const auto& D = form.D;
  const Eigen::Index s = D.rows();
  if (D.cols() != s || s == 0) throw StructuralError("stiffness matrix must be square");
  std::size_t n = 0;
  while ((n + 1) * (n + 2) / 2 <= static_cast<std::size_t>(s)) ++n;
  if (n * (n + 1) / 2 != static_cast<std::size_t>(s)) throw StructuralError("stiffness size is not n(n+1)/2");
  if ((D - D.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + D.cwiseAbs().maxCoeff())) {
    throw ValidationError("stiffness matrix is not symmetric");
  }
  const double min_ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(D, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (require_definite && !(min_ev > 1e-10)) {
    std::ostringstream os;
    os << "stiffness matrix is not positive definite (eigenvalue " << min_ev << ")";
    throw ValidationError(os.str());
  }
  const auto space = VariableSpace::strain(n);
  const auto X = strain_minus_identity(n);
  std::vector<Poly> a(static_cast<std::size_t>(s), Poly(space));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a[space.C(i, j)] = i == j ? X[i][i] : X[i][j] * 2.0;
  Poly wt(space);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j)
      if (D(i, j) != 0.0) wt += D(i, j) * (a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(j)]);
  auto e = custom_energy(wt);
  e.kind = EnergyKind::anisotropic;
  e.stiffness = form;
  return e;
}

std::string to_string(EnergyKind k) {
  switch (k) {
    case EnergyKind::svk:
      return "svk";
    case EnergyKind::anisotropic:
      return "anisotropic";
    case EnergyKind::custom:
      return "custom";
  }
  return "custom";
}

nlohmann::json energy_to_json(const EnergyDensity& e) {
  nlohmann::json j;
  j["kind"] = to_string(e.kind);
  j["n"] = e.n;
  if (e.lam) j["lam"] = *e.lam;
  if (e.mu) j["mu"] = *e.mu;
  if (e.stiffness) {
    std::vector<double> d;
    for (Eigen::Index r = 0; r < e.stiffness->D.rows(); ++r)
      for (Eigen::Index c = 0; c < e.stiffness->D.cols(); ++c) d.push_back(e.stiffness->D(r, c));
    j["D"] = d;
  }
  j["wtilde"] = polynomial_to_json(e.wtilde);
  return j;
}

EnergyDensity energy_from_json(const nlohmann::json& j, bool require_definite) {
  if (!j.is_object() || !j.contains("kind")) throw ValidationError("energy needs a 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  const auto n = j.value("n", std::size_t{2});
  if (kind == "svk") {
    return svk_energy(j.at("lam").get<double>(), j.at("mu").get<double>(), n);
  }
  if (kind == "anisotropic") {
    const auto d = j.at("D").get<std::vector<double>>();
    const auto s = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(d.size()))));
    if (s * s != static_cast<Eigen::Index>(d.size())) throw ValidationError("D must hold a square matrix row-major");
    StiffnessForm form;
    form.D.resize(s, s);
    for (Eigen::Index r = 0; r < s; ++r)
      for (Eigen::Index c = 0; c < s; ++c) form.D(r, c) = d[static_cast<std::size_t>(r * s + c)];
    return anisotropic_energy(form, require_definite);
  }
  if (kind == "custom") {
    return custom_energy(polynomial_from_json(j.at("wtilde"), VariableSpace::strain(n)));
  }
  throw ValidationError("unknown energy kind '" + kind + "'");
}

FrameReport check_frame_indifference(const Poly& w, std::size_t n, int trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("trials must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> entry(-2.0, 2.0);
  std::normal_distribution<double> gauss;
  const auto N = static_cast<Eigen::Index>(n);
  FrameReport rep;
  rep.trials = trials;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd R;
    if (n == 2) {
      const double th = angle(rng);
      R = Eigen::Matrix2d{{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}};
    } else {
      // QR of a Gaussian matrix, sign-fixed into SO(n).
      const Eigen::MatrixXd G = Eigen::MatrixXd::NullaryExpr(N, N, [&]() { return gauss(rng); });
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
      R = qr.householderQ();
      if (R.determinant() < 0) R.col(0) *= -1.0;
    }
    const Eigen::MatrixXd F = Eigen::MatrixXd::NullaryExpr(N, N, [&]() { return entry(rng); });
    const double wf = evaluate(w, gradient_point(F));
    const double wrf = evaluate(w, gradient_point(R * F));
    rep.max_deviation = std::max(rep.max_deviation, std::abs(wrf - wf) / (1.0 + std::abs(wf)));
  }
  rep.passed = rep.max_deviation <= 1e-9;
  return rep;
}

FrameReport check_frame_indifference(const EnergyDensity& e, int trials, std::uint64_t seed) {
  return check_frame_indifference(e.w, e.n, trials, seed);
}

PolyMatrix hessian(const Poly& f) {
  const std::size_t s = f.space().arity();
  PolyMatrix H(s, std::vector<Poly>(s, Poly(f.space())));
  for (std::size_t i = 0; i < s; ++i) {
    const auto di = differentiate(f, i);
    for (std::size_t j = i; j < s; ++j) {
      H[i][j] = differentiate(di, j);
      H[j][i] = H[i][j];
    }
  }
  return H;
}

std::string to_string(SosStatus s) {
  switch (s) {
    case SosStatus::certified:
      return "certified";
    case SosStatus::refuted:
      return "refuted";
    case SosStatus::indeterminate:
      return "indeterminate";
  }
  return "indeterminate";
}

namespace {

SosCertificate constant_hessian_test(const PolyMatrix& H) {
  const auto s = static_cast<Eigen::Index>(H.size());
  const MultiIndex zero(H.empty() ? 0 : H[0][0].space().arity());
  Eigen::MatrixXd M(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) M(i, j) = H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].coefficient(zero);
  SosCertificate cert;
  cert.constant_hessian = true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  cert.min_eigenvalue = s > 0 ? es.eigenvalues()(0) : 0.0;
  cert.factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  cert.status = cert.min_eigenvalue >= -1e-10 ? SosStatus::certified : SosStatus::refuted;
  cert.detail = "constant Hessian, minimum eigenvalue " + std::to_string(cert.min_eigenvalue);
  return cert;
}

}  // namespace

SosCertificate check_sos_convexity(const Poly& wtilde) {
  const auto H = hessian(wtilde);
  const std::size_t s = wtilde.space().arity();
  int hdeg = 0;
  for (const auto& row : H)
    for (const auto& h : row) hdeg = std::max(hdeg, h.degree());
  if (hdeg == 0) return constant_hessian_test(H);

  // q(C, v) = v' H(C) v over the variables (C_1..C_s, v_1..v_s).
  const auto qs = VariableSpace::generic(2 * s);
  Poly q(qs);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      for (const auto& [m, c] : H[i][j].terms()) {
        MultiIndex mm(2 * s);
        for (std::size_t k = 0; k < s; ++k) mm.set(k, m[k]);
        mm.set(s + i, mm[s + i] + 1);
        mm.set(s + j, mm[s + j] + 1);
        q.add_term(mm, c);
      }
    }
  }

  SosCertificate cert;
  const int k = (hdeg + 1) / 2;
  for (const auto& cm : monomials_up_to(s, k)) {
    for (std::size_t i = 0; i < s; ++i) {
      MultiIndex b(2 * s);
      for (std::size_t t = 0; t < s; ++t) b.set(t, cm[t]);
      b.set(s + i, 1);
      cert.gram_basis.push_back(b);
    }
  }
  const int g = static_cast<int>(cert.gram_basis.size());

  sdp::ConicProgram prog;
  std::map<MultiIndex, std::vector<std::pair<int, double>>, GradedLex> rows;
  std::vector<std::pair<int, int>> slots;
  sdp::LmiBlock block(g);
  for (int a = 0; a < g; ++a) {
    for (int b = a; b < g; ++b) {
      const int var = static_cast<int>(slots.size());
      slots.emplace_back(a, b);
      block.add(var, a, b, 1.0);
      rows[cert.gram_basis[static_cast<std::size_t>(a)] + cert.gram_basis[static_cast<std::size_t>(b)]].emplace_back(
          var, a == b ? 1.0 : 2.0);
    }
  }
  for (const auto& [m, c] : q.terms()) {
    if (!rows.count(m)) {
      cert.status = SosStatus::refuted;
      cert.detail = "Hessian form has a monomial outside the Gram support";
      return cert;
    }
  }
  prog.num_vars = static_cast<int>(slots.size());
  prog.c = Eigen::VectorXd::Zero(prog.num_vars);
  for (int v = 0; v < prog.num_vars; ++v)
    if (slots[static_cast<std::size_t>(v)].first == slots[static_cast<std::size_t>(v)].second) prog.c(v) = 1.0;
  prog.blocks.push_back(std::move(block));
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> rhs;
  for (const auto& [m, entries] : rows) {
    const int r = static_cast<int>(rhs.size());
    for (const auto& [var, coef] : entries) trips.emplace_back(r, var, coef);
    rhs.push_back(q.coefficient(m));
  }
  prog.E.resize(static_cast<Eigen::Index>(rhs.size()), prog.num_vars);
  prog.E.setFromTriplets(trips.begin(), trips.end());
  prog.f = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

  sdp::Solution sol;
  try {
    sol = sdp::solve(prog);
  } catch (const SolverError& e) {
    cert.detail = e.what();
    return cert;
  }
  if (sol.status == sdp::Status::infeasible && sol.infeasibility == sdp::Infeasibility::primal) {
    cert.status = SosStatus::refuted;
    cert.detail = "Gram program infeasible";
    return cert;
  }
  if (sol.status != sdp::Status::optimal) {
    cert.detail = "Gram program ended with status " + sdp::to_string(sol.status);
    return cert;
  }
  const Eigen::MatrixXd Q = prog.blocks[0].evaluate(sol.z);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  cert.min_eigenvalue = es.eigenvalues()(0);
  cert.factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const double scale = 1.0 + es.eigenvalues().cwiseAbs().maxCoeff();
  cert.status = cert.min_eigenvalue >= -1e-7 * scale ? SosStatus::certified : SosStatus::indeterminate;
  cert.detail = "Gram matrix of side " + std::to_string(g);
  return cert;
}

GrowthReport check_growth(const EnergyDensity& e, int samples, const std::vector<double>& radii, std::uint64_t seed) {
  if (samples < 1) throw ValidationError("samples must be positive");
  if (radii.empty()) throw ValidationError("radius schedule is empty");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const auto N = static_cast<Eigen::Index>(e.n);
  GrowthReport rep;
  rep.p = e.p_growth;
  rep.radii = radii;
  rep.c1 = std::numeric_limits<double>::infinity();
  rep.c2 = 0.0;
  for (double rho : radii) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int s = 0; s < samples; ++s) {
      Eigen::MatrixXd F = Eigen::MatrixXd::NullaryExpr(N, N, [&]() { return gauss(rng); });
      F *= rho / F.norm();
      const double fp = std::pow(F.norm(), rep.p);
      const double wf = e(F);
      lo = std::min(lo, wf / fp);
      hi = std::max(hi, wf / std::max(1.0, fp));
    }
    rep.inf_ratio.push_back(lo);
    rep.sup_ratio.push_back(hi);
    rep.c1 = std::min(rep.c1, lo);
    rep.c2 = std::max(rep.c2, hi);
  }
  // A coercive leading form keeps the lower ratio bounded away from zero as the radius grows.
  const std::size_t L = rep.inf_ratio.size();
  if (L >= 2) rep.degenerate = rep.inf_ratio[L - 1] < 0.5 * rep.inf_ratio[L - 2];
  rep.passed = rep.c1 > 0.0 && !rep.degenerate && std::isfinite(rep.c2);
  return rep;
}

}  // namespace cgrelax
