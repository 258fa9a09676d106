#include "cgrelax/envelope.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cgrelax {

namespace {

// H = L'L with L of full row rank; pivoted LDL' first, eigen square root when D is singular.
Eigen::MatrixXd gram_factor(const Eigen::MatrixXd& H) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const Eigen::VectorXd d = ldlt.vectorD();
  if (ldlt.info() == Eigen::Success && d.minCoeff() > 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff())) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(H.rows(), H.cols());
    P = ldlt.transpositionsP() * P;
    Eigen::MatrixXd Lt = ldlt.matrixL().transpose();
    return d.cwiseSqrt().asDiagonal() * Lt * P;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const double cut = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    if (es.eigenvalues()(i) > cut) keep.push_back(i);
  Eigen::MatrixXd L(static_cast<Eigen::Index>(keep.size()), H.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    L.row(static_cast<Eigen::Index>(r)) =
        std::sqrt(es.eigenvalues()(keep[r])) * es.eigenvectors().col(keep[r]).transpose();
  }
  return L;
}

void add_psd_strain_block(sdp::ConicProgram& prog, const VariableSpace& strain) {
  const int n = static_cast<int>(strain.dimension());
  sdp::LmiBlock P(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) P.add(static_cast<int>(strain.C(static_cast<std::size_t>(i), static_cast<std::size_t>(j))), i, j, 1.0);
  prog.blocks.push_back(std::move(P));
}

ProjectionProgram lifted_program(const Eigen::VectorXd& u0, const EnergyDensity& e) {
  const auto& wt = e.wtilde;
  const auto& space = wt.space();
  const auto s = static_cast<Eigen::Index>(space.arity());
  const MultiIndex zero(space.arity());
  Eigen::MatrixXd H(s, s);
  Eigen::VectorXd g(s);
  const auto Hp = hessian(wt);
  for (Eigen::Index i = 0; i < s; ++i) {
    g(i) = wt.coefficient(MultiIndex::unit(space.arity(), static_cast<std::size_t>(i)));
    for (Eigen::Index j = 0; j < s; ++j) H(i, j) = Hp[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].coefficient(zero);
  }
  const double w0 = wt.coefficient(zero);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly).eigenvalues();
  if (ev(0) < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
    std::ostringstream os;
    os << "strain energy is not convex (Hessian eigenvalue " << ev(0) << "); projection formula does not apply";
    throw ValidationError(os.str());
  }

  // Wt(u) = 1/2 (u - c)'H(u - c) + r'u + k with c a least-squares center.
  const Eigen::VectorXd center = -Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(H).solve(g);
  const Eigen::VectorXd resid = g + H * center;
  const double k0 = w0 - 0.5 * center.dot(H * center);
  const Eigen::MatrixXd L = gram_factor(H) / std::sqrt(2.0);
  const auto k = static_cast<int>(L.rows());

  ProjectionProgram out;
  auto& prog = out.program;
  prog.num_vars = static_cast<int>(s) + 1;
  const int t = static_cast<int>(s);
  prog.c = Eigen::VectorXd::Zero(prog.num_vars);
  prog.c.head(s) = resid;
  prog.c(t) = 1.0;
  out.offset = resid.dot(u0) + k0;
  add_psd_strain_block(prog, space);

  // [[I, v], [v', t]] >= 0 with v = L (u0 + p - c).
  sdp::LmiBlock schur(k + 1);
  const Eigen::VectorXd v0 = L * (u0 - center);
  for (int a = 0; a < k; ++a) {
    schur.add(-1, a, a, 1.0);
    schur.add(-1, a, k, v0(a));
    for (Eigen::Index j = 0; j < s; ++j) schur.add(static_cast<int>(j), a, k, L(a, j));
  }
  schur.add(t, k, k, 1.0);
  prog.blocks.push_back(std::move(schur));
  prog.E.resize(0, prog.num_vars);
  prog.f.resize(0);
  out.lifted = true;
  return out;
}

ProjectionProgram moment_program(const Eigen::VectorXd& u0, const EnergyDensity& e) {
  const auto cert = check_sos_convexity(e.wtilde);
  if (cert.status != SosStatus::certified) {
    throw ValidationError("strain energy is not certified SOS-convex (" + to_string(cert.status) +
                          "); projection formula does not apply");
  }
  const auto& space = e.wtilde.space();
  const std::size_t s = space.arity();
  std::vector<Poly> images;
  for (std::size_t i = 0; i < s; ++i)
    images.push_back(Poly::variable(space, i) + Poly::constant(space, u0(static_cast<Eigen::Index>(i))));
  const Poly q = substitute(e.wtilde, images, space);
  const int k = (q.degree() + 1) / 2;

  const auto mons = monomials_up_to(s, 2 * k);
  std::unordered_map<MultiIndex, int, MultiIndexHash> index;
  for (std::size_t i = 0; i < mons.size(); ++i) index.emplace(mons[i], static_cast<int>(i) - 1);  // y_0 == 1

  ProjectionProgram out;
  auto& prog = out.program;
  prog.num_vars = static_cast<int>(mons.size()) - 1;
  prog.c = Eigen::VectorXd::Zero(prog.num_vars);
  for (const auto& [m, c] : q.terms()) {
    const int v = index.at(m);
    if (v < 0) {
      out.offset += c;
    } else {
      prog.c(v) += c;
    }
  }
  const auto half = monomials_up_to(s, k);
  sdp::LmiBlock M(static_cast<int>(half.size()));
  for (std::size_t a = 0; a < half.size(); ++a)
    for (std::size_t b = a; b < half.size(); ++b) {
      const int v = index.at(half[a] + half[b]);
      M.add(v, static_cast<int>(a), static_cast<int>(b), 1.0);
    }
  prog.blocks.push_back(std::move(M));

  const auto n = space.dimension();
  const auto loc = monomials_up_to(s, k - 1);
  sdp::LmiBlock PL(static_cast<int>(loc.size() * n));
  for (std::size_t a = 0; a < loc.size(); ++a)
    for (std::size_t b = 0; b < loc.size(); ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const auto r = static_cast<int>(a * n + i), c = static_cast<int>(b * n + j);
          if (r > c) continue;
          const int v = index.at(loc[a] + loc[b] + MultiIndex::unit(s, space.C(i, j)));
          PL.add(v, r, c, 1.0);
        }
  prog.blocks.push_back(std::move(PL));
  prog.E.resize(0, prog.num_vars);
  prog.f.resize(0);
  out.lifted = false;
  return out;
}

}  // namespace

ProjectionProgram projection_program(const Eigen::MatrixXd& C, const EnergyDensity& e) {
  if (C.rows() != static_cast<Eigen::Index>(e.n) || C.cols() != C.rows()) {
    throw StructuralError("strain matrix does not match the energy dimension");
  }
  if (!C.allFinite()) throw ValidationError("strain matrix has non-finite entries");
  const Eigen::VectorXd u0 = strain_coordinates(0.5 * (C + C.transpose()));
  return e.wtilde.degree() <= 2 ? lifted_program(u0, e) : moment_program(u0, e);
}

EnvelopeResult project_envelope_strain(const Eigen::MatrixXd& C, const EnergyDensity& e, const EnvelopeOptions& opts) {
  const auto pp = projection_program(C, e);
  sdp::SolveOptions so;
  so.tol_feas = opts.tol;
  so.tol_gap = opts.tol;
  so.max_iters = opts.max_iters;
  const auto sol = sdp::solve(pp.program, so);

  EnvelopeResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  res.lifted = pp.lifted;
  const auto& space = e.wtilde.space();
  const auto n = static_cast<Eigen::Index>(e.n);
  res.P_star.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      res.P_star(i, j) = sol.z(static_cast<Eigen::Index>(space.C(static_cast<std::size_t>(i), static_cast<std::size_t>(j))));
  // Clip to the PSD cone so the reported point is feasible; P = 0 is always a candidate.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (res.P_star + res.P_star.transpose()));
  res.P_star = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  res.value = std::min(e.strain_value(C + res.P_star), e.strain_value(C));
  return res;
}

EnvelopeResult project_envelope(const Eigen::MatrixXd& F, const EnergyDensity& e, const EnvelopeOptions& opts) {
  if (!F.allFinite()) throw ValidationError("F has non-finite entries");
  return project_envelope_strain(F.transpose() * F, e, opts);
}

double spectral_truncation_envelope(const Eigen::MatrixXd& F) {
  const Eigen::MatrixXd C = F.transpose() * F;
  const Eigen::VectorXd s2 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C, Eigen::EigenvaluesOnly).eigenvalues();
  double v = 0.0;
  for (Eigen::Index i = 0; i < s2.size(); ++i) {
    const double d = std::max(s2(i) - 1.0, 0.0);
    v += d * d;
  }
  return v;
}

bool is_frobenius_well(const EnergyDensity& e) { return e.wtilde == svk_energy(0.0, 4.0, e.n).wtilde; }

EnvelopeMethod parse_envelope_method(const std::string& s) {
  if (s == "auto") return EnvelopeMethod::automatic;
  if (s == "spectral") return EnvelopeMethod::spectral;
  if (s == "projection") return EnvelopeMethod::projection;
  throw ValidationError("unknown envelope method '" + s + "' (auto, spectral, projection)");
}

double quasiconvex_envelope(const Eigen::MatrixXd& F, const EnergyDensity& e, EnvelopeMethod m) {
  const bool well = is_frobenius_well(e);
  if (m == EnvelopeMethod::spectral && !well) {
    throw ValidationError("spectral truncation applies only to |F'F - I|^2; use --method projection");
  }
  if (m == EnvelopeMethod::spectral || (m == EnvelopeMethod::automatic && well)) {
    return spectral_truncation_envelope(F);
  }
  const auto r = project_envelope(F, e);
  if (r.status != sdp::Status::optimal) throw SolverError("envelope projection ended with status " + sdp::to_string(r.status));
  return r.value;
}

std::pair<GridAxis, GridAxis> parse_grid(const std::string& text) {
  GridAxis axes[2];
  bool seen[2] = {false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    std::string name, lo, hi, steps;
    if (!std::getline(is, name, ':') || !std::getline(is, lo, ':') || !std::getline(is, hi, ':') ||
        !std::getline(is, steps)) {
      throw ValidationError("grid item '" + item + "' is not name:lo:hi:steps");
    }
    int axis = name == "s1" ? 0 : name == "s2" ? 1 : -1;
    if (axis < 0) throw ValidationError("grid axis must be s1 or s2, got '" + name + "'");
    try {
      axes[axis] = GridAxis{std::stod(lo), std::stod(hi), std::stoi(steps)};
    } catch (const std::exception&) {
      throw ValidationError("grid item '" + item + "' has a malformed number");
    }
    if (axes[axis].steps < 1 || axes[axis].lo < 0 || axes[axis].hi < axes[axis].lo) {
      throw ValidationError("grid axis '" + name + "' needs 0 <= lo <= hi and steps >= 1");
    }
    seen[axis] = true;
  }
  if (!seen[0] || !seen[1]) throw ValidationError("grid needs both s1 and s2");
  return {axes[0], axes[1]};
}

std::vector<SurfaceRow> envelope_surface(const GridAxis& a1, const GridAxis& a2, const EnergyDensity& e,
                                         EnvelopeMethod m) {
  if (e.n != 2) throw ValidationError("envelope surface is defined for n = 2");
  std::vector<SurfaceRow> rows;
  rows.reserve(static_cast<std::size_t>(a1.steps) * static_cast<std::size_t>(a2.steps));
  for (int i = 0; i < a1.steps; ++i)
    for (int j = 0; j < a2.steps; ++j) {
      const double s1 = a1.at(i), s2 = a2.at(j);
      const Eigen::Matrix2d F = Eigen::Vector2d(s1, s2).asDiagonal();
      rows.push_back({s1, s2, e(F), quasiconvex_envelope(F, e, m)});
    }
  return rows;
}

void write_surface_csv(std::ostream& os, const std::vector<SurfaceRow>& rows) {
  os << "s1,s2,W,Wquasi\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.17g,%.17g\n", r.s1, r.s2, r.W, r.Wquasi);
    os << buf;
  }
}

}  // namespace cgrelax
