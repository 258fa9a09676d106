#include "cgrelax/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>

namespace cgrelax::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Status s) {
  switch (s) {
    case Status::optimal:
      return "optimal";
    case Status::infeasible:
      return "infeasible";
    case Status::max_iters:
      return "max_iters";
    case Status::numerical_failure:
      return "numerical_failure";
  }
  return "unknown";
}

void LmiBlock::add(int var, int i, int j, double value) {
  if (i > j) std::swap(i, j);
  if (i < 0 || j >= size) throw StructuralError("LMI entry outside the block");
  if (value == 0.0) return;
  if (var < 0) {
    constant.push_back({i, j, value});
  } else {
    coefficients[var].push_back({i, j, value});
  }
}

namespace {

void scatter(MatrixXd& m, const std::vector<Entry>& entries, double scale) {
  for (const auto& e : entries) {
    m(e.row, e.col) += scale * e.value;
    if (e.row != e.col) m(e.col, e.row) += scale * e.value;
  }
}

}  // namespace

MatrixXd LmiBlock::constant_matrix() const {
  MatrixXd m = MatrixXd::Zero(size, size);
  scatter(m, constant, 1.0);
  return m;
}

MatrixXd LmiBlock::coefficient_matrix(int var) const {
  MatrixXd m = MatrixXd::Zero(size, size);
  if (auto it = coefficients.find(var); it != coefficients.end()) scatter(m, it->second, 1.0);
  return m;
}

MatrixXd LmiBlock::evaluate(const VectorXd& z) const {
  MatrixXd m = constant_matrix();
  for (const auto& [k, entries] : coefficients) scatter(m, entries, z(k));
  return m;
}

void ConicProgram::validate() const {
  if (num_vars <= 0) throw StructuralError("program has no variables");
  if (c.size() != num_vars) throw StructuralError("objective length differs from the variable count");
  if (blocks.empty() && E.rows() == 0) throw StructuralError("program needs at least one block or equality");
  if (E.rows() > 0 && E.cols() != num_vars) throw StructuralError("equality matrix has the wrong width");
  if (f.size() != E.rows()) throw StructuralError("equality right-hand side has the wrong length");
  for (const auto& b : blocks) {
    if (b.size <= 0) throw StructuralError("block with non-positive side");
    auto check = [&](const std::vector<Entry>& es) {
      for (const auto& e : es)
        if (e.row < 0 || e.col < e.row || e.col >= b.size) throw StructuralError("malformed block entry");
    };
    check(b.constant);
    for (const auto& [k, es] : b.coefficients) {
      if (k < 0 || k >= num_vars) throw StructuralError("block coefficient refers to an unknown variable");
      check(es);
    }
  }
}

namespace {

using Blocks = std::vector<MatrixXd>;

double inner(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i]).sum();
  return s;
}

double norm(const Blocks& a) { return std::sqrt(inner(a, a)); }

// Problem data rearranged for the interior-point iterations. The program is
// handled in the form  G x + s = h, A x = b, s PSD  with G x = -sum x_k B_k
// and h = B0.
class Operators {
 public:
  struct Term {
    int var = 0;
    std::vector<Entry> entries;  // merged, row <= col
  };
  struct Block {
    int size = 0;
    MatrixXd h;
    std::vector<Term> terms;  // sorted by variable
  };

  explicit Operators(const ConicProgram& p) : m_(p.num_vars), c_(p.c), A_(p.E), b_(p.f) {
    for (const auto& lb : p.blocks) {
      Block blk;
      blk.size = lb.size;
      blk.h = lb.constant_matrix();
      for (const auto& [k, es] : lb.coefficients) {
        std::map<std::pair<int, int>, double> merged;
        for (const auto& e : es) merged[{e.row, e.col}] += e.value;
        Term t{k, {}};
        for (const auto& [rc, v] : merged)
          if (v != 0.0) t.entries.push_back({rc.first, rc.second, v});
        if (!t.entries.empty()) blk.terms.push_back(std::move(t));
      }
      blocks_.push_back(std::move(blk));
    }
    if (A_.rows() == 0) A_.resize(0, m_);
    At_ = MatrixXd(A_.transpose());
    h_.reserve(blocks_.size());
    for (const auto& b : blocks_) h_.push_back(b.h);
  }

  int m() const { return m_; }
  int p() const { return static_cast<int>(A_.rows()); }
  const VectorXd& c() const { return c_; }
  const VectorXd& b() const { return b_; }
  const Blocks& h() const { return h_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  int cone_dim() const {
    int d = 0;
    for (const auto& b : blocks_) d += b.size;
    return d;
  }

  Blocks G(const VectorXd& x) const {
    Blocks out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) {
      MatrixXd mtx = MatrixXd::Zero(b.size, b.size);
      for (const auto& t : b.terms) scatter(mtx, t.entries, -x(t.var));
      out.push_back(std::move(mtx));
    }
    return out;
  }

  VectorXd Gt(const Blocks& u) const {
    VectorXd out = VectorXd::Zero(m_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& U = u[bi];
      for (const auto& t : blocks_[bi].terms) {
        double acc = 0.0;
        // Both triangles are read so that <B, U> is exact for slightly asymmetric U.
        for (const auto& e : t.entries)
          acc += e.value * (e.row == e.col ? U(e.row, e.row) : U(e.row, e.col) + U(e.col, e.row));
        out(t.var) -= acc;
      }
    }
    return out;
  }

  VectorXd A(const VectorXd& x) const { return A_ * x; }
  VectorXd At(const VectorXd& y) const { return A_.transpose() * y; }
  const MatrixXd& At_dense() const { return At_; }

  // Adds sum_b tr(B_i V_b B_j V_b) into the upper triangle of H.
  void add_schur(const std::vector<MatrixXd>& V, MatrixXd& H) const {
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      const auto& Vb = V[bi];
      const int s = blk.size;
      MatrixXd T(s, s);
      for (std::size_t j = 0; j < blk.terms.size(); ++j) {
        const auto& tj = blk.terms[j];
        if (static_cast<int>(tj.entries.size()) * 4 <= s) {
          T.setZero();
          auto up = T.selfadjointView<Eigen::Upper>();
          for (const auto& e : tj.entries) {
            if (e.row == e.col) {
              up.rankUpdate(Vb.col(e.row), e.value);
            } else {
              up.rankUpdate(Vb.col(e.row), Vb.col(e.col), e.value);
            }
          }
        } else {
          MatrixXd Bj = MatrixXd::Zero(s, s);
          scatter(Bj, tj.entries, 1.0);
          T.noalias() = Vb * (Bj * Vb);
        }
        for (std::size_t i = 0; i <= j; ++i) {
          const auto& ti = blk.terms[i];
          double acc = 0.0;
          for (const auto& e : ti.entries)
            acc += e.value * (e.row == e.col ? T(e.row, e.row) : 2.0 * T(e.row, e.col));
          H(ti.var, tj.var) += acc;
        }
      }
    }
  }

 private:
  int m_;
  VectorXd c_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> A_;
  MatrixXd At_;
  VectorXd b_;
  std::vector<Block> blocks_;
  Blocks h_;
};

struct Scaling {
  // Per block, rti = r^{-T}: W z = r' z r and W^{-T} s = rti' s rti, both equal to diag(lambda).
  std::vector<MatrixXd> r, rti;
  std::vector<VectorXd> lambda;
};

// lambda o U = (lambda U + U lambda)/2 inverted for diagonal lambda.
MatrixXd lambda_solve(const VectorXd& l, const MatrixXd& V) {
  MatrixXd U(V.rows(), V.cols());
  for (Eigen::Index j = 0; j < V.cols(); ++j)
    for (Eigen::Index i = 0; i < V.rows(); ++i) U(i, j) = 2.0 * V(i, j) / (l(i) + l(j));
  return U;
}

MatrixXd sym_product(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd p = a * b;
  return 0.5 * (p + p.transpose());
}

// Largest alpha with diag(l) + alpha D PSD (infinity when unbounded).
double max_step(const VectorXd& l, const MatrixXd& D) {
  VectorXd is = l.cwiseSqrt().cwiseInverse();
  MatrixXd M = is.asDiagonal() * D * is.asDiagonal();
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const double mn = es.eigenvalues()(0);
  return mn < 0.0 ? -1.0 / mn : std::numeric_limits<double>::infinity();
}

// Nesterov-Todd scaling of one block from s = Ls Ls', z = Lz Lz' and the
// SVD Lz' Ls = U diag(lambda) V'.
bool nt_scaling(const MatrixXd& s, const MatrixXd& z, MatrixXd& r, MatrixXd& rti, VectorXd& lambda) {
  Eigen::LLT<MatrixXd> ls(s), lz(z);
  if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  MatrixXd Ls = ls.matrixL();
  MatrixXd Lz = lz.matrixL();
  Eigen::BDCSVD<MatrixXd> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
  VectorXd sig = svd.singularValues();
  if (!sig.allFinite() || sig.minCoeff() <= 0.0) return false;
  VectorXd isq = sig.cwiseSqrt().cwiseInverse();
  r = Ls * svd.matrixV() * isq.asDiagonal();
  rti = Lz * svd.matrixU() * isq.asDiagonal();
  lambda = sig;
  return true;
}

double min_eig(const MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Factorization of the reduced KKT system [H A'; A 0] with H = G'(W'W)^{-1}G.
// Right-hand sides and refinement work with the scaled operator
// Gs x = rti' (G x) rti, for which H = Gs'Gs.
class Kkt {
 public:
  explicit Kkt(const Operators& ops) : ops_(ops), H_(ops.m(), ops.m()) {}

  bool factor(const Scaling& w) {
    V_.clear();
    for (const auto& R : w.rti) V_.push_back(R * R.transpose());
    rti_ = &w.rti;
    H_.setZero();
    ops_.add_schur(V_, H_);
    const int m = ops_.m();
    d_.resize(m);
    for (int i = 0; i < m; ++i) d_(i) = H_(i, i) > 0.0 ? 1.0 / std::sqrt(H_(i, i)) : 1.0;
    // Equilibrated copy in the strictly lower triangle, original kept in the upper one.
    for (int j = 0; j < m; ++j)
      for (int i = j + 1; i < m; ++i) H_(i, j) = H_(j, i) * d_(i) * d_(j);
    VectorXd diag(m);
    for (int i = 0; i < m; ++i) diag(i) = H_(i, i) * d_(i) * d_(i);
    bool ok = false;
    for (double delta = 0.0; delta <= 1e-6 && !ok; delta = delta == 0.0 ? 1e-13 : delta * 100.0) {
      for (int j = 0; j < m; ++j)
        for (int i = j + 1; i < m; ++i) H_(i, j) = H_(j, i) * d_(i) * d_(j);
      H_.diagonal() = diag.array() + delta;
      // In place: only the lower triangle is overwritten.
      llt_.emplace(H_);
      ok = llt_->info() == Eigen::Success;
    }
    if (!ok) return false;
    if (ops_.p() > 0) {
      Y_ = llt_->matrixL().solve(d_.asDiagonal() * ops_.At_dense());
      MatrixXd S = Y_.transpose() * Y_;
      const double sscale = std::max(1.0, S.diagonal().maxCoeff());
      S.diagonal().array() += 1e-14 * sscale;
      schur_.compute(S);
      if (schur_.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Solves  A'dy + G'dz = r1,  A dx = r2,  G dx - W'W dz = r3  and returns
  // the scaled dual direction W dz.
  void solve(const VectorXd& r1, const VectorXd& r2, const Blocks& r3, VectorXd& dx, VectorXd& dy,
             Blocks& dzs) const {
    const std::size_t nb = r3.size();
    Blocks t3(nb);
    for (std::size_t b = 0; b < nb; ++b) t3[b] = (*rti_)[b].transpose() * r3[b] * (*rti_)[b];
    solve_scaled(r1, r2, t3, dx, dy, dzs);
    double prev = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 3; ++round) {
      VectorXd e1 = r1 - ops_.At(dy) - Gst(dzs);
      VectorXd e2 = r2 - ops_.A(dx);
      Blocks gdx = Gs(dx);
      Blocks e3(nb);
      for (std::size_t b = 0; b < nb; ++b) e3[b] = t3[b] - (gdx[b] - dzs[b]);
      const double res = std::sqrt(e1.squaredNorm() + e2.squaredNorm() + inner(e3, e3));
      if (!(res < 0.5 * prev) || res == 0.0) break;
      prev = res;
      VectorXd cx, cy;
      Blocks czs;
      solve_scaled(e1, e2, e3, cx, cy, czs);
      dx += cx;
      dy += cy;
      for (std::size_t b = 0; b < nb; ++b) dzs[b] += czs[b];
    }
  }

 private:
  Blocks Gs(const VectorXd& x) const {
    Blocks g = ops_.G(x);
    for (std::size_t b = 0; b < g.size(); ++b) g[b] = (*rti_)[b].transpose() * g[b] * (*rti_)[b];
    return g;
  }

  VectorXd Gst(const Blocks& u) const {
    Blocks t(u.size());
    for (std::size_t b = 0; b < u.size(); ++b) t[b] = (*rti_)[b] * u[b] * (*rti_)[b].transpose();
    return ops_.Gt(t);
  }

  VectorXd hsolve(const VectorXd& v) const { return d_.asDiagonal() * llt_->solve(d_.asDiagonal() * v); }

  void solve_scaled(const VectorXd& r1, const VectorXd& r2, const Blocks& t3, VectorXd& dx, VectorXd& dy,
                    Blocks& dzs) const {
    VectorXd q = r1 + Gst(t3);
    if (ops_.p() > 0) {
      VectorXd w = llt_->matrixL().solve(d_.asDiagonal() * q);
      dy = schur_.solve(Y_.transpose() * w - r2);
      dx = hsolve(q - ops_.At(dy));
    } else {
      dy = VectorXd::Zero(0);
      dx = hsolve(q);
    }
    dzs = Gs(dx);
    for (std::size_t b = 0; b < t3.size(); ++b) dzs[b] -= t3[b];
  }

  const Operators& ops_;
  MatrixXd H_;
  VectorXd d_;
  std::optional<Eigen::LLT<Eigen::Ref<MatrixXd>>> llt_;
  MatrixXd Y_;  // L^{-1} D A'
  Eigen::LLT<MatrixXd> schur_;
  std::vector<MatrixXd> V_;
  const std::vector<MatrixXd>* rti_ = nullptr;
};

void check_equality_rank(const ConicProgram& p) {
  if (p.E.rows() == 0) return;
  MatrixXd Et = MatrixXd(p.E.transpose());
  Eigen::ColPivHouseholderQR<MatrixXd> qr(Et);
  qr.setThreshold(1e-10);
  if (qr.rank() < p.E.rows()) {
    throw EqualityRankError("equality constraints are rank deficient: rank " + std::to_string(qr.rank()) +
                            " < " + std::to_string(p.E.rows()) + " rows");
  }
}

}  // namespace

Solution solve(const ConicProgram& prog, const SolveOptions& opts) {
  prog.validate();
  if (prog.blocks.empty()) throw StructuralError("solver needs at least one PSD block");
  check_equality_rank(prog);

  Operators ops(prog);
  const auto& blocks = ops.blocks();
  const std::size_t nb = blocks.size();
  const int dims = ops.cone_dim();
  const double resx0 = std::max(1.0, ops.c().norm());
  const double resy0 = std::max(1.0, ops.b().norm());
  const double resz0 = std::max(1.0, norm(ops.h()));

  Solution sol;
  Kkt kkt(ops);

  // Starting point from two least-squares problems with identity scaling.
  Scaling w;
  for (const auto& b : blocks) {
    w.r.push_back(MatrixXd::Identity(b.size, b.size));
    w.rti.push_back(MatrixXd::Identity(b.size, b.size));
    w.lambda.push_back(VectorXd::Ones(b.size));
  }
  if (!kkt.factor(w)) {
    sol.status = Status::numerical_failure;
    return sol;
  }
  VectorXd x, y, tmp;
  Blocks s, z;
  {
    kkt.solve(VectorXd::Zero(ops.m()), ops.b(), ops.h(), x, tmp, s);
    for (auto& sb : s) sb = -sb;
    Blocks zero(nb);
    for (std::size_t b = 0; b < nb; ++b) zero[b] = MatrixXd::Zero(blocks[b].size, blocks[b].size);
    VectorXd tx;
    kkt.solve(-ops.c(), VectorXd::Zero(ops.p()), zero, tx, y, z);
  }
  auto shift = [&](Blocks& v) {
    double t = -std::numeric_limits<double>::infinity();
    for (const auto& vb : v) t = std::max(t, -min_eig(vb));
    if (t >= -1e-8 * std::max(1.0, norm(v))) {
      for (auto& vb : v) vb.diagonal().array() += 1.0 + t;
    }
  };
  shift(s);
  shift(z);
  double tau = 1.0, kappa = 1.0;

  auto record = [&](double pcost, double dcost, double pres, double dres, double gap_abs, double gap_rel,
                    const Blocks& sc, const Blocks& zc) {
    sol.z = x / tau;
    sol.eq_multipliers = y / tau;
    sol.slack_blocks.clear();
    sol.dual_blocks.clear();
    for (std::size_t b = 0; b < nb; ++b) {
      sol.slack_blocks.push_back(sc[b] / tau);
      sol.dual_blocks.push_back(zc[b] / tau);
    }
    sol.primal_objective = pcost;
    sol.dual_objective = dcost;
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.gap_abs = gap_abs;
    sol.gap_rel = gap_rel;
  };

  sol.status = Status::max_iters;
  for (int it = 0; it <= opts.max_iters; ++it) {
    sol.iterations = it;
    // Scaling recomputed from the iterates; s and z themselves are updated additively.
    bool scaled = true;
    for (std::size_t b = 0; b < nb && scaled; ++b) scaled = nt_scaling(s[b], z[b], w.r[b], w.rti[b], w.lambda[b]);
    if (!scaled) {
      sol.status = Status::numerical_failure;
      break;
    }
    const Blocks& sc = s;
    const Blocks& zc = z;
    const VectorXd hrx = -ops.At(y) - ops.Gt(zc);
    const VectorXd rx = hrx - tau * ops.c();
    const VectorXd hry = ops.A(x);
    const VectorXd ry = hry - tau * ops.b();
    Blocks gx = ops.G(x);
    Blocks hrz(nb), rz(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      hrz[b] = sc[b] + gx[b];
      rz[b] = hrz[b] - tau * ops.h()[b];
    }
    const double cx = ops.c().dot(x);
    const double by = ops.b().dot(y);
    const double hz = inner(ops.h(), zc);
    const double rt = kappa + cx + by + hz;
    double gap = 0.0;
    for (const auto& l : w.lambda) gap += l.squaredNorm();
    const double mu = (gap + tau * kappa) / (dims + 1);

    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    const double pres = std::max(ry.norm() / resy0, norm(rz) / resz0) / tau;
    const double dres = rx.norm() / resx0 / tau;
    const double gap_abs = gap / (tau * tau);
    const double gap_rel = std::abs(pcost - dcost) / std::max(1.0, std::abs(pcost));
    record(pcost, dcost, pres, dres, gap_abs, gap_rel, sc, zc);

    if (opts.verbose) {
      std::cerr << std::setw(3) << it << std::scientific << std::setprecision(3) << "  p " << pcost << "  d "
                << dcost << "  pres " << pres << "  dres " << dres << "  gap " << gap_abs << "  rgap " << gap_rel << "  tau " << tau
                << "  kappa " << kappa << '\n';
    }

    if (pres <= opts.tol_feas && dres <= opts.tol_feas && gap_rel <= opts.tol_gap &&
        gap_abs / std::max(1.0, std::abs(pcost)) <= opts.tol_gap) {
      sol.status = Status::optimal;
      break;
    }
    if (hz + by < 0.0) {
      const double pinfres = hrx.norm() / resx0 / (-(hz + by));
      if (pinfres <= opts.tol_feas) {
        sol.status = Status::infeasible;
        sol.infeasibility = Infeasibility::primal;
        sol.eq_multipliers = y / (-(hz + by));
        for (std::size_t b = 0; b < nb; ++b) sol.dual_blocks[b] = zc[b] / (-(hz + by));
        break;
      }
    }
    if (cx < 0.0) {
      const double dinfres = std::max(hry.norm() / resy0, norm(hrz) / resz0) / (-cx);
      if (dinfres <= opts.tol_feas) {
        sol.status = Status::infeasible;
        sol.infeasibility = Infeasibility::dual;
        sol.z = x / (-cx);
        break;
      }
    }
    if (it == opts.max_iters) break;

    if (!kkt.factor(w)) {
      sol.status = Status::numerical_failure;
      break;
    }
    // Solution of K [x1; y1; z1] = [c; -b; -h], written as minus the current
    // iterate over tau plus a correction whose right-hand side is residual sized.
    Blocks t3(nb);
    for (std::size_t b = 0; b < nb; ++b) t3[b] = (rz[b] - 2.0 * s[b]) / tau;
    VectorXd x1, y1;
    Blocks z1s;
    kkt.solve(-rx / tau, ry / tau, t3, x1, y1, z1s);
    x1 -= x / tau;
    y1 -= y / tau;
    for (std::size_t b = 0; b < nb; ++b) z1s[b].diagonal() -= w.lambda[b] / tau;
    const double z1nrm2 = inner(z1s, z1s);
    Blocks rzs(nb);  // W^{-T} rz
    for (std::size_t b = 0; b < nb; ++b) rzs[b] = w.rti[b].transpose() * rz[b] * w.rti[b];

    VectorXd dx, dy;
    Blocks dss(nb), dzs(nb), dss_a, dzs_a;
    double dtau = 0.0, dkappa = 0.0, dtau_a = 0.0, dkappa_a = 0.0, sigma = 0.0, alpha = 0.0;
    bool failed = false;
    for (int pass = 0; pass < 2; ++pass) {
      const double eta = pass == 0 ? 0.0 : sigma;
      Blocks rhs_s(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        MatrixXd L = w.lambda[b].asDiagonal();
        rhs_s[b] = -(L * L);
        if (pass == 1) {
          rhs_s[b].diagonal().array() += sigma * mu;
          rhs_s[b] -= sym_product(dss_a[b], dzs_a[b]);
        }
      }
      double rhs_k = -tau * kappa;
      if (pass == 1) rhs_k += sigma * mu - dtau_a * dkappa_a;

      Blocks R3(nb), ls(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        ls[b] = lambda_solve(w.lambda[b], rhs_s[b]);
        R3[b] = -(1.0 - eta) * rz[b] - w.r[b] * ls[b] * w.r[b].transpose();
      }
      const VectorXd R1 = (1.0 - eta) * rx;
      const VectorXd R2 = -(1.0 - eta) * ry;
      const double R4 = -(1.0 - eta) * rt - rhs_k / tau;
      VectorXd x2, y2;
      Blocks z2s;
      kkt.solve(R1, R2, R3, x2, y2, z2s);
      // c'x2 + b'y2 + h'z2 rewritten through both KKT solves; every term is
      // residual sized, which avoids cancellation once the gap is small.
      const double lin = y1.dot(R2) - x1.dot(R1) - (1.0 - eta) * inner(z1s, rzs) - inner(z1s, ls) +
                         2.0 * inner(z1s, z2s);
      dtau = (lin - R4) / (z1nrm2 + kappa / tau);
      dx = x2 - dtau * x1;
      dy = y2 - dtau * y1;
      for (std::size_t b = 0; b < nb; ++b) {
        dzs[b] = z2s[b] - dtau * z1s[b];
        dzs[b] = 0.5 * (dzs[b] + dzs[b].transpose()).eval();
        dss[b] = ls[b] - dzs[b];
      }
      dkappa = (rhs_k - kappa * dtau) / tau;
      if (!dx.allFinite() || !std::isfinite(dtau)) {
        failed = true;
        break;
      }

      double amax = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < nb; ++b) {
        amax = std::min(amax, max_step(w.lambda[b], dss[b]));
        amax = std::min(amax, max_step(w.lambda[b], dzs[b]));
      }
      if (dtau < 0.0) amax = std::min(amax, -tau / dtau);
      if (dkappa < 0.0) amax = std::min(amax, -kappa / dkappa);

      if (pass == 0) {
        const double a = std::min(1.0, amax);
        sigma = std::pow(1.0 - a, 3);
        dss_a = dss;
        dzs_a = dzs;
        dtau_a = dtau;
        dkappa_a = dkappa;
      } else {
        alpha = std::min(1.0, opts.step_fraction * amax);
      }
    }
    if (failed) {
      sol.status = Status::numerical_failure;
      break;
    }

    x += alpha * dx;
    y += alpha * dy;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    for (std::size_t b = 0; b < nb; ++b) {
      s[b] += alpha * (w.r[b] * dss[b] * w.r[b].transpose());
      z[b] += alpha * (w.rti[b] * dzs[b] * w.rti[b].transpose());
      s[b] = 0.5 * (s[b] + s[b].transpose()).eval();
      z[b] = 0.5 * (z[b] + z[b].transpose()).eval();
    }
  }
  return sol;
}

CertificationReport certify(const ConicProgram& p, const Solution& s, double tol) {
  CertificationReport rep;
  if (s.status != Status::optimal) {
    rep.refused = true;
    return rep;
  }
  const VectorXd& z = s.z;
  const double fn = std::max(1.0, p.f.norm());
  rep.primal_residual = p.E.rows() > 0 ? (p.E * z - p.f).norm() / fn : 0.0;

  VectorXd dual_res = p.c;
  if (p.E.rows() > 0) dual_res += p.E.transpose() * s.eq_multipliers;
  double complementarity = 0.0, b0y = 0.0;
  double worst_primal = std::numeric_limits<double>::infinity();
  double worst_dual = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const auto& blk = p.blocks[b];
    const MatrixXd S = blk.evaluate(z);
    const MatrixXd& Y = s.dual_blocks.at(b);
    worst_primal = std::min(worst_primal, min_eig(S) / (1.0 + S.norm()));
    worst_dual = std::min(worst_dual, min_eig(Y) / (1.0 + Y.norm()));
    complementarity += S.cwiseProduct(Y).sum();
    b0y += blk.constant_matrix().cwiseProduct(Y).sum();
    for (const auto& [k, es] : blk.coefficients) {
      double acc = 0.0;
      for (const auto& e : es) acc += e.value * (e.row == e.col ? Y(e.row, e.row) : 2.0 * Y(e.row, e.col));
      dual_res(k) -= acc;
    }
  }
  rep.dual_residual = dual_res.norm() / std::max(1.0, p.c.norm());
  rep.min_block_eig = worst_primal;
  rep.min_dual_block_eig = worst_dual;
  rep.complementarity = complementarity;
  rep.primal_objective = p.c.dot(z);
  rep.dual_objective = -b0y - (p.E.rows() > 0 ? p.f.dot(s.eq_multipliers) : 0.0);
  rep.gap_rel = std::abs(rep.primal_objective - rep.dual_objective) / std::max(1.0, std::abs(rep.primal_objective));
  rep.primal_feasible = rep.primal_residual <= tol && rep.min_block_eig >= -tol;
  rep.dual_feasible = rep.dual_residual <= tol && rep.min_dual_block_eig >= -tol;
  rep.weak_duality = rep.dual_objective <= rep.primal_objective + tol * std::max(1.0, std::abs(rep.primal_objective));
  rep.gap_ok = rep.gap_rel <= tol;
  return rep;
}

}  // namespace cgrelax::sdp
