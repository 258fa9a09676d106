#pragma once

// Linear-matrix-inequality semidefinite programs
//
//   minimize    c'z
//   subject to  B0 + sum_k z_k B_k  PSD   (one such affine map per block)
//               E z = f
//
// solved by a primal-dual interior-point method on the homogeneous
// self-dual embedding with Nesterov-Todd scaling and Mehrotra correction.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cgrelax/errors.hpp"

namespace cgrelax::sdp {

/// Upper-triangle entry (row <= col) of a symmetric coefficient matrix.
/// Off-diagonal entries stand for both (row, col) and (col, row).
struct Entry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Affine symmetric-matrix map z -> B0 + sum_k z_k B_k of fixed side `size`.
struct LmiBlock {
  int size = 0;
  std::vector<Entry> constant;
  std::map<int, std::vector<Entry>> coefficients;  // variable -> entries of B_k

  explicit LmiBlock(int side = 0) : size(side) {}

  /// Adds value at (i, j) of B_var; var < 0 targets B0. Duplicates accumulate.
  void add(int var, int i, int j, double value);

  Eigen::MatrixXd constant_matrix() const;
  Eigen::MatrixXd coefficient_matrix(int var) const;
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& z) const;
};

struct ConicProgram {
  int num_vars = 0;
  Eigen::VectorXd c;
  std::vector<LmiBlock> blocks;
  Eigen::SparseMatrix<double, Eigen::RowMajor> E;
  Eigen::VectorXd f;

  int num_equalities() const { return static_cast<int>(E.rows()); }
  /// Throws StructuralError when dimensions or entries are inconsistent.
  void validate() const;
  double objective(const Eigen::VectorXd& z) const { return c.dot(z); }
};

enum class Status { optimal, infeasible, max_iters, numerical_failure };

/// Which side the infeasibility certificate concerns.
enum class Infeasibility { none, primal, dual };

std::string to_string(Status s);

struct SolveOptions {
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  int max_iters = 200;
  double step_fraction = 0.99;
  unsigned seed = 0;  // accepted for interface symmetry; the method is deterministic
  bool verbose = false;
};

struct Solution {
  Status status = Status::numerical_failure;
  Infeasibility infeasibility = Infeasibility::none;
  Eigen::VectorXd z;
  std::vector<Eigen::MatrixXd> slack_blocks;  // B0 + sum z_k B_k as tracked by the solver
  std::vector<Eigen::MatrixXd> dual_blocks;   // Y_b >= 0 with c_k = sum_b <B_k, Y_b> - (E'y)_k
  Eigen::VectorXd eq_multipliers;             // y
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap_abs = 0.0;
  double gap_rel = 0.0;
  int iterations = 0;
};

/// Equality rows were not linearly independent.
class EqualityRankError : public SolverError {
 public:
  using SolverError::SolverError;
};

Solution solve(const ConicProgram& p, const SolveOptions& opts = {});

/// Independent re-evaluation of a solution against the program data.
struct CertificationReport {
  bool refused = false;  // solution was not reported optimal
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double min_block_eig = 0.0;       // most negative eigenvalue over B(z), relative to 1 + |B(z)|
  double min_dual_block_eig = 0.0;  // same for the dual matrices
  double complementarity = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap_rel = 0.0;
  bool primal_feasible = false;
  bool dual_feasible = false;
  bool weak_duality = false;
  bool gap_ok = false;
  bool certified() const { return !refused && primal_feasible && dual_feasible && weak_duality && gap_ok; }
};

CertificationReport certify(const ConicProgram& p, const Solution& s, double tol = 1e-7);

/// Sparse text exchange format; see README for the grammar.
void write_text(std::ostream& os, const ConicProgram& p);
ConicProgram read_text(std::istream& is);

}  // namespace cgrelax::sdp
