#pragma once

// Order-r moment relaxation of the occupation-measure problem.
//
// Moments are taken against mu / |Omega| in scaled variables
//   x = c + h * xs,   y = s * ys,   Z = s * Zs,
// so the relaxation value is |Omega| * l(W).

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <string>
#include <unordered_map>
#include <vector>

#include "cgrelax/problem.hpp"
#include "cgrelax/sdp.hpp"

namespace cgrelax {

struct MonomialBasis {
  VariableSpace space;
  int order = 0;
  std::vector<MultiIndex> entries;  // graded lex, degree <= 2 order
  std::unordered_map<MultiIndex, int, MultiIndexHash> index;

  std::size_t size() const { return entries.size(); }
  /// Number of monomials of degree <= d (a prefix of entries).
  std::size_t prefix(int d) const;
  int find(const MultiIndex& m) const {
    auto it = index.find(m);
    return it == index.end() ? -1 : it->second;
  }
  int at(const MultiIndex& m) const;
};

MonomialBasis build_basis(VariableSpace space, int r);

struct Scaling {
  Eigen::VectorXd center;  // c
  Eigen::VectorXd half;    // h
  double s = 1.0;          // (y, Z) scale

  static Scaling identity(std::size_t n);
  /// Maps the box to [-1, 1]^n and (y, Z) by 1 / radius.
  static Scaling for_box(const Box& box, double radius);

  Box scaled_box(const Box& box) const;
  /// Rewrites p(x, y, Z) in the scaled variables.
  Poly to_scaled(const Poly& p) const;
  /// Rewrites a polynomial in the scaled variables back in (x, y, Z).
  Poly from_scaled(const Poly& p) const;
};

/// D phi = sum_i (w_i d phi_i / dx_i + sum_j d phi_i / dy_j Z_ji); w defaults to ones.
Poly divergence(const std::vector<Poly>& phi, const Eigen::VectorXd& x_weights = {});

/// int_{dOmega} phi(x, y_d(x)) . n dsigma over the box.
double boundary_functional(const std::vector<Poly>& phi, const std::vector<Poly>& boundary, const Box& box);

struct SparseRow {
  std::vector<std::pair<int, double>> entries;  // (moment index, coefficient)
  double rhs = 0.0;
};

/// l(p) as a sparse row over the basis.
SparseRow moment_row(const Poly& p, const MonomialBasis& basis);

/// Localizing matrix of g: entry (a, b) = l(g m_a m_b) for half-basis monomials of degree <= r - ceil(deg g / 2).
sdp::LmiBlock localizing_structure(const Poly& g, const MonomialBasis& basis, int r);

struct MomentRelaxation {
  MonomialBasis basis;
  Scaling scaling;
  double radius = 0.0;
  double volume = 1.0;
  int r = 0;
  int r_min = 0;
  std::vector<std::string> block_names;
  std::vector<sdp::LmiBlock> blocks;
  std::vector<SparseRow> stokes;  // test-field and marginal rows, before deduplication
  Eigen::VectorXd objective;      // l(W) in scaled moments
  Poly scaled_energy;

  /// |Omega| * l(W) for a scaled moment vector.
  double value(const Eigen::VectorXd& z) const { return volume * objective.dot(z); }
};

int minimal_order(const ProblemSpec& spec);

/// Test-field rows for phi = b(x, y) e_i with deg b <= 2r - 1, expressed in scaled moments.
std::vector<SparseRow> stokes_rows(const ProblemSpec& spec, const MonomialBasis& basis, const Scaling& scaling, int r);

/// Pure-x moments of degree 2r-1 and 2r fixed to their Lebesgue values. These come from
/// y-free test fields of degree 2r and 2r+1, whose divergence still has degree <= 2r.
std::vector<SparseRow> marginal_rows(const ProblemSpec& spec, const MonomialBasis& basis, const Scaling& scaling, int r);

/// Throws ValidationError when r < r_min.
MomentRelaxation assemble_relaxation(const ProblemSpec& spec, int r, double radius);

struct DedupResult {
  std::vector<int> kept;        // indices of an independent subset of rows
  double inconsistency = 0.0;   // residual of the dropped right-hand sides
  int rank = 0;
};
/// Rank-revealing QR on the row set; threshold relative to the largest pivot.
DedupResult deduplicate_rows(const std::vector<SparseRow>& rows, int num_cols, double threshold = 1e-10);

struct ConicRelaxation {
  sdp::ConicProgram program;
  double objective_scale = 1.0;  // program objective = l(W) / objective_scale
  DedupResult dedup;
};
ConicRelaxation to_conic_program(const MomentRelaxation& relax);

struct RelaxationSolution {
  MomentRelaxation relax;
  ConicRelaxation conic;
  sdp::Solution solution;
  double value = 0.0;  // J_mom in original units
  double seconds = 0.0;
};

/// Assembles, deduplicates and solves one order at one radius.
RelaxationSolution solve_relaxation(const ProblemSpec& spec, int r, double radius, const sdp::SolveOptions& opts = {});

/// Scaled moments of the occupation measure of x -> (x, y(x), grad y(x)).
Eigen::VectorXd occupation_moments(const std::vector<Poly>& y, const Box& box, const MonomialBasis& basis,
                                   const Scaling& scaling);

}  // namespace cgrelax
