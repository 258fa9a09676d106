#pragma once

// Problem description: box domain, polynomial boundary deformation, energy, truncation.

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgrelax/energy.hpp"
#include "cgrelax/poly.hpp"

namespace cgrelax {

struct ProblemSpec {
  std::string name;
  std::size_t n = 2;
  Box box;
  EnergyDensity energy;
  std::vector<Poly> boundary;  // y_d(x), elasticity space, x block only
  std::optional<double> R;     // empty: automatic schedule
  std::vector<int> orders;

  VariableSpace space() const { return VariableSpace::elasticity(n); }
  /// Throws ValidationError on inconsistent data.
  void validate() const;
  /// Throws ValidationError when a fixed R does not exceed sup |y_d| over the boundary.
  void check_radius() const;
};

/// y = A x + b as boundary polynomials.
std::vector<Poly> affine_boundary(const Eigen::MatrixXd& A, const Eigen::VectorXd& b = {});

/// max |y_d| over the box boundary, sampled on a dense facet grid.
double boundary_sup(const ProblemSpec& spec, int samples_per_edge = 401);

/// (1/|Omega|) int_{dOmega} y_d (x) n dsigma; equals A for y_d = A x.
Eigen::MatrixXd mean_boundary_gradient(const ProblemSpec& spec);

/// Starting truncation radius 4 (1 + sup|y_d| + |mean gradient|_F).
double initial_radius(const ProblemSpec& spec);

nlohmann::json problem_to_json(const ProblemSpec& spec);
/// require_definite = false admits indefinite stiffness so that verify can report it.
ProblemSpec problem_from_json(const nlohmann::json& j, bool require_definite = true);
ProblemSpec load_problem(const std::string& path, bool require_definite = true);

}  // namespace cgrelax
