#pragma once

// Stored-energy densities W(F) = Wt(F'F) with Wt a polynomial in the
// Cauchy-Green strain, and the sampling checks that go with them.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgrelax/poly.hpp"

namespace cgrelax {

/// Voigt stiffness for W = a' D a with a = (X_11, .., X_nn, 2 X_ij (i < j)), X = C - I.
/// Off-diagonal slots follow the strain coordinate order of VariableSpace::strain.
struct StiffnessForm {
  Eigen::MatrixXd D;
  std::optional<double> lam;
  std::optional<double> mu;

  std::optional<double> nu() const {
    if (!lam || !mu) return std::nullopt;
    return *lam / (2.0 * (*lam + *mu));
  }
};

/// Isotropic stiffness built from Lame parameters (n = 2).
StiffnessForm isotropic_stiffness(double lam, double mu);

enum class EnergyKind : std::uint8_t { svk, anisotropic, custom };

struct EnergyDensity {
  std::size_t n = 2;
  EnergyKind kind = EnergyKind::custom;
  Poly wtilde;  // strain space
  Poly w;       // elasticity space, Z block only
  int p_growth = 0;
  std::optional<double> lam;  // svk only
  std::optional<double> mu;
  std::optional<StiffnessForm> stiffness;

  /// W(F) for an n x n matrix F.
  double operator()(const Eigen::MatrixXd& F) const;
  /// Wt(C) for a symmetric n x n matrix C.
  double strain_value(const Eigen::MatrixXd& C) const;
};

/// Wt composed with C := Z'Z, as a polynomial over the elasticity space.
Poly compose_with_cauchy_green(const Poly& wtilde, std::size_t n);

/// Strain coordinate vector of a symmetric matrix.
Eigen::VectorXd strain_coordinates(const Eigen::MatrixXd& C);
/// Elasticity-space point with x = y = 0 and Z = F.
Eigen::VectorXd gradient_point(const Eigen::MatrixXd& F);

EnergyDensity custom_energy(const Poly& wtilde);
EnergyDensity svk_energy(double lam, double mu, std::size_t n = 2);
EnergyDensity anisotropic_energy(const StiffnessForm& form, bool require_definite = true);

std::string to_string(EnergyKind k);
nlohmann::json energy_to_json(const EnergyDensity& e);
EnergyDensity energy_from_json(const nlohmann::json& j, bool require_definite = true);

struct FrameReport {
  int trials = 0;
  double max_deviation = 0.0;  // |w(RF) - w(F)| / (1 + |w(F)|)
  bool passed = false;
};
FrameReport check_frame_indifference(const Poly& w, std::size_t n, int trials, std::uint64_t seed);
FrameReport check_frame_indifference(const EnergyDensity& e, int trials, std::uint64_t seed);

using PolyMatrix = std::vector<std::vector<Poly>>;
PolyMatrix hessian(const Poly& f);

enum class SosStatus : std::uint8_t { certified, refuted, indeterminate };
std::string to_string(SosStatus s);

struct SosCertificate {
  SosStatus status = SosStatus::indeterminate;
  bool constant_hessian = false;
  double min_eigenvalue = 0.0;  // of the constant Hessian, or of the Gram matrix
  Eigen::MatrixXd factor;       // H = V diag(ev) V' columns scaled, or a Gram factor L with Q = L L'
  std::vector<MultiIndex> gram_basis;  // (v, C) monomials indexing the Gram matrix
  std::string detail;
};
SosCertificate check_sos_convexity(const Poly& wtilde);

struct GrowthReport {
  int p = 0;
  std::vector<double> radii;
  std::vector<double> inf_ratio;  // per radius, min W / |F|^p
  std::vector<double> sup_ratio;  // per radius, max W / max(1, |F|^p)
  double c1 = 0.0;
  double c2 = 0.0;
  bool degenerate = false;  // lower constant collapses with the radius
  bool passed = false;
};
GrowthReport check_growth(const EnergyDensity& e, int samples, const std::vector<double>& radii, std::uint64_t seed);

}  // namespace cgrelax
