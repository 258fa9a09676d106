#pragma once

// Pointwise quasiconvex envelopes W_quasi(F) = inf_{P >= 0} Wt(F'F + P).

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cgrelax/energy.hpp"
#include "cgrelax/sdp.hpp"

namespace cgrelax {

struct EnvelopeOptions {
  double tol = 1e-9;
  int max_iters = 200;
};

struct EnvelopeResult {
  double value = 0.0;
  Eigen::MatrixXd P_star;
  sdp::Status status = sdp::Status::numerical_failure;
  int iterations = 0;
  bool lifted = true;  // Schur lift (quadratic Wt) or moment relaxation (SOS-convex Wt)
};

/// The projection program at strain C. Variables are the strain coordinates
/// of P followed by the epigraph variable(s); `offset` is the constant part of the objective.
struct ProjectionProgram {
  sdp::ConicProgram program;
  double offset = 0.0;
  bool lifted = true;
};
ProjectionProgram projection_program(const Eigen::MatrixXd& C, const EnergyDensity& e);

EnvelopeResult project_envelope_strain(const Eigen::MatrixXd& C, const EnergyDensity& e,
                                       const EnvelopeOptions& opts = {});
EnvelopeResult project_envelope(const Eigen::MatrixXd& F, const EnergyDensity& e, const EnvelopeOptions& opts = {});

/// Closed form for Wt(C) = |C - I|^2: sum of max(s_i^2 - 1, 0)^2.
double spectral_truncation_envelope(const Eigen::MatrixXd& F);

/// True when the density is exactly |C - I|^2 (zero-Poisson svk with mu = 4).
bool is_frobenius_well(const EnergyDensity& e);

enum class EnvelopeMethod { automatic, spectral, projection };
EnvelopeMethod parse_envelope_method(const std::string& s);

/// Envelope value with the requested method; automatic prefers the closed form when it applies.
double quasiconvex_envelope(const Eigen::MatrixXd& F, const EnergyDensity& e, EnvelopeMethod m = EnvelopeMethod::automatic);

struct GridAxis {
  double lo = 0.0;
  double hi = 2.0;
  int steps = 21;  // sample count, endpoints included
  double at(int i) const { return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1); }
};

/// Parses "s1:lo:hi:steps,s2:lo:hi:steps".
std::pair<GridAxis, GridAxis> parse_grid(const std::string& text);

struct SurfaceRow {
  double s1 = 0.0;
  double s2 = 0.0;
  double W = 0.0;
  double Wquasi = 0.0;
};

std::vector<SurfaceRow> envelope_surface(const GridAxis& a1, const GridAxis& a2, const EnergyDensity& e,
                                         EnvelopeMethod m = EnvelopeMethod::automatic);
void write_surface_csv(std::ostream& os, const std::vector<SurfaceRow>& rows);

}  // namespace cgrelax
