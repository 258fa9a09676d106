#pragma once

// End-to-end runs over relaxation orders, the truncation-radius schedule,
// extraction, verification suites and the report formats used by the CLI.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgrelax/envelope.hpp"
#include "cgrelax/extract.hpp"
#include "cgrelax/moments.hpp"

namespace cgrelax {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  std::vector<int> orders;  // overrides the spec when non-empty
  std::optional<double> R;  // fixed radius, overrides the spec
  bool R_auto = false;      // force the doubling schedule
  std::optional<int> extract_degree;
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  unsigned seed = 0;
  int max_doublings = 12;
  double R_rel_change = 1e-5;
  int quadrature_cells = 80;
  bool extract = true;
  bool parallel_orders = false;
  EnvelopeMethod method = EnvelopeMethod::automatic;
  std::function<void(const std::string&)> log;
};

struct RadiusStep {
  double R = 0.0;
  double J = 0.0;
  sdp::Status status = sdp::Status::numerical_failure;
  int iterations = 0;
  double seconds = 0.0;
};

struct OrderRecord {
  int r = 0;
  double R = 0.0;
  double J = 0.0;
  sdp::Status status = sdp::Status::numerical_failure;
  int iterations = 0;
  double seconds = 0.0;
  int equalities = 0;
  int num_moments = 0;
  bool R_converged = false;
  std::vector<RadiusStep> schedule;
  sdp::CertificationReport certificate;
  // extraction; empty when skipped or failed
  int extract_degree = 0;
  std::optional<double> barycentric_value;
  std::optional<double> boundary_trace_error;
  std::string extraction_error;
  std::optional<DeformationField> field;
  sdp::ConicProgram program;  // at the final radius, for dumps
};

struct EnvelopeCheck {
  Eigen::MatrixXd A;
  double value = 0.0;  // |Omega| W_quasi(A)
  std::string method;
};

struct RunReport {
  ProblemSpec spec;
  RunOptions options;
  std::vector<OrderRecord> orders;
  std::optional<EnvelopeCheck> envelope;
  bool monotone = true;
  std::vector<std::string> warnings;
  std::string started;
  std::string finished;

  bool all_optimal() const;
};

/// Envelope oracle matching the energy: spectral formula for the Frobenius well, projection otherwise.
EnvelopeOracle make_oracle(const EnergyDensity& e, EnvelopeMethod m = EnvelopeMethod::automatic);

/// Solves order r at a fixed radius, or runs the doubling schedule when `fixed` is empty.
OrderRecord solve_order(const ProblemSpec& spec, int r, std::optional<double> fixed, const RunOptions& opts);

RunReport run_hierarchy(const ProblemSpec& spec, const RunOptions& opts);

nlohmann::json report_to_json(const RunReport& report, bool include_timing = true);

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_deviation = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  std::optional<std::string> configuration_error;
  bool passed() const;
};

/// Frame indifference, SOS convexity of the strain energy, the occupation-moment oracle
/// and certification of the first relaxation.
VerifyReport verify_problem(const ProblemSpec& spec, unsigned seed = 0, int deformations = 20);

nlohmann::json verify_to_json(const VerifyReport& v);

/// Oblique projection of the (s1, s2, W) and (s1, s2, Wquasi) surfaces.
std::string surface_svg(const std::vector<SurfaceRow>& rows);

std::string iso_timestamp();

}  // namespace cgrelax
