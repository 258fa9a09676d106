#include "cgrelax/pipeline.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <future>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

namespace cgrelax {

bool RunReport::all_optimal() const {
  return std::all_of(orders.begin(), orders.end(), [](const OrderRecord& o) { return o.status == sdp::Status::optimal; });
}

bool VerifyReport::passed() const {
  return !configuration_error &&
         std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string iso_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

EnvelopeOracle make_oracle(const EnergyDensity& e, EnvelopeMethod m) {
  if (m == EnvelopeMethod::automatic) m = is_frobenius_well(e) ? EnvelopeMethod::spectral : EnvelopeMethod::projection;
  if (m == EnvelopeMethod::spectral) {
    if (!is_frobenius_well(e)) {
      throw ValidationError("spectral truncation applies only to |F'F - I|^2; use --method projection");
    }
    return [](const Eigen::MatrixXd& F) { return spectral_truncation_envelope(F); };
  }
  return [e](const Eigen::MatrixXd& F) {
    const auto r = project_envelope(F, e);
    if (r.status != sdp::Status::optimal) throw SolverError("envelope projection: " + sdp::to_string(r.status));
    return r.value;
  };
}

namespace {

sdp::SolveOptions solver_options(const RunOptions& opts) {
  sdp::SolveOptions o;
  o.tol_feas = opts.tol_feas;
  o.tol_gap = opts.tol_gap;
  o.seed = opts.seed;
  return o;
}

void log(const RunOptions& opts, const std::string& msg) {
  static std::mutex mu;
  if (!opts.log) return;
  std::lock_guard<std::mutex> lock(mu);
  opts.log(msg);
}

std::string fmt(double v, int prec = 10) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

bool boundary_is_affine(const ProblemSpec& spec) {
  return std::all_of(spec.boundary.begin(), spec.boundary.end(), [](const Poly& p) { return p.degree() <= 1; });
}

}  // namespace

OrderRecord solve_order(const ProblemSpec& spec, int r, std::optional<double> fixed, const RunOptions& opts) {
  OrderRecord rec;
  rec.r = r;
  const auto sopts = solver_options(opts);
  double R = fixed ? *fixed : initial_radius(spec);
  std::optional<RelaxationSolution> last;
  for (int k = 0;; ++k) {
    auto sol = solve_relaxation(spec, r, R, sopts);
    RadiusStep step{R, sol.value, sol.solution.status, sol.solution.iterations, sol.seconds};
    rec.schedule.push_back(step);
    log(opts, "r=" + std::to_string(r) + " R=" + fmt(R, 6) + " J=" + fmt(sol.value) + " " +
                  sdp::to_string(step.status) + " (" + std::to_string(step.iterations) + " its, " + fmt(step.seconds, 3) +
                  " s)");
    const bool ok = step.status == sdp::Status::optimal;
    const bool have_prev = rec.schedule.size() >= 2 && rec.schedule[rec.schedule.size() - 2].status == sdp::Status::optimal;
    if (ok && have_prev) {
      const double prev = rec.schedule[rec.schedule.size() - 2].J;
      rec.R_converged = std::abs(sol.value - prev) <= opts.R_rel_change * std::max(1.0, std::abs(sol.value));
    }
    // keep the previous optimal solve if the larger radius broke down
    if (!ok && last && last->solution.status == sdp::Status::optimal) break;
    last = std::move(sol);
    if (fixed || !ok || rec.R_converged || k >= opts.max_doublings) break;
    R *= 2.0;
  }
  const auto& s = *last;
  rec.R = s.relax.radius;
  rec.J = s.value;
  rec.status = s.solution.status;
  rec.iterations = s.solution.iterations;
  for (const auto& st : rec.schedule) rec.seconds += st.seconds;
  rec.equalities = s.conic.program.num_equalities();
  rec.num_moments = s.conic.program.num_vars;
  rec.certificate = sdp::certify(s.conic.program, s.solution);
  rec.program = s.conic.program;
  if (!fixed && !rec.R_converged) {
    log(opts, "r=" + std::to_string(r) + ": radius schedule stopped before the relative change fell below " +
                  fmt(opts.R_rel_change, 3));
  }

  if (opts.extract && rec.status == sdp::Status::optimal) {
    rec.extract_degree = opts.extract_degree.value_or(r);
    try {
      auto field = barycenter(s.solution.z, s.relax, rec.extract_degree);
      const auto oracle = make_oracle(spec.energy, opts.method);
      rec.barycentric_value = quasiconvex_objective(field, oracle, opts.quadrature_cells);
      rec.boundary_trace_error = boundary_trace_error(field, spec.boundary);
      rec.field = std::move(field);
    } catch (const SolverError& e) {
      rec.extraction_error = e.what();
    }
  }
  return rec;
}

RunReport run_hierarchy(const ProblemSpec& spec, const RunOptions& opts) {
  RunReport rep;
  rep.spec = spec;
  rep.options = opts;
  rep.started = iso_timestamp();
  spec.validate();

  auto orders = opts.orders.empty() ? spec.orders : opts.orders;
  if (orders.empty()) orders = {minimal_order(spec)};
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
  const int rmin = minimal_order(spec);
  for (int r : orders) {
    if (r < rmin) {
      throw ValidationError("relaxation order " + std::to_string(r) + " is below r_min = " + std::to_string(rmin));
    }
    if (opts.extract && opts.extract_degree && *opts.extract_degree > r) {
      throw ValidationError("extraction degree " + std::to_string(*opts.extract_degree) + " exceeds the relaxation order " +
                            std::to_string(r));
    }
  }
  std::optional<double> fixed = opts.R ? opts.R : spec.R;
  if (opts.R_auto) fixed.reset();
  if (fixed) {
    ProblemSpec probe = spec;
    probe.R = fixed;
    probe.check_radius();
  }

  if (opts.parallel_orders && orders.size() > 1) {
    std::vector<std::future<OrderRecord>> jobs;
    for (int r : orders) jobs.push_back(std::async(std::launch::async, [&, r] { return solve_order(spec, r, fixed, opts); }));
    for (auto& j : jobs) rep.orders.push_back(j.get());
  } else {
    for (int r : orders) rep.orders.push_back(solve_order(spec, r, fixed, opts));
  }

  for (std::size_t k = 1; k < rep.orders.size(); ++k) {
    const auto& a = rep.orders[k - 1];
    const auto& b = rep.orders[k];
    if (a.status != sdp::Status::optimal || b.status != sdp::Status::optimal) continue;
    if (b.J < a.J - 1e-6 * (1.0 + std::abs(a.J))) {
      rep.monotone = false;
      rep.warnings.push_back("J_mom decreased from r=" + std::to_string(a.r) + " (" + fmt(a.J) + ") to r=" +
                             std::to_string(b.r) + " (" + fmt(b.J) + ")");
    }
  }
  for (const auto& o : rep.orders) {
    if (!fixed && !o.R_converged) {
      rep.warnings.push_back("radius schedule for r=" + std::to_string(o.r) + " did not settle within " +
                             std::to_string(opts.max_doublings) + " doublings");
    }
    if (o.status == sdp::Status::optimal && !o.certificate.certified()) {
      rep.warnings.push_back("solution at r=" + std::to_string(o.r) + " did not pass independent certification");
    }
  }

  if (boundary_is_affine(spec)) {
    EnvelopeCheck ec;
    ec.A = mean_boundary_gradient(spec);
    const bool well = is_frobenius_well(spec.energy);
    ec.method = well ? "spectral" : "projection";
    ec.value = box_volume(spec.box) * make_oracle(spec.energy)(ec.A);
    rep.envelope = ec;
  }
  rep.finished = iso_timestamp();
  return rep;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json number_or_null(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

}  // namespace

nlohmann::json report_to_json(const RunReport& rep, bool include_timing) {
  nlohmann::json j;
  j["tool"] = {{"name", "cgrelax"}, {"version", kVersion}};
  j["seed"] = rep.options.seed;
  if (include_timing) {
    j["started"] = rep.started;
    j["finished"] = rep.finished;
  }
  j["spec"] = problem_to_json(rep.spec);
  j["options"] = {{"tol_feas", rep.options.tol_feas},
                  {"tol_gap", rep.options.tol_gap},
                  {"R_auto", !(rep.options.R || rep.spec.R) || rep.options.R_auto},
                  {"R_rel_change", rep.options.R_rel_change},
                  {"max_doublings", rep.options.max_doublings},
                  {"quadrature_cells", rep.options.quadrature_cells}};
  auto orders = nlohmann::json::array();
  for (const auto& o : rep.orders) {
    nlohmann::json oj;
    oj["r"] = o.r;
    oj["R"] = o.R;
    oj["J_mom"] = o.J;
    oj["status"] = sdp::to_string(o.status);
    oj["iterations"] = o.iterations;
    if (include_timing) oj["wall_time"] = o.seconds;
    oj["moments"] = o.num_moments;
    oj["equalities"] = o.equalities;
    oj["R_converged"] = o.R_converged;
    auto sched = nlohmann::json::array();
    for (const auto& s : o.schedule) {
      nlohmann::json sj{{"R", s.R}, {"J", s.J}, {"status", sdp::to_string(s.status)}, {"iterations", s.iterations}};
      if (include_timing) sj["wall_time"] = s.seconds;
      sched.push_back(sj);
    }
    oj["R_schedule"] = sched;
    const auto& c = o.certificate;
    oj["certification"] = {{"certified", c.certified()},
                           {"primal_residual", c.primal_residual},
                           {"dual_residual", c.dual_residual},
                           {"gap_rel", c.gap_rel},
                           {"min_block_eig", c.min_block_eig}};
    nlohmann::json ex;
    ex["degree"] = o.extract_degree;
    ex["barycentric_value"] = number_or_null(o.barycentric_value);
    ex["boundary_trace_error"] = number_or_null(o.boundary_trace_error);
    if (!o.extraction_error.empty()) ex["error"] = o.extraction_error;
    oj["extraction"] = ex;
    if (o.barycentric_value) {
      oj["objective"] = objective_report_json({o.r, o.J, *o.barycentric_value, o.boundary_trace_error.value_or(0.0)});
    }
    orders.push_back(oj);
  }
  j["orders"] = orders;
  if (rep.envelope) {
    j["envelope_check"] = {{"A", matrix_json(rep.envelope->A)},
                           {"value", rep.envelope->value},
                           {"method", rep.envelope->method}};
  } else {
    j["envelope_check"] = nullptr;
  }
  j["monotone"] = rep.monotone;
  j["warnings"] = rep.warnings;
  return j;
}

namespace {

double field_size(const std::vector<Poly>& y, const Box& box, int k) {
  const auto& sp = y[0].space();
  const std::size_t n = sp.dimension();
  std::vector<std::vector<Poly>> dy(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) dy[j].push_back(differentiate(y[j], i));
  double best = 0.0;
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.arity()));
  std::vector<int> idx(n, 0);
  while (true) {
    for (std::size_t a = 0; a < n; ++a)
      pt(static_cast<Eigen::Index>(a)) = box[a].lo + box[a].width() * idx[a] / (k - 1.0);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s += std::pow(evaluate(y[j], pt), 2);
      for (std::size_t i = 0; i < n; ++i) s += std::pow(evaluate(dy[j][i], pt), 2);
    }
    best = std::max(best, s);
    std::size_t a = 0;
    for (; a < n; ++a) {
      if (++idx[a] < k) break;
      idx[a] = 0;
    }
    if (a == n) break;
  }
  return best;
}

}  // namespace

VerifyReport verify_problem(const ProblemSpec& spec, unsigned seed, int deformations) {
  VerifyReport v;
  spec.validate();

  {
    const auto fr = check_frame_indifference(spec.energy, 200, seed);
    v.checks.push_back({"frame_indifference", fr.passed, fr.max_deviation, "200 random rotations"});
  }
  {
    const auto sos = check_sos_convexity(spec.energy.wtilde);
    CheckResult c{"sos_convexity", sos.status == SosStatus::certified, sos.min_eigenvalue, sos.detail};
    v.checks.push_back(c);
  }

  const double sup = boundary_sup(spec);
  const double R = spec.R.value_or(initial_radius(spec));
  if (!(R > sup)) {
    v.configuration_error = "truncation radius " + fmt(R, 6) + " does not exceed sup|y_d| = " + fmt(sup, 6) +
                            " on the boundary; the relaxation cannot be feasible";
  }
  v.checks.push_back({"radius", R > sup, sup, "R = " + fmt(R, 6) + ", sup|y_d| = " + fmt(sup, 6)});

  const int r = minimal_order(spec);
  const auto rel = assemble_relaxation(spec, r, R);
  if (!v.configuration_error) {
    // random deformations with the boundary trace, shrunk until they fit in the ball of radius R
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto sp = spec.space();
    Poly bubble = Poly::constant(sp, 1.0);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const auto xi = Poly::variable(sp, i);
      bubble = bubble * (xi - Poly::constant(sp, spec.box[i].lo)) * (Poly::constant(sp, spec.box[i].hi) - xi);
    }
    double worst_row = 0.0, worst_eig = 0.0;
    int used = 0;
    for (int t = 0; t < deformations; ++t) {
      std::vector<Poly> q(spec.n, Poly(sp));
      for (auto& qj : q)
        for (const auto& m : monomials_up_to(spec.n, 2)) {
          MultiIndex mm(sp.arity());
          for (std::size_t i = 0; i < spec.n; ++i) mm.set(i, m[i]);
          qj.add_term(mm, u(rng));
        }
      std::vector<Poly> y;
      for (double amp = 4.0; amp > 1e-3; amp *= 0.5) {
        y = spec.boundary;
        for (std::size_t j = 0; j < spec.n; ++j) y[j] += amp * bubble * q[j];
        if (std::sqrt(field_size(y, spec.box, 21)) <= 0.8 * R) break;
        y.clear();
      }
      if (y.empty()) continue;
      ++used;
      const auto z = occupation_moments(y, spec.box, rel.basis, rel.scaling);
      for (const auto& row : rel.stokes) {
        double val = -row.rhs;
        for (const auto& [k, c] : row.entries) val += c * z(k);
        worst_row = std::max(worst_row, std::abs(val));
      }
      for (const auto& b : rel.blocks) {
        const auto M = b.evaluate(z);
        if (M.rows() > 0) {
          worst_eig = std::min(worst_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues()(0));
        }
      }
    }
    v.checks.push_back({"occupation_oracle", used > 0 && worst_row <= 1e-9 && worst_eig >= -1e-8,
                        std::max(worst_row, -worst_eig),
                        std::to_string(used) + " deformations, max row residual " + fmt(worst_row, 3) +
                            ", min block eigenvalue " + fmt(worst_eig, 3)});
  }

  {
    const auto conic = to_conic_program(rel);
    const auto sol = sdp::solve(conic.program);
    const auto cert = sdp::certify(conic.program, sol);
    std::string detail = "status " + sdp::to_string(sol.status) + ", r = " + std::to_string(r);
    if (sol.status == sdp::Status::optimal) {
      detail += ", J = " + fmt(rel.volume * conic.objective_scale * sol.primal_objective) + ", gap " + fmt(cert.gap_rel, 3);
    }
    if (v.configuration_error && sol.status == sdp::Status::infeasible) detail += " (infeasibility confirms the radius error)";
    v.checks.push_back({"solver_certification", cert.certified(), std::max(cert.primal_residual, cert.gap_rel), detail});
  }
  return v;
}

nlohmann::json verify_to_json(const VerifyReport& v) {
  nlohmann::json j;
  j["passed"] = v.passed();
  auto checks = nlohmann::json::array();
  for (const auto& c : v.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"max_deviation", c.max_deviation}, {"detail", c.detail}});
  }
  j["checks"] = checks;
  j["configuration_error"] = v.configuration_error ? nlohmann::json(*v.configuration_error) : nlohmann::json(nullptr);
  return j;
}

std::string surface_svg(const std::vector<SurfaceRow>& rows) {
  std::map<double, std::vector<const SurfaceRow*>> by1, by2;
  double wq = 0.0, smin = 1e300, smax = -1e300;
  for (const auto& r : rows) {
    by1[r.s1].push_back(&r);
    by2[r.s2].push_back(&r);
    wq = std::max(wq, r.Wquasi);
    smin = std::min({smin, r.s1, r.s2});
    smax = std::max({smax, r.s1, r.s2});
  }
  const double cap = std::max(2.0 * wq, 1e-12);
  const double zs = (smax - smin) / cap;
  auto proj = [&](double s1, double s2, double w) {
    return Eigen::Vector2d(s1 + 0.5 * s2, 0.35 * s2 + zs * std::min(w, cap));
  };
  std::vector<SvgPolyline> lines;
  for (const bool quasi : {false, true}) {
    const std::string colour = quasi ? "#1f4e9c" : "#d08080";
    for (auto* group : {&by1, &by2}) {
      for (auto& [key, pts] : *group) {
        std::vector<const SurfaceRow*> sorted = pts;
        const bool first = group == &by1;
        std::sort(sorted.begin(), sorted.end(),
                  [&](const SurfaceRow* a, const SurfaceRow* b) { return first ? a->s2 < b->s2 : a->s1 < b->s1; });
        SvgPolyline l{{}, colour, quasi ? 1.0 : 0.6};
        for (const auto* p : sorted) l.points.push_back(proj(p->s1, p->s2, quasi ? p->Wquasi : p->W));
        lines.push_back(std::move(l));
      }
    }
  }
  return svg_document(lines, 560, 420);
}

}  // namespace cgrelax
