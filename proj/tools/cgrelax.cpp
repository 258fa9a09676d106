#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cgrelax/pipeline.hpp"

using namespace cgrelax;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kValidation = 2, kSolver = 3, kProperty = 4 };

struct Failure {
  int code;
  std::string kind;
  std::string message;
};

void emit_error(const Failure& f, const std::string& out_dir) {
  const nlohmann::json j = {{"error", {{"kind", f.kind}, {"message", f.message}}}, {"exit_code", f.code}};
  std::cerr << j.dump(2) << '\n';
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream(fs::path(out_dir) / "error.json") << j.dump(2) << '\n';
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << text;
}

Eigen::MatrixXd parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream rs(text);
  std::string row;
  while (std::getline(rs, row, ';')) {
    std::vector<double> vals;
    std::stringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ValidationError("matrix entry '" + cell + "' is not a number");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v)) {
        throw ValidationError("matrix entry '" + cell + "' is not a finite number");
      }
      vals.push_back(v);
    }
    rows.push_back(vals);
  }
  if (rows.size() == 1) {  // flat row-major list
    const auto k = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(rows[0].size()))));
    if (k > 1 && k * k == rows[0].size()) {
      std::vector<std::vector<double>> split(k);
      for (std::size_t i = 0; i < k; ++i) split[i].assign(rows[0].begin() + i * k, rows[0].begin() + (i + 1) * k);
      rows = split;
    }
  }
  const auto n = rows.size();
  if (n == 0) throw ValidationError("empty matrix");
  Eigen::MatrixXd F(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw ValidationError("matrix must be square, rows separated by ';'");
    for (std::size_t j = 0; j < n; ++j) F(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return F;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

EnergyDensity load_energy(const std::string& path) {
  auto j = read_json(path);
  try {
    // a problem file carries its energy under "energy"
    if (j.contains("energy")) {
      auto e = j.at("energy");
      if (!e.contains("n") && j.contains("n")) e["n"] = j.at("n");
      return energy_from_json(e);
    }
    return energy_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("energy schema: ") + e.what());
  }
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

struct Flags {
  std::string spec_path;
  std::vector<int> orders;
  double R = 0.0;
  bool R_auto = false;
  int extract_degree = -1;
  std::string grid;
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  unsigned seed = 0;
  std::string out;
  bool svg = false;
  std::string svg_path;
  bool dump_sdp = false;
  std::string load_sdp;
  std::string F;
  std::string method = "auto";
  bool parallel = false;
  bool quiet = false;
};

RunOptions run_options(const Flags& f) {
  RunOptions o;
  o.orders = f.orders;
  if (f.R > 0.0) o.R = f.R;
  o.R_auto = f.R_auto;
  if (f.extract_degree >= 0) o.extract_degree = f.extract_degree;
  o.tol_feas = f.tol_feas;
  o.tol_gap = f.tol_gap;
  o.seed = f.seed;
  o.parallel_orders = f.parallel;
  o.method = parse_envelope_method(f.method);
  if (!f.quiet) o.log = [](const std::string& s) { std::cerr << s << '\n'; };
  return o;
}

int cmd_load_sdp(const Flags& f) {
  std::ifstream in(f.load_sdp);
  if (!in) throw ValidationError("cannot open '" + f.load_sdp + "'");
  const auto prog = sdp::read_text(in);
  sdp::SolveOptions so;
  so.tol_feas = f.tol_feas;
  so.tol_gap = f.tol_gap;
  so.seed = f.seed;
  const auto sol = sdp::solve(prog, so);
  const auto cert = sdp::certify(prog, sol);
  nlohmann::json j;
  j["tool"] = {{"name", "cgrelax"}, {"version", kVersion}};
  j["sdp"] = {{"file", f.load_sdp},
              {"variables", prog.num_vars},
              {"blocks", prog.blocks.size()},
              {"equalities", prog.num_equalities()},
              {"status", sdp::to_string(sol.status)},
              {"objective", sol.primal_objective},
              {"dual_objective", sol.dual_objective},
              {"iterations", sol.iterations},
              {"certified", cert.certified()},
              {"gap_rel", cert.gap_rel},
              {"primal_residual", cert.primal_residual}};
  auto z = nlohmann::json::array();
  for (Eigen::Index k = 0; k < sol.z.size(); ++k) z.push_back(sol.z(k));
  j["sdp"]["z"] = z;
  const auto text = j.dump(2) + "\n";
  if (!f.out.empty()) write_file(fs::path(f.out) / "report.json", text);
  std::cout << text;
  return sol.status == sdp::Status::optimal ? kOk : kSolver;
}

int cmd_run(const Flags& f) {
  if (!f.load_sdp.empty()) return cmd_load_sdp(f);
  if (f.spec_path.empty()) throw ValidationError("run needs a problem file or --load-sdp");
  const auto spec = load_problem(f.spec_path);
  const auto opts = run_options(f);
  const auto rep = run_hierarchy(spec, opts);
  const fs::path out = f.out.empty() ? fs::path("out") : fs::path(f.out);
  fs::create_directories(out);
  write_file(out / "report.json", report_to_json(rep).dump(2) + "\n");

  const OrderRecord* top = nullptr;
  for (const auto& o : rep.orders) {
    if (o.field && o.field->dimension() == 2) {
      const auto pts = wireframe(*o.field);
      std::ostringstream csv;
      write_wireframe_csv(csv, pts);
      write_file(out / ("wireframe_r" + std::to_string(o.r) + ".csv"), csv.str());
      if (f.svg) write_file(out / ("wireframe_r" + std::to_string(o.r) + ".svg"), wireframe_svg(pts));
      top = &o;
    }
    if (f.dump_sdp) {
      std::ostringstream os;
      sdp::write_text(os, o.program);
      write_file(out / ("relaxation_r" + std::to_string(o.r) + ".sdp"), os.str());
    }
  }
  if (top) {
    const auto pts = wireframe(*top->field);
    std::ostringstream csv;
    write_wireframe_csv(csv, pts);
    write_file(out / "wireframe.csv", csv.str());
    if (f.svg) write_file(out / "wireframe.svg", wireframe_svg(pts));
  }

  for (const auto& o : rep.orders) {
    std::cout << "r=" << o.r << "  J_mom=" << std::setprecision(10) << o.J << "  R=" << std::setprecision(6) << o.R
              << "  " << sdp::to_string(o.status);
    if (o.barycentric_value) std::cout << "  barycentric=" << std::setprecision(8) << *o.barycentric_value;
    std::cout << '\n';
  }
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  return rep.all_optimal() ? kOk : kSolver;
}

int cmd_envelope(const Flags& f) {
  const auto e = load_energy(f.spec_path);
  const auto method = parse_envelope_method(f.method);
  if (!f.grid.empty()) {
    const auto [a1, a2] = parse_grid(f.grid);
    const auto rows = envelope_surface(a1, a2, e, method);
    std::ostringstream csv;
    write_surface_csv(csv, rows);
    if (f.out.empty()) {
      std::cout << csv.str();
    } else {
      write_file(f.out, csv.str());
    }
    if (!f.svg_path.empty()) write_file(f.svg_path, surface_svg(rows));
    return kOk;
  }
  if (f.F.empty()) throw ValidationError("envelope needs --F or --grid");
  const auto F = parse_matrix(f.F);
  if (static_cast<std::size_t>(F.rows()) != e.n) throw ValidationError("F does not match the energy dimension");
  const double wq = quasiconvex_envelope(F, e, method);
  const std::string used =
      method == EnvelopeMethod::automatic ? (is_frobenius_well(e) ? "spectral" : "projection") : f.method;
  const nlohmann::json j = {{"F", matrix_json(F)}, {"W", e(F)}, {"Wquasi", wq}, {"method", used}};
  const auto text = j.dump(2) + "\n";
  if (!f.out.empty()) write_file(f.out, text);
  std::cout << text;
  return kOk;
}

int cmd_verify(const Flags& f) {
  const auto spec = load_problem(f.spec_path, false);
  const auto v = verify_problem(spec, f.seed);
  const auto text = verify_to_json(v).dump(2) + "\n";
  if (!f.out.empty()) write_file(fs::path(f.out) / "verify.json", text);
  std::cout << text;
  if (v.configuration_error) {
    emit_error({kValidation, "configuration", *v.configuration_error}, f.out);
    return kValidation;
  }
  return v.passed() ? kOk : kProperty;
}

int cmd_dump_sdp(const Flags& f) {
  const auto spec = load_problem(f.spec_path);
  const int r = f.orders.empty() ? (spec.orders.empty() ? minimal_order(spec) : spec.orders.front()) : f.orders.front();
  const double R = f.R > 0.0 ? f.R : spec.R.value_or(initial_radius(spec));
  ProblemSpec probe = spec;
  probe.R = R;
  probe.check_radius();
  const auto conic = to_conic_program(assemble_relaxation(spec, r, R));
  std::ostringstream os;
  sdp::write_text(os, conic.program);
  if (f.out.empty()) {
    std::cout << os.str();
  } else {
    write_file(f.out, os.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment relaxations and quasiconvex envelopes for polynomial stored energies"};
  app.set_version_flag("--version", std::string("cgrelax ") + kVersion);
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "solve the relaxation hierarchy for a problem file");
  run->add_option("spec", f.spec_path, "problem JSON");
  run->add_option("--order", f.orders, "relaxation orders (overrides the file)")->delimiter(',');
  run->add_option("--R", f.R, "fixed truncation radius");
  run->add_flag("--R-auto", f.R_auto, "doubling schedule for the radius");
  run->add_option("--extract-degree", f.extract_degree, "ansatz degree of the barycenter (default: r)");
  run->add_option("--tol-feas", f.tol_feas, "solver feasibility tolerance");
  run->add_option("--tol-gap", f.tol_gap, "solver relative gap tolerance");
  run->add_option("--seed", f.seed, "seed recorded in the report");
  run->add_option("--out", f.out, "output directory (default: out)");
  run->add_flag("--svg", f.svg, "also write wireframe SVG files");
  run->add_flag("--dump-sdp", f.dump_sdp, "write each relaxation in the sparse SDP text format");
  run->add_option("--load-sdp", f.load_sdp, "solve an SDP text file instead of a problem");
  run->add_option("--method", f.method, "envelope oracle: auto, spectral or projection");
  run->add_flag("--parallel-orders", f.parallel, "solve orders concurrently");
  run->add_flag("--quiet", f.quiet, "no progress lines");

  auto* env = app.add_subcommand("envelope", "pointwise or gridded quasiconvex envelope");
  env->add_option("energy", f.spec_path, "energy or problem JSON")->required();
  env->add_option("--F", f.F, "deformation gradient, rows separated by ';' or a flat row-major list");
  env->add_option("--grid", f.grid, "s1:lo:hi:steps,s2:lo:hi:steps over diag(s1, s2)");
  env->add_option("--method", f.method, "auto, spectral or projection");
  env->add_option("--out", f.out, "output file (JSON for --F, CSV for --grid)");
  env->add_option("--svg", f.svg_path, "surface SVG for --grid");

  auto* ver = app.add_subcommand("verify", "property suites for a problem file");
  ver->add_option("spec", f.spec_path, "problem JSON")->required();
  ver->add_option("--seed", f.seed, "random seed");
  ver->add_option("--out", f.out, "output directory");

  auto* dump = app.add_subcommand("dump-sdp", "write one relaxation in the sparse SDP text format");
  dump->add_option("spec", f.spec_path, "problem JSON")->required();
  dump->add_option("--order", f.orders, "relaxation order")->delimiter(',');
  dump->add_option("--R", f.R, "truncation radius");
  dump->add_option("--out", f.out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error({kValidation, "usage", e.what()}, "");
    return kValidation;
  }

  const std::string err_dir = (run->parsed() || ver->parsed()) ? f.out : "";
  try {
    if (run->parsed()) return cmd_run(f);
    if (env->parsed()) return cmd_envelope(f);
    if (ver->parsed()) return cmd_verify(f);
    if (dump->parsed()) return cmd_dump_sdp(f);
  } catch (const ValidationError& e) {
    emit_error({kValidation, "validation", e.what()}, err_dir);
    return kValidation;
  } catch (const StructuralError& e) {
    emit_error({kValidation, "validation", e.what()}, err_dir);
    return kValidation;
  } catch (const SolverError& e) {
    emit_error({kSolver, "solver", e.what()}, err_dir);
    return kSolver;
  } catch (const std::exception& e) {
    emit_error({kSolver, "internal", e.what()}, err_dir);
    return kSolver;
  }
  return kValidation;
}
