#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdhom/harness.hpp"
#include "sdhom/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sdhom;

namespace {

struct Globals {
  std::string config;
  std::string out_dir;
  std::optional<unsigned> seed;
  std::optional<int> threads;
  std::optional<double> tol_gap;
  std::optional<double> tol_solve;
  std::optional<int> cell_nodes;
  std::optional<double> ab_radius;
  std::optional<int> ab_nodes;
};

struct Local {
  std::string field;
  std::string source;
  std::string out;
  std::optional<int> mesh;
  std::optional<double> solve_eps;
  std::string eps_list;
  std::optional<int> elements;
  double a = 1.0;
  double b = 0.0;
  std::string manifest;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("/resolution/inverse_eps", "cannot parse '" + item + "' as an integer");
    }
  }
  return out;
}

ExperimentConfig build_config(const Globals& g, const Local& l, std::vector<std::string> pipeline) {
  Json j = g.config.empty() ? Json::object() : read_json(g.config);
  const fs::path base = g.config.empty() ? fs::path{} : fs::path(g.config).parent_path();
  if (!l.field.empty()) j["field"] = fs::absolute(l.field).string();
  if (!pipeline.empty() || !j.contains("pipeline")) j["pipeline"] = pipeline;
  Json& res = j["resolution"];
  if (res.is_null()) res = Json::object();
  if (g.cell_nodes) res["cell_nodes"] = *g.cell_nodes;
  if (g.ab_radius) res["ab_radius"] = *g.ab_radius;
  if (g.ab_nodes) res["ab_nodes"] = *g.ab_nodes;
  if (l.mesh) res["mesh"] = *l.mesh;
  if (l.elements) res["sweep_elements"] = *l.elements;
  if (!l.eps_list.empty()) res["inverse_eps"] = parse_int_list(l.eps_list);
  Json& tol = j["tolerance"];
  if (tol.is_null()) tol = Json::object();
  if (g.tol_gap) tol["tol_gap"] = *g.tol_gap;
  if (g.tol_solve) tol["tol_solve"] = *g.tol_solve;
  if (!l.source.empty()) j["source"] = l.source;
  if (l.solve_eps) j["solve_eps"] = *l.solve_eps;
  if (g.seed) j["seed"] = *g.seed;
  if (g.threads) j["threads"] = *g.threads;
  ExperimentConfig c = ExperimentConfig::from_json(j, base);
  if (!g.out_dir.empty()) {
    c.out_dir = g.out_dir;
  } else if (!j.contains("out_dir")) {
    c.out_dir = "sdhom_out";
  }
  return c;
}

void copy_artifact(const ExperimentConfig& c, const std::string& name, const std::string& target) {
  if (target.empty()) return;
  const fs::path to(target);
  if (to.has_parent_path()) fs::create_directories(to.parent_path());
  fs::copy_file(c.out_dir / name, to, fs::copy_options::overwrite_existing);
}

int finish(const RunManifest& m) {
  for (const auto& s : m.stages) {
    std::cout << s.name << ": " << s.status;
    if (!s.message.empty()) std::cout << " (" << s.message << ")";
    std::cout << "\n";
  }
  std::cout << "manifest " << (m.out_dir / "manifest.json").string() << "\n";
  return m.exit_code();
}

// Runs a stage with its prerequisites and copies its main artifact to --out.
int run_stage(const Globals& g, const Local& l, const std::vector<std::string>& pipeline, const std::string& artifact,
              const std::string& sidecar = "") {
  const ExperimentConfig c = build_config(g, l, pipeline);
  if (!c.field) throw ConfigError("/field", "this command needs --field or a config with a field");
  const RunManifest m = run(c);
  const int code = finish(m);
  if (code == 0) {
    copy_artifact(c, artifact, l.out);
    if (!sidecar.empty() && !l.out.empty()) {
      fs::path side(l.out);
      side.replace_extension(".residuals.json");
      copy_artifact(c, sidecar, side.string());
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogenization of periodic maximal monotone fields with selfdual Lagrangians"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out-dir", g.out_dir, "Directory for artifacts and the manifest");
  app.add_option("--seed", g.seed, "Seed for randomized property scans");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");
  app.add_option("--tol-gap", g.tol_gap, "Selfdual gap tolerance");
  app.add_option("--tol-solve", g.tol_solve, "Dirichlet certificate tolerance");
  app.add_option("--cell-nodes", g.cell_nodes, "Cell nodes per axis");
  app.add_option("--ab-radius", g.ab_radius, "Radius of the (a,b) box of L_hom tables");
  app.add_option("--ab-nodes", g.ab_nodes, "Nodes per axis of L_hom tables (odd)");

  Local l;
  auto field_opt = [&](CLI::App* sub) { sub->add_option("--field", l.field, "Field definition (JSON)"); };
  auto out_opt = [&](CLI::App* sub, const std::string& what) { sub->add_option("--out", l.out, what); };

  auto* verify = app.add_subcommand("verify", "Scan the two-sided growth bound of a field");
  field_opt(verify);
  out_opt(verify, "Copy of the growth report");
  auto* selfdual = app.add_subcommand("selfdualize", "Tabulate selfdual Lagrangians of every region");
  field_opt(selfdual);
  out_opt(selfdual, "Copy of the gap summary");
  auto* cell = app.add_subcommand("cell", "Solve one cell problem at (a, b)");
  field_opt(cell);
  cell->add_option("--a", l.a, "First argument of L_hom (1D) or its first component");
  cell->add_option("--b", l.b, "Second argument of L_hom (1D) or its first component");
  out_opt(cell, "Cell solution (JSON)");
  auto* tabulate = app.add_subcommand("tabulate", "Tabulate L_hom on the (a,b) box");
  field_opt(tabulate);
  out_opt(tabulate, "Table (JSON); the residual sidecar goes next to it");
  auto* solve = app.add_subcommand("solve", "Solve the Dirichlet problem with a source");
  field_opt(solve);
  solve->add_option("--source", l.source, "Source: const:c or sin:c");
  solve->add_option("--mesh", l.mesh, "Elements per axis");
  solve->add_option("--solve-eps", l.solve_eps, "Oscillation scale eps of the field");
  out_opt(solve, "Solve report (JSON)");
  auto* sweep = app.add_subcommand("sweep", "Homogenization sweep over eps");
  field_opt(sweep);
  sweep->add_option("--source", l.source, "Source: const:c or sin:c");
  sweep->add_option("--eps", l.eps_list, "Comma-separated 1/eps values");
  sweep->add_option("--elements", l.elements, "Elements per axis of the sweep mesh");
  out_opt(sweep, "Sweep table (CSV)");
  auto* checks = app.add_subcommand("checks", "Seeded property checks");
  field_opt(checks);
  out_opt(checks, "Copy of the check results");
  auto* runner = app.add_subcommand("run", "Run the pipeline of a config");
  auto* rep = app.add_subcommand("report", "Render a report from a manifest");
  rep->add_option("--manifest", l.manifest, "manifest.json of a run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*verify) return run_stage(g, l, {"verify"}, "verify.json");
    if (*selfdual) return run_stage(g, l, {"selfdualize"}, "selfdual.json");
    if (*tabulate) return run_stage(g, l, {"cell", "tabulate"}, "hom_table.json", "hom_residuals.json");
    if (*solve) return run_stage(g, l, {"solve"}, "solve.json");
    if (*sweep) return run_stage(g, l, {"cell", "solve", "sweep"}, "sweep.csv");
    if (*checks) return run_stage(g, l, {"cell", "solve", "checks"}, "checks.json");
    if (*cell) {
      const ExperimentConfig c = build_config(g, l, {});
      if (!c.field) throw ConfigError("/field", "cell needs --field or a config with a field");
      const int d = c.field->dim;
      Point a = Point::Zero(d), b = Point::Zero(d);
      a[0] = l.a;
      b[0] = l.b;
      CellOptions opt;
      opt.p = c.field->p;
      const auto s = solve_cell(lagrangian_from_field(*c.field), a, b, CellGrid(d, c.resolution.cell_nodes), opt);
      const Json j = cell_solution_to_json(s);
      if (l.out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        write_json(l.out, j);
        std::cout << "L_hom = " << s.value << ", residual " << s.kkt_residual << "\n";
      }
      return 0;
    }
    if (*runner) {
      if (g.config.empty()) throw ConfigError("/", "run needs --config");
      const ExperimentConfig c = build_config(g, l, {});
      const RunManifest m = run(c);
      const int code = finish(m);
      std::cout << "\n" << report(RunManifest::load(c.out_dir / "manifest.json"));
      return code;
    }
    if (*rep) {
      std::cout << report(RunManifest::load(l.manifest));
      return RunManifest::load(l.manifest).exit_code();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolverStalledError& e) {
    std::cerr << "solver stalled: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
