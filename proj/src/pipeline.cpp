#include "sdhom/pipeline.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "sdhom/harness.hpp"

namespace sdhom {

namespace {

using Clock = std::chrono::steady_clock;

void reject_unknown(const Json& j, const std::string& pointer, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(pointer.empty() ? "/" : pointer, "expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(pointer + "/" + key, "unknown entry");
}

double positive(const Json& j, const std::string& pointer) {
  const double v = number_from_json(j, pointer);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(pointer, "must be positive and finite");
  return v;
}

int positive_int(const Json& j, const std::string& pointer) {
  if (!j.is_number_integer() || j.get<long long>() <= 0) throw ConfigError(pointer, "expected a positive integer");
  return j.get<int>();
}

std::string fixed(double v, int digits = 6) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream os;
  os << std::scientific << std::setprecision(digits) << v;
  return os.str();
}

// Harmonic-type mean for 1D laminates: beta_hom(1) for linear and power fields.
std::optional<double> harmonic_oracle(const MonotoneField& f) {
  if (f.dim != 1 || (f.kind != FieldKind::linear && f.kind != FieldKind::power)) return std::nullopt;
  const double s = 1.0 / (f.p - 1.0);
  double mean = 0.0, total = 0.0;
  for (const auto& r : f.regions) {
    const double len = r.box.hi[0] - r.box.lo[0];
    if (!(r.coefficient > 0.0)) return std::nullopt;
    mean += len * std::pow(r.coefficient, -s);
    total += len;
  }
  if (std::abs(total - 1.0) > 1e-12) return std::nullopt;
  return std::pow(mean, -(f.p - 1.0));
}

struct Context {
  const ExperimentConfig& config;
  std::filesystem::path out;
  std::optional<OmegaLagrangian> L;
  std::optional<HomLagrangian> hom;
  std::optional<SolverReport> solved;

  const OmegaLagrangian& lagrangian() {
    if (!L) {
      const MonotoneField& f = *config.field;
      if (f.kind == FieldKind::sampled_graph_1d) {
        SelfdualizeOptions opt;
        opt.radius = config.resolution.selfdual_radius;
        opt.points_per_axis = config.resolution.selfdual_nodes;
        opt.tol_gap = config.tolerance.tol_gap;
        L = selfdualize(f, opt);
      } else {
        L = lagrangian_from_field(f);
      }
    }
    return *L;
  }

  DirichletOptions solve_options(double eps) const {
    DirichletOptions opt;
    opt.eps = eps;
    opt.p = config.field->p;
    opt.tol_solve = config.tolerance.tol_solve;
    return opt;
  }

  std::string artifact(StageRecord& rec, const std::string& name) {
    rec.artifacts.push_back(name);
    return (out / name).string();
  }
};

void stage_verify(Context& ctx, StageRecord& rec) {
  const auto& f = *ctx.config.field;
  if (!f.growth) {
    rec.status = "fail";
    rec.message = "field has no growth record";
    return;
  }
  GapReport r;
  try {
    r = verify_growth(f, ctx.config.resolution.verify_samples, ctx.config.resolution.verify_radius);
  } catch (const GrowthViolationError& e) {
    rec.status = "fail";
    rec.message = e.what();
    rec.summary["violation"] = e.violation;
    return;
  }
  rec.summary = gap_report_to_json(r);
  write_json(ctx.artifact(rec, "verify.json"), rec.summary);
  rec.status = "pass";
}

void stage_selfdualize(Context& ctx, StageRecord& rec) {
  SelfdualizeOptions opt;
  opt.radius = ctx.config.resolution.selfdual_radius;
  opt.points_per_axis = ctx.config.resolution.selfdual_nodes;
  opt.tol_gap = ctx.config.tolerance.tol_gap;
  const auto tables = selfdualize_tables(*ctx.config.field, opt);
  Json gaps = Json::array();
  bool ok = true;
  for (std::size_t r = 0; r < tables.lagrangian.size(); ++r) {
    write_json(ctx.artifact(rec, "selfdual_region" + std::to_string(r) + ".json"), table_to_json(tables.lagrangian[r]));
    gaps.push_back(gap_report_to_json(tables.gaps[r]));
    ok = ok && tables.gaps[r].passed();
  }
  rec.summary["regions"] = gaps;
  write_json(ctx.artifact(rec, "selfdual.json"), rec.summary);
  rec.status = ok ? "pass" : "fail";
}

void stage_cell(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.config;
  const int dim = cfg.field->dim;
  const BoxGrid box(dim, cfg.resolution.ab_radius, cfg.resolution.ab_nodes);
  const CellGrid grid(dim, cfg.resolution.cell_nodes);
  TabulateOptions opt;
  opt.threads = cfg.threads;
  opt.tol_gap = cfg.tolerance.tol_gap;
  opt.cell.p = cfg.field->p;
  ctx.hom = tabulate_hom(ctx.lagrangian(), box, box, grid, opt);
  const HomLagrangian& hom = *ctx.hom;
  write_json(ctx.artifact(rec, "hom_table.json"), table_to_json(hom.table));
  write_json(ctx.artifact(rec, "hom_residuals.json"), hom_sidecar_to_json(hom));

  DualCheckOptions dual_opt;
  dual_opt.cell = opt.cell;
  dual_opt.threads = cfg.threads;
  dual_opt.tol = cfg.tolerance.tol_dual;
  const auto dual = dual_cell_check(ctx.lagrangian(), hom, dual_opt);

  Json s;
  Point e1 = Point::Zero(dim);
  e1[0] = 1.0;
  const GraphImage image = graph_extract(hom.table, e1);
  s["beta_hom_1"] = number_to_json(image.center[0]);
  if (const auto oracle = harmonic_oracle(*cfg.field)) {
    s["oracle"] = *oracle;
    s["oracle_error"] = std::abs(image.center[0] - *oracle);
  }
  if (dim == 1) {
    try {
      s["beta_hom_slope"] = beta_hom_extract(hom.table).slope();
      s["beta_hom_monotone"] = true;
    } catch (const Error&) {
      s["beta_hom_monotone"] = false;
    }
  }
  s["selfdual_max_gap"] = number_to_json(hom.selfdual.max_gap);
  s["selfdual_tolerance"] = hom.selfdual.tolerance_used;
  s["selfdual_passed"] = hom.selfdual.passed();
  s["bounds_violations"] = hom.bounds.violations;
  s["dual_max_discrepancy"] = number_to_json(dual.max_discrepancy);
  s["dual_nodes_compared"] = dual.nodes_compared;
  s["dual_passed"] = dual.passed();
  s["max_residual"] = number_to_json(hom.residuals.maxCoeff());
  rec.summary = s;
  write_json(ctx.artifact(rec, "cell.json"), s);
  const bool monotone = !s.contains("beta_hom_monotone") || s["beta_hom_monotone"].get<bool>();
  rec.status = hom.selfdual.passed() && hom.bounds.passed() && dual.passed() && monotone ? "pass" : "fail";
}

void stage_tabulate(Context& ctx, StageRecord& rec) {
  const TabulatedFunction& t = ctx.hom->table;
  const int d = t.factor(0).dim;
  std::ostringstream os;
  for (int k = 0; k < d; ++k) os << "a" << k << ",";
  for (int k = 0; k < d; ++k) os << "b" << k << ",";
  os << "L_hom\n";
  for (Index i = 0; i < t.size(); ++i) {
    const Point z = t.node(i);
    for (Index k = 0; k < z.size(); ++k) os << fixed(z[k], 9) << ",";
    os << fixed(t[i], 12) << "\n";
  }
  write_text(ctx.artifact(rec, "hom_table.csv"), os.str());
  rec.summary["nodes"] = t.size();
  rec.status = "pass";
}

void stage_solve(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.config;
  const DirichletMesh mesh(cfg.field->dim, cfg.resolution.mesh - 1);
  const Eigen::VectorXd u_star = Source::parse(cfg.source).evaluate(mesh);
  ctx.solved = DirichletProblem(ctx.lagrangian(), mesh, ctx.solve_options(cfg.solve_eps)).solve(u_star);
  const SolverReport& r = *ctx.solved;
  Json j = solver_report_to_json(r);
  write_json(ctx.artifact(rec, "solve.json"), j);
  rec.summary["gap"] = number_to_json(r.gap);
  rec.summary["energy"] = number_to_json(r.energy);
  rec.summary["iterations"] = r.iterations;
  rec.summary["u_max"] = r.u.maxCoeff();
  rec.status = r.gap >= -1e-10 && r.gap <= cfg.tolerance.tol_solve ? "pass" : "fail";
}

std::string sweep_csv(const SweepReport& report) {
  std::ostringstream os;
  os << "eps,gap,err_u_Lp,flux_dev_max,div_residual,rate_running\n";
  for (const auto& r : report.records) {
    if (!r.ok) {
      os << fixed(r.eps) << ",stalled,,,,\n";
      continue;
    }
    os << fixed(r.eps) << "," << fixed(r.gap) << "," << fixed(r.err_u) << "," << fixed(r.flux.weak_max()) << ","
       << fixed(r.div_residual) << "," << fixed(r.rate_running) << "\n";
  }
  return os.str();
}

void stage_sweep(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.config;
  EpsSchedule schedule;
  schedule.inverse_eps = cfg.resolution.inverse_eps;
  schedule.elements = cfg.resolution.sweep_elements;
  schedule.dim = cfg.field->dim;
  SweepOptions opt;
  opt.solve = ctx.solve_options(1.0);
  opt.p = cfg.field->p;
  opt.threads = cfg.threads;
  const SweepReport report = eps_sweep(ctx.lagrangian(), *ctx.hom, Source::parse(cfg.source), schedule, opt);
  write_text(ctx.artifact(rec, "sweep.csv"), sweep_csv(report));
  Json s;
  s["rate_u"] = number_to_json(report.rate_u);
  s["rate_flux"] = number_to_json(report.rate_flux);
  s["u_hom_max"] = report.u_hom_max;
  s["all_certified"] = report.all_certified;
  Json stalled = Json::array();
  for (const auto& r : report.records)
    if (!r.ok) stalled.push_back(r.eps);
  s["stalled_eps"] = stalled;
  rec.summary = s;
  write_json(ctx.artifact(rec, "sweep.json"), s);
  rec.status = report.all_certified && report.rate_u >= 0.9 && report.rate_flux >= 0.9 ? "pass" : "fail";
}

void stage_checks(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.config;
  const auto& L = ctx.lagrangian();
  const HomLagrangian& hom = *ctx.hom;
  const int dim = cfg.field->dim;
  std::mt19937 rng(cfg.seed);
  Json checks = Json::array();
  bool all = true;
  auto add = [&](const std::string& name, bool passed, double value, double tol) {
    checks.push_back({{"name", name}, {"passed", passed}, {"value", number_to_json(value)}, {"tolerance", tol}});
    all = all && passed;
  };

  // L(x, a, b) >= <a, b> at seeded points of every region.
  {
    std::uniform_real_distribution<double> u(-cfg.resolution.ab_radius, cfg.resolution.ab_radius);
    double worst = kInfinity;
    for (int t = 0; t < cfg.property_cases; ++t) {
      Point a(dim), b(dim);
      for (int k = 0; k < dim; ++k) {
        a[k] = u(rng);
        b[k] = u(rng);
      }
      for (int r = 0; r < L.region_count(); ++r) {
        const double v = L.region(r).value(a, b);
        if (std::isfinite(v)) worst = std::min(worst, v - a.dot(b));
      }
    }
    add("fenchel_young_lower_bound", worst >= -1e-9, worst, 1e-9);
  }

  // Averaged cell subgradients against central differences of the table.
  {
    const CellProblem problem(L, hom.cell, CellOptions{.p = cfg.field->p});
    const TabulatedFunction& t = hom.table;
    double worst = 0.0;
    const int cases = std::min(20, cfg.property_cases);
    for (int c = 0; c < cases; ++c) {
      Index node = 0;
      do {
        node = std::uniform_int_distribution<Index>(0, t.size() - 1)(rng);
      } while ([&] {
        for (int ax = 0; ax < t.axes(); ++ax) {
          const int k = t.axis_index(node, ax);
          if (k < 2 || k > t.axis_points(ax) - 3) return true;
        }
        return !std::isfinite(t[node]);
      }());
      const Point z = t.node(node);
      const auto sol = problem.solve(z.head(dim), z.tail(dim));
      const auto avg = subdiff_average(problem, sol);
      for (int ax = 0; ax < t.axes(); ++ax) {
        const double fd = (t[node + t.stride(ax)] - t[node - t.stride(ax)]) / (2.0 * t.axis_spacing(ax));
        const double g = ax < dim ? avg.da[ax] : avg.db[ax - dim];
        worst = std::max(worst, std::abs(fd - g));
      }
    }
    add("subdifferential_averaging", worst <= 1e-3, worst, 1e-3);
  }

  // Two-scale averages of the first region's indicator along x_1.
  {
    const CellBox box = L.box(0);
    const double lo = box.lo[0], hi = box.hi[0];
    const auto table = riemann_lebesgue_test([&](double y) { return y >= lo && y < hi ? 1.0 : 0.0; },
                                             [](double x) { return x; }, {4, 8, 16, 32, 64});
    const bool flat = table.deviation.back() <= 1e-12;
    add("riemann_lebesgue_rate", flat || std::abs(table.rate - 1.0) <= 0.1, table.rate, 0.1);
  }

  // Jensen bound with a single piece is an equality.
  if (dim == 1) {
    const auto j = jensen_bound_test(L.region(0), {{1.0, 0.5, 0.0}});
    add("jensen_singleton", std::abs(j.margin) <= 1e-8, j.margin, 1e-8);
  }

  // Monotonicity of the solution map on seeded sources.
  if (ctx.solved) {
    const DirichletMesh mesh(dim, cfg.resolution.mesh - 1);
    const DirichletProblem problem(L, mesh, ctx.solve_options(cfg.solve_eps));
    const Eigen::VectorXd s1 = Source::parse(cfg.source).evaluate(mesh);
    const Eigen::VectorXd s2 = -0.5 * s1 + Source::parse("sin:1").evaluate(mesh);
    const auto r2 = problem.solve(s2);
    const double pairing = problem.operators().inner_nodes(ctx.solved->u - r2.u, s1 - s2);
    add("solution_monotone", pairing >= -1e-10, pairing, 1e-10);
  }

  rec.summary["seed"] = cfg.seed;
  rec.summary["checks"] = checks;
  write_json(ctx.artifact(rec, "checks.json"), rec.summary);
  rec.status = all ? "pass" : "fail";
}

using StageFn = void (*)(Context&, StageRecord&);

StageFn stage_fn(const std::string& name) {
  static const std::map<std::string, StageFn> table{
      {"verify", stage_verify}, {"selfdualize", stage_selfdualize}, {"cell", stage_cell},
      {"tabulate", stage_tabulate}, {"solve", stage_solve}, {"sweep", stage_sweep}, {"checks", stage_checks}};
  return table.at(name);
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

ExperimentConfig ExperimentConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, "", {"field", "pipeline", "resolution", "tolerance", "source", "solve_eps", "out_dir", "seed",
                         "threads", "property_cases"});
  ExperimentConfig c;
  if (j.contains("field")) {
    const Json& f = j["field"];
    if (f.is_string()) {
      std::filesystem::path p = f.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      Json loaded;
      try {
        loaded = read_json(p);
      } catch (const ConfigError& e) {
        throw ConfigError("/field", e.what());
      }
      c.field = field_from_json(loaded, "/field");
    } else {
      c.field = field_from_json(f, "/field");
    }
  }
  if (j.contains("pipeline")) {
    const Json& p = j["pipeline"];
    if (!p.is_array()) throw ConfigError("/pipeline", "expected an array of stage names");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!p[i].is_string()) throw ConfigError("/pipeline/" + std::to_string(i), "expected a stage name");
      c.pipeline.push_back(p[i].get<std::string>());
    }
  }
  if (j.contains("resolution")) {
    const Json& r = j["resolution"];
    reject_unknown(r, "/resolution",
                   {"cell_nodes", "ab_radius", "ab_nodes", "selfdual_radius", "selfdual_nodes", "verify_samples",
                    "verify_radius", "mesh", "sweep_elements", "inverse_eps"});
    auto& res = c.resolution;
    if (r.contains("cell_nodes")) res.cell_nodes = positive_int(r["cell_nodes"], "/resolution/cell_nodes");
    if (r.contains("ab_radius")) res.ab_radius = positive(r["ab_radius"], "/resolution/ab_radius");
    if (r.contains("ab_nodes")) res.ab_nodes = positive_int(r["ab_nodes"], "/resolution/ab_nodes");
    if (r.contains("selfdual_radius")) res.selfdual_radius = positive(r["selfdual_radius"], "/resolution/selfdual_radius");
    if (r.contains("selfdual_nodes")) res.selfdual_nodes = positive_int(r["selfdual_nodes"], "/resolution/selfdual_nodes");
    if (r.contains("verify_samples")) res.verify_samples = positive_int(r["verify_samples"], "/resolution/verify_samples");
    if (r.contains("verify_radius")) res.verify_radius = positive(r["verify_radius"], "/resolution/verify_radius");
    if (r.contains("mesh")) res.mesh = positive_int(r["mesh"], "/resolution/mesh");
    if (r.contains("sweep_elements")) res.sweep_elements = positive_int(r["sweep_elements"], "/resolution/sweep_elements");
    if (r.contains("inverse_eps")) {
      const Json& e = r["inverse_eps"];
      if (!e.is_array() || e.empty()) throw ConfigError("/resolution/inverse_eps", "expected a non-empty array");
      res.inverse_eps.clear();
      for (std::size_t i = 0; i < e.size(); ++i)
        res.inverse_eps.push_back(positive_int(e[i], "/resolution/inverse_eps/" + std::to_string(i)));
    }
  }
  if (j.contains("tolerance")) {
    const Json& t = j["tolerance"];
    reject_unknown(t, "/tolerance", {"tol_gap", "tol_solve", "tol_dual"});
    if (t.contains("tol_gap")) c.tolerance.tol_gap = positive(t["tol_gap"], "/tolerance/tol_gap");
    if (t.contains("tol_solve")) c.tolerance.tol_solve = positive(t["tol_solve"], "/tolerance/tol_solve");
    if (t.contains("tol_dual")) c.tolerance.tol_dual = positive(t["tol_dual"], "/tolerance/tol_dual");
  }
  if (j.contains("source")) {
    if (!j["source"].is_string()) throw ConfigError("/source", "expected a string such as \"const:1\"");
    c.source = j["source"].get<std::string>();
  }
  if (j.contains("solve_eps")) c.solve_eps = positive(j["solve_eps"], "/solve_eps");
  if (j.contains("out_dir")) {
    if (!j["out_dir"].is_string()) throw ConfigError("/out_dir", "expected a path");
    std::filesystem::path p = j["out_dir"].get<std::string>();
    c.out_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("/seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<unsigned>();
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<int>() < 0)
      throw ConfigError("/threads", "expected a nonnegative integer");
    c.threads = j["threads"].get<int>();
  }
  if (j.contains("property_cases")) c.property_cases = positive_int(j["property_cases"], "/property_cases");
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_json(read_json(path), path.parent_path());
}

void ExperimentConfig::validate() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < pipeline.size(); ++i) {
    const std::string at = "/pipeline/" + std::to_string(i);
    const std::string& s = pipeline[i];
    const auto& names = stage_names();
    if (std::find(names.begin(), names.end(), s) == names.end()) throw ConfigError(at, "unknown stage '" + s + "'");
    if (seen.count(s)) throw ConfigError(at, "stage '" + s + "' appears twice");
    if (!field) throw ConfigError(at, "stage '" + s + "' needs a field");
    auto need = [&](const std::string& dep) {
      if (!seen.count(dep)) throw ConfigError(at, "stage '" + s + "' needs '" + dep + "' earlier in the pipeline");
    };
    if (s == "tabulate" || s == "checks") need("cell");
    if (s == "sweep") {
      need("cell");
      need("solve");
    }
    seen.insert(s);
  }
  const auto& r = resolution;
  if (r.ab_nodes % 2 == 0 || r.ab_nodes < 5) throw ConfigError("/resolution/ab_nodes", "must be odd and at least 5");
  if (r.selfdual_nodes % 2 == 0 || r.selfdual_nodes < 5)
    throw ConfigError("/resolution/selfdual_nodes", "must be odd and at least 5");
  if (r.cell_nodes < 8) throw ConfigError("/resolution/cell_nodes", "must be at least 8");
  if (r.mesh < 9) throw ConfigError("/resolution/mesh", "must be at least 9");
  if (r.verify_samples < 2) throw ConfigError("/resolution/verify_samples", "must be at least 2");
  if (field && field->dim == 2) {
    if (r.cell_nodes > 64) throw ConfigError("/resolution/cell_nodes", "2D cells are capped at 64 nodes per axis");
    if (r.ab_nodes > 33) throw ConfigError("/resolution/ab_nodes", "2D tables are capped at 33 nodes per axis");
  }
  EpsSchedule schedule{r.inverse_eps, r.sweep_elements, field ? field->dim : 1};
  try {
    schedule.validate();
  } catch (const Error& e) {
    throw ConfigError("/resolution/inverse_eps", e.what());
  }
  try {
    Source::parse(source);
  } catch (const Error& e) {
    throw ConfigError("/source", e.what());
  }
}

Json ExperimentConfig::to_json() const {
  Json j;
  if (field) j["field"] = field_to_json(*field);
  j["pipeline"] = pipeline;
  const auto& r = resolution;
  j["resolution"] = {{"cell_nodes", r.cell_nodes},         {"ab_radius", r.ab_radius},
                     {"ab_nodes", r.ab_nodes},             {"selfdual_radius", r.selfdual_radius},
                     {"selfdual_nodes", r.selfdual_nodes}, {"verify_samples", r.verify_samples},
                     {"verify_radius", r.verify_radius},   {"mesh", r.mesh},
                     {"sweep_elements", r.sweep_elements}, {"inverse_eps", r.inverse_eps}};
  j["tolerance"] = {{"tol_gap", tolerance.tol_gap}, {"tol_solve", tolerance.tol_solve}, {"tol_dual", tolerance.tol_dual}};
  j["source"] = source;
  j["solve_eps"] = solve_eps;
  j["seed"] = seed;
  j["property_cases"] = property_cases;
  return j;
}

bool RunManifest::passed() const {
  return std::all_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.status == "pass"; });
}

bool RunManifest::stalled() const {
  return std::any_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.status == "stalled"; });
}

int RunManifest::exit_code() const { return passed() ? 0 : (stalled() ? 3 : 1); }

Json RunManifest::to_json(bool with_times) const {
  Json j;
  j["format"] = "sdhom.manifest";
  j["config_hash"] = config_hash;
  j["versions"] = versions;
  j["seed"] = seed;
  j["config"] = config;
  Json st = Json::array();
  for (const auto& s : stages) {
    Json r;
    r["name"] = s.name;
    r["status"] = s.status;
    r["message"] = s.message;
    if (with_times) r["wall_time_ms"] = s.wall_time_ms;
    r["artifacts"] = s.artifacts;
    r["summary"] = s.summary;
    st.push_back(r);
  }
  j["stages"] = st;
  j["passed"] = passed();
  return j;
}

RunManifest RunManifest::from_json(const Json& j, const std::filesystem::path& out_dir) {
  if (!j.is_object() || j.value("format", "") != "sdhom.manifest")
    throw Error(ErrorCode::ReportError, "not an sdhom manifest");
  RunManifest m;
  m.out_dir = out_dir;
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.versions = j.at("versions");
    m.seed = j.at("seed").get<unsigned>();
    m.config = j.at("config");
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      r.status = s.at("status").get<std::string>();
      r.message = s.value("message", "");
      r.wall_time_ms = s.value("wall_time_ms", 0.0);
      r.artifacts = s.at("artifacts").get<std::vector<std::string>>();
      r.summary = s.value("summary", Json::object());
      m.stages.push_back(std::move(r));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ReportError, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ReportError, path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

RunManifest run(const ExperimentConfig& config) {
  config.validate();
  RunManifest m;
  m.out_dir = config.out_dir;
  m.config = config.to_json();
  m.config_hash = hex64(fnv1a(m.config.dump()));
  m.versions = {{"sdhom", kVersion},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)}};
  m.seed = config.seed;
  std::filesystem::create_directories(config.out_dir);
  Context ctx{config, config.out_dir, std::nullopt, std::nullopt, std::nullopt};
  bool halted = false;
  for (const auto& name : config.pipeline) {
    StageRecord rec;
    rec.name = name;
    if (halted) {
      rec.status = "skipped";
      rec.message = "an earlier stage failed hard";
      m.stages.push_back(std::move(rec));
      continue;
    }
    const auto start = Clock::now();
    try {
      stage_fn(name)(ctx, rec);
    } catch (const SolverStalledError& e) {
      rec.status = "stalled";
      rec.message = e.what();
      halted = true;
    } catch (const std::exception& e) {
      rec.status = "error";
      rec.message = e.what();
      halted = true;
    }
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    m.stages.push_back(std::move(rec));
  }
  write_json(config.out_dir / "manifest.json", m.to_json());
  return m;
}

std::string report(const RunManifest& m) {
  std::ostringstream os;
  os << "sdhom run report\n";
  os << "config hash " << m.config_hash << ", seed " << m.seed << "\n";
  os << "overall " << (m.passed() ? "PASS" : "FAIL") << "\n\n";
  os << "stages\n";
  for (const auto& s : m.stages) {
    os << "  " << std::left << std::setw(12) << s.name << (s.status == "pass" ? "PASS" : "FAIL") << "  " << s.status;
    if (!s.message.empty()) os << "  " << s.message;
    os << "\n";
  }
  for (const auto& s : m.stages) {
    for (const auto& a : s.artifacts)
      if (!std::filesystem::exists(m.out_dir / a)) throw Error(ErrorCode::ReportError, "missing artifact " + a);
    if (s.artifacts.empty()) continue;
    if (s.name == "cell") {
      const Json c = Json::parse(read_text(m.out_dir / "cell.json"));
      os << "\nhomogenized field\n";
      os << "  beta_hom(1)        " << fixed(number_from_json(c.at("beta_hom_1"), "/beta_hom_1")) << "\n";
      if (c.contains("oracle")) {
        os << "  harmonic oracle    " << fixed(c["oracle"].get<double>()) << "\n";
        os << "  oracle error       " << fixed(c["oracle_error"].get<double>()) << "\n";
      }
      if (c.contains("beta_hom_slope"))
        os << "  a_hom (slope)      " << fixed(c["beta_hom_slope"].get<double>()) << "\n";
      os << "  selfdual max gap   " << fixed(number_from_json(c.at("selfdual_max_gap"), "")) << " (tol "
         << fixed(c.at("selfdual_tolerance").get<double>()) << ")\n";
      os << "  bounds violations  " << c.at("bounds_violations").get<long long>() << "\n";
      os << "  dual discrepancy   " << fixed(number_from_json(c.at("dual_max_discrepancy"), "")) << "\n";
    } else if (s.name == "solve") {
      const Json r = Json::parse(read_text(m.out_dir / "solve.json"));
      os << "\ndirichlet solve\n";
      os << "  gap                " << fixed(number_from_json(r.at("gap"), "")) << "\n";
      os << "  energy             " << fixed(number_from_json(r.at("energy"), "")) << "\n";
      os << "  iterations         " << r.at("iterations").get<int>() << "\n";
    } else if (s.name == "sweep") {
      os << "\nconvergence table\n";
      std::istringstream csv(read_text(m.out_dir / "sweep.csv"));
      for (std::string line; std::getline(csv, line);) os << "  " << line << "\n";
      const Json r = Json::parse(read_text(m.out_dir / "sweep.json"));
      os << "  rate_u " << fixed(number_from_json(r.at("rate_u"), "")) << ", rate_flux "
         << fixed(number_from_json(r.at("rate_flux"), "")) << ", u_hom max " << fixed(r.at("u_hom_max").get<double>())
         << "\n";
    } else if (s.name == "checks") {
      const Json r = Json::parse(read_text(m.out_dir / "checks.json"));
      os << "\nchecks\n";
      for (const auto& c : r.at("checks"))
        os << "  " << std::left << std::setw(28) << c.at("name").get<std::string>()
           << (c.at("passed").get<bool>() ? "PASS" : "FAIL") << "  " << fixed(number_from_json(c.at("value"), ""))
           << "\n";
    } else if (s.name == "verify" || s.name == "selfdualize") {
      const Json r = Json::parse(read_text(m.out_dir / (s.name == "verify" ? "verify.json" : "selfdual.json")));
      os << "\n" << s.name << "\n";
      if (s.name == "verify") {
        os << "  worst growth gap   " << fixed(number_from_json(r.at("max_gap"), "")) << "\n";
      } else {
        int k = 0;
        for (const auto& g : r.at("regions"))
          os << "  region " << k++ << " gap      " << fixed(number_from_json(g.at("max_gap"), "")) << "\n";
      }
    }
  }
  const std::string text = os.str();
  write_text(m.out_dir / "report.txt", text);
  return text;
}

}  // namespace sdhom
