#include "sdhom/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace sdhom {

namespace {

const Json& member(const Json& j, const std::string& key, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError(pointer.empty() ? "/" : pointer, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(pointer + "/" + key, "missing required entry");
  return *it;
}

int int_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_number_integer()) throw ConfigError(pointer, "expected an integer");
  return j.get<int>();
}

Point point_from_json(const Json& j, const std::string& pointer, int dim) {
  const Eigen::VectorXd v = vector_from_json(j, pointer);
  if (v.size() != dim) throw ConfigError(pointer, "expected " + std::to_string(dim) + " entries");
  return v;
}

const char* rule_name(Interpolation rule) {
  switch (rule) {
    case Interpolation::multilinear: return "multilinear";
    case Interpolation::cubic: return "cubic";
    case Interpolation::lower_convex_envelope: return "lower_convex_envelope";
  }
  return "multilinear";
}

Interpolation rule_from_name(const std::string& name, const std::string& pointer) {
  if (name == "multilinear") return Interpolation::multilinear;
  if (name == "cubic") return Interpolation::cubic;
  if (name == "lower_convex_envelope") return Interpolation::lower_convex_envelope;
  throw ConfigError(pointer, "unknown interpolation rule '" + name + "'");
}

}  // namespace

Json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const Json& j, const std::string& pointer) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
    if (s == "nan") return std::nan("");
  }
  throw ConfigError(pointer, "expected a number or \"inf\"");
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number_to_json(v[i]));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_array()) throw ConfigError(pointer, "expected an array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Index>(i)] = number_from_json(j[i], pointer + "/" + std::to_string(i));
  return v;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Index c = 0; c < m.cols(); ++c) out.push_back(vector_to_json(m.col(c)));
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_array()) throw ConfigError(pointer, "expected an array of columns");
  Eigen::MatrixXd m;
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Eigen::VectorXd col = vector_from_json(j[c], pointer + "/" + std::to_string(c));
    if (c == 0) m.resize(col.size(), static_cast<Index>(j.size()));
    if (col.size() != m.rows()) throw ConfigError(pointer + "/" + std::to_string(c), "ragged matrix");
    m.col(static_cast<Index>(c)) = col;
  }
  return m;
}

Json table_to_json(const TabulatedFunction& table) {
  Json j;
  j["format"] = "sdhom.table";
  j["dim"] = table.factor(0).dim;
  Json radius = Json::array(), points = Json::array();
  for (const auto& f : table.factors()) {
    radius.push_back(f.radius);
    points.push_back(f.points_per_axis);
  }
  j["radius"] = radius;
  j["points_per_axis"] = points;
  j["rule"] = rule_name(table.rule());
  j["values"] = vector_to_json(table.values());
  return j;
}

TabulatedFunction table_from_json(const Json& j, const std::string& pointer) {
  const Json& format = member(j, "format", pointer);
  if (format != "sdhom.table") throw ConfigError(pointer + "/format", "not an sdhom.table record");
  const int dim = int_from_json(member(j, "dim", pointer), pointer + "/dim");
  const Json& radius = member(j, "radius", pointer);
  const Json& points = member(j, "points_per_axis", pointer);
  if (!radius.is_array() || !points.is_array() || radius.size() != points.size() || radius.empty() ||
      radius.size() > 2)
    throw ConfigError(pointer + "/radius", "radius and points_per_axis need one entry per factor");
  std::vector<BoxGrid> factors;
  for (std::size_t f = 0; f < radius.size(); ++f) {
    try {
      factors.emplace_back(dim, number_from_json(radius[f], pointer + "/radius/" + std::to_string(f)),
                           int_from_json(points[f], pointer + "/points_per_axis/" + std::to_string(f)));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(pointer + "/points_per_axis/" + std::to_string(f), e.what());
    }
  }
  Interpolation rule = Interpolation::multilinear;
  if (j.contains("rule")) rule = rule_from_name(j["rule"].get<std::string>(), pointer + "/rule");
  Eigen::VectorXd values = vector_from_json(member(j, "values", pointer), pointer + "/values");
  try {
    return TabulatedFunction(std::move(factors), std::move(values), rule);
  } catch (const Error& e) {
    throw ConfigError(pointer + "/values", e.what());
  }
}

Json field_to_json(const MonotoneField& field) {
  Json j;
  j["kind"] = to_string(field.kind);
  j["dim"] = field.dim;
  j["p"] = field.p;
  Json regions = Json::array();
  for (const auto& r : field.regions) {
    Json reg;
    if (field.dim == 1) {
      reg["x_interval"] = {r.box.lo[0], r.box.hi[0]};
    } else {
      Json box = Json::array();
      for (int k = 0; k < field.dim; ++k) box.push_back({r.box.lo[k], r.box.hi[k]});
      reg["x_box"] = box;
    }
    Json params;
    params["coefficient"] = r.coefficient;
    if (field.kind == FieldKind::potential_plus_skew) {
      params["drift"] = vector_to_json(r.drift);
      params["gamma"] = matrix_to_json(r.gamma);
    }
    if (field.kind == FieldKind::sampled_graph_1d) {
      Json g = Json::array();
      for (const auto& [xi, eta] : r.graph) g.push_back({xi, eta});
      params["graph"] = g;
    }
    reg["parameters"] = params;
    regions.push_back(reg);
  }
  j["regions"] = regions;
  if (field.growth) {
    const Growth& g = *field.growth;
    j["growth"] = {{"c1", g.c1}, {"c2", g.c2}, {"m1", g.m1}, {"m2", g.m2}, {"p", g.p}};
  }
  return j;
}

MonotoneField field_from_json(const Json& j, const std::string& pointer) {
  MonotoneField f;
  const Json& kind = member(j, "kind", pointer);
  if (!kind.is_string()) throw ConfigError(pointer + "/kind", "expected a string");
  try {
    f.kind = field_kind_from_string(kind.get<std::string>());
  } catch (const Error& e) {
    throw ConfigError(pointer + "/kind", e.what());
  }
  f.dim = j.contains("dim") ? int_from_json(j["dim"], pointer + "/dim") : 1;
  if (f.dim < 1 || f.dim > 2) throw ConfigError(pointer + "/dim", "dim must be 1 or 2");
  f.p = j.contains("p") ? number_from_json(j["p"], pointer + "/p") : 2.0;
  const Json& regions = member(j, "regions", pointer);
  if (!regions.is_array() || regions.empty()) throw ConfigError(pointer + "/regions", "expected a non-empty array");
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const std::string at = pointer + "/regions/" + std::to_string(r);
    const Json& reg = regions[r];
    FieldRegion region;
    region.box.lo = Point::Zero(f.dim);
    region.box.hi = Point::Ones(f.dim);
    if (reg.contains("x_interval")) {
      const Eigen::VectorXd iv = vector_from_json(reg["x_interval"], at + "/x_interval");
      if (iv.size() != 2) throw ConfigError(at + "/x_interval", "expected [lo, hi]");
      region.box.lo[0] = iv[0];
      region.box.hi[0] = iv[1];
    } else if (reg.contains("x_box")) {
      const Json& box = reg["x_box"];
      if (!box.is_array() || static_cast<int>(box.size()) != f.dim)
        throw ConfigError(at + "/x_box", "expected one [lo, hi] pair per axis");
      for (int k = 0; k < f.dim; ++k) {
        const Eigen::VectorXd iv = vector_from_json(box[static_cast<std::size_t>(k)], at + "/x_box/" + std::to_string(k));
        if (iv.size() != 2) throw ConfigError(at + "/x_box/" + std::to_string(k), "expected [lo, hi]");
        region.box.lo[k] = iv[0];
        region.box.hi[k] = iv[1];
      }
    } else {
      throw ConfigError(at, "region needs x_interval or x_box");
    }
    for (int k = 0; k < f.dim; ++k)
      if (!(region.box.lo[k] < region.box.hi[k]) || region.box.lo[k] < 0.0 || region.box.hi[k] > 1.0)
        throw ConfigError(at, "region box must satisfy 0 <= lo < hi <= 1");
    const Json& params = member(reg, "parameters", at);
    const std::string pp = at + "/parameters";
    region.coefficient = params.contains("coefficient") ? number_from_json(params["coefficient"], pp + "/coefficient") : 1.0;
    region.drift = params.contains("drift") ? point_from_json(params["drift"], pp + "/drift", f.dim) : Point::Zero(f.dim);
    region.gamma = SmallMatrix::Zero(f.dim, f.dim);
    if (params.contains("gamma")) {
      const Eigen::MatrixXd g = matrix_from_json(params["gamma"], pp + "/gamma");
      if (g.rows() != f.dim || g.cols() != f.dim) throw ConfigError(pp + "/gamma", "gamma must be dim x dim");
      region.gamma = g;
    }
    if (params.contains("graph")) {
      const Json& g = params["graph"];
      if (!g.is_array()) throw ConfigError(pp + "/graph", "expected an array of [xi, eta] pairs");
      for (std::size_t i = 0; i < g.size(); ++i) {
        const Eigen::VectorXd pair = vector_from_json(g[i], pp + "/graph/" + std::to_string(i));
        if (pair.size() != 2) throw ConfigError(pp + "/graph/" + std::to_string(i), "expected [xi, eta]");
        region.graph.emplace_back(pair[0], pair[1]);
      }
    }
    f.regions.push_back(std::move(region));
  }
  if (j.contains("growth")) {
    const Json& g = j["growth"];
    const std::string gp = pointer + "/growth";
    Growth growth;
    growth.c1 = number_from_json(member(g, "c1", gp), gp + "/c1");
    growth.c2 = number_from_json(member(g, "c2", gp), gp + "/c2");
    growth.m1 = number_from_json(member(g, "m1", gp), gp + "/m1");
    growth.m2 = number_from_json(member(g, "m2", gp), gp + "/m2");
    growth.p = g.contains("p") ? number_from_json(g["p"], gp + "/p") : f.p;
    f.growth = growth;
  }
  try {
    f.validate();
  } catch (const Error& e) {
    throw ConfigError(pointer.empty() ? "/" : pointer, e.what());
  }
  return f;
}

Json cell_solution_to_json(const CellSolution& s) {
  Json j;
  j["a"] = vector_to_json(s.a);
  j["b"] = vector_to_json(s.b);
  j["value"] = number_to_json(s.value);
  j["kkt_residual"] = number_to_json(s.kkt_residual);
  j["iterations"] = s.iterations;
  j["phi"] = vector_to_json(s.corrector.phi);
  j["g"] = matrix_to_json(s.corrector.g);
  return j;
}

Json gap_report_to_json(const GapReport& r) {
  Json j;
  j["max_gap"] = number_to_json(r.max_gap);
  j["argmax_point"] = vector_to_json(r.argmax_point);
  j["tolerance_used"] = r.tolerance_used;
  j["nodes_checked"] = r.nodes_checked;
  j["min_basic_margin"] = number_to_json(r.min_basic_margin);
  j["passed"] = r.passed();
  return j;
}

Json hom_sidecar_to_json(const HomLagrangian& hom) {
  Json j;
  j["cell_nodes"] = hom.cell.nodes_per_axis;
  j["cell_dim"] = hom.cell.dim;
  j["residuals"] = vector_to_json(hom.residuals);
  j["iterations"] = vector_to_json(hom.iterations.cast<double>());
  j["max_residual"] = number_to_json(hom.residuals.size() ? hom.residuals.maxCoeff() : 0.0);
  if (hom.growth) {
    const auto& g = *hom.growth;
    j["growth"] = {{"c0", g.c0}, {"c1", g.c1}, {"p", g.p}, {"n0", g.n0}, {"n1", g.n1}};
  }
  j["selfdual"] = gap_report_to_json(hom.selfdual);
  Json b;
  b["nodes_checked"] = hom.bounds.nodes_checked;
  b["violations"] = hom.bounds.violations;
  b["worst_margin"] = number_to_json(hom.bounds.worst_margin);
  b["tolerance_used"] = hom.bounds.tolerance_used;
  b["passed"] = hom.bounds.passed();
  j["bounds"] = b;
  return j;
}

Json solver_report_to_json(const SolverReport& r) {
  Json j;
  j["gap"] = number_to_json(r.gap);
  j["energy"] = number_to_json(r.energy);
  j["u"] = vector_to_json(r.u);
  j["f"] = matrix_to_json(r.flux.f);
  j["iterations"] = r.iterations;
  j["wall_time_ms"] = r.wall_time * 1e3;
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ReportError, "cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ReportError, "missing artifact " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace sdhom
