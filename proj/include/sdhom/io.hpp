#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sdhom/cell.hpp"
#include "sdhom/dirichlet.hpp"
#include "sdhom/fields.hpp"

namespace sdhom {

using Json = nlohmann::ordered_json;

// Doubles with +inf written as the string "inf".
Json number_to_json(double v);
double number_from_json(const Json& j, const std::string& pointer);

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& pointer);
// Column-major matrices as a list of columns.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& pointer);

// {"format": "sdhom.table", "dim", "radius": [...], "points_per_axis": [...],
//  "rule", "values": [...]} with one radius and point count per factor and
// row-major node order.
Json table_to_json(const TabulatedFunction& table);
TabulatedFunction table_from_json(const Json& j, const std::string& pointer = "");

// {"kind", "dim", "p", "regions": [{"x_interval" | "x_box", "parameters"}],
//  "growth": {"c1", "c2", "m1", "m2", "p"}}.
Json field_to_json(const MonotoneField& field);
MonotoneField field_from_json(const Json& j, const std::string& pointer = "");

Json cell_solution_to_json(const CellSolution& s);
// Residual sidecar of a tabulated L_hom: cell grid, residuals, iterations and
// the check reports.
Json hom_sidecar_to_json(const HomLagrangian& hom);
Json gap_report_to_json(const GapReport& r);
Json solver_report_to_json(const SolverReport& r);

Json read_json(const std::filesystem::path& path);
// Writes with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sdhom
