#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdhom/io.hpp"

namespace sdhom {

inline constexpr const char* kVersion = "0.1.0";

struct Resolutions {
  int cell_nodes = 64;
  double ab_radius = 2.0;
  int ab_nodes = 65;
  double selfdual_radius = 2.0;
  int selfdual_nodes = 65;
  int verify_samples = 41;
  double verify_radius = 4.0;
  // Elements per axis of the solve mesh.
  int mesh = 256;
  int sweep_elements = 1024;
  std::vector<int> inverse_eps{4, 8, 16, 32, 64};
};

struct Tolerances {
  double tol_gap = 1e-6;
  double tol_solve = 1e-6;
  double tol_dual = 1e-3;
};

// An experiment: a field, an ordered list of stages and their settings.
struct ExperimentConfig {
  std::optional<MonotoneField> field;
  std::vector<std::string> pipeline;
  Resolutions resolution;
  Tolerances tolerance;
  std::string source = "const:1";
  double solve_eps = 1.0;
  std::filesystem::path out_dir = "out";
  unsigned seed = 1;
  int threads = 0;
  int property_cases = 200;

  // Relative field paths resolve against base_dir. Throws ConfigError with a
  // JSON pointer to the offending entry.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
  // Canonical form (field inlined, out_dir omitted) used for hashing.
  Json to_json() const;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"verify", "selfdualize", "cell", "tabulate", "solve", "sweep", "checks"};
  return names;
}

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

struct StageRecord {
  std::string name;
  // "pass", "fail", "error" or "stalled".
  std::string status;
  std::string message;
  double wall_time_ms = 0.0;
  std::vector<std::string> artifacts;
  Json summary = Json::object();
};

struct RunManifest {
  std::string config_hash;
  Json versions;
  unsigned seed = 1;
  Json config;
  std::vector<StageRecord> stages;
  std::filesystem::path out_dir;

  bool passed() const;
  bool stalled() const;
  // 0 when every stage passed, 3 on a solver stall, 1 otherwise.
  int exit_code() const;
  Json to_json(bool with_times = true) const;
  static RunManifest from_json(const Json& j, const std::filesystem::path& out_dir);
  static RunManifest load(const std::filesystem::path& path);
};

// Runs the stages in order, writing artifacts and manifest.json under
// config.out_dir. Hard failures (exceptions) stop the run; check failures
// are recorded and the run continues.
RunManifest run(const ExperimentConfig& config);

// Text summary rendered only from the manifest and its artifacts; written to
// report.txt next to the manifest. Throws ReportError on missing artifacts.
std::string report(const RunManifest& manifest);

}  // namespace sdhom
