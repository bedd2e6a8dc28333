#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace infmix::config {

// Small TOML subset: tables, dotted keys, inline tables, (multi-line) arrays, arrays of tables,
// basic and literal strings, integers, floats, booleans, comments. Throws ConfigError with a line number.
nlohmann::json parse_toml(std::string_view text);
// .json files are read as JSON, anything else as TOML
nlohmann::json load_file(const std::filesystem::path& p);

struct SystemSpec {
  std::string kind = "lsv";  // lsv | skew | synthetic
  double gamma = 1.25;
  std::string fiber = "halving";  // halving | quadratic
  double kappa = 0.0;
  // synthetic: "power_law" (p_n = n^{-(1+beta)}/zeta(1+beta)) or "table"
  std::string law = "power_law";
  double law_beta = 0.75;
  std::int64_t law_n = 20000;
  std::vector<double> table;
};

struct TailSpec {
  std::optional<double> beta;  // default 1/gamma (lsv, skew) or law_beta (synthetic)
  std::string ell = "fitted";  // fitted | constant | log_power
  double ell_c = 1.0;
  double ell_a = 0.0;
  bool smooth_tails = false;
  std::optional<double> q;
  std::int64_t samples = 1000000;
};

struct TowerSpec {
  int h_max = 10000;
  int bins = 64;
  int depth = 6;
  int approx_k = 5;
  int fiber_bins = 4;
  int diag_h_max = 500;  // truncation for tower-vector diagnostics
};

struct OperatorSpec {
  std::int64_t N = 10000;
  int family_depth = 6;
  int family_random = 32;
  double theta = 0.5;
  std::int64_t convcheck_n = 200;
  std::vector<int> eterm_k{2, 5, 10};
};

struct ObservableSpec {
  std::string kind = "bump";  // bump | affine | constant
  double amp = 1.0, c_t = 0.5, c_x2 = 0.5, sigma = 0.35, offset = 0.5;
  double a = 1.0, b_t = 0.0, c_fiber = 0.0;
};

struct MixingSpec {
  std::vector<std::int64_t> n_grid;
  std::string method = "operator";  // operator | montecarlo
  std::int64_t samples = 1000000;
  bool assert_limit = false;
  double tolerance = 0.2;
  ObservableSpec v, w;
};

struct ExperimentConfig {
  SystemSpec system;
  TailSpec tails;
  TowerSpec tower;
  OperatorSpec operators;
  MixingSpec mixing;
  std::uint64_t seed = 1;
  std::string out = "out";
  nlohmann::json raw;  // validated input, echoed into the manifest

  double beta() const;
};

// Schema validation and defaults. Throws ConfigError listing every problem found.
ExperimentConfig from_json(const nlohmann::json& j);
ExperimentConfig load(const std::filesystem::path& p);

std::vector<std::int64_t> geometric_grid(std::int64_t lo, std::int64_t hi, int per_decade);

}  // namespace infmix::config
