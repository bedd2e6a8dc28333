#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "infmix/config.hpp"
#include "infmix/mixing.hpp"
#include "infmix/operators.hpp"
#include "infmix/regvar.hpp"
#include "infmix/renewal.hpp"
#include "infmix/systems.hpp"
#include "infmix/tower.hpp"

namespace infmix::pipeline {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& p);

// Systems, bundle and tail law described by a config; heavy parts are built on first use.
class Context {
 public:
  explicit Context(config::ExperimentConfig cfg);

  const config::ExperimentConfig& cfg() const { return cfg_; }
  bool quotient_lsv() const { return map_.has_value(); }
  const systems::LsvMap& map() const { return *map_; }
  const systems::InducedSystem& induced() const { return *induced_; }
  const renewal::ReturnDistribution* distribution() const { return dist_ ? &*dist_ : nullptr; }
  sampling::Dynamics dynamics() const;

  const operators::OperatorBundle& bundle();
  // a second bundle with half the bins, for bias estimates
  const operators::OperatorBundle& coarse_bundle();
  // same bins, truncated at min(h_max, diag_h_max): small enough for functions on the tower
  const operators::OperatorBundle& diag_bundle();
  // law used for a_n, valid up to horizon()
  const regvar::TailLaw& law();
  std::int64_t horizon() const;
  tower::TwoSidedSystem two_sided(int h_max) const;
  tower::BaseObservable observable(const config::ObservableSpec& o) const;

 private:
  config::ExperimentConfig cfg_;
  std::optional<systems::LsvMap> map_;
  std::optional<systems::SkewProduct> skew_;
  std::optional<renewal::ReturnDistribution> dist_;
  std::unique_ptr<systems::SyntheticInduced> synthetic_;
  std::unique_ptr<systems::InducedSystem> induced_;
  std::optional<operators::OperatorBundle> bundle_, coarse_, diag_;
  std::optional<regvar::TailLaw> law_;
};

// Each stage returns its JSON report and may add CSV tables (name -> contents).
struct StageOutput {
  nlohmann::json report;
  std::vector<std::pair<std::string, std::string>> tables;
};

StageOutput stage_tails(Context& ctx);
StageOutput stage_tower(Context& ctx);
StageOutput stage_spectrum(Context& ctx);
StageOutput stage_convcheck(Context& ctx);
StageOutput stage_eterms(Context& ctx);
StageOutput stage_mixing(Context& ctx, mixing::CorrelationSeries* series_out = nullptr);
nlohmann::json rate_report(const mixing::CorrelationSeries& s, const regvar::TailLaw& law);

struct RunResult {
  std::filesystem::path out;
  nlohmann::json manifest;
  bool limit_ok = true;
  std::string limit_message;
};

// tails -> tower -> operators -> mixing; writes artifacts and manifest.json into out.
// Artifacts are byte-identical for identical config and seed; timing lives only in the manifest.
RunResult run(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

// Writes name -> contents into dir and returns manifest entries.
nlohmann::json write_artifacts(const std::filesystem::path& dir,
                               const std::vector<std::pair<std::string, std::string>>& files);

struct VerifyResult {
  std::size_t files = 0;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};
VerifyResult verify(const std::filesystem::path& out);

}  // namespace infmix::pipeline
