#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace infmix::selftest {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
  nlohmann::json witness;  // filled on failure
  double seconds = 0.0;
};

struct Report {
  std::vector<Check> checks;
  double seconds = 0.0;
  bool pass() const;
  nlohmann::json to_json() const;
};

// Module invariants at reduced scale. Honours the active fault (fault::set) so a deliberately
// broken build can be shown to fail.
Report run(std::uint64_t seed = 1);

}  // namespace infmix::selftest
