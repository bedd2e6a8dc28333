#include "infmix/fault.hpp"

#include <atomic>

#include "infmix/error.hpp"

namespace infmix::fault {

namespace {
std::atomic<Kind> active{Kind::None};
}

bool available() {
#ifdef INFMIX_FAULT_INJECTION
  return true;
#else
  return false;
#endif
}

void set(Kind k) {
  if (k != Kind::None && !available()) throw ConfigError("fault injection not compiled in");
  active = k;
}

Kind current() { return active.load(); }

Kind parse(const std::string& name) {
  if (name.empty() || name == "none") return Kind::None;
  if (name == "aj" || name == "level-lift") return Kind::LevelLift;
  if (name == "an" || name == "normalizer") return Kind::Normalizer;
  throw ConfigError("unknown fault '" + name + "' (expected none, aj, an)");
}

void perturb_normalizer(std::vector<double>& a) {
#ifdef INFMIX_FAULT_INJECTION
  if (active.load() != Kind::Normalizer) return;
  for (std::size_t n = 1; n < a.size(); ++n) a[n] *= 1.5;
#else
  (void)a;
#endif
}

double perturb_level_mass(double mass, int level) {
#ifdef INFMIX_FAULT_INJECTION
  if (active.load() == Kind::LevelLift && level >= 1) return mass * 1.5 + 1e-3;
#else
  (void)level;
#endif
  return mass;
}

}  // namespace infmix::fault
