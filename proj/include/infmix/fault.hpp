#pragma once

#include <string>
#include <vector>

namespace infmix::fault {

enum class Kind { None, LevelLift, Normalizer };

// Deliberate defects for selftest. No-ops unless built with INFMIX_FAULT_INJECTION.
void set(Kind k);
Kind current();
bool available();
Kind parse(const std::string& name);

void perturb_normalizer(std::vector<double>& a);
double perturb_level_mass(double mass, int level);

}  // namespace infmix::fault
