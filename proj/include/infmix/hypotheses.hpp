#pragma once

#include <cstdint>

#include "infmix/systems.hpp"

namespace infmix::hypotheses {

struct HyperbolicityReport {
  double gamma0 = 0.0;
  int n_max = 0;
  std::int64_t pairs = 0;
  // sup and inf over pairs and 1 <= n <= n_max of d_n / gamma0^n (propagated separations)
  double sup_ratio = 0.0;
  double inf_ratio = 0.0;
  // largest |d_n / (d_0 gamma0^n) - 1| over pairs and n; zero for exact halving
  double max_rel_dev_from_rate = 0.0;
  // largest |(x2'_n - x2_n) - d_n| over pairs and n, iterating both points directly
  double max_direct_abs_err = 0.0;
  // sup over pairs of sup_n d_n / (d_0 gamma0^n)
  double sup_normalized = 0.0;
  bool contraction_ok = true;
  double column_separation_constant = 0.0;
};

HyperbolicityReport check_hyperbolicity(const systems::SkewProduct& sys, std::int64_t pairs, std::uint64_t seed,
                                        int n_max = 60);

// sup over sampled same-cylinder pairs and 0 <= j < phi of d(f^j y, f^j y') / d(F y, F y')
double column_separation_constant(const systems::SkewProduct& sys, std::int64_t pairs, std::uint64_t seed);

// Largest fiber-derivative magnitude on a grid; must not exceed the declared contraction.
double max_fiber_derivative(const systems::Fiber& fiber, int grid = 1001);

}  // namespace infmix::hypotheses
