#include "infmix/hypotheses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "infmix/sampling.hpp"

namespace infmix::hypotheses {

using systems::SkewPoint;

HyperbolicityReport check_hyperbolicity(const systems::SkewProduct& sys, std::int64_t pairs, std::uint64_t seed,
                                        int n_max) {
  HyperbolicityReport r;
  r.gamma0 = sys.fiber().contraction();
  r.n_max = n_max;
  r.pairs = pairs;
  r.inf_ratio = std::numeric_limits<double>::infinity();
  auto rng = sampling::make_rng(seed, 7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& fib = sys.fiber();
  for (std::int64_t i = 0; i < pairs; ++i) {
    SkewPoint p{u(rng), u(rng)};
    double d0 = (1.0 - p.x2) * u(rng);
    SkewPoint q{p.x1, p.x2 + d0};
    double d = d0;
    double g = 1.0;
    double sup_norm = 0.0;
    for (int n = 1; n <= n_max; ++n) {
      d = fib.separation_step(p.x2, d);
      p = sys.step(p);
      q = sys.step(q);
      g *= r.gamma0;
      double ratio = d / g;
      r.sup_ratio = std::max(r.sup_ratio, ratio);
      r.inf_ratio = std::min(r.inf_ratio, ratio);
      if (d0 > 0) {
        sup_norm = std::max(sup_norm, ratio / d0);
        r.max_rel_dev_from_rate = std::max(r.max_rel_dev_from_rate, std::abs(ratio / d0 - 1.0));
      }
      r.max_direct_abs_err = std::max(r.max_direct_abs_err, std::abs((q.x2 - p.x2) - d));
    }
    r.sup_normalized = std::max(r.sup_normalized, sup_norm);

    // the induced map sends a stable fiber into a stable fiber
    SkewPoint a{systems::from_chart(u(rng)), u(rng)};
    SkewPoint b{a.x1, u(rng)};
    try {
      auto fa = systems::induced_step(sys, a);
      auto fb = systems::induced_step(sys, b);
      if (fa.first.x1 != fb.first.x1 || fa.second != fb.second) r.contraction_ok = false;
    } catch (const std::exception&) {
    }
  }
  if (pairs == 0) r.inf_ratio = 0.0;
  r.column_separation_constant = column_separation_constant(sys, std::min<std::int64_t>(pairs, 2000), seed);
  return r;
}

double column_separation_constant(const systems::SkewProduct& sys, std::int64_t pairs, std::uint64_t seed) {
  auto rng = sampling::make_rng(seed, 11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double C = 0.0;
  std::int64_t done = 0;
  for (std::int64_t tries = 0; done < pairs && tries < 50 * pairs; ++tries) {
    double x1 = 0.5 + 0.49 * u(rng);
    double delta = 1e-7 * (0.1 + u(rng));
    SkewPoint p{x1, u(rng)};
    SkewPoint q{x1 + delta, std::clamp(p.x2 + delta * (u(rng) - 0.5), 0.0, 1.0)};
    std::int64_t h;
    try {
      h = systems::return_time(sys, p, 100000);
      if (systems::return_time(sys, q, 100000) != h) continue;
    } catch (const std::exception&) {
      continue;
    }
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(h));
    for (std::int64_t j = 0; j < h; ++j) {
      dist.push_back(std::max(std::abs(p.x1 - q.x1), std::abs(p.x2 - q.x2)));
      p = sys.step(p);
      q = sys.step(q);
    }
    double dF = std::max(std::abs(p.x1 - q.x1), std::abs(p.x2 - q.x2));
    if (dF <= 0) continue;
    for (double dj : dist) C = std::max(C, dj / dF);
    ++done;
  }
  return C;
}

double max_fiber_derivative(const systems::Fiber& fiber, int grid) {
  double m = 0.0;
  for (int i = 0; i < grid; ++i) {
    double x = static_cast<double>(i) / (grid - 1);
    m = std::max(m, std::abs(fiber.derivative(x)));
  }
  return m;
}

}  // namespace infmix::hypotheses
