#include "infmix/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "infmix/error.hpp"
#include "infmix/stats.hpp"

namespace infmix::sampling {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x1f2e3d4cu};
  return std::mt19937_64(seq);
}

OrbitStream::OrbitStream(Dynamics dyn, std::uint64_t seed, std::uint64_t stream, std::int64_t burn_in,
                         std::int64_t cap)
    : dyn_(dyn), rng_(make_rng(seed, stream)), cap_(cap) {
  if (dyn_.kind == Dynamics::Kind::Synthetic) return;
  restart(burn_in);
  restarts_ = 0;
}

bool OrbitStream::advance(Visit& v) {
  v.t = t_;
  v.x2 = x2_;
  v.censored = false;
  if (dyn_.kind == Dynamics::Kind::Synthetic) {
    v.t = unif_(rng_);
    v.phi = dyn_.synthetic->induced_chart(v.t).first;
    if (v.phi > static_cast<std::int64_t>(dyn_.synthetic->probabilities().size())) v.censored = true;
    return true;
  }
  try {
    auto [h, tn] = dyn_.lsv->induced_chart(t_, cap_);
    v.phi = h;
    if (dyn_.kind == Dynamics::Kind::Skew) x2_ = dyn_.skew->fiber().induced(h, x2_);
    t_ = tn;
    return true;
  } catch (const ReturnOverflow&) {
    v.phi = cap_ + 1;
    v.censored = true;
    return false;
  }
}

void OrbitStream::restart(std::int64_t burn) {
  for (;;) {
    t_ = unif_(rng_);
    x2_ = unif_(rng_);
    bool ok = true;
    Visit v;
    for (std::int64_t i = 0; i < burn && ok; ++i) ok = advance(v);
    if (ok) break;
  }
  ++restarts_;
}

Visit OrbitStream::next() {
  Visit v;
  if (!advance(v)) {
    ++censored_;
    restart(100);
  }
  return v;
}

TailEstimate empirical_tail(Dynamics dyn, std::int64_t samples, std::uint64_t seed, FitWindow window,
                            std::int64_t cap) {
  if (samples < 10000) throw DomainError("empirical_tail needs at least 1e4 samples");
  if (window.lo < 1 || window.hi <= window.lo) throw DomainError("empirical_tail: bad fit window");
  OrbitStream orbit(dyn, seed, 0, 10000, cap);
  std::vector<std::int64_t> phis(static_cast<std::size_t>(samples));
  TailEstimate est;
  for (auto& p : phis) {
    auto v = orbit.next();
    p = v.phi;
    if (v.censored) ++est.censored;
  }
  est.samples = samples;
  est.restarts = orbit.restarts();
  std::sort(phis.begin(), phis.end());

  std::vector<double> lx, ly;
  const double step = std::pow(10.0, 0.1);
  for (double x = 1.0;; x *= step) {
    auto n = static_cast<std::int64_t>(std::llround(x));
    if (!est.n.empty() && n <= est.n.back()) continue;
    auto above = phis.end() - std::upper_bound(phis.begin(), phis.end(), n);
    if (above == 0) break;
    double tail = static_cast<double>(above) / static_cast<double>(samples);
    est.n.push_back(n);
    est.tail.push_back(tail);
    if (n >= window.lo && n <= window.hi) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(tail));
    }
  }
  if (lx.size() < 3) throw NumericError("systems.empirical_tail", "insufficient distinct return times in fit window");
  auto fit = stats::fit_line(lx, ly);
  est.beta_hat = -fit.slope;
  est.beta_se = fit.slope_se;
  est.fit_points = lx.size();
  return est;
}

void dump_orbit(Dynamics dyn, std::int64_t steps, std::uint64_t seed, std::ostream& os) {
  if (dyn.kind == Dynamics::Kind::Synthetic) throw DomainError("orbit dumps need an interval map");
  auto rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  systems::SkewPoint p{systems::from_chart(u(rng)), u(rng)};
  const bool skew = dyn.kind == Dynamics::Kind::Skew;
  os << (skew ? "step,x1,x2,in_Y\n" : "step,x1,in_Y\n");
  os.precision(17);
  for (std::int64_t i = 0; i <= steps; ++i) {
    os << i << ',' << p.x1;
    if (skew) os << ',' << p.x2;
    os << ',' << (p.x1 >= 0.5 ? 1 : 0) << '\n';
    if (skew) p = dyn.skew->step(p);
    else p.x1 = dyn.lsv->step(p.x1);
  }
}

}  // namespace infmix::sampling
