#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "infmix/systems.hpp"

namespace infmix::sampling {

// Non-owning view of a system that can be sampled by its induced map.
struct Dynamics {
  enum class Kind { Lsv, Skew, Synthetic };
  Kind kind = Kind::Lsv;
  const systems::LsvMap* lsv = nullptr;
  const systems::SkewProduct* skew = nullptr;
  const systems::SyntheticInduced* synthetic = nullptr;

  static Dynamics of(const systems::LsvMap& m) { return {Kind::Lsv, &m, nullptr, nullptr}; }
  static Dynamics of(const systems::SkewProduct& s) { return {Kind::Skew, &s.base(), &s, nullptr}; }
  static Dynamics of(const systems::SyntheticInduced& s) { return {Kind::Synthetic, nullptr, nullptr, &s}; }
};

struct Visit {
  double t = 0.0;   // base point in chart coordinates
  double x2 = 0.0;  // fiber coordinate (skew products)
  std::int64_t phi = 0;
  bool censored = false;  // phi exceeded the cap; the stream restarted afterwards
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

// Burned-in orbit of the induced map; each call to next() reports the current base point with
// its return time and moves to the image.
class OrbitStream {
 public:
  OrbitStream(Dynamics dyn, std::uint64_t seed, std::uint64_t stream, std::int64_t burn_in = 10000,
              std::int64_t cap = systems::LsvMap::kDefaultCap);
  Visit next();
  std::int64_t restarts() const { return restarts_; }
  std::int64_t censored() const { return censored_; }

 private:
  void restart(std::int64_t burn);
  bool advance(Visit& v);
  Dynamics dyn_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::int64_t cap_;
  double t_ = 0.5, x2_ = 0.5;
  std::int64_t restarts_ = 0;
  std::int64_t censored_ = 0;
};

struct FitWindow {
  std::int64_t lo = 10;
  std::int64_t hi = 10000;
};

struct TailEstimate {
  std::vector<std::int64_t> n;
  std::vector<double> tail;  // empirical P(phi > n)
  double beta_hat = 0.0;
  double beta_se = 0.0;
  std::int64_t samples = 0;
  std::int64_t censored = 0;
  std::int64_t restarts = 0;
  std::size_t fit_points = 0;
};

TailEstimate empirical_tail(Dynamics dyn, std::int64_t samples, std::uint64_t seed, FitWindow window = {},
                            std::int64_t cap = systems::LsvMap::kDefaultCap);

// CSV rows (step, x1[, x2], in_Y) of the underlying map started from a seeded uniform point of Y.
void dump_orbit(Dynamics dyn, std::int64_t steps, std::uint64_t seed, std::ostream& os);

}  // namespace infmix::sampling
