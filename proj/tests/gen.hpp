#pragma once
// Hand-rolled generators for property tests: every case is reproducible from (seed, case index).

#include <cstdint>
#include <random>
#include <vector>

namespace gen {

struct Rng {
  std::mt19937_64 e;
  explicit Rng(std::uint64_t seed) : e(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(e); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(e); }
  bool coin() { return integer(0, 1) == 1; }
};

// Random sub-probability vector p_1..p_n (total in [lo_mass, 1]).
inline std::vector<double> prob_table(Rng& r, int n, double lo_mass = 0.5) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double s = 0.0;
  for (auto& x : p) s += (x = r.uniform() * (r.coin() ? 1.0 : 0.05));
  double total = r.uniform(lo_mass, 1.0);
  for (auto& x : p) x *= total / s;
  return p;
}

// Runs body(rng, case) for `cases` independent cases.
template <class F>
void for_all(int cases, std::uint64_t seed, F&& body) {
  for (int c = 0; c < cases; ++c) {
    Rng r(seed * 1000003ULL + static_cast<std::uint64_t>(c));
    body(r, c);
  }
}

}  // namespace gen
