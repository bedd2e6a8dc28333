#include <doctest.h>

#include <cmath>

#include "gen.hpp"
#include "infmix/error.hpp"
#include "infmix/operators.hpp"
#include "infmix/renewal.hpp"
#include "infmix/sampling.hpp"

using namespace infmix;
using namespace infmix::operators;
using systems::SyntheticInduced;

namespace {
std::vector<double> ones(const OperatorBundle& b) { return std::vector<double>(b.piece_count(), 1.0); }

double tower_dot(const OperatorBundle& b, std::span<const double> f, std::span<const double> g) {
  std::vector<double> fg(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) fg[i] = f[i] * g[i];
  return b.tower_integral(fg);
}

const OperatorBundle& lsv_bundle() {
  static auto b = OperatorBundle::build(systems::LsvInduced(systems::LsvMap(1.25)), 32, 500);
  return b;
}
}  // namespace

TEST_CASE("invariant density: synthetic and doubling fixtures are uniform") {
  auto s = OperatorBundle::build(SyntheticInduced({0.3, 0.2, 0.5}), 16, 3);
  for (int b = 0; b < s.bins(); ++b) CHECK(s.density(b) == doctest::Approx(1.0).epsilon(1e-12));
  auto d = OperatorBundle::build(systems::DoublingInduced(), 64, 1);
  for (int b = 0; b < d.bins(); ++b) CHECK(std::abs(d.density(b) - 1.0) <= 1e-8);
  CHECK(s.constant_defect() <= 1e-10);
  CHECK(s.big_images() > 0.0);
}

TEST_CASE("invariant density: LSV gamma 1 against an orbit histogram") {
  // fine Ulam density aggregated to 32 cells vs 4e6 induced-orbit visits
  auto b = OperatorBundle::build(systems::LsvInduced(systems::LsvMap(1.0)), 1024, 2000);
  CHECK(b.power_residual() <= 1e-12);
  const int C = 32;
  std::vector<double> ulam(C, 0.0), hist(C, 0.0);
  for (int i = 0; i < b.bins(); ++i) ulam[i * C / b.bins()] += b.bin_mass()[i];
  systems::LsvMap m(1.0);
  sampling::OrbitStream orbit(sampling::Dynamics::of(m), 17, 0);
  const int S = 4000000;
  for (int i = 0; i < S; ++i) {
    auto v = orbit.next();
    hist[std::min(C - 1, static_cast<int>(v.t * C))] += 1.0 / S;
  }
  for (int c = 0; c < C; ++c) CHECK(std::abs(hist[c] / ulam[c] - 1.0) <= 0.02);
}

TEST_CASE("T_n basics") {
  auto b = OperatorBundle::build(SyntheticInduced({0.5, 0.5}), 4, 2);
  auto v = ones(b);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * i;
  CHECK(b.T_n(v, 0) == v);
  CHECK_THROWS_AS(b.T_n(std::vector<double>(3, 1.0), 2), DomainError);

  auto det = OperatorBundle::build(SyntheticInduced({1.0}), 8, 1);
  auto T = det.T_sequence(ones(det), 200);
  for (int n = 1; n <= 200; ++n)
    for (double x : T.g[n]) CHECK(x == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("T_n 1_Y is the scalar renewal sequence") {
  auto u = renewal::renewal_sequence(renewal::ReturnDistribution::from_table({0.5, 0.5}), 2000);
  auto b = OperatorBundle::build(SyntheticInduced({0.5, 0.5}), 4, 2);
  auto T = b.T_sequence(ones(b), 2000);
  for (int n = 1; n <= 2000; ++n)
    for (double x : T.g[n]) CHECK(std::abs(x - u[n]) <= 1e-10);

  gen::for_all(4, 51, [](gen::Rng& r, int) {
    auto p = gen::prob_table(r, r.integer(2, 12), 0.999);
    double s = 0.0;
    for (double x : p) s += x;
    for (double& x : p) x /= s;
    auto d = renewal::ReturnDistribution::from_table(p);
    auto u = renewal::renewal_sequence(d, 500);
    auto b = OperatorBundle::build(SyntheticInduced(p), 8, static_cast<int>(p.size()));
    auto T = b.T_sequence(ones(b), 500);
    for (int n = 1; n <= 500; ++n)
      for (double x : T.g[n]) CHECK(std::abs(x - u[n]) <= 1e-10);
  });
}

TEST_CASE("A_j: Kronecker structure and level mass") {
  auto b = OperatorBundle::build(SyntheticInduced({0.5, 0.5}), 4, 2);
  auto A1 = b.A_j(ones(b), 1);
  CHECK(b.tower_integral(A1) == doctest::Approx(0.5).epsilon(1e-14));
  auto A0 = b.A_j(ones(b), 0);
  CHECK(b.tower_integral(A0) == doctest::Approx(1.0).epsilon(1e-14));
  const auto& L = lsv_bundle();
  auto v = ones(L);
  for (int j : {0, 3, 17}) {
    auto A = L.A_j(v, j);
    for (std::size_t i = 0; i < L.piece_count(); ++i)
      for (int l = 0; l < L.pieces()[i].h; ++l) {
        double x = A[L.offset(i) + l];
        CHECK(x == (l == j ? 1.0 : 0.0));
      }
    CHECK(L.tower_integral(A) == doctest::Approx(L.tail(j)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(L.A_j(v, -1), DomainError);
}

TEST_CASE("level-mass inequality, every j <= 100, k <= 20") {
  auto syn = OperatorBundle::build(SyntheticInduced([] {
    std::vector<double> p(400);
    for (int n = 1; n <= 400; ++n) p[n - 1] = std::pow(n, -1.75) / 2.0;
    return p;
  }()), 8, 400);
  auto r = check_level_mass(syn, 100, 20);
  CHECK(r.violations == 0);
  CHECK(r.checked == 101 * 20);
  auto l = check_level_mass(lsv_bundle(), 100, 20);
  CHECK(l.violations == 0);
  CHECK(l.max_slack_ratio <= 1.0 + 1e-12);
}

TEST_CASE("convolution identity") {
  auto half = OperatorBundle::build(SyntheticInduced({0.5, 0.5}), 4, 2);
  auto r = convolution_check(half, 200);
  CHECK(r.max_defect <= 1e-10);
  CHECK(r.defect_by_n.at(0) == 0.0);
  CHECK(r.partition_defect <= 1e-12);
  auto l = convolution_check(lsv_bundle(), 200);
  CHECK(l.max_defect <= std::max(l.truncation_mass, 1e-10));
  CHECK(l.truncation_mass == doctest::Approx(lsv_bundle().tail(500)));
}

TEST_CASE("duality of L and composition") {
  const auto& b = lsv_bundle();
  gen::for_all(3, 52, [&](gen::Rng& r, int) {
    std::vector<double> g(b.tower_size()), w(b.tower_size());
    for (auto& x : g) x = r.uniform(-1, 1);
    for (auto& x : w) x = r.uniform(-1, 1);
    double lhs = tower_dot(b, b.apply_L(g), w), rhs = tower_dot(b, g, b.apply_K(w));
    CHECK(std::abs(lhs - rhs) <= 1e-10);
  });
  std::vector<double> one(b.tower_size(), 1.0);
  auto Lone = b.apply_L(one);
  for (double x : Lone) {
    CHECK(x >= 0.0);
    CHECK(std::abs(x - 1.0) <= 1e-10);
  }
}

TEST_CASE("T_n mass never exceeds one") {
  const auto& b = lsv_bundle();
  auto T = b.T_sequence(ones(b), 1000);
  for (int n = 1; n <= 1000; n += 7) {
    double m = b.integrate(b.lift_bins(T.g[n]));
    CHECK(m >= 0.0);
    CHECK(m <= 1.0 + 1e-12);
  }
}

TEST_CASE("U_n - P on constants is the scalar a_n u_n - 1") {
  const double beta = 0.75;
  auto dist = renewal::ReturnDistribution::power_law(beta, 300);
  std::vector<double> p(dist.masses().begin(), dist.masses().end());
  auto b = OperatorBundle::build(SyntheticInduced(p), 4, 300);
  regvar::TailLaw law(beta, regvar::SlowlyVarying::constant(1.0));
  auto u = renewal::renewal_sequence(dist, 300);
  auto a = regvar::a_seq(law, 300);
  std::vector<std::int64_t> ns{10, 100, 300};
  auto rep = U_n_minus_P_norm(b, law, ns, 2, 2);
  for (std::size_t i = 0; i < ns.size(); ++i)
    CHECK(std::abs(rep[i].sup_on_constants - std::abs(a[ns[i]] * u[ns[i]] - 1.0)) <= 1e-10);

  // p_1 = 1 with a_n = 1: U_n = P on constants
  auto det = OperatorBundle::build(SyntheticInduced({1.0}), 4, 1);
  regvar::TailLaw flat(1.0, regvar::SlowlyVarying::constant(1.0), std::nullopt,
                       {100000, 1000000, 1000000, regvar::BetaOneForm::Ratio});
  // Ratio form at n = 1 gives a_1 = 1
  std::vector<std::int64_t> one{1};
  CHECK(U_n_minus_P_norm(det, flat, one, 1, 0)[0].sup_on_constants <= 1e-14);
}

TEST_CASE("U_n - P decreases on an LSV tower") {
  const auto& b = lsv_bundle();
  regvar::TailLaw law = b.tail_law(0.8);
  std::vector<std::int64_t> ns{10, 100, 400};
  auto rep = U_n_minus_P_norm(b, law, ns, 4, 4);
  CHECK(rep[1].sup_on_constants < rep[0].sup_on_constants);
  CHECK(rep[2].sup_on_constants < rep[1].sup_on_constants);
  for (const auto& x : rep) CHECK(x.lower_bound >= 0.0);
}

TEST_CASE("E-term decomposition") {
  const double beta = 0.75;
  auto dist = renewal::ReturnDistribution::power_law(beta, 2000);
  std::vector<double> p(dist.masses().begin(), dist.masses().end());
  auto b = OperatorBundle::build(SyntheticInduced(p), 4, 2000);
  regvar::TailLaw law(beta, regvar::SlowlyVarying::constant(1.0));
  ETermEngine eng(b, law, ones(b), 2000);
  std::vector<double> w0(b.piece_count());
  for (std::size_t i = 0; i < w0.size(); ++i) w0[i] = b.pieces()[i].lo < 0.5 ? 1.0 : 0.0;
  for (int k : {0, 2, 5, 10})
    for (std::int64_t n : {30, 300, 2000}) {
      auto r = eng.evaluate(w0, k, n);
      CHECK(r.identity_defect <= 1e-10);
      // the returning mass above level n-k is at most k mu(phi > n-k)
      CHECK(std::abs(r.e3) <= k * b.tail(n - k) * (1 + 1e-9) + 1e-15);
      CHECK(r.env_e3 == doctest::Approx(k * std::pow(static_cast<double>(n), -beta)));
    }
  CHECK_THROWS_AS(eng.evaluate(w0, 11, 30), DomainError);
  CHECK_THROWS_AS(eng.evaluate(w0, 2, 2001), DomainError);
  // k = 0: the pairing of (U_n - P) v with w
  auto r0 = eng.evaluate(w0, 0, 300);
  auto T = b.T_n(ones(b), 300);
  auto a = regvar::a_seq(law, 300);
  double pair = 0.0;
  for (std::size_t i = 0; i < w0.size(); ++i) pair += b.pieces()[i].pi * (a[300] * T[i] - 1.0) * w0[i];
  CHECK(r0.lhs == doctest::Approx(pair).epsilon(1e-12));
}

TEST_CASE("test family is normalised") {
  const auto& b = lsv_bundle();
  auto fam = test_family(b, 6, 8, 0.5, 3);
  REQUIRE(fam.size() == 1 + 6 + 8);
  CHECK(theta_norm(b, fam.front(), 0.5) == 1.0);
  // cylinder indicators: sup 1 plus oscillation 1
  for (int h = 1; h <= 6; ++h) CHECK(theta_norm(b, fam[h], 0.5) == 2.0);
  for (std::size_t i = 7; i < fam.size(); ++i) CHECK(theta_norm(b, fam[i], 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}
