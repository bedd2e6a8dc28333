#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gen.hpp"
#include "infmix/config.hpp"
#include "infmix/error.hpp"
#include "infmix/mixing.hpp"
#include "infmix/parallel.hpp"
#include "infmix/renewal.hpp"

using namespace infmix;
using namespace infmix::mixing;
using operators::OperatorBundle;
using systems::SyntheticInduced;

namespace {
std::vector<double> power_p(double beta, int N) {
  auto d = renewal::ReturnDistribution::power_law(beta, N);
  return {d.masses().begin(), d.masses().end()};
}

CorrelationSeries fake_series(std::vector<double> resid, double half_band) {
  CorrelationSeries s;
  s.method = "operator";
  s.target = 1.0;
  auto grid = config::geometric_grid(100, 10000, 5);
  REQUIRE(grid.size() == resid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    s.n.push_back(grid[i]);
    s.a.push_back(1.0);
    s.normalized.push_back(1.0 + resid[i]);
    s.rho.push_back(1.0 + resid[i]);
    s.lo95.push_back(1.0 + resid[i] - half_band);
    s.hi95.push_back(1.0 + resid[i] + half_band);
    s.bias.push_back(0.0);
    s.ess.push_back(0);
    s.reliable.push_back(true);
  }
  return s;
}
}  // namespace

TEST_CASE("correlation_operator fixtures") {
  auto b = OperatorBundle::build(SyntheticInduced({0.5, 0.5}), 4, 2);
  regvar::TailLaw law(0.5, regvar::SlowlyVarying::constant(1.0));
  std::vector<double> one(b.piece_count(), 1.0), zero(b.piece_count(), 0.0);
  std::vector<std::int64_t> grid{1, 2, 3, 50, 100};
  auto z = correlation_operator(b, law, one, zero, grid);
  for (double r : z.rho) CHECK(r == 0.0);
  auto s = correlation_operator(b, law, one, one, grid);
  CHECK(s.rho[0] == doctest::Approx(0.5));
  CHECK(s.rho[1] == doctest::Approx(0.75));
  CHECK(s.rho[2] == doctest::Approx(0.625));
  CHECK(std::abs(s.rho.back() - 2.0 / 3.0) <= 1e-6);
  CHECK(s.target == doctest::Approx(1.0));
  CHECK_THROWS_AS(correlation_operator(b, law, one, one, std::vector<std::int64_t>{}), DomainError);
  // points beyond the truncation are flagged
  CHECK_FALSE(s.reliable.back());
}

TEST_CASE("property: the operator estimator is bilinear") {
  auto b = OperatorBundle::build(SyntheticInduced(power_p(0.75, 300)), 8, 300);
  regvar::TailLaw law(0.75, regvar::SlowlyVarying::constant(1.0));
  std::vector<std::int64_t> grid{1, 10, 100, 300};
  gen::for_all(10, 61, [&](gen::Rng& r, int) {
    std::vector<double> v(b.piece_count()), w(b.piece_count()), v2(b.piece_count());
    for (auto& x : v) x = r.uniform(-1, 1);
    for (auto& x : w) x = r.uniform(-1, 1);
    double alpha = r.uniform(-3, 3);
    for (std::size_t i = 0; i < v.size(); ++i) v2[i] = alpha * v[i];
    auto s1 = correlation_operator(b, law, v, w, grid), s2 = correlation_operator(b, law, v2, w, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(s2.rho[i] - alpha * s1.rho[i]) <= 1e-12);
  });
}

TEST_CASE("shift consistency: L^n v against w equals L^(n-1) v against w o f") {
  auto b = OperatorBundle::build(systems::LsvInduced(systems::LsvMap(1.25)), 16, 100);
  gen::for_all(3, 62, [&](gen::Rng& r, int) {
    std::vector<double> g(b.tower_size()), w(b.tower_size());
    for (auto& x : g) x = r.uniform(0, 1);
    for (auto& x : w) x = r.uniform(-1, 1);
    auto Kw = b.apply_K(w);
    auto Ln = g;  // L^(n-1) g
    for (int n = 1; n <= 30; ++n) {
      auto Ln1 = b.apply_L(Ln);
      double lhs = 0.0, rhs = 0.0;
      std::vector<double> p1(g.size()), p2(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        p1[i] = Ln1[i] * w[i];
        p2[i] = Ln[i] * Kw[i];
      }
      lhs = b.tower_integral(p1);
      rhs = b.tower_integral(p2);
      CHECK(std::abs(lhs - rhs) <= 1e-10);
      Ln = std::move(Ln1);
    }
  });
}

TEST_CASE("Monte Carlo: mean-zero observables give a band around zero") {
  SyntheticInduced syn(power_p(0.75, 20000));
  auto dyn = sampling::Dynamics::of(syn);
  auto v = tower::BaseObservable::affine(-0.5, 1.0, 0.0);  // mean zero under Lebesgue on the base
  regvar::TailLaw law(0.75, regvar::SlowlyVarying::constant(1.0));
  auto a = regvar::a_seq(law, 5000);
  std::vector<std::int64_t> grid{1000, 4000};
  MonteCarloOptions o;
  o.samples = 400000;
  o.seed = 5;
  auto s = correlation_montecarlo(dyn, v, v, grid, a, o);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(s.lo95[i] <= 0.0);
    CHECK(s.hi95[i] >= 0.0);
    CHECK(s.reliable[i]);
  }
  CHECK(std::abs(s.int_v) <= 5.0 / std::sqrt(static_cast<double>(o.samples)));

  // shared seed: scaling v scales the estimate
  auto v3 = tower::BaseObservable::affine(-1.5, 3.0, 0.0);
  auto s3 = correlation_montecarlo(dyn, v3, v, grid, a, o);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(s3.rho[i] == doctest::Approx(3.0 * s.rho[i]).epsilon(1e-9));

  MonteCarloOptions bad = o;
  bad.streams = 1;
  CHECK_THROWS_AS(correlation_montecarlo(dyn, v, v, grid, a, bad), DomainError);
  std::vector<std::int64_t> far{6000};
  CHECK_THROWS_AS(correlation_montecarlo(dyn, v, v, far, a, o), DomainError);
}

TEST_CASE("Monte Carlo merge does not depend on the thread count") {
  SyntheticInduced syn(power_p(0.6, 5000));
  auto dyn = sampling::Dynamics::of(syn);
  auto v = tower::BaseObservable::bump(1.0, 0.3, 0.5, 0.3, 0.1);
  regvar::TailLaw law(0.6, regvar::SlowlyVarying::constant(1.0));
  auto a = regvar::a_seq(law, 1000);
  std::vector<std::int64_t> grid{10, 100, 1000};
  MonteCarloOptions o;
  o.samples = 50000;
  set_thread_count(1);
  auto s1 = correlation_montecarlo(dyn, v, v, grid, a, o);
  set_thread_count(4);
  auto s4 = correlation_montecarlo(dyn, v, v, grid, a, o);
  set_thread_count(0);
  std::ostringstream c1, c4;
  s1.write_csv(c1);
  s4.write_csv(c4);
  CHECK(c1.str() == c4.str());
}

TEST_CASE("CSV round trip") {
  auto s = fake_series({0.1, 0.08, 0.05, 0.04, 0.03, 0.02, 0.015, 0.01, 0.008, 0.006, 0.005}, 0.001);
  std::stringstream io;
  s.write_csv(io);
  auto r = CorrelationSeries::read_csv(io);
  CHECK(r.n == s.n);
  CHECK(r.normalized == s.normalized);
  CHECK(r.lo95 == s.lo95);
  CHECK(r.hi95 == s.hi95);
  CHECK(r.target == s.target);
  CHECK(r.method == s.method);
  std::stringstream bad("x,y\n1,2\n");
  CHECK_THROWS_AS(CorrelationSeries::read_csv(bad), ConfigError);
}

TEST_CASE("fit_rate recovers an exact power law") {
  std::vector<double> res;
  for (auto n : config::geometric_grid(100, 10000, 5)) res.push_back(2.0 * std::pow(static_cast<double>(n), -0.3));
  auto s = fake_series(res, 0.0);
  regvar::TailLaw law(0.75, regvar::SlowlyVarying::constant(1.0));
  auto m = fit_rate(s, law);
  CHECK_FALSE(m.no_rate);
  CHECK(m.tau == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(m.c == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(m.r2 == doctest::Approx(1.0));
  CHECK(m.envelope_ok);
}

TEST_CASE("fit_rate flags noise and short series") {
  gen::Rng r(63);
  std::vector<double> res;
  for (int i = 0; i < 11; ++i) res.push_back(r.uniform(-0.5, 0.5));
  auto s = fake_series(res, 1.0);
  regvar::TailLaw law(0.75, regvar::SlowlyVarying::constant(1.0));
  auto m = fit_rate(s, law);
  CHECK(m.no_rate);
  auto shorter = s;
  shorter.reliable.assign(s.size(), false);
  CHECK_THROWS_AS(fit_rate(shorter, law), DomainError);
}

TEST_CASE("higher-order check") {
  auto s = fake_series(std::vector<double>(11, 0.01), 0.0);
  regvar::TailLaw law(0.75, regvar::SlowlyVarying::constant(1.0));
  std::vector<double> bad{2.0};
  CHECK_THROWS_AS(higher_order_check(s, law, bad, Regime::HalfLog), DomainError);
  std::vector<double> d1{1.0};
  auto r1 = higher_order_check(s, law, d1, Regime::HalfLog);
  for (const auto& p : r1.points) CHECK(p.residual == p.first_order);
  CHECK(r1.b_increment_constant == 0.0);
  // b_n = 1 + d2/a_n with a_n increasing like n^(1-beta): n |b_{n+1} - b_n| <= d2 (1-beta) / a_n
  std::vector<double> d2{1.0, 0.7};
  auto r2 = higher_order_check(s, law, d2, Regime::BetaLog);
  CHECK(r2.b_increment_constant > 0.0);
  CHECK(r2.b_increment_constant <= 0.7 * 0.25 / regvar::a_value(law, 100) * 1.01);
  CHECK(r2.b_sup <= 1.0 + 0.7 / regvar::a_value(law, 100) + 1e-12);
  CHECK(c_prime(Regime::LogSquaredOverN, 100.0, 0.5) == doctest::Approx(std::log(100.0) * std::log(100.0) / 100.0));
}

TEST_CASE("second-order term improves the synthetic beta = 0.8 series") {
  const double beta = 0.8;
  const int N = 10000;
  auto p = power_p(beta, N);
  auto b = OperatorBundle::build(SyntheticInduced(p), 4, N);
  // constant of P(phi > n) ~ c n^-beta, read off the exact tail at N
  renewal::ReturnDistribution dist = renewal::ReturnDistribution::power_law(beta, N);
  double c = dist.tail(N) * std::pow(static_cast<double>(N), beta);
  regvar::TailLaw law(beta, regvar::SlowlyVarying::constant(c));
  std::vector<double> one(b.piece_count(), 1.0);
  auto grid = config::geometric_grid(100, N, 10);
  auto s = correlation_operator(b, law, one, one, grid);
  // fit d2 on even points, evaluate on odd ones
  CorrelationSeries fit = s, held = s;
  for (std::size_t i = 0; i < s.size(); ++i) {
    fit.reliable[i] = i % 2 == 0;
    held.reliable[i] = i % 2 == 1;
  }
  std::vector<double> d{1.0, fit_d2(fit)};
  auto r = higher_order_check(held, law, d, Regime::LogSquaredOverN);
  REQUIRE(!r.points.empty());
  double first = 0.0, second = 0.0;
  for (const auto& pt : r.points) {
    first = std::max(first, pt.first_order);
    second = std::max(second, pt.residual);
  }
  CHECK(second < first);
}
