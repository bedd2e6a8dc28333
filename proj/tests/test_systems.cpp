#include <doctest.h>

#include <cmath>

#include "gen.hpp"
#include "infmix/error.hpp"
#include "infmix/hypotheses.hpp"
#include "infmix/sampling.hpp"
#include "infmix/systems.hpp"

using namespace infmix;
using namespace infmix::systems;

TEST_CASE("lsv_step") {
  LsvMap m(1.0);
  CHECK(m.step(0.25) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(m.step(0.5) == 0.0);
  CHECK(m.step(0.75) == 0.5);
  CHECK_THROWS_AS(m.step(-0.1), DomainError);
  CHECK_THROWS_AS(m.step(1.5), DomainError);
  CHECK_THROWS_AS(LsvMap(0.0), DomainError);
  // the fast paths agree with the generic formula
  for (double g : {1.0, 2.0, 1.25}) {
    LsvMap f(g);
    for (double x : {0.01, 0.1, 0.3, 0.49}) CHECK(f.left(x) == doctest::Approx(x * (1 + std::pow(2 * x, g))).epsilon(1e-14));
  }
}

TEST_CASE("return_time and induced_step") {
  LsvMap m(1.0);
  CHECK(return_time(m, 0.8) == 1);
  CHECK(return_time(m, 0.75) == 1);
  CHECK(return_time(m, 0.7) == 2);
  auto [y1, h1] = induced_step(m, 0.8);
  CHECK(h1 == 1);
  CHECK(y1 == doctest::Approx(0.6).epsilon(1e-15));
  auto [y2, h2] = induced_step(m, 0.7);
  CHECK(h2 == 2);
  CHECK(y2 == doctest::Approx(0.72).epsilon(1e-14));
  CHECK_THROWS_AS(return_time(m, 0.3), DomainError);
  // close to 1/2 the return time is huge
  CHECK_THROWS_AS(return_time(m, 0.5 + 1e-12, 1000), ReturnOverflow);
}

TEST_CASE("skew product example") {
  SkewProduct s(LsvMap(1.0), Fiber::halving());
  auto [p, h] = induced_step(s, {0.75, 0.2});
  CHECK(h == 1);
  CHECK(p.x1 == 0.5);
  CHECK(p.x2 == doctest::Approx(0.6).epsilon(1e-15));
  // two step return: right then left fiber map
  auto [q, h2] = induced_step(s, {0.7, 0.2});
  CHECK(h2 == 2);
  CHECK(q.x1 == doctest::Approx(0.72).epsilon(1e-14));
  CHECK(q.x2 == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(Fiber::quadratic(1.0), DomainError);
}

TEST_CASE("separation time") {
  LsvMap m(1.0);
  CylinderPartition part(m, 200);
  // depth-1 cylinders differ: 0.8 has phi=1, 0.7 has phi=2
  CHECK(separation_time(part, 0.8, 0.7, 50).s == 0);
  auto same = separation_time(part, 0.8, 0.8, 50);
  CHECK(same.s == 50);
  CHECK(same.capped);
  // F(0.8) = 0.6, F(0.81) = 0.62: chart 0.2 has phi=4, chart 0.24 has phi=3
  auto xs = m.preimage_sequence(4);
  REQUIRE(xs[3] <= 0.2);
  REQUIRE(0.2 < xs[2]);
  REQUIRE(xs[2] <= 0.24);
  REQUIRE(0.24 < xs[1]);
  auto s = separation_time(part, 0.8, 0.81, 50);
  CHECK(s.s == 1);
  CHECK_FALSE(s.capped);
  CHECK(d_theta(part, 0.5, 0.8, 0.81) == doctest::Approx(0.5));
}

TEST_CASE("preimage sequence, closed form at gamma 1") {
  LsvMap m(1.0);
  auto xs = m.preimage_sequence(30);
  CHECK(xs[0] == 0.5);
  for (int k = 1; k <= 30; ++k) {
    CHECK(xs[k] < xs[k - 1]);
    CHECK(m.left(xs[k]) == doctest::Approx(xs[k - 1]).epsilon(1e-14));
  }
  for (double g : {0.5, 1.25, 2.0, 3.0}) {
    LsvMap f(g);
    auto ys = f.preimage_sequence(500);
    for (int k = 1; k <= 500; k += 37) CHECK(f.left(ys[k]) == doctest::Approx(ys[k - 1]).epsilon(1e-13));
  }
}

TEST_CASE("return-time level sets: preimage lengths vs uniform sampling") {
  LsvMap m(1.25);
  auto xs = m.preimage_sequence(10);
  auto rng = sampling::make_rng(5, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int S = 400000;
  std::vector<int> count(12, 0);
  for (int i = 0; i < S; ++i) {
    auto h = m.induced_chart(u(rng)).first;
    if (h <= 10) ++count[h];
  }
  // chart cylinder of return time h is [x_{h-1}, x_{h-2}), x_{-1} = 1
  for (int h = 1; h <= 10; ++h) {
    double len = (h == 1 ? 1.0 : xs[h - 2]) - xs[h - 1];
    double se = std::sqrt(len * (1 - len) / S);
    CHECK(std::abs(count[h] / double(S) - len) <= 3 * se + 1e-12);
  }
}

TEST_CASE("empirical tail exponent, synthetic n^-1.5") {
  // p_n = n^-1.5 / zeta(1.5): beta = 1/2
  std::vector<double> p(200000);
  double z = 2.612375348685488;
  for (std::size_t n = 1; n <= p.size(); ++n) p[n - 1] = std::pow(double(n), -1.5) / z;
  SyntheticInduced syn(p);
  auto est = sampling::empirical_tail(sampling::Dynamics::of(syn), 1000000, 3);
  CHECK(est.beta_hat >= 0.47);
  CHECK(est.beta_hat <= 0.53);
  CHECK_THROWS_AS(sampling::empirical_tail(sampling::Dynamics::of(syn), 100, 3), DomainError);
}

TEST_CASE("empirical tail exponent, LSV gamma 1.25") {
  LsvMap m(1.25);
  auto est = sampling::empirical_tail(sampling::Dynamics::of(m), 200000, 9);
  CHECK(est.beta_hat >= 0.75);
  CHECK(est.beta_hat <= 0.85);
}

TEST_CASE("hyperbolicity of the halving fiber") {
  SkewProduct s(LsvMap(1.25), Fiber::halving());
  auto r = hypotheses::check_hyperbolicity(s, 200, 4);
  CHECK(r.gamma0 == 0.5);
  // d_n = d_0 2^-n exactly: powers of two are exact in binary
  CHECK(r.max_rel_dev_from_rate == 0.0);
  CHECK(r.sup_normalized == 1.0);
  CHECK(r.max_direct_abs_err <= 1e-15);
  CHECK(r.contraction_ok);
  CHECK(std::isfinite(r.column_separation_constant));
  CHECK(r.column_separation_constant > 0.0);
  CHECK(hypotheses::max_fiber_derivative(Fiber::halving()) == 0.5);
  auto qf = Fiber::quadratic(0.4);
  CHECK(hypotheses::max_fiber_derivative(qf) <= qf.contraction() + 1e-15);
}

TEST_CASE("identical pair never separates") {
  Fiber f = Fiber::halving();
  double d = 0.0;
  for (int n = 0; n < 60; ++n) d = f.separation_step(0.3, d);
  CHECK(d == 0.0);
}

TEST_CASE("property: skew product projects to the base map") {
  gen::for_all(200, 31, [](gen::Rng& r, int c) {
    double g = r.uniform(0.3, 3.0);
    Fiber fib = c % 2 ? Fiber::halving() : Fiber::quadratic(r.uniform(-0.9, 0.9));
    SkewProduct s(LsvMap(g), fib);
    SkewPoint p{r.uniform(), r.uniform()};
    for (int i = 0; i < 20; ++i) {
      auto q = s.step(p);
      CHECK(std::abs(q.x1 - s.base().step(p.x1)) <= 1e-14);
      CHECK(q.x2 >= 0.0);
      CHECK(q.x2 <= 1.0);
      p = q;
    }
  });
}

TEST_CASE("property: d_theta is an ultrametric") {
  LsvMap m(1.0);
  CylinderPartition part(m, 400);
  gen::for_all(300, 32, [&](gen::Rng& r, int) {
    // triples close together so that separation times are nontrivial
    double x = r.uniform(0.5, 0.99);
    double y = std::min(1.0, x + r.uniform(0, 1e-3));
    double z = std::min(1.0, x + r.uniform(0, 1e-3));
    double dxz = d_theta(part, 0.5, x, z), dxy = d_theta(part, 0.5, x, y), dyz = d_theta(part, 0.5, y, z);
    CHECK(dxz <= std::max(dxy, dyz) + 1e-15);
  });
}

TEST_CASE("property: f maps [0,1] into [0,1] and branches are monotone") {
  gen::for_all(100, 33, [](gen::Rng& r, int) {
    LsvMap m(r.uniform(0.2, 4.0));
    double a = r.uniform(0.0, 0.5), b = r.uniform(0.0, 0.5);
    if (a > b) std::swap(a, b);
    CHECK(m.step(a) <= m.step(b) + 0.0);
    double x = r.uniform();
    double fx = m.step(x);
    CHECK(fx >= 0.0);
    CHECK(fx <= 1.0);
  });
}
