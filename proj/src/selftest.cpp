#include "infmix/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include <gsl/gsl_sf_zeta.h>

#include "infmix/error.hpp"
#include "infmix/hypotheses.hpp"
#include "infmix/mixing.hpp"
#include "infmix/operators.hpp"
#include "infmix/regvar.hpp"
#include "infmix/renewal.hpp"
#include "infmix/sampling.hpp"
#include "infmix/tower.hpp"

namespace infmix::selftest {

using nlohmann::json;

bool Report::pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

json Report::to_json() const {
  json arr = json::array();
  for (const auto& c : checks) {
    json e = {{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}, {"seconds", c.seconds}};
    if (!c.pass) e["witness"] = c.witness;
    arr.push_back(e);
  }
  return {{"pass", pass()}, {"seconds", seconds}, {"checks", arr}};
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

double power_c(double beta) { return 1.0 / (beta * gsl_sf_zeta(1.0 + beta)); }

operators::OperatorBundle half_half() {
  systems::SyntheticInduced sys({0.5, 0.5});
  return operators::OperatorBundle::build(sys, 4, 2);
}

}  // namespace

Report run(std::uint64_t seed) {
  Report rep;
  const auto t_all = std::chrono::steady_clock::now();
  auto add = [&](const std::string& name, const std::function<void(Check&)>& body) {
    Check c;
    c.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body(c);
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.checks.push_back(std::move(c));
  };

  add("regvar.normalization", [&](Check& c) {
    regvar::TailLaw law(0.75, regvar::SlowlyVarying::log_power(1.0, 0.5));
    auto a = regvar::a_seq(law, 5000);
    double worst = 0.0;
    std::int64_t at = 0;
    for (std::int64_t n = 1; n <= 5000; ++n) {
      double expect = law.ell()(static_cast<double>(n)) * std::pow(static_cast<double>(n), 0.25) / regvar::d_beta(0.75);
      double e = std::abs(a[n] / expect - 1.0);
      if (e > worst) worst = e, at = n;
    }
    c.pass = worst <= 1e-12;
    c.detail = "max relative gap between a_n and l(n) n^(1-beta)/d_beta: " + fmt(worst);
    c.witness = {{"n", at}, {"gap", worst}};
  });

  add("renewal.finite_measure", [&](Check& c) {
    auto u = renewal::renewal_sequence(renewal::ReturnDistribution::from_table({0.5, 0.5}), 100);
    double d = std::abs(u[100] - 2.0 / 3.0);
    c.pass = d <= 1e-6;
    c.detail = "|u_100 - 2/3| = " + fmt(d);
    c.witness = {{"u_100", u[100]}};
  });

  add("renewal.fft_vs_direct", [&](Check& c) {
    auto dist = renewal::ReturnDistribution::power_law(0.75, 3000);
    auto a = renewal::renewal_sequence_direct(dist, 3000);
    auto b = renewal::renewal_sequence_fft(dist, 3000);
    double worst = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) worst = std::max(worst, std::abs(a[n] - b[n]));
    c.pass = worst <= 1e-10;
    c.detail = "max |u_direct - u_fft| = " + fmt(worst);
    c.witness = {{"max_diff", worst}};
  });

  add("renewal.normalized_trend", [&](Check& c) {
    const double beta = 0.75;
    auto dist = renewal::ReturnDistribution::power_law(beta, 10000);
    regvar::TailLaw law(beta, regvar::SlowlyVarying::constant(power_c(beta)));
    auto nr = renewal::normalized_renewal(dist, law, 10000);
    double d2 = std::abs(nr.normalized[100] - 1), d3 = std::abs(nr.normalized[1000] - 1),
           d4 = std::abs(nr.normalized[10000] - 1);
    c.pass = d2 > d3 && d3 > d4 && d4 <= 0.15;
    c.detail = "|a_n u_n - 1| at 1e2, 1e3, 1e4: " + fmt(d2) + ", " + fmt(d3) + ", " + fmt(d4);
    c.witness = {{"deviation", {d2, d3, d4}}};
  });

  add("operators.scalar_renewal", [&](Check& c) {
    auto b = half_half();
    std::vector<double> one(b.piece_count(), 1.0);
    auto T = b.T_sequence(one, 200);
    auto u = renewal::renewal_sequence(renewal::ReturnDistribution::from_table({0.5, 0.5}), 200);
    double worst = 0.0;
    std::int64_t at = 0;
    for (std::int64_t n = 1; n <= 200; ++n) {
      double mean = 0.0;
      for (std::size_t i = 0; i < b.piece_count(); ++i) mean += b.pieces()[i].pi * T.at(n, b.pieces()[i], i);
      if (std::abs(mean - u[n]) > worst) worst = std::abs(mean - u[n]), at = n;
    }
    c.pass = worst <= 1e-10;
    c.detail = "max |int T_n 1 - u_n| = " + fmt(worst);
    c.witness = {{"n", at}, {"gap", worst}};
  });

  add("operators.convolution", [&](Check& c) {
    auto b = half_half();
    auto r = operators::convolution_check(b, 200, seed);
    c.pass = r.max_defect <= 1e-10;
    c.detail = "max defect " + fmt(r.max_defect) + " at n = " + std::to_string(r.worst_n);
    c.witness = {{"worst_n", r.worst_n}, {"defect", r.max_defect}};
  });

  add("operators.duality", [&](Check& c) {
    systems::LsvInduced sys(systems::LsvMap(1.25));
    auto b = operators::OperatorBundle::build(sys, 16, 100);
    auto rng = sampling::make_rng(seed, 7);
    std::uniform_real_distribution<double> U(-1, 1);
    double worst = 0.0;
    for (int rep_i = 0; rep_i < 3; ++rep_i) {
      auto v = b.tower_zero(), w = b.tower_zero();
      for (auto& x : v) x = U(rng);
      for (auto& x : w) x = U(rng);
      auto Lv = b.apply_L(v), Kw = b.apply_K(w);
      std::vector<double> lw(v.size()), vk(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) lw[i] = Lv[i] * w[i], vk[i] = v[i] * Kw[i];
      worst = std::max(worst, std::abs(b.tower_integral(lw) - b.tower_integral(vk)));
    }
    c.pass = worst <= 1e-10;
    c.detail = "max |int (Lv) w - int v (Kw)| = " + fmt(worst);
    c.witness = {{"gap", worst}};
  });

  add("operators.kronecker", [&](Check& c) {
    systems::LsvInduced sys(systems::LsvMap(1.25));
    auto b = operators::OperatorBundle::build(sys, 8, 50);
    std::vector<double> v(b.piece_count(), 1.0);
    std::int64_t bad = 0;
    for (int j = 0; j < 50; ++j) {
      auto g = b.A_j(v, j);
      for (std::size_t i = 0; i < b.piece_count(); ++i)
        for (int l = 0; l < b.pieces()[i].h; ++l)
          if ((g[b.offset(i) + l] != 0.0) != (l == j)) ++bad;
    }
    c.pass = bad == 0;
    c.detail = std::to_string(bad) + " entries off the declared level";
    c.witness = {{"bad", bad}};
  });

  add("operators.level_mass", [&](Check& c) {
    systems::LsvInduced lsv(systems::LsvMap(1.25));
    auto bl = operators::OperatorBundle::build(lsv, 32, 500);
    auto dist = renewal::ReturnDistribution::power_law(0.75, 500);
    auto m = dist.masses();
    systems::SyntheticInduced syn(std::vector<double>(m.begin(), m.end()));
    auto bs = operators::OperatorBundle::build(syn, 4, 500);
    auto rl = operators::check_level_mass(bl, 100, 20);
    auto rs = operators::check_level_mass(bs, 100, 20);
    c.pass = rl.violations == 0 && rs.violations == 0;
    c.detail = "violations: lsv " + std::to_string(rl.violations) + ", synthetic " + std::to_string(rs.violations) +
               " of " + std::to_string(rl.checked + rs.checked) + " pairs";
    const auto& w = rl.violations ? rl : rs;
    c.witness = {{"j", w.witness_j}, {"k", w.witness_k}, {"lhs", w.witness_lhs}, {"rhs", w.witness_rhs}};
  });

  add("operators.mass", [&](Check& c) {
    auto dist = renewal::ReturnDistribution::power_law(0.75, 2000);
    auto m = dist.masses();
    systems::SyntheticInduced syn(std::vector<double>(m.begin(), m.end()));
    auto b = operators::OperatorBundle::build(syn, 4, 2000);
    std::vector<double> one(b.piece_count(), 1.0);
    auto T = b.T_sequence(one, 2000);
    auto u = renewal::renewal_sequence(dist, 2000);
    double worst = 0.0, over = 0.0;
    for (std::int64_t n = 1; n <= 2000; ++n) {
      double mean = 0.0;
      for (std::size_t i = 0; i < b.piece_count(); ++i) mean += b.pieces()[i].pi * T.at(n, b.pieces()[i], i);
      worst = std::max(worst, std::abs(mean - u[n]));
      over = std::max(over, mean - 1.0);
    }
    c.pass = worst <= 1e-10 && over <= 1e-12;
    c.detail = "max |int T_n 1 - u_n| = " + fmt(worst) + ", max excess over 1: " + fmt(over);
    c.witness = {{"gap", worst}, {"excess", over}};
  });

  add("mixing.bilinear_shift", [&](Check& c) {
    systems::LsvInduced sys(systems::LsvMap(1.25));
    auto b = operators::OperatorBundle::build(sys, 16, 300);
    auto law = regvar::TailLaw(0.8, regvar::SlowlyVarying::constant(1.0));
    std::vector<double> v(b.piece_count()), w(b.piece_count()), v2(b.piece_count());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double t = 0.5 * (b.pieces()[i].lo + b.pieces()[i].hi);
      v[i] = 1.0 + t;
      v2[i] = 2.0 * v[i];
      w[i] = 1.0 - 0.5 * t;
    }
    std::vector<std::int64_t> ns{1, 5, 20, 60};
    auto s1 = mixing::correlation_operator(b, law, v, w, ns);
    auto s2 = mixing::correlation_operator(b, law, v2, w, ns);
    double lin = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) lin = std::max(lin, std::abs(s2.rho[i] - 2.0 * s1.rho[i]));
    // int L^n v w = int L^{n-1} v (w o f) on the tower
    auto g = b.tower_zero(), wt = b.tower_zero();
    for (std::size_t i = 0; i < b.piece_count(); ++i) g[b.offset(i)] = v[i], wt[b.offset(i)] = w[i];
    auto Kw = b.apply_K(wt);
    double shift = 0.0;
    auto cur = g;
    for (int n = 1; n <= 60; ++n) {
      auto next = b.apply_L(cur);
      std::vector<double> lhs(g.size()), rhs(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) lhs[i] = next[i] * wt[i], rhs[i] = cur[i] * Kw[i];
      shift = std::max(shift, std::abs(b.tower_integral(lhs) - b.tower_integral(rhs)));
      cur = std::move(next);
    }
    c.pass = lin <= 1e-14 * 10 && shift <= 1e-10;
    c.detail = "bilinearity gap " + fmt(lin) + ", shift gap " + fmt(shift);
    c.witness = {{"bilinear", lin}, {"shift", shift}};
  });

  add("tower.approximation", [&](Check& c) {
    systems::SkewProduct sk(systems::LsvMap(1.25), systems::Fiber::halving());
    auto sys = tower::TwoSidedSystem::lsv(sk, 32);
    auto cells = tower::tower_cells(sys, 16, 3);
    auto v = tower::BaseObservable::bump(1.0, 0.3, 0.4, 0.35, 0.5);
    std::size_t bad = 0;
    json w;
    for (int k = 1; k <= 3; ++k) {
      auto a = tower::check_approx_bounds(sys, v, k, cells, 0.5);
      auto s = tower::check_support(sys, v, k, cells);
      std::size_t here = (a.sup_ok ? 0 : 1) + s.support_a_violations + s.support_b_violations;
      if (here && w.is_null()) w = {{"k", k}, {"sup_ok", a.sup_ok}, {"support_a", s.support_a_violations},
                                    {"support_b", s.support_b_violations}};
      bad += here;
    }
    systems::LsvInduced ind(sk.base());
    auto b = operators::OperatorBundle::build(ind, 16, 200);
    auto g = tower::gamma_psi_l1(b, 0.5, 5);
    bool dec = true;
    for (std::size_t k = 1; k < g.size(); ++k) dec = dec && g[k] < g[k - 1];
    c.pass = bad == 0 && dec;
    c.detail = std::to_string(bad) + " approximation violations; |gamma^psi_k|_1 decreasing: " + (dec ? "yes" : "no");
    c.witness = w.is_null() ? json{{"gamma_psi", g}} : w;
  });

  add("hypotheses.contraction", [&](Check& c) {
    systems::SkewProduct sk(systems::LsvMap(1.25), systems::Fiber::halving());
    auto r = hypotheses::check_hyperbolicity(sk, 200, seed, 60);
    c.pass = r.max_rel_dev_from_rate <= 1e-12;
    c.detail = "max |d_n/(d_0 2^-n) - 1| = " + fmt(r.max_rel_dev_from_rate);
    c.witness = {{"dev", r.max_rel_dev_from_rate}};
  });

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_all).count();
  return rep;
}

}  // namespace infmix::selftest
