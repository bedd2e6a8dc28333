// Acceptance run: one PASS/FAIL line per criterion.
//   infmix_acceptance [--only 1,3,...] [--expect-fail 8,...] [--json out.json]
// Exit status is 0 when every criterion passes except those listed under --expect-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <gsl/gsl_sf_zeta.h>
#include <json.hpp>

#include "infmix/config.hpp"
#include "infmix/hypotheses.hpp"
#include "infmix/mixing.hpp"
#include "infmix/operators.hpp"
#include "infmix/pipeline.hpp"
#include "infmix/renewal.hpp"
#include "infmix/sampling.hpp"
#include "infmix/systems.hpp"
#include "infmix/tower.hpp"

using namespace infmix;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  json data;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double power_c(double beta) { return 1.0 / (beta * gsl_sf_zeta(1.0 + beta)); }

std::vector<double> power_p(double beta, std::int64_t N) {
  auto d = renewal::ReturnDistribution::power_law(beta, N);
  return {d.masses().begin(), d.masses().end()};
}

// |a_n u_n - 1| strictly decreasing over 1e2, 1e3, 1e4 and bounded at 2e4
Outcome renewal_trend(double beta, std::optional<double> q, double tol) {
  const std::int64_t N = 20000;
  auto d = renewal::ReturnDistribution::power_law(beta, N);
  regvar::TailLaw law(beta, regvar::SlowlyVarying::constant(power_c(beta)), q);
  auto r = renewal::normalized_renewal(d, law, N);
  std::vector<double> dev;
  for (std::int64_t n : {100, 1000, 10000}) dev.push_back(std::abs(r.normalized[n] - 1.0));
  double end = std::abs(r.normalized[N] - 1.0);
  bool trend = dev[0] > dev[1] && dev[1] > dev[2];
  Outcome o;
  o.pass = trend && end <= tol;
  o.detail = "dev(1e2,1e3,1e4) = " + fmt(dev[0]) + ", " + fmt(dev[1]) + ", " + fmt(dev[2]) + "; dev(2e4) = " +
             fmt(end) + " (tol " + fmt(tol) + ")";
  o.data = {{"dev", dev}, {"dev_2e4", end}, {"trend", trend}};
  return o;
}

Outcome c1() { return renewal_trend(0.75, std::nullopt, 0.15); }
Outcome c2() { return renewal_trend(0.4, 1.0, 0.2); }

Outcome c3() {
  auto d = renewal::ReturnDistribution::from_table({0.5, 0.5});
  auto u = renewal::renewal_sequence(d, 100);
  double err = std::abs(u[100] - 2.0 / 3.0);
  return {err <= 1e-6, "|u_100 - 2/3| = " + fmt(err), {{"err", err}}};
}

Outcome c4() {
  // exact synthetic tower: every cylinder is retained, no truncation
  systems::SyntheticInduced syn(power_p(0.75, 300));
  auto bs = operators::OperatorBundle::build(syn, 8, 400);
  auto rs = operators::convolution_check(bs, 200, 1);
  systems::LsvInduced lsv(systems::LsvMap(1.25));
  auto bl = operators::OperatorBundle::build(lsv, 32, 500);
  auto rl = operators::convolution_check(bl, 200, 1);
  bool ok_s = rs.max_defect <= 1e-10;
  bool ok_l = rl.max_defect <= std::max(rl.truncation_mass, 1e-10);
  Outcome o;
  o.pass = ok_s && ok_l;
  o.detail = "synthetic max defect " + fmt(rs.max_defect) + " (<= 1e-10); LSV H=500 max defect " +
             fmt(rl.max_defect) + " (<= truncation mass " + fmt(rl.truncation_mass) + ")";
  o.data = {{"synthetic_defect", rs.max_defect}, {"lsv_defect", rl.max_defect}, {"lsv_truncation", rl.truncation_mass}};
  return o;
}

Outcome c5() {
  systems::SyntheticInduced syn(power_p(0.75, 2000));
  auto bs = operators::OperatorBundle::build(syn, 8, 2001);
  auto rs = operators::check_level_mass(bs, 100, 20);
  systems::LsvInduced lsv(systems::LsvMap(1.25));
  auto bl = operators::OperatorBundle::build(lsv, 32, 500);
  auto rl = operators::check_level_mass(bl, 100, 20);
  Outcome o;
  o.pass = rs.violations == 0 && rl.violations == 0 && rs.checked == 101 * 20 && rl.checked == 101 * 20;
  o.detail = "synthetic " + std::to_string(rs.violations) + "/" + std::to_string(rs.checked) + " violations, LSV " +
             std::to_string(rl.violations) + "/" + std::to_string(rl.checked) + "; max lhs/rhs " +
             fmt(std::max(rs.max_slack_ratio, rl.max_slack_ratio));
  o.data = {{"synthetic_violations", rs.violations}, {"lsv_violations", rl.violations}};
  return o;
}

Outcome c6() {
  systems::LsvMap g2(2.0), g125(1.25);
  auto e2 = sampling::empirical_tail(sampling::Dynamics::of(g2), 1000000, 11);
  auto e125 = sampling::empirical_tail(sampling::Dynamics::of(g125), 1000000, 12);
  bool ok2 = e2.beta_hat >= 0.45 && e2.beta_hat <= 0.55;
  bool ok125 = e125.beta_hat >= 0.75 && e125.beta_hat <= 0.85;
  Outcome o;
  o.pass = ok2 && ok125;
  o.detail = "gamma 2: beta_hat " + fmt(e2.beta_hat) + " +- " + fmt(e2.beta_se) + " (in [0.45,0.55]); gamma 1.25: " +
             fmt(e125.beta_hat) + " +- " + fmt(e125.beta_se) + " (in [0.75,0.85])";
  o.data = {{"beta_hat_gamma2", e2.beta_hat}, {"beta_hat_gamma125", e125.beta_hat}};
  return o;
}

Outcome c7() {
  systems::LsvMap map(1.25);
  systems::LsvInduced ind(map);
  auto b = operators::OperatorBundle::build(ind, 64, 10000);
  auto coarse = operators::OperatorBundle::build(ind, 32, 10000);
  auto law = mixing::lsv_tail_law(b, map, 10000);
  std::vector<std::int64_t> ns{100, 1000, 10000};
  std::vector<double> one(b.piece_count(), 1.0), one_c(coarse.piece_count(), 1.0);
  auto s = mixing::correlation_operator(b, law, one, one, ns);
  auto sc = mixing::correlation_operator(coarse, law, one_c, one_c, ns);
  mixing::attach_bias(s, sc);
  std::vector<double> dev;
  for (std::size_t i = 0; i < s.size(); ++i) dev.push_back(std::abs(s.residual(i)) / s.target);
  bool trend = dev[0] > dev[1] && dev[1] > dev[2];
  double bias = s.bias[2] / s.target;
  Outcome o;
  o.pass = trend && dev[2] <= 0.2 && bias < dev[2] && s.reliable[2];
  o.detail = "rel dev(1e2,1e3,1e4) = " + fmt(dev[0]) + ", " + fmt(dev[1]) + ", " + fmt(dev[2]) +
             " (<= 0.2 at 1e4); truncation/discretisation bias " + fmt(bias);
  o.data = {{"dev", dev}, {"bias", bias}};
  return o;
}

Outcome c8() {
  systems::LsvMap map(1.25);
  systems::SkewProduct sk(map, systems::Fiber::halving());
  systems::LsvInduced ind(map);
  auto b = operators::OperatorBundle::build(ind, 64, 10000);
  auto law = mixing::lsv_tail_law(b, map, 10000);
  auto a = regvar::a_seq(law, 10000);
  std::vector<std::int64_t> ns{1000, 4000};
  mixing::MonteCarloOptions o;
  o.samples = 10000000;
  o.seed = 7;
  // fiber-dependent Hölder observables
  auto v = tower::BaseObservable::bump(1.0, 0.3, 0.4, 0.35, 0.5);
  auto w = tower::BaseObservable::bump(1.0, 0.6, 0.7, 0.4, 0.3);
  auto s = mixing::correlation_montecarlo(sampling::Dynamics::of(sk), v, w, ns, a, o);
  bool band = true;
  std::string d = "target " + fmt(s.target) + "; band";
  for (std::size_t i = 0; i < s.size(); ++i) {
    band = band && s.lo95[i] <= s.target && s.target <= s.hi95[i];
    d += " n=" + std::to_string(s.n[i]) + " [" + fmt(s.lo95[i]) + ", " + fmt(s.hi95[i]) + "]";
  }
  // fiber-constant observables: Monte Carlo on the skew product against the quotient operator
  auto va = tower::BaseObservable::affine(0.5, 1.0, 0.0), wa = tower::BaseObservable::affine(1.0, -0.5, 0.0);
  auto mc = mixing::correlation_montecarlo(sampling::Dynamics::of(sk), va, wa, ns, a, o);
  auto op = mixing::correlation_operator(b, law, mixing::sample_on_pieces(b, va), mixing::sample_on_pieces(b, wa), ns);
  const double t = boost::math::quantile(boost::math::students_t(o.streams - 1), 0.975);
  double worst = 0.0;
  for (std::size_t i = 0; i < mc.size(); ++i) {
    double sigma = (mc.hi95[i] - mc.lo95[i]) / (2 * t);
    worst = std::max(worst, std::abs(mc.normalized[i] - op.normalized[i]) / sigma);
  }
  Outcome out;
  out.pass = band && worst <= 3.0;
  out.detail = d + "; quotient vs skew " + fmt(worst) + " sigma (<= 3)";
  out.data = {{"band_contains_target", band}, {"agreement_sigma", worst}, {"normalized", s.normalized},
              {"target", s.target}};
  return out;
}

Outcome c9() {
  systems::SkewProduct sk(systems::LsvMap(1.25), systems::Fiber::halving());
  auto r = hypotheses::check_hyperbolicity(sk, 1000, 3, 60);
  bool ok = r.max_rel_dev_from_rate <= 1e-15 && r.max_direct_abs_err <= 1e-15 &&
            std::abs(r.sup_normalized - 1.0) <= 1e-15 && r.contraction_ok && std::isfinite(r.column_separation_constant);
  // constant sup-ratio: d_n / gamma0^n does not depend on n
  std::vector<double> ratios;
  for (int rep = 0; rep < 3; ++rep) ratios.push_back(hypotheses::check_hyperbolicity(sk, 200, 10 + rep, 60).sup_normalized);
  for (double x : ratios) ok = ok && x == 1.0;
  return {ok,
          "max |d_n/(d_0 2^-n) - 1| = " + fmt(r.max_rel_dev_from_rate) + ", direct error " +
              fmt(r.max_direct_abs_err) + ", sup normalised ratio " + fmt(r.sup_normalized),
          {{"max_rel_dev", r.max_rel_dev_from_rate}, {"direct_err", r.max_direct_abs_err}}};
}

// exhaustive oracle for v_k on the toy tower: dyadic grid in t and x2
std::vector<int> itinerary(const tower::TwoSidedSystem& s, double t, int len) {
  std::vector<int> w;
  for (int i = 0; i < len; ++i) {
    auto [h, tn] = s.induced(t);
    w.push_back(h);
    t = tn;
  }
  return w;
}

double brute_vk(const tower::TwoSidedSystem& s, const tower::BaseObservable& v, tower::TowerPoint q, int k,
                int depth) {
  const int G = 4096, X = 64;
  auto ref = itinerary(s, q.t, depth);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < G; ++i) {
    double t = static_cast<double>(i) / G;
    if (s.return_time(t) != s.return_time(q.t) || itinerary(s, t, depth) != ref) continue;
    for (int j = 0; j <= X; ++j) {
      auto img = tower::step(s, {t, static_cast<double>(j) / X, q.level}, k);
      best = std::min(best, img.level == 0 ? v(img.t, img.x2) : 0.0);
    }
  }
  return best;
}

Outcome c10() {
  auto toy = tower::TwoSidedSystem::synthetic(systems::SyntheticInduced({0.5, 0.5}), systems::Fiber::halving(), 2);
  auto x2 = tower::BaseObservable::affine(0.1, 0.3, 1.0);
  std::size_t mismatches = 0, compared = 0;
  for (int k = 1; k <= 4; ++k)
    for (const auto& q : tower::tower_cells(toy, 8, 2)) {
      auto a = tower::approx_observable(toy, x2, q, k);
      ++compared;
      if (a.vk != brute_vk(toy, x2, q, k, a.depth)) ++mismatches;
    }

  systems::SkewProduct sk(systems::LsvMap(1.25), systems::Fiber::halving());
  auto s = tower::TwoSidedSystem::lsv(sk, 200);
  auto cells = tower::tower_cells(s, 32, 4);
  auto v = tower::BaseObservable::bump(1.0, 0.3, 0.4, 0.35, 0.5);
  bool sup_ok = true;
  std::size_t viol = 0;
  for (int k = 1; k <= 5; ++k) {
    auto ap = tower::check_approx_bounds(s, v, k, cells, 0.5);
    sup_ok = sup_ok && ap.sup_ok && ap.vk_sup <= ap.v_sup;
    auto sp = tower::check_support(s, v, k, cells);
    viol += sp.support_a_violations + sp.support_b_violations;
  }
  auto b = operators::OperatorBundle::build(systems::LsvInduced(systems::LsvMap(1.25)), 32, 500);
  auto g = tower::gamma_psi_l1(b, 0.5, 10);
  bool dec = true;
  for (std::size_t k = 1; k < g.size(); ++k) dec = dec && g[k] < g[k - 1];
  Outcome o;
  o.pass = mismatches == 0 && sup_ok && viol == 0 && dec;
  o.detail = "toy tower " + std::to_string(mismatches) + "/" + std::to_string(compared) +
             " mismatches; |v_k| <= |v| " + (sup_ok ? "holds" : "fails") + "; support violations " +
             std::to_string(viol) + "; |gamma^psi_k|_1 " + (dec ? "strictly decreasing" : "not decreasing") +
             " (k=0..10: " + fmt(g.front()) + " -> " + fmt(g.back()) + ")";
  o.data = {{"mismatches", mismatches}, {"support_violations", viol}, {"gamma_psi_l1", g}};
  return o;
}

Outcome c11() {
  const double beta = 0.75;
  const std::int64_t N = 20000;
  systems::SyntheticInduced syn(power_p(beta, N));
  auto b = operators::OperatorBundle::build(syn, 4, N);
  regvar::TailLaw law(beta, regvar::SlowlyVarying::constant(power_c(beta)), 1.0);
  std::vector<double> one(b.piece_count(), 1.0), w0(b.piece_count(), 0.0);
  for (std::size_t i = 0; i < w0.size(); ++i)
    if (b.pieces()[i].lo < 0.5) w0[i] = 1.0;
  operators::ETermEngine eng(b, law, one, 10000);
  auto grid = config::geometric_grid(100, 10000, 5);
  bool ok = true;
  double worst_growth = 0.0, worst_identity = 0.0;
  json per_k = json::array();
  for (int k : {2, 5, 10}) {
    // fitted constant over [1e2, 1e3] and over the full range, per envelope
    double C[3] = {0, 0, 0}, F[3] = {0, 0, 0};
    for (auto n : grid) {
      auto e = eng.evaluate(w0, k, n);
      worst_identity = std::max(worst_identity, e.identity_defect);
      double r[3] = {std::abs(e.e2pp) / e.env_e2pp, std::abs(e.e3) / e.env_e3, std::abs(e.e3) / e.env_smooth};
      for (int i = 0; i < 3; ++i) {
        C[i] = std::max(C[i], r[i]);
        if (n <= 1000) F[i] = std::max(F[i], r[i]);
      }
    }
    for (int i = 0; i < 3; ++i) {
      double growth = F[i] > 0 ? C[i] / F[i] : std::numeric_limits<double>::infinity();
      worst_growth = std::max(worst_growth, growth);
      ok = ok && std::isfinite(C[i]) && growth <= 1.5;
    }
    per_k.push_back({{"k", k}, {"C_e2pp", C[0]}, {"C_e3", C[1]}, {"C_e3_smooth", C[2]}});
  }
  ok = ok && worst_identity <= 1e-10;
  return {ok,
          "constants stable: worst full-range / first-decade ratio " + fmt(worst_growth) +
              " (<= 1.5); identity defect " + fmt(worst_identity),
          {{"constants", per_k}, {"worst_growth", worst_growth}}};
}

Outcome c12() {
  const double beta = 0.75;
  const std::int64_t N = 20000;
  auto dist = renewal::ReturnDistribution::power_law(beta, N);
  systems::SyntheticInduced syn(power_p(beta, N));
  auto b = operators::OperatorBundle::build(syn, 4, N);
  const double c = power_c(beta);
  regvar::TailLaw law(beta, regvar::SlowlyVarying::constant(c), 1.0);
  std::vector<double> one(b.piece_count(), 1.0);
  auto s = mixing::correlation_operator(b, law, one, one, config::geometric_grid(100, 10000, 10));
  auto m = mixing::fit_rate(s, law);
  auto oracle = renewal::singular_expansion(dist, beta, c);
  bool ok = !m.no_rate && m.envelope_ok && std::abs(m.tau - oracle.dominant_exponent) <= 0.15;
  return {ok,
          "tau_hat " + fmt(m.tau) + " vs oracle " + fmt(oracle.dominant_exponent) + " (+-0.15); c " + fmt(m.c) +
              ", C " + fmt(m.C) + ", first-decade C " + fmt(m.C_first_decade) +
              (m.envelope_ok ? ", envelope holds" : ", envelope fails"),
          {{"rate", m.to_json()}, {"oracle_tau", oracle.dominant_exponent}}};
}

std::vector<std::string> artifact_hashes(const fs::path& dir) {
  std::vector<std::string> h;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json")
      h.push_back(e.path().filename().string() + ":" + pipeline::sha256_file(e.path()));
  std::sort(h.begin(), h.end());
  return h;
}

Outcome c13() {
  // two acceptance-style pipeline runs per config, same seed, separate directories
  auto tmp = fs::temp_directory_path() / ("infmix_accept_" + std::to_string(::getpid()));
  const char* configs[] = {
      "seed = 3\n[system]\nkind = \"synthetic\"\nbeta = 0.75\nN = 20000\n[tails]\nsamples = 100000\n"
      "[tower]\nh_max = 20000\nbins = 4\ndiag_h_max = 200\n[operators]\nN = 20000\nfamily_random = 4\n"
      "[mixing]\nmethod = \"operator\"\nn_min = 100\nn_max = 10000\nassert_limit = true\n",
      "seed = 9\n[system]\nkind = \"skew\"\ngamma = 1.25\n[tails]\nsamples = 100000\n"
      "[tower]\nh_max = 2000\nbins = 16\ndiag_h_max = 200\n[operators]\nN = 2000\nfamily_random = 4\n"
      "[mixing]\nmethod = \"montecarlo\"\nsamples = 200000\nn_min = 10\nn_max = 1000\n"
      "v = { kind = \"bump\", c_t = 0.3, c_x2 = 0.4 }\n",
  };
  bool same = true;
  std::size_t files = 0;
  for (int i = 0; i < 2; ++i) {
    auto cfg = config::from_json(config::parse_toml(configs[i]));
    auto d1 = tmp / ("c" + std::to_string(i) + "a"), d2 = tmp / ("c" + std::to_string(i) + "b");
    pipeline::run(cfg, d1);
    pipeline::run(cfg, d2);
    auto h1 = artifact_hashes(d1), h2 = artifact_hashes(d2);
    same = same && h1 == h2 && !h1.empty();
    files += h1.size();
  }
  // a second sampling pass at the same seed reproduces the tail estimate bit for bit
  systems::LsvMap m(2.0);
  auto e1 = sampling::empirical_tail(sampling::Dynamics::of(m), 100000, 11);
  auto e2 = sampling::empirical_tail(sampling::Dynamics::of(m), 100000, 11);
  same = same && e1.tail == e2.tail && e1.beta_hat == e2.beta_hat;
  fs::remove_all(tmp);
  return {same, std::to_string(files) + " artifacts byte-identical across repeated runs", {{"files", files}}};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only, expect_fail, json_out;
  app.add_option("--only", only, "comma separated criterion numbers");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail; they do not affect the exit status");
  app.add_option("--json", json_out, "write the outcomes as JSON");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"scalar renewal limit, beta 0.75", c1},
      {"smooth tails renewal limit, beta 0.4", c2},
      {"finite measure sanity", c3},
      {"convolution identity", c4},
      {"level-mass inequality", c5},
      {"tail exponent recovery", c6},
      {"quotient mixing trend, LSV gamma 1.25", c7},
      {"invertible mixing, skew product Monte Carlo", c8},
      {"stable contraction exactness", c9},
      {"approximation scheme", c10},
      {"E-term envelopes", c11},
      {"rate envelope", c12},
      {"determinism", c13},
  };
  auto sel = parse_list(only);
  auto xfail = parse_list(expect_fail);
  bool ok = true;
  json report = json::array();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    int id = static_cast<int>(i) + 1;
    if (!sel.empty() && !sel.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what(), {}};
    }
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool expected = xfail.count(id) > 0;
    const char* tag = o.pass ? "PASS" : "FAIL";
    std::printf("[%s] %2d %s: %s (%.1f s)%s\n", tag, id, criteria[i].first.c_str(), o.detail.c_str(), sec,
                expected && !o.pass ? " [expected]" : "");
    std::fflush(stdout);
    if (!o.pass && !expected) ok = false;
    report.push_back({{"criterion", id}, {"name", criteria[i].first}, {"pass", o.pass}, {"seconds", sec},
                      {"detail", o.detail}, {"data", o.data}});
  }
  if (!json_out.empty()) std::ofstream(json_out) << report.dump(2) << "\n";
  return ok ? 0 : 1;
}
