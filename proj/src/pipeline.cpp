#include "infmix/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <gsl/gsl_sf_zeta.h>

#include "infmix/error.hpp"
#include "infmix/hypotheses.hpp"
#include "infmix/parallel.hpp"
#include "infmix/sampling.hpp"

namespace infmix::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("cli.manifest", "sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

// ---- context ----

Context::Context(config::ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  const auto& s = cfg_.system;
  if (s.kind == "lsv" || s.kind == "skew") {
    map_.emplace(s.gamma);
    auto fiber = s.fiber == "halving" ? systems::Fiber::halving() : systems::Fiber::quadratic(s.kappa);
    skew_.emplace(*map_, fiber);
    induced_ = std::make_unique<systems::LsvInduced>(*map_);
  } else {
    if (s.law == "power_law")
      dist_.emplace(renewal::ReturnDistribution::power_law(s.law_beta, s.law_n));
    else
      dist_.emplace(renewal::ReturnDistribution::from_table(s.table));
    auto m = dist_->masses();
    synthetic_ = std::make_unique<systems::SyntheticInduced>(std::vector<double>(m.begin(), m.end()));
    induced_ = std::make_unique<systems::SyntheticInduced>(*synthetic_);
  }
}

sampling::Dynamics Context::dynamics() const {
  if (cfg_.system.kind == "skew") return sampling::Dynamics::of(*skew_);
  if (map_) return sampling::Dynamics::of(*map_);
  return sampling::Dynamics::of(*synthetic_);
}

std::int64_t Context::horizon() const {
  std::int64_t h = cfg_.operators.N;
  for (auto n : cfg_.mixing.n_grid) h = std::max(h, n);
  return std::max<std::int64_t>(h, 2);
}

const operators::OperatorBundle& Context::bundle() {
  if (!bundle_) bundle_.emplace(operators::OperatorBundle::build(*induced_, cfg_.tower.bins, cfg_.tower.h_max));
  return *bundle_;
}

const operators::OperatorBundle& Context::coarse_bundle() {
  if (!coarse_)
    coarse_.emplace(operators::OperatorBundle::build(*induced_, std::max(1, cfg_.tower.bins / 2), cfg_.tower.h_max));
  return *coarse_;
}

const operators::OperatorBundle& Context::diag_bundle() {
  if (cfg_.tower.h_max <= cfg_.tower.diag_h_max) return bundle();
  if (!diag_) diag_.emplace(operators::OperatorBundle::build(*induced_, cfg_.tower.bins, cfg_.tower.diag_h_max));
  return *diag_;
}

const regvar::TailLaw& Context::law() {
  if (law_) return *law_;
  const double beta = cfg_.beta();
  std::optional<double> q;
  if (cfg_.tails.smooth_tails) q = cfg_.tails.q.value_or(1.0);
  const std::int64_t N = horizon();
  std::string ell = cfg_.tails.ell;
  if (ell == "constant") {
    law_.emplace(beta, regvar::SlowlyVarying::constant(cfg_.tails.ell_c), q);
  } else if (ell == "log_power") {
    law_.emplace(beta, regvar::SlowlyVarying::log_power(cfg_.tails.ell_c, cfg_.tails.ell_a), q);
  } else if (map_) {
    auto fitted = mixing::lsv_tail_law(bundle(), *map_, N);
    law_.emplace(beta, fitted.ell(), q, fitted.options());
  } else if (cfg_.system.law == "power_law") {
    // P(phi > n) ~ n^{-beta} / (beta zeta(1+beta))
    law_.emplace(beta, regvar::SlowlyVarying::constant(1.0 / (beta * gsl_sf_zeta(1.0 + beta))), q);
  } else {
    std::vector<double> ell_tab;
    const std::int64_t top = std::min<std::int64_t>(N, dist_->size());
    for (std::int64_t n = 1; n <= top; ++n)
      ell_tab.push_back(std::max(dist_->tail(n), 1e-300) * std::pow(static_cast<double>(n), beta));
    regvar::TailLawOptions o;
    o.check_limit = top;
    o.cache_size = N + 1;
    law_.emplace(beta, regvar::SlowlyVarying::table(std::move(ell_tab)), q, o);
  }
  return *law_;
}

tower::TwoSidedSystem Context::two_sided(int h_max) const {
  if (skew_) return tower::TwoSidedSystem::lsv(*skew_, h_max);
  return tower::TwoSidedSystem::synthetic(*synthetic_, systems::Fiber::halving(), h_max);
}

tower::BaseObservable Context::observable(const config::ObservableSpec& o) const {
  if (o.kind == "constant") return tower::BaseObservable::constant(o.a);
  if (o.kind == "affine") return tower::BaseObservable::affine(o.a, o.b_t, o.c_fiber);
  return tower::BaseObservable::bump(o.amp, o.c_t, o.c_x2, o.sigma, o.offset);
}

// ---- stages ----

namespace {

std::vector<std::int64_t> decades_upto(std::int64_t N) {
  std::vector<std::int64_t> out;
  for (std::int64_t n = 100; n <= N; n *= 10) out.push_back(n);
  return out;
}

std::string csv_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

StageOutput stage_tails(Context& ctx) {
  const auto& c = ctx.cfg();
  StageOutput out;
  json& r = out.report;
  r["system"] = c.system.kind;
  r["beta_declared"] = c.beta();
  if (ctx.quotient_lsv()) {
    auto est = sampling::empirical_tail(ctx.dynamics(), c.tails.samples, c.seed);
    r["beta_hat"] = est.beta_hat;
    r["beta_se"] = est.beta_se;
    r["samples"] = est.samples;
    r["censored"] = est.censored;
    r["restarts"] = est.restarts;
    r["fit_points"] = est.fit_points;
    std::ostringstream csv;
    csv << "n,tail\n";
    for (std::size_t i = 0; i < est.n.size(); ++i) csv << est.n[i] << ',' << csv_number(est.tail[i]) << '\n';
    out.tables.emplace_back("tails.csv", csv.str());
  } else {
    const auto& dist = *ctx.distribution();
    const std::int64_t N = std::min<std::int64_t>(ctx.horizon(), dist.size());
    auto nr = renewal::normalized_renewal(dist, ctx.law(), N);
    r["beta_hat"] = nr.beta_hat;
    r["normalized_at_N"] = nr.value_at_N;
    r["N"] = N;
    r["log_slope"] = nr.log_slope;
    r["accepted"] = nr.accepted;
    r["warnings"] = nr.warnings;
    json checkpoints = json::array();
    for (auto n : decades_upto(N))
      checkpoints.push_back({{"n", n}, {"u_n", nr.u[n]}, {"a_n", nr.a[n]}, {"deviation", std::abs(nr.normalized[n] - 1)}});
    r["checkpoints"] = checkpoints;
    std::ostringstream csv;
    csv << "n,u_n,a_n,normalized\n";
    for (std::int64_t n = 1; n <= N; n = std::max(n + 1, n * 21 / 20))
      csv << n << ',' << csv_number(nr.u[n]) << ',' << csv_number(nr.a[n]) << ',' << csv_number(nr.normalized[n])
          << '\n';
    out.tables.emplace_back("renewal.csv", csv.str());
  }
  return out;
}

StageOutput stage_tower(Context& ctx) {
  const auto& c = ctx.cfg();
  StageOutput out;
  const auto& b = ctx.bundle();
  out.report = tower::tower_summary(b);
  const double gamma = ctx.cfg().system.kind == "skew" && c.system.fiber == "quadratic"
                           ? systems::Fiber::quadratic(c.system.kappa).contraction()
                           : 0.5;
  auto g = tower::gamma_psi_l1(ctx.diag_bundle(), gamma, std::max(1, c.tower.approx_k));
  out.report["gamma"] = gamma;
  out.report["gamma_psi_l1"] = g;
  out.report["gamma_psi_h_max"] = ctx.diag_bundle().h_max();

  // approximation scheme on a short truncation
  const int h_small = std::min(c.tower.h_max, 64);
  auto sys = ctx.two_sided(h_small);
  auto cells = tower::tower_cells(sys, 32, c.tower.fiber_bins);
  // a constant observable would make the check trivial, so the default bump is used unless v varies
  auto v = ctx.observable(c.mixing.v.kind == "constant" ? config::ObservableSpec{} : c.mixing.v);
  json approx = json::array();
  for (int k = 1; k <= c.tower.approx_k; ++k) {
    auto a = tower::check_approx_bounds(sys, v, k, cells, gamma);
    auto s = tower::check_support(sys, v, k, cells);
    approx.push_back({{"k", k},
                      {"cells", a.cells},
                      {"truncated", a.truncated},
                      {"sup_ratio", a.sup_ratio},
                      {"vk_sup", a.vk_sup},
                      {"v_sup", a.v_sup},
                      {"sup_ok", a.sup_ok},
                      {"support_a_violations", s.support_a_violations},
                      {"support_b_violations", s.support_b_violations}});
  }
  out.report["approximation"] = {{"h_max", h_small}, {"checks", approx}};
  return out;
}

StageOutput stage_spectrum(Context& ctx) {
  StageOutput out;
  const auto& b = ctx.bundle();
  json& r = out.report;
  r["system"] = b.system_name();
  r["bins"] = b.bins();
  r["h_max"] = b.h_max();
  r["pieces"] = b.piece_count();
  r["power_residual"] = b.power_residual();
  r["power_iterations"] = b.power_iterations();
  r["constant_defect"] = b.constant_defect();
  r["big_images"] = b.big_images();
  std::ostringstream csv;
  csv << "bin,lo,density\n";
  for (int i = 0; i < b.bins(); ++i) csv << i << ',' << csv_number(b.bin_lo(i)) << ',' << csv_number(b.density(i)) << '\n';
  out.tables.emplace_back("density.csv", csv.str());

  const auto& c = ctx.cfg();
  std::vector<std::int64_t> ns;
  for (auto n : decades_upto(std::min<std::int64_t>(c.operators.N, b.h_max()))) ns.push_back(n);
  if (!ns.empty()) {
    auto un = operators::U_n_minus_P_norm(b, ctx.law(), ns, c.operators.family_depth, c.operators.family_random,
                                          c.operators.theta, c.seed);
    json arr = json::array();
    for (const auto& u : un)
      arr.push_back({{"n", u.n},
                     {"lower_bound", u.lower_bound},
                     {"sup_on_constants", u.sup_on_constants},
                     {"discretization_gap", u.discretization_gap}});
    r["U_n_minus_P"] = arr;
  }
  return out;
}

StageOutput stage_convcheck(Context& ctx) {
  StageOutput out;
  const auto& b = ctx.diag_bundle();
  const auto& c = ctx.cfg();
  const std::int64_t n_max = std::min<std::int64_t>(c.operators.convcheck_n, b.h_max());
  auto cv = operators::convolution_check(b, n_max, c.seed);
  auto lm = operators::check_level_mass(b, std::min(100, b.h_max() - 1), std::min(20, b.h_max() - 1));
  out.report = {{"n_max", n_max},
                {"h_max", b.h_max()},
                {"max_defect", cv.max_defect},
                {"worst_n", cv.worst_n},
                {"partition_defect", cv.partition_defect},
                {"discarded_mass", cv.discarded_mass},
                {"truncation_mass", cv.truncation_mass},
                {"level_mass",
                 {{"checked", lm.checked},
                  {"violations", lm.violations},
                  {"witness_j", lm.witness_j},
                  {"witness_k", lm.witness_k},
                  {"witness_lhs", lm.witness_lhs},
                  {"witness_rhs", lm.witness_rhs},
                  {"max_slack_ratio", lm.max_slack_ratio}}}};
  std::ostringstream csv;
  csv << "n,value,bound\n";
  for (std::size_t n = 0; n < cv.defect_by_n.size(); ++n)
    csv << n << ',' << csv_number(cv.defect_by_n[n]) << ',' << csv_number(cv.truncation_mass) << '\n';
  out.tables.emplace_back("convcheck.csv", csv.str());
  return out;
}

StageOutput stage_eterms(Context& ctx) {
  StageOutput out;
  const auto& b = ctx.bundle();
  const auto& c = ctx.cfg();
  const std::int64_t N = std::min<std::int64_t>(c.operators.N, b.h_max());
  std::vector<double> one(b.piece_count(), 1.0), w0(b.piece_count(), 0.0);
  // w is the pull-back of the indicator of the left half of the base
  for (std::size_t i = 0; i < w0.size(); ++i)
    if (b.pieces()[i].lo < 0.5) w0[i] = 1.0;
  operators::ETermEngine eng(b, ctx.law(), one, N);
  std::ostringstream csv;
  csv << "k,n,lhs,e1,e2,e3,e2p,e2pp,identity_defect,env_e2pp,env_e3,env_smooth,env_log\n";
  json per_k = json::array();
  double worst_identity = 0.0;
  for (int k : c.operators.eterm_k) {
    double c_e2pp = 0, c_e3 = 0, c_smooth = 0, c_e2pp_first = 0, c_e3_first = 0, c_smooth_first = 0;
    std::int64_t first_hi = 0;
    for (auto n : config::geometric_grid(100, std::max<std::int64_t>(100, N), 5)) {
      if (n > N || 3 * k > n) continue;
      if (first_hi == 0) first_hi = 10 * n;
      auto e = eng.evaluate(w0, k, n);
      worst_identity = std::max(worst_identity, e.identity_defect);
      csv << k << ',' << n;
      for (double x : {e.lhs, e.e1, e.e2, e.e3, e.e2p, e.e2pp, e.identity_defect, e.env_e2pp, e.env_e3,
                       e.env_smooth, e.env_log})
        csv << ',' << csv_number(x);
      csv << '\n';
      auto upd = [&](double& all, double& first, double ratio) {
        all = std::max(all, ratio);
        if (n <= first_hi) first = std::max(first, ratio);
      };
      if (e.env_e2pp > 0) upd(c_e2pp, c_e2pp_first, std::abs(e.e2pp) / e.env_e2pp);
      if (e.env_e3 > 0) upd(c_e3, c_e3_first, std::abs(e.e3) / e.env_e3);
      if (e.env_smooth > 0) upd(c_smooth, c_smooth_first, std::abs(e.e2pp) / e.env_smooth);
    }
    per_k.push_back({{"k", k},
                     {"C_e2pp", c_e2pp},
                     {"C_e2pp_first_decade", c_e2pp_first},
                     {"C_e3", c_e3},
                     {"C_e3_first_decade", c_e3_first},
                     {"C_e2pp_smooth", c_smooth},
                     {"C_e2pp_smooth_first_decade", c_smooth_first}});
  }
  out.report = {{"N", N}, {"max_identity_defect", worst_identity}, {"constants", per_k}};
  out.tables.emplace_back("eterms.csv", csv.str());
  return out;
}

json rate_report(const mixing::CorrelationSeries& s, const regvar::TailLaw& law) {
  try {
    return mixing::fit_rate(s, law).to_json();
  } catch (const DomainError& e) {
    return {{"no_rate", true}, {"reason", e.what()}};
  }
}

StageOutput stage_mixing(Context& ctx, mixing::CorrelationSeries* series_out) {
  const auto& c = ctx.cfg();
  StageOutput out;
  auto vo = ctx.observable(c.mixing.v), wo = ctx.observable(c.mixing.w);
  mixing::CorrelationSeries s;
  if (c.mixing.method == "operator") {
    const auto& b = ctx.bundle();
    auto pv = mixing::sample_on_pieces(b, vo), pw = mixing::sample_on_pieces(b, wo);
    s = mixing::correlation_operator(b, ctx.law(), pv, pw, c.mixing.n_grid);
    if (b.bins() > 1) {
      const auto& cb = ctx.coarse_bundle();
      auto cv = mixing::sample_on_pieces(cb, vo), cw = mixing::sample_on_pieces(cb, wo);
      auto coarse = mixing::correlation_operator(cb, ctx.law(), cv, cw, c.mixing.n_grid);
      mixing::attach_bias(s, coarse);
    }
  } else {
    auto a = regvar::a_seq(ctx.law(), ctx.horizon());
    mixing::MonteCarloOptions o;
    o.samples = c.mixing.samples;
    o.seed = c.seed;
    s = mixing::correlation_montecarlo(ctx.dynamics(), vo, wo, c.mixing.n_grid, a, o);
  }
  std::ostringstream csv;
  s.write_csv(csv);
  out.tables.emplace_back("mixing.csv", csv.str());
  out.report = {{"method", s.method},
                {"target", s.target},
                {"int_v", s.int_v},
                {"int_w", s.int_w},
                {"insufficient", s.insufficient}};
  if (series_out) *series_out = s;
  return out;
}

// ---- run / verify ----

json write_artifacts(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  json entries = json::array();
  for (const auto& [name, body] : files) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + (dir / name).string() + "'");
    os << body;
    entries.push_back({{"file", name}, {"sha256", sha256_hex(body)}, {"bytes", body.size()}});
  }
  return entries;
}

RunResult run(const config::ExperimentConfig& cfg, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx(cfg);
  std::vector<std::pair<std::string, std::string>> files;
  auto add = [&](const std::string& json_name, StageOutput s) {
    files.emplace_back(json_name, s.report.dump(2) + "\n");
    for (auto& t : s.tables) files.push_back(std::move(t));
  };
  add("tails.json", stage_tails(ctx));
  add("tower.json", stage_tower(ctx));
  add("spectrum.json", stage_spectrum(ctx));
  add("convcheck.json", stage_convcheck(ctx));
  if (!cfg.operators.eterm_k.empty()) add("eterms.json", stage_eterms(ctx));
  mixing::CorrelationSeries s;
  add("mixing.json", stage_mixing(ctx, &s));
  files.emplace_back("rate.json", rate_report(s, ctx.law()).dump(2) + "\n");

  RunResult res;
  res.out = out;
  if (cfg.mixing.assert_limit) {
    // trend across decades and tolerance at the largest reliable n
    std::vector<double> dev;
    std::int64_t next = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s.reliable[i]) continue;
      if (s.n[i] >= next) {
        dev.push_back(std::abs(s.residual(i) / s.target));
        next = s.n[i] * 10;
      }
    }
    double last = 0.0;
    for (std::size_t i = s.size(); i-- > 0;)
      if (s.reliable[i]) {
        last = std::abs(s.residual(i) / s.target);
        break;
      }
    bool trend = dev.size() >= 2;
    for (std::size_t i = 1; i < dev.size(); ++i) trend = trend && dev[i] < dev[i - 1];
    res.limit_ok = trend && last <= cfg.mixing.tolerance;
    std::ostringstream msg;
    msg << "relative deviation at the largest reliable n: " << last << " (tolerance " << cfg.mixing.tolerance
        << "), decreasing across decades: " << (trend ? "yes" : "no");
    res.limit_message = msg.str();
  }

  auto entries = write_artifacts(out, files);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.manifest = {{"version", INFMIX_VERSION},
                  {"config_sha256", sha256_hex(cfg.raw.dump())},
                  {"config", cfg.raw},
                  {"seed", cfg.seed},
                  {"threads", thread_count()},
                  {"wall_time_s", wall},
                  {"artifacts", entries}};
  if (cfg.mixing.assert_limit) res.manifest["limit_check"] = {{"ok", res.limit_ok}, {"detail", res.limit_message}};
  std::ofstream(out / "manifest.json") << res.manifest.dump(2) << "\n";
  return res;
}

VerifyResult verify(const fs::path& out) {
  VerifyResult r;
  std::ifstream in(out / "manifest.json");
  if (!in) throw ConfigError("no manifest.json in '" + out.string() + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest.json: ") + e.what());
  }
  if (!m.contains("artifacts") || !m["artifacts"].is_array()) throw ConfigError("manifest.json: no artifact list");
  for (const auto& e : m["artifacts"]) {
    ++r.files;
    const fs::path p = out / e.at("file").get<std::string>();
    if (!fs::exists(p)) {
      r.problems.push_back(e["file"].get<std::string>() + ": missing");
      continue;
    }
    if (sha256_file(p) != e.at("sha256").get<std::string>())
      r.problems.push_back(e["file"].get<std::string>() + ": hash mismatch");
  }
  // every file in the directory must be listed
  for (const auto& de : fs::directory_iterator(out)) {
    auto name = de.path().filename().string();
    if (name == "manifest.json") continue;
    bool listed = std::any_of(m["artifacts"].begin(), m["artifacts"].end(),
                              [&](const json& e) { return e.at("file") == name; });
    if (!listed) r.problems.push_back(name + ": not listed in the manifest");
  }
  return r;
}

}  // namespace infmix::pipeline
