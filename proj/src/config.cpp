#include <cmath>
#include <set>

#include "infmix/config.hpp"
#include "infmix/error.hpp"

namespace infmix::config {

namespace {

using nlohmann::json;

// Collects problems so a bad config reports all of them at once.
struct Reader {
  std::vector<std::string> errors;

  void unknown_keys(const json& t, const std::string& where, std::set<std::string> allowed) {
    for (auto it = t.begin(); it != t.end(); ++it)
      if (!allowed.count(it.key())) errors.push_back(where + "." + it.key() + ": unknown key");
  }
  const json* table(const json& root, const std::string& key) {
    if (!root.contains(key)) return nullptr;
    if (!root[key].is_object()) {
      errors.push_back(key + ": expected a table");
      return nullptr;
    }
    return &root[key];
  }
  void num(const json* t, const std::string& where, const char* key, double& out, double lo, double hi) {
    if (!t || !t->contains(key)) return;
    const auto& v = (*t)[key];
    if (!v.is_number()) {
      errors.push_back(where + "." + key + ": expected a number");
      return;
    }
    double d = v.get<double>();
    if (!(d >= lo && d <= hi)) {
      errors.push_back(where + "." + key + ": " + std::to_string(d) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
      return;
    }
    out = d;
  }
  template <class I>
  void integer(const json* t, const std::string& where, const char* key, I& out, std::int64_t lo, std::int64_t hi) {
    if (!t || !t->contains(key)) return;
    const auto& v = (*t)[key];
    if (!v.is_number_integer()) {
      errors.push_back(where + "." + key + ": expected an integer");
      return;
    }
    auto d = v.get<std::int64_t>();
    if (d < lo || d > hi) {
      errors.push_back(where + "." + key + ": " + std::to_string(d) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
      return;
    }
    out = static_cast<I>(d);
  }
  void boolean(const json* t, const std::string& where, const char* key, bool& out) {
    if (!t || !t->contains(key)) return;
    if (!(*t)[key].is_boolean()) {
      errors.push_back(where + "." + key + ": expected true or false");
      return;
    }
    out = (*t)[key].get<bool>();
  }
  void choice(const json* t, const std::string& where, const char* key, std::string& out,
              std::set<std::string> options) {
    if (!t || !t->contains(key)) return;
    if (!(*t)[key].is_string()) {
      errors.push_back(where + "." + key + ": expected a string");
      return;
    }
    auto s = (*t)[key].get<std::string>();
    if (!options.count(s)) {
      std::string all;
      for (auto& o : options) all += (all.empty() ? "" : ", ") + o;
      errors.push_back(where + "." + key + ": '" + s + "' is not one of " + all);
      return;
    }
    out = s;
  }

  void observable(const json* t, const std::string& where, ObservableSpec& o) {
    if (!t) return;
    unknown_keys(*t, where, {"kind", "amp", "c_t", "c_x2", "sigma", "offset", "a", "b_t", "c_fiber"});
    choice(t, where, "kind", o.kind, {"bump", "affine", "constant"});
    num(t, where, "amp", o.amp, -1e6, 1e6);
    num(t, where, "c_t", o.c_t, 0, 1);
    num(t, where, "c_x2", o.c_x2, 0, 1);
    num(t, where, "sigma", o.sigma, 1e-3, 1e3);
    num(t, where, "offset", o.offset, -1e6, 1e6);
    num(t, where, "a", o.a, -1e6, 1e6);
    num(t, where, "b_t", o.b_t, -1e6, 1e6);
    num(t, where, "c_fiber", o.c_fiber, -1e6, 1e6);
  }
};

}  // namespace

double ExperimentConfig::beta() const {
  if (tails.beta) return *tails.beta;
  if (system.kind == "synthetic") return system.law_beta;
  return 1.0 / system.gamma;
}

std::vector<std::int64_t> geometric_grid(std::int64_t lo, std::int64_t hi, int per_decade) {
  if (lo < 1 || hi < lo || per_decade < 1) throw DomainError("geometric_grid: need 1 <= lo <= hi, per_decade >= 1");
  std::vector<std::int64_t> g;
  const double step = std::pow(10.0, 1.0 / per_decade);
  for (double x = static_cast<double>(lo); x < static_cast<double>(hi) * (1 - 1e-9); x *= step) {
    auto n = static_cast<std::int64_t>(std::llround(x));
    if (g.empty() || n > g.back()) g.push_back(n);
  }
  if (g.empty() || g.back() != hi) g.push_back(hi);
  return g;
}

ExperimentConfig from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a table");
  Reader r;
  ExperimentConfig c;
  c.raw = j;
  r.unknown_keys(j, "config", {"system", "tails", "tower", "operators", "mixing", "seed", "output"});

  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0)
      r.errors.push_back("config.seed: expected a non-negative integer");
    else
      c.seed = j["seed"].get<std::uint64_t>();
  }
  if (const json* t = r.table(j, "output")) {
    r.unknown_keys(*t, "output", {"dir"});
    if (t->contains("dir")) {
      if ((*t)["dir"].is_string())
        c.out = (*t)["dir"].get<std::string>();
      else
        r.errors.push_back("output.dir: expected a string");
    }
  }

  const json* sys = r.table(j, "system");
  if (!sys) r.errors.push_back("system: table is required");
  if (sys) {
    r.unknown_keys(*sys, "system", {"kind", "gamma", "fiber", "kappa", "law", "beta", "N", "p"});
    r.choice(sys, "system", "kind", c.system.kind, {"lsv", "skew", "synthetic"});
    r.num(sys, "system", "gamma", c.system.gamma, 1e-3, 10.0);
    r.choice(sys, "system", "fiber", c.system.fiber, {"halving", "quadratic"});
    r.num(sys, "system", "kappa", c.system.kappa, -0.999, 0.999);
    r.choice(sys, "system", "law", c.system.law, {"power_law", "table"});
    r.num(sys, "system", "beta", c.system.law_beta, 1e-3, 0.999);
    r.integer(sys, "system", "N", c.system.law_n, 1, 100000000);
    if (sys->contains("p")) {
      const auto& p = (*sys)["p"];
      if (!p.is_array() || p.empty()) {
        r.errors.push_back("system.p: expected a non-empty array of probabilities");
      } else {
        double total = 0.0;
        for (const auto& x : p) {
          if (!x.is_number() || x.get<double>() < 0) {
            r.errors.push_back("system.p: entries must be non-negative numbers");
            break;
          }
          c.system.table.push_back(x.get<double>());
          total += x.get<double>();
        }
        if (total > 1.0 + 1e-12) r.errors.push_back("system.p: probabilities sum to more than 1");
      }
    }
    if (c.system.kind == "synthetic" && c.system.law == "table" && c.system.table.empty())
      r.errors.push_back("system.p: required when system.law = \"table\"");
  }

  if (const json* t = r.table(j, "tails")) {
    r.unknown_keys(*t, "tails", {"beta", "ell", "c", "a", "smooth_tails", "q", "samples"});
    if (t->contains("beta")) {
      double b = 0.0;
      r.num(t, "tails", "beta", b, 1e-3, 1.0);
      c.tails.beta = b;
    }
    r.choice(t, "tails", "ell", c.tails.ell, {"fitted", "constant", "log_power"});
    r.num(t, "tails", "c", c.tails.ell_c, 1e-12, 1e12);
    r.num(t, "tails", "a", c.tails.ell_a, -10, 10);
    r.boolean(t, "tails", "smooth_tails", c.tails.smooth_tails);
    if (t->contains("q")) {
      double q = 0.0;
      r.num(t, "tails", "q", q, 0.5, 1.0);
      c.tails.q = q;
    }
    r.integer(t, "tails", "samples", c.tails.samples, 1000, 1000000000);
  }

  if (const json* t = r.table(j, "tower")) {
    r.unknown_keys(*t, "tower", {"h_max", "bins", "depth", "approx_k", "fiber_bins", "diag_h_max"});
    r.integer(t, "tower", "h_max", c.tower.h_max, 2, 1000000);
    r.integer(t, "tower", "bins", c.tower.bins, 1, 4096);
    r.integer(t, "tower", "depth", c.tower.depth, 1, 20);
    r.integer(t, "tower", "approx_k", c.tower.approx_k, 0, 10);
    r.integer(t, "tower", "fiber_bins", c.tower.fiber_bins, 1, 64);
    r.integer(t, "tower", "diag_h_max", c.tower.diag_h_max, 2, 5000);
  }

  if (const json* t = r.table(j, "operators")) {
    r.unknown_keys(*t, "operators", {"N", "family_depth", "family_random", "theta", "convcheck_n", "eterm_k"});
    r.integer(t, "operators", "N", c.operators.N, 1, 10000000);
    r.integer(t, "operators", "family_depth", c.operators.family_depth, 0, 64);
    r.integer(t, "operators", "family_random", c.operators.family_random, 0, 1024);
    r.num(t, "operators", "theta", c.operators.theta, 1e-3, 0.999);
    r.integer(t, "operators", "convcheck_n", c.operators.convcheck_n, 0, 100000);
    if (t->contains("eterm_k")) {
      const auto& ks = (*t)["eterm_k"];
      c.operators.eterm_k.clear();
      if (!ks.is_array()) r.errors.push_back("operators.eterm_k: expected an array of integers");
      else
        for (const auto& k : ks) {
          if (!k.is_number_integer() || k.get<int>() < 0) {
            r.errors.push_back("operators.eterm_k: entries must be non-negative integers");
            break;
          }
          c.operators.eterm_k.push_back(k.get<int>());
        }
    }
  }

  if (const json* t = r.table(j, "mixing")) {
    r.unknown_keys(*t, "mixing", {"n_grid", "n_min", "n_max", "per_decade", "method", "samples", "assert_limit",
                                   "tolerance", "v", "w"});
    r.choice(t, "mixing", "method", c.mixing.method, {"operator", "montecarlo"});
    r.integer(t, "mixing", "samples", c.mixing.samples, 64, 10000000000LL);
    r.boolean(t, "mixing", "assert_limit", c.mixing.assert_limit);
    r.num(t, "mixing", "tolerance", c.mixing.tolerance, 0.0, 1e6);
    if (t->contains("n_grid")) {
      const auto& g = (*t)["n_grid"];
      if (!g.is_array() || g.empty()) r.errors.push_back("mixing.n_grid: expected a non-empty array");
      else
        for (const auto& n : g) {
          if (!n.is_number_integer() || n.get<std::int64_t>() < 0) {
            r.errors.push_back("mixing.n_grid: entries must be non-negative integers");
            break;
          }
          c.mixing.n_grid.push_back(n.get<std::int64_t>());
        }
    } else {
      std::int64_t lo = 100, hi = 10000;
      int per = 10;
      r.integer(t, "mixing", "n_min", lo, 1, 100000000);
      r.integer(t, "mixing", "n_max", hi, 1, 100000000);
      r.integer(t, "mixing", "per_decade", per, 1, 100);
      if (lo <= hi) c.mixing.n_grid = geometric_grid(lo, hi, per);
      else r.errors.push_back("mixing.n_min: must not exceed mixing.n_max");
    }
    r.observable(t->contains("v") && (*t)["v"].is_object() ? &(*t)["v"] : nullptr, "mixing.v", c.mixing.v);
    r.observable(t->contains("w") && (*t)["w"].is_object() ? &(*t)["w"] : nullptr, "mixing.w", c.mixing.w);
  } else {
    c.mixing.n_grid = geometric_grid(100, 10000, 10);
  }

  // cross-field checks
  if (c.system.kind == "skew" && c.mixing.method == "operator")
    r.errors.push_back("mixing.method: the operator method needs a quotient system (lsv or synthetic)");
  if (c.mixing.method == "operator") {
    for (auto n : c.mixing.n_grid)
      if (n > c.operators.N) {
        r.errors.push_back("mixing.n_grid: n = " + std::to_string(n) + " exceeds operators.N");
        break;
      }
  }
  if (c.system.kind == "synthetic" && c.system.law == "table") {
    // beta of a tabulated law must be declared
    if (!c.tails.beta) r.errors.push_back("tails.beta: required for a tabulated synthetic law");
  }
  const double beta = c.beta();
  if (c.tails.q && !c.tails.smooth_tails)
    r.errors.push_back("tails.q: only meaningful with tails.smooth_tails = true");
  if (c.mixing.assert_limit && beta <= 0.5 && !c.tails.smooth_tails)
    r.errors.push_back("mixing.assert_limit: beta = " + std::to_string(beta) +
                       " <= 1/2; the mixing limit is only established under the smooth tails condition "
                       "(set tails.smooth_tails = true for a system that satisfies it, or drop the assertion)");

  if (!r.errors.empty()) {
    std::string msg = "invalid config:";
    for (auto& e : r.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig load(const std::filesystem::path& p) { return from_json(load_file(p)); }

}  // namespace infmix::config
