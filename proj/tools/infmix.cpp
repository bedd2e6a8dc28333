// infmix command line: subcommands over the library, exit codes 0 ok / 2 config / 3 numeric.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "infmix/config.hpp"
#include "infmix/error.hpp"
#include "infmix/fault.hpp"
#include "infmix/mixing.hpp"
#include "infmix/parallel.hpp"
#include "infmix/pipeline.hpp"
#include "infmix/renewal.hpp"
#include "infmix/selftest.hpp"

namespace fs = std::filesystem;
using namespace infmix;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
  std::string format = "json";
};

config::ExperimentConfig load_config(const std::string& path, const Globals& g) {
  auto j = config::load_file(path);
  if (g.seed) j["seed"] = *g.seed;
  return config::from_json(j);
}

// --out DIR writes the report and its tables; otherwise the report (json) or first table (csv) goes to stdout
void emit(const pipeline::StageOutput& s, const std::string& name, const Globals& g) {
  if (!g.out.empty()) {
    std::vector<std::pair<std::string, std::string>> files{{name + ".json", s.report.dump(2) + "\n"}};
    for (const auto& t : s.tables) files.push_back(t);
    auto entries = pipeline::write_artifacts(g.out, files);
    for (const auto& e : entries) std::cout << (fs::path(g.out) / e["file"].get<std::string>()).string() << "\n";
    return;
  }
  if (g.format == "csv" && !s.tables.empty())
    std::cout << s.tables.front().second;
  else
    std::cout << s.report.dump(2) << "\n";
}

int run_cli(int argc, char** argv) {
  CLI::App app{"infmix: mixing experiments for infinite measure systems"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--threads", g.threads, "worker threads (default: INFMIX_THREADS or hardware)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
  app.set_version_flag("--version", INFMIX_VERSION);

  std::string cfg_path;
  int code = 0;

  auto* run = app.add_subcommand("run", "tails -> tower -> operators -> mixing, with manifest");
  run->add_option("config", cfg_path, "TOML or JSON config")->required();
  run->callback([&] {
    auto c = load_config(cfg_path, g);
    fs::path out = g.out.empty() ? fs::path(c.out) : fs::path(g.out);
    auto r = pipeline::run(c, out);
    std::cout << "wrote " << r.manifest["artifacts"].size() << " artifacts to " << out.string() << "\n";
    if (!r.limit_ok) throw NumericError("mixing.assert_limit", r.limit_message);
    if (c.mixing.assert_limit) std::cout << "limit check passed: " << r.limit_message << "\n";
  });

  auto* ver = app.add_subcommand("verify", "recompute artifact hashes against the manifest");
  std::string ver_dir;
  ver->add_option("dir", ver_dir)->required();
  ver->callback([&] {
    auto r = pipeline::verify(ver_dir);
    for (const auto& p : r.problems) std::cout << "MISMATCH " << p << "\n";
    std::cout << r.files << " artifacts, " << r.problems.size() << " problems\n";
    if (!r.ok()) code = 1;
  });

  auto* ren = app.add_subcommand("renewal", "renewal sequence u_n and a_n u_n for a return law");
  double r_beta = 0.75;
  std::int64_t r_N = 10000;
  std::vector<double> r_p;
  std::optional<double> r_c;
  ren->add_option("--beta", r_beta, "power law p_n = n^-(1+beta)/zeta(1+beta)")->check(CLI::Range(0.001, 0.999));
  ren->add_option("--N", r_N)->check(CLI::Range(std::int64_t{1}, std::int64_t{100000000}));
  ren->add_option("--p", r_p, "explicit p_1, p_2, ... instead of the power law");
  ren->add_option("--ell", r_c, "constant l in P(phi > n) ~ l n^-beta (default: exact power-law constant)");
  ren->callback([&] {
    config::ExperimentConfig c;
    c.system.kind = "synthetic";
    c.system.law_beta = r_beta;
    c.system.law_n = r_N;
    c.operators.N = r_N;
    c.mixing.n_grid = {r_N};
    if (!r_p.empty()) {
      c.system.law = "table";
      c.system.table = r_p;
      c.tails.beta = r_beta;
    }
    if (r_c) {
      c.tails.ell = "constant";
      c.tails.ell_c = *r_c;
    }
    pipeline::Context ctx(c);
    emit(pipeline::stage_tails(ctx), "renewal", g);
  });

  auto* tails = app.add_subcommand("tails", "tail exponent from induced orbits or from the return law");
  tails->add_option("config", cfg_path)->required();
  tails->callback([&] {
    pipeline::Context ctx(load_config(cfg_path, g));
    emit(pipeline::stage_tails(ctx), "tails", g);
  });

  auto* tower_cmd = app.add_subcommand("tower", "tower structure");
  tower_cmd->require_subcommand(1);
  auto* inspect = tower_cmd->add_subcommand("inspect", "columns, masses, approximation-scheme checks");
  inspect->add_option("config", cfg_path)->required();
  inspect->callback([&] {
    pipeline::Context ctx(load_config(cfg_path, g));
    emit(pipeline::stage_tower(ctx), "tower", g);
  });

  auto* ops = app.add_subcommand("operators", "transfer and renewal operators");
  ops->require_subcommand(1);
  auto* spec = ops->add_subcommand("spectrum", "invariant density, residuals, ||U_n - P|| surrogates");
  spec->add_option("config", cfg_path)->required();
  spec->callback([&] {
    pipeline::Context ctx(load_config(cfg_path, g));
    emit(pipeline::stage_spectrum(ctx), "spectrum", g);
  });
  auto* conv = ops->add_subcommand("convcheck", "L^n 1_Y = sum A_j T_{n-j} and the level-mass inequality");
  conv->add_option("config", cfg_path)->required();
  conv->callback([&] {
    pipeline::Context ctx(load_config(cfg_path, g));
    emit(pipeline::stage_convcheck(ctx), "convcheck", g);
  });
  auto* et = ops->add_subcommand("eterms", "E-term decomposition against its envelopes");
  et->add_option("config", cfg_path)->required();
  et->callback([&] {
    pipeline::Context ctx(load_config(cfg_path, g));
    emit(pipeline::stage_eterms(ctx), "eterms", g);
  });

  auto* mix = app.add_subcommand("mixing", "correlation series and rates");
  mix->require_subcommand(1);
  auto* mrun = mix->add_subcommand("run", "correlation series CSV");
  mrun->add_option("config", cfg_path)->required();
  mrun->callback([&] {
    pipeline::Context ctx(load_config(cfg_path, g));
    auto s = pipeline::stage_mixing(ctx);
    if (g.out.empty() && g.format == "json") {
      // the series itself is the product of this command
      std::cout << s.tables.front().second;
      return;
    }
    emit(s, "mixing", g);
  });
  auto* mrate = mix->add_subcommand("rate", "fit (log n)^c n^-tau to a mixing CSV");
  std::string csv_path;
  double m_beta = 0.75, m_ell = 1.0;
  std::optional<double> m_q;
  mrate->add_option("csv", csv_path)->required();
  mrate->add_option("--beta", m_beta)->check(CLI::Range(0.001, 1.0));
  mrate->add_option("--ell", m_ell, "constant l of the tail law");
  mrate->add_option("--q", m_q);
  mrate->callback([&] {
    std::ifstream in(csv_path);
    if (!in) throw ConfigError("cannot read '" + csv_path + "'");
    auto s = mixing::CorrelationSeries::read_csv(in);
    regvar::TailLaw law(m_beta, regvar::SlowlyVarying::constant(m_ell), m_q);
    auto r = pipeline::rate_report(s, law);
    if (!g.out.empty())
      pipeline::write_artifacts(g.out, {{"rate.json", r.dump(2) + "\n"}});
    else
      std::cout << r.dump(2) << "\n";
  });

  auto* st = app.add_subcommand("selftest", "module invariants at reduced scale");
  std::string fault_name;
  st->add_option("--inject-fault", fault_name, "deliberate defect: aj (level lift) or an (normalizer)");
  st->callback([&] {
    fault::set(fault::parse(fault_name));
    auto r = selftest::run(g.seed.value_or(1));
    if (g.format == "json" && !g.out.empty())
      pipeline::write_artifacts(g.out, {{"selftest.json", r.to_json().dump(2) + "\n"}});
    for (const auto& c : r.checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
      if (!c.pass) std::cout << "     witness " << c.witness.dump() << "\n";
    }
    std::cout << (r.pass() ? "selftest passed" : "selftest FAILED") << " in " << r.seconds << " s\n";
    if (!r.pass()) code = 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  // --threads is applied before any subcommand callback runs
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--threads") set_thread_count(std::atoi(argv[i + 1]));
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure [" << e.where() << "]: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure [internal]: " << e.what() << "\n";
    return 3;
  }
}
