#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "infmix/config.hpp"
#include "infmix/error.hpp"
#include "infmix/mixing.hpp"
#include "infmix/operators.hpp"
#include "infmix/pipeline.hpp"
#include "infmix/regvar.hpp"
#include "infmix/renewal.hpp"
#include "infmix/selftest.hpp"
#include "infmix/systems.hpp"

namespace py = pybind11;
using namespace infmix;

namespace {

// nlohmann::json -> Python objects through the json module keeps the binding small
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

regvar::TailLaw make_law(double beta, double ell, std::optional<double> q) {
  return regvar::TailLaw(beta, regvar::SlowlyVarying::constant(ell), q);
}

}  // namespace

PYBIND11_MODULE(_infmix, m) {
  m.attr("__version__") = INFMIX_VERSION;
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

  m.def(
      "renewal_sequence",
      [](std::vector<double> p, std::int64_t N) {
        return renewal::renewal_sequence(renewal::ReturnDistribution::from_table(std::move(p)), N);
      },
      py::arg("p"), py::arg("N"), "u_0..u_N for return probabilities p_1, p_2, ...");

  m.def(
      "a_seq", [](double beta, double ell, std::int64_t N) { return regvar::a_seq(make_law(beta, ell, {}), N).values; },
      py::arg("beta"), py::arg("ell"), py::arg("N"), "normalizing sequence a_0..a_N for P(phi > n) = ell n^-beta");

  m.def(
      "lsv_return_time", [](double gamma, double y) { return systems::return_time(systems::LsvMap(gamma), y); },
      py::arg("gamma"), py::arg("y"));

  m.def(
      "synthetic_T_mean",
      [](std::vector<double> p, int bins, std::int64_t N) {
        systems::SyntheticInduced sys(p);
        auto b = operators::OperatorBundle::build(sys, bins, static_cast<int>(std::max<std::size_t>(p.size(), 2)));
        std::vector<double> one(b.piece_count(), 1.0);
        auto T = b.T_sequence(one, N);
        std::vector<double> out(static_cast<std::size_t>(N) + 1, 1.0);
        for (std::int64_t n = 1; n <= N; ++n) {
          double s = 0.0;
          for (std::size_t i = 0; i < b.piece_count(); ++i) s += b.pieces()[i].pi * T.at(n, b.pieces()[i], i);
          out[n] = s;
        }
        return out;
      },
      py::arg("p"), py::arg("bins"), py::arg("N"), "integral of T_n 1 over the base for n = 0..N");

  m.def(
      "correlation_operator",
      [](double gamma, int bins, int h_max, std::vector<std::int64_t> ns) {
        systems::LsvMap map(gamma);
        systems::LsvInduced ind(map);
        auto b = operators::OperatorBundle::build(ind, bins, h_max);
        auto law = mixing::lsv_tail_law(b, map, std::max<std::int64_t>(2, *std::max_element(ns.begin(), ns.end())));
        std::vector<double> one(b.piece_count(), 1.0);
        auto s = mixing::correlation_operator(b, law, one, one, ns);
        return py::dict(py::arg("n") = s.n, py::arg("rho") = s.rho, py::arg("normalized") = s.normalized,
                        py::arg("target") = s.target);
      },
      py::arg("gamma"), py::arg("bins"), py::arg("h_max"), py::arg("ns"),
      "a_n rho_n for v = w = 1 on the LSV quotient tower");

  m.def(
      "fit_rate",
      [](std::vector<std::int64_t> n, std::vector<double> normalized, double target, double beta, double ell) {
        mixing::CorrelationSeries s;
        s.method = "operator";
        s.n = n;
        s.normalized = normalized;
        s.lo95 = s.hi95 = normalized;
        s.target = target;
        s.rho.assign(n.size(), 0.0);
        s.a.assign(n.size(), 0.0);
        s.bias.assign(n.size(), 0.0);
        s.ess.assign(n.size(), 0);
        s.reliable.assign(n.size(), true);
        return to_py(mixing::fit_rate(s, make_law(beta, ell, {})).to_json());
      },
      py::arg("n"), py::arg("normalized"), py::arg("target"), py::arg("beta"), py::arg("ell") = 1.0);

  m.def(
      "parse_toml", [](const std::string& text) { return to_py(config::parse_toml(text)); }, py::arg("text"));

  m.def(
      "run",
      [](const std::string& config_path, const std::string& out) {
        auto r = pipeline::run(config::load(config_path), out);
        return to_py(r.manifest);
      },
      py::arg("config"), py::arg("out"), "full pipeline; returns the manifest");

  m.def(
      "verify", [](const std::string& dir) { return pipeline::verify(dir).problems; }, py::arg("dir"));

  m.def(
      "selftest", [](std::uint64_t seed) { return to_py(selftest::run(seed).to_json()); }, py::arg("seed") = 1);
}
