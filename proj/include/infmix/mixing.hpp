#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "infmix/operators.hpp"
#include "infmix/regvar.hpp"
#include "infmix/sampling.hpp"
#include "infmix/tower.hpp"

namespace infmix::mixing {

struct CorrelationSeries {
  std::string method;  // "operator" or "montecarlo"
  std::vector<std::int64_t> n;
  std::vector<double> rho;
  std::vector<double> a;
  std::vector<double> normalized;  // a_n rho_n
  std::vector<double> lo95, hi95;  // band for a_n rho_n
  std::vector<double> bias;        // operator: truncation/discretisation bias estimate of a_n rho_n
  std::vector<std::int64_t> ess;   // montecarlo: number of sample pairs at lag n
  std::vector<bool> reliable;
  double int_v = 0.0, int_w = 0.0;
  double target = 0.0;  // int v * int w
  bool insufficient = false;

  std::size_t size() const { return n.size(); }
  double residual(std::size_t i) const { return normalized[i] - target; }
  void write_csv(std::ostream& os) const;
  static CorrelationSeries read_csv(std::istream& is);
};

// rho_n = int_Y w T_n v on the discretised quotient tower; points with n > h_max are unreliable.
CorrelationSeries correlation_operator(const operators::OperatorBundle& b, const regvar::TailLaw& law,
                                       std::span<const double> v, std::span<const double> w,
                                       std::span<const std::int64_t> n_grid);
// Fills bias with |a_n rho_n - a_n rho_n(coarse)| point by point.
void attach_bias(CorrelationSeries& fine, const CorrelationSeries& coarse);

// Piece values of a base observable at the piece midpoints (fiber coordinate fixed).
std::vector<double> sample_on_pieces(const operators::OperatorBundle& b, const tower::BaseObservable& v,
                                     double x2 = 0.5);

struct MonteCarloOptions {
  std::int64_t samples = 1000000;
  std::uint64_t seed = 1;
  int streams = 32;
  std::int64_t burn_in = 10000;
  std::int64_t cap = systems::LsvMap::kDefaultCap;
  std::int64_t min_ess = 100;
};

// Base visits of a burned-in induced orbit sample mu|_Y; rho_n averages v(y) w(f^n y), which is
// nonzero only when the orbit of y sits in Y at time n. The 32 streams are the batches.
CorrelationSeries correlation_montecarlo(sampling::Dynamics dyn, const tower::BaseObservable& v,
                                         const tower::BaseObservable& w, std::span<const std::int64_t> n_grid,
                                         const regvar::NormalizingSequence& a, MonteCarloOptions opts = {});

// mu(phi > n) for the LSV map: extrapolated base density at the neutral end times the exact
// Lebesgue measure of {phi > n}; returned as a tabulated tail law for n <= n_max.
regvar::TailLaw lsv_tail_law(const operators::OperatorBundle& b, const systems::LsvMap& map, std::int64_t n_max);

// ---- rates ----

struct RateFitOptions {
  std::size_t min_points = 10;
  double min_decades = 2.0;
  double stability = 1.5;  // allowed growth of the envelope constant over the full range
};

struct RateModel {
  double tau = 0.0, tau_se = 0.0;
  double c = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
  bool no_rate = false;
  std::string reason;
  // envelope C{(log n)^{c+1} n^{-tau} + l(n) n^{-beta} (log n)^2}
  double C = 0.0;
  double C_first_decade = 0.0;
  bool envelope_ok = false;
  std::vector<double> d{1.0};
  nlohmann::json to_json() const;
};

RateModel fit_rate(const CorrelationSeries& s, const regvar::TailLaw& law, RateFitOptions opts = {});

enum class Regime { HalfLog, BetaLog, LogSquaredOverN };
double c_prime(Regime r, double n, double beta);

struct HigherOrderPoint {
  std::int64_t n = 0;
  double first_order = 0.0;  // |rho_n - a_n^{-1} T|
  double residual = 0.0;     // |rho_n - sum_j d_j a_n^{-j} T|
  double envelope = 0.0;     // c_n'
};
struct HigherOrderReport {
  std::vector<HigherOrderPoint> points;
  double envelope_constant = 0.0;  // max residual / c_n'
  double b_increment_constant = 0.0;  // max n |b_{n+1} - b_n|
  double b_sup = 0.0;
};
HigherOrderReport higher_order_check(const CorrelationSeries& s, const regvar::TailLaw& law, std::span<const double> d,
                                     Regime regime);
// least-squares d_2 in rho_n ~ (a_n^{-1} + d_2 a_n^{-2}) T over the reliable points
double fit_d2(const CorrelationSeries& s);

}  // namespace infmix::mixing
