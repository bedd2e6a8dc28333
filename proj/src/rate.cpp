#include <algorithm>
#include <cmath>

#include "infmix/error.hpp"
#include "infmix/mixing.hpp"
#include "infmix/stats.hpp"

namespace infmix::mixing {

nlohmann::json RateModel::to_json() const {
  return {{"tau", tau},
          {"tau_se", tau_se},
          {"c", c},
          {"intercept", intercept},
          {"r2", r2},
          {"points", points},
          {"no_rate", no_rate},
          {"reason", reason},
          {"C", C},
          {"C_first_decade", C_first_decade},
          {"envelope_ok", envelope_ok},
          {"d", d}};
}

RateModel fit_rate(const CorrelationSeries& s, const regvar::TailLaw& law, RateFitOptions opts) {
  std::vector<double> ln, lln, ly, absr;
  std::vector<std::int64_t> ns;
  std::size_t inside_noise = 0, reliable = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.reliable[i] || s.n[i] < 3) continue;
    ++reliable;
    double r = std::abs(s.residual(i));
    double half = 0.5 * (s.hi95[i] - s.lo95[i]);
    if (r <= half) ++inside_noise;
    if (!(r > 0.0)) continue;
    ns.push_back(s.n[i]);
    ln.push_back(std::log(static_cast<double>(s.n[i])));
    lln.push_back(std::log(std::log(static_cast<double>(s.n[i]))));
    ly.push_back(std::log(r));
    absr.push_back(r);
  }
  RateModel m;
  m.points = ln.size();
  if (reliable < opts.min_points || ln.size() < opts.min_points)
    throw DomainError("fit_rate: need at least " + std::to_string(opts.min_points) + " reliable points");
  if (ln.back() - ln.front() < opts.min_decades * std::log(10.0) * (1 - 1e-3))
    throw DomainError("fit_rate: reliable points must span at least two decades");
  if (inside_noise == reliable) {
    m.no_rate = true;
    m.reason = "residuals within the confidence band at every reliable n";
    return m;
  }

  // log|r| = A + c loglog n - tau log n, with c >= 0
  std::vector<double> ones(ln.size(), 1.0), negln(ln.size());
  for (std::size_t i = 0; i < ln.size(); ++i) negln[i] = -ln[i];
  auto coef = stats::least_squares({ones, lln, negln}, ly);
  if (coef[1] < 0.0) coef = {0.0, 0.0, 0.0};
  if (coef[1] == 0.0) {
    auto lf = stats::fit_line(ln, ly);
    coef = {lf.intercept, 0.0, -lf.slope};
  }
  m.intercept = coef[0];
  m.c = coef[1];
  m.tau = coef[2];
  {
    double mean = 0.0;
    for (double y : ly) mean += y;
    mean /= static_cast<double>(ly.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < ly.size(); ++i) {
      double pred = m.intercept + m.c * lln[i] - m.tau * ln[i];
      ss_res += (ly[i] - pred) * (ly[i] - pred);
      ss_tot += (ly[i] - mean) * (ly[i] - mean);
    }
    m.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
    // slope standard error from the c = 0 line (conservative when c was fitted)
    m.tau_se = stats::fit_line(ln, ly).slope_se;
  }
  if (m.tau <= 0.0) {
    m.no_rate = true;
    m.reason = "fitted exponent is not positive";
  } else if (m.r2 < 0.5) {
    m.no_rate = true;
    m.reason = "poor fit (R^2 < 0.5)";
  }

  const double beta = law.beta();
  const double first_hi = static_cast<double>(ns.front()) * 10.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    double n = static_cast<double>(ns[i]), L = std::log(n);
    double env = std::pow(L, m.c + 1) * std::pow(n, -m.tau) + law.ell()(n) * std::pow(n, -beta) * L * L;
    double ratio = absr[i] / env;
    m.C = std::max(m.C, ratio);
    if (n <= first_hi) m.C_first_decade = std::max(m.C_first_decade, ratio);
  }
  m.envelope_ok = !m.no_rate && m.C <= opts.stability * m.C_first_decade;
  return m;
}

double c_prime(Regime r, double n, double beta) {
  switch (r) {
    case Regime::HalfLog: return std::log(n) / std::sqrt(n);
    case Regime::BetaLog: return std::log(n) * std::pow(n, -beta);
    case Regime::LogSquaredOverN: return std::log(n) * std::log(n) / n;
  }
  return 0.0;
}

HigherOrderReport higher_order_check(const CorrelationSeries& s, const regvar::TailLaw& law, std::span<const double> d,
                                     Regime regime) {
  if (d.empty() || d[0] != 1.0) throw DomainError("higher_order_check: d_1 must equal 1");
  HigherOrderReport r;
  if (s.size() == 0) return r;
  const std::int64_t N = *std::max_element(s.n.begin(), s.n.end()) + 1;
  auto a = regvar::a_seq(law, N);
  auto b_at = [&](std::int64_t n) {
    double b = 0.0, p = 1.0;
    for (double dj : d) {
      b += dj * p;
      p /= a[n];
    }
    return b;
  };
  const std::int64_t lo = std::max<std::int64_t>(1, *std::min_element(s.n.begin(), s.n.end()));
  for (std::int64_t n = lo; n < N; ++n) {
    r.b_sup = std::max(r.b_sup, std::abs(b_at(n)));
    r.b_increment_constant = std::max(r.b_increment_constant, static_cast<double>(n) * std::abs(b_at(n + 1) - b_at(n)));
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.reliable[i] || s.n[i] < 2) continue;
    HigherOrderPoint p;
    p.n = s.n[i];
    double an = a[p.n];
    p.first_order = std::abs(s.rho[i] - s.target / an);
    double sum = 0.0, pw = 1.0 / an;
    for (double dj : d) {
      sum += dj * pw;
      pw /= an;
    }
    p.residual = std::abs(s.rho[i] - sum * s.target);
    p.envelope = c_prime(regime, static_cast<double>(p.n), law.beta());
    r.envelope_constant = std::max(r.envelope_constant, p.residual / p.envelope);
    r.points.push_back(p);
  }
  return r;
}

double fit_d2(const CorrelationSeries& s) {
  // rho - T/a = d2 T/a^2  ->  least squares in d2
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.reliable[i] || s.a[i] <= 0) continue;
    double x = s.target / (s.a[i] * s.a[i]);
    double y = s.rho[i] - s.target / s.a[i];
    num += x * y;
    den += x * x;
  }
  if (!(den > 0)) throw DomainError("fit_d2: no usable points");
  return num / den;
}

}  // namespace infmix::mixing
