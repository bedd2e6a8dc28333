#include "infmix/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "infmix/error.hpp"
#include "infmix/parallel.hpp"
#include "infmix/stats.hpp"

namespace infmix::mixing {

void CorrelationSeries::write_csv(std::ostream& os) const {
  os << "n,rho,a_n,normalized,target,lo95,hi95,method\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < n.size(); ++i)
    os << n[i] << ',' << rho[i] << ',' << a[i] << ',' << normalized[i] << ',' << target << ',' << lo95[i] << ','
       << hi95[i] << ',' << method << '\n';
}

CorrelationSeries CorrelationSeries::read_csv(std::istream& is) {
  CorrelationSeries s;
  std::string line;
  if (!std::getline(is, line) || line.rfind("n,rho,a_n,normalized,target", 0) != 0)
    throw ConfigError("correlation CSV: missing or unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> f;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw ConfigError("correlation CSV: expected 8 columns in '" + line + "'");
    try {
      s.n.push_back(std::stoll(f[0]));
      s.rho.push_back(std::stod(f[1]));
      s.a.push_back(std::stod(f[2]));
      s.normalized.push_back(std::stod(f[3]));
      s.target = std::stod(f[4]);
      s.lo95.push_back(std::stod(f[5]));
      s.hi95.push_back(std::stod(f[6]));
    } catch (const std::exception&) {
      throw ConfigError("correlation CSV: bad number in '" + line + "'");
    }
    s.method = f[7];
    s.reliable.push_back(true);
    s.bias.push_back(0.0);
    s.ess.push_back(0);
  }
  return s;
}

CorrelationSeries correlation_operator(const operators::OperatorBundle& b, const regvar::TailLaw& law,
                                       std::span<const double> v, std::span<const double> w,
                                       std::span<const std::int64_t> n_grid) {
  if (n_grid.empty()) throw DomainError("correlation_operator: empty n grid");
  if (v.size() != b.piece_count() || w.size() != b.piece_count())
    throw DomainError("correlation_operator: observable size does not match the bundle");
  const std::int64_t N = *std::max_element(n_grid.begin(), n_grid.end());
  if (*std::min_element(n_grid.begin(), n_grid.end()) < 0) throw DomainError("correlation_operator: negative n");
  CorrelationSeries s;
  s.method = "operator";
  s.int_v = b.integrate(v);
  s.int_w = b.integrate(w);
  s.target = s.int_v * s.int_w;
  auto a = regvar::a_seq(law, N);
  auto T = b.T_sequence(v, N);
  const auto& P = b.pieces();
  for (auto n : n_grid) {
    double rho = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) rho += P[i].pi * w[i] * T.at(n, P[i], i);
    s.n.push_back(n);
    s.rho.push_back(rho);
    s.a.push_back(a[n]);
    s.normalized.push_back(a[n] * rho);
    s.lo95.push_back(a[n] * rho);
    s.hi95.push_back(a[n] * rho);
    s.bias.push_back(0.0);
    s.ess.push_back(0);
    s.reliable.push_back(n <= b.h_max());
  }
  return s;
}

void attach_bias(CorrelationSeries& fine, const CorrelationSeries& coarse) {
  for (std::size_t i = 0; i < fine.size(); ++i) {
    auto it = std::find(coarse.n.begin(), coarse.n.end(), fine.n[i]);
    if (it == coarse.n.end()) continue;
    std::size_t j = static_cast<std::size_t>(it - coarse.n.begin());
    // compare deviations from each bundle's own target
    fine.bias[i] = std::abs(fine.residual(i) - coarse.residual(j));
    fine.lo95[i] = fine.normalized[i] - fine.bias[i];
    fine.hi95[i] = fine.normalized[i] + fine.bias[i];
  }
}

std::vector<double> sample_on_pieces(const operators::OperatorBundle& b, const tower::BaseObservable& v, double x2) {
  std::vector<double> out(b.piece_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& p = b.pieces()[i];
    out[i] = v(0.5 * (p.lo + p.hi), x2);
  }
  return out;
}

namespace {

struct StreamResult {
  std::vector<double> sums;
  std::vector<std::int64_t> pairs;
  double sum_v = 0.0, sum_w = 0.0;
  std::int64_t samples = 0;
};

StreamResult run_stream(sampling::Dynamics dyn, const tower::BaseObservable& v, const tower::BaseObservable& w,
                        std::span<const std::int64_t> grid, std::int64_t samples, std::uint64_t seed, int stream,
                        const MonteCarloOptions& opts) {
  const std::int64_t n_max = *std::max_element(grid.begin(), grid.end());
  const std::size_t R = static_cast<std::size_t>(n_max) + 1;
  std::vector<double> vval(R, 0.0);
  std::vector<std::int64_t> stamp(R, -1);
  StreamResult r;
  r.sums.assign(grid.size(), 0.0);
  r.pairs.assign(grid.size(), 0);
  sampling::OrbitStream orbit(dyn, seed, static_cast<std::uint64_t>(stream), opts.burn_in, opts.cap);
  std::int64_t T = 0, last_sample = -1;
  for (;;) {
    auto vis = orbit.next();
    const bool sampling = r.samples < samples;
    if (!sampling && T > last_sample + n_max) break;
    const double wv = w(vis.t, vis.x2);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const std::int64_t tp = T - grid[g];
      if (tp < 0) continue;
      const std::size_t slot = static_cast<std::size_t>(tp) % R;
      if (stamp[slot] == tp) {
        r.sums[g] += vval[slot] * wv;
        ++r.pairs[g];
      }
    }
    if (sampling) {
      const double vv = v(vis.t, vis.x2);
      const std::size_t slot = static_cast<std::size_t>(T) % R;
      stamp[slot] = T;
      vval[slot] = vv;
      r.sum_v += vv;
      r.sum_w += wv;
      ++r.samples;
      last_sample = T;
    }
    // a censored excursion ends the orbit segment; the gap keeps pairs from spanning the restart
    T += vis.censored ? opts.cap + n_max + 1 : vis.phi;
  }
  return r;
}

}  // namespace

CorrelationSeries correlation_montecarlo(sampling::Dynamics dyn, const tower::BaseObservable& v,
                                         const tower::BaseObservable& w, std::span<const std::int64_t> n_grid,
                                         const regvar::NormalizingSequence& a, MonteCarloOptions opts) {
  if (n_grid.empty()) throw DomainError("correlation_montecarlo: empty n grid");
  if (opts.streams < 2) throw DomainError("correlation_montecarlo: need at least two streams");
  if (opts.samples < opts.streams) throw DomainError("correlation_montecarlo: fewer samples than streams");
  for (auto n : n_grid) {
    if (n < 0) throw DomainError("correlation_montecarlo: negative n");
    if (static_cast<std::size_t>(n) >= a.size()) throw DomainError("correlation_montecarlo: a_n not available for n");
  }
  const int S = opts.streams;
  std::vector<StreamResult> res(static_cast<std::size_t>(S));
  parallel_for(S, [&](int s) {
    std::int64_t per = opts.samples / S + (s < opts.samples % S ? 1 : 0);
    res[s] = run_stream(dyn, v, w, n_grid, per, opts.seed, s, opts);
  });

  CorrelationSeries out;
  out.method = "montecarlo";
  std::int64_t total = 0;
  double sv = 0.0, sw = 0.0;
  for (const auto& r : res) {
    total += r.samples;
    sv += r.sum_v;
    sw += r.sum_w;
  }
  out.int_v = sv / static_cast<double>(total);
  out.int_w = sw / static_cast<double>(total);
  out.target = out.int_v * out.int_w;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    const std::int64_t n = n_grid[g];
    std::vector<double> batch(static_cast<std::size_t>(S));
    std::int64_t pairs = 0;
    double sum = 0.0;
    for (int s = 0; s < S; ++s) {
      batch[s] = a[n] * res[s].sums[g] / static_cast<double>(res[s].samples);
      pairs += res[s].pairs[g];
      sum += res[s].sums[g];
    }
    auto bm = stats::batch_mean(batch);
    out.n.push_back(n);
    out.rho.push_back(sum / static_cast<double>(total));
    out.a.push_back(a[n]);
    out.normalized.push_back(a[n] * sum / static_cast<double>(total));
    out.lo95.push_back(out.normalized.back() - bm.half95);
    out.hi95.push_back(out.normalized.back() + bm.half95);
    out.bias.push_back(0.0);
    out.ess.push_back(pairs);
    out.reliable.push_back(pairs >= opts.min_ess);
    if (pairs < opts.min_ess) out.insufficient = true;
  }
  return out;
}

regvar::TailLaw lsv_tail_law(const operators::OperatorBundle& b, const systems::LsvMap& map, std::int64_t n_max) {
  if (n_max < 2) throw DomainError("lsv_tail_law needs n_max >= 2");
  const int M = b.bins();
  const double beta = 1.0 / map.gamma();
  // density of mu on the chart: piecewise constant, with bin 0 replaced by its linear extrapolation
  const double r0 = b.density(0);
  const double r1 = M > 1 ? b.density(1) : r0;
  const double slope = (r1 - r0) * M;  // per unit chart length
  auto mass_below = [&](double x) {
    if (x <= 1.0 / M) {
      // integral of r0 + slope (t - 1/(2M)) over [0, x]
      return r0 * x + slope * (0.5 * x * x - x / (2.0 * M));
    }
    double m = r0 / M;  // exact bin-0 mass (linear profile integrates to the bin average)
    int k = std::min(M - 1, static_cast<int>(std::floor(x * M)));
    for (int j = 1; j < k; ++j) m += b.density(j) / M;
    if (k >= 1) m += b.density(k) * (x - static_cast<double>(k) / M);
    return m;
  };
  auto xs = map.preimage_sequence(static_cast<int>(n_max));
  std::vector<double> ell;
  ell.reserve(static_cast<std::size_t>(n_max));
  for (std::int64_t n = 1; n <= n_max; ++n) {
    // {phi > n} = [0, x_{n-1}) in the chart
    double tail = mass_below(xs[n - 1]);
    ell.push_back(tail * std::pow(static_cast<double>(n), beta));
  }
  regvar::TailLawOptions o;
  o.check_limit = n_max;
  o.cache_size = n_max + 1;
  return regvar::TailLaw(beta, regvar::SlowlyVarying::table(std::move(ell)), std::nullopt, o);
}

}  // namespace infmix::mixing
