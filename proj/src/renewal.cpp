#include "infmix/renewal.hpp"

#include <fftw3.h>
#include <gsl/gsl_sf_zeta.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include "infmix/error.hpp"
#include "infmix/fault.hpp"
#include "infmix/stats.hpp"

namespace infmix::renewal {

ReturnDistribution::ReturnDistribution(std::vector<double> p, double deficit, Source src)
    : p_(std::move(p)), source_(src) {
  double total = 0.0;
  for (std::size_t i = 1; i < p_.size(); ++i) {
    if (!(p_[i] >= 0.0) || !std::isfinite(p_[i])) throw DomainError("return probabilities must be nonnegative");
    total += p_[i];
  }
  if (total > 1.0 + 1e-12) throw DomainError("return probabilities sum to more than 1");
  tail_.assign(p_.size(), 0.0);
  double acc = std::max(0.0, deficit);
  tail_.back() = acc;
  for (std::size_t n = p_.size() - 1; n-- > 0;) {
    acc += p_[n + 1];
    tail_[n] = acc;
  }
}

ReturnDistribution ReturnDistribution::from_table(std::vector<double> p) {
  if (p.empty()) throw DomainError("empty return distribution");
  std::vector<double> q(p.size() + 1, 0.0);
  std::copy(p.begin(), p.end(), q.begin() + 1);
  double total = 0.0;
  for (double v : p) total += v;
  return ReturnDistribution(std::move(q), std::max(0.0, 1.0 - total), Source::Table);
}

ReturnDistribution ReturnDistribution::from_tail_law(const regvar::TailLaw& law, std::int64_t N) {
  if (N < 1) throw DomainError("return distribution needs N >= 1");
  std::vector<double> q(static_cast<std::size_t>(N) + 1, 0.0);
  for (std::int64_t n = 1; n <= N; ++n) q[n] = law.tail_prob(n - 1) - law.tail_prob(n);
  return ReturnDistribution(std::move(q), law.tail_prob(N), Source::TailLaw);
}

ReturnDistribution ReturnDistribution::power_law(double beta, std::int64_t N) {
  if (!(beta > 0.0) || N < 1) throw DomainError("power_law needs beta > 0 and N >= 1");
  const double s = 1.0 + beta;
  const double z = gsl_sf_zeta(s);
  std::vector<double> q(static_cast<std::size_t>(N) + 1, 0.0);
  for (std::int64_t n = 1; n <= N; ++n) q[n] = std::pow(static_cast<double>(n), -s) / z;
  double deficit = gsl_sf_hzeta(s, static_cast<double>(N + 1)) / z;
  return ReturnDistribution(std::move(q), deficit, Source::PowerLaw);
}

namespace {
// A law with no missing mass has p_n = 0 past its table, so it can be padded to any N.
bool padded(const ReturnDistribution& dist, std::int64_t N, ReturnDistribution& out) {
  if (N <= dist.size()) return false;
  if (dist.deficit() > 1e-12) throw DomainError("renewal_sequence: N exceeds truncation");
  std::vector<double> p(dist.masses().begin(), dist.masses().end());
  p.resize(static_cast<std::size_t>(N), 0.0);
  out = ReturnDistribution::from_table(std::move(p));
  return true;
}
}  // namespace

std::vector<double> renewal_sequence_direct(const ReturnDistribution& dist, std::int64_t N) {
  if (ReturnDistribution ext = dist; padded(dist, N, ext)) return renewal_sequence_direct(ext, N);
  std::vector<double> u(static_cast<std::size_t>(N) + 1, 0.0);
  u[0] = 1.0;
  for (std::int64_t n = 1; n <= N; ++n) {
    double s = 0.0;
    for (std::int64_t j = 1; j <= n; ++j) s += dist.p(j) * u[n - j];
    u[n] = s;
  }
  return u;
}

namespace {

std::mutex fftw_plan_mutex;

// out[i] = sum_j a[j] b[i-j] for i < out.size()
void fft_convolve(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out) {
  std::size_t need = a.size() + b.size() - 1;
  std::size_t m = 1;
  while (m < need) m <<= 1;
  std::vector<double> x(m, 0.0), y(m, 0.0), r(m, 0.0);
  std::copy(a.begin(), a.end(), x.begin());
  std::copy(b.begin(), b.end(), y.begin());
  const std::size_t h = m / 2 + 1;
  std::vector<std::complex<double>> X(h), Y(h);
  fftw_plan px, py, pr;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    px = fftw_plan_dft_r2c_1d(static_cast<int>(m), x.data(), reinterpret_cast<fftw_complex*>(X.data()), FFTW_ESTIMATE);
    py = fftw_plan_dft_r2c_1d(static_cast<int>(m), y.data(), reinterpret_cast<fftw_complex*>(Y.data()), FFTW_ESTIMATE);
    pr = fftw_plan_dft_c2r_1d(static_cast<int>(m), reinterpret_cast<fftw_complex*>(X.data()), r.data(), FFTW_ESTIMATE);
  }
  fftw_execute(px);
  fftw_execute(py);
  for (std::size_t i = 0; i < h; ++i) X[i] *= Y[i];
  fftw_execute(pr);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(px);
    fftw_destroy_plan(py);
    fftw_destroy_plan(pr);
  }
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < out.size() && i < m; ++i) out[i] = r[i] * scale;
}

constexpr std::int64_t kLeaf = 256;

// Relaxed (online) convolution: finalize u on [lo, hi) given all contributions from indices < lo.
void solve(const ReturnDistribution& dist, std::vector<double>& u, std::int64_t lo, std::int64_t hi) {
  if (hi - lo <= kLeaf) {
    for (std::int64_t n = lo; n < hi; ++n) {
      if (n == 0) {
        u[0] = 1.0;
        continue;
      }
      double s = u[n];
      for (std::int64_t m = lo; m < n; ++m) s += dist.p(n - m) * u[m];
      u[n] = s;
    }
    return;
  }
  std::int64_t mid = lo + (hi - lo) / 2;
  solve(dist, u, lo, mid);
  // contributions of u[lo, mid) to u[mid, hi)
  std::vector<double> a(u.begin() + lo, u.begin() + mid);
  std::vector<double> b(static_cast<std::size_t>(hi - lo), 0.0);
  for (std::int64_t j = 1; j < hi - lo; ++j) b[j] = dist.p(j);
  std::vector<double> c(static_cast<std::size_t>(hi - lo), 0.0);
  fft_convolve(a, b, c);
  for (std::int64_t n = mid; n < hi; ++n) u[n] += c[n - lo];
  solve(dist, u, mid, hi);
}

}  // namespace

std::vector<double> renewal_sequence_fft(const ReturnDistribution& dist, std::int64_t N) {
  if (ReturnDistribution ext = dist; padded(dist, N, ext)) return renewal_sequence_fft(ext, N);
  std::vector<double> u(static_cast<std::size_t>(N) + 1, 0.0);
  solve(dist, u, 0, N + 1);
  return u;
}

std::vector<double> renewal_sequence(const ReturnDistribution& dist, std::int64_t N) {
  if (N < (1 << 10)) return renewal_sequence_direct(dist, N);
  return renewal_sequence_fft(dist, N);
}

double max_renewal_residual(const ReturnDistribution& dist, std::span<const double> u) {
  double worst = std::abs(u[0] - 1.0);
  for (std::size_t n = 1; n < u.size(); ++n) {
    double s = 0.0;
    for (std::size_t j = 1; j <= n; ++j) s += dist.p(static_cast<std::int64_t>(j)) * u[n - j];
    worst = std::max(worst, std::abs(u[n] - s));
  }
  return worst;
}

NormalizedRenewal normalized_renewal(const ReturnDistribution& dist, const regvar::TailLaw& law,
                                     std::int64_t N) {
  NormalizedRenewal r;
  r.u = renewal_sequence(dist, N);
  auto a = regvar::a_seq(law, N);
  r.a = a.values;
  fault::perturb_normalizer(r.a);
  r.normalized.resize(r.u.size());
  for (std::size_t n = 0; n < r.u.size(); ++n) r.normalized[n] = r.a[n] * r.u[n];
  r.value_at_N = r.normalized.back();

  std::vector<double> lx, ly;
  for (std::int64_t n = std::max<std::int64_t>(1, N / 10); n <= N; n = std::max(n + 1, n * 21 / 20)) {
    double d = std::abs(r.normalized[n] - 1.0);
    if (d > 0) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(d));
    }
  }
  if (lx.size() >= 2) r.log_slope = stats::fit_line(lx, ly).slope;

  lx.clear();
  ly.clear();
  std::int64_t lo = std::max<std::int64_t>(10, N / 1000), hi = std::max<std::int64_t>(lo + 1, N / 2);
  for (std::int64_t n = lo; n <= hi; n = std::max(n + 1, n * 11 / 10)) {
    double t = n <= dist.size() ? dist.tail(n) : 0.0;  // padded full-mass tables have no tail
    if (t > 0) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(t));
    }
  }
  if (lx.size() < 2) {
    r.beta_hat = std::nan("");
    r.accepted = false;
    r.warnings.push_back("tail of the distribution vanishes: finite return time, no regularly varying tail");
  } else {
    r.beta_hat = -stats::fit_line(lx, ly).slope;
    if (std::abs(r.beta_hat - law.beta()) > 0.1) {
      r.accepted = false;
      r.warnings.push_back("tail exponent of distribution (" + std::to_string(r.beta_hat) +
                           ") differs from law beta (" + std::to_string(law.beta()) + ") by more than 0.1");
    }
  }
  return r;
}

SingularExpansion singular_expansion(const ReturnDistribution& dist, double beta, double c) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("singular_expansion needs 0 < beta < 1");
  SingularExpansion e;
  e.A = c * std::tgamma(1.0 - beta);
  double rsum = 0.0;
  for (std::int64_t n = 1; n <= dist.size(); ++n) rsum += dist.tail(n) - c * std::pow(static_cast<double>(n), -beta);
  e.B = 1.0 + c * gsl_sf_zeta(beta) + rsum;
  bool first_order_vanishes = std::abs(e.B) < 1e-3 * e.A || std::abs(2 * beta - 1.0) < 1e-12;
  e.dominant_exponent = first_order_vanishes ? std::min(2.0 * (1.0 - beta), 1.0) : 1.0 - beta;
  return e;
}

}  // namespace infmix::renewal
