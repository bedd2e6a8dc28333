#include "infmix/regvar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "infmix/error.hpp"

namespace infmix::regvar {

SlowlyVarying SlowlyVarying::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("constant slowly varying factor must be positive");
  SlowlyVarying s;
  s.kind_ = EllKind::Constant;
  s.c_ = c;
  return s;
}

SlowlyVarying SlowlyVarying::log_power(double c, double a) {
  if (!(c > 0.0) || !std::isfinite(c) || !std::isfinite(a))
    throw DomainError("log-power slowly varying factor needs c > 0 and finite a");
  SlowlyVarying s;
  s.kind_ = EllKind::LogPower;
  s.c_ = c;
  s.a_ = a;
  return s;
}

SlowlyVarying SlowlyVarying::table(std::vector<double> values) {
  if (values.empty()) throw DomainError("empty slowly varying table");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("slowly varying table entries must be positive");
  SlowlyVarying s;
  s.kind_ = EllKind::Table;
  s.table_ = std::move(values);
  return s;
}

double SlowlyVarying::operator()(double n) const {
  switch (kind_) {
    case EllKind::Constant:
      return c_;
    case EllKind::LogPower:
      return c_ * std::pow(std::log(n + 1.0), a_);
    case EllKind::Table: {
      auto i = static_cast<std::size_t>(std::max(1.0, std::floor(n)));
      return i <= table_.size() ? table_[i - 1] : table_.back();
    }
  }
  return 0.0;
}

std::string SlowlyVarying::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case EllKind::Constant: os << "constant(" << c_ << ")"; break;
    case EllKind::LogPower: os << "log_power(" << c_ << "," << a_ << ")"; break;
    case EllKind::Table: os << "table[" << table_.size() << "]"; break;
  }
  return os.str();
}

namespace {

// l evaluated at n = exp(L); needed for condensation tests far beyond double range of n
double ell_at_log(const SlowlyVarying& ell, double L) {
  switch (ell.kind()) {
    case EllKind::Constant: return ell.c();
    case EllKind::LogPower: {
      double lg = L > 40.0 ? L : std::log1p(std::exp(L));
      return ell.c() * std::pow(lg, ell.a());
    }
    case EllKind::Table: return L > 40.0 ? ell.values().back() : ell(std::exp(L));
  }
  return 0.0;
}

std::vector<std::int64_t> log_points(std::int64_t lo, std::int64_t hi, int per_decade) {
  std::vector<std::int64_t> pts;
  double step = std::pow(10.0, 1.0 / per_decade);
  for (double x = static_cast<double>(lo); x <= static_cast<double>(hi) * (1 + 1e-12); x *= step) {
    auto n = static_cast<std::int64_t>(std::llround(x));
    if (pts.empty() || n > pts.back()) pts.push_back(n);
  }
  if (pts.back() != hi) pts.push_back(hi);
  return pts;
}

}  // namespace

TailLaw::TailLaw(double beta, SlowlyVarying ell, std::optional<double> q, TailLawOptions opts)
    : beta_(beta), ell_(std::move(ell)), q_(q), opts_(opts) {
  if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("tail exponent beta must lie in (0,1]");
  if (q && !(*q > 0.0 && *q <= 1.0)) throw DomainError("smoothness index q must lie in (0,1]");

  switch (ell_.kind()) {
    case EllKind::Constant: n0_ = 1; break;
    case EllKind::LogPower:
      n0_ = ell_.a() > 0 ? std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::exp(ell_.a() / beta)))) : 1;
      break;
    case EllKind::Table: {
      const auto& t = ell_.values();
      n0_ = 1;
      for (std::size_t i = 1; i < t.size(); ++i) {
        double prev = t[i - 1] * std::pow(static_cast<double>(i), -beta);
        double cur = t[i] * std::pow(static_cast<double>(i + 1), -beta);
        if (cur > prev * (1 + 1e-12)) n0_ = static_cast<std::int64_t>(i + 2);
      }
      break;
    }
  }
  if (n0_ < opts_.check_limit) {
    auto pts = log_points(n0_, opts_.check_limit, 20);
    double prev = tail_prob(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i) {
      double cur = ell_(static_cast<double>(pts[i])) * std::pow(static_cast<double>(pts[i]), -beta_);
      if (cur > prev * (1 + 1e-12))
        throw DomainError("tail probability increases at n=" + std::to_string(pts[i]));
      prev = cur;
    }
  }

  for (double n : {1e2, 1e4, 1e6}) sv_ratios_.push_back(std::abs(ell_(2 * n) / ell_(n) - 1.0));
  double last = sv_ratios_.back();
  bool ok = true;
  if (ell_.kind() == EllKind::LogPower) {
    ok = last <= 1.1 * std::abs(ell_.a()) * std::log(2.0) / std::log(1e6) + 1e-15 &&
         sv_ratios_[1] <= sv_ratios_[0] && sv_ratios_[2] <= sv_ratios_[1];
  } else {
    ok = last <= 0.01;
  }
  if (!ok) throw DomainError("slowly varying check failed: l(2n)/l(n) does not approach 1");

  if (beta == 1.0 && ell_.kind() == EllKind::LogPower && ell_.a() < -1.0)
    throw DomainError("beta = 1 requires sum l(n)/n = infinity; log-power exponent a < -1 makes phi integrable");

  std::int64_t m = std::max<std::int64_t>(0, opts_.cache_size);
  cache_.resize(static_cast<std::size_t>(m) + 1);
  cache_[0] = 1.0;
  for (std::int64_t n = 1; n <= m; ++n)
    cache_[n] = ell_(static_cast<double>(n)) * std::pow(static_cast<double>(n), -beta_);
}

double TailLaw::tail_prob(std::int64_t n) const {
  if (n < 0) throw DomainError("tail_prob needs n >= 0");
  if (static_cast<std::size_t>(n) < cache_.size()) return cache_[n];
  if (n == 0) return 1.0;
  return ell_(static_cast<double>(n)) * std::pow(static_cast<double>(n), -beta_);
}

double d_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("d_beta needs 0 < beta < 1");
  return std::sin(beta * std::numbers::pi) / std::numbers::pi;
}

TildeEll tilde_ell(const TailLaw& law, std::int64_t n, std::int64_t j_max) {
  if (n < 1) throw DomainError("tilde_ell needs n >= 1");
  const auto& ell = law.ell();
  TildeEll r;
  r.j_max = j_max;
  for (std::int64_t j = 1; j <= n; ++j) r.partial += ell(static_cast<double>(j)) / static_cast<double>(j);
  for (std::int64_t j = n + 1; j <= j_max; ++j) r.upper += ell(static_cast<double>(j)) / static_cast<double>(j);

  // Cauchy condensation beyond J_max: sum l(j)/j converges iff sum_k l(2^k) does.
  const double ln2 = std::log(2.0);
  const auto k0 = static_cast<std::int64_t>(std::ceil(std::log2(static_cast<double>(std::max(j_max, n + 1)))));
  const std::int64_t K = 1000000;
  double s1 = 0.0, s2 = 0.0;
  for (std::int64_t k = k0; k < k0 + 2 * K; ++k) {
    double c = ell_at_log(ell, static_cast<double>(k) * ln2) * ln2;
    (k < k0 + K ? s1 : s2) += c;
  }
  r.diverges = s2 > 0.01 * (r.upper + s1 + s2);
  return r;
}

double a_value(const TailLaw& law, std::int64_t n) {
  if (n < 0) throw DomainError("a_n needs n >= 0");
  if (n == 0) return 1.0;
  if (law.beta() < 1.0)
    return law.tail_prob(n) * static_cast<double>(n) / d_beta(law.beta());
  double partial = 0.0;
  if (law.options().beta_one != BetaOneForm::PrintedTail)
    for (std::int64_t j = 1; j <= n; ++j) partial += law.ell()(static_cast<double>(j)) / static_cast<double>(j);
  switch (law.options().beta_one) {
    case BetaOneForm::TruncatedMean:
      return partial;
    case BetaOneForm::Ratio:
      return static_cast<double>(n) / partial;
    case BetaOneForm::PrintedTail: {
      auto t = tilde_ell(law, n, law.options().j_max);
      if (t.diverges) throw DomainError("printed beta = 1 normalizer diverges for this law");
      return t.upper;
    }
  }
  return 0.0;
}

NormalizingSequence a_seq(const TailLaw& law, std::int64_t N) {
  if (N < 1) throw DomainError("a_seq needs N >= 1");
  NormalizingSequence a;
  a.values.assign(static_cast<std::size_t>(N) + 1, 0.0);
  a.values[0] = 1.0;
  a.form = law.options().beta_one;
  if (law.beta() < 1.0) {
    a.branch = NormalizingSequence::Branch::BetaBelowOne;
    a.d_beta = d_beta(law.beta());
    for (std::int64_t n = 1; n <= N; ++n)
      a.values[n] = law.tail_prob(n) * static_cast<double>(n) / a.d_beta;
    return a;
  }
  a.branch = NormalizingSequence::Branch::BetaOne;
  const auto& ell = law.ell();
  if (a.form == BetaOneForm::PrintedTail) {
    auto t = tilde_ell(law, 1, law.options().j_max);
    if (t.diverges) throw DomainError("printed beta = 1 normalizer diverges for this law");
    double upper = t.upper;
    for (std::int64_t n = 1; n <= N; ++n) {
      if (n > 1) upper -= ell(static_cast<double>(n)) / static_cast<double>(n);
      a.values[n] = upper;
    }
    return a;
  }
  double partial = 0.0;
  for (std::int64_t n = 1; n <= N; ++n) {
    partial += ell(static_cast<double>(n)) / static_cast<double>(n);
    a.values[n] = a.form == BetaOneForm::Ratio ? static_cast<double>(n) / partial : partial;
  }
  return a;
}

SmoothTailsReport check_smooth_tails(std::span<const double> p, double beta, double q, double C,
                                     const SlowlyVarying& ell) {
  if (p.empty()) throw DomainError("check_smooth_tails: empty sequence");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("check_smooth_tails: q must lie in (0,1]");
  SmoothTailsReport r;
  const std::size_t N = p.size();
  for (std::size_t i = 0; i < N; ++i) {
    double n = static_cast<double>(i + 1);
    double ratio = p[i] / (ell(n) * std::pow(n, -(beta + q)));
    if (ratio > r.c_star) {
      r.c_star = ratio;
      r.argmax = static_cast<std::int64_t>(i + 1);
    }
  }
  r.bound_pass = r.c_star <= C;

  for (std::size_t i = 1; i < N; ++i) {
    double n = static_cast<double>(i);
    double k = std::abs(ell(n + 1) - ell(n)) / (ell(n) * std::pow(n, -q));
    if (i < N / 2 || N < 4)
      r.increment_constant_early = std::max(r.increment_constant_early, k);
    else
      r.increment_constant_late = std::max(r.increment_constant_late, k);
  }
  r.increment_pass = r.increment_constant_late <= r.increment_constant_early * (1 + 1e-9) + 1e-300;
  r.pass = r.bound_pass && r.increment_pass;
  return r;
}

double potter_ratio_max(const TailLaw& law, std::int64_t n, std::int64_t k_max, std::int64_t j_max) {
  auto a = a_seq(law, n);
  double an = a[n];
  double best = 0.0;
  for (std::int64_t k = 0; k <= k_max; ++k)
    for (std::int64_t j = 0; j <= j_max; ++j) {
      std::int64_t m = n - k - j;
      if (m < 1) continue;
      best = std::max(best, an / a[m]);
    }
  return best;
}

}  // namespace infmix::regvar
