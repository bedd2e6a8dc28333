#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace infmix::regvar {

enum class EllKind { Constant, LogPower, Table };

// l(n) for n >= 1. Log-power uses log(n+1) so that l(1) is finite and nonzero.
// Tables hold l(1..m); beyond m the last value is held.
class SlowlyVarying {
 public:
  static SlowlyVarying constant(double c);
  static SlowlyVarying log_power(double c, double a);
  static SlowlyVarying table(std::vector<double> values);

  double operator()(double n) const;
  EllKind kind() const { return kind_; }
  double c() const { return c_; }
  double a() const { return a_; }
  const std::vector<double>& values() const { return table_; }
  std::string describe() const;

 private:
  EllKind kind_ = EllKind::Constant;
  double c_ = 1.0;
  double a_ = 0.0;
  std::vector<double> table_;
};

enum class BetaOneForm {
  TruncatedMean,  // a_n = sum_{j<=n} l(j)/j (default)
  Ratio,          // a_n = n / sum_{j<=n} l(j)/j
  PrintedTail,    // a_n = sum_{n<j<=J_max} l(j)/j, only when that sum converges
};

struct TailLawOptions {
  std::int64_t cache_size = 100000;
  std::int64_t check_limit = 1000000;
  std::int64_t j_max = 1000000;
  BetaOneForm beta_one = BetaOneForm::TruncatedMean;
};

struct TildeEll {
  double partial = 0.0;  // sum_{j<=n} l(j)/j
  double upper = 0.0;    // sum_{n<j<=J_max} l(j)/j
  bool diverges = false;
  std::int64_t j_max = 0;
};

class TailLaw {
 public:
  TailLaw(double beta, SlowlyVarying ell, std::optional<double> q = std::nullopt,
          TailLawOptions opts = {});

  double beta() const { return beta_; }
  const SlowlyVarying& ell() const { return ell_; }
  std::optional<double> q() const { return q_; }
  const TailLawOptions& options() const { return opts_; }

  double tail_prob(std::int64_t n) const;
  // first n from which tail_prob was verified nonincreasing
  std::int64_t monotone_from() const { return n0_; }
  // |l(2n)/l(n) - 1| at n = 1e2, 1e4, 1e6
  const std::vector<double>& sv_ratios() const { return sv_ratios_; }

 private:
  double beta_;
  SlowlyVarying ell_;
  std::optional<double> q_;
  TailLawOptions opts_;
  std::int64_t n0_ = 1;
  std::vector<double> sv_ratios_;
  std::vector<double> cache_;
};

double d_beta(double beta);

struct NormalizingSequence {
  enum class Branch { BetaBelowOne, BetaOne };
  std::vector<double> values;  // values[n] = a_n, values[0] = 1 by convention
  double d_beta = 0.0;         // 0 on the beta = 1 branch
  Branch branch = Branch::BetaBelowOne;
  BetaOneForm form = BetaOneForm::TruncatedMean;
  double operator[](std::size_t n) const { return values[n]; }
  std::size_t size() const { return values.size(); }
};

NormalizingSequence a_seq(const TailLaw& law, std::int64_t N);
double a_value(const TailLaw& law, std::int64_t n);

TildeEll tilde_ell(const TailLaw& law, std::int64_t n, std::int64_t j_max = 1000000);

struct SmoothTailsReport {
  double c_star = 0.0;
  std::int64_t argmax = 0;
  bool bound_pass = false;
  double increment_constant_early = 0.0;
  double increment_constant_late = 0.0;
  bool increment_pass = false;
  bool pass = false;
};

// p[0] is p_1.
SmoothTailsReport check_smooth_tails(std::span<const double> p, double beta, double q, double C,
                                     const SlowlyVarying& ell = SlowlyVarying::constant(1.0));

// max over j <= j_max, k <= k_max of a_n / a_{n-k-j}
double potter_ratio_max(const TailLaw& law, std::int64_t n, std::int64_t k_max, std::int64_t j_max);

}  // namespace infmix::regvar
