#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "infmix/regvar.hpp"

namespace infmix::renewal {

class ReturnDistribution {
 public:
  enum class Source { Table, TailLaw, PowerLaw };

  // p[0] = P(phi = 1)
  static ReturnDistribution from_table(std::vector<double> p);
  // p_n = tail(n-1) - tail(n)
  static ReturnDistribution from_tail_law(const regvar::TailLaw& law, std::int64_t N);
  // p_n = n^{-(1+beta)} / zeta(1+beta); deficit is the exact zeta tail
  static ReturnDistribution power_law(double beta, std::int64_t N);

  std::int64_t size() const { return static_cast<std::int64_t>(p_.size()) - 1; }
  double p(std::int64_t n) const { return p_[static_cast<std::size_t>(n)]; }
  std::span<const double> masses() const { return {p_.data() + 1, p_.size() - 1}; }
  // P(phi > n) for 0 <= n <= N, deficit included
  double tail(std::int64_t n) const { return tail_[static_cast<std::size_t>(n)]; }
  double deficit() const { return tail_.back(); }
  Source source() const { return source_; }

 private:
  ReturnDistribution(std::vector<double> p_with_zero, double deficit, Source src);
  std::vector<double> p_;
  std::vector<double> tail_;
  Source source_;
};

// u_0..u_N with u_n = sum_{j=1}^n p_j u_{n-j}
std::vector<double> renewal_sequence(const ReturnDistribution& dist, std::int64_t N);
std::vector<double> renewal_sequence_direct(const ReturnDistribution& dist, std::int64_t N);
std::vector<double> renewal_sequence_fft(const ReturnDistribution& dist, std::int64_t N);

double max_renewal_residual(const ReturnDistribution& dist, std::span<const double> u);

struct NormalizedRenewal {
  std::vector<double> normalized;  // a_n u_n, index n (entry 0 is u_0 = 1)
  std::vector<double> a;
  std::vector<double> u;
  double value_at_N = 0.0;
  double log_slope = 0.0;  // slope of log|a_n u_n - 1| against log n over [N/10, N]
  double beta_hat = 0.0;   // from the tails of dist
  bool accepted = true;
  std::vector<std::string> warnings;
};

NormalizedRenewal normalized_renewal(const ReturnDistribution& dist, const regvar::TailLaw& law,
                                     std::int64_t N);

// Leading coefficients of 1 - p(z) = A s^beta + B s + o(s), s = 1 - z, for a law with
// P(phi > n) ~ c n^{-beta}, beta < 1. Used as an analytic oracle for convergence rates.
struct SingularExpansion {
  double A = 0.0;
  double B = 0.0;
  double dominant_exponent = 0.0;  // predicted tau in |a_n u_n - 1| ~ n^{-tau}
};
SingularExpansion singular_expansion(const ReturnDistribution& dist, double beta, double c);

}  // namespace infmix::renewal
