#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "infmix/regvar.hpp"
#include "infmix/systems.hpp"

namespace infmix::operators {

// A piece is the intersection of a return-time cylinder with an Ulam bin of the base.
struct Piece {
  int branch = 0;  // index into the partition (tail piece: number of branches)
  int h = 0;       // return time = column height
  int bin = 0;
  double lo = 0.0, hi = 0.0;  // chart coordinates
  double w = 0.0;             // Lebesgue share of the piece inside its bin
  double pi = 0.0;            // invariant mass
  int k0 = 0;                 // first image bin
  std::vector<double> row;    // transition probabilities to bins k0, k0+1, ...
};

struct BuildOptions {
  double tol = 1e-12;
  int max_iter = 100000;
};

class OperatorBundle {
 public:
  static OperatorBundle build(const systems::InducedSystem& sys, int bins, int h_max, BuildOptions opts = {});

  const std::string& system_name() const { return name_; }
  int bins() const { return M_; }
  int h_max() const { return H_; }
  int max_height() const { return max_h_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  std::size_t piece_count() const { return pieces_.size(); }
  // pieces with return time h occupy [h_begin(h), h_begin(h+1))
  std::size_t h_begin(int h) const;

  double bin_lo(int b) const { return static_cast<double>(b) / M_; }
  double bin_width() const { return 1.0 / M_; }
  const std::vector<double>& bin_mass() const { return pi_bin_; }
  double density(int b) const { return pi_bin_[b] * M_; }

  // mu(phi > n) on the chain for 0 <= n <= max_height (zero beyond)
  double tail(std::int64_t n) const;
  const std::vector<double>& tail_table() const { return tail_; }
  // tail law with l(n) = n^beta mu(phi > n) tabulated from the chain
  regvar::TailLaw tail_law(double beta) const;

  double power_residual() const { return residual_; }
  int power_iterations() const { return iterations_; }
  double big_images() const { return big_images_; }
  double constant_defect() const;  // sup |L1 - 1| on the base

  // ---- base functions (one value per piece) ----
  double integrate(std::span<const double> v) const;  // integral over Y against mu
  std::vector<double> lift_bins(std::span<const double> g) const;  // bin-level -> piece-level

  // G_0 = v (pieces), G_n for n >= 1 bin-level: T_n v, via the renewal recursion over returns
  struct TSeq {
    std::vector<double> g0;
    std::vector<std::vector<double>> g;  // g[n][bin], g[0] unused
    double at(std::int64_t n, const Piece& p, std::size_t idx) const { return n == 0 ? g0[idx] : g[n][p.bin]; }
  };
  TSeq T_sequence(std::span<const double> v, std::int64_t N) const;
  std::vector<double> T_n(std::span<const double> v, std::int64_t n) const;

  // ---- tower functions (one value per state (piece, level)) ----
  std::size_t tower_size() const { return tower_size_; }
  std::size_t offset(std::size_t piece) const { return offsets_[piece]; }
  std::vector<double> tower_zero() const;
  std::vector<double> apply_L(std::span<const double> g) const;
  std::vector<double> apply_K(std::span<const double> g) const;
  double tower_integral(std::span<const double> g) const;
  // (A_j v)(p, l) = delta_{j,l} v(p) on columns with h_p > j
  std::vector<double> A_j(std::span<const double> v, int j) const;

  // Koopman profile of a base function w0: S[r][p] = sum_b P_{p,b} Ret_r(b), where Ret_r(b) is the
  // expected value of w0 r steps after entering bin b on the base.
  struct KoopmanProfile {
    int k = 0;
    std::vector<double> w0;
    std::vector<std::vector<double>> S;
  };
  KoopmanProfile koopman_profile(std::span<const double> w0, int k) const;
  // (K^k w0)(p, j)
  double pulled_back(const KoopmanProfile& prof, std::size_t piece, int j) const;
  // |1_{Y_k} A_j 1_Y|_1 from a profile of 1_Y
  double level_return_mass(const KoopmanProfile& prof_one, int j) const;

 private:
  std::string name_;
  int M_ = 0, H_ = 0, max_h_ = 0;
  std::vector<Piece> pieces_;
  std::vector<std::size_t> h_start_;
  std::vector<double> pi_bin_;
  std::vector<double> tail_;
  std::vector<std::vector<int>> bin_pieces_;
  std::vector<std::size_t> offsets_;
  std::size_t tower_size_ = 0;
  double residual_ = 0.0, big_images_ = 0.0;
  int iterations_ = 0;
};

// Depth-1 cylinder potentials log mu(Z) for a partition, indexed by return time.
std::vector<double> cylinder_potentials(const OperatorBundle& b);

struct ConvolutionReport {
  double max_defect = 0.0;
  std::int64_t worst_n = 0;
  double partition_defect = 0.0;  // |1_Delta - sum_{j<=H} A_j 1_Y|_1
  double discarded_mass = 0.0;    // mass of the chain above level H (zero by construction)
  double truncation_mass = 0.0;   // mu(phi > H): mass routed through the lumped column
  std::vector<double> defect_by_n;
};
ConvolutionReport convolution_check(const OperatorBundle& b, std::int64_t n_max, std::uint64_t seed = 1,
                                    int random_tests = 3);

struct LevelMassReport {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
  int witness_j = -1, witness_k = -1;
  double witness_lhs = 0.0, witness_rhs = 0.0;
  double max_slack_ratio = 0.0;  // max lhs / rhs over pairs with rhs > 0
};
LevelMassReport check_level_mass(const OperatorBundle& b, int j_max, int k_max);

// Test-function family on pieces: constant, depth-1 cylinder indicators (h <= depth), random
// d_theta-Lipschitz functions normalised to ||v||_theta <= 1.
std::vector<std::vector<double>> test_family(const OperatorBundle& b, int depth, int random_count, double theta,
                                             std::uint64_t seed);
double theta_norm(const OperatorBundle& b, std::span<const double> v, double theta);

struct UnormReport {
  std::int64_t n = 0;
  double lower_bound = 0.0;      // max over the family of ||(U_n - P)v||_theta / ||v||_theta
  double sup_on_constants = 0.0;  // |(U_n - P)1|_inf
  double discretization_gap = 0.0;
};
std::vector<UnormReport> U_n_minus_P_norm(const OperatorBundle& b, const regvar::TailLaw& law,
                                          std::span<const std::int64_t> ns, int depth = 6, int random_count = 32,
                                          double theta = 0.5, std::uint64_t seed = 1);

// ---- E-term diagnostics ----
struct ETermReport {
  int k = 0;
  std::int64_t n = 0;
  double lhs = 0.0;
  double e1 = 0.0, e2 = 0.0, e3 = 0.0;
  double e2p = 0.0, e2pp = 0.0;
  double identity_defect = 0.0;
  // envelopes evaluated at (k, n)
  double env_e2pp = 0.0;  // k l(n)^2 n^{-(2 beta - 1)}  (beta < 1), k ltilde(n) l(n)/n (beta = 1)
  double env_e3 = 0.0;  // k l(n) n^{-beta}
  double env_smooth = 0.0;  // k l(n) n^{-(beta+2q-2)} (q < 1), k l(n) n^{-beta} log n (q = 1)
  double env_log = 0.0; // k^2/n + k l(n) n^{-beta} log n
};

class ETermEngine {
 public:
  // T_m v is computed once up to n_max; a_n from law.
  ETermEngine(const OperatorBundle& b, const regvar::TailLaw& law, std::vector<double> v, std::int64_t n_max);
  ETermReport evaluate(std::span<const double> w0, int k, std::int64_t n) const;
  const OperatorBundle& bundle() const { return b_; }

 private:
  const OperatorBundle& b_;
  const regvar::TailLaw& law_;
  std::vector<double> v_;
  OperatorBundle::TSeq T_;
  regvar::NormalizingSequence a_;
  std::int64_t n_max_;
  double V_;
};

}  // namespace infmix::operators
