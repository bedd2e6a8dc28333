#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "infmix/operators.hpp"
#include "infmix/systems.hpp"

namespace infmix::tower {

// Induced skew structure with full branches: base chart t in [0,1], fiber x2 in [0,1].
// Return times above h_max are treated as leaving the truncated tower.
class TwoSidedSystem {
 public:
  static TwoSidedSystem lsv(const systems::SkewProduct& s, int h_max);
  static TwoSidedSystem synthetic(const systems::SyntheticInduced& s, systems::Fiber fiber, int h_max);

  int h_max() const { return h_max_; }
  const systems::Fiber& fiber() const { return fiber_; }
  std::string describe() const;
  // return time and image chart; TruncationError above h_max
  std::pair<int, double> induced(double t) const;
  int return_time(double t) const { return induced(t).first; }
  // inverse of the branch with return time h
  double branch_inverse(int h, double t) const;
  // chart interval [lo, hi) of points whose itinerary starts with `word`
  std::pair<double, double> cylinder(std::span<const int> word) const;
  double fiber_map(int h, double x2) const { return fiber_.induced(h, x2); }

 private:
  TwoSidedSystem() = default;
  std::optional<systems::LsvMap> lsv_;
  std::optional<systems::SyntheticInduced> syn_;
  systems::Fiber fiber_ = systems::Fiber::halving();
  int h_max_ = 0;
};

struct TowerPoint {
  double t = 0.0;   // base chart coordinate of the column's base point
  double x2 = 0.0;  // fiber coordinate of the base point
  int level = 0;
};

// psi_n(q) = #{0 <= j < n : f^j q in Y}
int psi(const TwoSidedSystem& sys, TowerPoint q, int n);
TowerPoint step(const TwoSidedSystem& sys, TowerPoint q, int n = 1);

// Observables supported in Y, functions of (t, x2) on the base.
class BaseObservable {
 public:
  enum class Kind { Grid, Affine, Bump };
  // values[i * ny + j] on cell [i/nx,(i+1)/nx) x [j/ny,(j+1)/ny)
  static BaseObservable grid(int nx, int ny, std::vector<double> values);
  static BaseObservable affine(double a, double b_t, double c_x2);
  // amp * exp(-|(t,x2) - centre|^2 / (2 sigma^2)) + offset
  static BaseObservable bump(double amp, double c_t, double c_x2, double sigma, double offset = 0.0);
  static BaseObservable constant(double c) { return affine(c, 0.0, 0.0); }

  Kind kind() const { return kind_; }
  double operator()(double t, double x2) const;
  // infimum over the box [t0,t1) x [x0,x1]; exact for every kind
  double inf_box(double t0, double t1, double x0, double x1) const;
  double sup_norm() const;
  // Lipschitz constant in the max-metric of the (t, x2) chart
  double lipschitz() const;
  double holder_norm() const { return sup_norm() + lipschitz(); }
  bool fiber_constant() const;

 private:
  Kind kind_ = Kind::Affine;
  int nx_ = 0, ny_ = 0;
  std::vector<double> values_;
  double a_ = 0.0, b_ = 0.0, c_ = 0.0;
  double amp_ = 0.0, ct_ = 0.0, cx_ = 0.0, sigma_ = 1.0, off_ = 0.0;
};

struct ApproxValue {
  double vk = 0.0;       // v_k(q)
  double v_fk = 0.0;     // v(f^k q)
  int psi = 0;
  int returns = 0;
  int final_level = 0;
  int depth = 0;         // separation depth imposed on q'
};

// v_k(q) = inf{ v(f^k q') : s(q,q') >= 2 psi_k(q) } with q' in the same column and level.
// For k >= 1 the depth is max(2 psi_k, 1); k = 0 keeps the literal reading (depth 0).
ApproxValue approx_observable(const TwoSidedSystem& sys, const BaseObservable& v, TowerPoint q, int k);

// Representative points: base chart bins (midpoints) plus one point per branch, times fiber bin
// midpoints, times every level of the column.
std::vector<TowerPoint> tower_cells(const TwoSidedSystem& sys, int base_bins, int fiber_bins);

struct ApproxReport {
  int k = 0;
  std::size_t cells = 0;
  std::size_t truncated = 0;  // cells whose itinerary leaves the truncation
  double gamma = 0.5;
  double sup_ratio = 0.0;   // sup |v o f^k - v_k| / gamma^{psi_k}
  double vk_sup = 0.0;
  double v_sup = 0.0;
  bool sup_ok = true;
};
ApproxReport check_approx_bounds(const TwoSidedSystem& sys, const BaseObservable& v, int k,
                                 std::span<const TowerPoint> cells, double gamma);

struct SupportReport {
  int k = 0;
  std::size_t cells = 0;
  std::size_t truncated = 0;
  std::size_t support_a_violations = 0;  // v_k != 0 off f^{-k} Y
  std::size_t support_b_violations = 0;  // push-forward of v_k after k steps lands off Y
  std::optional<TowerPoint> witness;
};
SupportReport check_support(const TwoSidedSystem& sys, const BaseObservable& v, int k,
                            std::span<const TowerPoint> cells);

// |gamma^{psi_k}|_1 on the quotient tower of a bundle for k = 0..K
std::vector<double> gamma_psi_l1(const operators::OperatorBundle& b, double gamma, int K);

// Columns, heights and masses of the truncated quotient tower.
nlohmann::json tower_summary(const operators::OperatorBundle& b);

}  // namespace infmix::tower
