#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace infmix::systems {

// Base points of Y = [1/2, 1] are handled in the chart t = 2y - 1 in [0, 1]; points near
// y = 1/2 (long return times) keep full relative precision there.
inline double to_chart(double y) { return 2.0 * y - 1.0; }
inline double from_chart(double t) { return 0.5 * (1.0 + t); }

class LsvMap {
 public:
  explicit LsvMap(double gamma);

  double gamma() const { return gamma_; }
  double step(double x) const;
  double left(double x) const {
    switch (fast_) {
      case Fast::One: return x + 2.0 * x * x;
      case Fast::Two: return x + 4.0 * x * x * x;
      case Fast::FiveQuarters: return x + c_ * x * x * std::sqrt(std::sqrt(x));
      case Fast::Generic: break;
    }
    return x + c_ * x * std::pow(x, gamma_);
  }
  double left_inverse(double u) const;
  // x_0 = 1/2, left(x_k) = x_{k-1}; returns x_0..x_K
  std::vector<double> preimage_sequence(int K) const;

  static constexpr std::int64_t kDefaultCap = 10000000;

  // Return time of the base point with chart t and the chart of its image. Throws ReturnOverflow.
  std::pair<std::int64_t, double> induced_chart(double t, std::int64_t cap = kDefaultCap) const;

 private:
  enum class Fast { One, Two, FiveQuarters, Generic };
  double gamma_;
  double c_;
  Fast fast_;
};

std::int64_t return_time(const LsvMap& map, double y, std::int64_t cap = LsvMap::kDefaultCap);
std::pair<double, std::int64_t> induced_step(const LsvMap& map, double y,
                                             std::int64_t cap = LsvMap::kDefaultCap);

enum class FiberKind { Halving, Quadratic };

// Fiber maps x2 -> g(x1, x2) depending only on the branch of x1.
// Halving: x2/2 and (x2+1)/2. Quadratic: q(x2)/2 and (1+q(x2))/2 with q(x) = x + kappa x(1-x).
class Fiber {
 public:
  static Fiber halving();
  static Fiber quadratic(double kappa);

  FiberKind kind() const { return kind_; }
  double kappa() const { return kappa_; }
  double contraction() const { return kind_ == FiberKind::Halving ? 0.5 : 0.5 * (1.0 + std::abs(kappa_)); }
  double derivative_bound() const { return contraction(); }
  double derivative(double x2) const { return kind_ == FiberKind::Halving ? 0.5 : 0.5 * (1.0 + kappa_ * (1.0 - 2.0 * x2)); }

  double left(double x2) const { return 0.5 * q(x2); }
  double right(double x2) const { return 0.5 * (1.0 + q(x2)); }
  // new separation after one step for the pair (x2, x2 + d); exact for the halving fiber
  double separation_step(double x2, double d) const {
    return kind_ == FiberKind::Halving ? 0.5 * d : 0.5 * d * (1.0 + kappa_ * (1.0 - 2.0 * x2 - d));
  }
  // induced fiber map G_h: one right step followed by h-1 left steps
  double induced(std::int64_t h, double x2) const;
  std::string describe() const;

 private:
  double q(double x) const { return kind_ == FiberKind::Halving ? x : x + kappa_ * x * (1.0 - x); }
  FiberKind kind_ = FiberKind::Halving;
  double kappa_ = 0.0;
};

struct SkewPoint {
  double x1;
  double x2;
};

class SkewProduct {
 public:
  SkewProduct(LsvMap base, Fiber fiber) : base_(base), fiber_(fiber) {}
  const LsvMap& base() const { return base_; }
  const Fiber& fiber() const { return fiber_; }
  SkewPoint step(SkewPoint p) const;

 private:
  LsvMap base_;
  Fiber fiber_;
};

std::int64_t return_time(const SkewProduct& sys, SkewPoint y, std::int64_t cap = LsvMap::kDefaultCap);
std::pair<SkewPoint, std::int64_t> induced_step(const SkewProduct& sys, SkewPoint y,
                                                std::int64_t cap = LsvMap::kDefaultCap);

// ---- induced (first return) structure used by towers and operators ----

struct InducedBranch {
  int return_time = 0;
  // chart preimages of the image grid edges, strictly increasing; front() and back() bound the cylinder
  std::vector<double> edges;
  double lo() const { return edges.front(); }
  double hi() const { return edges.back(); }
  double length() const { return edges.back() - edges.front(); }
};

struct InducedPartition {
  std::vector<InducedBranch> branches;  // return_time <= h_max, sorted by return time
  bool has_tail = false;
  InducedBranch tail;  // lumped {phi > h_max} with the image pattern of the deepest retained branch
};

class InducedSystem {
 public:
  virtual ~InducedSystem() = default;
  virtual std::string name() const = 0;
  // image_edges: increasing grid of [0, 1] in chart coordinates, front 0 and back 1
  virtual InducedPartition partition(std::span<const double> image_edges, int h_max) const = 0;
  // Affine full branches preserve Lebesgue measure on the base.
  virtual bool lebesgue_invariant() const { return false; }
};

class LsvInduced : public InducedSystem {
 public:
  explicit LsvInduced(LsvMap map) : map_(map) {}
  std::string name() const override;
  InducedPartition partition(std::span<const double> image_edges, int h_max) const override;
  const LsvMap& map() const { return map_; }

 private:
  LsvMap map_;
};

// Affine full branches with prescribed return-time probabilities p_1..p_N on Y = [0, 1];
// cylinder of return time h is [S_{h-1}, S_h). Missing mass forms a cylinder of return time N+1.
class SyntheticInduced : public InducedSystem {
 public:
  explicit SyntheticInduced(std::vector<double> p);
  std::string name() const override { return "synthetic"; }
  InducedPartition partition(std::span<const double> image_edges, int h_max) const override;
  bool lebesgue_invariant() const override { return true; }
  const std::vector<double>& probabilities() const { return p_; }
  // return time and image of a base point (chart = point)
  std::pair<std::int64_t, double> induced_chart(double t) const;

 private:
  std::vector<double> p_;
  std::vector<double> cum_;  // cum_[h] = S_h
};

// x -> 2x mod 1 with Y the whole interval; finite-measure fixture.
class DoublingInduced : public InducedSystem {
 public:
  std::string name() const override { return "doubling"; }
  InducedPartition partition(std::span<const double> image_edges, int h_max) const override;
  bool lebesgue_invariant() const override { return true; }
};

// ---- cylinders and separation ----

class CylinderPartition {
 public:
  // depth-1 cylinders of the LSV induced map with return time <= h_max, in chart coordinates
  CylinderPartition(const LsvMap& map, int h_max);
  const LsvMap& map() const { return map_; }
  int h_max() const { return h_max_; }
  std::size_t size() const { return bounds_.size() - 1; }
  // cylinder with return time h is [bounds[h], bounds[h-1]); bounds[0] = 1
  double lo(int h) const { return bounds_[h]; }
  double hi(int h) const { return bounds_[h - 1]; }
  double uncovered() const { return bounds_.back(); }
  void set_potentials(std::vector<double> p) { potentials_ = std::move(p); }
  const std::vector<double>& potentials() const { return potentials_; }

 private:
  LsvMap map_;
  int h_max_;
  std::vector<double> bounds_;
  std::vector<double> potentials_;
};

struct Separation {
  std::int64_t s = 0;
  bool capped = false;
};

// least n >= 0 such that F^n x and F^n y lie in different depth-1 cylinders (points in Y)
Separation separation_time(const CylinderPartition& part, double x, double y, std::int64_t cap);
double d_theta(const CylinderPartition& part, double theta, double x, double y, std::int64_t cap = 64);

}  // namespace infmix::systems
