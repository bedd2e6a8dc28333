#include "infmix/systems.hpp"

#include <algorithm>
#include <sstream>

#include "infmix/error.hpp"

namespace infmix::systems {

LsvMap::LsvMap(double gamma) : gamma_(gamma), c_(std::pow(2.0, gamma)), fast_(Fast::Generic) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("LSV map needs gamma > 0");
  if (gamma == 1.0) fast_ = Fast::One;
  else if (gamma == 2.0) fast_ = Fast::Two;
  else if (gamma == 1.25) fast_ = Fast::FiveQuarters;
}

double LsvMap::step(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("lsv_step: x outside [0,1]");
  return x >= 0.5 ? 2.0 * x - 1.0 : left(x);
}

double LsvMap::left_inverse(double u) const {
  if (u >= 1.0) return 0.5;
  if (u <= 0.0) return 0.0;
  if (fast_ == Fast::One) return 2.0 * u / (1.0 + std::sqrt(1.0 + 8.0 * u));
  // g(x) = left(x) - u is increasing and convex, so Newton from the right decreases monotonically.
  double x = std::min(u, 0.5);
  for (int it = 0; it < 200; ++it) {
    double g = left(x) - u;
    if (g <= 0.0) break;
    double dg = 1.0 + c_ * (1.0 + gamma_) * std::pow(x, gamma_);
    double dx = g / dg;
    if (!(dx > 0.25e-16 * x)) break;
    x -= dx;
  }
  return x;
}

std::vector<double> LsvMap::preimage_sequence(int K) const {
  std::vector<double> xs(static_cast<std::size_t>(std::max(K, 0)) + 1);
  xs[0] = 0.5;
  for (int k = 1; k <= K; ++k) xs[k] = left_inverse(xs[k - 1]);
  return xs;
}

std::pair<std::int64_t, double> LsvMap::induced_chart(double t, std::int64_t cap) const {
  if (t >= 0.5) return {1, 2.0 * t - 1.0};
  double x = t;
  std::int64_t n = 1;
  while (x < 0.5) {
    x = left(x);
    if (++n > cap) throw ReturnOverflow(cap);
  }
  return {n, 2.0 * x - 1.0};
}

std::int64_t return_time(const LsvMap& map, double y, std::int64_t cap) {
  if (!(y >= 0.5 && y <= 1.0)) throw DomainError("return_time: point outside Y = [1/2, 1]");
  return map.induced_chart(to_chart(y), cap).first;
}

std::pair<double, std::int64_t> induced_step(const LsvMap& map, double y, std::int64_t cap) {
  if (!(y >= 0.5 && y <= 1.0)) throw DomainError("induced_step: point outside Y = [1/2, 1]");
  auto [h, t] = map.induced_chart(to_chart(y), cap);
  return {from_chart(t), h};
}

Fiber Fiber::halving() { return Fiber{}; }

Fiber Fiber::quadratic(double kappa) {
  if (!(std::abs(kappa) < 1.0)) throw DomainError("quadratic fiber needs |kappa| < 1");
  Fiber f;
  f.kind_ = FiberKind::Quadratic;
  f.kappa_ = kappa;
  return f;
}

double Fiber::induced(std::int64_t h, double x2) const {
  if (kind_ == FiberKind::Halving) return std::ldexp(x2 + 1.0, static_cast<int>(-std::min<std::int64_t>(h, 4000)));
  double x = right(x2);
  for (std::int64_t i = 1; i < h && x != 0.0; ++i) x = left(x);
  return x;
}

std::string Fiber::describe() const {
  if (kind_ == FiberKind::Halving) return "halving";
  std::ostringstream os;
  os << "quadratic(" << kappa_ << ")";
  return os.str();
}

SkewPoint SkewProduct::step(SkewPoint p) const {
  if (!(p.x1 >= 0.0 && p.x1 <= 1.0)) throw DomainError("skew step: x1 outside [0,1]");
  if (p.x1 >= 0.5) return {2.0 * p.x1 - 1.0, fiber_.right(p.x2)};
  return {base_.left(p.x1), fiber_.left(p.x2)};
}

std::int64_t return_time(const SkewProduct& sys, SkewPoint y, std::int64_t cap) {
  return return_time(sys.base(), y.x1, cap);
}

std::pair<SkewPoint, std::int64_t> induced_step(const SkewProduct& sys, SkewPoint y, std::int64_t cap) {
  auto [x1, h] = induced_step(sys.base(), y.x1, cap);
  return {{x1, sys.fiber().induced(h, y.x2)}, h};
}

std::string LsvInduced::name() const {
  std::ostringstream os;
  os << "lsv(gamma=" << map_.gamma() << ")";
  return os.str();
}

namespace {

void check_grid(std::span<const double> e) {
  if (e.size() < 2 || e.front() != 0.0 || e.back() != 1.0) throw DomainError("image grid must run from 0 to 1");
  for (std::size_t i = 1; i < e.size(); ++i)
    if (!(e[i] > e[i - 1])) throw DomainError("image grid must be strictly increasing");
}

InducedBranch rescaled(const InducedBranch& pattern, double lo, double hi, int rt) {
  InducedBranch b;
  b.return_time = rt;
  b.edges.resize(pattern.edges.size());
  const double a = pattern.lo(), w = pattern.length();
  for (std::size_t k = 0; k < b.edges.size(); ++k) b.edges[k] = lo + (hi - lo) * ((pattern.edges[k] - a) / w);
  b.edges.front() = lo;
  b.edges.back() = hi;
  return b;
}

}  // namespace

InducedPartition LsvInduced::partition(std::span<const double> image_edges, int h_max) const {
  check_grid(image_edges);
  if (h_max < 1) throw DomainError("partition needs h_max >= 1");
  InducedPartition part;
  part.branches.reserve(static_cast<std::size_t>(h_max));
  std::vector<double> cur(image_edges.size());
  for (std::size_t k = 0; k < cur.size(); ++k) cur[k] = from_chart(image_edges[k]);
  for (int h = 1; h <= h_max; ++h) {
    if (h > 1)
      for (double& x : cur) x = map_.left_inverse(x);
    InducedBranch b;
    b.return_time = h;
    b.edges = cur;
    part.branches.push_back(std::move(b));
  }
  part.has_tail = true;
  part.tail = rescaled(part.branches.back(), 0.0, part.branches.back().lo(), h_max + 1);
  return part;
}

SyntheticInduced::SyntheticInduced(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw DomainError("synthetic system needs at least one return probability");
  cum_.assign(p_.size() + 1, 0.0);
  for (std::size_t h = 1; h <= p_.size(); ++h) {
    if (!(p_[h - 1] >= 0.0)) throw DomainError("synthetic probabilities must be nonnegative");
    cum_[h] = cum_[h - 1] + p_[h - 1];
  }
  if (cum_.back() > 1.0 + 1e-12) throw DomainError("synthetic probabilities sum to more than 1");
  cum_.back() = std::min(cum_.back(), 1.0);
}

InducedPartition SyntheticInduced::partition(std::span<const double> image_edges, int h_max) const {
  check_grid(image_edges);
  if (h_max < 1) throw DomainError("partition needs h_max >= 1");
  InducedPartition part;
  const int N = static_cast<int>(p_.size());
  const int top = std::min(h_max, N);
  InducedBranch unit;
  unit.edges.assign(image_edges.begin(), image_edges.end());
  for (int h = 1; h <= top; ++h) {
    if (p_[h - 1] <= 0.0) continue;
    part.branches.push_back(rescaled(unit, cum_[h - 1], cum_[h], h));
  }
  if (1.0 - cum_[top] > 1e-15) {
    part.has_tail = true;
    part.tail = rescaled(unit, cum_[top], 1.0, top + 1);
  } else if (!part.branches.empty()) {
    part.branches.back().edges.back() = 1.0;
  }
  return part;
}

std::pair<std::int64_t, double> SyntheticInduced::induced_chart(double t) const {
  auto it = std::upper_bound(cum_.begin(), cum_.end(), t);
  auto h = static_cast<std::int64_t>(it - cum_.begin());
  if (h > static_cast<std::int64_t>(p_.size())) {
    double lo = cum_.back();
    return {h, 1.0 - cum_.back() > 0 ? (t - lo) / (1.0 - lo) : 0.0};
  }
  return {h, (t - cum_[h - 1]) / p_[h - 1]};
}

InducedPartition DoublingInduced::partition(std::span<const double> image_edges, int h_max) const {
  check_grid(image_edges);
  (void)h_max;
  InducedBranch unit;
  unit.edges.assign(image_edges.begin(), image_edges.end());
  InducedPartition part;
  part.branches.push_back(rescaled(unit, 0.0, 0.5, 1));
  part.branches.push_back(rescaled(unit, 0.5, 1.0, 1));
  return part;
}

CylinderPartition::CylinderPartition(const LsvMap& map, int h_max) : map_(map), h_max_(h_max) {
  if (h_max < 1) throw DomainError("cylinder partition needs h_max >= 1");
  auto xs = map.preimage_sequence(h_max - 1);
  bounds_.reserve(static_cast<std::size_t>(h_max) + 1);
  bounds_.push_back(1.0);
  for (double x : xs) bounds_.push_back(x);
}

Separation separation_time(const CylinderPartition& part, double x, double y, std::int64_t cap) {
  if (!(x >= 0.5 && x <= 1.0 && y >= 0.5 && y <= 1.0)) throw DomainError("separation_time: points outside Y");
  const auto& m = part.map();
  double tx = to_chart(x), ty = to_chart(y);
  for (std::int64_t n = 0; n < cap; ++n) {
    auto [hx, nx] = m.induced_chart(tx);
    auto [hy, ny] = m.induced_chart(ty);
    if (hx != hy) return {n, false};
    tx = nx;
    ty = ny;
  }
  return {cap, true};
}

double d_theta(const CylinderPartition& part, double theta, double x, double y, std::int64_t cap) {
  auto s = separation_time(part, x, y, cap);
  return s.capped ? 0.0 : std::pow(theta, static_cast<double>(s.s));
}

}  // namespace infmix::systems
