#include "infmix/tower.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "infmix/error.hpp"

namespace infmix::tower {

TwoSidedSystem TwoSidedSystem::lsv(const systems::SkewProduct& s, int h_max) {
  if (h_max < 1) throw DomainError("tower needs h_max >= 1");
  TwoSidedSystem t;
  t.lsv_ = s.base();
  t.fiber_ = s.fiber();
  t.h_max_ = h_max;
  return t;
}

TwoSidedSystem TwoSidedSystem::synthetic(const systems::SyntheticInduced& s, systems::Fiber fiber, int h_max) {
  if (h_max < 1) throw DomainError("tower needs h_max >= 1");
  TwoSidedSystem t;
  t.syn_ = s;
  t.fiber_ = fiber;
  t.h_max_ = h_max;
  return t;
}

std::string TwoSidedSystem::describe() const {
  std::ostringstream os;
  if (lsv_) os << "lsv(gamma=" << lsv_->gamma() << ")";
  else os << "synthetic";
  os << " x " << fiber_.describe() << ", h_max=" << h_max_;
  return os.str();
}

std::pair<int, double> TwoSidedSystem::induced(double t) const {
  std::int64_t h;
  double tn;
  if (lsv_) {
    try {
      std::tie(h, tn) = lsv_->induced_chart(t, h_max_);
    } catch (const ReturnOverflow&) {
      throw TruncationError("tower.truncation", "orbit leaves the tower truncated at h_max=" + std::to_string(h_max_));
    }
  } else {
    std::tie(h, tn) = syn_->induced_chart(t);
    if (h > h_max_)
      throw TruncationError("tower.truncation", "orbit leaves the tower truncated at h_max=" + std::to_string(h_max_));
  }
  return {static_cast<int>(h), tn};
}

double TwoSidedSystem::branch_inverse(int h, double t) const {
  if (h < 1) throw DomainError("branch_inverse: return time must be positive");
  if (lsv_) {
    double x = systems::from_chart(t);
    for (int i = 1; i < h; ++i) x = lsv_->left_inverse(x);
    return x;
  }
  const auto& p = syn_->probabilities();
  double lo = 0.0;
  for (int i = 0; i < h - 1 && i < static_cast<int>(p.size()); ++i) lo += p[i];
  double w = h <= static_cast<int>(p.size()) ? p[h - 1] : 1.0 - lo;
  return lo + w * t;
}

std::pair<double, double> TwoSidedSystem::cylinder(std::span<const int> word) const {
  double lo = 0.0, hi = 1.0;
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    lo = branch_inverse(*it, lo);
    hi = branch_inverse(*it, hi);
  }
  return {lo, hi};
}

TowerPoint step(const TwoSidedSystem& sys, TowerPoint q, int n) {
  int h = sys.return_time(q.t);
  if (q.level < 0 || q.level >= h) throw DomainError("tower point above its column");
  for (int i = 0; i < n; ++i) {
    if (++q.level == h) {
      auto [h0, tn] = sys.induced(q.t);
      q.x2 = sys.fiber_map(h0, q.x2);
      q.t = tn;
      q.level = 0;
      h = sys.return_time(q.t);
    }
  }
  return q;
}

int psi(const TwoSidedSystem& sys, TowerPoint q, int n) {
  if (n < 0) throw DomainError("psi: negative n");
  int h = sys.return_time(q.t);
  if (q.level < 0 || q.level >= h) throw DomainError("tower point above its column");
  int count = 0;
  for (int j = 0; j < n; ++j) {
    if (q.level == 0) ++count;
    if (++q.level == h && j + 1 < n) {
      q.t = sys.induced(q.t).second;
      q.level = 0;
      h = sys.return_time(q.t);
    }
  }
  return count;
}

// ---- observables ----

BaseObservable BaseObservable::grid(int nx, int ny, std::vector<double> values) {
  if (nx < 1 || ny < 1 || values.size() != static_cast<std::size_t>(nx) * ny)
    throw DomainError("grid observable: value count does not match nx*ny");
  BaseObservable v;
  v.kind_ = Kind::Grid;
  v.nx_ = nx;
  v.ny_ = ny;
  v.values_ = std::move(values);
  return v;
}

BaseObservable BaseObservable::affine(double a, double b_t, double c_x2) {
  BaseObservable v;
  v.kind_ = Kind::Affine;
  v.a_ = a;
  v.b_ = b_t;
  v.c_ = c_x2;
  return v;
}

BaseObservable BaseObservable::bump(double amp, double c_t, double c_x2, double sigma, double offset) {
  if (!(sigma > 0.0)) throw DomainError("bump observable needs sigma > 0");
  BaseObservable v;
  v.kind_ = Kind::Bump;
  v.amp_ = amp;
  v.ct_ = c_t;
  v.cx_ = c_x2;
  v.sigma_ = sigma;
  v.off_ = offset;
  return v;
}

double BaseObservable::operator()(double t, double x2) const {
  switch (kind_) {
    case Kind::Grid: {
      int i = std::clamp(static_cast<int>(std::floor(t * nx_)), 0, nx_ - 1);
      int j = std::clamp(static_cast<int>(std::floor(x2 * ny_)), 0, ny_ - 1);
      return values_[static_cast<std::size_t>(i) * ny_ + j];
    }
    case Kind::Affine: return a_ + b_ * t + c_ * x2;
    case Kind::Bump: {
      double d2 = (t - ct_) * (t - ct_) + (x2 - cx_) * (x2 - cx_);
      return off_ + amp_ * std::exp(-d2 / (2 * sigma_ * sigma_));
    }
  }
  return 0.0;
}

double BaseObservable::inf_box(double t0, double t1, double x0, double x1) const {
  switch (kind_) {
    case Kind::Grid: {
      int i0 = std::clamp(static_cast<int>(std::floor(t0 * nx_)), 0, nx_ - 1);
      int i1 = std::clamp(static_cast<int>(std::ceil(t1 * nx_)) - 1, i0, nx_ - 1);
      int j0 = std::clamp(static_cast<int>(std::floor(x0 * ny_)), 0, ny_ - 1);
      int j1 = std::clamp(static_cast<int>(std::floor(x1 * ny_)), j0, ny_ - 1);
      double m = INFINITY;
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) m = std::min(m, values_[static_cast<std::size_t>(i) * ny_ + j]);
      return m;
    }
    case Kind::Affine: return a_ + std::min(b_ * t0, b_ * t1) + std::min(c_ * x0, c_ * x1);
    case Kind::Bump: {
      // monotone in the distance to the centre: farthest point for amp > 0, nearest otherwise
      double t, x;
      if (amp_ >= 0) {
        t = std::abs(t0 - ct_) > std::abs(t1 - ct_) ? t0 : t1;
        x = std::abs(x0 - cx_) > std::abs(x1 - cx_) ? x0 : x1;
      } else {
        t = std::clamp(ct_, t0, t1);
        x = std::clamp(cx_, x0, x1);
      }
      return (*this)(t, x);
    }
  }
  return 0.0;
}

double BaseObservable::sup_norm() const {
  switch (kind_) {
    case Kind::Grid: {
      double m = 0.0;
      for (double x : values_) m = std::max(m, std::abs(x));
      return m;
    }
    case Kind::Affine:
      return std::max({std::abs(a_), std::abs(a_ + b_), std::abs(a_ + c_), std::abs(a_ + b_ + c_)});
    case Kind::Bump: {
      double peak = (*this)(std::clamp(ct_, 0.0, 1.0), std::clamp(cx_, 0.0, 1.0));
      double far = inf_box(0.0, 1.0, 0.0, 1.0);
      if (amp_ < 0) std::swap(peak, far);
      return std::max(std::abs(peak), std::abs(far));
    }
  }
  return 0.0;
}

double BaseObservable::lipschitz() const {
  switch (kind_) {
    case Kind::Grid: return INFINITY;
    case Kind::Affine: return std::abs(b_) + std::abs(c_);
    case Kind::Bump: return std::sqrt(2.0) * std::abs(amp_) / (sigma_ * std::sqrt(std::exp(1.0)));
  }
  return 0.0;
}

bool BaseObservable::fiber_constant() const {
  switch (kind_) {
    case Kind::Grid: return ny_ == 1;
    case Kind::Affine: return c_ == 0.0;
    case Kind::Bump: return amp_ == 0.0;
  }
  return false;
}

// ---- v_k ----

ApproxValue approx_observable(const TwoSidedSystem& sys, const BaseObservable& v, TowerPoint q, int k) {
  if (k < 0) throw DomainError("approx_observable: negative k");
  auto [h, next_t] = sys.induced(q.t);
  if (q.level < 0 || q.level >= h) throw DomainError("tower point above its column");
  std::vector<int> word{h};
  double t = q.t, x2 = q.x2;
  int level = q.level;
  ApproxValue out;
  for (int j = 0; j < k; ++j) {
    if (level == 0) ++out.psi;
    if (++level == word.back()) {
      x2 = sys.fiber_map(word.back(), x2);
      t = next_t;
      level = 0;
      ++out.returns;
      auto [h2, t2] = sys.induced(t);
      word.push_back(h2);
      next_t = t2;
    }
  }
  out.final_level = level;
  out.depth = k == 0 ? 0 : std::max(2 * out.psi, 1);
  for (double cur = next_t; static_cast<int>(word.size()) < out.depth;) {
    auto [h3, t3] = sys.induced(cur);
    word.push_back(h3);
    cur = t3;
  }
  out.v_fk = level == 0 ? v(t, x2) : 0.0;
  const int r = out.returns;
  if (level != 0) {
    // admissible q' share h_0..h_r, so they sit at the same nonzero level at time k
    if (k > 0 && r + 1 > out.depth) throw NumericError("tower.approx_observable", "itinerary not pinned by depth");
    out.vk = 0.0;
    return out;
  }
  if (k > 0 && r > out.depth) throw NumericError("tower.approx_observable", "itinerary not pinned by depth");
  std::span<const int> tail_word;
  if (out.depth > r) tail_word = std::span<const int>(word).subspan(r, out.depth - r);
  auto [lo, hi] = sys.cylinder(tail_word);
  double x0 = 0.0, x1 = 1.0;
  for (int i = 0; i < r; ++i) {
    x0 = sys.fiber_map(word[i], x0);
    x1 = sys.fiber_map(word[i], x1);
  }
  out.vk = v.inf_box(lo, hi, x0, x1);
  return out;
}

std::vector<TowerPoint> tower_cells(const TwoSidedSystem& sys, int base_bins, int fiber_bins) {
  if (base_bins < 1 || fiber_bins < 1) throw DomainError("tower_cells needs positive bin counts");
  std::vector<double> ts;
  for (int i = 0; i < base_bins; ++i) ts.push_back((i + 0.5) / base_bins);
  for (int h = 1; h <= sys.h_max(); ++h) {
    int w[1] = {h};
    auto [lo, hi] = sys.cylinder(w);
    if (hi > lo) ts.push_back(0.5 * (lo + hi));
  }
  std::vector<TowerPoint> cells;
  for (double t : ts) {
    int h;
    try {
      h = sys.return_time(t);
    } catch (const TruncationError&) {
      continue;
    }
    for (int j = 0; j < fiber_bins; ++j)
      for (int l = 0; l < h; ++l) cells.push_back({t, (j + 0.5) / fiber_bins, l});
  }
  return cells;
}

ApproxReport check_approx_bounds(const TwoSidedSystem& sys, const BaseObservable& v, int k,
                                 std::span<const TowerPoint> cells, double gamma) {
  ApproxReport r;
  r.k = k;
  r.gamma = gamma;
  r.v_sup = v.sup_norm();
  for (const auto& q : cells) {
    ApproxValue a;
    try {
      a = approx_observable(sys, v, q, k);
    } catch (const TruncationError&) {
      ++r.truncated;
      continue;
    }
    ++r.cells;
    r.sup_ratio = std::max(r.sup_ratio, std::abs(a.v_fk - a.vk) / std::pow(gamma, a.psi));
    r.vk_sup = std::max(r.vk_sup, std::abs(a.vk));
  }
  if (r.cells == 0 && !cells.empty())
    throw TruncationError("tower.check_approx_bounds", "every cell leaves the truncation; raise h_max");
  r.sup_ok = r.vk_sup <= r.v_sup * (1 + 1e-15);
  return r;
}

SupportReport check_support(const TwoSidedSystem& sys, const BaseObservable& v, int k,
                            std::span<const TowerPoint> cells) {
  SupportReport r;
  r.k = k;
  for (const auto& q : cells) {
    ApproxValue a;
    TowerPoint img;
    try {
      a = approx_observable(sys, v, q, k);
      img = step(sys, q, k);
    } catch (const TruncationError&) {
      ++r.truncated;
      continue;
    }
    ++r.cells;
    if (a.vk == 0.0) continue;
    bool bad_a = a.final_level != 0;
    bool bad_b = img.level != 0;
    if (bad_a) ++r.support_a_violations;
    if (bad_b) ++r.support_b_violations;
    if ((bad_a || bad_b) && !r.witness) r.witness = q;
  }
  return r;
}

std::vector<double> gamma_psi_l1(const operators::OperatorBundle& b, double gamma, int K) {
  std::vector<double> out;
  std::vector<double> g(b.tower_size(), 1.0);
  out.push_back(b.tower_integral(g));
  for (int k = 1; k <= K; ++k) {
    g = b.apply_K(g);
    for (std::size_t i = 0; i < b.piece_count(); ++i) g[b.offset(i)] *= gamma;
    out.push_back(b.tower_integral(g));
  }
  return out;
}

nlohmann::json tower_summary(const operators::OperatorBundle& b) {
  nlohmann::json j;
  j["system"] = b.system_name();
  j["bins"] = b.bins();
  j["h_max"] = b.h_max();
  j["max_height"] = b.max_height();
  j["pieces"] = b.piece_count();
  nlohmann::json cols = nlohmann::json::array();
  double retained = 0.0;
  for (int h = 1; h <= b.max_height(); ++h) {
    double m = 0.0;
    for (std::size_t i = b.h_begin(h); i < b.h_begin(h + 1); ++i) m += b.pieces()[i].pi;
    if (b.h_begin(h) == b.h_begin(h + 1)) continue;
    cols.push_back({{"height", h}, {"mass", m}, {"pieces", b.h_begin(h + 1) - b.h_begin(h)}});
    retained += h * m;
  }
  j["columns"] = cols;
  j["retained_mass"] = retained;
  j["truncation_mass"] = b.tail(b.h_max());
  j["power_residual"] = b.power_residual();
  j["power_iterations"] = b.power_iterations();
  j["big_images"] = b.big_images();
  j["constant_defect"] = b.constant_defect();
  return j;
}

}  // namespace infmix::tower
