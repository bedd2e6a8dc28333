#include "infmix/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "infmix/error.hpp"
#include "infmix/fault.hpp"

namespace infmix::operators {

namespace {

// Largest tower we are willing to materialise as a dense vector.
constexpr std::size_t kMaxTowerStates = 30'000'000;

void add_pieces(const systems::InducedBranch& br, int branch_id, int M, std::vector<Piece>& out) {
  const auto& e = br.edges;
  const int K = static_cast<int>(e.size()) - 1;
  if (!(br.length() > 0.0)) return;
  int b_lo = std::clamp(static_cast<int>(std::floor(br.lo() * M)), 0, M - 1);
  int b_hi = std::clamp(static_cast<int>(std::ceil(br.hi() * M)) - 1, 0, M - 1);
  for (int b = b_lo; b <= b_hi; ++b) {
    double lo = std::max(br.lo(), static_cast<double>(b) / M);
    double hi = std::min(br.hi(), static_cast<double>(b + 1) / M);
    if (!(hi > lo)) continue;
    Piece p;
    p.branch = branch_id;
    p.h = br.return_time;
    p.bin = b;
    p.lo = lo;
    p.hi = hi;
    // image segments [e_k, e_{k+1}] meeting [lo, hi]
    int k0 = static_cast<int>(std::upper_bound(e.begin(), e.end(), lo) - e.begin()) - 1;
    k0 = std::clamp(k0, 0, K - 1);
    p.k0 = k0;
    double len = hi - lo, sum = 0.0;
    for (int k = k0; k < K && e[k] < hi; ++k) {
      double ov = std::min(hi, e[k + 1]) - std::max(lo, e[k]);
      double v = ov > 0 ? ov / len : 0.0;
      p.row.push_back(v);
      sum += v;
    }
    if (!(sum > 0.0)) throw NumericError("operators.build_bundle", "empty transition row");
    for (double& r : p.row) r /= sum;
    // drop zero padding at the front
    while (p.row.size() > 1 && p.row.front() == 0.0) {
      p.row.erase(p.row.begin());
      ++p.k0;
    }
    p.w = len * M;
    out.push_back(std::move(p));
  }
}

}  // namespace

OperatorBundle OperatorBundle::build(const systems::InducedSystem& sys, int bins, int h_max, BuildOptions opts) {
  if (bins < 1) throw DomainError("bundle needs at least one bin");
  if (h_max < 1) throw DomainError("bundle needs h_max >= 1");
  OperatorBundle B;
  B.name_ = sys.name();
  B.M_ = bins;
  B.H_ = h_max;
  std::vector<double> grid(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) grid[k] = static_cast<double>(k) / bins;
  auto part = sys.partition(grid, h_max);

  int id = 0;
  for (const auto& br : part.branches) add_pieces(br, id++, bins, B.pieces_);
  if (part.has_tail) add_pieces(part.tail, id, bins, B.pieces_);
  std::stable_sort(B.pieces_.begin(), B.pieces_.end(),
                   [](const Piece& a, const Piece& b) { return a.h < b.h; });
  B.max_h_ = B.pieces_.back().h;

  B.h_start_.assign(static_cast<std::size_t>(B.max_h_) + 2, B.pieces_.size());
  for (std::size_t i = B.pieces_.size(); i-- > 0;) B.h_start_[B.pieces_[i].h] = i;
  for (int h = B.max_h_; h >= 0; --h) B.h_start_[h] = std::min(B.h_start_[h], B.h_start_[h + 1]);

  // weights inside each bin sum to one exactly
  B.bin_pieces_.assign(bins, {});
  for (std::size_t i = 0; i < B.pieces_.size(); ++i) B.bin_pieces_[B.pieces_[i].bin].push_back(static_cast<int>(i));
  for (int b = 0; b < bins; ++b) {
    double s = 0.0;
    for (int i : B.bin_pieces_[b]) s += B.pieces_[i].w;
    if (!(s > 0.0)) throw NumericError("operators.build_bundle", "bin " + std::to_string(b) + " not covered");
    for (int i : B.bin_pieces_[b]) B.pieces_[i].w /= s;
  }

  // bin chain and its stationary vector
  std::vector<double> Q(static_cast<std::size_t>(bins) * bins, 0.0);
  for (const auto& p : B.pieces_)
    for (std::size_t k = 0; k < p.row.size(); ++k) Q[static_cast<std::size_t>(p.bin) * bins + p.k0 + k] += p.w * p.row[k];

  std::vector<double> pi(bins, 1.0 / bins), nxt(bins);
  auto step = [&] {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (int j = 0; j < bins; ++j) {
      const double pj = pi[j];
      if (pj == 0.0) continue;
      const double* q = &Q[static_cast<std::size_t>(j) * bins];
      for (int k = 0; k < bins; ++k) nxt[k] += pj * q[k];
    }
    double s = std::accumulate(nxt.begin(), nxt.end(), 0.0);
    double diff = 0.0;
    for (int k = 0; k < bins; ++k) {
      nxt[k] /= s;
      diff += std::abs(nxt[k] - pi[k]);
    }
    pi.swap(nxt);
    return diff;
  };
  double res = 1.0;
  int it = 0, since = 0;
  double best = 1.0;
  bool reached = false;
  for (; it < opts.max_iter; ++it) {
    res = step();
    if (res <= opts.tol) reached = true;
    // polish past the tolerance until the residual stops improving
    if (reached) {
      if (res < 0.5 * best) since = 0;
      else ++since;
      if (res < 1e-15 || since > 20) break;
    }
    best = std::min(best, res);
  }
  if (!reached)
    throw NumericError("operators.build_bundle",
                       "power iteration did not reach " + std::to_string(opts.tol) + " (residual " + std::to_string(res) + ")");
  B.pi_bin_ = pi;
  B.iterations_ = it + 1;
  B.residual_ = res;

  for (auto& p : B.pieces_) p.pi = B.pi_bin_[p.bin] * p.w;
  B.tail_.assign(static_cast<std::size_t>(B.max_h_) + 1, 0.0);
  {
    std::vector<double> mass_h(static_cast<std::size_t>(B.max_h_) + 2, 0.0);
    for (const auto& p : B.pieces_) mass_h[p.h] += p.pi;
    double acc = 0.0;
    for (int n = B.max_h_; n >= 0; --n) {
      acc += mass_h[n + 1];
      B.tail_[n] = acc;
    }
  }

  // big images: smallest stationary mass of the image of a branch
  B.big_images_ = 1.0;
  {
    std::vector<std::vector<char>> hit(static_cast<std::size_t>(id) + 1);
    for (const auto& p : B.pieces_) {
      auto& hv = hit[p.branch];
      if (hv.empty()) hv.assign(bins, 0);
      for (std::size_t k = 0; k < p.row.size(); ++k)
        if (p.row[k] > 0) hv[p.k0 + k] = 1;
    }
    for (const auto& hv : hit) {
      if (hv.empty()) continue;
      double m = 0.0;
      for (int b = 0; b < bins; ++b)
        if (hv[b]) m += B.pi_bin_[b];
      B.big_images_ = std::min(B.big_images_, m);
    }
  }

  B.offsets_.resize(B.pieces_.size() + 1);
  B.offsets_[0] = 0;
  for (std::size_t i = 0; i < B.pieces_.size(); ++i) B.offsets_[i + 1] = B.offsets_[i] + B.pieces_[i].h;
  B.tower_size_ = B.offsets_.back();
  return B;
}

std::size_t OperatorBundle::h_begin(int h) const {
  if (h <= 0) return 0;
  if (h > max_h_) return pieces_.size();
  return h_start_[h];
}

double OperatorBundle::tail(std::int64_t n) const {
  if (n < 0) return 1.0;
  if (n > max_h_) return 0.0;
  return tail_[static_cast<std::size_t>(n)];
}

regvar::TailLaw OperatorBundle::tail_law(double beta) const {
  std::vector<double> ell;
  for (int n = 1; n < max_h_; ++n) ell.push_back(tail_[n] * std::pow(static_cast<double>(n), beta));
  if (ell.empty()) throw DomainError("tail law needs max height >= 2");
  regvar::TailLawOptions o;
  o.check_limit = std::max<std::int64_t>(2, static_cast<std::int64_t>(ell.size()));
  o.cache_size = static_cast<std::int64_t>(ell.size()) + 1;
  return regvar::TailLaw(beta, regvar::SlowlyVarying::table(std::move(ell)), std::nullopt, o);
}

double OperatorBundle::constant_defect() const {
  std::vector<double> mass(M_, 0.0);
  for (const auto& p : pieces_)
    for (std::size_t k = 0; k < p.row.size(); ++k) mass[p.k0 + k] += p.pi * p.row[k];
  double d = 0.0;
  for (int b = 0; b < M_; ++b)
    if (pi_bin_[b] > 0) d = std::max(d, std::abs(mass[b] / pi_bin_[b] - 1.0));
  return d;
}

double OperatorBundle::integrate(std::span<const double> v) const {
  double s = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) s += pieces_[i].pi * v[i];
  return s;
}

std::vector<double> OperatorBundle::lift_bins(std::span<const double> g) const {
  std::vector<double> out(pieces_.size());
  for (std::size_t i = 0; i < pieces_.size(); ++i) out[i] = g[pieces_[i].bin];
  return out;
}

OperatorBundle::TSeq OperatorBundle::T_sequence(std::span<const double> v, std::int64_t N) const {
  if (v.size() != pieces_.size()) throw DomainError("T_n: observable size does not match the bundle");
  if (N < 0) throw DomainError("T_n: negative n");
  TSeq T;
  T.g0.assign(v.begin(), v.end());
  T.g.assign(static_cast<std::size_t>(N) + 1, {});
  std::vector<double> acc(M_);
  for (std::int64_t n = 1; n <= N; ++n) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const int top = static_cast<int>(std::min<std::int64_t>(n, max_h_));
    const std::size_t end = h_begin(top + 1);
    for (std::size_t i = 0; i < end; ++i) {
      const Piece& p = pieces_[i];
      const std::int64_t m = n - p.h;
      double c = m == 0 ? T.g0[i] : T.g[m][p.bin];
      if (c == 0.0) continue;
      c *= p.pi;
      double* a = acc.data() + p.k0;
      const double* r = p.row.data();
      for (std::size_t k = 0; k < p.row.size(); ++k) a[k] += c * r[k];
    }
    auto& gn = T.g[n];
    gn.resize(M_);
    for (int b = 0; b < M_; ++b) gn[b] = pi_bin_[b] > 0 ? acc[b] / pi_bin_[b] : 0.0;
  }
  return T;
}

std::vector<double> OperatorBundle::T_n(std::span<const double> v, std::int64_t n) const {
  if (n == 0) return {v.begin(), v.end()};
  auto T = T_sequence(v, n);
  return lift_bins(T.g[n]);
}

std::vector<double> OperatorBundle::tower_zero() const {
  if (tower_size_ > kMaxTowerStates)
    throw TruncationError("operators.tower", "tower has " + std::to_string(tower_size_) + " states; lower h_max");
  return std::vector<double>(tower_size_, 0.0);
}

std::vector<double> OperatorBundle::apply_L(std::span<const double> g) const {
  auto out = tower_zero();
  std::vector<double> mass(M_, 0.0);
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const Piece& p = pieces_[i];
    const std::size_t o = offsets_[i];
    for (int l = 1; l < p.h; ++l) out[o + l] = g[o + l - 1];
    const double c = p.pi * g[o + p.h - 1];
    if (c == 0.0) continue;
    for (std::size_t k = 0; k < p.row.size(); ++k) mass[p.k0 + k] += c * p.row[k];
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    int b = pieces_[i].bin;
    out[offsets_[i]] = pi_bin_[b] > 0 ? mass[b] / pi_bin_[b] : 0.0;
  }
  return out;
}

std::vector<double> OperatorBundle::apply_K(std::span<const double> g) const {
  auto out = tower_zero();
  std::vector<double> avg(M_, 0.0);
  for (std::size_t i = 0; i < pieces_.size(); ++i) avg[pieces_[i].bin] += pieces_[i].w * g[offsets_[i]];
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const Piece& p = pieces_[i];
    const std::size_t o = offsets_[i];
    for (int l = 0; l + 1 < p.h; ++l) out[o + l] = g[o + l + 1];
    double s = 0.0;
    for (std::size_t k = 0; k < p.row.size(); ++k) s += p.row[k] * avg[p.k0 + k];
    out[o + p.h - 1] = s;
  }
  return out;
}

double OperatorBundle::tower_integral(std::span<const double> g) const {
  double s = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    double c = 0.0;
    for (int l = 0; l < pieces_[i].h; ++l) c += g[offsets_[i] + l];
    s += pieces_[i].pi * c;
  }
  return s;
}

std::vector<double> OperatorBundle::A_j(std::span<const double> v, int j) const {
  if (j < 0) throw DomainError("A_j: negative level");
  auto out = tower_zero();
  for (std::size_t i = h_begin(j + 1); i < pieces_.size(); ++i) out[offsets_[i] + j] = v[i];
  return out;
}

OperatorBundle::KoopmanProfile OperatorBundle::koopman_profile(std::span<const double> w0, int k) const {
  if (k < 0) throw DomainError("koopman profile: negative k");
  KoopmanProfile prof;
  prof.k = k;
  prof.w0.assign(w0.begin(), w0.end());
  prof.S.assign(static_cast<std::size_t>(k), {});
  std::vector<double> ret(M_);
  for (int m = 0; m < k; ++m) {
    std::fill(ret.begin(), ret.end(), 0.0);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const Piece& p = pieces_[i];
      double val = 0.0;
      if (m == 0) val = w0[i];
      else if (p.h <= m) val = prof.S[m - p.h][i];
      ret[p.bin] += p.w * val;
    }
    auto& S = prof.S[m];
    S.resize(pieces_.size());
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const Piece& p = pieces_[i];
      double s = 0.0;
      for (std::size_t q = 0; q < p.row.size(); ++q) s += p.row[q] * ret[p.k0 + q];
      S[i] = s;
    }
  }
  return prof;
}

double OperatorBundle::pulled_back(const KoopmanProfile& prof, std::size_t piece, int j) const {
  const Piece& p = pieces_[piece];
  if (j < 0 || j >= p.h) return 0.0;
  if (prof.k == 0) return j == 0 ? prof.w0[piece] : 0.0;
  const int r = p.h - j;
  if (r < 1 || r > prof.k) return 0.0;
  return prof.S[prof.k - r][piece];
}

double OperatorBundle::level_return_mass(const KoopmanProfile& prof_one, int j) const {
  double s = 0.0;
  if (prof_one.k == 0) {
    if (j == 0)
      for (std::size_t i = 0; i < pieces_.size(); ++i) s += pieces_[i].pi * prof_one.w0[i];
  } else {
    const std::size_t lo = h_begin(j + 1), hi = h_begin(j + prof_one.k + 1);
    for (std::size_t i = lo; i < hi; ++i) s += pieces_[i].pi * pulled_back(prof_one, i, j);
  }
  return fault::perturb_level_mass(s, j);
}

std::vector<double> cylinder_potentials(const OperatorBundle& b) {
  std::vector<double> out(static_cast<std::size_t>(b.max_height()) + 1, -INFINITY);
  for (int h = 1; h <= b.max_height(); ++h) {
    double m = 0.0;
    for (std::size_t i = b.h_begin(h); i < b.h_begin(h + 1); ++i) m += b.pieces()[i].pi;
    if (m > 0) out[h] = std::log(m);
  }
  return out;
}

ConvolutionReport convolution_check(const OperatorBundle& b, std::int64_t n_max, std::uint64_t seed, int random_tests) {
  if (n_max < 0) throw DomainError("convolution_check: negative n_max");
  ConvolutionReport r;
  r.defect_by_n.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  std::vector<std::vector<double>> tests;
  tests.emplace_back(b.piece_count(), 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < random_tests; ++t) {
    std::vector<double> v(b.piece_count());
    for (auto& x : v) x = u(rng);
    tests.push_back(std::move(v));
  }
  const auto& P = b.pieces();
  for (const auto& v : tests) {
    auto T = b.T_sequence(v, n_max);
    auto g = b.A_j(v, 0);
    for (std::int64_t n = 0; n <= n_max; ++n) {
      double d = 0.0;
      for (std::size_t i = 0; i < P.size(); ++i) {
        const std::size_t o = b.offset(i);
        for (int l = 0; l < P[i].h; ++l) {
          double rhs = l <= n ? T.at(n - l, P[i], i) : 0.0;
          d = std::max(d, std::abs(g[o + l] - rhs));
        }
      }
      auto& slot = r.defect_by_n[n];
      slot = std::max(slot, d);
      if (d > r.max_defect) {
        r.max_defect = d;
        r.worst_n = n;
      }
      if (n < n_max) g = b.apply_L(g);
    }
  }
  // truncated partition of unity over levels 0..h_max
  const int J = b.h_max();
  for (const auto& p : P) r.discarded_mass += p.pi * std::max(0, p.h - 1 - J);
  {
    std::vector<double> ones(b.piece_count(), 1.0);
    std::vector<double> sum(b.tower_size(), 0.0);
    for (int j = 0; j <= std::min(J, b.max_height() - 1); ++j) {
      for (std::size_t i = b.h_begin(j + 1); i < P.size(); ++i) sum[b.offset(i) + j] += ones[i];
    }
    double d = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i)
      for (int l = 0; l < P[i].h; ++l) d += P[i].pi * std::abs(1.0 - sum[b.offset(i) + l]);
    r.partition_defect = d;
  }
  r.truncation_mass = b.tail(J);
  return r;
}

LevelMassReport check_level_mass(const OperatorBundle& b, int j_max, int k_max) {
  LevelMassReport r;
  std::vector<double> ones(b.piece_count(), 1.0);
  for (int k = 1; k <= k_max; ++k) {
    auto prof = b.koopman_profile(ones, k);
    for (int j = 0; j <= j_max; ++j) {
      double lhs = b.level_return_mass(prof, j);
      double rhs = b.tail(j) - b.tail(j + k);
      ++r.checked;
      if (rhs > 0) r.max_slack_ratio = std::max(r.max_slack_ratio, lhs / rhs);
      if (lhs > rhs * (1 + 1e-12) + 1e-15) {
        if (r.violations == 0) {
          r.witness_j = j;
          r.witness_k = k;
          r.witness_lhs = lhs;
          r.witness_rhs = rhs;
        }
        ++r.violations;
      }
    }
  }
  return r;
}

double theta_norm(const OperatorBundle& b, std::span<const double> v, double theta) {
  const auto& P = b.pieces();
  double sup = 0.0, lo = INFINITY, hi = -INFINITY;
  double within = 0.0;
  std::size_t i = 0;
  while (i < P.size()) {
    std::size_t j = i;
    double blo = INFINITY, bhi = -INFINITY;
    while (j < P.size() && P[j].branch == P[i].branch) {
      blo = std::min(blo, v[j]);
      bhi = std::max(bhi, v[j]);
      ++j;
    }
    within = std::max(within, bhi - blo);
    lo = std::min(lo, blo);
    hi = std::max(hi, bhi);
    sup = std::max({sup, std::abs(blo), std::abs(bhi)});
    i = j;
  }
  if (P.empty()) return 0.0;
  return sup + std::max(hi - lo, within / theta);
}

std::vector<std::vector<double>> test_family(const OperatorBundle& b, int depth, int random_count, double theta,
                                             std::uint64_t seed) {
  const auto& P = b.pieces();
  std::vector<std::vector<double>> fam;
  fam.emplace_back(P.size(), 1.0);
  for (int h = 1; h <= depth && h <= b.max_height(); ++h) {
    std::vector<double> v(P.size(), 0.0);
    for (std::size_t i = b.h_begin(h); i < b.h_begin(h + 1); ++i) v[i] = 1.0;
    fam.push_back(std::move(v));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int branches = P.empty() ? 0 : P.back().branch + 1;
  for (int t = 0; t < random_count; ++t) {
    std::vector<double> lvl(static_cast<std::size_t>(branches));
    for (auto& x : lvl) x = u(rng);
    double amp = 0.5 * theta * std::abs(u(rng));
    double freq = 1.0 + 4.0 * std::abs(u(rng));
    std::vector<double> v(P.size());
    for (std::size_t i = 0; i < P.size(); ++i) {
      double mid = 0.5 * (P[i].lo + P[i].hi);
      v[i] = lvl[P[i].branch] + amp * std::sin(2.0 * M_PI * freq * mid);
    }
    double nv = theta_norm(b, v, theta);
    for (auto& x : v) x /= nv;
    fam.push_back(std::move(v));
  }
  return fam;
}

std::vector<UnormReport> U_n_minus_P_norm(const OperatorBundle& b, const regvar::TailLaw& law,
                                          std::span<const std::int64_t> ns, int depth, int random_count,
                                          double theta, std::uint64_t seed) {
  if (ns.empty()) return {};
  const std::int64_t N = *std::max_element(ns.begin(), ns.end());
  auto a = regvar::a_seq(law, N);
  auto fam = test_family(b, depth, random_count, theta, seed);
  std::vector<UnormReport> out(ns.size());
  for (std::size_t t = 0; t < ns.size(); ++t) {
    out[t].n = ns[t];
    out[t].discretization_gap = b.constant_defect() * a[ns[t]] * static_cast<double>(ns[t]);
  }
  for (std::size_t f = 0; f < fam.size(); ++f) {
    const auto& v = fam[f];
    const double V = b.integrate(v);
    const double nv = theta_norm(b, v, theta);
    auto T = b.T_sequence(v, N);
    for (std::size_t t = 0; t < ns.size(); ++t) {
      const std::int64_t n = ns[t];
      std::vector<double> d(b.piece_count());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[n] * T.at(n, b.pieces()[i], i) - V;
      double val = nv > 0 ? theta_norm(b, d, theta) / nv : 0.0;
      out[t].lower_bound = std::max(out[t].lower_bound, val);
      if (f == 0) {
        double s = 0.0;
        for (double x : d) s = std::max(s, std::abs(x));
        out[t].sup_on_constants = s;
      }
    }
  }
  return out;
}

// ---- E-terms ----

ETermEngine::ETermEngine(const OperatorBundle& b, const regvar::TailLaw& law, std::vector<double> v, std::int64_t n_max)
    : b_(b), law_(law), v_(std::move(v)), n_max_(n_max) {
  if (v_.size() != b.piece_count()) throw DomainError("eterms: observable size does not match the bundle");
  T_ = b.T_sequence(v_, n_max);
  a_ = regvar::a_seq(law, n_max);
  V_ = b.integrate(v_);
}

ETermReport ETermEngine::evaluate(std::span<const double> w0, int k, std::int64_t n) const {
  if (k < 0 || 3 * static_cast<std::int64_t>(k) > n)
    throw DomainError("eterms: need 0 <= k <= n/3 (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  if (n > n_max_) throw DomainError("eterms: n beyond the precomputed range");
  const auto& P = b_.pieces();
  ETermReport r;
  r.k = k;
  r.n = n;
  const double an = a_[n];

  for (std::size_t i = 0; i < P.size(); ++i) r.lhs += P[i].pi * (an * T_.at(n, P[i], i) - V_) * w0[i];

  auto prof = b_.koopman_profile(w0, k);
  std::vector<double> ones(P.size(), 1.0);
  auto prof_one = b_.koopman_profile(ones, k);

  // pieces whose level j can be pulled back onto the base within k steps
  auto range = [&](std::int64_t j) -> std::pair<std::size_t, std::size_t> {
    if (k == 0) return {0, j == 0 ? P.size() : 0};
    auto cap = [&](std::int64_t h) { return static_cast<int>(std::min<std::int64_t>(h, b_.max_height() + 1)); };
    return {b_.h_begin(cap(j + 1)), b_.h_begin(cap(j + k + 1))};
  };

  for (std::int64_t j = 0; j <= n - k; ++j) {
    const std::int64_t m = n - k - j;
    const double am = a_[m];
    auto [lo, hi] = range(j);
    double e1 = 0.0, e2 = 0.0, mass = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double W = b_.pulled_back(prof, i, static_cast<int>(j));
      const double G = T_.at(m, P[i], i);
      e1 += P[i].pi * (am * G - V_) * W;
      e2 += P[i].pi * (an - am) * G * W;
      mass += P[i].pi * b_.pulled_back(prof_one, i, static_cast<int>(j));
    }
    r.e1 += e1;
    r.e2 += e2;
    const double term = mass * std::abs(an / am - 1.0);
    if (2 * j <= n) r.e2p += term;
    else r.e2pp += term;
  }
  for (std::int64_t j = n - k + 1; j < b_.max_height(); ++j) {
    auto [lo, hi] = range(j);
    for (std::size_t i = lo; i < hi; ++i) r.e3 += P[i].pi * V_ * b_.pulled_back(prof, i, static_cast<int>(j));
  }
  r.identity_defect = std::abs(r.lhs - (r.e1 + r.e2 - r.e3));

  const double beta = law_.beta();
  const double nn = static_cast<double>(n);
  const double l = law_.ell()(nn);
  const double kk = static_cast<double>(k);
  if (beta < 1.0) r.env_e2pp = kk * l * l * std::pow(nn, -(2 * beta - 1));
  else r.env_e2pp = kk * regvar::tilde_ell(law_, n).partial * l / nn;
  r.env_e3 = kk * l * std::pow(nn, -beta);
  const double q = law_.q().value_or(1.0);
  r.env_smooth = q < 1.0 ? kk * l * std::pow(nn, -(beta + 2 * q - 2)) : kk * l * std::pow(nn, -beta) * std::log(nn);
  r.env_log = kk * kk / nn + kk * l * std::pow(nn, -beta) * std::log(nn);
  return r;
}

}  // namespace infmix::operators
