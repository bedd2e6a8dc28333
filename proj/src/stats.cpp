#include "infmix/stats.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "infmix/error.hpp"

namespace infmix::stats {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_line needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) throw DomainError("fit_line: degenerate abscissae");
  LineFit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - f.intercept - f.slope * x[i];
    rss += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - rss / syy : 1.0;
  f.slope_se = x.size() > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

std::vector<double> least_squares(const std::vector<std::vector<double>>& cols, std::span<const double> y) {
  const auto m = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(cols.size());
  if (k == 0 || m < k) throw DomainError("least_squares: too few rows");
  Eigen::MatrixXd X(m, k);
  Eigen::VectorXd b(m);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (static_cast<Eigen::Index>(cols[j].size()) != m) throw DomainError("least_squares: ragged columns");
    for (Eigen::Index i = 0; i < m; ++i) X(i, j) = cols[j][i];
  }
  for (Eigen::Index i = 0; i < m; ++i) b(i) = y[i];
  Eigen::VectorXd sol = X.colPivHouseholderQr().solve(b);
  return {sol.data(), sol.data() + sol.size()};
}

double t_quantile_975(int dof) {
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 0.975);
}

BatchMean batch_mean(std::span<const double> batches) {
  BatchMean r;
  const auto n = batches.size();
  if (n == 0) return r;
  for (double v : batches) r.mean += v;
  r.mean /= static_cast<double>(n);
  if (n < 2) return r;
  double ss = 0;
  for (double v : batches) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  r.half95 = t_quantile_975(static_cast<int>(n) - 1) * r.se;
  return r;
}

}  // namespace infmix::stats
