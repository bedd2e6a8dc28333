#pragma once

#include <span>
#include <vector>

namespace infmix::stats {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Least squares y ~ X b, columns of X given as rows of `cols`.
std::vector<double> least_squares(const std::vector<std::vector<double>>& cols, std::span<const double> y);

struct BatchMean {
  double mean = 0.0;
  double se = 0.0;
  double half95 = 0.0;
};

// Mean over equally weighted batch values with Student-t 95% half width.
BatchMean batch_mean(std::span<const double> batches);

double t_quantile_975(int dof);

}  // namespace infmix::stats
