#pragma once

// Least-squares fit of y = a + b * x^c.
//
// For fixed c the model is linear in (a, b), so the fit is a 1-D search over
// c. The search uses the basis (x^c - 1)/c, which tends to ln x as c -> 0,
// so the c = 0 neighbourhood stays well conditioned.

#include <span>
#include <vector>

#include "wukong/config.hpp"

namespace wukong {

struct PowerLawFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  // Set when the best fit sits at c = 0 exactly: then y = a + b ln x.
  bool logarithmic = false;
  double residual_rms = 0.0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> residuals;

  double predict(double xv) const;
  json to_json() const;
};

// Needs >= 4 points with positive, pairwise distinct x. Constant y returns
// a = y, b = 0, c = 0.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

}  // namespace wukong
