#include "wukong/power_law.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/tools/minima.hpp>

#include "wukong/errors.hpp"

namespace wukong {

namespace {

struct Inner {
  double a1 = 0.0;  // intercept in the (x^c - 1)/c basis
  double b1 = 0.0;  // slope in that basis
  double sse = 0.0;
};

double basis(double log_x, double c) { return c == 0.0 ? log_x : std::expm1(c * log_x) / c; }

// d basis / dc
double basis_dc(double log_x, double c) {
  if (c == 0.0) return 0.5 * log_x * log_x;
  return (log_x * std::exp(c * log_x) - basis(log_x, c)) / c;
}

Inner solve_inner(const std::vector<double>& log_x, std::span<const double> y, double c) {
  const std::size_t n = y.size();
  std::vector<double> g(n);
  double gm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = basis(log_x[i], c);
    gm += g[i];
    ym += y[i];
  }
  gm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (g[i] - gm) * (g[i] - gm);
    sxy += (g[i] - gm) * (y[i] - ym);
  }
  Inner r;
  r.b1 = sxx > 0.0 ? sxy / sxx : 0.0;
  r.a1 = ym - r.b1 * gm;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - r.a1 - r.b1 * g[i];
    r.sse += e * e;
  }
  if (!std::isfinite(r.sse)) r.sse = std::numeric_limits<double>::infinity();
  return r;
}

// Gauss-Newton on (a1, b1, c) jointly. Brent only locates c to about
// sqrt(eps) of the bracket; a few full steps take it to rounding level.
double polish(const std::vector<double>& log_x, std::span<const double> y, double c) {
  Inner cur = solve_inner(log_x, y, c);
  for (int it = 0; it < 8; ++it) {
    double jtj[3][3] = {}, jtr[3] = {};
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double j[3] = {1.0, basis(log_x[i], c), cur.b1 * basis_dc(log_x[i], c)};
      const double r = y[i] - cur.a1 - cur.b1 * j[1];
      for (int p = 0; p < 3; ++p) {
        jtr[p] += j[p] * r;
        for (int q = 0; q < 3; ++q) jtj[p][q] += j[p] * j[q];
      }
    }
    // Cramer's rule on the 3x3 normal equations.
    const auto det3 = [](const double m[3][3]) {
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double det = det3(jtj);
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) break;
    // Only the c component is needed; a1, b1 are re-solved exactly.
    double m[3][3];
    for (int p = 0; p < 3; ++p) {
      m[p][0] = jtj[p][0];
      m[p][1] = jtj[p][1];
      m[p][2] = jtr[p];
    }
    const double dc = det3(m) / det;
    const double next = c + dc;
    const Inner trial = solve_inner(log_x, y, next);
    if (!std::isfinite(next) || !(trial.sse <= cur.sse)) break;
    const bool done = dc == 0.0 || trial.sse == cur.sse;
    c = next;
    cur = trial;
    if (done) break;
  }
  return c;
}

}  // namespace

double PowerLawFit::predict(double xv) const {
  if (logarithmic) return a + b * std::log(xv);
  return a + b * std::pow(xv, c);
}

json PowerLawFit::to_json() const {
  return json{{"a", a},       {"b", b}, {"c", c}, {"logarithmic", logarithmic}, {"residual_rms", residual_rms},
              {"x", x},       {"y", y}, {"residuals", residuals}};
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("power-law fit: x and y differ in length");
  if (x.size() < 4) throw DataError("power-law fit: needs at least 4 points, got " + std::to_string(x.size()));
  std::set<double> distinct;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !std::isfinite(x[i])) throw DataError("power-law fit: x must be positive and finite");
    if (!std::isfinite(y[i])) throw DataError("power-law fit: y must be finite");
    if (!distinct.insert(x[i]).second) throw DataError("power-law fit: x values must be distinct");
  }
  PowerLawFit fit;
  fit.x.assign(x.begin(), x.end());
  fit.y.assign(y.begin(), y.end());
  const std::size_t n = x.size();

  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
    fit.a = y[0];
    fit.residuals.assign(n, 0.0);
    return fit;
  }

  std::vector<double> log_x(n);
  for (std::size_t i = 0; i < n; ++i) log_x[i] = std::log(x[i]);
  const auto sse = [&](double c) { return solve_inner(log_x, y, c).sse; };

  // Coarse scan over signed log-spaced exponents, then Brent on the bracket.
  std::vector<double> grid{0.0};
  constexpr int kSteps = 64;
  for (int s = 0; s <= kSteps; ++s) {
    const double mag = std::pow(10.0, -6.0 + 7.0 * s / kSteps);
    grid.push_back(mag);
    grid.push_back(-mag);
  }
  std::sort(grid.begin(), grid.end());
  std::size_t best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = sse(grid[i]);
    if (v < best_sse) {
      best_sse = v;
      best = i;
    }
  }
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  double c = grid[best];
  if (lo < hi) {
    const auto [c_min, f_min] = boost::math::tools::brent_find_minima(sse, lo, hi, std::numeric_limits<double>::digits);
    if (f_min <= best_sse) c = c_min;
  }
  c = polish(log_x, y, c);
  // A vanishing exponent is reported as the logarithmic limit: converting a
  // tiny c back to a + b x^c would cancel catastrophically.
  double ym = 0.0, sst = 0.0;
  for (double v : y) ym += v / static_cast<double>(n);
  for (double v : y) sst += (v - ym) * (v - ym);
  if (c != 0.0 && sse(0.0) <= sse(c) + 1e-12 * sst) c = 0.0;

  const Inner in = solve_inner(log_x, y, c);
  fit.c = c;
  if (c == 0.0) {
    fit.logarithmic = true;
    fit.a = in.a1;
    fit.b = in.b1;
  } else {
    fit.a = in.a1 - in.b1 / c;
    fit.b = in.b1 / c;
  }
  fit.residuals.resize(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fit.residuals[i] = y[i] - (in.a1 + in.b1 * basis(log_x[i], c));
    sq += fit.residuals[i] * fit.residuals[i];
  }
  fit.residual_rms = std::sqrt(sq / static_cast<double>(n));
  return fit;
}

}  // namespace wukong
