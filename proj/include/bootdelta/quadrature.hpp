#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace bootdelta {

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

/**
 * Adaptive 31-point Gauss-Kronrod on [a, b]; either end may be infinite.
 * On finite intervals where Gauss-Kronrod stalls (endpoint singularities such
 * as s^c), tanh-sinh is tried and kept when its error estimate is smaller.
 */
template <class F>
Integral integrate(F&& f, double a, double b, double rel_tol = 1e-13, unsigned max_depth = 18) {
  if (a == b) return {};
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel_tol, &err);
  if (!std::isfinite(a) || !std::isfinite(b) || err <= 1e-12 * std::max(1.0, std::abs(v))) return {v, err};
  try {
    double ts_err = 0.0;
    const double ts = boost::math::quadrature::tanh_sinh<double>().integrate(f, a, b, rel_tol, &ts_err);
    if (std::isfinite(ts) && ts_err < err) return {ts, ts_err};
  } catch (const std::exception&) {
  }
  return {v, err};
}

/**
 * Integral over [a, b] split at the given interior points. Integrands with
 * kinks or jumps converge far faster when the splits land on them.
 */
template <class F>
Integral integrate_split(F&& f, double a, double b, std::vector<double> splits, double rel_tol = 1e-13) {
  std::vector<double> pts;
  pts.reserve(splits.size() + 2);
  pts.push_back(a);
  for (double s : splits)
    if (s > a && s < b && std::isfinite(s)) pts.push_back(s);
  pts.push_back(b);
  std::sort(pts.begin() + 1, pts.end() - 1);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  Integral total;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Integral piece = integrate(f, pts[i], pts[i + 1], rel_tol);
    total.value += piece.value;
    total.error += piece.error;
  }
  return total;
}

}  // namespace bootdelta
