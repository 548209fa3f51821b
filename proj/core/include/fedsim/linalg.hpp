#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedsim/errors.hpp"

// Dense vector helpers used throughout. Plain loops over std::vector<double>
// keep the arithmetic order explicit, which the reproducibility guarantees
// rely on.

namespace fedsim {

using ParamVec = std::vector<double>;

inline void check_same_size(const ParamVec& a, const ParamVec& b,
                            const char* where) {
  if (a.size() != b.size())
    throw ShapeError(std::string(where) + ": size mismatch (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
}

// y += a * x
inline void axpy(ParamVec& y, double a, const ParamVec& x) {
  check_same_size(y, x, "axpy");
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline ParamVec scaled(const ParamVec& x, double a) {
  ParamVec y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = a * x[i];
  return y;
}

inline ParamVec vec_sub(const ParamVec& a, const ParamVec& b) {
  check_same_size(a, b, "vec_sub");
  ParamVec d(a.size());
  for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

inline double dot(const ParamVec& a, const ParamVec& b) {
  check_same_size(a, b, "dot");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sq_l2(const ParamVec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double l2(const ParamVec& a) { return std::sqrt(sq_l2(a)); }

inline bool all_finite(const ParamVec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace fedsim
