#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "splitgan/autodiff.hpp"
#include "splitgan/rng.hpp"
#include "splitgan/tensor.hpp"

namespace testutil {

using splitgan::Rng;
using splitgan::Tensor;

// ||a-b||_2 / max(||a||_2, ||b||_2, 1e-12)
inline double rel_err(const Tensor& a, const Tensor& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central finite differences of a scalar function of one tensor argument.
// The independent oracle used against every backward rule.
inline Tensor fd_grad(const std::function<double(const Tensor&)>& f, Tensor x,
                      double h = 1e-6) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace testutil
