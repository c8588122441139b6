#pragma once
// Random vectors and a central-difference gradient check shared by the model
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <vector>

#include "recipro/model.hpp"
#include "recipro/rng.hpp"

namespace numeric {

using namespace recipro;

inline double gaussian(Rng& rng) {
  // Box-Muller; portable unlike std::normal_distribution.
  const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline DenseVector random_dense(Rng& rng, std::size_t dim, double scale = 1.0) {
  DenseVector v(dim);
  for (auto& x : v) x = scale * gaussian(rng);
  return v;
}

inline SparseVector random_sparse(Rng& rng, std::uint32_t dim, std::size_t nnz) {
  std::set<std::uint32_t> idx;
  while (idx.size() < nnz) idx.insert(static_cast<std::uint32_t>(uniform_below(rng, dim)));
  SparseVector v;
  for (auto i : idx) v.entries.push_back({i, gaussian(rng)});
  return v;
}

// Plain definition: -[y log p + (1-y) log(1-p)] averaged, plus l2/2 |w|^2.
template <typename Vec>
double naive_objective(const std::vector<double>& w, double b, const std::vector<Vec>& xs,
                       const std::vector<double>& ys, double l2) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(dot(std::span<const double>(w), xs[i]) + b)));
    total += -(ys[i] * std::log(p) + (1 - ys[i]) * std::log(1 - p));
  }
  double sq = 0.0;
  for (double x : w) sq += x * x;
  return total / static_cast<double>(xs.size()) + 0.5 * l2 * sq;
}

template <typename Vec>
double gradient_check(const std::vector<double>& w, double b, const std::vector<Vec>& xs,
                      const std::vector<double>& ys, double l2) {
  std::vector<double> g(w.size());
  double gb = 0.0;
  objective_gradient(std::span<const double>(w), b, std::span<const Vec>(xs), std::span<const double>(ys), l2,
                     std::span<double>(g), gb);
  auto f = [&](const std::vector<double>& ww, double bb) {
    return objective(std::span<const double>(ww), bb, std::span<const Vec>(xs), std::span<const double>(ys), l2);
  };
  const double h = 1e-6;
  double diff = 0.0, na = 0.0, nn = 0.0;
  auto wp = w;
  for (std::size_t k = 0; k < w.size(); ++k) {
    wp[k] = w[k] + h;
    const double up = f(wp, b);
    wp[k] = w[k] - h;
    const double down = f(wp, b);
    wp[k] = w[k];
    const double fd = (up - down) / (2 * h);
    diff += (fd - g[k]) * (fd - g[k]);
    na += g[k] * g[k];
    nn += fd * fd;
  }
  const double fd_b = (f(w, b + h) - f(w, b - h)) / (2 * h);
  diff += (fd_b - gb) * (fd_b - gb);
  na += gb * gb;
  nn += fd_b * fd_b;
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

}  // namespace numeric
