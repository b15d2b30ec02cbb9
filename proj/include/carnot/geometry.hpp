#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "carnot/error.hpp"

namespace carnot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Formal weights sigma_1 = 1 <= sigma_2 <= ... <= sigma_N of a sorted basis.
class Weights {
 public:
  Weights() = default;

  explicit Weights(std::vector<double> sigma) : sigma_(std::move(sigma)) {
    if (sigma_.empty()) throw InvalidWeights("weights must be non-empty");
    for (double s : sigma_)
      if (!(s > 0.0) || !std::isfinite(s)) throw InvalidWeights("weights must be positive and finite");
    if (sigma_.front() != 1.0) throw InvalidWeights("the first weight must be 1");
    if (!std::is_sorted(sigma_.begin(), sigma_.end()))
      throw InvalidWeights("weights must be nondecreasing (sort the basis by weight)");
  }

  Weights(std::initializer_list<double> sigma) : Weights(std::vector<double>(sigma)) {}

  int dim() const noexcept { return static_cast<int>(sigma_.size()); }
  double operator[](int k) const { return sigma_[static_cast<std::size_t>(k)]; }
  double depth() const noexcept { return sigma_.back(); }
  const std::vector<double>& values() const noexcept { return sigma_; }

  bool operator==(const Weights&) const = default;

 private:
  std::vector<double> sigma_;
};

namespace detail {
inline double scale_pow(double eps, double s) {
  if (s == 1.0) return eps;
  if (s == 2.0) return eps * eps;
  if (s == 3.0) return eps * eps * eps;
  return std::pow(eps, s);
}
}  // namespace detail

/// delta_eps x = (eps^{sigma_1} x_1, ..., eps^{sigma_N} x_N).
inline Vec dilate(const Vec& x, double eps, const Weights& w) {
  if (!(eps > 0.0)) throw NonpositiveEpsilon("dilation parameter must be positive");
  Vec y(x.size());
  for (int k = 0; k < x.size(); ++k) y[k] = detail::scale_pow(eps, w[k]) * x[k];
  return y;
}

/// Inverse dilation applied to a rescaled quantity: x_k / eps^{sigma_k}.
inline Vec undilate(const Vec& x, double eps, const Weights& w) {
  if (!(eps > 0.0)) throw NonpositiveEpsilon("dilation parameter must be positive");
  Vec y(x.size());
  for (int k = 0; k < x.size(); ++k) y[k] = x[k] / detail::scale_pow(eps, w[k]);
  return y;
}

/// max_k |x_k|^{1/sigma_k}.
inline double quasinorm(const Vec& x, const Weights& w) {
  double q = 0.0;
  for (int k = 0; k < x.size(); ++k) {
    const double a = std::fabs(x[k]);
    double r;
    if (w[k] == 1.0) r = a;
    else if (w[k] == 2.0) r = std::sqrt(a);
    else r = std::pow(a, 1.0 / w[k]);
    q = std::max(q, r);
  }
  return q;
}

inline bool in_box(const Vec& x, double radius, const Weights& w) { return quasinorm(x, w) <= radius; }

struct MultiIndex {
  std::vector<int> alpha;

  int order() const {
    int n = 0;
    for (int a : alpha) n += a;
    return n;
  }

  double weight(const Weights& w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * w[static_cast<int>(i)];
    return s;
  }

  /// alpha! = prod alpha_i!
  double factorial() const {
    double f = 1.0;
    for (int a : alpha)
      for (int j = 2; j <= a; ++j) f *= j;
    return f;
  }

  bool operator==(const MultiIndex&) const = default;
};

namespace detail {
inline std::vector<MultiIndex> enumerate_below(const Weights& w, double bound) {
  std::vector<MultiIndex> out;
  const int n = w.dim();
  std::vector<int> alpha(static_cast<std::size_t>(n), 0);
  std::function<void(int, double)> rec = [&](int i, double used) {
    if (i == n) {
      out.push_back(MultiIndex{alpha});
      return;
    }
    for (int a = 0; used + a * w[i] < bound - 1e-12; ++a) {
      alpha[static_cast<std::size_t>(i)] = a;
      rec(i + 1, used + a * w[i]);
    }
    alpha[static_cast<std::size_t>(i)] = 0;
  };
  if (bound > 0.0) rec(0, 0.0);
  std::sort(out.begin(), out.end(), [&](const MultiIndex& a, const MultiIndex& b) {
    const double wa = a.weight(w), wb = b.weight(w);
    if (wa != wb) return wa < wb;
    return a.alpha > b.alpha;
  });
  return out;
}
}  // namespace detail

/// All alpha with sigma(alpha) < bound, ordered by weight, then lexicographically
/// with larger leading entries first.
inline std::vector<MultiIndex> multiindices_below(const Weights& w, double bound) {
  if (bound > w.depth() + 1.0 + 1e-12) throw InvalidWeights("multiindex bound exceeds depth + 1");
  return detail::enumerate_below(w, bound);
}

/// Multiindices with sigma(alpha) == target exactly.
inline std::vector<MultiIndex> multiindices_of_weight(const Weights& w, double target) {
  std::vector<MultiIndex> out;
  for (auto& a : detail::enumerate_below(w, target + 0.5))
    if (std::fabs(a.weight(w) - target) < 1e-12) out.push_back(std::move(a));
  return out;
}

}  // namespace carnot
