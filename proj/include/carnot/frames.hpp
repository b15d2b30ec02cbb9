#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "carnot/error.hpp"
#include "carnot/expr.hpp"
#include "carnot/geometry.hpp"
#include "carnot/parallel.hpp"

namespace carnot {

/// X = sum_j a_j d/dx_j.
class VectorField {
 public:
  VectorField() = default;

  explicit VectorField(std::vector<Expr> coeffs) : coeffs_(std::move(coeffs)) {
    for (std::size_t j = 0; j < coeffs_.size(); ++j)
      if (!coeffs_[j].is_constant(0.0)) active_.push_back({static_cast<int>(j), CompiledExpr(coeffs_[j])});
  }

  /// Parses N coefficient strings over x1..xN.
  static VectorField parse(const std::vector<std::string>& coeffs) {
    std::vector<Expr> e;
    for (const auto& c : coeffs) e.push_back(carnot::parse(c, static_cast<int>(coeffs.size())));
    return VectorField(std::move(e));
  }

  /// The coordinate field d/dx_{k+1} in dimension n.
  static VectorField coordinate(int k, int n) {
    std::vector<Expr> e(static_cast<std::size_t>(n), Expr(0.0));
    e[static_cast<std::size_t>(k)] = Expr(1.0);
    return VectorField(std::move(e));
  }

  int dim() const noexcept { return static_cast<int>(coeffs_.size()); }
  const Expr& coeff(int j) const { return coeffs_.at(static_cast<std::size_t>(j)); }
  const std::vector<Expr>& coeffs() const noexcept { return coeffs_; }
  bool is_zero() const noexcept { return active_.empty(); }

  Vec operator()(const Vec& x) const {
    Vec out = Vec::Zero(dim());
    accumulate(x, 1.0, out);
    return out;
  }

  /// out += scale * X(x)
  void accumulate(const Vec& x, double scale, Vec& out) const {
    const std::span<const double> p(x.data(), static_cast<std::size_t>(x.size()));
    for (const auto& a : active_) out[a.index] += scale * a.fn(p);
  }

  std::vector<std::string> to_strings() const {
    std::vector<std::string> s;
    for (const auto& c : coeffs_) s.push_back(to_string(c));
    return s;
  }

 private:
  struct Active {
    int index;
    CompiledExpr fn;
  };
  std::vector<Expr> coeffs_;
  std::vector<Active> active_;
};

/// [X, Y]_j = sum_i (a_i d_i b_j - b_i d_i a_j).
inline VectorField commutator(const VectorField& X, const VectorField& Y) {
  if (X.dim() != Y.dim()) throw Error("commutator: dimension mismatch");
  const int n = X.dim();
  std::vector<Expr> c(static_cast<std::size_t>(n), Expr(0.0));
  for (int j = 0; j < n; ++j) {
    Expr s(0.0);
    for (int i = 0; i < n; ++i) {
      s = s + X.coeff(i) * derive(Y.coeff(j), i);
      s = s - Y.coeff(i) * derive(X.coeff(j), i);
    }
    c[static_cast<std::size_t>(j)] = s;
  }
  return VectorField(std::move(c));
}

/// A local basis X_1..X_N with weights, base point p and working radius r0.
class WeightedFrame {
 public:
  WeightedFrame() = default;

  WeightedFrame(std::vector<VectorField> fields, Weights weights, Vec base_point = Vec(), double radius = 1.0)
      : fields_(std::move(fields)), weights_(std::move(weights)), base_(std::move(base_point)), radius_(radius) {
    const int n = weights_.dim();
    if (static_cast<int>(fields_.size()) != n) throw InputError("frame needs one field per weight");
    for (const auto& f : fields_)
      if (f.dim() != n) throw InputError("field dimension does not match the number of weights");
    if (base_.size() == 0) base_ = Vec::Zero(n);
    if (base_.size() != n) throw InputError("base point dimension mismatch");
    if (!(radius_ > 0.0)) throw InputError("working radius must be positive");
    std::vector<Mat> probes;
    try {
      probes.push_back(matrix_at(base_));
    } catch (const DomainError&) {
      // coefficients defined by continuity at p: probe nearby points instead
      for (double sign : {1.0, -1.0}) {
        Vec q = base_;
        for (int k = 0; k < n; ++k) q[k] += sign * 1e-8 * (1.0 + 0.37 * k);
        try {
          probes.push_back(matrix_at(q));
        } catch (const DomainError& e) {
          throw SingularFrame(std::string("frame not evaluable near the base point: ") + e.what());
        }
      }
    }
    for (const Mat& A : probes) {
      Eigen::JacobiSVD<Mat> svd(A);
      const auto& s = svd.singularValues();
      if (!(s[n - 1] > 1e-12 * std::max(1.0, s[0])))
        throw SingularFrame("fields are linearly dependent at the base point");
    }
  }

  int dim() const noexcept { return weights_.dim(); }
  const Weights& weights() const noexcept { return weights_; }
  const std::vector<VectorField>& fields() const noexcept { return fields_; }
  const VectorField& field(int i) const { return fields_.at(static_cast<std::size_t>(i)); }
  const Vec& base_point() const noexcept { return base_; }
  double radius() const noexcept { return radius_; }

  /// Column i is X_i(x).
  Mat matrix_at(const Vec& x) const {
    Mat A(dim(), dim());
    for (int i = 0; i < dim(); ++i) A.col(i) = fields_[static_cast<std::size_t>(i)](x);
    return A;
  }

  /// sum_i u_i X_i(x)
  Vec combination(const Vec& u, const Vec& x) const {
    Vec out = Vec::Zero(dim());
    for (int i = 0; i < dim(); ++i)
      if (u[i] != 0.0) fields_[static_cast<std::size_t>(i)].accumulate(x, u[i], out);
    return out;
  }

 private:
  std::vector<VectorField> fields_;
  Weights weights_;
  Vec base_;
  double radius_ = 1.0;
};

/// Shifts coordinates so the base point becomes the origin.
inline WeightedFrame translate_to_origin(const WeightedFrame& F) {
  const int n = F.dim();
  std::vector<Expr> shift;
  for (int k = 0; k < n; ++k) shift.push_back(Expr::variable(k) + Expr(F.base_point()[k]));
  std::vector<VectorField> fields;
  for (const auto& f : F.fields()) {
    std::vector<Expr> c;
    for (const auto& e : f.coeffs()) c.push_back(substitute(e, shift));
    fields.emplace_back(std::move(c));
  }
  return WeightedFrame(std::move(fields), F.weights(), Vec::Zero(n), F.radius());
}

/// c_{ijk}(x) with [X_i, X_j](x) = sum_k c_{ijk}(x) X_k(x), stored flat as (i*N + j)*N + k.
struct StructureConstants {
  int n = 0;
  std::vector<double> c;
  double operator()(int i, int j, int k) const { return c[static_cast<std::size_t>((i * n + j) * n + k)]; }
  double& operator()(int i, int j, int k) { return c[static_cast<std::size_t>((i * n + j) * n + k)]; }
};

struct TableReport {
  bool valid = true;
  double max_violation = 0.0;  // largest |c_ijk| with sigma_k > sigma_i + sigma_j
  double tolerance = 0.0;      // largest per-point threshold used
  int worst_point = -1;
  int skipped = 0;             // grid points where the commutators are not evaluable
  std::vector<Vec> points;
  std::vector<StructureConstants> constants;  // one per evaluated point
};

namespace detail {
inline double condition_number(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& s = svd.singularValues();
  return s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
}

inline std::vector<VectorField> all_commutators(const WeightedFrame& F) {
  const int n = F.dim();
  std::vector<VectorField> br(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) br[static_cast<std::size_t>(i * n + j)] = commutator(F.field(i), F.field(j));
  return br;
}

inline StructureConstants solve_constants(const WeightedFrame& F, const std::vector<VectorField>& br, const Vec& x,
                                          double* cond_out) {
  const int n = F.dim();
  const Mat A = F.matrix_at(x);
  const double cond = condition_number(A);
  if (!std::isfinite(cond) || cond > 1e12) throw SingularFrame("frame matrix is singular at a grid point");
  Eigen::PartialPivLU<Mat> lu(A);
  StructureConstants sc{n, std::vector<double>(static_cast<std::size_t>(n * n * n), 0.0)};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Vec c = lu.solve(br[static_cast<std::size_t>(i * n + j)](x));
      for (int k = 0; k < n; ++k) {
        sc(i, j, k) = c[k];
        sc(j, i, k) = -c[k];
      }
    }
  if (cond_out) *cond_out = cond;
  return sc;
}
}  // namespace detail

/// Structure constants of the frame at a single point.
inline StructureConstants structure_constants_at(const WeightedFrame& F, const Vec& x) {
  return detail::solve_constants(F, detail::all_commutators(F), x, nullptr);
}

inline TableReport verify_commutator_table(const WeightedFrame& F, const std::vector<Vec>& grid) {
  const int n = F.dim();
  const auto& w = F.weights();
  const auto br = detail::all_commutators(F);
  struct Slot {
    bool ok = false;
    StructureConstants sc;
    double cond = 0.0;
  };
  std::vector<Slot> slots(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    try {
      slots[g].sc = detail::solve_constants(F, br, grid[g], &slots[g].cond);
      slots[g].ok = true;
    } catch (const DomainError&) {
    }
  });
  TableReport r;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!slots[g].ok) {
      ++r.skipped;
      continue;
    }
    const double tol = 1e-9 * slots[g].cond;
    r.tolerance = std::max(r.tolerance, tol);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          if (w[k] <= w[i] + w[j] + 1e-12) continue;
          const double v = std::fabs(slots[g].sc(i, j, k));
          if (v > r.max_violation) r.max_violation = v, r.worst_point = static_cast<int>(r.points.size());
          if (v > tol) r.valid = false;
        }
    r.points.push_back(grid[g]);
    r.constants.push_back(std::move(slots[g].sc));
  }
  if (r.points.empty()) throw SingularFrame("no grid point admits an evaluable commutator table");
  return r;
}

}  // namespace carnot
