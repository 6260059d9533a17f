#pragma once

#include "phasehit/core.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace phasehit {

/// Dense matrix exponential by Pade approximation with scaling and squaring.
/// Works for any real scalar type.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> expm(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m);

/// Memoized e^{tM} values keyed by matrix content and time. Reads are lock-free
/// apart from a shared lock; concurrent inserts of the same key may duplicate
/// work but never corrupt the cache.
class ExpmWorkspace {
 public:
  explicit ExpmWorkspace(double tolerance = 1e-12) : tolerance_(tolerance) {}

  std::shared_ptr<const Matrix> exponential(const Matrix& m, double t);
  double tolerance() const { return tolerance_; }
  size_t entries() const;

 private:
  struct Entry {
    Matrix base;
    double t;
    std::shared_ptr<const Matrix> value;
  };
  double tolerance_;
  mutable std::shared_mutex mutex_;
  std::unordered_multimap<size_t, Entry> cache_;
};

/// v e^{tM} for a probability row vector (or any row vector).
RowVector expm_apply(const RowVector& v, const Matrix& m, double t,
                     ExpmWorkspace* ws = nullptr);

/// e^{tM} p acting on a column vector.
Vector expm_apply(const Matrix& m, double t, const Vector& p, ExpmWorkspace* ws = nullptr);

/// Solves Ax = b by LU with a residual check. Throws SingularMatrixError with
/// a reciprocal-condition estimate when the factorization is unreliable.
Vector solve(const Matrix& a, const Vector& b);

struct QuadratureRule {
  enum class Kind { adaptive, fixed };
  Kind kind = Kind::adaptive;
  int panels = 4;           // initial panel count (adaptive) or the full count (fixed)
  int max_panels = 16384;   // refinement budget
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
};

/// Componentwise integral of a vector-valued function over [a, b].
/// Composite Gauss-Legendre panels; the adaptive rule doubles the panel count
/// until two successive estimates agree to tolerance, then keeps the finer one.
Vector integrate(const std::function<Vector(double)>& f, double a, double b,
                 const QuadratureRule& rule = {});

double integrate_scalar(const std::function<double(double)>& f, double a, double b,
                        const QuadratureRule& rule = {});

}  // namespace phasehit
