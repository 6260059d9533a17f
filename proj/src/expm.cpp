#include "phasehit/expm.hpp"

#include <Eigen/LU>

#include <cmath>
#include <cstring>

namespace phasehit {

namespace {

// Pade-13 coefficients (Higham, "The scaling and squaring method revisited").
constexpr double kPade13Theta = 5.371920351148152;
constexpr double kPade13Coeffs[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

}  // namespace

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> expm(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.rows() != m.cols()) throw ValueError("expm expects a square matrix");
  if (!m.allFinite()) throw NumericError("expm: matrix has non-finite entries");
  const Index n = m.rows();
  if (n == 0) return Mat(0, 0);

  const double norm = static_cast<double>(m.cwiseAbs().rowwise().sum().maxCoeff());
  int squarings = 0;
  if (norm > kPade13Theta)
    squarings = static_cast<int>(std::ceil(std::log2(norm / kPade13Theta)));
  const Mat a = m / static_cast<Scalar>(std::exp2(squarings));

  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const auto& b = kPade13Coeffs;
  const Mat ident = Mat::Identity(n, n);
  Mat u = a * (a6 * (Scalar(b[13]) * a6 + Scalar(b[11]) * a4 + Scalar(b[9]) * a2) +
               Scalar(b[7]) * a6 + Scalar(b[5]) * a4 + Scalar(b[3]) * a2 + Scalar(b[1]) * ident);
  Mat v = a6 * (Scalar(b[12]) * a6 + Scalar(b[10]) * a4 + Scalar(b[8]) * a2) +
          Scalar(b[6]) * a6 + Scalar(b[4]) * a4 + Scalar(b[2]) * a2 + Scalar(b[0]) * ident;

  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

template Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> expm<double>(
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&);
template Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> expm<long double>(
    const Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>&);

namespace {

size_t hash_matrix_time(const Matrix& m, double t) {
  // FNV-1a over the raw entries plus the time.
  size_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, size_t len) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < len; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  };
  const Index n = m.size();
  mix(&n, sizeof(n));
  mix(m.data(), sizeof(double) * static_cast<size_t>(m.size()));
  mix(&t, sizeof(t));
  return h;
}

}  // namespace

std::shared_ptr<const Matrix> ExpmWorkspace::exponential(const Matrix& m, double t) {
  const size_t key = hash_matrix_time(m, t);
  {
    std::shared_lock lock(mutex_);
    auto [lo, hi] = cache_.equal_range(key);
    for (auto it = lo; it != hi; ++it)
      if (it->second.t == t && it->second.base == m) return it->second.value;
  }
  auto value = std::make_shared<const Matrix>(expm<double>(Matrix(t * m)));
  {
    std::unique_lock lock(mutex_);
    cache_.emplace(key, Entry{m, t, value});
  }
  return value;
}

size_t ExpmWorkspace::entries() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

namespace {

void check_expm_apply_args(Index vlen, const Matrix& m, double t) {
  if (m.rows() != m.cols()) throw ValueError("expm_apply expects a square matrix");
  if (vlen != m.rows()) throw ValueError("expm_apply: vector and matrix dimensions differ");
  if (t < 0.0) throw ValueError("expm_apply: negative time");
  if (!std::isfinite(t) || !m.allFinite())
    throw NumericError("expm_apply: non-finite input");
}

}  // namespace

RowVector expm_apply(const RowVector& v, const Matrix& m, double t, ExpmWorkspace* ws) {
  check_expm_apply_args(v.size(), m, t);
  if (t == 0.0) return v;
  if (ws) return v * (*ws->exponential(m, t));
  return v * expm<double>(Matrix(t * m));
}

Vector expm_apply(const Matrix& m, double t, const Vector& p, ExpmWorkspace* ws) {
  check_expm_apply_args(p.size(), m, t);
  if (t == 0.0) return p;
  if (ws) return (*ws->exponential(m, t)) * p;
  return expm<double>(Matrix(t * m)) * p;
}

Vector solve(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols()) throw ValueError("solve expects a square matrix");
  if (b.size() != a.rows()) throw ValueError("solve: right-hand side dimension differs");
  Eigen::PartialPivLU<Matrix> lu(a);
  Vector x = lu.solve(b);
  const double resid = (a * x - b).lpNorm<Eigen::Infinity>();
  const double bound = 1e-10 * (1.0 + b.lpNorm<Eigen::Infinity>());
  if (!x.allFinite() || resid > bound) {
    // Estimate conditioning from the singular values for the error report.
    Eigen::JacobiSVD<Matrix> svd(a);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double rcond = smax > 0.0 ? smin / smax : 0.0;
    throw SingularMatrixError("solve: matrix numerically singular (rcond ~ " +
                                  std::to_string(rcond) + ")",
                              rcond);
  }
  return x;
}

namespace {

// 8-point Gauss-Legendre nodes/weights on [-1, 1]; exact through degree 15.
constexpr double kGaussNodes[8] = {
    -0.9602898564975362, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975362};
constexpr double kGaussWeights[8] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

Vector composite_gauss(const std::function<Vector(double)>& f, double a, double b,
                       int panels, Index dim) {
  Vector total = Vector::Zero(dim);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int q = 0; q < 8; ++q) {
      const double x = mid + 0.5 * h * kGaussNodes[q];
      total += (0.5 * h * kGaussWeights[q]) * f(x);
    }
  }
  return total;
}

}  // namespace

Vector integrate(const std::function<Vector(double)>& f, double a, double b,
                 const QuadratureRule& rule) {
  if (!(b >= a)) throw ValueError("integrate: interval end precedes its start");
  if (rule.panels < 1) throw ValueError("integrate: panel count must be positive");
  Vector probe = f(a + 0.5 * (b - a));
  const Index dim = probe.size();
  if (a == b) return Vector::Zero(dim);

  if (rule.kind == QuadratureRule::Kind::fixed)
    return composite_gauss(f, a, b, rule.panels, dim);

  int panels = rule.panels;
  Vector coarse = composite_gauss(f, a, b, panels, dim);
  while (true) {
    const int next = panels * 2;
    if (next > rule.max_panels) {
      const double achieved = coarse.size() ? coarse.lpNorm<Eigen::Infinity>() : 0.0;
      throw AccuracyError("integrate: tolerance not reached within the panel budget",
                          achieved);
    }
    Vector fine = composite_gauss(f, a, b, next, dim);
    const double diff = (fine - coarse).lpNorm<Eigen::Infinity>();
    const double scale = fine.lpNorm<Eigen::Infinity>();
    if (diff <= rule.abs_tol || diff <= rule.rel_tol * scale) return fine;
    coarse.swap(fine);
    panels = next;
  }
}

double integrate_scalar(const std::function<double(double)>& f, double a, double b,
                        const QuadratureRule& rule) {
  Vector r = integrate([&f](double x) { return Vector::Constant(1, f(x)); }, a, b, rule);
  return r(0);
}

}  // namespace phasehit
