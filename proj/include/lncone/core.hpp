#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lncone {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VecXd = Vec<double>;
using MatXd = Mat<double>;

inline constexpr double pi = 3.14159265358979323846;

template <typename Scalar>
Scalar sqr(Scalar x) {
  return x * x;
}

// Solves a tridiagonal system in place. lo has size m-1 (subdiagonal),
// di size m, up size m-1.
template <typename Scalar>
Vec<Scalar> thomas_solve(const Vec<Scalar>& lo, const Vec<Scalar>& di,
                         const Vec<Scalar>& up, const Vec<Scalar>& rhs) {
  const Eigen::Index m = di.size();
  Vec<Scalar> c(m), d(m);
  Scalar piv = di(0);
  if (piv == Scalar(0)) throw std::runtime_error("thomas_solve: zero pivot");
  c(0) = (m > 1) ? up(0) / piv : Scalar(0);
  d(0) = rhs(0) / piv;
  for (Eigen::Index i = 1; i < m; ++i) {
    piv = di(i) - lo(i - 1) * c(i - 1);
    if (piv == Scalar(0)) throw std::runtime_error("thomas_solve: zero pivot");
    c(i) = (i < m - 1) ? up(i) / piv : Scalar(0);
    d(i) = (rhs(i) - lo(i - 1) * d(i - 1)) / piv;
  }
  Vec<Scalar> x(m);
  x(m - 1) = d(m - 1);
  for (Eigen::Index i = m - 2; i >= 0; --i) x(i) = d(i) - c(i) * x(i + 1);
  return x;
}

// Richardson extrapolation for a second-order quantity sampled at h and h/2.
template <typename Scalar>
Vec<Scalar> richardson2(const Vec<Scalar>& fine, const Vec<Scalar>& coarse) {
  return fine + (fine - coarse) / Scalar(3);
}

template <typename Scalar>
Scalar richardson2(Scalar fine, Scalar coarse) {
  return fine + (fine - coarse) / Scalar(3);
}

template <typename Scalar>
Vec<Scalar> linspace(Scalar a, Scalar b, Eigen::Index m) {
  Vec<Scalar> x(m);
  for (Eigen::Index i = 0; i < m; ++i)
    x(i) = a + (b - a) * Scalar(i) / Scalar(m - 1);
  return x;
}

template <typename Scalar>
Vec<Scalar> geomspace(Scalar a, Scalar b, Eigen::Index m) {
  Vec<Scalar> x(m);
  for (Eigen::Index i = 0; i < m; ++i)
    x(i) = a * std::pow(b / a, Scalar(i) / Scalar(m - 1));
  return x;
}

// Piecewise cubic Hermite interpolant on a uniform grid, built from node
// values and node derivatives. Evaluation is O(1).
template <typename Scalar>
struct HermiteSpline {
  Scalar x0 = 0, h = 1;
  Vec<Scalar> y, yp;

  Scalar eval(Scalar x) const {
    const Eigen::Index m = y.size();
    Scalar s = (x - x0) / h;
    Eigen::Index i = static_cast<Eigen::Index>(std::floor(s));
    if (i < 0) i = 0;
    if (i > m - 2) i = m - 2;
    Scalar t = s - Scalar(i);
    Scalar t2 = t * t, t3 = t2 * t;
    Scalar h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    Scalar h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * y(i) + h * h10 * yp(i) + h01 * y(i + 1) + h * h11 * yp(i + 1);
  }

  Scalar deriv(Scalar x) const {
    const Eigen::Index m = y.size();
    Scalar s = (x - x0) / h;
    Eigen::Index i = static_cast<Eigen::Index>(std::floor(s));
    if (i < 0) i = 0;
    if (i > m - 2) i = m - 2;
    Scalar t = s - Scalar(i);
    Scalar t2 = t * t;
    Scalar g00 = (6 * t2 - 6 * t) / h, g10 = 3 * t2 - 4 * t + 1;
    Scalar g01 = (-6 * t2 + 6 * t) / h, g11 = 3 * t2 - 2 * t;
    return g00 * y(i) + g10 * yp(i) + g01 * y(i + 1) + g11 * yp(i + 1);
  }
};

// Node derivatives of a uniformly sampled function, fourth order accurate
// (five-point stencils, one-sided at the ends).
template <typename Scalar>
Vec<Scalar> deriv4(const Vec<Scalar>& y, Scalar h) {
  const Eigen::Index m = y.size();
  if (m < 5) throw std::invalid_argument("deriv4: need at least 5 nodes");
  Vec<Scalar> d(m);
  d(0) = (-25 * y(0) + 48 * y(1) - 36 * y(2) + 16 * y(3) - 3 * y(4)) / (12 * h);
  d(1) = (-3 * y(0) - 10 * y(1) + 18 * y(2) - 6 * y(3) + y(4)) / (12 * h);
  for (Eigen::Index i = 2; i < m - 2; ++i)
    d(i) = (y(i - 2) - 8 * y(i - 1) + 8 * y(i + 1) - y(i + 2)) / (12 * h);
  d(m - 2) = (3 * y(m - 1) + 10 * y(m - 2) - 18 * y(m - 3) + 6 * y(m - 4) -
              y(m - 5)) /
             (12 * h);
  d(m - 1) = (25 * y(m - 1) - 48 * y(m - 2) + 36 * y(m - 3) - 16 * y(m - 4) +
              3 * y(m - 5)) /
             (12 * h);
  return d;
}

// Second node derivatives, fourth order accurate.
template <typename Scalar>
Vec<Scalar> deriv4_2nd(const Vec<Scalar>& y, Scalar h) {
  const Eigen::Index m = y.size();
  if (m < 6) throw std::invalid_argument("deriv4_2nd: need at least 6 nodes");
  Vec<Scalar> d(m);
  const Scalar h2 = h * h;
  d(0) = (45 * y(0) - 154 * y(1) + 214 * y(2) - 156 * y(3) + 61 * y(4) -
          10 * y(5)) /
         (12 * h2);
  d(1) = (10 * y(0) - 15 * y(1) - 4 * y(2) + 14 * y(3) - 6 * y(4) + y(5)) /
         (12 * h2);
  for (Eigen::Index i = 2; i < m - 2; ++i)
    d(i) = (-y(i - 2) + 16 * y(i - 1) - 30 * y(i) + 16 * y(i + 1) - y(i + 2)) /
           (12 * h2);
  d(m - 2) = (10 * y(m - 1) - 15 * y(m - 2) - 4 * y(m - 3) + 14 * y(m - 4) -
              6 * y(m - 5) + y(m - 6)) /
             (12 * h2);
  d(m - 1) = (45 * y(m - 1) - 154 * y(m - 2) + 214 * y(m - 3) - 156 * y(m - 4) +
              61 * y(m - 5) - 10 * y(m - 6)) /
             (12 * h2);
  return d;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace lncone
