#include "lncone/geometry.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace lncone {

namespace {

// Square-root argument of the bent-map n-th component.
double example1_arg(double c, const VecXd& x) {
  const int n = static_cast<int>(x.size());
  double xp2 = x.head(n - 1).squaredNorm();
  return 1.0 + 4.0 * c * (x(n - 1) - c * xp2);
}

double min_singular_value(const MatXd& J) {
  Eigen::JacobiSVD<MatXd> svd(J);
  return svd.singularValues().minCoeff();
}

double example5_valid_radius(int n) {
  // Bisect on the invertibility margin of the jacobian along coordinate
  // directions.
  DiffeoMap m;
  m.n = n;
  m.kind = DiffeoMap::Kind::example5;
  auto ok = [&](double r) {
    for (int i = 0; i < n; ++i) {
      for (double s : {-1.0, 1.0}) {
        VecXd x = VecXd::Zero(n);
        x(i) = s * r;
        if (min_singular_value(m.jacobian(x)) < 0.5) return false;
      }
    }
    return true;
  };
  double lo = 0.0, hi = 2.0;
  if (ok(hi)) return hi;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

VecXd DiffeoMap::forward(const VecXd& x) const {
  switch (kind) {
    case Kind::identity:
      return x;
    case Kind::example1: {
      if (c == 0.0) return x;
      double A = example1_arg(c, x);
      if (A <= 0.0)
        throw std::domain_error("DiffeoMap: point outside map domain");
      VecXd y = x;
      y(n - 1) = (-1.0 + std::sqrt(A)) / (2.0 * c);
      return y;
    }
    case Kind::example5: {
      double S = x.sum();
      double S2 = x.squaredNorm();
      return (x.array() * (1.0 + S) - 0.5 * S2).matrix();
    }
  }
  throw std::logic_error("DiffeoMap: bad kind");
}

VecXd DiffeoMap::inverse(const VecXd& y) const {
  switch (kind) {
    case Kind::identity:
      return y;
    case Kind::example1: {
      // The inverse is the closed-form paraboloid shear.
      VecXd x = y;
      x(n - 1) = y(n - 1) + c * y.squaredNorm();
      return x;
    }
    case Kind::example5: {
      VecXd x = y;
      for (int it = 0; it < 100; ++it) {
        VecXd r = forward(x) - y;
        if (r.norm() < 1e-14) return x;
        x -= jacobian(x).partialPivLu().solve(r);
      }
      throw std::runtime_error("DiffeoMap: inverse iteration stalled");
    }
  }
  throw std::logic_error("DiffeoMap: bad kind");
}

MatXd DiffeoMap::jacobian(const VecXd& x) const {
  switch (kind) {
    case Kind::identity:
      return MatXd::Identity(n, n);
    case Kind::example1: {
      MatXd J = MatXd::Identity(n, n);
      if (c == 0.0) return J;
      double A = example1_arg(c, x);
      if (A <= 0.0)
        throw std::domain_error("DiffeoMap: point outside map domain");
      double s = 1.0 / std::sqrt(A);
      for (int j = 0; j < n - 1; ++j) J(n - 1, j) = -2.0 * c * x(j) * s;
      J(n - 1, n - 1) = s;
      return J;
    }
    case Kind::example5: {
      double S = x.sum();
      MatXd J = MatXd::Identity(n, n) * (1.0 + S);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) J(i, j) += x(i) - x(j);
      return J;
    }
  }
  throw std::logic_error("DiffeoMap: bad kind");
}

std::vector<MatXd> DiffeoMap::hessian(const VecXd& x) const {
  std::vector<MatXd> H(n, MatXd::Zero(n, n));
  switch (kind) {
    case Kind::identity:
      return H;
    case Kind::example1: {
      if (c == 0.0) return H;
      double A = example1_arg(c, x);
      if (A <= 0.0)
        throw std::domain_error("DiffeoMap: point outside map domain");
      double s1 = std::pow(A, -0.5), s3 = std::pow(A, -1.5);
      MatXd& Hn = H[n - 1];
      for (int j = 0; j < n - 1; ++j) {
        for (int k = 0; k < n - 1; ++k)
          Hn(j, k) = -2.0 * c * (j == k ? 1.0 : 0.0) * s1 -
                     8.0 * c * c * c * x(j) * x(k) * s3;
        Hn(j, n - 1) = Hn(n - 1, j) = 4.0 * c * c * x(j) * s3;
      }
      Hn(n - 1, n - 1) = -2.0 * c * s3;
      return H;
    }
    case Kind::example5: {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            H[i](j, k) = (i == j ? 1.0 : 0.0) + (i == k ? 1.0 : 0.0) -
                         (j == k ? 1.0 : 0.0);
      return H;
    }
  }
  throw std::logic_error("DiffeoMap: bad kind");
}

double DiffeoMap::a_ijk(int i, int j, int k) const {
  auto H = hessian(VecXd::Zero(n));
  return H[i](j, k) + H[j](i, k);
}

double DiffeoMap::b_i0(int i) const {
  return hessian(VecXd::Zero(n))[i].trace();
}

std::string DiffeoMap::name() const {
  switch (kind) {
    case Kind::identity:
      return "identity";
    case Kind::example1:
      return "example1:" + std::to_string(c);
    case Kind::example5:
      return "example5";
  }
  return "?";
}

DiffeoMap identity_map(int n) {
  DiffeoMap m;
  m.n = n;
  m.kind = DiffeoMap::Kind::identity;
  return m;
}

DiffeoMap example1_map(double c, int n) {
  if (std::abs(c) >= 0.25)
    throw std::invalid_argument("example1_map: |c| must be < 1/4");
  DiffeoMap m;
  m.n = n;
  m.kind = DiffeoMap::Kind::example1;
  m.c = c;
  m.regularity = 3;
  m.radius = (c == 0.0) ? 1e30 : 1.0 / (8.0 * std::abs(c));
  return m;
}

DiffeoMap example5_map(int n) {
  if (n < 3) throw std::invalid_argument("example5_map: n must be >= 3");
  DiffeoMap m;
  m.n = n;
  m.kind = DiffeoMap::Kind::example5;
  m.regularity = 3;
  m.radius = example5_valid_radius(n);
  return m;
}

PushforwardReport pushforward_error_check(const DiffeoMap& map,
                                          const TestC2Function& f,
                                          const VecXd& x) {
  if (2.0 * x.norm() >= map.radius)
    throw std::domain_error("pushforward_error_check: |x| must be < R/2");
  const int n = map.n;

  // Sampled C^2-norm of T along the segment [0, x]: Frobenius norm of the
  // full second-derivative tensor dominates every contraction in the proof.
  double c2 = 0.0;
  for (int s = 0; s <= 16; ++s) {
    VecXd z = x * (double(s) / 16.0);
    double fr2 = 0.0;
    for (const MatXd& Hi : map.hessian(z)) fr2 += Hi.squaredNorm();
    c2 = std::max(c2, std::sqrt(fr2));
  }

  VecXd y = map.forward(x);
  MatXd J = map.jacobian(x);
  auto HT = map.hessian(x);
  VecXd gf = f.grad(y);
  MatXd Hf = f.hess(y);

  VecXd pullback_grad = J.transpose() * gf;
  MatXd pullback_hess = J.transpose() * Hf * J;
  for (int k = 0; k < n; ++k) pullback_hess += gf(k) * HT[k];

  PushforwardReport rep;
  rep.c2_norm = c2;
  rep.disc1 = (pullback_grad - gf).cwiseAbs().maxCoeff();
  rep.disc2 = (pullback_hess - Hf).cwiseAbs().maxCoeff();
  double r = x.norm();
  rep.bound1 = c2 * gf.norm() * r;
  // Chain of the second-order proof: |Hf| c2 r + |Hf| (1 + c2 r) c2 r
  // + |gf| c2, folded into C0 (|gf| + r |Hf|) with C0 = c2 (2 + c2 r).
  double C0 = c2 * (2.0 + c2 * r);
  rep.bound2 = C0 * (gf.norm() + r * Hf.norm());
  const double slack = 1e-12;
  rep.ok = rep.disc1 <= rep.bound1 + slack && rep.disc2 <= rep.bound2 + slack;
  return rep;
}

double norm_vs_distance_check(const DiffeoMap& map,
                              const std::vector<VecXd>& samples) {
  if (samples.empty())
    throw std::invalid_argument("norm_vs_distance_check: no samples");
  double q = 0.0;
  for (const VecXd& x : samples) {
    double r2 = x.squaredNorm();
    if (r2 == 0.0) continue;
    q = std::max(q, std::abs(map.forward(x).norm() - x.norm()) / r2);
  }
  return q;
}

}  // namespace lncone
