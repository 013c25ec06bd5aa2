#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lncone/geometry.hpp"

using namespace lncone;

namespace {

VecXd vec3(double a, double b, double c) {
  VecXd v(3);
  v << a, b, c;
  return v;
}

// Central-difference jacobian, used only as a test oracle.
MatXd fd_jacobian(const DiffeoMap& m, const VecXd& x, double h = 1e-5) {
  MatXd J(m.n, m.n);
  for (int j = 0; j < m.n; ++j) {
    VecXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (m.forward(xp) - m.forward(xm)) / (2 * h);
  }
  return J;
}

MatXd fd_hessian_component(const DiffeoMap& m, int i, const VecXd& x,
                           double h = 1e-5) {
  MatXd H(m.n, m.n);
  for (int j = 0; j < m.n; ++j)
    for (int k = 0; k < m.n; ++k) {
      VecXd xpp = x, xpm = x, xmp = x, xmm = x;
      xpp(j) += h; xpp(k) += h;
      xpm(j) += h; xpm(k) -= h;
      xmp(j) -= h; xmp(k) += h;
      xmm(j) -= h; xmm(k) -= h;
      H(j, k) = (m.forward(xpp)(i) - m.forward(xpm)(i) - m.forward(xmp)(i) +
                 m.forward(xmm)(i)) /
                (4 * h * h);
    }
  return H;
}

// Inverts the shear y -> y + c|y|^2 e_n by Newton, as an independent oracle
// for the closed-form forward map.
VecXd invert_shear_newton(double c, const VecXd& x) {
  const int n = static_cast<int>(x.size());
  VecXd y = x;
  for (int it = 0; it < 100; ++it) {
    VecXd r = y;
    r(n - 1) += c * y.squaredNorm();
    r -= x;
    if (r.norm() < 1e-14) break;
    MatXd J = MatXd::Identity(n, n);
    for (int j = 0; j < n; ++j) J(n - 1, j) += 2 * c * y(j);
    y -= J.partialPivLu().solve(r);
  }
  return y;
}

}  // namespace

TEST_CASE("identity map") {
  auto m = identity_map(3);
  VecXd x = vec3(0.3, -0.2, 0.5);
  CHECK((m.forward(x) - x).norm() == 0.0);
  CHECK((m.jacobian(x) - MatXd::Identity(3, 3)).norm() == 0.0);
  CHECK(norm_vs_distance_check(m, {x, vec3(0.1, 0, 0)}) == 0.0);
}

TEST_CASE("example1 map basics") {
  auto m = example1_map(0.05, 3);
  VecXd zero = VecXd::Zero(3);
  CHECK(m.forward(zero).norm() == 0.0);
  CHECK((m.jacobian(zero) - MatXd::Identity(3, 3)).norm() < 1e-14);

  // c = 0 degenerates to the identity.
  auto m0 = example1_map(0.0, 3);
  VecXd x = vec3(0.2, 0.1, 0.3);
  CHECK((m0.forward(x) - x).norm() == 0.0);

  // Round trip inside half the validity radius.
  for (double s : {0.1, 0.5, 1.0}) {
    VecXd p = vec3(0.4, -0.7, 0.9).normalized() * (s * 0.49 * m.radius);
    CHECK((m.inverse(m.forward(p)) - p).norm() < 1e-12);
  }
}

TEST_CASE("example1 forward matches Newton inversion of the shear") {
  auto m = example1_map(0.05, 3);
  for (auto& x : {vec3(0, 0, 0.1), vec3(0.1, -0.05, 0.2), vec3(0.3, 0.2, -0.1)}) {
    VecXd y_newton = invert_shear_newton(0.05, x);
    CHECK((m.forward(x) - y_newton).norm() < 1e-10);
  }
}

TEST_CASE("example1 analytic derivatives match finite differences") {
  auto m = example1_map(0.08, 3);
  VecXd x = vec3(0.12, -0.07, 0.21);
  CHECK((m.jacobian(x) - fd_jacobian(m, x)).cwiseAbs().maxCoeff() < 1e-6);
  auto H = m.hessian(x);
  for (int i = 0; i < 3; ++i)
    CHECK((H[i] - fd_hessian_component(m, i, x)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("example1 out-of-domain point throws") {
  auto m = example1_map(0.2, 3);
  VecXd bad = vec3(0, 0, -2.0); // sqrt argument 1 + 4c z < 0
  CHECK_THROWS_AS(m.forward(bad), std::domain_error);
}

TEST_CASE("example5 map basics") {
  auto m = example5_map(3);
  VecXd zero = VecXd::Zero(3);
  CHECK(m.forward(zero).norm() == 0.0);
  CHECK((m.jacobian(zero) - MatXd::Identity(3, 3)).norm() < 1e-14);
  CHECK(m.radius > 0.05);

  VecXd x = VecXd::Constant(3, 0.01);
  CHECK((m.jacobian(x) - fd_jacobian(m, x)).cwiseAbs().maxCoeff() < 1e-6);

  VecXd p = vec3(0.02, -0.01, 0.03);
  CHECK((m.inverse(m.forward(p)) - p).norm() < 1e-12);
}

TEST_CASE("example5 Taylor coefficients at the origin") {
  for (int n : {3, 4}) {
    auto m = example5_map(n);
    for (int i = 0; i < n; ++i) {
      CHECK(m.b_i0(i) == doctest::Approx(2.0 - n).epsilon(1e-14));
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          CHECK(m.a_ijk(i, j, k) ==
                doctest::Approx(i == j ? 2.0 : 0.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("pushforward error bounds") {
  TestC2Function fsq{
      [](const VecXd& y) { return y.squaredNorm(); },
      [](const VecXd& y) { return VecXd(2.0 * y); },
      [](const VecXd& y) {
        return MatXd(2.0 * MatXd::Identity(y.size(), y.size()));
      }};

  SUBCASE("identity gives zero discrepancies") {
    auto rep = pushforward_error_check(identity_map(3), fsq, vec3(0.1, 0, 0.2));
    CHECK(rep.disc1 == 0.0);
    CHECK(rep.disc2 == 0.0);
    CHECK(rep.ok);
  }

  SUBCASE("bent map satisfies both bounds") {
    auto m = example1_map(0.05, 3);
    for (double t : {0.02, 0.05, 0.1}) {
      auto rep = pushforward_error_check(m, fsq, vec3(0, 0, t));
      CHECK(rep.ok);
      CHECK(rep.disc1 <= rep.bound1 + 1e-12);
      CHECK(rep.disc2 <= rep.bound2 + 1e-12);
    }
  }

  SUBCASE("polynomial map, linear test function, exact discrepancy") {
    auto m = example5_map(3);
    TestC2Function f1{[](const VecXd& y) { return y(0); },
                      [](const VecXd& y) {
                        VecXd g = VecXd::Zero(y.size());
                        g(0) = 1.0;
                        return g;
                      },
                      [](const VecXd& y) {
                        return MatXd(MatXd::Zero(y.size(), y.size()));
                      }};
    VecXd x = vec3(0.02, 0.01, -0.015);
    auto rep = pushforward_error_check(m, f1, x);
    // d_j phi^1 = delta_1j * sum(x) + x_1 - x_j for the first component.
    double S = x.sum();
    double expect = 0.0;
    for (int j = 0; j < 3; ++j)
      expect = std::max(expect,
                        std::abs((j == 0 ? S : 0.0) + x(0) - x(j)));
    CHECK(rep.disc1 == doctest::Approx(expect).epsilon(1e-12));
    CHECK(rep.ok);
  }
}

TEST_CASE("quadratic remainder of |Tx| vs |x|") {
  auto m = example1_map(0.05, 3);
  std::vector<VecXd> ray;
  for (int k = 0; k < 8; ++k)
    ray.push_back(vec3(0.05, 0.02, 0.2) * std::pow(0.5, k));
  double q = norm_vs_distance_check(m, ray);
  CHECK(q > 0.0);
  CHECK(q < 10 * 0.05); // bounded by a small multiple of the bending size

  // The quotient stays bounded along the ray toward the origin.
  for (int k = 1; k < 8; ++k) {
    double qk = norm_vs_distance_check(m, {ray[k]});
    CHECK(qk < 10 * 0.05);
  }

  CHECK_THROWS_AS(norm_vs_distance_check(m, {}), std::invalid_argument);
}
