#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lncone/profiles.hpp"

using namespace lncone;

TEST_CASE("wedge at full opening reproduces sin") {
  auto p = solve_wedge(pi, 512);
  double err = 0;
  for (Eigen::Index i = 0; i <= p.N; ++i)
    err = std::max(err, std::abs(p.rho(i) - std::sin(p.theta(i))));
  CHECK(err < 1e-6);
  CHECK(p.drho(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(p.ladder_agreement < 1e-7);
  CHECK(p.residual < 1e-8);
}

TEST_CASE("wedge half opening matches high-resolution oracle") {
  auto p = solve_wedge(pi / 2, 256);
  // Independent oracle: a single brute-force solve at 4x resolution.
  auto oracle = detail::wedge_raw(pi / 2, 4096);
  double err = 0;
  for (Eigen::Index i = 0; i <= p.N; ++i)
    err = std::max(err, std::abs(p.rho(i) - oracle(16 * i)));
  CHECK(err < 1e-6);
  CHECK(p.residual < 1e-8);
  CHECK(p.slope_err < 1e-3);
}

TEST_CASE("cap at right angle reproduces cos for n=3,4") {
  for (int n : {3, 4}) {
    auto p = solve_cap(n, pi / 2, 512);
    double err = 0;
    for (Eigen::Index i = 0; i <= p.N; ++i)
      err = std::max(err, std::abs(p.rho(i) - std::cos(p.theta(i))));
    CHECK(err < 1e-5);
    CHECK(p.ladder_agreement < 1e-7);
    CHECK(p.residual < 1e-8);
    CHECK(p.slope_err < 1e-3);
  }
}

TEST_CASE("cap pi/3 matches high-resolution oracle") {
  auto p = solve_cap(3, pi / 3, 256);
  auto oracle = detail::cap_raw(3, pi / 3, Eigen::Index(4096));
  double err = 0;
  for (Eigen::Index i = 0; i <= p.N; ++i)
    err = std::max(err, std::abs(p.rho(i) - oracle(16 * i)));
  CHECK(err < 1e-6);
}

TEST_CASE("big caps converge with sane invariants") {
  for (double a : {0.75 * pi, 0.85 * pi}) {
    auto p = solve_cap(3, a, 384);
    CHECK(p.residual < 1e-8);
    CHECK(p.c3 > 0);
    CHECK(std::isfinite(p.c4));
    CHECK(p.slope_err < 1e-3);
    CHECK(p.ladder_agreement < 1e-7);
  }
}

TEST_CASE("raw ladder shows second-order convergence") {
  SUBCASE("wedge vs exact sin") {
    auto p = solve_wedge(pi, 128);
    double e[3];
    for (int k = 0; k < 3; ++k) {
      const auto& r = p.raw[k];
      Eigen::Index M = r.size() - 1;
      double err = 0;
      for (Eigen::Index i = 0; i <= M; ++i)
        err = std::max(err, std::abs(r(i) - std::sin(pi * i / double(M))));
      e[k] = err;
    }
    CHECK(e[0] / e[1] > 3.6);
    CHECK(e[0] / e[1] < 4.4);
    CHECK(e[1] / e[2] > 3.6);
    CHECK(e[1] / e[2] < 4.4);
  }
  SUBCASE("cap vs exact cos") {
    auto p = solve_cap(3, pi / 2, 128);
    double e[3];
    for (int k = 0; k < 3; ++k) {
      const auto& r = p.raw[k];
      Eigen::Index M = r.size() - 1;
      double err = 0;
      for (Eigen::Index i = 0; i <= M; ++i)
        err = std::max(err, std::abs(r(i) - std::cos(pi / 2 * i / double(M))));
      e[k] = err;
    }
    CHECK(e[0] / e[1] > 3.6);
    CHECK(e[0] / e[1] < 4.4);
    CHECK(e[1] / e[2] > 3.6);
    CHECK(e[1] / e[2] < 4.4);
  }
}

TEST_CASE("evaluation of the cone solution") {
  auto half = solve_cap(3, pi / 2, 256);

  SUBCASE("half space gives u = d^(-1/2)") {
    for (double th : {0.1, 0.5, 1.0}) {
      for (double r : {0.3, 0.7, 2.0}) {
        double d = r * std::cos(th);
        CHECK(half.eval(r, th).u ==
              doctest::Approx(1.0 / std::sqrt(d)).epsilon(1e-7));
      }
    }
  }

  SUBCASE("homogeneity of degree -(n-2)/2") {
    auto s1 = half.eval(0.4, 0.8);
    auto s2 = half.eval(0.8, 0.8);
    CHECK(s2.u == doctest::Approx(s1.u / std::sqrt(2.0)).epsilon(1e-12));
  }

  SUBCASE("scaled gradient stays controlled by u") {
    auto p = solve_cap(3, pi / 3, 256);
    double worst = 0;
    for (double t = 0.1; t < 0.95; t += 0.05) {
      double th = t * p.alpha;
      auto s = p.eval(1.0, th);
      double grad = std::hypot(s.u_r, s.u_th); // r = 1
      double d = std::sin(p.alpha - th);
      worst = std::max(worst, d * grad / s.u);
    }
    CHECK(worst < 5.0);
  }

  SUBCASE("outside support throws") {
    CHECK_THROWS_AS(half.eval(1.0, pi), std::domain_error);
    CHECK_THROWS_AS(half.eval(-1.0, 0.3), std::domain_error);
  }
}

TEST_CASE("two-distance evaluation of the wedge solution") {
  auto p = solve_wedge(pi / 2, 256);

  SUBCASE("symmetric pair lands on the bisector") {
    double s = 0.25;
    double expect = p.eval(s * std::sqrt(2.0), pi / 4).u;
    CHECK(f_V(p, s, s) == doctest::Approx(expect).epsilon(1e-10));
  }

  SUBCASE("homogeneity in the distance pair") {
    double f1 = f_V(p, 0.03, 0.07);
    double f2 = f_V(p, 0.06, 0.14);
    CHECK(f2 == doctest::Approx(f1 / std::sqrt(2.0)).epsilon(1e-10));
  }

  SUBCASE("full opening reduces to the near-face distance") {
    auto w = solve_wedge(pi, 512);
    for (double d2 : {0.05, 0.2}) {
      double v = f_V(w, 0.37, d2);
      CHECK(v == doctest::Approx(1.0 / std::sqrt(d2)).epsilon(1e-6));
    }
  }

  SUBCASE("bad pairs throw") {
    CHECK_THROWS_AS(f_V(p, -0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(f_V(p, 0.0, 0.2), std::invalid_argument);
  }
}

TEST_CASE("profiles are monotone in the opening") {
  auto narrow = solve_cap(3, pi / 3, 128);
  auto wide = solve_cap(3, pi / 2, 128);
  for (double t = 0.02; t < 1.0; t += 0.02) {
    double th = t * narrow.alpha * 0.999;
    CHECK(narrow.rho_at(th) <= wide.rho_at(th) + 1e-8);
  }

  auto wn = solve_wedge(0.6 * pi, 128);
  auto ww = solve_wedge(0.8 * pi, 128);
  for (double t = 0.05; t < 1.0; t += 0.05) {
    double th = t * wn.alpha * 0.999;
    CHECK(wn.rho_at(th) <= ww.rho_at(th) + 1e-8);
  }
}

TEST_CASE("solution is independent of the initial guess") {
  auto p = solve_wedge(pi / 2, 128);
  Vec<double> guess(p.N + 1);
  for (Eigen::Index i = 0; i <= p.N; ++i)
    guess(i) = 0.45 * std::sin(pi * p.theta(i) / p.alpha);
  auto q = solve_wedge<double>(pi / 2, 128, &guess);
  CHECK((p.rho - q.rho).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("preconditions are enforced") {
  CHECK_THROWS_AS(solve_wedge(-0.1, 128), std::invalid_argument);
  CHECK_THROWS_AS(solve_wedge(pi + 0.1, 128), std::invalid_argument);
  CHECK_THROWS_AS(solve_wedge(pi / 2, 32), std::invalid_argument);
  CHECK_THROWS_AS(solve_cap(2, pi / 2, 128), std::invalid_argument);
  CHECK_THROWS_AS(solve_cap(3, pi, 128), std::invalid_argument);
}
