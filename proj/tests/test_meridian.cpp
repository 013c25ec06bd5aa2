#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lncone/expansion.hpp>
#include <lncone/geometry.hpp>
#include <lncone/meridian.hpp>
#include <lncone/profiles.hpp>

#include <array>
#include <cmath>
#include <vector>

using namespace lncone;

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

double log_fit(const std::vector<RatioSample>& samples, double lo, double hi) {
  std::vector<double> lx, ly;
  for (const auto& s : samples)
    if (s.d > lo && s.d < hi && std::abs(s.e) > 1e-14) {
      lx.push_back(std::log(s.d));
      ly.push_back(std::log(std::abs(s.e)));
    }
  REQUIRE(lx.size() >= 10);
  return fit_slope(lx, ly);
}

}  // namespace

TEST_CASE("radial ball solves reproduce the closed form") {
  // w = (s^2 - r^2)/(2s) solves w w'' + (n-1)/r w w' = (n/2) w'^2 - n/2 for
  // every n; the scheme is exact on quadratics.
  auto sol = solve_ball(3, 1.0, 256);
  CHECK(sol.radial);
  CHECK(sol.wr(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.u_center() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  double emax = 0;
  for (Eigen::Index i = 0; i < sol.r.size(); ++i)
    emax = std::max(emax,
                    std::abs(sol.wr(i) - (1.0 - sol.r(i) * sol.r(i)) / 2.0));
  CHECK(emax < 1e-10);

  auto s4 = solve_ball(4, 0.5, 512);
  double e4 = 0;
  for (Eigen::Index i = 0; i + 1 < s4.r.size(); ++i) {
    const double w = (0.25 - s4.r(i) * s4.r(i));  // (s^2 - r^2)/(2s), s = 1/2
    e4 = std::max(e4, std::abs(std::pow(s4.wr(i), -1.0) - 1.0 / w));
  }
  CHECK(e4 < 1e-6);

  auto s5 = solve_ball(5, 2.0, 128);
  double e5 = 0;
  for (Eigen::Index i = 0; i < s5.r.size(); ++i)
    e5 = std::max(e5, std::abs(s5.wr(i) - (4.0 - s5.r(i) * s5.r(i)) / 4.0));
  CHECK(e5 < 1e-10);

  CHECK(sol.residual < 1e-5);
  CHECK_THROWS_AS(solve_ball(2, 1.0, 64), std::invalid_argument);
  CHECK_THROWS_AS(solve_ball(3, -1.0, 64), std::invalid_argument);
  CHECK_THROWS_AS(solve_ball(3, 1.0, 4), std::invalid_argument);
}

TEST_CASE("ball meridian agrees with the radial solver") {
  auto dom = make_ball_meridian(1.0, 64);
  auto prof = solve_cap(3, pi / 3, 64);  // unused for ball domains
  auto sol = solve_axisymmetric(dom, prof, 0.05);
  auto rad = solve_ball(3, 1.0, 2048);

  double ew = 0, eu = 0;
  for (Eigen::Index i = 0; i < dom.nr; ++i)
    for (Eigen::Index j = 0; j < dom.nz; ++j) {
      if (dom.idx(i, j) < 0) continue;
      const double rc = dom.r_of(i), z = dom.z_of(j);
      const double rho = std::hypot(rc, z);
      if (rho > 0.9) continue;
      ew = std::max(ew, std::abs(sol.w_at(rc, z) - (1.0 - rho * rho) / 2.0));
      eu = std::max(eu, std::abs(sol.u_at(rc, z) - rad.u_radial_at(rho)));
    }
  CHECK(ew < 1e-12);
  CHECK(eu < 1e-5);
  CHECK(sol.bracket_gap == 0);  // true boundary everywhere, no bracket
  CHECK(sol.residual < 1e-5);
}

TEST_CASE("half-space solution decays with exponent -1/2 along the axis") {
  auto prof = solve_cap(3, pi / 2, 512);
  auto dom = make_meridian_domain(identity_map(3), pi / 2, 1.0, 128);
  auto sol = solve_axisymmetric(dom, prof, 0.05);
  std::vector<double> lz, lu;
  for (double z = 0.10; z < 0.50; z += 0.03) {
    lz.push_back(std::log(z));
    lu.push_back(std::log(sol.u_at(0.0, z)));
  }
  CHECK(fit_slope(lz, lu) == doctest::Approx(-0.5).epsilon(0.02));
  CHECK(sol.iters <= 40);
  CHECK(sol.newton_res < 1e-9);
}

TEST_CASE("straight cone ratio stays within the bracket") {
  auto prof = solve_cap(3, pi / 3, 1024);
  auto id = identity_map(3);
  auto dom = make_meridian_domain(id, pi / 3, 1.0, 96);
  auto sol = solve_axisymmetric(dom, prof, 0.05);
  CHECK(sol.bracket_gap < 0.01);

  auto samples = ratio_profile(sol, id, prof);
  REQUIRE(samples.size() >= 30);
  double emax = 0, cfit = 0;
  for (const auto& s : samples) {
    CHECK(s.gap <= 0.01 + 1e-12);
    emax = std::max(emax, std::abs(s.e));
    cfit = std::max(cfit, std::abs(s.e) / s.d);
  }
  CHECK(emax <= sol.bracket_gap);
  CHECK(cfit < 0.05);
  CHECK(std::isfinite(cfit));
}

TEST_CASE("bracket ordering and nested-domain comparison") {
  auto prof3 = solve_cap(3, pi / 3, 1024);
  auto prof2 = solve_cap(3, pi / 2, 1024);
  auto id = identity_map(3);
  auto cone = solve_axisymmetric(make_meridian_domain(id, pi / 3, 1.0, 96),
                                 prof3, 0.02);
  auto hemi = solve_axisymmetric(make_meridian_domain(id, pi / 2, 1.0, 96),
                                 prof2, 0.02);

  // Lower u data gives larger w; the discrete quadratic terms carry no
  // monotonicity guarantee on cut rows, so the ordering is checked two cells
  // away from the boundary, like the residual report.
  auto ordering_margin = [](const BlowupSolution& s) {
    const MeridianDomain& d = s.dom;
    double worst = 1e30;
    for (Eigen::Index i = 0; i < d.nr; ++i)
      for (Eigen::Index j = 0; j < d.nz; ++j) {
        const Eigen::Index k = d.idx(i, j);
        if (k < 0) continue;
        bool deep = true;
        for (int di = -2; di <= 2 && deep; ++di)
          for (int dj = -2; dj <= 2 && deep; ++dj)
            if (!d.inside(std::abs(d.r_of(i) + di * d.h),
                          d.z_of(j) + dj * d.h))
              deep = false;
        if (deep) worst = std::min(worst, s.w_minus(k) - s.w_plus(k));
      }
    return worst;
  };
  CHECK(ordering_margin(cone) >= -1e-8);
  CHECK(ordering_margin(hemi) >= -1e-8);

  // The cone sits inside the half-space, so its solution dominates.
  double margin = -1e30;
  for (double rho = 0.30; rho <= 0.60; rho += 0.06)
    for (double th = 0.10; th <= pi / 3 - 0.30; th += 0.08)
      margin = std::max(margin, hemi.u_at(rho * std::sin(th),
                                          rho * std::cos(th)) -
                                    cone.u_at(rho * std::sin(th),
                                              rho * std::cos(th)));
  CHECK(margin < 0);
}

TEST_CASE("solutions obey the distance upper bound") {
  // u <= 2 sqrt(2/d) with d the cone distance: twice the half-space solution
  // of the supporting wall through the nearest boundary point.
  auto prof = solve_cap(3, pi / 3, 1024);
  auto id = identity_map(3);
  auto dom = make_meridian_domain(id, pi / 3, 1.0, 96);
  auto sol = solve_axisymmetric(dom, prof, 0.02);
  double margin = -1e30;
  for (Eigen::Index i = 0; i < dom.nr; ++i)
    for (Eigen::Index j = 0; j < dom.nz; ++j) {
      if (dom.idx(i, j) < 0) continue;
      const double rc = dom.r_of(i), z = dom.z_of(j);
      const double rho = std::hypot(rc, z);
      if (rho < 6 * dom.h || rho > 0.6) continue;
      const double th = std::atan2(rc, z);
      const double d =
          (pi / 3 - th < pi / 2) ? rho * std::sin(pi / 3 - th) : rho;
      if (d < 4 * dom.h) continue;
      margin = std::max(margin,
                        sol.u_at(rc, z, +1) - 2.0 * std::sqrt(2.0 / d));
    }
  CHECK(margin <= 0);
}

TEST_CASE("bracket gap recedes as the outer radius grows") {
  auto prof = solve_cap(3, pi / 3, 1024);
  auto id = identity_map(3);
  std::vector<double> lr, lg;
  for (double ro : {0.4, 0.63, 1.0}) {
    const auto N = Eigen::Index(std::lround(96.0 * ro));
    auto dom = make_meridian_domain(id, pi / 3, ro, N);
    auto sol = solve_axisymmetric(dom, prof, 0.05 * ro);
    double g = 0;
    for (Eigen::Index i = 0; i < dom.nr; ++i)
      for (Eigen::Index j = 0; j < dom.nz; ++j) {
        if (dom.idx(i, j) < 0) continue;
        const double rc = dom.r_of(i), z = dom.z_of(j);
        const double rho = std::hypot(rc, z);
        if (rho > 0.2 || rho < 4 * dom.h) continue;
        const double up = sol.u_at(rc, z, +1), um = sol.u_at(rc, z, -1);
        g = std::max(g, std::abs(up - um) / (0.5 * (up + um)));
      }
    lr.push_back(std::log(ro));
    lg.push_back(std::log(g));
  }
  CHECK(lg[0] > lg[1]);
  CHECK(lg[1] > lg[2]);
  // Decay rate (negated log-log slope) comfortably positive.
  CHECK(fit_slope(lr, lg) < -1.5);
}

TEST_CASE("meridian refinement converges at second order") {
  auto prof = solve_cap(3, pi / 3, 1024);
  auto id = identity_map(3);
  auto solve_at = [&](Eigen::Index N) {
    return solve_axisymmetric(make_meridian_domain(id, pi / 3, 1.0, N), prof,
                              0.05);
  };
  auto s96 = solve_at(96), s192 = solve_at(192);
  auto wmid = [](const BlowupSolution& s, double rc, double z) {
    return 0.5 * (s.w_at(rc, z, +1) + s.w_at(rc, z, -1));
  };

  std::vector<std::array<double, 2>> pts;
  const double h12 = 1.0 / 12;
  for (int i = 0; i <= 12; ++i)
    for (int j = -12; j <= 12; ++j) {
      const double rc = i * h12, z = j * h12;
      const double rho = std::hypot(rc, z);
      if (rho < 0.25 || rho > 0.8) continue;
      if (std::atan2(rc, z) > pi / 3 - 0.35) continue;
      pts.push_back({rc, z});
    }
  REQUIRE(pts.size() >= 20);

  std::vector<double> errs, lh, le;
  for (Eigen::Index N : {12, 24, 48}) {
    auto s = solve_at(N);
    double e = 0;
    for (const auto& p : pts) {
      const double fine = wmid(s192, p[0], p[1]);
      const double ref = fine + (fine - wmid(s96, p[0], p[1])) / 3.0;
      e = std::max(e, std::abs(wmid(s, p[0], p[1]) - ref));
    }
    errs.push_back(e);
    lh.push_back(std::log(1.0 / double(N)));
    le.push_back(std::log(e));
  }
  CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.18));
  CHECK(errs[1] / errs[2] == doctest::Approx(4.0).epsilon(0.18));
  CHECK(fit_slope(lh, le) == doctest::Approx(2.0).epsilon(0.13));
}

TEST_CASE("bent cone ratio decays at least linearly") {
  auto prof = solve_cap(3, pi / 3, 1024);
  auto mp = example1_map(0.05, 3);
  auto dom = make_meridian_domain(mp, pi / 3, 1.0, 192);
  auto sol = solve_axisymmetric(dom, prof, 0.05);
  auto samples = ratio_profile(sol, mp, prof);
  const double expo = log_fit(samples, 0.1, 0.5);
  CHECK(expo >= 0.9);
  CHECK(expo <= 2.5);
}

TEST_CASE("first-order subtraction leaves the second-order remainder") {
  // The paraboloid shear's first-order forcing vanishes identically (Euler:
  // Hess(u) y = (q - 1) grad u for degree-q homogeneity, and
  // -4c(q - 1) - 2cn = 0 at q = -(n-2)/2), so c1 = 0 and the subtracted
  // remainder equals the raw ratio, decaying at the second-order rate.
  auto prof = solve_cap(3, pi / 2, 1024);
  auto mp = example1_map(0.05, 3);
  auto S = compute_F(mp, prof, 32);
  CHECK(S.Cbar < 1e-12);
  auto coef = first_order_coefficient(prof, S, 1, 8);
  CHECK(coef.bound_C < 1e-10);

  auto basis = make_mode_basis(prof, 0, 3);
  const double m1 = mu1(basis.pairs.front().lambda, 3);
  CHECK(m1 == doctest::Approx(3.0).epsilon(1e-4));

  auto dom = make_meridian_domain(mp, pi / 2, 1.0, 256);
  auto sol = solve_axisymmetric(dom, prof, 0.01);
  auto raw = ratio_profile(sol, mp, prof);
  auto sub = ratio_profile(sol, mp, prof, &coef);
  REQUIRE(raw.size() == sub.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    CHECK(std::abs(raw[i].e - sub[i].e) < 1e-10);

  const double expo = log_fit(sub, 0.03, 0.20);
  CHECK(expo >= 0.9 * std::min(2.0, m1));
}

TEST_CASE("subtracting a synthetic linear term shifts samples exactly") {
  auto prof = solve_cap(3, pi / 3, 1024);
  auto id = identity_map(3);
  auto dom = make_meridian_domain(id, pi / 3, 1.0, 96);
  auto sol = solve_axisymmetric(dom, prof, 0.05);

  ExpansionCoefficient fake;
  fake.theta = VecXd::LinSpaced(5, 0.0, pi / 3);
  fake.c1 = MatXd::Constant(5, 1, 0.02);
  fake.xi1 = fake.c1;

  auto raw = ratio_profile(sol, id, prof);
  auto sub = ratio_profile(sol, id, prof, &fake);
  REQUIRE(raw.size() == sub.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(raw[i].d == sub[i].d);
    CHECK(sub[i].e == doctest::Approx(raw[i].e - 0.02 * raw[i].d)
                          .epsilon(1e-12));
  }
}

TEST_CASE("barrier residual vanishes without correction terms") {
  auto prof = solve_cap(3, pi / 3, 512);
  auto rep = barrier_certify(prof, 0.0, 0.0, 1e-3);
  CHECK(rep.max_residual == 0.0);
  CHECK(rep.certified);
}

TEST_CASE("half-space barrier certifies and its ingredient is exact") {
  auto prof = solve_cap(3, pi / 2, 1024);
  auto rep = barrier_certify(prof, 0.0, 10.0, 0.05);
  CHECK(rep.max_residual <= 0);
  CHECK(rep.certified);
  // d^((n-2)/2) u_V = 1 identically on the half-space.
  CHECK(rep.ingredient_low == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.ingredient_high == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.ingredient_ok);
}

TEST_CASE("barrier search certifies the cone, bent or straight") {
  auto prof = solve_cap(3, pi / 3, 1024);
  auto rep = barrier_search(prof);
  CHECK(rep.certified);
  CHECK(rep.B == 1.0);
  CHECK(rep.radius == doctest::Approx(0.1));
  CHECK(rep.A == doctest::Approx(rep.C3 * rep.B));
  CHECK(rep.C1 == doctest::Approx(1.392).epsilon(0.02));
  // d^((n-2)/2) u_V lands in [1/C1, 2^((n-2)/2)]; the inner sup is 1 for a
  // convex cone (supporting half-space) with equality approached on the wall.
  CHECK(rep.ingredient_low >= 1.0 - 1e-6);
  CHECK(rep.ingredient_low < 1.05);
  CHECK(rep.ingredient_high < std::sqrt(2.0));
  CHECK(rep.ingredient_ok);

  auto mp = example1_map(0.05, 3);
  auto pert = barrier_search(prof, &mp);
  CHECK(pert.certified);
  CHECK(pert.max_residual <= 0);
}

TEST_CASE("meridian interfaces reject inconsistent input") {
  auto prof3 = solve_cap(3, pi / 3, 256);
  auto prof2 = solve_cap(3, pi / 2, 256);
  auto id = identity_map(3);
  auto mp_wrong = example1_map(0.05, 3);

  CHECK_THROWS_AS(make_meridian_domain(id, -0.2, 1.0, 64),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_meridian_domain(id, pi / 3, 1.0, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_meridian_domain(example5_map(3), pi / 3, 1.0, 64),
                  std::invalid_argument);

  auto dom = make_meridian_domain(id, pi / 3, 1.0, 48);
  CHECK_THROWS_AS(solve_axisymmetric(dom, prof2, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(solve_axisymmetric(dom, prof3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_axisymmetric(dom, prof3, 0.7), std::invalid_argument);

  auto sol = solve_axisymmetric(dom, prof3, 0.05);
  CHECK_THROWS_AS(ratio_profile(sol, mp_wrong, prof3), std::invalid_argument);
  CHECK_THROWS_AS(ratio_profile(sol, id, prof2), std::invalid_argument);
  CHECK_THROWS_AS(ratio_profile(sol, id, prof3, nullptr, 0),
                  std::invalid_argument);
  auto ball = solve_ball(3, 1.0, 64);
  CHECK_THROWS_AS(ratio_profile(ball, id, prof3), std::invalid_argument);

  CHECK_THROWS_AS(barrier_certify(prof3, -1.0, 0.0, 0.05),
                  std::invalid_argument);
  auto prof4 = solve_cap(4, pi / 3, 256);
  CHECK_THROWS_AS(barrier_search(prof4), std::invalid_argument);
}
