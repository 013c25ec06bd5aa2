#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "lncone/spectral.hpp"

using namespace lncone;

namespace {

double lambda1_extrap(int n, double alpha, Eigen::Index N, int m = 0) {
  auto pc = solve_cap(n, alpha, N);
  auto pf = solve_cap(n, alpha, 2 * N);
  double lc = eigen_solve(pc, 1, m)[0].lambda;
  double lf = eigen_solve(pf, 1, m)[0].lambda;
  return richardson2(lf, lc);
}

double mnorm(const SpectralGrid& g, const VecXd& v) {
  return std::sqrt(inner(g, v, v));
}

}  // namespace

TEST_CASE("hemisphere ground state is exact for n=3 and n=4") {
  CHECK(std::abs(lambda1_extrap(3, pi / 2, 512) - 8.75) < 1e-6);
  CHECK(std::abs(lambda1_extrap(4, pi / 2, 512) - 15.0) < 1e-5);

  auto cap = solve_cap(3, pi / 2, 512);
  auto pairs = eigen_solve(cap, 4);
  auto g = make_spectral_grid(cap, 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].lambda > 0);
    if (i) CHECK(pairs[i].lambda > pairs[i - 1].lambda);
    CHECK(pairs[i].weak_residual < 1e-6);
    CHECK(std::abs(rayleigh(g, pairs[i].phi) - pairs[i].lambda) <
          1e-6 * pairs[i].lambda);
    for (std::size_t j = 0; j <= i; ++j)
      CHECK(std::abs(inner(g, pairs[i].phi, pairs[j].phi) -
                     (i == j ? 1.0 : 0.0)) < 1e-8);
  }
  // phi1 is proportional to cos^(5/2)
  const auto& p1 = pairs[0];
  double c = p1.phi(0);
  double err = 0;
  for (Eigen::Index a = 0; a < p1.phi.size(); ++a) {
    err = std::max(err, std::abs(p1.phi(a) -
                                 c * std::pow(std::cos(g.theta(a)), 2.5)));
    CHECK(p1.phi(a) > 0);
  }
  CHECK(err < 1e-3 * c);
}

TEST_CASE("eigenvalues match a dense symmetric oracle") {
  auto cap = solve_cap(3, 0.7 * pi, 128);
  for (int m : {0, 2}) {
    auto g = make_spectral_grid(cap, m);
    const Eigen::Index ni = g.a_di.size();
    MatXd H = MatXd::Zero(ni, ni);
    for (Eigen::Index a = 0; a < ni; ++a) {
      H(a, a) = g.a_di(a) / sqr(g.rho(a));
      if (a + 1 < ni) {
        H(a, a + 1) = g.a_up(a) / sqr(g.rho(a));
        H(a + 1, a) = g.a_lo(a) / sqr(g.rho(a + 1));
      }
    }
    MatXd S(ni, ni);
    for (Eigen::Index i = 0; i < ni; ++i)
      for (Eigen::Index j = 0; j < ni; ++j)
        S(i, j) = std::sqrt(g.mass(i)) * H(i, j) / std::sqrt(g.mass(j));
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatXd> es(S);
    auto pairs = eigen_solve(g, 6);
    for (int i = 0; i < 6; ++i)
      CHECK(std::abs(pairs[i].lambda - es.eigenvalues()(i)) <
            1e-7 * (1 + std::abs(pairs[i].lambda)));
  }
}

TEST_CASE("cap ground eigenvalue stays above the n=3 floor") {
  for (double a : {0.3, 0.55, 0.75, 0.9, 0.95}) {
    auto cap = solve_cap(3, a * pi, 256);
    CHECK(eigen_solve(cap, 1)[0].lambda > 0.75);
  }
}

TEST_CASE("pinned big-cap eigenvalues for the log-case selection") {
  double l85 = lambda1_extrap(3, 0.85 * pi, 512);
  double l75 = lambda1_extrap(3, 0.75 * pi, 512);
  CHECK(std::abs(l85 - 2.00523) < 2e-3);
  CHECK(std::abs(l75 - 3.04571) < 2e-3);
  CHECK(std::abs(mu1(l85, 3) - 1.50174) < 1e-3);
  CHECK(std::abs(mu1(l75, 3) - 1.81541) < 1e-3);
  CHECK(mu1(l85, 3) < 2.0);
  CHECK(mu1(l75, 3) < 2.0);
}

TEST_CASE("mu1 identities") {
  CHECK(mu1(8.75, 3) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(mu1(0.75, 3) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(mu1(1e-300, 4) == doctest::Approx(1.0).epsilon(1e-14));
  for (int n : {3, 4, 5}) {
    for (double lam : {0.5, 2.0, 8.75, 30.0}) {
      double mu = mu1(lam, n);
      CHECK(sqr(mu) - sqr((n - 2) / 2.0) == doctest::Approx(lam).epsilon(1e-14));
      double s = mu - (n - 2) / 2.0;
      CHECK(s * (s + n - 2) == doctest::Approx(lam).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(mu1(0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(mu1(-1.0, 3), std::invalid_argument);
}

TEST_CASE("resolvent modal identities and direct-oracle agreement") {
  auto cap = solve_cap(3, pi / 2, 512);
  auto g = make_spectral_grid(cap, 0);
  auto basis = eigen_solve(g, 6);

  auto direct = [&](double lam, const VecXd& f) {
    VecXd di = g.a_di - lam * g.b_di;
    return thomas_solve(g.a_lo, di, g.a_up, VecXd(g.b_di.cwiseProduct(f)));
  };

  {
    auto r = resolvent_solve(g, 0.0, basis[0].phi, basis);
    CHECK(!r.direct);
    CHECK(r.tail_bound < 1e-8);
    CHECK(mnorm(g, VecXd(r.u - basis[0].phi / basis[0].lambda)) < 1e-10);
  }
  {
    VecXd f = basis[0].phi + basis[1].phi;
    auto r = resolvent_solve(g, 0.75, f, basis);
    VecXd want = basis[0].phi / (basis[0].lambda - 0.75) +
                 basis[1].phi / (basis[1].lambda - 0.75);
    CHECK(!r.direct);
    CHECK(mnorm(g, VecXd(r.u - want)) < 1e-10);
  }
  {
    VecXd f = basis[0].phi + 0.5 * basis[1].phi - 0.3 * basis[2].phi +
              0.1 * basis[3].phi;
    auto r = resolvent_solve(g, -2.0, f, basis);
    CHECK(!r.direct);
    CHECK(mnorm(g, VecXd(r.u - direct(-2.0, f))) < 1e-5);
  }
  {
    VecXd f(g.theta.size());
    for (Eigen::Index a = 0; a < f.size(); ++a)
      f(a) = std::pow(std::cos(g.theta(a)), 2.5) * std::cos(g.theta(a));
    auto r = resolvent_solve(g, 0.3, f, basis);
    CHECK(mnorm(g, VecXd(r.u - direct(0.3, f))) < 1e-5);
  }
  CHECK_THROWS_AS(resolvent_solve(g, basis[0].lambda, basis[0].phi, basis),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      resolvent_solve(g, basis[1].lambda + 5e-9, basis[0].phi, basis),
      std::invalid_argument);
  CHECK_THROWS_AS(resolvent_solve(g, 0.0, basis[0].phi, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(resolvent_solve(g, 0.0, VecXd::Ones(3), basis),
                  std::invalid_argument);
}

TEST_CASE("decay exponents near the boundary") {
  auto cap = solve_cap(3, pi / 2, 512);
  auto g = make_spectral_grid(cap, 0);
  auto pairs = eigen_solve(g, 4);
  auto fit1 = decay_check(g, pairs[0]);
  CHECK(std::abs(fit1.nu - 2.5) < 0.05);
  CHECK(fit1.C > 0);
  CHECK(std::isfinite(fit1.C));
  for (const auto& p : pairs) CHECK(decay_check(g, p).nu > 0);

  EigenPair scaled = pairs[0];
  scaled.phi *= 2.0;
  CHECK(decay_check(g, scaled).nu == doctest::Approx(fit1.nu).epsilon(1e-12));

  auto tiny = solve_cap(3, pi / 2, 64);
  auto gt = make_spectral_grid(tiny, 0);
  auto pt = eigen_solve(gt, 1);
  CHECK_THROWS_AS(decay_check(gt, pt[0]), std::invalid_argument);
}

TEST_CASE("2d cap spectrum is the union of azimuthal modes") {
  auto dom = make_cap_domain(0.6 * pi, 64, 128);
  auto rho2d = solve_rho_2d(dom);
  auto pairs = eigen_solve(dom, rho2d, 6);

  auto cap = solve_cap(3, 0.6 * pi, 64);
  std::vector<double> expect;
  for (auto& p : eigen_solve(cap, 3, 0)) expect.push_back(p.lambda);
  for (int m : {1, 2})
    for (auto& p : eigen_solve(cap, 2, m)) {
      expect.push_back(p.lambda);
      expect.push_back(p.lambda);
    }
  std::sort(expect.begin(), expect.end());

  VecXd mass = sphere_mass_flat(dom);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].lambda > 0);
    if (i) CHECK(pairs[i].lambda > pairs[i - 1].lambda - 1e-9);
    CHECK(pairs[i].weak_residual < 1e-6);
    CHECK(std::abs(pairs[i].lambda - expect[i]) <
          0.02 * (1 + pairs[i].lambda));
    for (std::size_t j = 0; j <= i; ++j) {
      double ip = (mass.array() * pairs[i].phi.array() * pairs[j].phi.array())
                      .sum();
      CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
  }
  // ground state positive on the interior
  for (Eigen::Index i = 0; i <= dom.NT; ++i)
    for (Eigen::Index j = 0; j < dom.NP; ++j)
      if (dom.interior(i, j))
        CHECK(pairs[0].phi(i * dom.phi_nodes() + j) > 0);
}

TEST_CASE("spectral preconditions throw") {
  auto wedge = solve_wedge(pi / 2, 128);
  CHECK_THROWS_AS(make_spectral_grid(wedge, 0), std::invalid_argument);
  auto cap = solve_cap(3, pi / 2, 128);
  CHECK_THROWS_AS(make_spectral_grid(cap, -1), std::invalid_argument);
  auto doctored = cap;
  doctored.rho(5) = 0.0;
  CHECK_THROWS_AS(make_spectral_grid(doctored, 0), std::invalid_argument);
  auto g = make_spectral_grid(cap, 0);
  CHECK_THROWS_AS(eigen_solve(g, 0), std::invalid_argument);

  auto dom = make_cap_domain(pi / 2, 24, 48);
  ScalarField wrong;
  wrong.NT = 10;
  wrong.NP = 48;
  wrong.periodic = true;
  CHECK_THROWS_AS(eigen_solve(dom, wrong, 2), std::invalid_argument);
}
