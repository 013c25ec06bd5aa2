#include "lncone/spectral.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace lncone {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

double pole_cell_mass(int n, double h) {
  if (n == 3) return 1.0 - std::cos(h / 2);
  if (n == 4) return h / 4 - std::sin(h) / 4;
  const int P = 64;
  const double b = h / 2, dt = b / P;
  double s = 0;
  for (int i = 0; i < P; ++i) {
    double t0 = i * dt, t2 = t0 + dt, t1 = t0 + dt / 2;
    s += dt / 6 *
         (std::pow(std::sin(t0), n - 2) + 4 * std::pow(std::sin(t1), n - 2) +
          std::pow(std::sin(t2), n - 2));
  }
  return s;
}

VecXd apply_pencil_a(const SpectralGrid& g, const VecXd& y) {
  const Eigen::Index ni = y.size();
  VecXd r = g.a_di.cwiseProduct(y);
  for (Eigen::Index a = 0; a + 1 < ni; ++a) {
    r(a) += g.a_up(a) * y(a + 1);
    r(a + 1) += g.a_lo(a) * y(a);
  }
  return r;
}

void fix_sign(EigenPair& p, bool ground) {
  const double mx = p.phi.cwiseAbs().maxCoeff();
  if (ground) {
    Eigen::Index at;
    p.phi.cwiseAbs().maxCoeff(&at);
    if (p.phi(at) < 0) p.phi = -p.phi;
    return;
  }
  for (Eigen::Index a = 0; a < p.phi.size(); ++a)
    if (std::abs(p.phi(a)) > 1e-8 * mx) {
      if (p.phi(a) < 0) p.phi = -p.phi;
      return;
    }
}

}  // namespace

SpectralGrid make_spectral_grid(const RadialProfile<double>& cap, int m) {
  if (cap.left != EndpointKind::regular_center)
    throw std::invalid_argument("make_spectral_grid: needs a cap profile");
  if (m < 0) throw std::invalid_argument("make_spectral_grid: negative mode");
  SpectralGrid g;
  g.n = cap.n;
  g.m = m;
  g.alpha = cap.alpha;
  g.N = cap.N;
  g.h = cap.h();
  g.pole = (m == 0);
  const Eigen::Index off = g.pole ? 0 : 1;
  const Eigen::Index ni = cap.N - off;
  const int n = g.n;
  const double h = g.h;
  const double kap = n * (n + 2) / 4.0;
  g.theta.resize(ni);
  g.rho.resize(ni);
  g.mass.resize(ni);
  g.flux.resize(ni);
  for (Eigen::Index a = 0; a < ni; ++a) {
    const Eigen::Index i = a + off;
    g.theta(a) = cap.theta(i);
    g.rho(a) = cap.rho(i);
    if (!(g.rho(a) > 0))
      throw std::invalid_argument(
          "make_spectral_grid: rho vanishes at an interior node");
    g.mass(a) = (i == 0) ? pole_cell_mass(n, h)
                         : std::pow(std::sin(g.theta(a)), n - 2) * h;
    g.flux(a) = std::pow(std::sin(g.theta(a) + h / 2), n - 2) / h;
  }
  g.a_lo.setZero(ni);
  g.a_di.setZero(ni);
  g.a_up.setZero(ni);
  g.b_di.resize(ni);
  const double pole_face = std::pow(std::sin(h / 2), n - 2) / h;
  for (Eigen::Index a = 0; a < ni; ++a) {
    const double fr = g.flux(a);
    const double fl = (a > 0) ? g.flux(a - 1) : (g.pole ? 0.0 : pole_face);
    const double r2 = sqr(g.rho(a));
    const double ang = (m > 0) ? sqr(double(m) / std::sin(g.theta(a))) : 0.0;
    g.a_di(a) = r2 * ((fl + fr) / g.mass(a) + ang) + kap;
    g.b_di(a) = r2;
    if (a + 1 < ni) {
      g.a_up(a) = -r2 * fr / g.mass(a);
      g.a_lo(a) = -sqr(g.rho(a + 1)) * fr / g.mass(a + 1);
    }
  }
  return g;
}

double inner(const SpectralGrid& g, const VecXd& x, const VecXd& y) {
  return (g.mass.array() * x.array() * y.array()).sum();
}

double rayleigh(const SpectralGrid& g, const VecXd& phi) {
  const Eigen::Index ni = phi.size();
  const double kap = g.n * (g.n + 2) / 4.0;
  double num = 0;
  for (Eigen::Index a = 0; a + 1 < ni; ++a)
    num += g.flux(a) * sqr(phi(a + 1) - phi(a));
  num += g.flux(ni - 1) * sqr(phi(ni - 1));
  if (!g.pole)
    num += std::pow(std::sin(g.h / 2), g.n - 2) / g.h * sqr(phi(0));
  for (Eigen::Index a = 0; a < ni; ++a) {
    const double ang =
        (g.m > 0) ? sqr(double(g.m) / std::sin(g.theta(a))) : 0.0;
    num += g.mass(a) * (kap / sqr(g.rho(a)) + ang) * sqr(phi(a));
  }
  return num / inner(g, phi, phi);
}

std::vector<EigenPair> eigen_solve(const SpectralGrid& g, Eigen::Index k) {
  const Eigen::Index ni = g.a_di.size();
  if (k < 1 || 2 * k > ni)
    throw std::invalid_argument("eigen_solve: bad pair count");
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> gauss;
  std::vector<EigenPair> pairs;
  for (Eigen::Index j = 0; j < k; ++j) {
    VecXd x(ni);
    for (Eigen::Index a = 0; a < ni; ++a) x(a) = gauss(rng);
    auto project = [&](VecXd& v) {
      for (const auto& p : pairs) v -= inner(g, v, p.phi) * p.phi;
    };
    project(x);
    x /= std::sqrt(inner(g, x, x));
    double sigma = 0, lam = 0, res = 0;
    double prev = std::numeric_limits<double>::infinity();
    bool ok = false;
    for (int it = 0; it < 500; ++it) {
      VecXd di = g.a_di - sigma * g.b_di;
      VecXd y;
      try {
        y = thomas_solve(g.a_lo, di, g.a_up,
                         VecXd(g.b_di.cwiseProduct(x)));
      } catch (const std::runtime_error&) {
        sigma = (sigma == 0) ? 1e-12 : sigma * (1.0 - 1e-10);
        continue;
      }
      project(y);
      project(y);
      const double nn = std::sqrt(inner(g, y, y));
      if (!(nn > 0) || !y.allFinite())
        throw std::runtime_error("eigen_solve: iteration collapsed");
      y /= nn;
      lam = rayleigh(g, y);
      VecXd r = apply_pencil_a(g, y) - lam * g.b_di.cwiseProduct(y);
      res = std::sqrt(inner(g, r, r));
      x = y;
      // accept at the tight target, or at the contract level once the
      // residual floor (set by earlier pairs' own accuracy) is reached
      if (res < 1e-11 * (1 + std::abs(lam)) ||
          (res < 1e-8 * (1 + std::abs(lam)) && res > 0.5 * prev)) {
        ok = true;
        break;
      }
      prev = res;
      if (it >= 4) sigma = lam;
    }
    if (!ok)
      throw std::runtime_error(
          "eigen_solve: inverse iteration did not converge");
    EigenPair p;
    p.m = g.m;
    p.lambda = lam;
    p.phi = x;
    p.weak_residual = res;
    pairs.push_back(std::move(p));
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const EigenPair& a, const EigenPair& b) {
              return a.lambda < b.lambda;
            });
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    pairs[j].index = int(j) + 1;
    fix_sign(pairs[j], j == 0);
  }
  return pairs;
}

std::vector<EigenPair> eigen_solve(const RadialProfile<double>& cap,
                                   Eigen::Index k, int m) {
  return eigen_solve(make_spectral_grid(cap, m), k);
}

double mu1(double lambda1, int n) {
  if (!(lambda1 > 0))
    throw std::invalid_argument("mu1: lambda1 must be positive");
  return std::sqrt(sqr((n - 2) / 2.0) + lambda1);
}

ResolventResult resolvent_solve(const SpectralGrid& g, double lambda,
                                const VecXd& f,
                                const std::vector<EigenPair>& basis) {
  const Eigen::Index ni = g.a_di.size();
  if (f.size() != ni)
    throw std::invalid_argument("resolvent_solve: field size mismatch");
  if (basis.empty())
    throw std::invalid_argument("resolvent_solve: empty basis");
  double tail_edge = -std::numeric_limits<double>::infinity();
  for (const auto& p : basis) {
    if (std::abs(p.lambda - lambda) <= 1e-8)
      throw std::invalid_argument(
          "resolvent_solve: lambda within 1e-8 of the spectrum");
    tail_edge = std::max(tail_edge, p.lambda);
  }
  ResolventResult r;
  r.u.setZero(ni);
  VecXd proj = VecXd::Zero(ni);
  for (const auto& p : basis) {
    const double c = inner(g, f, p.phi);
    r.u += c / (p.lambda - lambda) * p.phi;
    proj += c * p.phi;
  }
  const double tailn = std::sqrt(inner(g, VecXd(f - proj), VecXd(f - proj)));
  const double dist = tail_edge - lambda;
  r.tail_bound =
      dist > 0 ? tailn / dist : std::numeric_limits<double>::infinity();
  if (!(r.tail_bound <= 1e-5)) {
    VecXd di = g.a_di - lambda * g.b_di;
    r.u = thomas_solve(g.a_lo, di, g.a_up, VecXd(g.b_di.cwiseProduct(f)));
    r.direct = true;
  }
  return r;
}

DecayFit decay_check(const SpectralGrid& g, const EigenPair& pair) {
  const Eigen::Index ni = g.a_di.size();
  if (pair.phi.size() != ni)
    throw std::invalid_argument("decay_check: pair does not match grid");
  std::vector<Eigen::Index> band;
  for (Eigen::Index a = 0; a < ni; ++a)
    if (g.rho(a) > 1e-3 && g.rho(a) < 0.1 && std::abs(pair.phi(a)) > 0)
      band.push_back(a);
  if (band.size() < 8)
    throw std::invalid_argument("decay_check: too few near-boundary samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (Eigen::Index a : band) {
    const double lx = std::log(g.rho(a));
    const double ly = std::log(std::abs(pair.phi(a)));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double nb = double(band.size());
  DecayFit fit;
  fit.nu = (nb * sxy - sx * sy) / (nb * sxx - sx * sx);
  const double h = g.h, eps = 0.05;
  auto d1 = [&](Eigen::Index a) {
    if (a == 0) return (-3 * pair.phi(0) + 4 * pair.phi(1) - pair.phi(2)) / (2 * h);
    if (a == ni - 1)
      return (3 * pair.phi(a) - 4 * pair.phi(a - 1) + pair.phi(a - 2)) / (2 * h);
    return (pair.phi(a + 1) - pair.phi(a - 1)) / (2 * h);
  };
  auto d2 = [&](Eigen::Index a) {
    if (a == 0)
      return (2 * pair.phi(0) - 5 * pair.phi(1) + 4 * pair.phi(2) - pair.phi(3)) /
             (h * h);
    if (a == ni - 1)
      return (2 * pair.phi(a) - 5 * pair.phi(a - 1) + 4 * pair.phi(a - 2) -
              pair.phi(a - 3)) /
             (h * h);
    return (pair.phi(a + 1) - 2 * pair.phi(a) + pair.phi(a - 1)) / (h * h);
  };
  for (Eigen::Index a : band) {
    const double val = std::abs(pair.phi(a)) + g.rho(a) * std::abs(d1(a)) +
                       sqr(g.rho(a)) * std::abs(d2(a));
    fit.C = std::max(fit.C, val / std::pow(g.rho(a), fit.nu - eps));
  }
  return fit;
}

VecXd sphere_mass_flat(const SphericalDomain& dom) {
  const Eigen::Index phin = dom.phi_nodes();
  VecXd mass = VecXd::Zero((dom.NT + 1) * phin);
  for (Eigen::Index i = 0; i <= dom.NT; ++i)
    for (Eigen::Index j = 0; j < phin; ++j) {
      if (!dom.interior(i, j)) continue;
      if (dom.pole_interior && i == 0) {
        if (j == 0) mass(0) = 2 * pi * (1.0 - std::cos(dom.hT / 2));
        continue;
      }
      mass(i * phin + j) = std::sin(dom.TH(i)) * dom.hT * dom.hP;
    }
  return mass;
}

std::vector<EigenPair> eigen_solve(const SphericalDomain& dom,
                                   const ScalarField& rho, Eigen::Index k) {
  const Eigen::Index phin = dom.phi_nodes();
  if (rho.NT != dom.NT || rho.NP != dom.NP || rho.periodic != dom.periodic)
    throw std::invalid_argument("eigen_solve: rho does not match the domain");
  const double kap = 15.0 / 4.0;

  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> id;
  id.setConstant(dom.NT + 1, phin, -1);
  Eigen::Index nun = 0;
  if (dom.pole_interior) {
    for (Eigen::Index j = 0; j < phin; ++j) id(0, j) = 0;
    nun = 1;
  }
  for (Eigen::Index i = dom.pole_interior ? 1 : 0; i <= dom.NT; ++i)
    for (Eigen::Index j = 0; j < phin; ++j)
      if (dom.interior(i, j)) id(i, j) = nun++;
  if (k < 1 || 2 * k > nun)
    throw std::invalid_argument("eigen_solve: bad pair count");

  VecXd mass(nun), rh(nun);
  mass.setZero();
  for (Eigen::Index i = 0; i <= dom.NT; ++i)
    for (Eigen::Index j = 0; j < phin; ++j) {
      if (id(i, j) < 0) continue;
      const Eigen::Index q = id(i, j);
      if (dom.pole_interior && i == 0) {
        mass(0) = 2 * pi * (1.0 - std::cos(dom.hT / 2));
        rh(0) = rho.v(0, 0);
      } else {
        mass(q) = std::sin(dom.TH(i)) * dom.hT * dom.hP;
        rh(q) = rho.v(i, j);
      }
      if (!(rh(q) > 0))
        throw std::invalid_argument(
            "eigen_solve: rho vanishes at an interior node");
    }

  // face list (a, b, conductance); b = -1 against Dirichlet zero
  struct Face {
    Eigen::Index a, b;
    double f;
  };
  std::vector<Face> faces;
  auto carries = [&](Eigen::Index i, Eigen::Index j) {
    if (dom.periodic) j = (j % phin + phin) % phin;
    return (i >= 0 && i <= dom.NT && j >= 0 && j < phin) ? id(i, j)
                                                         : Eigen::Index(-1);
  };
  for (Eigen::Index i = 0; i <= dom.NT; ++i)
    for (Eigen::Index j = 0; j < phin; ++j) {
      const Eigen::Index q = id(i, j);
      if (q < 0) continue;
      if (dom.pole_interior && i == 0) {
        if (j == 0)
          for (Eigen::Index jj = 0; jj < phin; ++jj)
            faces.push_back(
                {0, carries(1, jj),
                 std::sin(dom.hT / 2) * dom.hP / dom.hT});
        continue;
      }
      // upward Theta face and forward phi face only, to visit each face once
      const Eigen::Index qu = carries(i + 1, j);
      if (i + 1 <= dom.NT)
        faces.push_back(
            {q, qu, std::sin(dom.TH(i) + dom.hT / 2) * dom.hP / dom.hT});
      const Eigen::Index qf = carries(i, j + 1);
      if (dom.periodic || j + 1 < phin)
        faces.push_back({q, qf, dom.hT / (std::sin(dom.TH(i)) * dom.hP)});
      if (!dom.pole_interior || i > 1) {
        if (carries(i - 1, j) < 0 && i - 1 >= 0)
          faces.push_back(
              {q, -1, std::sin(dom.TH(i) - dom.hT / 2) * dom.hP / dom.hT});
      }
      if (!dom.periodic && j - 1 >= 0 && carries(i, j - 1) < 0)
        faces.push_back({q, -1, dom.hT / (std::sin(dom.TH(i)) * dom.hP)});
    }

  VecXd kdiag = VecXd::Zero(nun);
  std::vector<Triplet> ktr;
  for (const auto& fc : faces) {
    kdiag(fc.a) += fc.f;
    if (fc.b >= 0) {
      kdiag(fc.b) += fc.f;
      ktr.emplace_back(fc.a, fc.b, -fc.f);
      ktr.emplace_back(fc.b, fc.a, -fc.f);
    }
  }
  for (Eigen::Index q = 0; q < nun; ++q) ktr.emplace_back(q, q, kdiag(q));
  SpMat K(nun, nun);
  K.setFromTriplets(ktr.begin(), ktr.end());

  const VecXd r2 = rh.cwiseProduct(rh);
  // A = D_rho2 M^-1 K + kappa I, B = D_rho2
  const VecXd row_scale = r2.cwiseQuotient(mass);
  SpMat A = row_scale.asDiagonal() * K;
  SpMat Ik(nun, nun);
  Ik.setIdentity();
  A = A + kap * Ik;
  std::vector<Triplet> btr;
  for (Eigen::Index q = 0; q < nun; ++q) btr.emplace_back(q, q, r2(q));
  SpMat Bsp(nun, nun);
  Bsp.setFromTriplets(btr.begin(), btr.end());

  auto minner = [&](const VecXd& x, const VecXd& y) {
    return (mass.array() * x.array() * y.array()).sum();
  };
  auto ray = [&](const VecXd& y) {
    const double num =
        y.dot(K * y) +
        (mass.array() * kap / r2.array() * y.array().square()).sum();
    return num / minner(y, y);
  };

  std::mt19937_64 rng(12345);
  std::normal_distribution<double> gauss;
  std::vector<EigenPair> pairs;
  std::vector<VecXd> vecs;
  Eigen::SparseLU<SpMat> lu;
  double sigma = 0;
  bool analyzed = false, factored = false;
  auto refactor = [&](double s) {
    SpMat S = A - s * Bsp;
    if (!analyzed) {
      lu.analyzePattern(S);
      analyzed = true;
    }
    lu.factorize(S);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("eigen_solve: singular shifted system");
    sigma = s;
    factored = true;
  };

  for (Eigen::Index j = 0; j < k; ++j) {
    VecXd x(nun);
    for (Eigen::Index a = 0; a < nun; ++a) x(a) = gauss(rng);
    auto project = [&](VecXd& v) {
      for (const auto& w : vecs) v -= minner(v, w) * w;
    };
    project(x);
    x /= std::sqrt(minner(x, x));
    if (!factored || sigma != 0) refactor(0);
    double lam = 0, res = 0;
    double prev = std::numeric_limits<double>::infinity();
    bool ok = false;
    for (int it = 0; it < 500; ++it) {
      VecXd y = lu.solve(r2.cwiseProduct(x));
      project(y);
      project(y);
      const double nn = std::sqrt(minner(y, y));
      if (!(nn > 0) || !y.allFinite())
        throw std::runtime_error("eigen_solve: iteration collapsed");
      y /= nn;
      lam = ray(y);
      VecXd r = A * y - lam * r2.cwiseProduct(y);
      res = std::sqrt(minner(r, r));
      x = y;
      // accept at the tight target, or at the contract level once the
      // residual floor (set by earlier pairs' own accuracy) is reached
      if (res < 1e-11 * (1 + std::abs(lam)) ||
          (res < 1e-8 * (1 + std::abs(lam)) && res > 0.5 * prev)) {
        ok = true;
        break;
      }
      prev = res;
      // keep the shift a safe margin off lambda: deflated copies of a
      // degenerate eigenvalue would otherwise make the solve amplify their
      // roundoff leak without bound
      const double target = lam - 1e-6 * (1 + std::abs(lam));
      if (it >= 4 && std::abs(target - sigma) > 1e-4 * (1 + std::abs(lam)))
        refactor(target);
    }
    if (!ok)
      throw std::runtime_error(
          "eigen_solve: inverse iteration did not converge");
    vecs.push_back(x);
    EigenPair p;
    p.m = -1;
    p.lambda = lam;
    p.weak_residual = res;
    p.phi.setZero((dom.NT + 1) * phin);
    for (Eigen::Index i = 0; i <= dom.NT; ++i)
      for (Eigen::Index jj = 0; jj < phin; ++jj)
        if (id(i, jj) >= 0) p.phi(i * phin + jj) = x(id(i, jj));
    pairs.push_back(std::move(p));
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const EigenPair& a, const EigenPair& b) {
              return a.lambda < b.lambda;
            });
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    pairs[j].index = int(j) + 1;
    fix_sign(pairs[j], j == 0);
  }
  return pairs;
}

}  // namespace lncone
