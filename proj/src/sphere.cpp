#include "lncone/sphere.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <thread>
#include <utility>

namespace lncone {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

double clamp1(double x) { return std::max(-1.0, std::min(1.0, x)); }

// Geodesic distance from (Theta, phi) to the meridian arc phi = 0.
double meridian_distance(double th, double ph) {
  if (std::cos(ph) >= 0) return std::asin(clamp1(std::sin(th) * std::abs(std::sin(ph))));
  return std::min(th, pi - th);
}

struct Unknowns {
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> id;
  Eigen::Index count = 0;
  bool pole = false;  // id 0 is the shared Theta=0 node
};

Unknowns index_unknowns(const SphericalDomain& d) {
  Unknowns u;
  u.id.setConstant(d.NT + 1, d.phi_nodes(), -1);
  if (d.pole_interior) {
    u.pole = true;
    for (Eigen::Index j = 0; j < d.phi_nodes(); ++j) u.id(0, j) = 0;
    u.count = 1;
  }
  for (Eigen::Index i = u.pole ? 1 : 0; i <= d.NT; ++i)
    for (Eigen::Index j = 0; j < d.phi_nodes(); ++j)
      if (d.interior(i, j)) u.id(i, j) = u.count++;
  return u;
}

// One damped-Newton solve on the domain's own grid. X0 may carry a warm
// start; exterior and boundary entries stay zero.
MatXd raw_solve(const SphericalDomain& d, const MatXd* X0, double& newton_res,
                int& iters) {
  const Unknowns u = index_unknowns(d);
  if (u.count == 0) throw std::invalid_argument("solve_rho_2d: empty domain");
  const Eigen::Index phin = d.phi_nodes();
  const double hT = d.hT, hP = d.hP;

  VecXd x(u.count);
  for (Eigen::Index i = 0; i <= d.NT; ++i)
    for (Eigen::Index j = 0; j < phin; ++j)
      if (u.id(i, j) >= 0)
        x(u.id(i, j)) = X0 ? std::max((*X0)(i, j), 1e-8)
                           : std::max(std::min(d.dsig(i, j), 0.5), 1e-8);

  auto spread = [&](const VecXd& y) {
    MatXd X = MatXd::Zero(d.NT + 1, phin);
    for (Eigen::Index i = 0; i <= d.NT; ++i)
      for (Eigen::Index j = 0; j < phin; ++j)
        if (u.id(i, j) >= 0) X(i, j) = y(u.id(i, j));
    return X;
  };

  const double polK =
      std::sin(hT / 2) / (hT * (1.0 - std::cos(hT / 2)));

  auto assemble = [&](const VecXd& y, VecXd& F, std::vector<Triplet>* tr) {
    MatXd X = spread(y);
    F.setZero(u.count);
    auto row_range = [&](Eigen::Index i_lo, Eigen::Index i_hi,
                         std::vector<Triplet>* out) {
      for (Eigen::Index i = i_lo; i < i_hi; ++i) {
        if (i == 0 || i == d.NT) continue;
        const double si = std::sin(d.TH(i));
        const double fl = std::sin(d.TH(i) - hT / 2);
        const double fr = std::sin(d.TH(i) + hT / 2);
        for (Eigen::Index j = 0; j < phin; ++j) {
          const Eigen::Index k = u.id(i, j);
          if (k < 0 || (u.pole && i == 0)) continue;
          const Eigen::Index jp = d.periodic ? (j + 1) % phin : j + 1;
          const Eigen::Index jm = d.periodic ? (j + phin - 1) % phin : j - 1;
          const double c = X(i, j);
          const double xp = X(i + 1, j), xm = X(i - 1, j);
          const double yp = X(i, jp), ym = X(i, jm);
          const double lap = (fr * (xp - c) - fl * (c - xm)) / (si * hT * hT) +
                             (yp - 2 * c + ym) / (si * si * hP * hP);
          const double gT = (xp - xm) / (2 * hT);
          const double gP = (yp - ym) / (2 * hP);
          const double g2 = gT * gT + gP * gP / (si * si);
          F(k) = c * lap - 1.5 * g2 + 0.5 * c * c + 1.5;
          if (!out) continue;
          const double dc = lap +
                            c * (-(fr + fl) / (si * hT * hT) -
                                 2 / (si * si * hP * hP)) +
                            c;
          out->emplace_back(k, k, dc);
          auto add = [&](Eigen::Index ii, Eigen::Index jj, double v) {
            Eigen::Index kk = u.id(ii, jj);
            if (kk >= 0) out->emplace_back(k, kk, v);
          };
          add(i + 1, j, c * fr / (si * hT * hT) - 3 * gT / (2 * hT));
          add(i - 1, j, c * fl / (si * hT * hT) + 3 * gT / (2 * hT));
          add(i, jp, c / (si * si * hP * hP) - 3 * gP / (2 * si * si * hP));
          add(i, jm, c / (si * si * hP * hP) + 3 * gP / (2 * si * si * hP));
        }
      }
    };

    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    Eigen::Index nrows = d.NT + 1;
    if (hw > 1 && nrows > 8) {
      Eigen::Index nblk = std::min<Eigen::Index>(hw, nrows);
      std::vector<std::vector<Triplet>> parts(nblk);
      std::vector<std::thread> threads;
      for (Eigen::Index b = 0; b < nblk; ++b) {
        Eigen::Index lo = b * nrows / nblk, hi = (b + 1) * nrows / nblk;
        threads.emplace_back(row_range, lo, hi, tr ? &parts[b] : nullptr);
      }
      for (auto& t : threads) t.join();
      if (tr)
        for (auto& p : parts) tr->insert(tr->end(), p.begin(), p.end());
    } else {
      row_range(0, nrows, tr);
    }

    if (u.pole) {
      const double c0 = y(0);
      double mean1 = 0, mx = 0, my = 0;
      for (Eigen::Index j = 0; j < phin; ++j) {
        mean1 += X(1, j);
        mx += X(1, j) * std::cos(d.PH(j));
        my += X(1, j) * std::sin(d.PH(j));
      }
      mean1 /= double(phin);
      const double gx = 2 * mx / (hT * double(phin));
      const double gy = 2 * my / (hT * double(phin));
      const double lap0 = polK * (mean1 - c0);
      F(0) = c0 * lap0 - 1.5 * (gx * gx + gy * gy) + 0.5 * c0 * c0 + 1.5;
      if (tr) {
        tr->emplace_back(0, 0, lap0 - c0 * polK + c0);
        for (Eigen::Index j = 0; j < phin; ++j) {
          Eigen::Index kk = u.id(1, j);
          if (kk < 0) continue;
          double v = c0 * polK / double(phin) -
                     3 * (gx * std::cos(d.PH(j)) + gy * std::sin(d.PH(j))) *
                         2 / (hT * double(phin));
          tr->emplace_back(0, kk, v);
        }
      }
    }
  };

  Eigen::SparseLU<SpMat> lu;
  bool analyzed = false;
  VecXd F(u.count);
  iters = 0;
  for (int it = 0; it < 40; ++it) {
    iters = it + 1;
    std::vector<Triplet> tr;
    tr.reserve(5 * u.count);
    assemble(x, F, &tr);
    SpMat J(u.count, u.count);
    J.setFromTriplets(tr.begin(), tr.end());
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("solve_rho_2d: singular Newton system");
    VecXd delta = lu.solve(-F);
    double lam = 1.0;
    while (lam > 1e-8 && (x + lam * delta).minCoeff() <= 1e-14) lam /= 2;
    x += lam * delta;
    if ((lam * delta.cwiseAbs()).maxCoeff() < 1e-11) break;
  }
  assemble(x, F, nullptr);
  newton_res = F.cwiseAbs().maxCoeff();
  if (!(newton_res < 1e-8) || !x.allFinite())
    throw std::runtime_error("solve_rho_2d: Newton did not converge");
  return spread(x);
}

SphericalDomain refine_domain(const SphericalDomain& d) {
  switch (d.kind) {
    case DomainKind::cap:
      return make_cap_domain(d.alpha, 2 * d.NT, 2 * d.NP);
    case DomainKind::lune:
      return make_lune_domain(d.alpha, 2 * d.NT, 2 * d.NP);
    case DomainKind::masked:
      return make_masked_domain(d.TH(0), d.TH(d.NT), d.PH(0), d.PH(d.NP),
                                2 * d.NT, 2 * d.NP, d.inside);
  }
  throw std::logic_error("refine_domain: bad kind");
}

// Bilinear prolongation of a coarse node field to the refined grid.
MatXd prolong(const SphericalDomain& fine, const MatXd& C) {
  const Eigen::Index phin = fine.phi_nodes();
  MatXd X = MatXd::Zero(fine.NT + 1, phin);
  const Eigen::Index cph = C.cols();
  auto cval = [&](Eigen::Index ci, Eigen::Index cj) {
    if (fine.periodic) cj = (cj % cph + cph) % cph;
    else cj = std::min(cj, cph - 1);
    ci = std::min(ci, Eigen::Index(C.rows() - 1));
    return C(ci, cj);
  };
  for (Eigen::Index i = 0; i <= fine.NT; ++i)
    for (Eigen::Index j = 0; j < phin; ++j) {
      Eigen::Index ci = i / 2, cj = j / 2;
      if (i % 2 == 0 && j % 2 == 0) X(i, j) = cval(ci, cj);
      else if (i % 2 == 0)
        X(i, j) = 0.5 * (cval(ci, cj) + cval(ci, cj + 1));
      else if (j % 2 == 0)
        X(i, j) = 0.5 * (cval(ci, cj) + cval(ci + 1, cj));
      else
        X(i, j) = 0.25 * (cval(ci, cj) + cval(ci + 1, cj) + cval(ci, cj + 1) +
                          cval(ci + 1, cj + 1));
    }
  return X;
}

MatXd restrict_nodes(const SphericalDomain& coarse, const MatXd& Ffine) {
  MatXd R(coarse.NT + 1, coarse.phi_nodes());
  for (Eigen::Index i = 0; i <= coarse.NT; ++i)
    for (Eigen::Index j = 0; j < coarse.phi_nodes(); ++j)
      R(i, j) = Ffine(2 * i, 2 * j);
  return R;
}

}  // namespace

SphericalDomain make_cap_domain(double alpha, Eigen::Index NT,
                                Eigen::Index NP) {
  if (!(alpha > 0 && alpha < pi))
    throw std::invalid_argument("make_cap_domain: alpha out of range");
  if (NT < 16 || NP < 8)
    throw std::invalid_argument("make_cap_domain: grid too coarse");
  SphericalDomain d;
  d.kind = DomainKind::cap;
  d.alpha = alpha;
  d.NT = NT;
  d.NP = NP;
  d.hT = alpha / double(NT);
  d.hP = 2 * pi / double(NP);
  d.periodic = true;
  d.pole_interior = true;
  d.TH = linspace(0.0, alpha, NT + 1);
  d.PH.resize(NP);
  for (Eigen::Index j = 0; j < NP; ++j) d.PH(j) = d.hP * double(j);
  d.interior.setConstant(NT + 1, NP, false);
  d.dsig.setZero(NT + 1, NP);
  for (Eigen::Index i = 0; i < NT; ++i)
    for (Eigen::Index j = 0; j < NP; ++j) {
      d.interior(i, j) = true;
      d.dsig(i, j) = alpha - d.TH(i);
    }
  return d;
}

SphericalDomain make_lune_domain(double alpha_l, Eigen::Index NT,
                                 Eigen::Index NP) {
  if (!(alpha_l > 0 && alpha_l <= pi))
    throw std::invalid_argument("make_lune_domain: opening out of range");
  if (NT < 16 || NP < 8)
    throw std::invalid_argument("make_lune_domain: grid too coarse");
  SphericalDomain d;
  d.kind = DomainKind::lune;
  d.alpha = alpha_l;
  d.NT = NT;
  d.NP = NP;
  d.hT = pi / double(NT);
  d.hP = alpha_l / double(NP);
  d.TH = linspace(0.0, pi, NT + 1);
  d.PH = linspace(0.0, alpha_l, NP + 1);
  d.interior.setConstant(NT + 1, NP + 1, false);
  d.dsig.setZero(NT + 1, NP + 1);
  for (Eigen::Index i = 1; i < NT; ++i)
    for (Eigen::Index j = 1; j < NP; ++j) {
      d.interior(i, j) = true;
      d.dsig(i, j) = std::min(meridian_distance(d.TH(i), d.PH(j)),
                              meridian_distance(d.TH(i), alpha_l - d.PH(j)));
    }
  return d;
}

SphericalDomain make_masked_domain(
    double theta_lo, double theta_hi, double phi_lo, double phi_hi,
    Eigen::Index NT, Eigen::Index NP,
    const std::function<bool(double, double)>& inside) {
  if (!(0 < theta_lo && theta_lo < theta_hi && theta_hi < pi))
    throw std::invalid_argument("make_masked_domain: Theta range invalid");
  if (!(phi_lo < phi_hi))
    throw std::invalid_argument("make_masked_domain: phi range invalid");
  if (NT < 16 || NP < 8)
    throw std::invalid_argument("make_masked_domain: grid too coarse");
  SphericalDomain d;
  d.kind = DomainKind::masked;
  d.NT = NT;
  d.NP = NP;
  d.hT = (theta_hi - theta_lo) / double(NT);
  d.hP = (phi_hi - phi_lo) / double(NP);
  d.TH = linspace(theta_lo, theta_hi, NT + 1);
  d.PH = linspace(phi_lo, phi_hi, NP + 1);
  d.inside = inside;
  d.interior.setConstant(NT + 1, NP + 1, false);
  for (Eigen::Index i = 1; i < NT; ++i)
    for (Eigen::Index j = 1; j < NP; ++j)
      d.interior(i, j) = inside(d.TH(i), d.PH(j));

  // connectivity (4-neighborhood)
  Eigen::Index first_i = -1, first_j = -1, n_int = 0;
  for (Eigen::Index i = 0; i <= NT; ++i)
    for (Eigen::Index j = 0; j <= NP; ++j)
      if (d.interior(i, j)) {
        if (first_i < 0) { first_i = i; first_j = j; }
        ++n_int;
      }
  if (n_int == 0)
    throw std::invalid_argument("make_masked_domain: empty mask");
  BoolMat seen = BoolMat::Constant(NT + 1, NP + 1, false);
  std::deque<std::pair<Eigen::Index, Eigen::Index>> q{{first_i, first_j}};
  seen(first_i, first_j) = true;
  Eigen::Index reached = 0;
  while (!q.empty()) {
    auto [i, j] = q.front();
    q.pop_front();
    ++reached;
    const Eigen::Index di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
    for (int t = 0; t < 4; ++t) {
      Eigen::Index ii = i + di[t], jj = j + dj[t];
      if (ii < 0 || ii > NT || jj < 0 || jj > NP) continue;
      if (d.interior(ii, jj) && !seen(ii, jj)) {
        seen(ii, jj) = true;
        q.emplace_back(ii, jj);
      }
    }
  }
  if (reached != n_int)
    throw std::invalid_argument("make_masked_domain: disconnected mask");

  // geodesic distance to the set of boundary nodes
  std::vector<std::pair<double, double>> bnd;
  for (Eigen::Index i = 0; i <= NT; ++i)
    for (Eigen::Index j = 0; j <= NP; ++j) {
      if (d.interior(i, j)) continue;
      bool adj = false;
      const Eigen::Index di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
      for (int t = 0; t < 4 && !adj; ++t) {
        Eigen::Index ii = i + di[t], jj = j + dj[t];
        adj = ii >= 0 && ii <= NT && jj >= 0 && jj <= NP && d.interior(ii, jj);
      }
      if (adj) bnd.emplace_back(d.TH(i), d.PH(j));
    }
  d.dsig.setZero(NT + 1, NP + 1);
  for (Eigen::Index i = 0; i <= NT; ++i)
    for (Eigen::Index j = 0; j <= NP; ++j) {
      if (!d.interior(i, j)) continue;
      double ct = std::cos(d.TH(i)), st = std::sin(d.TH(i));
      double best = pi;
      for (auto& [tb, pb] : bnd) {
        double dot = st * std::sin(tb) * std::cos(d.PH(j) - pb) +
                     ct * std::cos(tb);
        best = std::min(best, std::acos(clamp1(dot)));
      }
      d.dsig(i, j) = best;
    }
  return d;
}

ScalarField solve_rho_2d(const SphericalDomain& dom, SphereReport* report) {
  double res1 = 0, res2 = 0;
  int it1 = 0, it2 = 0;
  MatXd r1 = raw_solve(dom, nullptr, res1, it1);
  SphericalDomain fine = refine_domain(dom);
  MatXd warm = prolong(fine, r1);
  MatXd r2 = raw_solve(fine, &warm, res2, it2);
  MatXd r2r = restrict_nodes(dom, r2);
  MatXd E = r2r + (r2r - r1) / 3.0;

  ScalarField f;
  f.NT = dom.NT;
  f.NP = dom.NP;
  f.hT = dom.hT;
  f.hP = dom.hP;
  f.theta0 = dom.TH(0);
  f.phi0 = dom.PH(0);
  f.periodic = dom.periodic;
  f.v = E;

  if (report) {
    report->newton_res = std::max(res1, res2);
    report->iters = it1 + it2;
    report->ladder_agreement = (E - r2r).cwiseAbs().maxCoeff();
    report->raw = {r1, r2};

    const Eigen::Index phin = dom.phi_nodes();
    auto carries_value = [&](Eigen::Index i, Eigen::Index j) {
      Eigen::Index jj = dom.periodic ? (j % phin + phin) % phin : j;
      if (!dom.periodic && (jj < 0 || jj >= phin)) return false;
      if (i < 0 || i > dom.NT) return false;
      if (dom.interior(i, jj)) return true;
      if (dom.kind == DomainKind::cap) return i == dom.NT;
      if (dom.kind == DomainKind::lune)
        return i == 0 || i == dom.NT || jj == 0 || jj == dom.NP;
      return false;
    };
    auto val = [&](Eigen::Index i, Eigen::Index j) {
      Eigen::Index jj = dom.periodic ? (j % phin + phin) % phin : j;
      return E(i, jj);
    };

    double worst = 0;
    double c3 = std::numeric_limits<double>::infinity(), c4 = 0;
    for (Eigen::Index i = 0; i <= dom.NT; ++i)
      for (Eigen::Index j = 0; j < phin; ++j) {
        if (!dom.interior(i, j)) continue;
        double q = E(i, j) / dom.dsig(i, j);
        c3 = std::min(c3, q);
        c4 = std::max(c4, q);
        if (dom.pole_interior && i < 3) continue;
        bool ok = i >= 2 && i <= dom.NT - 2;
        for (int t = -2; t <= 2 && ok; ++t)
          ok = carries_value(i + t, j) && carries_value(i, j + t);
        if (!ok) continue;
        const double si = std::sin(dom.TH(i));
        const double ct = std::cos(dom.TH(i)) / si;
        const double hT = dom.hT, hP = dom.hP;
        double d1T = (val(i - 2, j) - 8 * val(i - 1, j) + 8 * val(i + 1, j) -
                      val(i + 2, j)) /
                     (12 * hT);
        double d2T = (-val(i - 2, j) + 16 * val(i - 1, j) - 30 * E(i, j) +
                      16 * val(i + 1, j) - val(i + 2, j)) /
                     (12 * hT * hT);
        double d1P = (val(i, j - 2) - 8 * val(i, j - 1) + 8 * val(i, j + 1) -
                      val(i, j + 2)) /
                     (12 * hP);
        double d2P = (-val(i, j - 2) + 16 * val(i, j - 1) - 30 * E(i, j) +
                      16 * val(i, j + 1) - val(i, j + 2)) /
                     (12 * hP * hP);
        double lap = d2T + ct * d1T + d2P / (si * si);
        double g2 = d1T * d1T + d1P * d1P / (si * si);
        double R = E(i, j) * lap - 1.5 * g2 + 0.5 * sqr(E(i, j)) + 1.5;
        worst = std::max(worst, 2.0 / 3.0 * std::abs(R));
      }
    report->residual = worst;
    report->c3 = c3;
    report->c4 = c4;
  }
  return f;
}

std::vector<AzimuthalMode> azimuthal_modes(const ScalarField& f, int m_max) {
  if (!f.periodic)
    throw std::invalid_argument("azimuthal_modes: needs a cap field");
  if (m_max < 0 || 2 * Eigen::Index(m_max) >= f.NP)
    throw std::invalid_argument("azimuthal_modes: m_max out of range");
  std::vector<AzimuthalMode> modes;
  for (int m = 0; m <= m_max; ++m) {
    AzimuthalMode md;
    md.m = m;
    md.cos_part.setZero(f.NT + 1);
    md.sin_part.setZero(f.NT + 1);
    for (Eigen::Index i = 0; i <= f.NT; ++i) {
      double a = 0, b = 0;
      for (Eigen::Index j = 0; j < f.NP; ++j) {
        double ph = f.phi0 + f.hP * double(j);
        a += f.v(i, j) * std::cos(m * ph);
        b += f.v(i, j) * std::sin(m * ph);
      }
      double scale = (m == 0 ? 1.0 : 2.0) / double(f.NP);
      md.cos_part(i) = scale * a;
      md.sin_part(i) = scale * b;
    }
    modes.push_back(std::move(md));
  }
  return modes;
}

}  // namespace lncone
