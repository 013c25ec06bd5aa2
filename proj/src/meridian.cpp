#include <lncone/meridian.hpp>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <queue>
#include <stdexcept>

namespace lncone {

namespace {

// One stencil arm: length, neighbor unknown (-1 for a boundary hit), and the
// cone reference value w_V at the hit point (0 on the lateral face and for
// ball domains); the outer data is wv scaled by the bracket factor.
struct Arm {
  double len = 0;
  Eigen::Index k = -1;
  double wv = 0;
  bool outer = false;
};

struct Stencil {
  Eigen::Index i = 0, j = 0;
  std::array<Arm, 4> arm;  // E, W, N, S
  bool cut = false;        // some arm hits the boundary
  bool near_cut = false;   // a neighbor row is cut
};

double cone_angle(const MeridianDomain& dom, double r, double z) {
  auto y = dom.straighten(r, z);
  return std::atan2(y[0], y[1]);
}

}  // namespace

bool MeridianDomain::inside(double r, double z) const {
  if (r < 0) return false;
  if (r * r + z * z >= r_out * r_out) return false;
  if (kind == Kind::ball) return true;
  if (r == 0 && z <= 0) return false;
  if (c != 0) {
    double A = 1 + 4 * c * (z - c * r * r);
    if (A <= 0) return false;
  }
  auto y = straighten(r, z);
  if (y[0] == 0 && y[1] == 0) return false;
  return std::atan2(y[0], y[1]) < alpha;
}

std::array<double, 2> MeridianDomain::straighten(double r, double z) const {
  if (c == 0) return {r, z};
  double A = 1 + 4 * c * (z - c * r * r);
  if (A <= 0)
    throw std::domain_error("MeridianDomain: point outside the map domain");
  return {r, (-1 + std::sqrt(A)) / (2 * c)};
}

Eigen::Index MeridianDomain::node(double r, double z) const {
  Eigen::Index i = llround(r / h);
  Eigen::Index j = llround((z - z0) / h);
  if (i < 0 || i >= nr || j < 0 || j >= nz) return -1;
  return idx(i, j);
}

namespace {

void build_mask(MeridianDomain& dom) {
  dom.idx = Eigen::MatrixXi::Constant(dom.nr, dom.nz, -1);
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < dom.nr; ++i)
    for (Eigen::Index j = 0; j < dom.nz; ++j)
      if (dom.inside(dom.r_of(i), dom.z_of(j))) dom.idx(i, j) = int(count++);
  dom.unknowns = count;
  if (count == 0)
    throw std::invalid_argument("meridian domain: empty interior mask");

  // Connectivity sweep; the rotation of a disconnected mask is not a domain.
  Eigen::VectorXi seen = Eigen::VectorXi::Zero(count);
  std::queue<std::pair<Eigen::Index, Eigen::Index>> q;
  for (Eigen::Index i = 0; i < dom.nr && q.empty(); ++i)
    for (Eigen::Index j = 0; j < dom.nz && q.empty(); ++j)
      if (dom.idx(i, j) >= 0) {
        q.push({i, j});
        seen(dom.idx(i, j)) = 1;
      }
  Eigen::Index reached = 1;
  while (!q.empty()) {
    auto [i, j] = q.front();
    q.pop();
    const Eigen::Index di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int t = 0; t < 4; ++t) {
      Eigen::Index ii = i + di[t], jj = j + dj[t];
      if (ii < 0 || ii >= dom.nr || jj < 0 || jj >= dom.nz) continue;
      int k = dom.idx(ii, jj);
      if (k >= 0 && !seen(k)) {
        seen(k) = 1;
        ++reached;
        q.push({ii, jj});
      }
    }
  }
  if (reached != count)
    throw std::runtime_error("meridian domain: interior mask not connected");
}

}  // namespace

MeridianDomain make_meridian_domain(const DiffeoMap& map, double alpha,
                                    double r_out, Eigen::Index N) {
  if (map.n != 3)
    throw std::invalid_argument("meridian domain: map dimension must be 3");
  if (map.kind == DiffeoMap::Kind::example5)
    throw std::invalid_argument("meridian domain: map must be axisymmetric");
  if (!(alpha > 0) || !(alpha < pi))
    throw std::invalid_argument("meridian domain: alpha outside (0, pi)");
  if (!(r_out > 0) || N < 8)
    throw std::invalid_argument("meridian domain: bad radius or resolution");
  if (r_out >= map.radius)
    throw std::invalid_argument(
        "meridian domain: outer radius beyond the map's validity");

  MeridianDomain dom;
  dom.kind = MeridianDomain::Kind::cone_ball;
  dom.alpha = alpha;
  dom.c = (map.kind == DiffeoMap::Kind::example1) ? map.c : 0.0;
  dom.r_out = r_out;
  dom.N = N;
  dom.h = r_out / double(N);
  double zlo = std::min(0.0, r_out * std::cos(alpha)) -
               (alpha > pi / 2 ? 0.1 * r_out : 0.0) -
               1.05 * std::abs(dom.c) * r_out * r_out;
  double zhi = r_out * (1 + std::abs(dom.c) * r_out) * 1.02;
  dom.nr = Eigen::Index(std::ceil(r_out * 1.001 / dom.h)) + 2;
  Eigen::Index nzlo =
      zlo < 0 ? Eigen::Index(std::ceil(-zlo / dom.h)) + 2 : Eigen::Index(0);
  Eigen::Index nzhi = Eigen::Index(std::ceil(zhi / dom.h)) + 2;
  dom.z0 = -double(nzlo) * dom.h;
  dom.nz = nzlo + nzhi + 1;
  build_mask(dom);
  return dom;
}

MeridianDomain make_ball_meridian(double s, Eigen::Index N) {
  if (!(s > 0) || N < 8)
    throw std::invalid_argument("ball meridian: bad radius or resolution");
  MeridianDomain dom;
  dom.kind = MeridianDomain::Kind::ball;
  dom.alpha = pi;
  dom.r_out = s;
  dom.N = N;
  dom.h = s / double(N);
  dom.nr = N + 3;
  dom.nz = 2 * (N + 3) + 1;
  dom.z0 = -double(N + 3) * dom.h;
  build_mask(dom);
  return dom;
}

namespace {

// Bisection of the interface along the segment p -> q; f > 0 strictly inside.
std::array<double, 2> cut_point(const std::function<double(double, double)>& f,
                                std::array<double, 2> p,
                                std::array<double, 2> q) {
  double fp = f(p[0], p[1]);
  for (int it = 0; it < 60; ++it) {
    std::array<double, 2> m = {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])};
    double fm = f(m[0], m[1]);
    if ((fm > 0) == (fp > 0)) {
      p = m;
      fp = fm;
    } else {
      q = m;
    }
  }
  return {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])};
}

std::vector<Stencil> build_stencils(const MeridianDomain& dom,
                                    const RadialProfile<double>& prof) {
  const double h = dom.h;
  auto outer_f = [&](double r, double z) {
    return dom.r_out * dom.r_out - (r * r + z * z);
  };
  auto lateral_f = [&](double r, double z) {
    if (dom.c != 0 && 1 + 4 * dom.c * (z - dom.c * r * r) <= 0) return -1.0;
    if (r < 0) return dom.alpha - pi;
    if (r == 0 && z <= 0) return -1.0;
    return dom.alpha - cone_angle(dom, r, z);
  };
  auto wv_of = [&](double r, double z) {
    auto y = dom.straighten(r, z);
    double rr = std::hypot(y[0], y[1]);
    double th = std::atan2(y[0], y[1]);
    return rr * prof.rho_at(std::min(th, dom.alpha));
  };

  std::vector<Stencil> st(size_t(dom.unknowns));
  const Eigen::Index di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
  for (Eigen::Index i = 0; i < dom.nr; ++i)
    for (Eigen::Index j = 0; j < dom.nz; ++j) {
      int k = dom.idx(i, j);
      if (k < 0) continue;
      Stencil& s = st[size_t(k)];
      s.i = i;
      s.j = j;
      std::array<double, 2> p = {dom.r_of(i), dom.z_of(j)};
      for (int t = 0; t < 4; ++t) {
        if (i == 0 && t == 1) {
          s.arm[1] = s.arm[0];  // mirror across the axis
          continue;
        }
        Eigen::Index ii = i + di[t], jj = j + dj[t];
        Arm a;
        if (ii < dom.nr && jj >= 0 && jj < dom.nz && dom.idx(ii, jj) >= 0) {
          a.len = h;
          a.k = dom.idx(ii, jj);
        } else {
          std::array<double, 2> q = {dom.r_of(ii), dom.z_of(jj)};
          std::array<double, 2> x{};
          if (dom.kind == MeridianDomain::Kind::ball ||
              q[0] * q[0] + q[1] * q[1] >= dom.r_out * dom.r_out) {
            x = cut_point(outer_f, p, q);
            a.outer = true;
            a.wv = (dom.kind == MeridianDomain::Kind::ball) ? 0.0
                                                            : wv_of(x[0], x[1]);
          } else {
            x = cut_point(lateral_f, p, q);
            a.wv = 0;
          }
          a.len = std::max(std::hypot(x[0] - p[0], x[1] - p[1]), 1e-3 * h);
          a.k = -1;
        }
        s.arm[size_t(t)] = a;
      }
      s.cut = s.arm[0].k < 0 || s.arm[1].k < 0 || s.arm[2].k < 0 ||
              s.arm[3].k < 0;
    }
  for (Stencil& s : st)
    for (const Arm& a : s.arm)
      if (a.k >= 0 && st[size_t(a.k)].cut) s.near_cut = true;
  return st;
}

struct NewtonOut {
  VecXd w;
  int iters = 0;
  double res = 0;       // sup |F| over all rows
  double res_away = 0;  // sup |F| two cells from the boundary
};

// Damped Newton on w lap w = (3/2)|grad w|^2 - 3/2 over the stencil table;
// outer data is arm.wv * fac.
NewtonOut meridian_newton(const MeridianDomain& dom,
                          const std::vector<Stencil>& st, double fac,
                          const VecXd& w0) {
  const Eigen::Index m = dom.unknowns;
  VecXd w = w0;
  using Trip = Eigen::Triplet<double>;
  Eigen::SparseMatrix<double> J(m, m);
  VecXd F(m);
  std::vector<Trip> trips;
  trips.reserve(size_t(m) * 5);
  NewtonOut out;

  auto assemble = [&](bool jac) {
    if (jac) trips.clear();
    for (Eigen::Index k = 0; k < m; ++k) {
      const Stencil& s = st[size_t(k)];
      const double r = dom.r_of(s.i);
      const Arm &aE = s.arm[0], &aW = s.arm[1], &aN = s.arm[2], &aS = s.arm[3];
      const double hE = aE.len, hW = aW.len, hN = aN.len, hS = aS.len;
      const double wP = w(k);
      const double wE = aE.k >= 0 ? w(aE.k) : aE.wv * (aE.outer ? fac : 1.0);
      const double wW = aW.k >= 0 ? w(aW.k) : aW.wv * (aW.outer ? fac : 1.0);
      const double wN = aN.k >= 0 ? w(aN.k) : aN.wv * (aN.outer ? fac : 1.0);
      const double wS = aS.k >= 0 ? w(aS.k) : aS.wv * (aS.outer ? fac : 1.0);

      const double den = hE * hW * (hE + hW);
      const double denz = hN * hS * (hN + hS);
      const double wrr = 2 * (hW * wE + hE * wW - (hE + hW) * wP) / den;
      const double wzz = 2 * (hS * wN + hN * wS - (hN + hS) * wP) / denz;
      const double wr =
          (hW * hW * wE - hE * hE * wW + (hE * hE - hW * hW) * wP) / den;
      const double wz =
          (hS * hS * wN - hN * hN * wS + (hN * hN - hS * hS) * wP) / denz;

      double lap, g2;
      double dlap_dE, dlap_dW, dlap_dP2, dg2_dE, dg2_dW, dg2_dP1;
      if (s.i == 0) {
        lap = 2 * wrr + wzz;
        g2 = wz * wz;
        dlap_dE = 2 * 2 * hW / den;
        dlap_dW = 2 * 2 * hE / den;
        dlap_dP2 = -2 * 2 * (hE + hW) / den;
        dg2_dE = dg2_dW = dg2_dP1 = 0;
      } else {
        lap = wrr + wr / r + wzz;
        g2 = wr * wr + wz * wz;
        dlap_dE = 2 * hW / den + hW * hW / (den * r);
        dlap_dW = 2 * hE / den - hE * hE / (den * r);
        dlap_dP2 = -2 * (hE + hW) / den + (hE * hE - hW * hW) / (den * r);
        dg2_dE = 2 * wr * hW * hW / den;
        dg2_dW = -2 * wr * hE * hE / den;
        dg2_dP1 = 2 * wr * (hE * hE - hW * hW) / den;
      }
      const double dlap_dN = 2 * hS / denz, dlap_dS = 2 * hN / denz;
      const double dlap_dPz = -2 * (hN + hS) / denz;
      const double dg2_dN = 2 * wz * hS * hS / denz;
      const double dg2_dS = -2 * wz * hN * hN / denz;
      const double dg2_dPz = 2 * wz * (hN * hN - hS * hS) / denz;

      F(k) = wP * lap - 1.5 * g2 + 1.5;
      if (!jac) continue;
      trips.emplace_back(int(k), int(k),
                         lap + wP * (dlap_dP2 + dlap_dPz) -
                             1.5 * (dg2_dP1 + dg2_dPz));
      const Eigen::Index col[4] = {aE.k, aW.k, aN.k, aS.k};
      const double val[4] = {wP * dlap_dE - 1.5 * dg2_dE,
                             wP * dlap_dW - 1.5 * dg2_dW,
                             wP * dlap_dN - 1.5 * dg2_dN,
                             wP * dlap_dS - 1.5 * dg2_dS};
      for (int t = 0; t < 4; ++t)
        if (col[t] >= 0) trips.emplace_back(int(k), int(col[t]), val[t]);
    }
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool converged = false;
  for (int it = 0; it < 40; ++it) {
    assemble(true);
    out.iters = it + 1;
    J.setFromTriplets(trips.begin(), trips.end());
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("meridian solve: singular Jacobian");
    VecXd delta = lu.solve(-F);
    double lam = 1.0;
    while (lam > 1e-9 && (w + lam * delta).minCoeff() <= 1e-14) lam *= 0.5;
    w += lam * delta;
    if ((lam * delta).cwiseAbs().maxCoeff() < 1e-11) {
      converged = true;
      break;
    }
  }
  out.w = w;
  assemble(false);
  out.res = F.cwiseAbs().maxCoeff();
  out.res_away = 0;
  for (Eigen::Index k = 0; k < m; ++k)
    if (!st[size_t(k)].cut && !st[size_t(k)].near_cut)
      out.res_away = std::max(out.res_away, std::abs(F(k)));
  if (!converged && out.res > 1e-9)
    throw std::runtime_error("meridian solve: Newton did not converge");
  return out;
}

}  // namespace

BlowupSolution solve_ball(int n, double s, Eigen::Index N) {
  if (n < 3) throw std::invalid_argument("solve_ball: n must be >= 3");
  if (!(s > 0)) throw std::invalid_argument("solve_ball: radius must be > 0");
  if (N < 8) throw std::invalid_argument("solve_ball: resolution too coarse");

  const double h = s / double(N);
  VecXd w(N);
  for (Eigen::Index i = 0; i < N; ++i)
    w(i) = std::max(0.4 * (s - double(i) * h), 1e-6 * s);

  VecXd F(N), lo(N - 1), di(N), up(N - 1);
  auto assemble = [&](bool jac) {
    for (Eigen::Index i = 0; i < N; ++i) {
      const double wP = w(i);
      if (i == 0) {
        const double lap = double(n) * 2 * (w(1) - wP) / (h * h);
        F(0) = wP * lap + 0.5 * n;
        if (jac) {
          di(0) = lap + wP * (-2.0 * n / (h * h));
          up(0) = wP * 2.0 * n / (h * h);
        }
        continue;
      }
      const double r = double(i) * h;
      const double wE = (i + 1 < N) ? w(i + 1) : 0.0;
      const double wW = w(i - 1);
      const double lap =
          (wE - 2 * wP + wW) / (h * h) + (n - 1) / r * (wE - wW) / (2 * h);
      const double g = (wE - wW) / (2 * h);
      F(i) = wP * lap - 0.5 * n * g * g + 0.5 * n;
      if (jac) {
        di(i) = lap - 2 * wP / (h * h);
        lo(i - 1) = wP * (1 / (h * h) - (n - 1) / (2 * h * r)) +
                    0.5 * n * g / h;
        if (i + 1 < N)
          up(i) = wP * (1 / (h * h) + (n - 1) / (2 * h * r)) - 0.5 * n * g / h;
      }
    }
  };

  bool converged = false;
  int iters = 0;
  for (int it = 0; it < 40; ++it) {
    assemble(true);
    iters = it + 1;
    VecXd delta = thomas_solve(lo, di, up, VecXd(-F));
    double lam = 1.0;
    while (lam > 1e-9 && (w + lam * delta).minCoeff() <= 1e-14) lam *= 0.5;
    w += lam * delta;
    if ((lam * delta).cwiseAbs().maxCoeff() < 1e-12 * s) {
      converged = true;
      break;
    }
  }
  assemble(false);
  const double res = F.cwiseAbs().maxCoeff();
  if (!converged && res > 1e-9)
    throw std::runtime_error("solve_ball: Newton did not converge");

  BlowupSolution sol;
  sol.n = n;
  sol.radial = true;
  sol.s = s;
  sol.r = linspace<double>(0, s, N + 1);
  sol.wr = VecXd::Zero(N + 1);
  sol.wr.head(N) = w;
  sol.iters = iters;
  sol.newton_res = res;
  double away = 0;
  for (Eigen::Index i = 0; i + 2 < N; ++i) away = std::max(away, std::abs(F(i)));
  sol.residual = (2.0 / n) * away;
  return sol;
}

BlowupSolution solve_axisymmetric(const MeridianDomain& dom,
                                  const RadialProfile<double>& prof,
                                  double eps_out) {
  if (dom.unknowns == 0)
    throw std::invalid_argument("solve_axisymmetric: empty domain");
  if (!(eps_out > 0) || eps_out >= 0.5)
    throw std::invalid_argument("solve_axisymmetric: eps_out outside (0, 1/2)");
  const bool ball = dom.kind == MeridianDomain::Kind::ball;
  if (!ball) {
    if (prof.left != EndpointKind::regular_center || prof.n != 3)
      throw std::invalid_argument(
          "solve_axisymmetric: needs a 3d cap cone reference");
    if (std::abs(prof.alpha - dom.alpha) > 1e-12)
      throw std::invalid_argument(
          "solve_axisymmetric: profile angle does not match the domain");
  }

  auto st = build_stencils(dom, prof);
  VecXd w0(dom.unknowns);
  for (Eigen::Index k = 0; k < dom.unknowns; ++k) {
    const Stencil& s = st[size_t(k)];
    const double r = dom.r_of(s.i), z = dom.z_of(s.j);
    if (ball) {
      w0(k) = std::max(
          0.75 * (dom.r_out * dom.r_out - r * r - z * z) / (2 * dom.r_out),
          1e-10);
    } else {
      auto y = dom.straighten(r, z);
      double rr = std::hypot(y[0], y[1]);
      double th = std::atan2(y[0], y[1]);
      w0(k) = std::max(rr * prof.rho_at(std::min(th, dom.alpha)), 1e-10);
    }
  }

  BlowupSolution sol;
  sol.n = 3;
  sol.radial = false;
  sol.dom = dom;
  sol.eps_out = eps_out;
  if (ball) {
    NewtonOut o = meridian_newton(dom, st, 1.0, w0);
    sol.w_plus = o.w;
    sol.w_minus = o.w;
    sol.iters = o.iters;
    sol.newton_res = o.res;
    sol.residual = (2.0 / 3.0) * o.res_away;
    sol.bracket_gap = 0;
    return sol;
  }

  // u data u_V (1 +- eps) translates to w data scaled by (1 +- eps)^(-2).
  const double fac_p = std::pow(1.0 + eps_out, -2.0);
  const double fac_m = std::pow(1.0 - eps_out, -2.0);
  auto fut = std::async(std::launch::async, [&]() {
    return meridian_newton(dom, st, fac_p, VecXd(w0 * fac_p));
  });
  NewtonOut om = meridian_newton(dom, st, fac_m, VecXd(w0 * fac_m));
  NewtonOut op = fut.get();
  sol.w_plus = op.w;
  sol.w_minus = om.w;
  sol.iters = std::max(op.iters, om.iters);
  sol.newton_res = std::max(op.res, om.res);
  sol.residual = (2.0 / 3.0) * std::max(op.res_away, om.res_away);
  double gap = 0;
  const double core2 = sqr(dom.r_out / 2);
  for (Eigen::Index k = 0; k < dom.unknowns; ++k) {
    const Stencil& s = st[size_t(k)];
    const double r = dom.r_of(s.i), z = dom.z_of(s.j);
    if (r * r + z * z > core2) continue;
    double up = std::pow(op.w(k), -0.5), um = std::pow(om.w(k), -0.5);
    gap = std::max(gap, std::abs(up - um) / (0.5 * (up + um)));
  }
  sol.bracket_gap = gap;
  return sol;
}

double BlowupSolution::w_radial_at(double rr) const {
  if (!radial) throw std::logic_error("w_radial_at: not a radial solution");
  if (rr < 0 || rr > s) throw std::domain_error("w_radial_at: r outside [0,s]");
  const double h = r(1) - r(0);
  Eigen::Index i = std::min(Eigen::Index(rr / h), r.size() - 2);
  double t = (rr - r(i)) / h;
  return (1 - t) * wr(i) + t * wr(i + 1);
}

double BlowupSolution::u_radial_at(double rr) const {
  double w = w_radial_at(rr);
  if (w <= 0) return std::numeric_limits<double>::infinity();
  return std::pow(w, -(n - 2) / 2.0);
}

double BlowupSolution::u_center() const {
  if (!radial) throw std::logic_error("u_center: not a radial solution");
  return std::pow(wr(0), -(n - 2) / 2.0);
}

double BlowupSolution::w_at(double rc, double z, int sign) const {
  if (radial) throw std::logic_error("w_at: not a meridian solution");
  Eigen::Index k = dom.node(rc, z);
  if (k < 0) return 0.0;
  if (sign > 0) return w_plus(k);
  if (sign < 0) return w_minus(k);
  return 0.5 * (w_plus(k) + w_minus(k));
}

double BlowupSolution::u_at(double rc, double z, int sign) const {
  double w = w_at(rc, z, sign);
  if (w <= 0) return std::numeric_limits<double>::infinity();
  if (sign == 0) {
    double up = std::pow(w_at(rc, z, 1), -(n - 2) / 2.0);
    double um = std::pow(w_at(rc, z, -1), -(n - 2) / 2.0);
    return 0.5 * (up + um);
  }
  return std::pow(w, -(n - 2) / 2.0);
}

std::vector<RatioSample> ratio_profile(const BlowupSolution& sol,
                                       const DiffeoMap& map,
                                       const RadialProfile<double>& prof,
                                       const ExpansionCoefficient* c1,
                                       int nrays, double gap_tol) {
  if (sol.radial || sol.dom.kind == MeridianDomain::Kind::ball)
    throw std::invalid_argument("ratio_profile: needs a cone meridian solve");
  const MeridianDomain& dom = sol.dom;
  double map_c = (map.kind == DiffeoMap::Kind::example1) ? map.c : 0.0;
  if (map.n != 3 || map.kind == DiffeoMap::Kind::example5 ||
      std::abs(map_c - dom.c) > 1e-14)
    throw std::invalid_argument("ratio_profile: map does not match the domain");
  if (prof.left != EndpointKind::regular_center ||
      std::abs(prof.alpha - dom.alpha) > 1e-12)
    throw std::invalid_argument(
        "ratio_profile: profile does not match the domain");
  if (nrays < 1) throw std::invalid_argument("ratio_profile: nrays < 1");

  std::vector<RatioSample> out;
  for (int q = 0; q < nrays; ++q) {
    double th = (nrays == 1 ? 0.5 : 0.2 + 0.6 * q / double(nrays - 1)) *
                dom.alpha;
    Eigen::Index last = -1;
    for (double d = 6 * dom.h; d < 0.9 * dom.r_out; d *= 1.12) {
      double rc = d * std::sin(th), z = d * std::cos(th);
      Eigen::Index k = dom.node(rc, z);
      if (k < 0 || k == last) continue;
      last = k;
      Eigen::Index i = llround(rc / dom.h), j = llround((z - dom.z0) / dom.h);
      double rn = dom.r_of(i), zn = dom.z_of(j);
      auto y = dom.straighten(rn, zn);
      double ry = std::hypot(y[0], y[1]);
      double ty = std::atan2(y[0], y[1]);
      double uv = std::pow(ry * prof.rho_at(std::min(ty, dom.alpha)), -0.5);
      double up = std::pow(sol.w_plus(k), -0.5);
      double um = std::pow(sol.w_minus(k), -0.5);
      RatioSample smp;
      smp.d = std::hypot(rn, zn);
      smp.gap = std::abs(up - um) / uv;
      smp.e = 0.5 * (up + um) / uv - 1.0;
      if (c1) smp.e -= c1->c1_at(ty, 0.0) * ry;
      if (smp.gap < gap_tol) out.push_back(smp);
    }
  }
  if (out.empty())
    throw std::runtime_error("ratio_profile: no trusted samples");
  return out;
}

namespace {

// Frame Hessian entries of an axisymmetric function from its cone-coordinate
// derivatives; frames (e_r, e_T, e_phi) as in the source construction.
struct FrameH {
  double rr, rT, TT, pp, gr, gT;
};

FrameH frame_hessian(double r, double th, double f_r, double f_th, double f_rr,
                     double f_rth, double f_thth) {
  FrameH H;
  H.rr = f_rr;
  H.rT = f_rth / r - f_th / (r * r);
  H.TT = f_thth / (r * r) + f_r / r;
  H.pp = (th < 1e-12) ? f_thth / (r * r) + f_r / r
                      : f_r / r + std::cos(th) / std::sin(th) * f_th / (r * r);
  H.gr = f_r;
  H.gT = f_th / r;
  return H;
}

}  // namespace

BarrierReport barrier_certify(const RadialProfile<double>& prof, double A,
                              double B, double radius, const DiffeoMap* map) {
  if (prof.left != EndpointKind::regular_center)
    throw std::invalid_argument("barrier_certify: needs a cap cone profile");
  if (A < 0 || B < 0 || !(radius > 0) || radius > 10)
    throw std::invalid_argument("barrier_certify: bad constants");
  const int n = prof.n;
  if (map && (n != 3 || map->n != 3))
    throw std::invalid_argument(
        "barrier_certify: perturbed coefficients need n = 3");
  const double kap = n * (n - 2) / 4.0;
  const double p = (n + 2.0) / (n - 2.0);
  const double q = -(n - 2) / 2.0;
  const double beta = (n >= 4) ? 1.0 - 2.0 / (n - 2) : 0.0;

  BarrierReport rep;
  rep.A = A;
  rep.B = B;
  rep.radius = radius;

  // Ingredient constants on the unit sphere section: d ~ r dtil(theta) with
  // the exact cone distance, and every quotient below is r-invariant.
  const Eigen::Index stride = std::max<Eigen::Index>(1, prof.N / 256);
  double c1a = 0, vlo = std::numeric_limits<double>::infinity(), vhi = 0;
  for (Eigen::Index i = 0; i < prof.N; i += stride) {
    const double th = prof.theta(i);
    const double dtil =
        (prof.alpha - th < pi / 2) ? std::sin(prof.alpha - th) : 1.0;
    auto sm = prof.eval(1.0, th);
    FrameH H = frame_hessian(1.0, th, sm.u_r, sm.u_th, sm.u_rr, sm.u_rth,
                             sm.u_thth);
    double hn = std::sqrt(sqr(H.rr) + 2 * sqr(H.rT) + sqr(H.TT) +
                          (n - 2) * sqr(H.pp));
    double gn = std::hypot(H.gr, H.gT);
    c1a = std::max(c1a, (sqr(dtil) * hn + dtil * gn) / sm.u);
    double val = std::pow(dtil, (n - 2) / 2.0) * sm.u;
    vlo = std::min(vlo, val);
    vhi = std::max(vhi, val);
  }
  rep.C1 = 1.1 * std::max({c1a, 1.0 / vlo, 1.0});
  rep.C3 = (4.0 / 15.0) * (2 * rep.C1 + 2) * std::pow(rep.C1, 4);
  rep.ingredient_low = vlo;
  rep.ingredient_high = vhi;
  rep.ingredient_ok = vlo >= 1.0 / rep.C1 - 1e-12 &&
                      vhi <= std::pow(2.0, (n - 2) / 2.0) + 1e-9;

  const VecXd rs = geomspace(radius * 1e-3, radius, 40);
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < prof.N; i += stride) {
    const double th = prof.theta(i);
    auto s1 = prof.eval(1.0, th);
    for (Eigen::Index a = 0; a < rs.size(); ++a) {
      const double r = rs(a);
      const double rq = std::pow(r, q);
      const double uV = rq * s1.u;
      const double uVp = std::pow(uV, p);
      const double w = uV + A * std::pow(uV, beta) + B * r * uV;
      double lap = kap * uVp + B * (kap * r * uVp + uV / r);
      if (n >= 4 && A > 0) {
        const double g2 =
            sqr(rq / r) * (sqr(q * s1.u) + sqr(s1.u_th));
        lap += A * (beta * std::pow(uV, beta - 1) * kap * uVp +
                    beta * (beta - 1) * std::pow(uV, beta - 2) * g2);
      }
      double res = lap - kap * std::pow(w, p);
      if (map) {
        // First-order coefficient correction a_ijk y_k H_ij(w) + b_i grad_i w
        // on a phi ring; w = uV (1 + B r) + A and the constant drops out.
        auto sm = prof.eval(r, th);
        const double w_r = sm.u_r * (1 + B * r) + B * sm.u;
        const double w_th = sm.u_th * (1 + B * r);
        const double w_rr = sm.u_rr * (1 + B * r) + 2 * B * sm.u_r;
        const double w_rth = sm.u_rth * (1 + B * r) + B * sm.u_th;
        const double w_thth = sm.u_thth * (1 + B * r);
        FrameH H = frame_hessian(r, th, w_r, w_th, w_rr, w_rth, w_thth);
        const double st0 = std::sin(th), ct = std::cos(th);
        double pert_max = -std::numeric_limits<double>::infinity();
        for (int g = 0; g < 16; ++g) {
          const double ph = 2 * pi * g / 16;
          const double cp = std::cos(ph), sp = std::sin(ph);
          const double er[3] = {st0 * cp, st0 * sp, ct};
          const double eT[3] = {ct * cp, ct * sp, -st0};
          const double ep[3] = {-sp, cp, 0.0};
          const double y3[3] = {r * er[0], r * er[1], r * er[2]};
          double Hc[3][3], gc[3];
          for (int ii = 0; ii < 3; ++ii) {
            gc[ii] = H.gr * er[ii] + H.gT * eT[ii];
            for (int jj = 0; jj < 3; ++jj)
              Hc[ii][jj] = H.rr * er[ii] * er[jj] +
                           H.rT * (er[ii] * eT[jj] + eT[ii] * er[jj]) +
                           H.TT * eT[ii] * eT[jj] + H.pp * ep[ii] * ep[jj];
          }
          double pert = 0;
          for (int ii = 0; ii < 3; ++ii) {
            pert += map->b_i0(ii) * gc[ii];
            for (int jj = 0; jj < 3; ++jj) {
              double aij = 0;
              for (int kk = 0; kk < 3; ++kk)
                aij += map->a_ijk(ii, jj, kk) * y3[kk];
              pert += aij * Hc[ii][jj];
            }
          }
          pert_max = std::max(pert_max, pert);
        }
        res += pert_max;
      }
      worst = std::max(worst, res);
    }
  }
  rep.max_residual = worst;
  rep.certified = worst <= 0;
  return rep;
}

BarrierReport barrier_search(const RadialProfile<double>& prof,
                             const DiffeoMap* map) {
  if (prof.n != 3)
    throw std::invalid_argument("barrier_search: n = 3 proof constants only");
  BarrierReport probe = barrier_certify(prof, 0, 0, 1e-3, map);
  for (double B : {1.0, 10.0, 100.0, 1000.0}) {
    double radius = 0.1;
    for (int t = 0; t < 8; ++t) {
      BarrierReport rep =
          barrier_certify(prof, probe.C3 * B, B, radius, map);
      if (rep.certified) return rep;
      radius *= 0.5;
    }
  }
  throw std::runtime_error("barrier_search: no (B, radius) within budget");
}

}  // namespace lncone
