#include "lncone/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace lncone {

namespace {

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

void check_rho(const VecXd& rho, int n) {
  if (n < 3) throw std::invalid_argument("cutoff: dimension below 3");
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (!std::isfinite(rho(i)) || rho(i) < 0)
      throw std::invalid_argument(
          "cutoff: negative or non-finite rho, data corruption");
  }
}

}  // namespace

VecXd plateau_coefficient(const VecXd& rho, int n) {
  check_rho(rho, n);
  const double k = n * (n + 2) / 4.0, q = (n - 4.0) / (n + 2.0);
  return (-k * (1.0 + q * rho.array().square())).matrix();
}

VecXd coefficient_ceiling(const VecXd& rho, int n) {
  check_rho(rho, n);
  return (-((n - 2.0) * (n - 2.0) / 4.0) * rho.array().square() -
          n * (n - 1) / 4.0)
      .matrix();
}

VecXd build_cutoff_c(const VecXd& rho, int n, double delta_b) {
  if (delta_b <= 0 || delta_b >= 1)
    throw std::invalid_argument("cutoff: blend width outside (0,1)");
  VecXd fp = plateau_coefficient(rho, n);
  VecXd g = coefficient_ceiling(rho, n);
  const double rho0 = std::sqrt(n / 2.0);
  const double a = (1.0 - delta_b) * rho0;
  VecXd c(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    double s = smoothstep((rho(i) - a) / (rho0 - a));
    c(i) = (1 - s) * fp(i) + s * g(i);
  }
  return c;
}

DegenerateOperator make_degenerate_op(const RadialProfile<double>& cap, int m,
                                      double delta_b) {
  if (cap.left != EndpointKind::regular_center)
    throw std::invalid_argument("degenerate op: cap reference required");
  DegenerateOperator op;
  op.n = cap.n;
  op.m = m;
  op.alpha = cap.alpha;
  op.N = cap.N;
  op.h = cap.h();
  op.rho = cap.rho;
  op.a = VecXd::Ones(cap.N + 1);
  op.b = VecXd::Zero(cap.N + 1);
  op.plateau = plateau_coefficient(cap.rho, cap.n);
  op.c = build_cutoff_c(cap.rho, cap.n, delta_b);
  op.grid = make_spectral_grid(cap, m);
  return op;
}

std::pair<double, double> ellipticity_range(const DegenerateOperator& op,
                                            int ndir, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = op.n - 1;
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (int k = 0; k < ndir; ++k) {
    VecXd eta(d);
    double nrm = 0;
    do {
      for (int j = 0; j < d; ++j) eta(j) = gauss(rng);
      nrm = eta.norm();
    } while (nrm < 1e-8);
    eta /= nrm;
    for (Eigen::Index i = 0; i <= op.N; ++i) {
      double q = op.a(i) * eta.squaredNorm();
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
  }
  return {lo, hi};
}

ExhaustionSolve solve_L0(const DegenerateOperator& op, const VecXd& f,
                         const VecXd& psi, const VecXd& lap_psi,
                         double delta) {
  const Eigen::Index N = op.N;
  if (f.size() != N + 1 || psi.size() != N + 1 || lap_psi.size() != N + 1)
    throw std::invalid_argument("solve_L0: field size mismatch");
  if (delta <= 0) throw std::invalid_argument("solve_L0: delta must be > 0");
  const SpectralGrid& g = op.grid;
  const Eigen::Index off = g.pole ? 0 : 1;
  const Eigen::Index ni = N - off;
  const double kap = op.n * (op.n + 2) / 4.0;
  const bool drift = op.b.cwiseAbs().maxCoeff() > 0;
  VecXd dpsi = drift ? deriv4<double>(psi, op.h) : VecXd();

  for (Eigen::Index a = 0; a < ni; ++a) {
    const Eigen::Index i = off + a;
    if (!(psi(i) > 0))
      throw std::invalid_argument("solve_L0: supersolution not positive");
    if (!std::isfinite(f(i)))
      throw std::invalid_argument("solve_L0: source not finite");
    const double ang =
        op.m > 0 ? sqr(double(op.m) / std::sin(g.theta(a))) : 0.0;
    double lhs = sqr(op.rho(i)) * op.a(i) * (lap_psi(i) - ang * psi(i)) +
                 op.c(i) * psi(i) + delta * psi(i);
    if (drift) lhs += op.rho(i) * op.b(i) * dpsi(i);
    if (lhs > 1e-6 * (1 + std::abs(op.c(i))) * psi(i) + 1e-12)
      throw std::invalid_argument("solve_L0: supersolution check failed");
  }

  ExhaustionSolve out;
  out.u = VecXd::Zero(N + 1);
  VecXd prev = out.u;
  for (int k = 0; k < 6; ++k) {
    const double margin = 4.0 * op.h * std::pow(2.0, -k);
    Eigen::Index i_last = std::min<Eigen::Index>(
        N - 1, Eigen::Index(std::floor((op.alpha - margin) / op.h)));
    if (i_last < off + 1)
      throw std::invalid_argument("solve_L0: grid too coarse for exhaustion");
    const Eigen::Index sz = i_last - off + 1;
    VecXd lo(sz - 1), di(sz), up(sz - 1), rhs(sz);
    for (Eigen::Index a = 0; a < sz; ++a) {
      const Eigen::Index i = off + a;
      di(a) = -(g.a_di(a) - kap) + op.c(i);
      if (a + 1 < sz) up(a) = -g.a_up(a);
      if (a > 0) lo(a - 1) = -g.a_lo(a - 1);
      if (drift && !(g.pole && a == 0)) {
        const double w = op.rho(i) * op.b(i) / (2 * op.h);
        if (a + 1 < sz) up(a) += w;
        if (a > 0) lo(a - 1) -= w;
      }
      rhs(a) = f(i);
    }
    VecXd x = thomas_solve<double>(lo, di, up, rhs);
    out.u.setZero();
    out.u.segment(off, sz) = x;
    if (k > 0) out.cauchy = (out.u - prev).cwiseAbs().maxCoeff();
    prev = out.u;
  }

  out.sup_ratio = 0;
  out.sup_bound = 0;
  for (Eigen::Index i = off; i < N; ++i) {
    out.sup_ratio = std::max(out.sup_ratio, std::abs(out.u(i)) / psi(i));
    out.sup_bound = std::max(out.sup_bound, std::abs(f(i)) / psi(i));
  }
  out.sup_bound /= delta;
  if (out.cauchy > 1e-5)
    throw std::runtime_error("solve_L0: exhaustion iterates not Cauchy");
  if (out.sup_ratio > out.sup_bound * 1.05 + 1e-12)
    throw std::runtime_error("solve_L0: interior estimate violated");
  return out;
}

namespace {

// Cartesian Hessian and gradient of the separable cone solution at (r,
// theta, phi), contracted with the map's quadratic Taylor data.
double f_sample(const DiffeoMap& map, const ConeSample<double>& s, double r,
                double th, double ph, int n) {
  const double ct = std::cos(th), st = std::sin(th);
  const double cp = std::cos(ph), sp = std::sin(ph);
  const double Hrr = s.u_rr;
  const double HrT = s.u_rth / r - s.u_th / (r * r);
  const double HTT = s.u_thth / (r * r) + s.u_r / r;
  const double Hps = th < 1e-12
                         ? s.u_thth / (r * r) + s.u_r / r
                         : s.u_r / r + ct / st * s.u_th / (r * r);
  VecXd er(3), eT(3), ep(3);
  er << st * cp, st * sp, ct;
  eT << ct * cp, ct * sp, -st;
  ep << -sp, cp, 0.0;
  MatXd H = Hrr * er * er.transpose() +
            HrT * (er * eT.transpose() + eT * er.transpose()) +
            HTT * eT * eT.transpose() + Hps * ep * ep.transpose();
  VecXd grad = s.u_r * er + (s.u_th / r) * eT;
  VecXd y = r * er;
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) acc += map.a_ijk(i, j, k) * y(k) * H(i, j);
    acc += map.b_i0(i) * grad(i);
  }
  return -std::pow(r, n / 2.0) * acc;
}

}  // namespace

SourceTerm compute_F(const DiffeoMap& map, const RadialProfile<double>& prof,
                     Eigen::Index nphi) {
  if (prof.left != EndpointKind::regular_center)
    throw std::invalid_argument("compute_F: axisymmetric cap reference required");
  if (map.n != prof.n || prof.n != 3)
    throw std::invalid_argument("compute_F: dimension mismatch");
  if (nphi < 4) throw std::invalid_argument("compute_F: too few azimuth nodes");
  const Eigen::Index N = prof.N;
  SourceTerm S;
  S.theta = prof.theta;
  S.phi = VecXd(nphi);
  for (Eigen::Index j = 0; j < nphi; ++j) S.phi(j) = 2 * pi * j / double(nphi);
  S.F = MatXd::Zero(N + 1, nphi);
  S.Cbar = 0;
  S.r_dependence = 0;
  const double mexp = (prof.n + 2) / 2.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const double th = prof.theta(i);
    auto s1 = prof.eval(1.0, th);
    auto s2 = prof.eval(0.5, th);
    for (Eigen::Index j = 0; j < nphi; ++j) {
      const double F1 = f_sample(map, s1, 1.0, th, S.phi(j), prof.n);
      const double F2 = f_sample(map, s2, 0.5, th, S.phi(j), prof.n);
      S.F(i, j) = F1;
      S.r_dependence =
          std::max(S.r_dependence, std::abs(F1 - F2) / (1 + std::abs(F1)));
      S.Cbar = std::max(S.Cbar,
                        std::abs(F1) * std::pow(prof.rho(i), mexp));
    }
  }
  if (S.r_dependence > 1e-10)
    throw std::runtime_error("compute_F: residual radial dependence");
  return S;
}

MatXd source_modes(const SourceTerm& S, int m_max) {
  if (m_max < 0) throw std::invalid_argument("source_modes: negative mode");
  const Eigen::Index nphi = S.phi.size();
  if (2 * Eigen::Index(m_max) >= nphi)
    throw std::invalid_argument("source_modes: mode above the sampling limit");
  MatXd out = MatXd::Zero(S.F.rows(), 2 * m_max + 1);
  for (Eigen::Index i = 0; i < S.F.rows(); ++i) {
    out(i, 0) = S.F.row(i).mean();
    for (int m = 1; m <= m_max; ++m) {
      double ac = 0, as = 0;
      for (Eigen::Index j = 0; j < nphi; ++j) {
        ac += S.F(i, j) * std::cos(m * S.phi(j));
        as += S.F(i, j) * std::sin(m * S.phi(j));
      }
      out(i, 2 * m - 1) = 2.0 * ac / double(nphi);
      out(i, 2 * m) = 2.0 * as / double(nphi);
    }
  }
  return out;
}

ModeBasis make_mode_basis(const RadialProfile<double>& cap, int m,
                          Eigen::Index k) {
  ModeBasis b;
  b.m = m;
  b.grid = make_spectral_grid(cap, m);
  b.pairs = eigen_solve(b.grid, k);
  return b;
}

VecXd spread_mode(const SpectralGrid& g, const VecXd& phi) {
  const Eigen::Index off = g.pole ? 0 : 1;
  if (phi.size() != g.N - off)
    throw std::invalid_argument("spread_mode: size mismatch");
  VecXd full = VecXd::Zero(g.N + 1);
  full.segment(off, phi.size()) = phi;
  return full;
}

namespace {

double mode_basis_fn(int col, double ph) {
  if (col == 0) return 1.0;
  const int m = (col + 1) / 2;
  return (col % 2 == 1) ? std::cos(m * ph) : std::sin(m * ph);
}

}  // namespace

double ExpansionCoefficient::xi1_at(double th, double ph) const {
  const Eigen::Index N = theta.size() - 1;
  const double h = theta(1) - theta(0);
  double s = (th - theta(0)) / h;
  Eigen::Index i = Eigen::Index(std::floor(s));
  i = std::clamp<Eigen::Index>(i, 0, N - 1);
  const double t = std::clamp(s - double(i), 0.0, 1.0);
  double acc = 0;
  for (Eigen::Index c = 0; c < xi1.cols(); ++c)
    acc += ((1 - t) * xi1(i, c) + t * xi1(i + 1, c)) * mode_basis_fn(int(c), ph);
  return acc;
}

double ExpansionCoefficient::c1_at(double th, double ph) const {
  const Eigen::Index N = theta.size() - 1;
  const double h = theta(1) - theta(0);
  double s = (th - theta(0)) / h;
  Eigen::Index i = Eigen::Index(std::floor(s));
  i = std::clamp<Eigen::Index>(i, 0, N - 1);
  const double t = std::clamp(s - double(i), 0.0, 1.0);
  double acc = 0;
  for (Eigen::Index c = 0; c < c1.cols(); ++c)
    acc += ((1 - t) * c1(i, c) + t * c1(i + 1, c)) * mode_basis_fn(int(c), ph);
  return acc;
}

ExpansionCoefficient first_order_coefficient(
    const RadialProfile<double>& cap, const SourceTerm& S,
    const std::vector<ModeBasis>& bases, double delta_b) {
  const Eigen::Index N = cap.N;
  const int n = cap.n;
  if (S.theta.size() != N + 1 ||
      (S.theta - cap.theta).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("first_order: source grid mismatch");
  if (bases.empty()) throw std::invalid_argument("first_order: empty basis");
  int m_max = 0;
  for (const auto& b : bases) m_max = std::max(m_max, b.m);
  auto basis_for = [&](int m) -> const ModeBasis& {
    for (const auto& b : bases)
      if (b.m == m) return b;
    throw std::invalid_argument("first_order: missing mode basis");
  };

  VecXd xi = VecXd::Zero(N + 1), lap_xi = VecXd::Zero(N + 1);
  const double pexp = (n + 2.0) / (n - 2.0);
  for (Eigen::Index i = 0; i < N; ++i) {
    xi(i) = std::pow(cap.rho(i), -(n - 2) / 2.0);
    lap_xi(i) = (n - 2) * (n - 2) / 4.0 * xi(i) +
                n * (n - 2) / 4.0 * std::pow(xi(i), pexp);
  }

  ExpansionCoefficient out;
  out.theta = cap.theta;
  out.Cbar = S.Cbar;
  out.lambda_shift = -n * (n - 4.0) / 4.0;
  out.lambda_gap = std::numeric_limits<double>::infinity();
  MatXd modes = source_modes(S, m_max);
  out.xi1 = MatXd::Zero(N + 1, modes.cols());
  MatXd xi1a = MatXd::Zero(N + 1, modes.cols());

  std::vector<DegenerateOperator> ops;
  for (int m = 0; m <= m_max; ++m)
    ops.push_back(make_degenerate_op(cap, m, delta_b));

  for (Eigen::Index col = 0; col < modes.cols(); ++col) {
    const int m = int((col + 1) / 2);
    const DegenerateOperator& op = ops[m];
    const ModeBasis& basis = basis_for(m);
    if (basis.pairs.empty() ||
        basis.pairs.front().lambda <= out.lambda_shift + 1e-10)
      throw std::invalid_argument(
          "first_order: shift not below the ground eigenvalue");
    out.lambda_gap = std::min(out.lambda_gap,
                              basis.pairs.front().lambda - out.lambda_shift);

    VecXd rhs = VecXd::Zero(N + 1);
    for (Eigen::Index i = 0; i < N; ++i)
      rhs(i) = sqr(cap.rho(i)) * modes(i, col);
    ExhaustionSolve es;
    try {
      es = solve_L0(op, rhs, xi, lap_xi, n / 4.0);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("first_order: step 1 failed: ") +
                               e.what());
    }
    out.cauchy = std::max(out.cauchy, es.cauchy);
    xi1a.col(col) = es.u;

    VecXd G = VecXd::Zero(N + 1);
    for (Eigen::Index i = 0; i < N; ++i) {
      const double d = op.plateau(i) - op.c(i);
      if (d != 0) G(i) = d * es.u(i) / sqr(cap.rho(i));
    }
    const SpectralGrid& sg = basis.grid;
    const Eigen::Index off = sg.pole ? 0 : 1;
    const Eigen::Index ni = N - off;
    VecXd Gu = G.segment(off, ni);
    VecXd xb;
    ResolventResult rr;
    try {
      rr = resolvent_solve(sg, out.lambda_shift, Gu, basis.pairs);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("first_order: step 2 failed: ") +
                               e.what());
    }
    out.direct = out.direct || rr.direct;
    xb = rr.u;

    auto column_residual = [&](const VecXd& x) {
      double worst = 0;
      for (Eigen::Index a = 0; a < ni; ++a) {
        double t = (sg.a_di(a) - out.lambda_shift * sg.b_di(a)) * x(a);
        if (a > 0) t += sg.a_lo(a - 1) * x(a - 1);
        if (a + 1 < ni) t += sg.a_up(a) * x(a + 1);
        worst = std::max(worst, std::abs(-t - rhs(off + a)));
      }
      return worst;
    };
    VecXd xcol = xi1a.col(col).segment(off, ni) + xb;
    double res = column_residual(xcol);
    if (res > 1e-5) {
      VecXd lo = sg.a_lo.head(ni - 1), up = sg.a_up.head(ni - 1);
      VecXd di = sg.a_di - out.lambda_shift * sg.b_di;
      VecXd prhs(ni);
      for (Eigen::Index a = 0; a < ni; ++a)
        prhs(a) = sqr(sg.rho(a)) * Gu(a);
      xb = thomas_solve<double>(lo, di, up, prhs);
      out.direct = true;
      xcol = xi1a.col(col).segment(off, ni) + xb;
      res = column_residual(xcol);
      if (res > 1e-5)
        throw std::runtime_error("first_order: equation residual above contract");
    }
    out.residual = std::max(out.residual, res);
    out.xi1.col(col).segment(off, ni) = xcol;
  }

  out.c1 = MatXd::Zero(N + 1, out.xi1.cols());
  for (Eigen::Index i = 0; i < N; ++i)
    out.c1.row(i) = out.xi1.row(i) / xi(i);
  out.c1.row(N) = 2.0 * out.c1.row(N - 1) - out.c1.row(N - 2);

  const Eigen::Index nps = 64;
  for (Eigen::Index i = 0; i < N; ++i) {
    double vmax = 0, amax = 0;
    for (Eigen::Index j = 0; j < nps; ++j) {
      const double ph = 2 * pi * j / double(nps);
      double v = 0, va = 0;
      for (Eigen::Index c = 0; c < out.xi1.cols(); ++c) {
        v += out.xi1(i, c) * mode_basis_fn(int(c), ph);
        va += xi1a(i, c) * mode_basis_fn(int(c), ph);
      }
      vmax = std::max(vmax, std::abs(v));
      amax = std::max(amax, std::abs(va));
    }
    out.bound_C = std::max(out.bound_C, vmax / xi(i));
    out.step1_ratio = std::max(out.step1_ratio, amax / xi(i));
  }
  out.step1_bound = (4.0 / n) * S.Cbar * 1.05;
  if (out.step1_ratio > out.step1_bound + 1e-12)
    throw std::runtime_error("first_order: step 1 bound violated");
  return out;
}

ExpansionCoefficient first_order_coefficient(const RadialProfile<double>& cap,
                                             const SourceTerm& S, int m_max,
                                             Eigen::Index basis_k,
                                             double delta_b) {
  std::vector<ModeBasis> bases;
  for (int m = 0; m <= m_max; ++m)
    bases.push_back(make_mode_basis(cap, m, basis_k));
  return first_order_coefficient(cap, S, bases, delta_b);
}

double derivative_bound(const ExpansionCoefficient& coef,
                        const RadialProfile<double>& cap) {
  const Eigen::Index N = cap.N;
  if (coef.theta.size() != N + 1)
    throw std::invalid_argument("derivative_bound: grid mismatch");
  VecXd x = coef.xi1.col(0);
  VecXd d1 = deriv4<double>(x, cap.h());
  VecXd d2 = deriv4_2nd<double>(x, cap.h());
  double C = 0;
  for (Eigen::Index i = 1; i < N; ++i) {
    const double xi = std::pow(cap.rho(i), -(cap.n - 2) / 2.0);
    const double v =
        (cap.rho(i) * std::abs(d1(i)) + sqr(cap.rho(i)) * std::abs(d2(i))) / xi;
    C = std::max(C, v);
  }
  return C;
}

AnnulusCertificate supersolution_build(IndicialCase cs,
                                       const RadialProfile<double>& prof,
                                       const VecXd& xi1, const VecXd& F0,
                                       const VecXd& phi1, double lambda1,
                                       double A0, double A1, double r_lo,
                                       double r_hi, Eigen::Index nr) {
  const Eigen::Index N = prof.N;
  const int n = prof.n;
  if (prof.left != EndpointKind::regular_center)
    throw std::invalid_argument("supersolution: cap reference required");
  if (xi1.size() != N + 1 || F0.size() != N + 1 || phi1.size() != N + 1)
    throw std::invalid_argument("supersolution: incompatible grids");
  if (!(r_lo > 0) || !(r_hi > r_lo) || nr < 2)
    throw std::invalid_argument("supersolution: bad annulus");
  if (A0 < 0 || A1 < 0)
    throw std::invalid_argument("supersolution: negative constants");
  const double mu = mu1(lambda1, n);
  if ((cs == IndicialCase::above_two && mu <= 2.0) ||
      (cs == IndicialCase::below_two && mu >= 2.0) ||
      (cs == IndicialCase::equal_two && std::abs(mu - 2.0) > 0.1))
    throw std::invalid_argument("supersolution: case does not match mu");

  const double kap = n * (n + 2) / 4.0;
  const double pexp = (n + 2.0) / (n - 2.0);
  const double q = -n / 2.0;
  const double c1c = (-n / 2.0 + 3.0) * (n / 2.0 + 1.0);
  VecXd plat = plateau_coefficient(prof.rho, n);

  AnnulusCertificate cert;
  const Eigen::Index stride = std::max<Eigen::Index>(1, N / 64);
  std::vector<Eigen::Index> nodes;
  for (Eigen::Index i = 0; i < N; i += stride) nodes.push_back(i);
  cert.theta = VecXd(nodes.size());
  for (std::size_t s = 0; s < nodes.size(); ++s)
    cert.theta(s) = prof.theta(nodes[s]);
  cert.r = geomspace(r_lo, r_hi, nr);
  cert.w = MatXd::Zero(nr, Eigen::Index(nodes.size()));
  cert.residual = MatXd::Zero(nr, Eigen::Index(nodes.size()));
  cert.max_scaled_residual = -std::numeric_limits<double>::infinity();

  for (Eigen::Index j = 0; j < nr; ++j) {
    const double r = cert.r(j);
    const double rq = std::pow(r, q);
    const double rb = std::pow(r, -(n - 2) / 2.0);
    for (std::size_t s = 0; s < nodes.size(); ++s) {
      const Eigen::Index i = nodes[s];
      const double rho = prof.rho(i);
      const double xi = std::pow(rho, -(n - 2) / 2.0);
      const double xip = std::pow(xi, pexp);
      const double lap_xi = (n - 2) * (n - 2) / 4.0 * xi +
                            n * (n - 2) / 4.0 * xip;
      const double lap_phi = (kap / sqr(rho) - lambda1) * phi1(i);
      const double lap_xi1 = F0(i) - plat(i) * xi1(i) / sqr(rho);

      double w = xi * rb + xi1(i) * rq * r * r + A0 * xi * rb * r * r;
      double lap = n * (n - 2) / 4.0 * xip * rq / r +
                   (n * (4.0 - n) / 4.0 * xi1(i) + lap_xi1) * rq +
                   A0 * (4.0 * xi + n * (n - 2) / 4.0 * xip) * rq * r;
      (void)lap_xi;
      switch (cs) {
        case IndicialCase::above_two:
          w += A1 * phi1(i) * rq * r * r * r;
          lap += A1 * (c1c * phi1(i) + lap_phi) * rq * r;
          break;
        case IndicialCase::equal_two: {
          const double lr = std::log(r);
          w -= A1 * phi1(i) * rq * r * r * r * lr;
          lap -= A1 * ((c1c * phi1(i) + lap_phi) * lr + 4.0 * phi1(i)) * rq * r;
          break;
        }
        case IndicialCase::below_two: {
          const double rmu = std::pow(r, mu - (n - 2) / 2.0);
          w += A1 * phi1(i) * (rmu - rq * r * r * r);
          lap += A1 * ((lambda1 * phi1(i) + lap_phi) * rmu / (r * r) -
                       (c1c * phi1(i) + lap_phi) * rq * r);
          break;
        }
      }
      cert.w(j, Eigen::Index(s)) = w;
      const double scale = n * (n - 2) / 4.0 * xip * rq / r;
      double res;
      if (w > 0) {
        res = (lap - n * (n - 2) / 4.0 * std::pow(w, pexp) - F0(i) * rq) /
              scale;
      } else {
        res = std::numeric_limits<double>::infinity();
      }
      cert.residual(j, Eigen::Index(s)) = res;
      cert.max_scaled_residual = std::max(cert.max_scaled_residual, res);
    }
  }

  cert.r_bar = 0;
  for (Eigen::Index j = 0; j < nr; ++j) {
    if (cert.residual.row(j).maxCoeff() <= cert.slack)
      cert.r_bar = cert.r(j);
    else
      break;
  }
  return cert;
}

}  // namespace lncone
