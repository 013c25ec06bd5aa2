#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lncone/core.hpp"

namespace lncone {

enum class EndpointKind { vanishing, regular_center };

template <typename Scalar>
struct ConeSample {
  Scalar u = 0, u_r = 0, u_th = 0;
  Scalar u_rr = 0, u_rth = 0, u_thth = 0;
  Scalar rho = 0, xi = 0;
};

// Angular profile of a cone solution in the rho = xi^(-2/(n-2)) variable,
// sampled on a uniform grid of [0, alpha], with the raw refinement ladder
// kept for convergence-order certification.
template <typename Scalar>
struct RadialProfile {
  int n = 3;
  Scalar alpha = 0;
  Eigen::Index N = 0;
  EndpointKind left = EndpointKind::vanishing;
  EndpointKind right = EndpointKind::vanishing;

  Vec<Scalar> theta, rho, drho, ddrho;
  std::vector<Vec<Scalar>> raw; // solutions at N, 2N, 4N on their own grids

  Scalar ladder_agreement = 0; // sup |extrap(N,2N) - extrap(2N,4N)|
  Scalar residual = 0;         // relative back-substitution residual
  Scalar c3 = 0, c4 = 0;       // bounds of rho / d_Sigma
  Scalar slope_err = 0;        // max |.|rho'| - 1| over vanishing endpoints

  HermiteSpline<Scalar> s_rho, s_drho, s_ddrho;

  Scalar h() const { return alpha / Scalar(N); }

  Scalar d_sigma(Scalar th) const {
    Scalar dr = alpha - th;
    if (left == EndpointKind::vanishing) return std::min(th, dr);
    return dr;
  }

  Scalar rho_at(Scalar th) const { return s_rho.eval(th); }
  Scalar drho_at(Scalar th) const { return s_drho.eval(th); }
  Scalar ddrho_at(Scalar th) const { return s_ddrho.eval(th); }

  Scalar xi_at(Scalar th) const {
    return std::pow(rho_at(th), -Scalar(n - 2) / 2);
  }

  // u_V and its cone-coordinate derivatives at (r, theta).
  ConeSample<Scalar> eval(Scalar r, Scalar th) const {
    if (r <= 0) throw std::domain_error("eval: r must be positive");
    if (th >= alpha || (left == EndpointKind::vanishing ? th <= 0 : th < 0))
      throw std::domain_error("eval: theta outside profile support");
    const Scalar m = Scalar(n - 2) / 2;
    Scalar rh = rho_at(th), rp = drho_at(th), rpp = ddrho_at(th);
    Scalar xi = std::pow(rh, -m);
    Scalar xi_p = -m * std::pow(rh, -m - 1) * rp;
    Scalar xi_pp = m * (m + 1) * std::pow(rh, -m - 2) * rp * rp -
                   m * std::pow(rh, -m - 1) * rpp;
    ConeSample<Scalar> s;
    s.rho = rh;
    s.xi = xi;
    Scalar rp1 = std::pow(r, -m);
    s.u = rp1 * xi;
    s.u_r = -m * rp1 / r * xi;
    s.u_rr = m * (m + 1) * rp1 / (r * r) * xi;
    s.u_th = rp1 * xi_p;
    s.u_rth = -m * rp1 / r * xi_p;
    s.u_thth = rp1 * xi_pp;
    return s;
  }
};

namespace detail {

// One damped-Newton solve of the wedge equation
//   rho rho'' - (3/2) rho'^2 - rho^2/2 + 3/2 = 0,  rho(0)=rho(alpha)=0
// on a uniform grid with N cells; returns all N+1 node values.
template <typename Scalar>
Vec<Scalar> wedge_raw(Scalar alpha, Eigen::Index N,
                      const Vec<Scalar>* guess = nullptr) {
  const Scalar h = alpha / Scalar(N);
  Vec<Scalar> rho(N + 1);
  for (Eigen::Index i = 0; i <= N; ++i) {
    Scalar th = h * Scalar(i);
    rho(i) = th * (alpha - th) / alpha;
  }
  if (guess) rho = *guess;
  rho(0) = rho(N) = 0;

  const Eigen::Index m = N - 1;
  auto residual = [&](const Vec<Scalar>& v) {
    Vec<Scalar> F(m);
    for (Eigen::Index i = 1; i < N; ++i) {
      Scalar rp = (v(i + 1) - v(i - 1)) / (2 * h);
      Scalar rpp = (v(i + 1) - 2 * v(i) + v(i - 1)) / (h * h);
      F(i - 1) = v(i) * rpp - Scalar(1.5) * rp * rp - Scalar(0.5) * v(i) * v(i)
                 + Scalar(1.5);
    }
    return F;
  };

  for (int it = 0; it < 80; ++it) {
    Vec<Scalar> F = residual(rho);
    Scalar res0 = F.cwiseAbs().maxCoeff();
    Vec<Scalar> dlo(m - 1), di(m), dup(m - 1);
    for (Eigen::Index i = 1; i < N; ++i) {
      Scalar rp = (rho(i + 1) - rho(i - 1)) / (2 * h);
      Scalar rpp = (rho(i + 1) - 2 * rho(i) + rho(i - 1)) / (h * h);
      di(i - 1) = rpp - 2 * rho(i) / (h * h) - rho(i);
      if (i < N - 1) dup(i - 1) = rho(i) / (h * h) - 3 * rp / (2 * h);
      if (i > 1) dlo(i - 2) = rho(i) / (h * h) + 3 * rp / (2 * h);
    }
    Vec<Scalar> delta = thomas_solve<Scalar>(dlo, di, dup, -F);

    Scalar lam = 1;
    while (lam >= Scalar(1e-8)) {
      Vec<Scalar> trial = rho;
      trial.segment(1, m) += lam * delta;
      if (trial.segment(1, m).minCoeff() > Scalar(1e-14) &&
          residual(trial).cwiseAbs().maxCoeff() < res0)
        break;
      lam /= 2;
    }
    rho.segment(1, m) += lam * delta;
    if ((lam * delta).cwiseAbs().maxCoeff() < Scalar(1e-14)) break;
  }
  if (residual(rho).cwiseAbs().maxCoeff() > Scalar(1e-7))
    throw std::runtime_error("solve_wedge: Newton did not converge");
  return rho;
}

// One damped-Newton solve of the rotationally symmetric cap equation
//   rho (rho'' + (n-2) cot(th) rho') - (n/2) rho'^2 + ((n-2)/2) rho^2 + n/2 = 0
// with a symmetric ghost at th=0 (cot term -> (n-2) rho'' there) and
// rho(alpha)=0. Unknowns are nodes 0..N-1; returns all N+1 values.
template <typename Scalar>
Vec<Scalar> cap_raw(int n, Scalar alpha, Eigen::Index N,
                    const Vec<Scalar>* guess = nullptr) {
  const Scalar h = alpha / Scalar(N);
  Vec<Scalar> cot(N);
  for (Eigen::Index i = 1; i < N; ++i) {
    Scalar th = h * Scalar(i);
    cot(i) = std::cos(th) / std::sin(th);
  }
  Vec<Scalar> rho(N + 1);
  for (Eigen::Index i = 0; i <= N; ++i) {
    Scalar th = h * Scalar(i);
    rho(i) = (alpha - th) * (alpha + th) / (2 * alpha);
  }
  if (guess) rho = *guess;
  rho(N) = 0;

  auto residual = [&](const Vec<Scalar>& v) {
    Vec<Scalar> F(N);
    Scalar rpp0 = 2 * (v(1) - v(0)) / (h * h);
    F(0) = v(0) * Scalar(n - 1) * rpp0 + Scalar(n - 2) / 2 * v(0) * v(0) +
           Scalar(n) / 2;
    for (Eigen::Index i = 1; i < N; ++i) {
      Scalar rp = (v(i + 1) - v(i - 1)) / (2 * h);
      Scalar rpp = (v(i + 1) - 2 * v(i) + v(i - 1)) / (h * h);
      F(i) = v(i) * (rpp + Scalar(n - 2) * cot(i) * rp) -
             Scalar(n) / 2 * rp * rp + Scalar(n - 2) / 2 * v(i) * v(i) +
             Scalar(n) / 2;
    }
    return F;
  };

  for (int it = 0; it < 100; ++it) {
    Vec<Scalar> F = residual(rho);
    Scalar res0 = F.cwiseAbs().maxCoeff();
    Vec<Scalar> dlo(N - 1), di(N), dup(N - 1);
    Scalar rpp0 = 2 * (rho(1) - rho(0)) / (h * h);
    di(0) = Scalar(n - 1) * rpp0 - rho(0) * Scalar(n - 1) * 2 / (h * h) +
            Scalar(n - 2) * rho(0);
    dup(0) = rho(0) * Scalar(n - 1) * 2 / (h * h);
    for (Eigen::Index i = 1; i < N; ++i) {
      Scalar rp = (rho(i + 1) - rho(i - 1)) / (2 * h);
      Scalar rpp = (rho(i + 1) - 2 * rho(i) + rho(i - 1)) / (h * h);
      di(i) = rpp + Scalar(n - 2) * cot(i) * rp - 2 * rho(i) / (h * h) +
              Scalar(n - 2) * rho(i);
      if (i < N - 1)
        dup(i) = rho(i) * (1 / (h * h) + Scalar(n - 2) * cot(i) / (2 * h)) -
                 Scalar(n) * rp / (2 * h);
      dlo(i - 1) = rho(i) * (1 / (h * h) - Scalar(n - 2) * cot(i) / (2 * h)) +
                   Scalar(n) * rp / (2 * h);
    }
    Vec<Scalar> delta = thomas_solve<Scalar>(dlo, di, dup, -F);

    Scalar lam = 1;
    while (lam >= Scalar(1e-8)) {
      Vec<Scalar> trial = rho;
      trial.head(N) += lam * delta;
      if (trial.head(N).minCoeff() > Scalar(1e-14) &&
          residual(trial).cwiseAbs().maxCoeff() < res0)
        break;
      lam /= 2;
    }
    rho.head(N) += lam * delta;
    if ((lam * delta).cwiseAbs().maxCoeff() < Scalar(1e-14)) break;
  }
  if (residual(rho).cwiseAbs().maxCoeff() > Scalar(1e-7))
    throw std::runtime_error("solve_cap: Newton did not converge");
  return rho;
}

template <typename Scalar>
Vec<Scalar> restrict_half(const Vec<Scalar>& fine) {
  Vec<Scalar> out((fine.size() - 1) / 2 + 1);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = fine(2 * i);
  return out;
}

// Shared ladder finish: extrapolate, differentiate, certify.
template <typename Scalar>
void finalize_profile(RadialProfile<Scalar>& p, const Vec<Scalar>& rN,
                      const Vec<Scalar>& r2, const Vec<Scalar>& r4) {
  const Eigen::Index N = p.N;
  const Scalar h = p.h();
  const Scalar hf = h / 2;
  p.theta = linspace<Scalar>(0, p.alpha, N + 1);
  Vec<Scalar> eA = richardson2<Scalar>(restrict_half(r2), rN);
  Vec<Scalar> fine = richardson2<Scalar>(restrict_half(r4), r2);
  Vec<Scalar> eB = restrict_half(fine);
  p.ladder_agreement = (eA - eB).cwiseAbs().maxCoeff();
  p.rho = eB;
  p.raw = {rN, r2, r4};

  // Derivatives come from the 2N-grid extrapolant, then restrict: same
  // profile, half the stencil spacing.
  Vec<Scalar> d1f = deriv4(fine, hf);
  Vec<Scalar> d2f = deriv4_2nd(fine, hf);
  if (p.left == EndpointKind::regular_center) {
    // Even reflection at the pole: central stencils replace the one-sided
    // ends. The pole second derivative is extracted at strides 8 and 16 with
    // a Richardson pair; grid-scale stencils would read the curvature of the
    // pole row's own discretization-error layer instead of the profile.
    d1f(0) = 0;
    d1f(1) = (fine(1) - 8 * fine(0) + 8 * fine(2) - fine(3)) / (12 * hf);
    auto pole_dd = [&](Eigen::Index s) {
      return (-2 * fine(2 * s) + 32 * fine(s) - 30 * fine(0)) /
             (12 * sqr(Scalar(s) * hf));
    };
    d2f(0) = (16 * pole_dd(8) - pole_dd(16)) / 15;
    d2f(1) =
        (16 * fine(0) - 31 * fine(1) + 16 * fine(2) - fine(3)) / (12 * hf * hf);
  }
  p.drho = restrict_half(d1f);
  p.ddrho = restrict_half(d2f);
  p.s_rho = {0, h, p.rho, p.drho};
  p.s_drho = {0, h, p.drho, p.ddrho};
  p.s_ddrho = {0, h, p.ddrho, restrict_half(deriv4(d2f, hf))};

  // Back-substitution residual of the original xi-equation via the exact
  // identity R_xi = -m rho^(-m-2) R_rho, reported relative to the blow-up
  // term (n(n-2)/4) xi^((n+2)/(n-2)); this collapses to (2/n) |R_rho|.
  // Evaluated on the 2N grid, two reporting cells away from vanishing ends.
  Scalar worst = 0;
  const Eigen::Index M = fine.size() - 1;
  for (Eigen::Index i = 0; i <= M; ++i) {
    if (p.left == EndpointKind::vanishing && i < 4) continue;
    if (i > M - 4) continue;
    Scalar R;
    if (i == 0) {
      R = fine(0) * Scalar(p.n - 1) * d2f(0) +
          Scalar(p.n - 2) / 2 * sqr(fine(0)) + Scalar(p.n) / 2;
    } else if (p.left == EndpointKind::regular_center) {
      Scalar th = hf * Scalar(i);
      Scalar ct = std::cos(th) / std::sin(th);
      R = fine(i) * (d2f(i) + Scalar(p.n - 2) * ct * d1f(i)) -
          Scalar(p.n) / 2 * sqr(d1f(i)) + Scalar(p.n - 2) / 2 * sqr(fine(i)) +
          Scalar(p.n) / 2;
    } else {
      R = fine(i) * d2f(i) - Scalar(1.5) * sqr(d1f(i)) -
          Scalar(0.5) * sqr(fine(i)) + Scalar(1.5);
    }
    worst = std::max(worst, Scalar(2) / Scalar(p.n) * std::abs(R));
  }
  p.residual = worst;

  // Two-sided linear bounds rho / d_Sigma on interior nodes.
  p.c3 = std::numeric_limits<Scalar>::infinity();
  p.c4 = 0;
  for (Eigen::Index i = 1; i < N; ++i) {
    Scalar q = p.rho(i) / p.d_sigma(p.theta(i));
    p.c3 = std::min(p.c3, q);
    p.c4 = std::max(p.c4, q);
  }

  p.slope_err = std::abs(std::abs(p.drho(N)) - 1);
  if (p.left == EndpointKind::vanishing)
    p.slope_err = std::max(p.slope_err, std::abs(std::abs(p.drho(0)) - 1));

  if (!(p.c3 > 0) || !std::isfinite(p.c4))
    throw std::runtime_error("profile: rho/d_Sigma bounds violated");
}

}  // namespace detail

// Wedge profile: solves on N, 2N, 4N grids and returns the Richardson
// extrapolant of the finer pair on the N-grid.
template <typename Scalar = double>
RadialProfile<Scalar> solve_wedge(Scalar alpha, Eigen::Index N,
                                  const Vec<Scalar>* guess = nullptr) {
  if (!(alpha > 0 && alpha <= pi))
    throw std::invalid_argument("solve_wedge: alpha out of range");
  if (N < 64) throw std::invalid_argument("solve_wedge: N must be >= 64");
  RadialProfile<Scalar> p;
  p.n = 3;
  p.alpha = alpha;
  p.N = N;
  p.left = p.right = EndpointKind::vanishing;
  Vec<Scalar> rN = detail::wedge_raw(alpha, N, guess);
  Vec<Scalar> r2 = detail::wedge_raw<Scalar>(alpha, 2 * N);
  Vec<Scalar> r4 = detail::wedge_raw<Scalar>(alpha, 4 * N);
  detail::finalize_profile(p, rN, r2, r4);
  return p;
}

// Rotationally symmetric cap profile with a regular center.
template <typename Scalar = double>
RadialProfile<Scalar> solve_cap(int n, Scalar alpha, Eigen::Index N,
                                const Vec<Scalar>* guess = nullptr) {
  if (n < 3) throw std::invalid_argument("solve_cap: n must be >= 3");
  if (!(alpha > 0 && alpha < pi))
    throw std::invalid_argument("solve_cap: alpha out of range");
  if (N < 64) throw std::invalid_argument("solve_cap: N must be >= 64");
  RadialProfile<Scalar> p;
  p.n = n;
  p.alpha = alpha;
  p.N = N;
  p.left = EndpointKind::regular_center;
  p.right = EndpointKind::vanishing;
  Vec<Scalar> rN = detail::cap_raw(n, alpha, N, guess);
  Vec<Scalar> r2 = detail::cap_raw<Scalar>(n, alpha, 2 * N);
  Vec<Scalar> r4 = detail::cap_raw<Scalar>(n, alpha, 4 * N);
  detail::finalize_profile(p, rN, r2, r4);
  return p;
}

// Value of the wedge cone solution from its two face distances: inverts
// d1/d2 = sin(alpha-th)/sin(th) by monotone bisection, then evaluates u_V.
template <typename Scalar>
Scalar f_V(const RadialProfile<Scalar>& profile, Scalar d1, Scalar d2) {
  if (profile.left != EndpointKind::vanishing)
    throw std::invalid_argument("f_V: needs a wedge profile");
  if (!(d1 > 0) || !(d2 > 0))
    throw std::invalid_argument("f_V: unrealizable distance pair");
  const Scalar a = profile.alpha;
  const Scalar target = d1 / d2;
  Scalar lo = Scalar(1e-14), hi = a - Scalar(1e-14);
  for (int it = 0; it < 200; ++it) {
    Scalar mid = (lo + hi) / 2;
    Scalar val = std::sin(a - mid) / std::sin(mid);
    (val > target ? lo : hi) = mid;
    if (hi - lo < Scalar(1e-16) * a) break;
  }
  Scalar th = (lo + hi) / 2;
  Scalar r = d2 / std::sin(th);
  return profile.eval(r, th).u;
}

}  // namespace lncone
