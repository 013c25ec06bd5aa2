#pragma once

#include <functional>
#include <vector>

#include "lncone/core.hpp"

namespace lncone {

enum class DomainKind { cap, lune, masked };

// Structured (Theta, phi) grid on S^2 with an interior mask and the geodesic
// boundary-distance field. Caps wrap phi and own the Theta=0 pole; lunes span
// the full meridian range with Dirichlet faces; masked domains are arbitrary
// coordinate rectangles with a node predicate.
struct SphericalDomain {
  DomainKind kind = DomainKind::cap;
  double alpha = 0;  // cap angle or lune opening
  Eigen::Index NT = 0, NP = 0;
  double hT = 0, hP = 0;
  bool periodic = false;
  bool pole_interior = false;
  VecXd TH, PH;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> interior;
  MatXd dsig;
  std::function<bool(double, double)> inside;  // masked only

  Eigen::Index phi_nodes() const { return periodic ? NP : NP + 1; }
};

SphericalDomain make_cap_domain(double alpha, Eigen::Index NT, Eigen::Index NP);
SphericalDomain make_lune_domain(double alpha_l, Eigen::Index NT,
                                 Eigen::Index NP);
SphericalDomain make_masked_domain(
    double theta_lo, double theta_hi, double phi_lo, double phi_hi,
    Eigen::Index NT, Eigen::Index NP,
    const std::function<bool(double, double)>& inside);

struct ScalarField {
  Eigen::Index NT = 0, NP = 0;
  double hT = 0, hP = 0;
  double theta0 = 0, phi0 = 0;
  bool periodic = false;
  MatXd v;  // (NT+1) x phi node count; exterior nodes hold 0
};

struct SphereReport {
  double newton_res = 0;
  int iters = 0;
  double residual = 0;          // back-substituted xi-equation, relative
  double ladder_agreement = 0;  // sup norm of the extrapolation increment
  double c3 = 0, c4 = 0;        // bounds of rho / d_Sigma on interior nodes
  std::vector<MatXd> raw;       // single-grid solves at N and 2N
};

// Damped-Newton solve of rho Lap rho = (3/2)|grad rho|^2 - rho^2/2 - 3/2 on
// the domain (n=3), refined once and Richardson-extrapolated onto the domain
// grid. The residual certificate back-substitutes xi = rho^(-1/2) with
// fourth-order stencils two cells away from the boundary (and from the cap
// pole row, whose own error layer is not part of the equation).
ScalarField solve_rho_2d(const SphericalDomain& dom,
                         SphereReport* report = nullptr);

struct AzimuthalMode {
  int m = 0;
  VecXd cos_part, sin_part;  // profiles over Theta nodes
};

// Discrete Fourier split in phi for cap fields.
std::vector<AzimuthalMode> azimuthal_modes(const ScalarField& f, int m_max);

}  // namespace lncone
