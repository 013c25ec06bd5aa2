#pragma once

#include <vector>

#include "lncone/profiles.hpp"
#include "lncone/sphere.hpp"

namespace lncone {

// One discrete eigenpair of H = -Delta_theta + kappa/rho^2, kappa = n(n+2)/4,
// with Dirichlet-zero data. phi lives on the grid's unknown nodes and is
// normalized in the discrete L2(Sigma) inner product.
struct EigenPair {
  int index = 0;  // 1-based, ascending eigenvalues
  int m = 0;      // azimuthal mode (cap reductions)
  double lambda = 0;
  VecXd phi;
  double weak_residual = 0;  // rho^2-weighted pencil residual, L2 norm
};

// Azimuthal-mode reduction of the cap eigenproblem: a tridiagonal pencil
// A phi = lambda B phi with A = rho^2 (-Delta_m) + kappa, B = rho^2 mass,
// assembled finite-volume style so all coefficients stay bounded.
struct SpectralGrid {
  int n = 3;
  int m = 0;
  double alpha = 0;
  Eigen::Index N = 0;
  double h = 0;
  bool pole = false;  // first unknown is the Theta=0 cell (m = 0 only)
  VecXd theta, rho;   // unknown nodes
  VecXd mass;         // L2(Sigma) cell weights (azimuthal factor dropped)
  VecXd flux;         // face conductances, flux(i) couples unknown i to i+1
  VecXd a_lo, a_di, a_up, b_di;  // a_lo(i) couples row i+1 to i
};

SpectralGrid make_spectral_grid(const RadialProfile<double>& cap, int m = 0);

double inner(const SpectralGrid& g, const VecXd& x, const VecXd& y);
double rayleigh(const SpectralGrid& g, const VecXd& phi);

// Lowest k eigenpairs by shift-and-invert inverse iteration with deflation;
// shift 0 initially, Rayleigh-accelerated, seeded deterministically.
std::vector<EigenPair> eigen_solve(const SpectralGrid& g, Eigen::Index k);
std::vector<EigenPair> eigen_solve(const RadialProfile<double>& cap,
                                   Eigen::Index k, int m = 0);

// Full 2D eigenproblem on a spherical domain with rho from an accepted solve.
// phi is the flattened grid (index i * phi_nodes + j, zeros outside the
// interior); sphere_mass_flat gives the matching FV cell weights.
std::vector<EigenPair> eigen_solve(const SphericalDomain& dom,
                                   const ScalarField& rho, Eigen::Index k);

VecXd sphere_mass_flat(const SphericalDomain& dom);

double mu1(double lambda1, int n);

struct ResolventResult {
  VecXd u;
  double tail_bound = 0;  // ||f - Pi_k f|| / dist(lambda, spectrum tail)
  bool direct = false;    // fell back to the banded linear solve
};

// Modal resolvent u = sum <f,phi_i>/(lambda_i - lambda) phi_i with reported
// tail bound; switches to a direct tridiagonal solve when the basis does not
// span f well enough.
ResolventResult resolvent_solve(const SpectralGrid& g, double lambda,
                                const VecXd& f,
                                const std::vector<EigenPair>& basis);

struct DecayFit {
  double nu = 0;  // log-log exponent of |phi| against rho near the boundary
  double C = 0;   // smallest constant with |phi|+rho|phi'|+rho^2|phi''|
                  // <= C rho^(nu - eps) on the fit band
};

DecayFit decay_check(const SpectralGrid& g, const EigenPair& pair);

}  // namespace lncone
