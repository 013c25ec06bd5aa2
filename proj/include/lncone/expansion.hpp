#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lncone/geometry.hpp"
#include "lncone/profiles.hpp"
#include "lncone/spectral.hpp"

namespace lncone {

// Zeroth-order coefficient of the degenerate operator: the plateau formula
// -(n(n+2)/4)(1 + ((n-4)/(n+2)) rho^2), the ceiling
// -((n-2)^2/4) rho^2 - n(n-1)/4 it must stay below, and the C^1 cutoff that
// follows the plateau where rho < rho0 (1 - delta_b), rho0 = sqrt(n/2), and
// blends into the ceiling over the band [rho0 (1 - delta_b), rho0].
VecXd plateau_coefficient(const VecXd& rho, int n);
VecXd coefficient_ceiling(const VecXd& rho, int n);
VecXd build_cutoff_c(const VecXd& rho, int n, double delta_b = 0.1);

// Azimuthal-mode reduction of L0 = rho^2 a Delta + rho b d_theta + c on a cap
// grid, discretized with the same finite-volume stencil as the spectral
// pencil so the two solvers agree row by row.
struct DegenerateOperator {
  int n = 3;
  int m = 0;
  double alpha = 0;
  Eigen::Index N = 0;
  double h = 0;
  VecXd rho;      // nodes 0..N
  VecXd a;        // isotropic principal coefficient
  VecXd b;        // meridian drift coefficient
  VecXd c;        // blended zeroth-order coefficient
  VecXd plateau;  // unblended coefficient
  double ell_lo = 1, ell_hi = 1;  // declared ellipticity constants
  SpectralGrid grid;              // shared finite-volume rows
};

DegenerateOperator make_degenerate_op(const RadialProfile<double>& cap,
                                      int m = 0, double delta_b = 0.1);

// Sampled range of a_{ij} eta_i eta_j over grid nodes and random unit
// directions; must land inside [ell_lo, ell_hi].
std::pair<double, double> ellipticity_range(const DegenerateOperator& op,
                                            int ndir = 64,
                                            std::uint64_t seed = 12345);

struct ExhaustionSolve {
  VecXd u;              // nodes 0..N, zero outside the solved set
  double cauchy = 0;    // sup distance of the last exhaustion pair
  double sup_ratio = 0; // ||u/psi||_inf over interior nodes
  double sup_bound = 0; // (1/delta) ||f/psi||_inf
};

// Solves L0 u = f with zero Dirichlet data through a shrinking-margin
// exhaustion (margins (4h) 2^-k, k = 0..5). psi is a positive interior
// supersolution with L0 psi <= -delta psi, checked against its analytic
// Laplacian lap_psi before solving; the final iterate must obey the
// maximum-principle bound ||u/psi|| <= (1/delta) ||f/psi|| within 5%.
ExhaustionSolve solve_L0(const DegenerateOperator& op, const VecXd& f,
                         const VecXd& psi, const VecXd& lap_psi, double delta);

// Source term of the first-order expansion for a bent cone: the quadratic
// Taylor data of the straightening map contracted with the Hessian and
// gradient of the exact cone solution, with the radial dependence cancelled
// exactly (verified at two radii).
struct SourceTerm {
  VecXd theta;             // profile nodes 0..N (wall row carries no value)
  VecXd phi;               // uniform azimuth samples
  MatXd F;                 // (N+1) x nphi
  double Cbar = 0;         // sup rho^2 |F| / xi over interior nodes
  double r_dependence = 0; // relative two-radii homogeneity defect
};

SourceTerm compute_F(const DiffeoMap& map, const RadialProfile<double>& prof,
                     Eigen::Index nphi = 64);

// Azimuthal Fourier columns of a source term: column 0 the mean, column
// 2m-1 the cos(m phi) and column 2m the sin(m phi) coefficient.
MatXd source_modes(const SourceTerm& S, int m_max);

// Eigenbasis of one azimuthal mode, for the bounded-correction resolvent.
struct ModeBasis {
  int m = 0;
  SpectralGrid grid;
  std::vector<EigenPair> pairs;
};

ModeBasis make_mode_basis(const RadialProfile<double>& cap, int m,
                          Eigen::Index k = 10);

// First-order expansion coefficient xi1 and its bounded ratio c1 = xi1/xi,
// stored as azimuthal Fourier columns on the cap grid.
struct ExpansionCoefficient {
  VecXd theta;
  MatXd xi1;  // modal columns, layout as source_modes
  MatXd c1;   // xi1 / xi per column, wall row extrapolated
  double bound_C = 0;      // sup |xi1| / xi over (theta, phi) samples
  double step1_ratio = 0;  // worst ||xi1_tilde/xi||_inf across modes
  double step1_bound = 0;  // (4/n) Cbar (1 + 5%)
  double Cbar = 0;
  double residual = 0;      // worst modal equation residual
  double cauchy = 0;        // worst exhaustion Cauchy distance
  double lambda_shift = 0;  // -n(n-4)/4
  double lambda_gap = 0;    // ground eigenvalue minus lambda_shift, > 0
  bool direct = false;      // some mode used the banded fallback

  double xi1_at(double th, double ph) const;
  double c1_at(double th, double ph) const;
};

ExpansionCoefficient first_order_coefficient(const RadialProfile<double>& cap,
                                             const SourceTerm& S,
                                             const std::vector<ModeBasis>& bases,
                                             double delta_b = 0.1);
ExpansionCoefficient first_order_coefficient(const RadialProfile<double>& cap,
                                             const SourceTerm& S,
                                             int m_max = 1,
                                             Eigen::Index basis_k = 10,
                                             double delta_b = 0.1);

// Smallest C with rho |xi1'| + rho^2 |xi1''| <= C xi at interior nodes
// (axisymmetric column, derivatives by high-order differences).
double derivative_bound(const ExpansionCoefficient& coef,
                        const RadialProfile<double>& cap);

// Spreads a 1D eigenvector from the spectral grid's unknowns to cap nodes
// 0..N, zero at Dirichlet nodes.
VecXd spread_mode(const SpectralGrid& g, const VecXd& phi);

enum class IndicialCase { above_two, equal_two, below_two };

// Supersolution certificate on an annulus of the cone: evaluates the
// case-appropriate ansatz w and the residual of the differential inequality,
// scaled by the local magnitude of the equation's leading term.
struct AnnulusCertificate {
  VecXd r;         // geometric radius samples
  VecXd theta;     // sampled cap nodes
  MatXd w;         // nr x ntheta
  MatXd residual;  // scaled residual samples
  double max_scaled_residual = 0;
  double slack = 1e-3;
  double r_bar = 0;  // largest radius below which every sample certifies
};

AnnulusCertificate supersolution_build(IndicialCase cs,
                                       const RadialProfile<double>& prof,
                                       const VecXd& xi1, const VecXd& F0,
                                       const VecXd& phi1, double lambda1,
                                       double A0, double A1,
                                       double r_lo = 1e-3, double r_hi = 1.0,
                                       Eigen::Index nr = 64);

}  // namespace lncone
