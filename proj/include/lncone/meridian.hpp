#pragma once

#include <lncone/core.hpp>
#include <lncone/expansion.hpp>
#include <lncone/geometry.hpp>
#include <lncone/profiles.hpp>

#include <array>
#include <vector>

namespace lncone {

// Meridian section of an axisymmetric domain in the (r_cyl, z) half-plane;
// rotation about the z axis recovers the 3D domain. Either a rotational cone
// of half-angle alpha, bent by an axisymmetric shear and cut by the ball
// |x| < r_out, or a plain ball of radius r_out.
struct MeridianDomain {
  enum class Kind { cone_ball, ball };
  Kind kind = Kind::cone_ball;
  int n = 3;
  double alpha = 0;  // cone half-angle
  double c = 0;      // shear strength of the bending map
  double r_out = 1;  // outer radius
  Eigen::Index N = 0;  // cells across r_out
  double h = 0;
  Eigen::Index nr = 0, nz = 0;  // grid extents
  double z0 = 0;                // z coordinate of row j = 0
  Eigen::MatrixXi idx;          // nr x nz: unknown index, or -1 outside
  Eigen::Index unknowns = 0;

  double r_of(Eigen::Index i) const { return double(i) * h; }
  double z_of(Eigen::Index j) const { return z0 + double(j) * h; }
  bool inside(double r, double z) const;
  // Straightening map (r, z) -> same meridian point of the exact cone;
  // identity when c = 0.
  std::array<double, 2> straighten(double r, double z) const;
  // Unknown index of the nearest grid node, or -1.
  Eigen::Index node(double r, double z) const;
};

MeridianDomain make_meridian_domain(const DiffeoMap& map, double alpha,
                                    double r_out, Eigen::Index N);
MeridianDomain make_ball_meridian(double s, Eigen::Index N);

// Blow-up solution in the w = u^(-2/(n-2)) variable: w > 0 inside, w = 0 on
// the true boundary. Radial solves store w on the r grid; meridian solves
// store the bracketing pair on the domain's unknown nodes.
struct BlowupSolution {
  int n = 3;
  bool radial = false;

  VecXd r;  // radial grid (radial solves)
  VecXd wr;
  double s = 0;

  MeridianDomain dom;  // meridian solves
  VecXd w_plus, w_minus;  // outer data u_V (1 + eps) and u_V (1 - eps)
  double eps_out = 0;

  int iters = 0;
  double newton_res = 0;   // sup row residual of the solved system
  double residual = 0;     // back-substituted u-equation, relative, away
                           // from a two-cell boundary layer
  double bracket_gap = 0;  // sup relative u gap over the half-radius core

  double w_radial_at(double rr) const;     // linear interpolation
  double u_radial_at(double rr) const;
  double u_center() const;
  // Nearest-node fields; sign +1 / -1 picks a bracket, 0 the mean.
  double w_at(double rc, double z, int sign = 0) const;
  double u_at(double rc, double z, int sign = 0) const;
};

// Radial solve of w Lap w = (n/2)|grad w|^2 - n/2 on the ball of radius s,
// w(s) = 0, w'(0) = 0. The closed form is w = (s^2 - r^2)/(2s).
BlowupSolution solve_ball(int n, double s, Eigen::Index N);

// Meridian solve of the same equation (n = 3) with w = 0 on the lateral cone
// boundary and bracketing outer data u_V(T x)(1 +- eps_out) on the artificial
// sphere |x| = r_out; the two solves run concurrently. prof is the cone
// reference for the boundary data (ignored for ball domains).
BlowupSolution solve_axisymmetric(const MeridianDomain& dom,
                                  const RadialProfile<double>& prof,
                                  double eps_out = 0.05);

struct RatioSample {
  double d = 0;    // distance to the vertex
  double e = 0;    // u(x)/u_V(Tx) - 1, minus the linear term when c1 given
  double gap = 0;  // bracket width relative to the cone reference
};

// Samples u(x)/u_V(Tx) - 1 along rays from the vertex, keeping only nodes
// where the bracket gap is below gap_tol. With c1 supplied, subtracts the
// first-order term c1(Tx/|Tx|)|Tx| and returns the remainder.
std::vector<RatioSample> ratio_profile(const BlowupSolution& sol,
                                       const DiffeoMap& map,
                                       const RadialProfile<double>& prof,
                                       const ExpansionCoefficient* c1 = nullptr,
                                       int nrays = 5, double gap_tol = 0.01);

// Barrier w = u_V + A u_V^beta + B r u_V with beta = 1 - 2/(n-2) for n >= 4
// and 0 for n = 3. Samples Lw - (n(n-2)/4) w^((n+2)/(n-2)) on the cone within
// the given radius and reports the maximum together with the ingredient
// bounds d^((n-2)/2) u_V in [1/C1, 2^((n-2)/2)] and
// (d^2 |Hess u_V| + d |grad u_V|) / u_V <= C1. A DiffeoMap adds the
// linearized perturbed-coefficient terms (n = 3 only).
struct BarrierReport {
  double C1 = 0;
  double C3 = 0;  // proof constant tying A = C3 B
  double A = 0, B = 0, radius = 0;
  double max_residual = 0;
  double ingredient_low = 0, ingredient_high = 0;  // range of d^((n-2)/2) u_V
  bool ingredient_ok = false;
  bool certified = false;  // max_residual <= 0
};

BarrierReport barrier_certify(const RadialProfile<double>& prof, double A,
                              double B, double radius,
                              const DiffeoMap* map = nullptr);

// Sweeps B over {1, 10, 100, 1000} with A = C3 B, halving the radius from
// 0.1, and returns the first certified pair.
BarrierReport barrier_search(const RadialProfile<double>& prof,
                             const DiffeoMap* map = nullptr);

}  // namespace lncone
