#pragma once

#include <functional>
#include <vector>

#include "lncone/core.hpp"

namespace lncone {

// A local diffeomorphism T between a perturbed domain and its tangent cone,
// with T(0)=0 and DT(0)=id, supplied with analytic derivatives.
struct DiffeoMap {
  enum class Kind { identity, example1, example5 };

  int n = 3;
  Kind kind = Kind::identity;
  double c = 0.0;       // bending parameter of the paraboloid map
  int regularity = 3;   // C^k tag
  double radius = 1e30; // validity radius

  VecXd forward(const VecXd& x) const;
  VecXd inverse(const VecXd& y) const;
  MatXd jacobian(const VecXd& x) const;
  // hessian(x)[i](j,k) = d_j d_k T^i
  std::vector<MatXd> hessian(const VecXd& x) const;

  // Taylor data of the transformed operator at the origin:
  // a_{ij,k} = d_k(DT DT^t)_{ij}(0), b_{i,0} = (Lap T^i)(0).
  double a_ijk(int i, int j, int k) const;
  double b_i0(int i) const;

  std::string name() const;
};

DiffeoMap identity_map(int n);
DiffeoMap example1_map(double c, int n);
DiffeoMap example5_map(int n);

struct ConeDescription {
  enum class Kind { wedge_with_axis, rotational_cone, half_space };
  int n = 3;
  Kind kind = Kind::rotational_cone;
  double alpha = pi / 2;
  VecXd axis;
};

// Twice-differentiable test function with analytic derivatives, used by the
// pushforward error check.
struct TestC2Function {
  std::function<double(const VecXd&)> value;
  std::function<VecXd(const VecXd&)> grad;
  std::function<MatXd(const VecXd&)> hess;
};

// Both sides of the two pushforward error estimates: the first- and
// second-order discrepancies between derivatives of f pulled back through T
// and derivatives of f at Tx, against the bounds
// C0 |grad f(Tx)| |x|   and   C0 (|grad f(Tx)| + |x| |hess f(Tx)|).
struct PushforwardReport {
  double disc1 = 0, bound1 = 0;
  double disc2 = 0, bound2 = 0;
  double c2_norm = 0; // sampled sup of |hess T| along [0,x]
  bool ok = false;
};

PushforwardReport pushforward_error_check(const DiffeoMap& map,
                                          const TestC2Function& f,
                                          const VecXd& x);

// sup over samples of | |Tx| - |x| | / |x|^2
double norm_vs_distance_check(const DiffeoMap& map,
                              const std::vector<VecXd>& samples);

}  // namespace lncone
