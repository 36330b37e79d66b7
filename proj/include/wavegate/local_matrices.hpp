#pragma once

#include <Eigen/Dense>

#include "wavegate/params.hpp"

namespace wavegate {

/// Trace-plus-volume blocks of the auxiliary relation M q_j = A0 u_j + Am1 u_{j-1}
/// obtained with the one-sided interface values (u taken from the left cell,
/// q from the right cell).
struct FluxBlocks {
  Eigen::MatrixXd A0;
  Eigen::MatrixXd Am1;
};

/// Per-cell operators of the LDG discretisation of u_tt = u_xx in the local
/// basis phi_l(x) = ((x - x_j)/(h/2))^l, l = 0..k.  The semi-discrete update
/// on a uniform periodic mesh reads
///   M u_j'' + K0 u_j + Km1 u_{j-1} + Kp1 u_{j+1} = 0.
struct LocalMatrices {
  SchemeParams params;
  Eigen::MatrixXd M;
  Eigen::MatrixXd K0;
  Eigen::MatrixXd Km1;
  Eigen::MatrixXd Kp1;

  int block() const { return params.k + 1; }
};

/// Cell mass matrix: h/(l+m+1) at even l+m, zero at odd l+m.
Eigen::MatrixXd local_mass(int k, double h);

FluxBlocks flux_blocks(int k);

/// Closed-form assembly; eliminates q through M^{-1}:
///   K0 = A0^T M^{-1} A0 + Am1^T M^{-1} Am1,  Km1 = A0^T M^{-1} Am1,
///   Kp1 = Am1^T M^{-1} A0 = Km1^T.
LocalMatrices assemble(const SchemeParams& p);

}  // namespace wavegate
