#include "wavegate/local_matrices.hpp"

#include <cmath>
#include <string>

namespace wavegate {

void validate(const SchemeParams& p) {
  if (p.k < 0 || p.k > kMaxDegree)
    throw ParamError("degree k must lie in [0, " + std::to_string(kMaxDegree) +
                     "], got " + std::to_string(p.k));
  if (!(p.h > 0.0) || !std::isfinite(p.h))
    throw ParamError("cell width h must be positive");
  if (!(p.lambda > 0.0) || !std::isfinite(p.lambda))
    throw ParamError("Courant ratio lambda must be positive");
}

Eigen::MatrixXd local_mass(int k, double h) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k + 1, k + 1);
  for (int l = 0; l <= k; ++l)
    for (int m = 0; m <= k; ++m)
      if ((l + m) % 2 == 0) M(l, m) = h / double(l + m + 1);
  return M;
}

FluxBlocks flux_blocks(int k) {
  const int n = k + 1;
  FluxBlocks fb;
  fb.A0.resize(n, n);
  fb.Am1.resize(n, n);
  for (int m = 0; m < n; ++m) {
    const double edge = (m % 2 == 0) ? -1.0 : 1.0;  // -(-1)^m
    for (int l = 0; l < n; ++l) {
      // T(m,l) = integral of phi_l phi_m' over the cell, h-independent
      const double T = ((l + m) % 2 == 1) ? 2.0 * m / double(l + m) : 0.0;
      fb.A0(m, l) = 1.0 - T;
      fb.Am1(m, l) = edge;
    }
  }
  return fb;
}

LocalMatrices assemble(const SchemeParams& p) {
  validate(p);
  LocalMatrices out;
  out.params = p;
  out.M = local_mass(p.k, p.h);
  const FluxBlocks fb = flux_blocks(p.k);

  // Solve against the unit-width mass and divide by h afterwards, so the
  // stiffness blocks scale exactly like 1/h and the solve's conditioning is
  // independent of the mesh.
  const Eigen::MatrixXd M1 = local_mass(p.k, 1.0);
  Eigen::LLT<Eigen::MatrixXd> llt(M1);
  if (llt.info() != Eigen::Success)
    throw NumericalError("cell mass matrix is not positive definite");
  const Eigen::MatrixXd MinvA0 = llt.solve(fb.A0);
  const Eigen::MatrixXd MinvAm1 = llt.solve(fb.Am1);

  Eigen::MatrixXd K0 =
      fb.A0.transpose() * MinvA0 + fb.Am1.transpose() * MinvAm1;
  // K0 is symmetric in exact arithmetic; enforce it so downstream
  // Hermitian eigensolves see an exactly symmetric block.
  K0 = ((K0 + K0.transpose()) * 0.5).eval();
  out.K0 = K0 / p.h;
  out.Km1 = (fb.A0.transpose() * MinvAm1) / p.h;
  out.Kp1 = out.Km1.transpose();  // equals Am1^T M^{-1} A0 in exact arithmetic
  return out;
}

}  // namespace wavegate
