#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "wavegate/local_matrices.hpp"
#include "wavegate/mesh.hpp"

namespace wavegate {

/// Two consecutive time levels of the global coefficient vector, cell-major:
/// block j holds the k+1 local coefficients of cell j.
struct StatePair {
  Eigen::VectorXd u0;  // level n
  Eigen::VectorXd u1;  // level n+1
};

/// Leapfrog evolution U^{n+2} = 2 U^{n+1} - U^n - dt^2 M^{-1} K U^{n+1} on a
/// periodic mesh, together with the exactly conserved discrete energy
///   E^n = 1/2 |D|_M^2 + 1/4 |U^{n+1}|_K^2 + 1/4 |U^n|_K^2 - dt^2/4 |D|_K^2,
/// D = (U^{n+1} - U^n)/dt.  Restricted forms sum cell contributions over the
/// observed cells only: the mass form keeps the local <u, M v> blocks and the
/// stiffness form keeps the local gradient products (B u)_j^T M^{-1} (B v)_j
/// on fully observed stencils, where M q_j = (B u)_j = A0 u_j + Am1 u_{j-1}
/// defines the auxiliary gradient field of the scheme.
class Evolution {
 public:
  Evolution(const LocalMatrices& local, const PeriodicMesh& mesh);

  const LocalMatrices& local() const { return local_; }
  const PeriodicMesh& mesh() const { return mesh_; }
  int block() const { return local_.block(); }
  Eigen::Index dofs() const { return Eigen::Index(mesh_.J) * block(); }
  double dt() const { return local_.params.dt(); }

  void apply_K(const Eigen::Ref<const Eigen::MatrixXd>& x,
               Eigen::MatrixXd& y) const;
  void apply_Minv(const Eigen::Ref<const Eigen::MatrixXd>& x,
                  Eigen::MatrixXd& y) const;
  /// y_j = A0 x_j + Am1 x_{j-1}: the right-hand side of the auxiliary
  /// relation M q_j = (B x)_j that defines the in-cell gradient field.
  void apply_flux(const Eigen::Ref<const Eigen::MatrixXd>& x,
                  Eigen::MatrixXd& y) const;

  /// Advance (U^n, U^{n+1}) -> (U^{n+1}, U^{n+2}) in place.
  void step(StatePair& s) const;

  /// Same update applied to every column of (x0, x1) at once.
  void step_block(Eigen::MatrixXd& x0, Eigen::MatrixXd& x1) const;

  /// <u, M v> resp. <u, K v>.  With a mask, form_M keeps the observed local
  /// blocks, and form_K sums the gradient products (B u)_j^T M^{-1} (B v)_j
  /// over the cells j whose stencil {j-1, j} is observed: the gradients are
  /// computed from the whole fields and only then read off cell by cell, so
  /// both masked forms stay symmetric positive semidefinite and form_K
  /// annihilates constants exactly.
  double form_M(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                const std::vector<std::uint8_t>* mask = nullptr) const;
  double form_K(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                const std::vector<std::uint8_t>* mask = nullptr) const;

  /// Full energy, or, with a mask, the same four-term sum with each form
  /// restricted to the observed cells.  Because the gradient cells kept by
  /// the restricted stiffness form read only observed mass cells, the dt^2
  /// correction term stays dominated by the kinetic term under the CFL
  /// condition and the restricted energy is nonnegative step by step; it
  /// vanishes bitwise on a space-time-constant pair.
  double energy(const StatePair& s,
                const std::vector<std::uint8_t>* mask = nullptr) const;

 private:
  LocalMatrices local_;
  PeriodicMesh mesh_;
  FluxBlocks flux_;
  Eigen::MatrixXd Minv_;
  mutable Eigen::MatrixXd scratch_a_, scratch_b_;
};

struct RunOptions {
  double T = 1.0;
  int stride = 1;  // sampling stride of the emitted series
  const std::vector<std::uint8_t>* observed = nullptr;
  bool check_cfl = true;
};

struct RunSample {
  int n;
  double t;
  double e_total;
  double e_obs;
};

struct RunResult {
  std::vector<RunSample> series;
  int steps = 0;            // N = round(T / dt)
  double e0 = 0.0;          // initial energy
  double obs_integral = 0;  // dt * sum of observed energies, n = 0 .. N-1
  StatePair final;
};

/// Runs N = round(T/dt) energy intervals; the CFL margin is checked once at
/// start unless disabled.
RunResult run(const Evolution& ev, StatePair init, const RunOptions& opt);

}  // namespace wavegate
