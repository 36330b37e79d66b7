#pragma once

#include <Eigen/Dense>
#include <vector>

#include "wavegate/evolve.hpp"
#include "wavegate/spectral.hpp"

namespace wavegate {

/// Pair of quadratic forms on the space of initial pairs x = (U^0, U^1):
/// x^T A x is the conserved discrete energy of the pair and x^T G x the
/// time-integrated observed energy dt * sum_{n=0}^{N-1} E_obs^n of the
/// trajectory launched from x.
struct QuadraticPencil {
  Eigen::MatrixXd A;
  Eigen::MatrixXd G;
  SchemeParams params;
  int J = 0;
  int N = 0;
  double T = 0.0;
};

/// Propagates the full canonical basis of the pair space through the leapfrog
/// recursion once, accumulating the observed-energy form after every step.
/// jobs > 1 distributes fixed-width column tiles over worker threads; the
/// tile layout is independent of the worker count, so results are
/// byte-identical for any jobs value.
QuadraticPencil build_pencil(const Evolution& ev,
                             const ObservationRegion& region, double T,
                             int jobs = 1);

struct ObservabilityResult {
  double ct;      // 1 / mu_min
  double mu_min;  // smallest pencil eigenvalue restricted to range(A)
  int deflated;   // dimension of the discarded near-null space of A
  int retained;   // dimension of the reduced eigenproblem
};

/// Deflates the null space of A (relative threshold defl_tol) and returns the
/// inverse of the smallest eigenvalue of A^{-1/2} G A^{-1/2} on the retained
/// subspace.
ObservabilityResult observability_constant(const QuadraticPencil& p,
                                           double defl_tol = 1e-10);

struct FilterSpec {
  double delta = 0.1;         // drop frequencies with |xi| > (1-delta) pi/h
  bool physical_only = true;  // restrict to the physical branch direction
  bool slave_pair = false;    // tie U^1 to U^0 by the modal phase advance
};

struct FilteredResult {
  double ct;
  double mu_min;
  int retained;  // dimension of the filtered subspace
  int deflated;
};

/// Observability constant of the pencil compressed onto the real subspace
/// spanned by the filtered modes.  The table must be sampled on
/// mesh_frequencies of the pencil's mesh.
FilteredResult filtered_constant(const QuadraticPencil& p, const Evolution& ev,
                                 const DispersionTable& table,
                                 const FilterSpec& filter,
                                 double defl_tol = 1e-10);

struct RateFit {
  double r;  // slope of ln C_T against 1/h
  double intercept;
  double r2;
  int points;
};

RateFit fit_rate(const std::vector<double>& h, const std::vector<double>& ct);

}  // namespace wavegate
