#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wavegate/local_matrices.hpp"

namespace wavegate {

/// Frequency symbol K0 + Km1 e^{-i xi h} + Kp1 e^{i xi h}; Hermitian and
/// positive semidefinite for every real xi, positive definite at xi h = pi.
Eigen::MatrixXcd symbol(const LocalMatrices& local, double xi);

/// d/dxi of symbol(): i h (Kp1 e^{i xi h} - Km1 e^{-i xi h}).
Eigen::MatrixXcd symbol_derivative(const LocalMatrices& local, double xi);

enum class VgFlag { none, critical, origin_limit };

std::string to_string(VgFlag f);

/// Eigenvalue branches of the symbol over a frequency grid, tracked
/// continuously in xi.  Branch order is fixed by ascending eigenvalue at the
/// left end of the grid and then followed by eigenvector overlap, so a branch
/// keeps its row index even where the ascending order would swap.
struct DispersionTable {
  SchemeParams params;
  std::vector<double> xi;   // sorted, spans [-pi/h, pi/h], contains 0
  Eigen::MatrixXd sigma;    // (k+1) x n spatial eigenvalues
  Eigen::MatrixXd dsigma;   // d sigma / d xi, from the eigenvector identity
  Eigen::MatrixXd omega;    // temporal frequency of the leapfrog scheme
  Eigen::MatrixXd vg;       // group velocity d omega / d xi (even in xi)
  std::vector<std::vector<VgFlag>> flag;
  std::vector<std::vector<Eigen::VectorXcd>> vec;  // M-orthonormal, phase-fixed
  int physical = 0;         // branch with sigma(0) = 0

  int branches() const { return int(sigma.rows()); }
  int points() const { return int(xi.size()); }
  int index_of(double x) const;  // exact grid lookup, throws if absent
};

/// n evenly spaced points spanning [-pi/h, pi/h]; n must be odd so that 0 is
/// a grid point.
std::vector<double> uniform_grid(double h, int n);

/// 1025 uniform points plus dyadic refinement (10 halvings of the base step)
/// toward 0 and both endpoints.
std::vector<double> default_grid(double h);

DispersionTable eig_branches(const LocalMatrices& local,
                             const std::vector<double>& grid);

/// sign(xi) * (2/dt) asin(sqrt(sigma) dt / 2); throws CflError when
/// sigma dt^2 > 4.
double temporal_frequency(double sigma, double xi, double dt);

struct VgValue {
  double value;
  VgFlag flag;
};

VgValue group_velocity(const DispersionTable& t, int branch, int i);

struct CflReport {
  double margin;           // max sigma dt^2 / 4 over all branches
  double margin_physical;  // same restricted to the physical branch
  double argmax_xi;
  double lambda_max;       // largest stable dt/h
};

CflReport cfl_margin(const LocalMatrices& local, double lambda, int n_samples);

struct PositiveBand {
  double eta;     // largest xi such that vg > floor on all of [0, eta]
  double delta;   // 1 - eta h / pi
  double vg_min;  // smallest group velocity on the retained prefix
};

PositiveBand positive_band(const DispersionTable& table, double floor_value);

/// Curvature of the lowest branch at xi = 0 by a five-point second
/// difference with step delta (used as an independent cross-check of the
/// tabulated group velocities).
double physical_curvature_at_zero(const LocalMatrices& local, double delta);

}  // namespace wavegate
