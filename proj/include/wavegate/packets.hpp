#pragma once

#include <Eigen/Dense>
#include <vector>

#include "wavegate/evolve.hpp"
#include "wavegate/spectral.hpp"

namespace wavegate {

/// Compactly supported bump exp(-(1-x^2)^(-1/(s-1))) on (-1,1); Gevrey
/// regularity index s > 1.
double gevrey_bump(double x, double s);

struct PacketSpec {
  double gamma = 0.8;  // window half-width rho = h^{-gamma}
  double s = 1.5;      // regularity of the window
  double x_c = 0.0;    // packet center in physical space
  double mu = 1.0;     // gap factor separating the window from pi/h

  double rho(double h) const;
  double xi_c(double h) const;  // pi/h - (1 + mu) rho
};

/// Near-monochromatic physical-branch pair in physical space.
struct Packet {
  StatePair state;
  std::vector<int> modes;  // retained DFT mode indices m
  double e0 = 0.0;
};

/// Populates the retained discrete frequencies of the window with the
/// physical-branch eigenvector weighted by r(xi) h^{gamma/2} chi(xi)
/// e^{-i xi x_c}, advances the second level by e^{-i omega dt} in frequency
/// space, transforms back, and keeps the real parts.  The branch table must
/// be sampled exactly on mesh_frequencies(mesh).
Packet build_packet(const Evolution& ev, const DispersionTable& table,
                    const PacketSpec& spec);

struct TrapResult {
  double h;
  int J;
  int N;
  double e0;
  double obs_integral;
  double fraction;        // obs_integral / (N dt e0), below 1 by conservation
  double ct_lower_bound;  // e0 / obs_integral
};

/// Runs the packet to time T and reports how much of its energy ever shows
/// up in the observed region.
TrapResult trap_experiment(const SchemeParams& params, const PeriodicMesh& mesh,
                           const ObservationRegion& region,
                           const PacketSpec& spec, double T);

/// Semidiscrete transform h * sum_j u_j e^{-i xi x_j} of a cell-major vector,
/// componentwise over the local basis.
Eigen::VectorXcd dft_at(const Evolution& ev, const Eigen::VectorXd& u,
                        double xi);

}  // namespace wavegate
