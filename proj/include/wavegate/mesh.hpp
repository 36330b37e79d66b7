#pragma once

#include <cstdint>
#include <vector>

#include "wavegate/params.hpp"

namespace wavegate {

/// Uniform periodic mesh of J cells covering [x_lo, x_hi].
struct PeriodicMesh {
  double x_lo = -6.0;
  double x_hi = 6.0;
  int J = 0;

  double length() const { return x_hi - x_lo; }
  double h() const { return length() / J; }
  double center(int j) const { return x_lo + (j + 0.5) * h(); }
};

PeriodicMesh make_mesh(double x_lo, double x_hi, int J);

/// Chooses J from a target cell width, which must divide the domain length.
PeriodicMesh make_mesh_from_h(double x_lo, double x_hi, double h);

/// Cells whose centers fall inside [hide_lo, hide_hi] are hidden from the
/// observation functionals; everything else is observed.
struct ObservationRegion {
  double hide_lo = -1.0;
  double hide_hi = 1.0;

  bool observed(double x) const { return x < hide_lo || x > hide_hi; }
};

std::vector<std::uint8_t> observed_cells(const PeriodicMesh& mesh,
                                         const ObservationRegion& region);

/// Discrete frequencies 2 pi m / (J h) for m = -J/2 .. J/2.  Both signs of
/// the end frequency are listed (J+1 values) so the list doubles as an
/// eigenvalue-branch grid spanning [-pi/h, pi/h].
std::vector<double> mesh_frequencies(const PeriodicMesh& mesh);

}  // namespace wavegate
