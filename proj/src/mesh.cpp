#include "wavegate/mesh.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wavegate {

PeriodicMesh make_mesh(double x_lo, double x_hi, int J) {
  if (!(x_hi > x_lo)) throw ParamError("mesh domain is empty");
  if (J < 8 || J % 2 != 0)
    throw ParamError("cell count must be even and at least 8, got " +
                     std::to_string(J));
  return PeriodicMesh{x_lo, x_hi, J};
}

PeriodicMesh make_mesh_from_h(double x_lo, double x_hi, double h) {
  if (!(h > 0.0)) throw ParamError("cell width must be positive");
  const double L = x_hi - x_lo;
  const int J = int(std::llround(L / h));
  if (J <= 0 || std::abs(J * h - L) > 1e-12 * L)
    throw ParamError("cell width does not divide the domain length");
  return make_mesh(x_lo, x_hi, J);
}

std::vector<std::uint8_t> observed_cells(const PeriodicMesh& mesh,
                                         const ObservationRegion& region) {
  std::vector<std::uint8_t> mask(mesh.J);
  for (int j = 0; j < mesh.J; ++j)
    mask[j] = region.observed(mesh.center(j)) ? 1 : 0;
  return mask;
}

std::vector<double> mesh_frequencies(const PeriodicMesh& mesh) {
  const double base = 2.0 * std::numbers::pi / mesh.length();
  std::vector<double> out;
  out.reserve(mesh.J + 1);
  for (int m = -mesh.J / 2; m <= mesh.J / 2; ++m) out.push_back(base * m);
  return out;
}

}  // namespace wavegate
