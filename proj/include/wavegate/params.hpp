#pragma once

#include <stdexcept>

namespace wavegate {

// Degrees above 8 make the scaled monomial Gram matrix too ill-conditioned
// for a reliable double-precision Cholesky, so we refuse them outright.
inline constexpr int kMaxDegree = 8;

struct ParamError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CflError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Polynomial degree k, cell width h, and Courant ratio lambda = dt/h.
struct SchemeParams {
  int k = 1;
  double h = 1.0;
  double lambda = 0.1;

  double dt() const { return lambda * h; }
};

void validate(const SchemeParams& p);

}  // namespace wavegate
