#include "wavegate/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

namespace wavegate {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// thresholds for the degenerate points of the group-velocity formula
constexpr double kSigmaZeroScaled = 1e-12;   // sigma h^2 below this: origin limit
constexpr double kCriticalGap = 4e-8;        // 4 - sigma dt^2 below this: critical
constexpr double kNodeSigmaScaled = 1e-8;    // extrapolation nodes need sigma h^2 above
constexpr double kNodeGap = 1e-4;            // ... and 4 - sigma dt^2 above

struct PointEig {
  Eigen::VectorXd sigma;   // ascending
  Eigen::MatrixXcd vec;    // M-orthonormal columns
};

PointEig solve_point(const LocalMatrices& local, double xi) {
  const Eigen::MatrixXcd K = symbol(local, xi);
  const Eigen::MatrixXcd Ks = 0.5 * (K + K.adjoint());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      Ks, local.M.cast<cd>());
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "symbol eigensolve failed at xi = " << xi;
    throw NumericalError(os.str());
  }
  PointEig p{es.eigenvalues(), es.eigenvectors()};
  for (int c = 0; c < p.vec.cols(); ++c) {
    const double nrm = std::sqrt(std::real(
        (p.vec.col(c).adjoint() * local.M.cast<cd>() * p.vec.col(c))(0)));
    p.vec.col(c) /= nrm;
  }
  return p;
}

// Largest-modulus component made real and positive (lowest index on ties).
void fix_phase(Eigen::VectorXcd& v) {
  int imax = 0;
  double best = std::norm(v[0]);
  for (int i = 1; i < v.size(); ++i) {
    const double a = std::norm(v[i]);
    if (a > best) {
      best = a;
      imax = i;
    }
  }
  const cd a = v[imax];
  v *= std::conj(a) / std::abs(a);
}

// Greedy max-overlap matching of eigenvector columns in the M inner product.
std::optional<std::vector<int>> match_columns(const Eigen::MatrixXcd& prev,
                                              const Eigen::MatrixXcd& next,
                                              const Eigen::MatrixXd& M) {
  const int n = int(prev.cols());
  Eigen::MatrixXd overlap(n, n);
  const Eigen::MatrixXcd MN = M.cast<cd>() * next;
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < n; ++c)
      overlap(b, c) = std::abs((prev.col(b).adjoint() * MN.col(c))(0));

  std::vector<int> assign(n, -1);
  std::vector<bool> rowDone(n, false), colDone(n, false);
  for (int pick = 0; pick < n; ++pick) {
    int bb = -1, cc = -1;
    double best = -1.0;
    for (int b = 0; b < n; ++b) {
      if (rowDone[b]) continue;
      for (int c = 0; c < n; ++c) {
        if (colDone[c]) continue;
        if (overlap(b, c) > best) {
          best = overlap(b, c);
          bb = b;
          cc = c;
        }
      }
    }
    if (best < 0.5) return std::nullopt;
    assign[bb] = cc;
    rowDone[bb] = true;
    colDone[cc] = true;
  }
  return assign;
}

// Connect the branch order at xi_a (columns of va) to xi_b, bisecting the
// interval when the overlap test is ambiguous.
std::vector<int> walk(const LocalMatrices& local, double xi_a,
                      const Eigen::MatrixXcd& va, double xi_b,
                      const Eigen::MatrixXcd& vb, int depth) {
  if (auto m = match_columns(va, vb, local.M)) return *m;
  if (depth > 40) {
    std::ostringstream os;
    os << "branch tracking failed between xi = " << xi_a << " and " << xi_b;
    throw NumericalError(os.str());
  }
  const double mid = 0.5 * (xi_a + xi_b);
  const PointEig pm = solve_point(local, mid);
  const std::vector<int> left = walk(local, xi_a, va, mid, pm.vec, depth + 1);
  const std::vector<int> right = walk(local, mid, pm.vec, xi_b, vb, depth + 1);
  std::vector<int> out(left.size());
  for (size_t b = 0; b < left.size(); ++b) out[b] = right[left[b]];
  return out;
}

double lagrange3(const double* xs, const double* ys, double x) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    double term = ys[i];
    for (int j = 0; j < 3; ++j)
      if (j != i) term *= (x - xs[j]) / (xs[i] - xs[j]);
    s += term;
  }
  return s;
}

}  // namespace

Eigen::MatrixXcd symbol(const LocalMatrices& local, double xi) {
  const double th = xi * local.params.h;
  // Group the theta-independent part before applying cos(th) - 1 =
  // -2 sin^2(th/2): the blocks nearly cancel at small wavenumbers, and the
  // naive sum K0 + cos(th) * (Km1 + Kp1) would lose all relative accuracy
  // exactly where the lowest eigenvalue goes to zero.
  const double hs = std::sin(0.5 * th);
  const Eigen::MatrixXd sum = local.Km1 + local.Kp1;
  const Eigen::MatrixXd re =
      (local.K0 + local.Km1 + local.Kp1) - (2.0 * hs * hs) * sum;
  const Eigen::MatrixXd im = std::sin(th) * (local.Kp1 - local.Km1);
  return re.cast<cd>() + cd(0.0, 1.0) * im.cast<cd>();
}

Eigen::MatrixXcd symbol_derivative(const LocalMatrices& local, double xi) {
  const double h = local.params.h;
  const double th = xi * h;
  const cd em(std::cos(th), -std::sin(th));
  const cd ep = std::conj(em);
  const cd ih(0.0, h);
  return ih * (ep * local.Kp1.cast<cd>() - em * local.Km1.cast<cd>());
}

std::string to_string(VgFlag f) {
  switch (f) {
    case VgFlag::critical:
      return "critical";
    case VgFlag::origin_limit:
      return "origin-limit";
    default:
      return "";
  }
}

std::vector<double> uniform_grid(double h, int n) {
  if (n < 3 || n % 2 == 0)
    throw ParamError("frequency grid size must be odd and at least 3");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = (kPi / h) * (2.0 * i / double(n - 1) - 1.0);
  return g;
}

std::vector<double> default_grid(double h) {
  std::vector<double> g = uniform_grid(h, 1025);
  const double step = (2.0 * kPi / h) / 1024.0;
  const double end = kPi / h;
  for (int l = 1; l <= 10; ++l) {
    const double off = step / double(1 << l);
    g.push_back(off);
    g.push_back(-off);
    g.push_back(end - off);
    g.push_back(-end + off);
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

int DispersionTable::index_of(double x) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(x));
  auto it = std::lower_bound(xi.begin(), xi.end(), x - tol);
  if (it != xi.end() && std::abs(*it - x) <= tol) return int(it - xi.begin());
  throw ParamError("requested frequency is not a grid point");
}

double temporal_frequency(double sigma, double xi, double dt) {
  const double s = std::max(sigma, 0.0) * dt * dt;
  if (s > 4.0 * (1.0 + 1e-12))
    throw CflError("sigma dt^2 exceeds 4: time step too large for this mode");
  const double x = std::min(1.0, 0.5 * std::sqrt(s));
  const double sgn = (xi > 0.0) - (xi < 0.0);
  return sgn * (2.0 / dt) * std::asin(x);
}

DispersionTable eig_branches(const LocalMatrices& local,
                             const std::vector<double>& grid) {
  const double h = local.params.h;
  const double dt = local.params.dt();
  const int nb = local.block();
  const int n = int(grid.size());
  if (n < 3 || !std::is_sorted(grid.begin(), grid.end()))
    throw ParamError("frequency grid must be sorted with at least 3 points");
  const double tol = 1e-9 * kPi / h;
  if (std::abs(grid.front() + kPi / h) > tol ||
      std::abs(grid.back() - kPi / h) > tol)
    throw ParamError("frequency grid must span [-pi/h, pi/h]");

  DispersionTable t;
  t.params = local.params;
  t.xi = grid;
  t.sigma.resize(nb, n);
  t.dsigma.resize(nb, n);
  t.omega.resize(nb, n);
  t.vg.resize(nb, n);
  t.flag.assign(nb, std::vector<VgFlag>(n, VgFlag::none));
  t.vec.assign(nb, std::vector<Eigen::VectorXcd>(n));

  Eigen::MatrixXcd prev;
  for (int i = 0; i < n; ++i) {
    const PointEig p = solve_point(local, grid[i]);
    std::vector<int> order(nb);
    if (i == 0) {
      for (int b = 0; b < nb; ++b) order[b] = b;  // ascending at the left end
    } else {
      order = walk(local, grid[i - 1], prev, grid[i], p.vec, 0);
    }
    Eigen::MatrixXcd cur(nb, nb);
    for (int b = 0; b < nb; ++b) {
      t.sigma(b, i) = p.sigma[order[b]];
      Eigen::VectorXcd v = p.vec.col(order[b]);
      fix_phase(v);
      t.vec[b][i] = v;
      cur.col(b) = v;
    }
    prev = cur;
  }

  // physical branch: smallest eigenvalue magnitude at xi = 0
  const int i0 = t.index_of(0.0);
  t.physical = 0;
  for (int b = 1; b < nb; ++b)
    if (std::abs(t.sigma(b, i0)) < std::abs(t.sigma(t.physical, i0)))
      t.physical = b;

  const double nanv = std::numeric_limits<double>::quiet_NaN();
  for (int b = 0; b < nb; ++b)
    for (int i = 0; i < n; ++i) {
      const double sg = t.sigma(b, i);
      const Eigen::MatrixXcd dK = symbol_derivative(local, grid[i]);
      t.dsigma(b, i) =
          std::real((t.vec[b][i].adjoint() * dK * t.vec[b][i])(0));

      const double s = std::max(sg, 0.0) * dt * dt;
      t.omega(b, i) = (s <= 4.0 * (1.0 + 1e-12))
                          ? temporal_frequency(sg, grid[i], dt)
                          : nanv;

      const double gap = 4.0 - s;
      if (sg * h * h <= kSigmaZeroScaled) {
        t.flag[b][i] = VgFlag::origin_limit;
        t.vg(b, i) = nanv;
      } else if (gap <= kCriticalGap) {
        t.flag[b][i] = VgFlag::critical;
        t.vg(b, i) = nanv;
      } else {
        const double sgn = (grid[i] > 0.0) - (grid[i] < 0.0);
        const double raw = t.dsigma(b, i) / (std::sqrt(gap) * std::sqrt(sg));
        // d omega / d xi is even in xi because omega is odd
        t.vg(b, i) = (sgn == 0.0 ? 0.0 : sgn * raw);
      }
    }

  // fill flagged entries by one-sided quadratic extrapolation along the branch
  for (int b = 0; b < nb; ++b)
    for (int i = 0; i < n; ++i) {
      if (t.flag[b][i] == VgFlag::none) continue;
      auto usable = [&](int j) {
        if (t.flag[b][j] != VgFlag::none) return false;
        const double s = std::max(t.sigma(b, j), 0.0) * dt * dt;
        return t.sigma(b, j) * h * h >= kNodeSigmaScaled && 4.0 - s >= kNodeGap;
      };
      auto collect = [&](int dir) {
        std::vector<int> nodes;
        for (int j = i + dir; j >= 0 && j < n && int(nodes.size()) < 3; j += dir)
          if (usable(j)) nodes.push_back(j);
        return nodes;
      };
      const std::vector<int> up = collect(+1), down = collect(-1);
      const std::vector<int>* pick = nullptr;
      if (up.size() == 3 && down.size() == 3)
        pick = std::abs(grid[up[0]] - grid[i]) < std::abs(grid[down[0]] - grid[i])
                   ? &up
                   : &down;
      else if (up.size() == 3)
        pick = &up;
      else if (down.size() == 3)
        pick = &down;
      if (!pick) {
        t.vg(b, i) = nanv;
        continue;
      }
      double xs[3], ys[3];
      for (int j = 0; j < 3; ++j) {
        xs[j] = grid[(*pick)[j]];
        ys[j] = t.vg(b, (*pick)[j]);
      }
      t.vg(b, i) = lagrange3(xs, ys, grid[i]);
    }

  return t;
}

VgValue group_velocity(const DispersionTable& t, int branch, int i) {
  if (branch < 0 || branch >= t.branches() || i < 0 || i >= t.points())
    throw ParamError("group_velocity: index out of range");
  return {t.vg(branch, i), t.flag[branch][i]};
}

CflReport cfl_margin(const LocalMatrices& local, double lambda, int n_samples) {
  if (n_samples < 64) throw ParamError("cfl_margin needs at least 64 samples");
  if (!(lambda > 0.0)) throw ParamError("lambda must be positive");
  const int n = n_samples | 1;
  const DispersionTable t = eig_branches(local, uniform_grid(local.params.h, n));
  const double dt2 = lambda * local.params.h * lambda * local.params.h;

  CflReport r{0.0, 0.0, 0.0, 0.0};
  double smax = 0.0;
  for (int b = 0; b < t.branches(); ++b)
    for (int i = 0; i < t.points(); ++i) {
      const double s = t.sigma(b, i);
      if (s > smax) {
        smax = s;
        r.argmax_xi = t.xi[i];
      }
      if (b == t.physical)
        r.margin_physical = std::max(r.margin_physical, s * dt2 / 4.0);
    }
  r.margin = smax * dt2 / 4.0;
  r.lambda_max = 2.0 / (local.params.h * std::sqrt(smax));
  return r;
}

PositiveBand positive_band(const DispersionTable& table, double floor_value) {
  const int i0 = table.index_of(0.0);
  const int b = table.physical;
  PositiveBand out{0.0, 1.0, 0.0};
  double vmin = std::numeric_limits<double>::infinity();
  for (int i = i0; i < table.points(); ++i) {
    const double v = table.vg(b, i);
    if (!(v > floor_value)) break;
    vmin = std::min(vmin, v);
    out.eta = table.xi[i];
  }
  out.delta = 1.0 - out.eta * table.params.h / kPi;
  out.vg_min = std::isfinite(vmin) ? vmin : 0.0;
  return out;
}

double physical_curvature_at_zero(const LocalMatrices& local, double delta) {
  if (!(delta > 0.0)) throw ParamError("delta must be positive");
  auto lowest = [&](double xi) { return solve_point(local, xi).sigma[0]; };
  const double s0 = lowest(0.0);
  const double s1 = lowest(delta), sm1 = lowest(-delta);
  const double s2 = lowest(2.0 * delta), sm2 = lowest(-2.0 * delta);
  return (-s2 + 16.0 * s1 - 30.0 * s0 + 16.0 * sm1 - sm2) / (12.0 * delta * delta);
}

}  // namespace wavegate
