#include "wavegate/gramian.hpp"

#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>

namespace wavegate {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr int kTile = 64;  // fixed accumulation tile width, independent of jobs
constexpr int kMaxPairDim = 4096;

// Runs fn(tile_index) for every tile on up to `jobs` threads.  The tile
// decomposition never changes with jobs, only the thread that executes it.
void for_each_tile(int ntiles, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || ntiles <= 1) {
    for (int t = 0; t < ntiles; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next.fetch_add(1); t < ntiles; t = next.fetch_add(1)) fn(t);
  };
  std::vector<std::thread> pool;
  const int nthreads = std::min(jobs, ntiles);
  pool.reserve(nthreads);
  for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Global stiffness and mass as dense matrices (the pair dimension is capped,
// so dense storage is fine).
Eigen::MatrixXd dense_K(const Evolution& ev) {
  const int nb = ev.block();
  const int J = ev.mesh().J;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ev.dofs(), ev.dofs());
  const LocalMatrices& lm = ev.local();
  for (int j = 0; j < J; ++j) {
    const int jl = (j + J - 1) % J, jr = (j + 1) % J;
    K.block(Eigen::Index(j) * nb, Eigen::Index(j) * nb, nb, nb) += lm.K0;
    K.block(Eigen::Index(j) * nb, Eigen::Index(jl) * nb, nb, nb) += lm.Km1;
    K.block(Eigen::Index(j) * nb, Eigen::Index(jr) * nb, nb, nb) += lm.Kp1;
  }
  return K;
}

Eigen::MatrixXd dense_M(const Evolution& ev) {
  const int nb = ev.block();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ev.dofs(), ev.dofs());
  for (int j = 0; j < ev.mesh().J; ++j)
    M.block(Eigen::Index(j) * nb, Eigen::Index(j) * nb, nb, nb) = ev.local().M;
  return M;
}

void mask_rows(Eigen::MatrixXd& x, const std::vector<std::uint8_t>& mask,
               int nb) {
  for (size_t j = 0; j < mask.size(); ++j)
    if (!mask[j]) x.middleRows(Eigen::Index(j) * nb, nb).setZero();
}

struct ReducedSolve {
  double mu_min;
  int deflated;
  int retained;
};

// Smallest eigenvalue of the pencil (G, A) on the subspace where A is
// numerically positive, given an eigendecomposition of A.
ReducedSolve reduce_and_solve(const Eigen::VectorXd& evals,
                              const Eigen::MatrixXd& evecs,
                              const Eigen::MatrixXd& G, double tol) {
  const double amax = evals.maxCoeff();
  if (!(amax > 0.0))
    throw NumericalError("energy form vanished; nothing to observe");
  std::vector<int> keep;
  for (int i = 0; i < evals.size(); ++i)
    if (evals[i] > tol * amax) keep.push_back(i);
  const int r = int(keep.size());
  if (r == 0) throw NumericalError("energy form deflated to nothing");

  Eigen::MatrixXd W(evecs.rows(), r);
  for (int i = 0; i < r; ++i)
    W.col(i) = evecs.col(keep[i]) / std::sqrt(evals[keep[i]]);

  const Eigen::MatrixXd B = W.transpose() * G * W;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (B + B.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("reduced pencil eigensolve failed");
  return {es.eigenvalues().minCoeff(), int(evals.size()) - r, r};
}

}  // namespace

QuadraticPencil build_pencil(const Evolution& ev,
                             const ObservationRegion& region, double T,
                             int jobs) {
  if (jobs < 1) throw ParamError("jobs must be at least 1");
  const Eigen::Index s = ev.dofs();
  const Eigen::Index dim = 2 * s;
  if (dim > kMaxPairDim) {
    std::ostringstream os;
    os << "pair dimension " << dim << " exceeds the dense-assembly cap "
       << kMaxPairDim;
    throw ParamError(os.str());
  }
  const double dt = ev.dt();
  const int N = int(std::llround(T / dt));
  if (N < 1) throw ParamError("final time shorter than one time step");

  const CflReport c = cfl_margin(ev.local(), ev.local().params.lambda, 257);
  if (c.margin > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "CFL violation: margin " << c.margin << ", largest stable lambda "
       << c.lambda_max;
    throw CflError(os.str());
  }

  const int nb = ev.block();
  const std::vector<std::uint8_t> mask = observed_cells(ev.mesh(), region);
  // gradient cells: the stencil of (B u)_j spans cells j-1 and j
  std::vector<std::uint8_t> gmask(mask.size());
  for (size_t j = 0; j < mask.size(); ++j)
    gmask[j] = mask[j] && mask[(j + mask.size() - 1) % mask.size()];

  QuadraticPencil p;
  p.params = ev.local().params;
  p.J = ev.mesh().J;
  p.N = N;
  p.T = T;

  // conserved-energy form on pairs:
  //   A = [ M/(2 dt^2)        K/4 - M/(2 dt^2) ]
  //       [ K/4 - M/(2 dt^2)  M/(2 dt^2)       ]
  const Eigen::MatrixXd K = dense_K(ev);
  const Eigen::MatrixXd M = dense_M(ev);
  const Eigen::MatrixXd diag = M / (2.0 * dt * dt);
  const Eigen::MatrixXd off = 0.25 * K - diag;
  p.A.resize(dim, dim);
  p.A.topLeftCorner(s, s) = diag;
  p.A.bottomRightCorner(s, s) = diag;
  p.A.topRightCorner(s, s) = off;
  p.A.bottomLeftCorner(s, s) = off;

  // trajectory matrices: column i is the state launched from basis vector i
  Eigen::MatrixXd x0(s, dim), x1(s, dim);
  x0.setZero();
  x1.setZero();
  x0.leftCols(s).setIdentity();
  x1.rightCols(s).setIdentity();

  Eigen::MatrixXd gm = Eigen::MatrixXd::Zero(dim, dim);  // mass-difference part
  Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(dim, dim);  // potential part
  Eigen::MatrixXd d, b0, b1, bd, w0, w1, wd;
  const int ntiles = int((dim + kTile - 1) / kTile);
  const int J = ev.mesh().J;

  for (int n = 0; n < N; ++n) {
    d = x1 - x0;

    // M (x1 - x0) with hidden rows zeroed.  M is block diagonal, so the row
    // restriction realizes the observed-cell sum once the product is
    // contracted against d.
    Eigen::MatrixXd mdiff(s, dim);
    for (int j = 0; j < J; ++j)
      mdiff.middleRows(Eigen::Index(j) * nb, nb).noalias() =
          ev.local().M * d.middleRows(Eigen::Index(j) * nb, nb);
    mask_rows(mdiff, mask, nb);

    // Potential part, matching Evolution::energy with a mask: the stiffness
    // form restricted to observed cells is the cellwise gradient product
    // (B u)_j^T M^{-1} (B v)_j over fully observed stencils, so apply B to
    // the whole fields, zero the rows outside the gradient mask, and
    // contract through the block-diagonal M^{-1} (which preserves the row
    // restriction).
    ev.apply_flux(x0, b0);
    ev.apply_flux(x1, b1);
    ev.apply_flux(d, bd);
    mask_rows(b0, gmask, nb);
    mask_rows(b1, gmask, nb);
    mask_rows(bd, gmask, nb);
    ev.apply_Minv(b0, w0);
    ev.apply_Minv(b1, w1);
    ev.apply_Minv(bd, wd);

    for_each_tile(ntiles, jobs, [&](int t) {
      const Eigen::Index c0 = Eigen::Index(t) * kTile;
      const Eigen::Index w = std::min<Eigen::Index>(kTile, dim - c0);
      gm.middleCols(c0, w).noalias() += d.transpose() * mdiff.middleCols(c0, w);
      gp.middleCols(c0, w).noalias() += b0.transpose() * w0.middleCols(c0, w);
      gp.middleCols(c0, w).noalias() += b1.transpose() * w1.middleCols(c0, w);
      gp.middleCols(c0, w).noalias() -= bd.transpose() * wd.middleCols(c0, w);
    });

    if (n + 1 < N) {
      ev.step_block(x0, x1);
      if ((n & 63) == 0 && !x1.allFinite()) {
        std::ostringstream os;
        os << "basis propagation became non-finite at step " << n + 1;
        throw NumericalError(os.str());
      }
    }
  }
  if (!x1.allFinite())
    throw NumericalError("basis propagation became non-finite");

  p.G = gm / (2.0 * dt) + 0.25 * dt * gp;
  p.G = (0.5 * (p.G + p.G.transpose())).eval();
  return p;
}

ObservabilityResult observability_constant(const QuadraticPencil& p,
                                           double defl_tol) {
  const Eigen::Index dim = p.A.rows();
  const Eigen::Index s = dim / 2;

  // A is persymmetric: (w; w) and (w; -w) split it into K/4 resp.
  // M/dt^2 - K/4, so two half-size eigensolves give its full decomposition.
  const Eigen::MatrixXd sum = p.A.topLeftCorner(s, s) + p.A.topRightCorner(s, s);
  const Eigen::MatrixXd dif = p.A.topLeftCorner(s, s) - p.A.topRightCorner(s, s);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_sum(sum);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_dif(dif);
  if (es_sum.info() != Eigen::Success || es_dif.info() != Eigen::Success)
    throw NumericalError("energy form eigensolve failed");

  Eigen::VectorXd evals(dim);
  Eigen::MatrixXd evecs(dim, dim);
  const double q = 1.0 / std::sqrt(2.0);
  evals.head(s) = es_sum.eigenvalues();
  evals.tail(s) = es_dif.eigenvalues();
  evecs.topLeftCorner(s, s) = q * es_sum.eigenvectors();
  evecs.bottomLeftCorner(s, s) = q * es_sum.eigenvectors();
  evecs.topRightCorner(s, s) = q * es_dif.eigenvectors();
  evecs.bottomRightCorner(s, s) = -q * es_dif.eigenvectors();

  const ReducedSolve r = reduce_and_solve(evals, evecs, p.G, defl_tol);
  if (!(r.mu_min > 0.0)) {
    std::ostringstream os;
    os << "pencil eigenvalue " << r.mu_min
       << " is not positive: unobservable at this resolution";
    throw NumericalError(os.str());
  }
  return {1.0 / r.mu_min, r.mu_min, r.deflated, r.retained};
}

FilteredResult filtered_constant(const QuadraticPencil& p, const Evolution& ev,
                                 const DispersionTable& table,
                                 const FilterSpec& filter, double defl_tol) {
  if (!(filter.delta >= 0.0 && filter.delta < 1.0))
    throw ParamError("filter delta must lie in [0, 1)");
  const PeriodicMesh& mesh = ev.mesh();
  const int J = mesh.J;
  const int nb = ev.block();
  const Eigen::Index s = ev.dofs();
  const Eigen::Index dim = 2 * s;
  if (p.A.rows() != dim) throw ParamError("pencil does not match the mesh");
  const double h = mesh.h();
  const double dt = ev.dt();
  const double cutoff = (1.0 - filter.delta) * kPi / h;
  const double base = 2.0 * kPi / mesh.length();

  std::vector<int> branches;
  if (filter.physical_only)
    branches.push_back(table.physical);
  else
    for (int b = 0; b < table.branches(); ++b) branches.push_back(b);

  // real candidate fields Re[alpha e^{i xi x_j} v], alpha in {1, i}
  std::vector<Eigen::VectorXd> cand;
  auto field = [&](double xi, const Eigen::VectorXcd& v, cd alpha) {
    Eigen::VectorXd f(s);
    for (int j = 0; j < J; ++j) {
      const cd e = alpha * std::exp(cd(0.0, xi * mesh.center(j)));
      for (int c = 0; c < nb; ++c)
        f[Eigen::Index(j) * nb + c] = std::real(e * v[c]);
    }
    return f;
  };

  for (int m = 0; m <= J / 2; ++m) {
    const double xm = base * m;
    if (xm > cutoff + 1e-12 * cutoff) break;
    const int i = table.index_of(xm);
    for (int b : branches) {
      const Eigen::VectorXcd& v = table.vec[b][i];
      for (const cd alpha : {cd(1.0, 0.0), cd(0.0, 1.0)}) {
        const Eigen::VectorXd f0 = field(xm, v, alpha);
        if (f0.lpNorm<Eigen::Infinity>() < 1e-14) continue;
        if (!filter.slave_pair) {
          Eigen::VectorXd z0 = Eigen::VectorXd::Zero(dim);
          Eigen::VectorXd z1 = Eigen::VectorXd::Zero(dim);
          z0.head(s) = f0;
          z1.tail(s) = f0;
          cand.push_back(z0);
          cand.push_back(z1);
        } else {
          const double om = table.omega(b, i);
          if (!std::isfinite(om))
            throw NumericalError("modal frequency undefined inside filter");
          for (const double dir : {1.0, -1.0}) {
            const Eigen::VectorXd f1 =
                field(xm, v, alpha * std::exp(cd(0.0, -dir * om * dt)));
            Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
            z.head(s) = f0;
            z.tail(s) = f1;
            cand.push_back(z);
          }
        }
      }
    }
  }
  if (cand.empty()) throw ParamError("filter retains no frequencies");

  Eigen::MatrixXd C(dim, Eigen::Index(cand.size()));
  for (size_t i = 0; i < cand.size(); ++i) C.col(Eigen::Index(i)) = cand[i];

  // orthonormal basis of the span, rank-revealing
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C);
  const Eigen::MatrixXd R = qr.matrixR();
  const double r00 = std::abs(R(0, 0));
  int rank = 0;
  for (Eigen::Index i = 0; i < std::min(R.rows(), R.cols()); ++i)
    if (std::abs(R(i, i)) > 1e-10 * r00) ++rank;
  if (rank == 0) throw ParamError("filter retains no frequencies");
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, rank);

  const Eigen::MatrixXd Ap = Q.transpose() * p.A * Q;
  const Eigen::MatrixXd Gp = Q.transpose() * p.G * Q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (Ap + Ap.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("filtered energy eigensolve failed");
  const ReducedSolve r =
      reduce_and_solve(es.eigenvalues(), es.eigenvectors(), Gp, defl_tol);
  if (!(r.mu_min > 0.0)) {
    std::ostringstream os;
    os << "filtered pencil eigenvalue " << r.mu_min
       << " is not positive: subspace unobservable";
    throw NumericalError(os.str());
  }
  return {1.0 / r.mu_min, r.mu_min, rank, r.deflated};
}

RateFit fit_rate(const std::vector<double>& h, const std::vector<double>& ct) {
  if (h.size() != ct.size() || h.size() < 2)
    throw ParamError("rate fit needs at least two (h, C_T) points");
  const int n = int(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    if (!(h[i] > 0.0) || !(ct[i] > 0.0))
      throw ParamError("rate fit needs positive h and C_T");
    xs[i] = 1.0 / h[i];
    ys[i] = std::log(ct[i]);
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-12 * n * sxx)
    throw ParamError("rate fit is singular: 1/h values coincide");
  RateFit f;
  f.points = n;
  f.r = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.r * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (int i = 0; i < n; ++i) {
    const double pred = f.intercept + f.r * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
  }
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace wavegate
