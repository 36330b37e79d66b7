#include "wavegate/evolve.hpp"

#include <cmath>
#include <sstream>

#include "wavegate/spectral.hpp"

namespace wavegate {

Evolution::Evolution(const LocalMatrices& local, const PeriodicMesh& mesh)
    : local_(local), mesh_(mesh), flux_(flux_blocks(local.params.k)) {
  const double hm = mesh.h();
  if (std::abs(hm - local.params.h) > 1e-12 * local.params.h)
    throw ParamError("mesh cell width disagrees with the assembly width");
  Eigen::LLT<Eigen::MatrixXd> llt(local_.M);
  if (llt.info() != Eigen::Success)
    throw NumericalError("cell mass matrix is not positive definite");
  Minv_ = llt.solve(Eigen::MatrixXd::Identity(local_.block(), local_.block()));
}

void Evolution::apply_K(const Eigen::Ref<const Eigen::MatrixXd>& x,
                        Eigen::MatrixXd& y) const {
  const int nb = block();
  const int J = mesh_.J;
  y.resize(x.rows(), x.cols());
  for (int j = 0; j < J; ++j) {
    const int jl = (j + J - 1) % J;
    const int jr = (j + 1) % J;
    auto yj = y.middleRows(Eigen::Index(j) * nb, nb);
    yj.noalias() = local_.K0 * x.middleRows(Eigen::Index(j) * nb, nb);
    yj.noalias() += local_.Km1 * x.middleRows(Eigen::Index(jl) * nb, nb);
    yj.noalias() += local_.Kp1 * x.middleRows(Eigen::Index(jr) * nb, nb);
  }
}

void Evolution::apply_Minv(const Eigen::Ref<const Eigen::MatrixXd>& x,
                           Eigen::MatrixXd& y) const {
  const int nb = block();
  y.resize(x.rows(), x.cols());
  for (int j = 0; j < mesh_.J; ++j)
    y.middleRows(Eigen::Index(j) * nb, nb).noalias() =
        Minv_ * x.middleRows(Eigen::Index(j) * nb, nb);
}

void Evolution::apply_flux(const Eigen::Ref<const Eigen::MatrixXd>& x,
                           Eigen::MatrixXd& y) const {
  const int nb = block();
  const int J = mesh_.J;
  y.resize(x.rows(), x.cols());
  for (int j = 0; j < J; ++j) {
    const int jl = (j + J - 1) % J;
    auto yj = y.middleRows(Eigen::Index(j) * nb, nb);
    yj.noalias() = flux_.A0 * x.middleRows(Eigen::Index(j) * nb, nb);
    yj.noalias() += flux_.Am1 * x.middleRows(Eigen::Index(jl) * nb, nb);
  }
}

void Evolution::step(StatePair& s) const {
  const double dt2 = dt() * dt();
  apply_K(s.u1, scratch_a_);
  apply_Minv(scratch_a_, scratch_b_);
  s.u0 = 2.0 * s.u1 - s.u0 - dt2 * scratch_b_;
  s.u0.swap(s.u1);
}

void Evolution::step_block(Eigen::MatrixXd& x0, Eigen::MatrixXd& x1) const {
  const double dt2 = dt() * dt();
  apply_K(x1, scratch_a_);
  apply_Minv(scratch_a_, scratch_b_);
  x0 = 2.0 * x1 - x0 - dt2 * scratch_b_;
  x0.swap(x1);
}

namespace {

double masked_dot(const Eigen::VectorXd& u, const Eigen::MatrixXd& sv, int nb,
                  const std::vector<std::uint8_t>* mask) {
  if (!mask) return u.dot(sv.col(0));
  double acc = 0.0;
  for (size_t j = 0; j < mask->size(); ++j)
    if ((*mask)[j])
      acc += u.segment(Eigen::Index(j) * nb, nb)
                 .dot(sv.col(0).segment(Eigen::Index(j) * nb, nb));
  return acc;
}

}  // namespace

double Evolution::form_M(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                         const std::vector<std::uint8_t>* mask) const {
  const int nb = block();
  Eigen::MatrixXd mv(v.size(), 1);
  for (int j = 0; j < mesh_.J; ++j)
    mv.col(0).segment(Eigen::Index(j) * nb, nb).noalias() =
        local_.M * v.segment(Eigen::Index(j) * nb, nb);
  return masked_dot(u, mv, nb, mask);
}

double Evolution::form_K(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                         const std::vector<std::uint8_t>* mask) const {
  if (!mask) {
    Eigen::MatrixXd kv;
    apply_K(v, kv);
    return masked_dot(u, kv, block(), nullptr);
  }
  // Restricted stiffness form through the auxiliary gradient field: K factors
  // as B^T M^{-1} B with M q_j = (B u)_j = A0 u_j + Am1 u_{j-1}, so the
  // restricted form sums the gradient products (B u)_j^T M^{-1} (B v)_j over
  // the cells whose gradient stencil {j-1, j} is observed.  The gradients are
  // taken from the whole fields, so no artificial jump appears at the region
  // boundary; requiring the full stencil keeps the energy's negative dt^2
  // correction dominated by the observed mass term under the CFL condition,
  // which makes the restricted energy nonnegative step by step.
  const int nb = block();
  const int J = int(mask->size());
  Eigen::MatrixXd bu, bv;
  apply_flux(u, bu);
  apply_flux(v, bv);
  double acc = 0.0;
  for (int j = 0; j < J; ++j)
    if ((*mask)[j] && (*mask)[(j + J - 1) % J])
      acc += bu.col(0)
                 .segment(Eigen::Index(j) * nb, nb)
                 .dot(Minv_ * bv.col(0).segment(Eigen::Index(j) * nb, nb));
  return acc;
}

double Evolution::energy(const StatePair& s,
                         const std::vector<std::uint8_t>* mask) const {
  const Eigen::VectorXd d = (s.u1 - s.u0) / dt();
  return 0.5 * form_M(d, d, mask) + 0.25 * form_K(s.u1, s.u1, mask) +
         0.25 * form_K(s.u0, s.u0, mask) -
         0.25 * dt() * dt() * form_K(d, d, mask);
}

RunResult run(const Evolution& ev, StatePair init, const RunOptions& opt) {
  if (init.u0.size() != ev.dofs() || init.u1.size() != ev.dofs())
    throw ParamError("state size does not match the mesh");
  if (opt.stride < 1) throw ParamError("stride must be positive");
  const double dt = ev.dt();
  const int N = int(std::llround(opt.T / dt));
  if (N < 1) throw ParamError("final time shorter than one time step");

  if (opt.check_cfl) {
    const CflReport c = cfl_margin(ev.local(), ev.local().params.lambda, 257);
    if (c.margin > 1.0 + 1e-12) {
      std::ostringstream os;
      os << "CFL violation: margin " << c.margin << ", largest stable lambda "
         << c.lambda_max;
      throw CflError(os.str());
    }
  }

  RunResult out;
  out.steps = N;
  StatePair s = std::move(init);
  for (int n = 0; n < N; ++n) {
    const double e = ev.energy(s);
    const double eo = opt.observed ? ev.energy(s, opt.observed) : e;
    if (n == 0) out.e0 = e;
    out.obs_integral += dt * eo;
    if (n % opt.stride == 0)
      out.series.push_back({n, n * dt, e, eo});
    if (n + 1 < N) {
      ev.step(s);
      if ((n & 63) == 0 && !s.u1.allFinite()) {
        std::ostringstream os;
        os << "state became non-finite at step " << n + 1;
        throw NumericalError(os.str());
      }
    }
  }
  if (!s.u1.allFinite() || !s.u0.allFinite())
    throw NumericalError("state became non-finite during the run");
  out.final = std::move(s);
  return out;
}

}  // namespace wavegate
