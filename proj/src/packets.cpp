#include "wavegate/packets.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

namespace wavegate {

namespace {
using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;
}  // namespace

double gevrey_bump(double x, double s) {
  if (!(s > 1.0)) throw ParamError("bump regularity must satisfy s > 1");
  if (std::abs(x) >= 1.0) return 0.0;
  return std::exp(-std::pow(1.0 - x * x, -1.0 / (s - 1.0)));
}

double PacketSpec::rho(double h) const { return std::pow(h, -gamma); }

double PacketSpec::xi_c(double h) const {
  return kPi / h - (1.0 + mu) * rho(h);
}

Packet build_packet(const Evolution& ev, const DispersionTable& table,
                    const PacketSpec& spec) {
  const PeriodicMesh& mesh = ev.mesh();
  const double h = mesh.h();
  const double dt = ev.dt();
  const int J = mesh.J;
  const int nb = ev.block();

  if (!(spec.gamma > 0.0 && spec.gamma < 1.0))
    throw ParamError("window exponent gamma must lie in (0,1)");
  if (!(spec.mu > 0.0)) throw ParamError("gap factor mu must be positive");

  const double rho = spec.rho(h);
  const double xic = spec.xi_c(h);
  if (xic - rho <= 0.0 || xic + rho >= kPi / h) {
    std::ostringstream os;
    os << "frequency window [" << xic - rho << ", " << xic + rho
       << "] leaves (0, pi/h); h too coarse for gamma = " << spec.gamma;
    throw ParamError(os.str());
  }

  const double base = 2.0 * kPi / mesh.length();
  std::vector<int> modes;
  for (int m = -J / 2; m < J / 2; ++m)
    if (std::abs(base * m - xic) < rho) modes.push_back(m);
  if (modes.empty()) {
    const int need = 2 * int(std::ceil(kPi / (rho * h)));
    std::ostringstream os;
    os << "no mesh frequency falls in the packet window; need J >= " << need;
    throw ParamError(os.str());
  }

  const int ph = table.physical;
  const double amp_scale = std::pow(h, spec.gamma / 2.0);

  // spectral coefficients of both time levels on the retained modes
  Eigen::MatrixXcd c0(nb, Eigen::Index(modes.size()));
  Eigen::MatrixXcd c1(nb, Eigen::Index(modes.size()));
  for (size_t q = 0; q < modes.size(); ++q) {
    const double xm = base * modes[q];
    const int i = table.index_of(xm);
    const double sg = table.sigma(ph, i);
    const double om = table.omega(ph, i);
    if (!(sg > 0.0) || !std::isfinite(om))
      throw NumericalError("physical branch degenerate inside the window");
    const Eigen::VectorXcd& v = table.vec[ph][i];
    const double vMv =
        std::real((v.adjoint() * ev.local().M.cast<cd>() * v)(0));
    const double r = 1.0 / std::sqrt(sg * vMv / h);
    const double chi = gevrey_bump((xm - xic) / rho, spec.s);
    const cd phase = std::exp(cd(0.0, -xm * spec.x_c));
    c0.col(Eigen::Index(q)) = (r * amp_scale * chi) * phase * v;
    c1.col(Eigen::Index(q)) =
        std::exp(cd(0.0, -om * dt)) * c0.col(Eigen::Index(q));
  }

  // inverse transform: u_j = (1/(J h)) sum_m c_m e^{i xi_m x_j}, real part
  Packet out;
  out.modes = modes;
  out.state.u0 = Eigen::VectorXd::Zero(ev.dofs());
  out.state.u1 = Eigen::VectorXd::Zero(ev.dofs());
  const double inv = 1.0 / (J * h);
  for (int j = 0; j < J; ++j) {
    const double xj = mesh.center(j);
    Eigen::VectorXcd a0 = Eigen::VectorXcd::Zero(nb);
    Eigen::VectorXcd a1 = Eigen::VectorXcd::Zero(nb);
    for (size_t q = 0; q < modes.size(); ++q) {
      const cd e = std::exp(cd(0.0, base * modes[q] * xj));
      a0 += e * c0.col(Eigen::Index(q));
      a1 += e * c1.col(Eigen::Index(q));
    }
    out.state.u0.segment(Eigen::Index(j) * nb, nb) = inv * a0.real();
    out.state.u1.segment(Eigen::Index(j) * nb, nb) = inv * a1.real();
  }
  out.e0 = ev.energy(out.state);
  return out;
}

TrapResult trap_experiment(const SchemeParams& params, const PeriodicMesh& mesh,
                           const ObservationRegion& region,
                           const PacketSpec& spec, double T) {
  const LocalMatrices local = assemble(params);
  const Evolution ev(local, mesh);
  const DispersionTable table = eig_branches(local, mesh_frequencies(mesh));
  const Packet packet = build_packet(ev, table, spec);

  const std::vector<std::uint8_t> mask = observed_cells(mesh, region);
  RunOptions opt;
  opt.T = T;
  opt.observed = &mask;
  opt.stride = 1;
  const RunResult rr = run(ev, packet.state, opt);

  TrapResult out;
  out.h = mesh.h();
  out.J = mesh.J;
  out.N = rr.steps;
  out.e0 = packet.e0;
  out.obs_integral = rr.obs_integral;
  out.fraction = rr.obs_integral / (rr.steps * ev.dt() * packet.e0);
  out.ct_lower_bound = packet.e0 / rr.obs_integral;
  return out;
}

Eigen::VectorXcd dft_at(const Evolution& ev, const Eigen::VectorXd& u,
                        double xi) {
  const int nb = ev.block();
  const PeriodicMesh& mesh = ev.mesh();
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(nb);
  for (int j = 0; j < mesh.J; ++j) {
    const cd e = std::exp(cd(0.0, -xi * mesh.center(j)));
    acc += e * u.segment(Eigen::Index(j) * nb, nb).cast<cd>();
  }
  return mesh.h() * acc;
}

}  // namespace wavegate
