// Acceptance gate: one line per criterion, exit 0 only if every criterion
// holds.  WAVEGATE_ACCEPT_TIER=smoke (or --smoke) shortens the growth-rate
// sweep to meshes no finer than h = 0.125.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wavegate/evolve.hpp"
#include "wavegate/gramian.hpp"
#include "wavegate/io.hpp"
#include "wavegate/local_matrices.hpp"
#include "wavegate/mesh.hpp"
#include "wavegate/packets.hpp"
#include "wavegate/spectral.hpp"

using namespace wavegate;

namespace {

bool g_all_ok = true;

std::string g3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) g_all_ok = false;
}

void run_criterion(int id, const char* name,
                   const std::function<std::pair<bool, std::string>()>& fn) {
  try {
    const auto [ok, detail] = fn();
    report(id, name, ok, detail);
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

double lambda_max_for(int k) {
  return cfl_margin(assemble({k, 1.0, 0.1}), 0.1, 1025).lambda_max;
}

struct LsqFit {
  double slope;
  double intercept;
  double r2;
};

LsqFit least_squares(const std::vector<double>& x,
                     const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / double(n), my = sy / double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LsqFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

// ---- 1: long-run energy conservation --------------------------------------

std::pair<bool, std::string> criterion_energy() {
  double worst = 0;
  for (int k : {0, 1, 2}) {
    const int J = 64;
    const PeriodicMesh mesh = make_mesh(-6.0, 6.0, J);
    SchemeParams p;
    p.k = k;
    p.h = mesh.h();
    p.lambda = 0.9 * lambda_max_for(k);
    const Evolution ev(assemble(p), mesh);
    StatePair s;
    s.u0 = random_vector(ev.dofs(), 1000 + std::uint64_t(k));
    s.u1 = random_vector(ev.dofs(), 2000 + std::uint64_t(k));
    RunOptions opt;
    opt.T = 1000 * ev.dt();
    const RunResult rr = run(ev, s, opt);
    for (const RunSample& smp : rr.series)
      worst = std::max(worst, std::abs(smp.e_total - rr.e0) / rr.e0);
  }
  return {worst <= 1e-10, "max relative drift " + g3(worst) +
                              " over 1000 steps (k=0,1,2, J=64), tol 1e-10"};
}

// ---- 2: closed-form eigenvalue for constant elements -----------------------

std::pair<bool, std::string> criterion_closed_form() {
  const double h = 1.0;
  const LocalMatrices lm = assemble({0, h, 0.5});
  const DispersionTable t = eig_branches(lm, uniform_grid(h, 513));
  double err = 0;
  for (int i = 0; i < t.points(); ++i) {
    const double s = std::sin(t.xi[size_t(i)] * h / 2.0);
    const double ref = 4.0 / (h * h) * s * s;
    const double diff = std::abs(t.sigma(0, i) - ref);
    // Pointwise relative error; at xi = 0 both sides are exactly zero, so
    // fall back to an absolute comparison there.
    err = std::max(err, ref > 0.0 ? diff / ref : diff);
  }
  return {err <= 1e-12,
          "max pointwise relative deviation from (4/h^2) sin^2(xi h/2) "
          "over 513 points = " +
              g3(err) + ", tol 1e-12"};
}

// ---- 3: eigenvalue structure at the origin ---------------------------------

std::pair<bool, std::string> criterion_origin_structure() {
  bool ok = true;
  std::ostringstream os;
  for (int k : {0, 1, 2}) {
    const double h = 1.0;
    const LocalMatrices lm = assemble({k, h, 0.1});
    const Eigen::MatrixXd S0 = (lm.K0 + lm.Km1 + lm.Kp1).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S0, lm.M);
    const Eigen::VectorXd ev = es.eigenvalues();
    ok = ok && std::abs(ev[0]) <= 1e-10 / (h * h);
    for (int i = 1; i <= k; ++i) ok = ok && ev[i] > 0.0;
    const double curv = physical_curvature_at_zero(lm, 0.02);
    ok = ok && std::abs(curv - 2.0) <= 1e-3;
    os << "k=" << k << ": sigma(0)=" << g3(ev[0]) << " curv=" << g3(curv)
       << "  ";
    if (k == 1) {
      const double sp = ev[1] * h * h;
      ok = ok && std::abs(sp - 36.0) <= 1e-8;
      os << "spurious(0)h^2=" << fmt17(sp) << "  ";
    }
  }
  return {ok, os.str() + "(want sigma(0)<=1e-10, curv=2+-1e-3, 36+-1e-8)"};
}

// ---- 4: group-velocity limits ----------------------------------------------

std::pair<bool, std::string> criterion_group_velocity() {
  bool ok = true;
  std::ostringstream os;
  const std::pair<int, double> cases[] = {{0, 0.8}, {1, 0.3}, {2, 0.12}};
  double worst_origin = 0, worst_edge = 0, worst_sp = 0;
  for (const auto& [k, lambda] : cases) {
    const double h = 1.0;
    const LocalMatrices lm = assemble({k, h, lambda});
    const DispersionTable t = eig_branches(lm, default_grid(h));
    const int n = t.points();
    const int i0 = t.index_of(0.0);
    const double v0 = t.vg(t.physical, i0);
    worst_origin = std::max(worst_origin, std::abs(v0 - 1.0));
    ok = ok && std::abs(v0 - 1.0) <= 1e-6;
    for (int i : {n - 1, n - 2}) {
      const double ve = std::abs(t.vg(t.physical, i));
      worst_edge = std::max(worst_edge, ve);
      ok = ok && ve <= 1e-3;
    }
    const double dt = lm.params.dt();
    for (int b = 0; b < t.branches(); ++b) {
      if (b == t.physical) continue;
      const double gap = std::abs(t.sigma(b, n - 1) * dt * dt - 4.0);
      if (gap <= 1e-6) continue;  // omega at the temporal Nyquist frequency
      const double v = std::abs(t.vg(b, n - 1));
      worst_sp = std::max(worst_sp, v);
      ok = ok && v <= 1e-3;
    }
  }
  {
    const LocalMatrices lm = assemble({0, 1.0, 1.0});
    const DispersionTable t = eig_branches(lm, default_grid(1.0));
    const double ve = t.vg(0, t.points() - 1);
    ok = ok && std::abs(ve - 1.0) <= 1e-6;
    os << "critical k=0 edge vg=" << fmt17(ve) << "; ";
  }
  os << "worst |vg(0)-1|=" << g3(worst_origin) << ", edge |vg|="
     << g3(worst_edge) << ", spurious edge |vg|=" << g3(worst_sp);
  return {ok, os.str()};
}

// ---- 5: eigenvalue derivative against finite differences -------------------

std::pair<bool, std::string> criterion_derivative() {
  double worst = 0;
  for (const auto& [k, lambda] :
       std::vector<std::pair<int, double>>{{1, 0.3}, {2, 0.12}}) {
    const double h = 1.0;
    const LocalMatrices lm = assemble({k, h, lambda});
    const DispersionTable t = eig_branches(lm, uniform_grid(h, 2001));
    const int n = t.points();
    const double d = t.xi[1] - t.xi[0];
    const double sigma_max = t.sigma.maxCoeff();
    const double gap_tol = 0.02 * sigma_max;
    double scale = 0;
    for (int b = 0; b < t.branches(); ++b)
      scale = std::max(scale, t.dsigma.row(b).cwiseAbs().maxCoeff());
    for (int b = 0; b < t.branches(); ++b)
      for (int i = 2; i < n - 2; ++i) {
        double gap = 1e300;
        for (int c = 0; c < t.branches(); ++c)
          if (c != b) gap = std::min(gap, std::abs(t.sigma(c, i) - t.sigma(b, i)));
        if (gap < gap_tol) continue;
        const double fd = (-t.sigma(b, i + 2) + 8 * t.sigma(b, i + 1) -
                           8 * t.sigma(b, i - 1) + t.sigma(b, i - 2)) /
                          (12 * d);
        worst = std::max(worst, std::abs(t.dsigma(b, i) - fd) / scale);
      }
  }
  return {worst <= 1e-6,
          "max |analytic - finite difference| / max|d sigma| = " + g3(worst) +
              ", tol 1e-6 (away from near-crossings)"};
}

// ---- 6: quadratic forms against trajectory runs ----------------------------

std::pair<bool, std::string> criterion_pencil_oracle() {
  bool ok = true;
  double worst_g = 0, worst_a = 0;
  const std::tuple<int, int, double> cases[] = {{0, 32, 0.3}, {1, 24, 0.2}};
  for (const auto& [k, J, lambda] : cases) {
    const PeriodicMesh mesh = make_mesh(-6.0, 6.0, J);
    SchemeParams p;
    p.k = k;
    p.h = mesh.h();
    p.lambda = lambda;
    const Evolution ev(assemble(p), mesh);
    const ObservationRegion region{};
    const QuadraticPencil pencil = build_pencil(ev, region, 2.5, 1);
    const auto mask = observed_cells(mesh, region);
    const Eigen::Index s = ev.dofs();
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd x =
          random_vector(2 * s, 777 + std::uint64_t(17 * trial + k));
      StatePair init;
      init.u0 = x.head(s);
      init.u1 = x.tail(s);
      RunOptions opt;
      opt.T = 2.5;
      opt.observed = &mask;
      opt.stride = 1 << 20;
      const RunResult rr = run(ev, init, opt);
      const double qg = x.dot(pencil.G * x);
      const double qa = x.dot(pencil.A * x);
      const double eg = std::abs(qg - rr.obs_integral) / rr.obs_integral;
      const double ea = std::abs(qa - rr.e0) / rr.e0;
      worst_g = std::max(worst_g, eg);
      worst_a = std::max(worst_a, ea);
      ok = ok && eg <= 1e-10 && ea <= 1e-12;
    }
  }
  return {ok, "10 random states x 2 configs: max G mismatch " + g3(worst_g) +
                  " (tol 1e-10), max A mismatch " + g3(worst_a) +
                  " (tol 1e-12)"};
}

// ---- 7: exponential growth rates of the observability constant -------------

std::pair<bool, std::string> criterion_growth_rates(bool smoke) {
  struct Config {
    int k;
    double lambda;
    double expected;
  };
  const Config configs[] = {{0, 0.3, 1.40}, {0, 0.9, 0.67}, {1, 0.1, 1.50},
                            {1, 0.3, 0.60}, {2, 0.05, 2.20}, {2, 0.15, 0.95}};
  std::vector<double> hs = {1.0, 0.5, 0.25, 0.125};
  if (!smoke) hs.push_back(0.0625);
  bool ok = true;
  std::ostringstream os;
  for (const Config& c : configs) {
    std::vector<double> used_h, cts;
    int skipped = 0;
    for (double h : hs) {
      const PeriodicMesh mesh = make_mesh_from_h(-6.0, 6.0, h);
      SchemeParams p;
      p.k = c.k;
      p.h = h;
      p.lambda = c.lambda;
      const Evolution ev(assemble(p), mesh);
      const QuadraticPencil pencil = build_pencil(ev, {}, 2.5, 1);
      try {
        cts.push_back(observability_constant(pencil).ct);
        used_h.push_back(h);
      } catch (const NumericalError&) {
        // The constant can genuinely exceed what double precision can
        // represent in the accumulated form (the smallest pencil eigenvalue
        // falls below the assembly rounding floor); drop that grid point and
        // say so rather than fit noise.
        ++skipped;
      }
    }
    bool this_ok = used_h.size() >= 4;
    if (this_ok) {
      const RateFit fit = fit_rate(used_h, cts);
      const double rel = std::abs(fit.r - c.expected) / c.expected;
      this_ok = rel <= 0.20;
      os << "(k=" << c.k << ",l=" << c.lambda << ") r=" << g3(fit.r) << "/"
         << c.expected;
    } else {
      os << "(k=" << c.k << ",l=" << c.lambda << ") TOO FEW POINTS";
    }
    if (skipped > 0) os << " [" << skipped << " pt below eps floor]";
    os << " ";
    ok = ok && this_ok;
  }
  os << (smoke ? "[4-point fits, smoke tier]" : "[5-point fits]")
     << ", tol +-20%";
  return {ok, os.str()};
}

// ---- 8: bounded constant at the critical ratio -----------------------------

std::pair<bool, std::string> criterion_critical_case() {
  std::vector<double> cts;
  for (double h : {0.1, 0.05, 0.025}) {
    const PeriodicMesh mesh = make_mesh_from_h(-6.0, 6.0, h);
    SchemeParams p;
    p.k = 0;
    p.h = h;
    p.lambda = 1.0;
    const Evolution ev(assemble(p), mesh);
    const QuadraticPencil pencil = build_pencil(ev, {}, 2.5, 1);
    cts.push_back(observability_constant(pencil).ct);
  }
  double lo = cts[0], hi = cts[0];
  for (double c : cts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  const bool ok = hi / lo <= 1.25 && hi <= 2.0 * 1.5 && lo >= 2.0 / 1.5;
  std::ostringstream os;
  os << "C_T = {" << g3(cts[0]) << ", " << g3(cts[1]) << ", " << g3(cts[2])
     << "}, spread " << g3(hi / lo)
     << " (tol 1.25), reference 2.0 within factor 1.5";
  return {ok, os.str()};
}

// ---- 9: spectral filtering restores boundedness -----------------------------

std::pair<bool, std::string> criterion_filtered_recovery() {
  std::vector<double> filtered, unfiltered;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    const PeriodicMesh mesh = make_mesh_from_h(-6.0, 6.0, h);
    SchemeParams p;
    p.k = 1;
    p.h = h;
    p.lambda = 0.2;
    const LocalMatrices lm = assemble(p);
    const Evolution ev(lm, mesh);
    const QuadraticPencil pencil = build_pencil(ev, {}, 2.5, 1);
    unfiltered.push_back(observability_constant(pencil).ct);
    const DispersionTable table = eig_branches(lm, mesh_frequencies(mesh));
    FilterSpec fs;
    fs.delta = 0.1;
    fs.physical_only = true;
    filtered.push_back(filtered_constant(pencil, ev, table, fs).ct);
  }
  double lo = filtered[0], hi = filtered[0];
  for (double c : filtered) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  const double growth = unfiltered.back() / unfiltered.front();
  const bool ok = hi / lo <= 3.0 && growth >= 1e3;
  std::ostringstream os;
  os << "filtered spread " << g3(hi / lo) << " (tol 3), unfiltered growth "
     << g3(growth) << " (want >= 1e3)";
  return {ok, os.str()};
}

// ---- 10: retention sweep orders the two degrees ----------------------------

std::pair<bool, std::string> criterion_retention_sweep() {
  const std::vector<double> gammas = {0.1, 0.2, 0.3, 0.4, 0.5,
                                      0.6, 0.7, 0.8, 0.9};
  std::vector<std::vector<double>> ct(2);
  for (int k : {0, 1}) {
    const double h = 0.1;
    const PeriodicMesh mesh = make_mesh_from_h(-6.0, 6.0, h);
    SchemeParams p;
    p.k = k;
    p.h = h;
    p.lambda = 0.2;
    const LocalMatrices lm = assemble(p);
    const Evolution ev(lm, mesh);
    const QuadraticPencil pencil = build_pencil(ev, {}, 2.4, 1);
    const DispersionTable table = eig_branches(lm, mesh_frequencies(mesh));
    for (double g : gammas) {
      FilterSpec fs;
      fs.delta = 1.0 - g;
      fs.physical_only = true;
      ct[size_t(k)].push_back(filtered_constant(pencil, ev, table, fs).ct);
    }
  }
  bool monotone = true;
  for (int k : {0, 1})
    for (size_t i = 1; i < gammas.size(); ++i)
      monotone = monotone &&
                 ct[size_t(k)][i] >= ct[size_t(k)][i - 1] * (1.0 - 1e-9);
  const size_t i07 = 6;  // gamma_r = 0.7
  const double ratio = ct[0][i07] / ct[1][i07];
  const bool ok = monotone && ratio >= 10.0;
  std::ostringstream os;
  os << (monotone ? "both degrees monotone in retention"
                  : "MONOTONICITY VIOLATED")
     << "; P0/P1 at 0.7 = " << g3(ratio) << " (want >= 10)";
  return {ok, os.str()};
}

// ---- 11: packet trapping decay ----------------------------------------------

std::pair<bool, std::string> criterion_trapping() {
  const std::vector<double> hs = {0.2, 0.1, 0.05, 0.025};
  PacketSpec spec;
  spec.gamma = 0.8;
  spec.s = 1.5;
  spec.mu = 1.0;
  spec.x_c = 0.0;
  std::vector<double> e0s, obs;
  for (double h : hs) {
    const PeriodicMesh mesh = make_mesh_from_h(-6.0, 6.0, h);
    SchemeParams p;
    p.k = 1;
    p.h = h;
    p.lambda = 0.3;
    const TrapResult r = trap_experiment(p, mesh, {}, spec, 2.5);
    e0s.push_back(r.e0);
    obs.push_back(r.obs_integral);
  }
  double lo = e0s[0], hi = e0s[0];
  for (double e : e0s) {
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  bool decreasing = true;
  for (size_t i = 1; i < obs.size(); ++i)
    decreasing = decreasing && obs[i] < obs[i - 1];
  std::vector<double> x, y;
  for (size_t i = 0; i < hs.size(); ++i) {
    x.push_back(std::pow(hs[i], -spec.gamma / spec.s));
    y.push_back(std::log(obs[i]));
  }
  const LsqFit fit = least_squares(x, y);
  const bool ok =
      hi / lo <= 4.0 && decreasing && fit.slope < 0.0 && fit.r2 >= 0.9;
  std::ostringstream os;
  os << "E0 spread " << g3(hi / lo) << " (tol 4), observed integral "
     << (decreasing ? "strictly decreasing" : "NOT DECREASING")
     << ", ln(obs) vs h^(-gamma/s): slope " << g3(fit.slope) << ", R^2 "
     << g3(fit.r2) << " (want >= 0.9)";
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  bool smoke = false;
  const char* tier = std::getenv("WAVEGATE_ACCEPT_TIER");
  if (tier && std::strcmp(tier, "smoke") == 0) smoke = true;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--smoke") == 0) smoke = true;

  run_criterion(1, "long-run energy conservation", criterion_energy);
  run_criterion(2, "constant-element closed form", criterion_closed_form);
  run_criterion(3, "origin eigenvalue structure", criterion_origin_structure);
  run_criterion(4, "group-velocity limits", criterion_group_velocity);
  run_criterion(5, "eigenvalue derivative oracle", criterion_derivative);
  run_criterion(6, "pencil-trajectory equivalence", criterion_pencil_oracle);
  run_criterion(7, "observability growth rates",
                [&] { return criterion_growth_rates(smoke); });
  run_criterion(8, "critical-ratio boundedness", criterion_critical_case);
  run_criterion(9, "filtered recovery", criterion_filtered_recovery);
  run_criterion(10, "retention sweep ordering", criterion_retention_sweep);
  run_criterion(11, "packet trapping decay", criterion_trapping);

  std::printf("acceptance: %s\n", g_all_ok ? "all criteria passed"
                                           : "FAILURES PRESENT");
  return g_all_ok ? 0 : 1;
}
