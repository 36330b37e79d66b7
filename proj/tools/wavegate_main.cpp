#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "wavegate/evolve.hpp"
#include "wavegate/gramian.hpp"
#include "wavegate/io.hpp"
#include "wavegate/local_matrices.hpp"
#include "wavegate/mesh.hpp"
#include "wavegate/packets.hpp"
#include "wavegate/spectral.hpp"

namespace wg = wavegate;

namespace {

std::uint64_t resolve_seed(std::uint64_t flag_seed) {
  const char* env = std::getenv("WAVEGATE_SEED");
  if (!env) return flag_seed;
  char* end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0')
    throw wg::ParamError("WAVEGATE_SEED must be a plain unsigned integer");
  return v;
}

struct DomainFlags {
  double x_lo = -6.0;
  double x_hi = 6.0;
  double hide_lo = -1.0;
  double hide_hi = 1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--x-lo", x_lo, "left end of the periodic domain");
    cmd->add_option("--x-hi", x_hi, "right end of the periodic domain");
    cmd->add_option("--hide-lo", hide_lo, "left end of the hidden interval");
    cmd->add_option("--hide-hi", hide_hi, "right end of the hidden interval");
  }

  wg::ObservationRegion region() const { return {hide_lo, hide_hi}; }

  void stamp(wg::Provenance& p) const {
    p.add("x_lo", x_lo);
    p.add("x_hi", x_hi);
    p.add("hide_lo", hide_lo);
    p.add("hide_hi", hide_hi);
  }
};

struct PacketFlags {
  double gamma = 0.8;
  double s = 1.5;
  double mu = 1.0;
  double x_c = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma,
                    "frequency-window scaling exponent in (0,1)");
    cmd->add_option("--s", s, "window regularity index (> 1)");
    cmd->add_option("--mu", mu, "window placement factor");
    cmd->add_option("--x-c", x_c, "packet center");
  }

  wg::PacketSpec spec() const {
    wg::PacketSpec sp;
    sp.gamma = gamma;
    sp.s = s;
    sp.mu = mu;
    sp.x_c = x_c;
    return sp;
  }

  void stamp(wg::Provenance& p) const {
    p.add("gamma", gamma);
    p.add("s", s);
    p.add("mu", mu);
    p.add("x_c", x_c);
  }
};

void require_stable(const wg::LocalMatrices& lm, double lambda) {
  wg::CflReport rep = wg::cfl_margin(lm, lambda, 1025);
  if (rep.margin > 1.0 + 1e-12)
    throw wg::CflError("CFL violation: lambda = " + wg::fmt17(lambda) +
                       " exceeds the largest stable lambda = " +
                       wg::fmt17(rep.lambda_max));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete wave-equation laboratory: dispersion tables, packet "
               "trapping runs, and observability constants for the P^k "
               "alternating-flux DG scheme with leapfrog time stepping."};
  app.require_subcommand(1);
  app.fallthrough();
  // The mesh-width flag is spelled --h, so the help flag must not claim the
  // single-character name.  Subcommands inherit this through the parent.
  app.set_help_flag("--help", "print this help message and exit");

  std::uint64_t seed = 0;
  int jobs = 1;
  app.add_option("--seed", seed,
                 "seed for all randomness (env WAVEGATE_SEED overrides)");
  app.add_option("--jobs", jobs, "worker threads for column propagation");

  // ---- assemble -----------------------------------------------------------
  auto* cmd_as = app.add_subcommand(
      "assemble", "emit the local mass and stiffness blocks as JSON");
  int as_k = 1;
  double as_h = 1.0;
  std::string as_out = "matrices.json";
  cmd_as->add_option("--k", as_k, "polynomial degree (0..8)")->required();
  cmd_as->add_option("--h", as_h, "cell width")->required();
  cmd_as->add_option("--out", as_out, "output path");
  cmd_as->callback([&] {
    wg::SchemeParams p;
    p.k = as_k;
    p.h = as_h;
    wg::LocalMatrices lm = wg::assemble(p);
    wg::Provenance prov;
    prov.tool = "assemble";
    prov.seed = resolve_seed(seed);
    prov.add("k", (long long)as_k);
    prov.add("h", as_h);
    wg::write_matrices_json(as_out, lm, prov);
  });

  // ---- dispersion ---------------------------------------------------------
  auto* cmd_di = app.add_subcommand(
      "dispersion", "tabulate eigenvalue branches, frequencies, and group "
                    "velocities over the mesh frequency band");
  int di_k = 1;
  double di_h = 1.0;
  double di_lambda = 0.1;
  int di_samples = 0;
  std::string di_out = "dispersion.csv";
  cmd_di->add_option("--k", di_k, "polynomial degree (0..8)")->required();
  cmd_di->add_option("--h", di_h, "cell width")->required();
  cmd_di->add_option("--lambda", di_lambda, "Courant ratio dt/h")->required();
  cmd_di->add_option("--samples", di_samples,
                     "odd uniform sample count (0 = refined default grid)");
  cmd_di->add_option("--out", di_out, "output path");
  cmd_di->callback([&] {
    wg::SchemeParams p;
    p.k = di_k;
    p.h = di_h;
    p.lambda = di_lambda;
    wg::LocalMatrices lm = wg::assemble(p);
    require_stable(lm, p.lambda);
    std::vector<double> grid = di_samples > 0 ? wg::uniform_grid(di_h, di_samples)
                                              : wg::default_grid(di_h);
    wg::DispersionTable table = wg::eig_branches(lm, grid);
    wg::Provenance prov;
    prov.tool = "dispersion";
    prov.seed = resolve_seed(seed);
    prov.add("k", (long long)di_k);
    prov.add("h", di_h);
    prov.add("lambda", di_lambda);
    prov.add("samples", (long long)di_samples);
    wg::write_dispersion_csv(di_out, table, prov);
  });

  // ---- simulate -----------------------------------------------------------
  auto* cmd_si = app.add_subcommand(
      "simulate", "run the leapfrog scheme and emit the energy time series");
  int si_k = 1;
  double si_h = 0.1;
  double si_lambda = 0.1;
  double si_T = 2.5;
  int si_stride = 1;
  std::string si_init = "packet";
  std::string si_out = "energy.csv";
  DomainFlags si_dom;
  PacketFlags si_pkt;
  cmd_si->add_option("--k", si_k, "polynomial degree (0..8)")->required();
  cmd_si->add_option("--h", si_h, "cell width")->required();
  cmd_si->add_option("--lambda", si_lambda, "Courant ratio dt/h")->required();
  cmd_si->add_option("--T", si_T, "final time");
  cmd_si->add_option("--stride", si_stride, "output every stride-th step");
  cmd_si->add_option("--init", si_init, "initial data: packet | random");
  cmd_si->add_option("--out", si_out, "output path");
  si_dom.attach(cmd_si);
  si_pkt.attach(cmd_si);
  cmd_si->callback([&] {
    std::uint64_t run_seed = resolve_seed(seed);
    wg::SchemeParams p;
    p.k = si_k;
    p.h = si_h;
    p.lambda = si_lambda;
    wg::PeriodicMesh mesh = wg::make_mesh_from_h(si_dom.x_lo, si_dom.x_hi, si_h);
    std::vector<std::uint8_t> mask = wg::observed_cells(mesh, si_dom.region());
    wg::LocalMatrices lm = wg::assemble(p);
    wg::Evolution ev(lm, mesh);
    wg::StatePair init;
    if (si_init == "random") {
      std::mt19937_64 rng(run_seed);
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      init.u0.resize(ev.dofs());
      init.u1.resize(ev.dofs());
      for (Eigen::Index i = 0; i < init.u0.size(); ++i) init.u0[i] = dist(rng);
      for (Eigen::Index i = 0; i < init.u1.size(); ++i) init.u1[i] = dist(rng);
    } else if (si_init == "packet") {
      wg::DispersionTable table =
          wg::eig_branches(lm, wg::mesh_frequencies(mesh));
      init = wg::build_packet(ev, table, si_pkt.spec()).state;
    } else {
      throw wg::ParamError("--init must be 'packet' or 'random'");
    }
    wg::RunOptions opt;
    opt.T = si_T;
    opt.stride = si_stride;
    opt.observed = &mask;
    wg::RunResult rr = wg::run(ev, std::move(init), opt);
    wg::Provenance prov;
    prov.tool = "simulate";
    prov.seed = run_seed;
    prov.add("k", (long long)si_k);
    prov.add("h", si_h);
    prov.add("lambda", si_lambda);
    prov.add("T", si_T);
    prov.add("stride", (long long)si_stride);
    prov.add("init", si_init);
    si_dom.stamp(prov);
    if (si_init == "packet") si_pkt.stamp(prov);
    prov.add("steps", (long long)rr.steps);
    wg::write_energy_csv(si_out, rr, prov);
  });

  // ---- trap ---------------------------------------------------------------
  auto* cmd_tr = app.add_subcommand(
      "trap", "near-boundary wave packets: observed-energy fraction per h");
  int tr_k = 1;
  double tr_lambda = 0.3;
  double tr_T = 2.5;
  std::vector<double> tr_h;
  std::string tr_out = "trap.csv";
  DomainFlags tr_dom;
  PacketFlags tr_pkt;
  cmd_tr->add_option("--k", tr_k, "polynomial degree (0..8)")->required();
  cmd_tr->add_option("--lambda", tr_lambda, "Courant ratio dt/h");
  cmd_tr->add_option("--T", tr_T, "final time");
  cmd_tr->add_option("--h", tr_h, "cell widths (default 0.2 0.1 0.05 0.025)")
      ->expected(-1);
  cmd_tr->add_option("--out", tr_out, "output path");
  tr_dom.attach(cmd_tr);
  tr_pkt.attach(cmd_tr);
  cmd_tr->callback([&] {
    if (tr_h.empty()) tr_h = {0.2, 0.1, 0.05, 0.025};
    std::vector<wg::TrapResult> rows;
    for (double h : tr_h) {
      wg::SchemeParams p;
      p.k = tr_k;
      p.h = h;
      p.lambda = tr_lambda;
      wg::PeriodicMesh mesh = wg::make_mesh_from_h(tr_dom.x_lo, tr_dom.x_hi, h);
      rows.push_back(
          wg::trap_experiment(p, mesh, tr_dom.region(), tr_pkt.spec(), tr_T));
    }
    wg::Provenance prov;
    prov.tool = "trap";
    prov.seed = resolve_seed(seed);
    prov.add("k", (long long)tr_k);
    prov.add("lambda", tr_lambda);
    prov.add("T", tr_T);
    tr_dom.stamp(prov);
    tr_pkt.stamp(prov);
    wg::write_trap_csv(tr_out, rows, prov);
  });

  // ---- gramian ------------------------------------------------------------
  auto* cmd_gr = app.add_subcommand(
      "gramian", "observability constants over an h sweep, optionally on a "
                 "spectrally filtered subspace");
  int gr_k = 1;
  double gr_lambda = 0.1;
  double gr_T = 2.5;
  std::vector<double> gr_h;
  double gr_delta = -1.0;
  bool gr_physical = false;
  bool gr_slave = false;
  bool gr_sweep = false;
  std::vector<double> gr_gamma_r;
  std::string gr_out = "ct.csv";
  DomainFlags gr_dom;
  cmd_gr->add_option("--k", gr_k, "polynomial degree (0..8)")->required();
  cmd_gr->add_option("--lambda", gr_lambda, "Courant ratio dt/h")->required();
  cmd_gr->add_option("--T", gr_T, "observation time");
  cmd_gr->add_option("--h", gr_h,
                     "cell widths (default 1 0.5 0.25 0.125 0.0625)")
      ->expected(-1);
  auto* od = cmd_gr->add_option("--filter-delta", gr_delta,
                                "drop frequencies above (1-delta) pi/h");
  cmd_gr->add_flag("--physical-only", gr_physical,
                   "restrict the filtered space to the physical branch");
  cmd_gr->add_flag("--slave-pair", gr_slave,
                   "tie the second slot to the first by the phase advance");
  auto* os = cmd_gr->add_flag("--filter-gamma-sweep", gr_sweep,
                              "one filtered row per retention gamma_r");
  cmd_gr->add_option("--gamma-r", gr_gamma_r,
                     "retention fractions for the sweep (default 0.1..0.9)")
      ->expected(-1);
  cmd_gr->add_option("--out", gr_out, "output path");
  od->excludes(os);
  gr_dom.attach(cmd_gr);
  cmd_gr->callback([&] {
    if (gr_h.empty()) gr_h = {1.0, 0.5, 0.25, 0.125, 0.0625};
    if (gr_gamma_r.empty())
      gr_gamma_r = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<wg::CtRow> rows;
    for (double h : gr_h) {
      wg::SchemeParams p;
      p.k = gr_k;
      p.h = h;
      p.lambda = gr_lambda;
      wg::PeriodicMesh mesh = wg::make_mesh_from_h(gr_dom.x_lo, gr_dom.x_hi, h);
      wg::LocalMatrices lm = wg::assemble(p);
      wg::Evolution ev(lm, mesh);
      wg::QuadraticPencil pencil =
          wg::build_pencil(ev, gr_dom.region(), gr_T, jobs);
      wg::CtRow row;
      row.k = gr_k;
      row.lambda = gr_lambda;
      row.T = pencil.T;
      row.h = h;
      row.J = pencil.J;
      row.N = pencil.N;
      if (gr_sweep || od->count() > 0) {
        wg::DispersionTable table =
            wg::eig_branches(lm, wg::mesh_frequencies(mesh));
        std::vector<double> deltas;
        if (gr_sweep)
          for (double g : gr_gamma_r) deltas.push_back(1.0 - g);
        else
          deltas.push_back(gr_delta);
        for (double d : deltas) {
          wg::FilterSpec fs;
          fs.delta = d;
          fs.physical_only = gr_physical;
          fs.slave_pair = gr_slave;
          wg::FilteredResult fr =
              wg::filtered_constant(pencil, ev, table, fs);
          row.delta = d;
          row.physical_only = gr_physical ? 1 : 0;
          row.ct = fr.ct;
          row.mu_min = fr.mu_min;
          row.deflated_dim = fr.deflated;
          rows.push_back(row);
        }
      } else {
        wg::ObservabilityResult r = wg::observability_constant(pencil);
        row.delta = -1.0;
        row.physical_only = 0;
        row.ct = r.ct;
        row.mu_min = r.mu_min;
        row.deflated_dim = r.deflated;
        rows.push_back(row);
      }
    }
    wg::Provenance prov;
    prov.tool = "gramian";
    prov.seed = resolve_seed(seed);
    prov.add("k", (long long)gr_k);
    prov.add("lambda", gr_lambda);
    prov.add("T", gr_T);
    prov.add("jobs", (long long)jobs);
    if (od->count() > 0) prov.add("filter_delta", gr_delta);
    if (gr_sweep) prov.add("filter_gamma_sweep", std::string("yes"));
    prov.add("physical_only", (long long)(gr_physical ? 1 : 0));
    prov.add("slave_pair", (long long)(gr_slave ? 1 : 0));
    gr_dom.stamp(prov);
    wg::write_ct_csv(gr_out, rows, prov);
  });

  // ---- fit-rate -----------------------------------------------------------
  auto* cmd_fi = app.add_subcommand(
      "fit-rate", "least-squares fit of ln C_T against 1/h from a ct.csv");
  std::string fi_in = "ct.csv";
  std::string fi_out = "rate.json";
  int fi_k = -1;
  double fi_lambda = std::numeric_limits<double>::quiet_NaN();
  cmd_fi->add_option("--in", fi_in, "input ct.csv")->required();
  cmd_fi->add_option("--out", fi_out, "output path");
  cmd_fi->add_option("--k", fi_k, "keep only rows with this degree");
  cmd_fi->add_option("--lambda", fi_lambda, "keep only rows with this lambda");
  cmd_fi->callback([&] {
    std::vector<wg::CtRow> rows = wg::read_ct_csv(fi_in);
    std::vector<double> hs, cts;
    for (const wg::CtRow& r : rows) {
      if (fi_k >= 0 && r.k != fi_k) continue;
      if (fi_lambda == fi_lambda &&
          std::abs(r.lambda - fi_lambda) > 1e-12 * std::abs(fi_lambda))
        continue;
      hs.push_back(r.h);
      cts.push_back(r.ct);
    }
    wg::RateFit fit = wg::fit_rate(hs, cts);
    wg::Provenance prov;
    prov.tool = "fit-rate";
    prov.seed = resolve_seed(seed);
    prov.add("in", fi_in);
    if (fi_k >= 0) prov.add("k", (long long)fi_k);
    if (fi_lambda == fi_lambda) prov.add("lambda", fi_lambda);
    wg::write_rate_json(fi_out, fit, prov);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const wg::ParamError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const wg::CflError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const wg::NumericalError& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 4;
  }
  return 0;
}
