#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "support.hpp"
#include "wavegate/gramian.hpp"
#include "wavegate/mesh.hpp"

using namespace wavegate;
using wavegate::testing::random_vector;

namespace {

struct Lab {
  LocalMatrices lm;
  PeriodicMesh mesh;
  ObservationRegion region{-1.0, 1.0};
};

Lab make(int k, int J, double lambda) {
  PeriodicMesh mesh = make_mesh(-6.0, 6.0, J);
  SchemeParams p;
  p.k = k;
  p.h = mesh.h();
  p.lambda = lambda;
  return {assemble(p), mesh};
}

}  // namespace

TEST_CASE("pair form reproduces the stepped energy and the observed integral") {
  for (int k : {0, 1}) {
    const Lab lab = make(k, k == 0 ? 32 : 24, 0.2);
    const Evolution ev(lab.lm, lab.mesh);
    const double T = 2.5;
    const QuadraticPencil p = build_pencil(ev, lab.region, T);
    REQUIRE(p.N == int(std::llround(T / ev.dt())));

    const std::vector<std::uint8_t> mask =
        observed_cells(lab.mesh, lab.region);
    std::mt19937_64 rng(4242 + k);
    for (int trial = 0; trial < 10; ++trial) {
      StatePair s;
      s.u0 = random_vector(rng, ev.dofs());
      s.u1 = random_vector(rng, ev.dofs());
      Eigen::VectorXd x(2 * ev.dofs());
      x.head(ev.dofs()) = s.u0;
      x.tail(ev.dofs()) = s.u1;

      const double ea = x.dot(p.A * x);
      const double e0 = ev.energy(s);
      CHECK(std::abs(ea - e0) <= 1e-12 * std::abs(e0));

      RunOptions opt;
      opt.T = T;
      opt.observed = &mask;
      const RunResult rr = run(ev, s, opt);
      const double gq = x.dot(p.G * x);
      CHECK(std::abs(gq - rr.obs_integral) <= 1e-10 * rr.obs_integral);
    }
  }
}

TEST_CASE("full observation saturates the energy inequality") {
  const Lab lab = make(0, 24, 0.4);
  const Evolution ev(lab.lm, lab.mesh);
  const ObservationRegion everything{100.0, 101.0};  // hides nothing
  const double T = 2.0;
  const QuadraticPencil p = build_pencil(ev, everything, T);
  const ObservabilityResult r = observability_constant(p);
  CHECK(r.ct == doctest::Approx(1.0 / (p.N * ev.dt())).epsilon(1e-8));
}

TEST_CASE("accumulated form is positive with the constant pair in its kernel") {
  const Lab lab = make(1, 16, 0.2);
  const Evolution ev(lab.lm, lab.mesh);
  const QuadraticPencil p = build_pencil(ev, lab.region, 2.5);
  CHECK((p.G - p.G.transpose()).cwiseAbs().maxCoeff() == 0.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.G,
                                                    Eigen::EigenvaluesOnly);
  REQUIRE(es.info() == Eigen::Success);
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(scale > 0.0);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * scale);

  // The pair that is constant in space and time moves nothing: both the
  // energy form and the accumulated observation form must annihilate it up
  // to roundoff (A stores K/4 - M/(2 dt^2) with pre-rounded entries, so the
  // cancellation is eps-level rather than bitwise).
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * ev.dofs());
  const int nb = ev.block();
  for (int j = 0; j < lab.mesh.J; ++j) {
    c[Eigen::Index(j) * nb] = 1.0;
    c[ev.dofs() + Eigen::Index(j) * nb] = 1.0;
  }
  c.normalize();
  const double scale_a = p.A.cwiseAbs().maxCoeff();
  CHECK((p.A * c).norm() <= 1e-14 * scale_a);
  CHECK((p.G * c).norm() <= 1e-12 * scale);
  CHECK(std::abs(c.dot(p.G * c)) <= 1e-12 * scale);

  const ObservabilityResult r = observability_constant(p);
  CHECK(r.mu_min > 0.0);
  CHECK(r.deflated == 1);
}

TEST_CASE("longer windows can only lower the constant") {
  // Each additional step adds a positive-semidefinite increment to the
  // accumulated form while the energy form stays put, so C_T must be
  // non-increasing in T.  Checked on three distinct discretizations.
  const struct {
    int k;
    int J;
    double lambda;
  } cfgs[] = {{1, 16, 0.2}, {1, 24, 0.3}, {0, 24, 0.4}};
  for (const auto& c : cfgs) {
    const Lab lab = make(c.k, c.J, c.lambda);
    const Evolution ev(lab.lm, lab.mesh);
    double prev = std::numeric_limits<double>::infinity();
    for (double T : {1.5, 2.0, 2.5, 3.5}) {
      const double ct =
          observability_constant(build_pencil(ev, lab.region, T)).ct;
      CHECK(ct > 0.0);
      CHECK(ct <= prev * (1.0 + 1e-10));
      prev = ct;
    }
  }
}

TEST_CASE("a region that hides every cell reports unobservable") {
  const Lab lab = make(1, 16, 0.2);
  const Evolution ev(lab.lm, lab.mesh);
  // All cell centers fall inside the hidden interval, the accumulated form
  // is exactly zero, and the solver must fail loudly instead of returning a
  // bogus constant.
  const ObservationRegion nothing{-5.99, 5.99};
  const QuadraticPencil p = build_pencil(ev, nothing, 2.5);
  CHECK(p.G.cwiseAbs().maxCoeff() == 0.0);
  bool threw = false;
  try {
    observability_constant(p);
  } catch (const NumericalError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("unobservable") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("tighter filters can only lower the constant") {
  const Lab lab = make(1, 24, 0.2);
  const Evolution ev(lab.lm, lab.mesh);
  const QuadraticPencil p = build_pencil(ev, lab.region, 2.5);
  const DispersionTable table =
      eig_branches(lab.lm, mesh_frequencies(lab.mesh));
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : {0.0, 0.1, 0.2, 0.3, 0.4}) {
    FilterSpec fs;
    fs.delta = delta;
    fs.physical_only = true;
    const FilteredResult fr = filtered_constant(p, ev, table, fs);
    CHECK(fr.ct > 0.0);
    CHECK(fr.ct <= prev * (1.0 + 1e-10));
    prev = fr.ct;
  }
}

TEST_CASE("a trivial filter reduces to the unfiltered constant") {
  const Lab lab = make(1, 16, 0.2);
  const Evolution ev(lab.lm, lab.mesh);
  const QuadraticPencil p = build_pencil(ev, lab.region, 2.0);
  const DispersionTable table =
      eig_branches(lab.lm, mesh_frequencies(lab.mesh));
  FilterSpec fs;
  fs.delta = 0.0;
  fs.physical_only = false;
  const FilteredResult fr = filtered_constant(p, ev, table, fs);
  const ObservabilityResult r = observability_constant(p);
  CHECK(fr.retained == int(p.A.rows()));
  CHECK(fr.ct == doctest::Approx(r.ct).epsilon(1e-8));
}

TEST_CASE("slaved pairs live inside the independent-slot space") {
  const Lab lab = make(1, 16, 0.2);
  const Evolution ev(lab.lm, lab.mesh);
  const QuadraticPencil p = build_pencil(ev, lab.region, 2.0);
  const DispersionTable table =
      eig_branches(lab.lm, mesh_frequencies(lab.mesh));
  FilterSpec fs;
  fs.delta = 0.2;
  fs.physical_only = true;
  const FilteredResult indep = filtered_constant(p, ev, table, fs);
  fs.slave_pair = true;
  const FilteredResult slaved = filtered_constant(p, ev, table, fs);
  CHECK(slaved.retained <= indep.retained);
  CHECK(slaved.ct <= indep.ct * (1.0 + 1e-10));
  CHECK(slaved.ct > 0.0);
}

TEST_CASE("the constant ignores a common rescaling of both forms") {
  const Lab lab = make(1, 16, 0.2);
  const Evolution ev(lab.lm, lab.mesh);
  QuadraticPencil p = build_pencil(ev, lab.region, 2.5);
  const double ct = observability_constant(p).ct;
  p.A *= 7.5;
  p.G *= 7.5;
  CHECK(observability_constant(p).ct ==
        doctest::Approx(ct).epsilon(1e-12));
}

TEST_CASE("worker count does not change a single bit of the output") {
  const Lab lab = make(1, 16, 0.25);
  const Evolution ev(lab.lm, lab.mesh);
  const QuadraticPencil p1 = build_pencil(ev, lab.region, 1.0, 1);
  const QuadraticPencil p3 = build_pencil(ev, lab.region, 1.0, 3);
  const QuadraticPencil p8 = build_pencil(ev, lab.region, 1.0, 8);
  CHECK((p1.G - p3.G).cwiseAbs().maxCoeff() == 0.0);
  CHECK((p1.G - p8.G).cwiseAbs().maxCoeff() == 0.0);
  CHECK((p1.A - p3.A).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rate fitting: exact synthetic data and rejected input") {
  const std::vector<double> h = {1.0, 0.5, 0.25, 0.125};
  std::vector<double> ct;
  for (double x : h) ct.push_back(5.0 * std::exp(2.0 / x));
  const RateFit f = fit_rate(h, ct);
  CHECK(std::abs(f.r - 2.0) <= 1e-9);
  CHECK(std::abs(f.intercept - std::log(5.0)) <= 1e-9);
  CHECK(f.r2 >= 1.0 - 1e-12);
  CHECK(f.points == 4);

  CHECK_THROWS_AS(fit_rate({0.5, 0.5}, {1.0, 2.0}), ParamError);
  CHECK_THROWS_AS(fit_rate({0.5}, {1.0}), ParamError);
  CHECK_THROWS_AS(fit_rate({0.5, 0.25}, {1.0, -2.0}), ParamError);
  CHECK_THROWS_AS(fit_rate({0.5, -0.25}, {1.0, 2.0}), ParamError);
}

TEST_CASE("dimension cap and stability guard") {
  {
    const Lab lab = make(3, 600, 0.1);
    const Evolution ev(lab.lm, lab.mesh);
    CHECK_THROWS_AS(build_pencil(ev, lab.region, 1.0), ParamError);
  }
  {
    const Lab lab = make(0, 16, 1.2);
    const Evolution ev(lab.lm, lab.mesh);
    CHECK_THROWS_AS(build_pencil(ev, lab.region, 1.0), CflError);
  }
  {
    const Lab lab = make(0, 16, 0.5);
    const Evolution ev(lab.lm, lab.mesh);
    CHECK_THROWS_AS(build_pencil(ev, lab.region, 1.0, 0), ParamError);
    CHECK_THROWS_AS(build_pencil(ev, lab.region, 0.01), ParamError);
  }
}
