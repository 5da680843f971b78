#include <doctest.h>

#include "riccilab/errors.hpp"
#include "riccilab/functionals.hpp"
#include "support.hpp"

using namespace testing;

TEST_SUITE("flow") {

TEST_CASE("zero step returns the input bit for bit") {
  const auto g = build_dumbbell(3, 0.3, 1.0, 128);
  const auto s = ricci_step(g, 0.0);
  CHECK(s.phi == g.phi);
  CHECK(s.psi == g.psi);
  CHECK(s.x == g.x);
}

TEST_CASE("unit S3 shrinks self-similarly") {
  const FlowHistory h = sphere_flow(128, 0.2, 10);
  REQUIRE(h.termination);
  CHECK(h.termination->status == "ok");
  for (std::size_t k = 1; k < h.size(); ++k) CHECK(h.times()[k] > h.times()[k - 1]);
  const double dt = stable_dt(h.snapshot(h.size() - 1), 0.5);
  CHECK(h.t_last() >= 0.2 - dt);
  const double exact = 6.0 / (1.0 - 4.0 * h.t_last());
  CHECK(max_abs_dev(curvature(h.snapshot(h.size() - 1)).R, exact) / exact < 1e-3);
}

TEST_CASE("unit S3 runs into extinction near t = 1/4") {
  FlowOptions o;
  o.t_end = 10.0;
  o.store_every = 1000;
  const FlowHistory h = run(build_round_sphere(3, 1.0, 64), o);
  REQUIRE(h.termination);
  CHECK(h.termination->status == "near_singular");
  CHECK(std::abs(h.termination->t_final - 0.25) < 0.01);
}

TEST_CASE("the sphere factor of a cylinder shrinks like a round S2") {
  FlowOptions o;
  o.t_end = 0.2;
  o.store_every = 50;
  const FlowHistory h = run(build_cylinder(3, 1.0, 2.0, 64), o);
  const double t = h.t_last();
  const auto c = curvature(h.snapshot(h.size() - 1));
  CHECK(max_abs_dev(c.K_sph, 1.0 / (1.0 - 2.0 * t)) * (1.0 - 2.0 * t) < 1e-3);
  CHECK(max_abs_dev(c.R, 2.0 / (1.0 - 2.0 * t)) * (1.0 - 2.0 * t) / 2.0 < 1e-3);
  CHECK(max_abs_dev(c.K_rad, 0.0) < 1e-10);
}

TEST_CASE("dumbbell neck pinches before the sphere extinction time") {
  double t_star[2];
  int k = 0;
  for (std::size_t m : {128, 256}) {
    FlowOptions o;
    o.t_end = 1.0;
    o.store_every = 100;
    const FlowHistory h = run(build_dumbbell(3, 0.2, 1.0, m), o);
    REQUIRE(h.termination);
    CHECK(h.termination->status == "near_singular");
    t_star[k++] = h.termination->t_final;
  }
  CHECK(t_star[1] < 0.25);
  CHECK(std::abs(t_star[1] / t_star[0] - 1.0) < 0.01);
  CHECK(t_star[1] == doctest::Approx(0.02277).epsilon(2e-3));
}

TEST_CASE("flow options are checked") {
  FlowOptions o;
  o.cfl = 0.0;
  CHECK_THROWS_AS(check_options(o), ParameterError);
  CHECK_THROWS_AS(run(build_flat_ball(3, 1.0, 64), FlowOptions{}), ParameterError);
}

TEST_CASE("coupled potential: constants stay constant and the measure is preserved") {
  const FlowHistory sphere = sphere_flow(64, 0.1, 5);
  const auto fs = evolve_potential(sphere, ScalarField{std::vector<double>(64, 0.3), FieldRole::potential});
  REQUIRE(fs.size() == sphere.size());
  for (const auto& f : fs) CHECK(max_abs_dev(f.values, f.values[0]) < 1e-5);

  FlowOptions o;
  o.t_end = 0.05;
  o.store_every = 2;
  const FlowHistory h = run(build_dumbbell(3, 0.5, 1.0, 128), o);
  const auto gT = h.snapshot(h.size() - 1);
  const auto f = evolve_potential(h, *lambda(gT).minimizer);
  double worst = 0.0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    // Measured with the finite-volume control volumes the solver conserves.
    auto mass = [&](std::size_t j) {
      const auto vol = fv_weights(h.snapshot(j)).cell_volume;
      double s = 0.0;
      for (std::size_t i = 0; i < vol.size(); ++i) s += std::exp(-f[j].values[i]) * vol[i];
      return s;
    };
    worst = std::max(worst, std::abs(mass(k) - mass(k - 1)) / (h.times()[k] - h.times()[k - 1]));
  }
  CHECK(worst < 1e-6);
}

}
