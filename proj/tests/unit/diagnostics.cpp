#include <doctest.h>

#include "riccilab/diagnostics.hpp"
#include "riccilab/errors.hpp"
#include "support.hpp"

using namespace testing;

TEST_SUITE("diagnostics") {

TEST_CASE("kappa on unit S3 and under scaling") {
  const auto g = build_round_sphere(3, 1.0, 256);
  const KappaResult k = kappa_scan(g, 1.0);
  REQUIRE(k.admissible_found);
  CHECK(k.kappa == doctest::Approx(3.426542249).epsilon(1e-8));
  // The witness is a pole ball of radius 1: 4 pi (1/2 - sin 2/4).
  CHECK(k.volume == doctest::Approx(4.0 * pi * (0.5 - std::sin(2.0) / 4.0)).epsilon(1e-4));
  CHECK(kappa_scan(scaled(g, 2.3), 2.3).kappa == doctest::Approx(k.kappa).epsilon(1e-12));
}

TEST_CASE("thin flat cylinders are collapsed") {
  // In dimension 2 the cylinder is flat, so every radius is admissible.
  const double k1 = kappa_scan(build_cylinder(2, 0.01, 4.0, 256), 1.0).kappa;
  const double k2 = kappa_scan(build_cylinder(2, 0.001, 4.0, 256), 1.0).kappa;
  CHECK(k1 < 0.2);
  CHECK(k2 < 0.2 * k1);
  // In dimension 3 the sphere factor has |Rm| = psi^-2, which rules out every r > psi here.
  const KappaResult k3 = kappa_scan(build_cylinder(3, 0.01, 4.0, 256), 1.0);
  CHECK(!k3.admissible_found);
  CHECK(std::isinf(k3.kappa));
}

TEST_CASE("collapse detector") {
  const FlowHistory sphere = sphere_flow(128, 0.2, 10);
  const CollapseReport rs = collapse_detector(sphere, sphere.t_last());
  REQUIRE(!rs.kappa.empty());
  CHECK(rs.bounded_away);
  // Self-similar: constant at a scale that shrinks with the radius sqrt(1 - 4t).
  const double k0 = kappa_scan(sphere.snapshot(0), 0.5).kappa;
  for (std::size_t k = 1; k < sphere.size(); ++k) {
    const double r = std::sqrt(1.0 - 4.0 * sphere.times()[k]);
    CHECK(std::abs(kappa_scan(sphere.snapshot(k), 0.5 * r).kappa / k0 - 1.0) < 1e-3);
  }

  FlowOptions o;
  o.t_end = 1.0;
  o.store_every = 20;
  const FlowHistory pinch = run(build_dumbbell(3, 0.2, 1.0, 256), o);
  const CollapseReport rp = collapse_detector(pinch, pinch.t_last());
  CHECK(rp.bounded_away);
  CHECK(rp.min_kappa == doctest::Approx(3.90629).epsilon(1e-4));

  const FlowHistory thin = static_history(build_cylinder(2, 0.01, 4.0, 256), 1.0);
  const CollapseReport rt = collapse_detector(thin, 1.0);
  CHECK(rt.min_kappa < 0.2);
}

TEST_CASE("neck detection") {
  const auto cyl = build_cylinder(3, 1.0, 20.0, 128);
  CHECK(neck_detect(cyl, 0.01).size() == cyl.size());
  CHECK(neck_detect(build_round_sphere(3, 1.0, 256), 0.09).empty());
  CHECK_THROWS_AS(neck_detect(cyl, 0.6), ParameterError);

  FlowOptions o;
  o.t_end = 1.0;
  o.store_every = 20;
  const FlowHistory pinch = run(build_dumbbell(3, 0.2, 1.0, 256), o);
  const auto& g = pinch.snapshot(pinch.size() - 1);
  const auto centers = neck_detect(g, 0.2);
  REQUIRE(!centers.empty());
  const auto it = std::min_element(g.psi.begin() + 1, g.psi.end() - 1);
  const double x_neck = g.x[static_cast<std::size_t>(it - g.psi.begin())];
  for (const auto& c : centers) CHECK(std::abs(c.x - x_neck) < 0.02);
}

TEST_CASE("distance lemma on the shrinking sphere") {
  const FlowHistory h = sphere_flow(128, 0.2, 10);
  for (double t : {0.0, 0.1, 0.19}) {
    const DistanceLemmaReport rep = distance_lemma_best_pair(h, t, 0.02 * pi, 0.5 * pi);
    REQUIRE(rep.pair_rate);
    CHECK(*rep.pair_rate == doctest::Approx(-2.0 * pi / std::sqrt(1.0 - 4.0 * t)).epsilon(1e-3));
    CHECK(*rep.pair_slack >= -1e-6);
    CHECK(rep.min_slack_local >= -1e-6);
  }
}

TEST_CASE("distance lemma on a static flat ball") {
  const FlowHistory h = static_history(build_flat_ball(3, 4.0, 256), 1.0);
  const DistanceLemmaReport rep = distance_lemma_check(h, 0.5, 0.5);
  CHECK(rep.checked > 0);
  CHECK(rep.min_slack_local >= -1e-6);
  CHECK(!rep.pair_rate);
}

TEST_CASE("distance lemma declines when the Ricci bound fails") {
  const FlowHistory h = sphere_flow(64, 0.05, 10);
  const DistanceLemmaReport rep = distance_lemma_check(h, 0.0, 0.5, 0.1);
  CHECK(!rep.precondition_ok);
  CHECK(rep.checked == 0);
  CHECK(distance_lemma_check(h, 0.0, 0.5, 2.0).precondition_ok);
}

}
