#include <doctest.h>

#include "riccilab/errors.hpp"
#include "support.hpp"

using namespace testing;

TEST_SUITE("geometry") {

TEST_CASE("round spheres have constant scalar curvature n(n-1)/radius^2") {
  CHECK(max_abs_dev(curvature(build_round_sphere(3, 1.0, 256)).R, 6.0) < 1e-3);
  CHECK(max_abs_dev(curvature(build_round_sphere(2, 1.0, 256)).R, 2.0) < 1e-3);
  CHECK(max_abs_dev(curvature(build_round_sphere(3, 2.0, 256)).R, 1.5) < 1e-3);
}

TEST_CASE("unit S3 sectional curvatures") {
  const auto c = curvature(build_round_sphere(3, 1.0, 256));
  CHECK(max_abs_dev(c.K_rad, 1.0) < 1e-4);
  CHECK(max_abs_dev(c.K_sph, 1.0) < 1e-4);
}

TEST_CASE("scalar curvature is assembled from the sectional curvatures") {
  for (int n : {2, 3, 5}) {
    const auto g = build_dumbbell(n, 0.3, 1.0, 128);
    const auto c = curvature(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double R = 2.0 * (n - 1) * c.K_rad[i] + (n - 1) * (n - 2) * c.K_sph[i];
      CHECK(c.R[i] == doctest::Approx(R).epsilon(1e-14));
    }
  }
}

TEST_CASE("cylinder curvature") {
  const double r0 = 0.7;
  const auto c = curvature(build_cylinder(3, r0, 2.0, 64));
  CHECK(max_abs_dev(c.K_rad, 0.0) < 1e-12);
  CHECK(max_abs_dev(c.K_sph, 1.0 / (r0 * r0)) < 1e-12);
  CHECK(max_abs_dev(c.R, 2.0 / (r0 * r0)) < 1e-12);
  CHECK(max_abs_dev(curvature(build_cylinder(2, r0, 2.0, 64)).R, 0.0) < 1e-12);
}

TEST_CASE("volumes of round spheres") {
  const auto s3 = build_round_sphere(3, 1.0, 256);
  const auto s2 = build_round_sphere(2, 1.0, 256);
  const ScalarField one{std::vector<double>(256, 1.0)};
  const ScalarField zero{std::vector<double>(256, 0.0)};
  CHECK(std::abs(integrate(s3, one) / (2.0 * pi * pi) - 1.0) < 1e-3);
  CHECK(std::abs(integrate(s2, one) / (4.0 * pi) - 1.0) < 1e-3);
  CHECK(integrate(s3, zero) == 0.0);
}

TEST_CASE("pole distance and ball volumes on unit S3") {
  const auto g = build_round_sphere(3, 1.0, 256);
  const auto db = distance_and_balls(g, 0, g.size() - 1);
  CHECK(std::abs(db.distance - pi) < 1e-3);
  CHECK(distance_and_balls(g, 17, 17).distance == 0.0);
  CHECK(std::abs(db.balls(pi).volume / (2.0 * pi * pi) - 1.0) < 5e-3);
  // Ball of radius r around a pole: 4 pi (r/2 - sin(2r)/4).
  const double r = 1.0;
  CHECK(db.balls(r).volume == doctest::Approx(4.0 * pi * (r / 2.0 - std::sin(2.0 * r) / 4.0)).epsilon(1e-4));
}

TEST_CASE("flat ball volume") {
  const auto g = build_flat_ball(3, 2.0, 256);
  const ScalarField one{std::vector<double>(256, 1.0)};
  CHECK(integrate(g, one) == doctest::Approx(4.0 / 3.0 * pi * 8.0).epsilon(1e-4));
  CHECK(max_abs_dev(curvature(g).R, 0.0) < 1e-8);
}

TEST_CASE("dumbbell construction") {
  const auto g = build_dumbbell(3, 0.2, 1.0, 512);
  double mn = 1e300;
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    if (g.x[i] > 0.25 && g.x[i] < 0.75) mn = std::min(mn, g.psi[i]);
  }
  CHECK(mn >= 0.19);
  CHECK(mn <= 0.21);
  CHECK(neck_radius(g) == doctest::Approx(0.2).epsilon(1e-3));
  CHECK(*std::max_element(g.psi.begin(), g.psi.end()) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(build_dumbbell(3, 1.0, 0.5, 512), ParameterError);
  CHECK_THROWS_AS(build_dumbbell(3, 0.0, 0.5, 512), ParameterError);
}

TEST_CASE("a neck of radius 0.9 forces R <= 2/0.81 there") {
  // At an interior minimum psi_s = 0 and psi_ss >= 0, so R <= (n-1)(n-2)/psi^2.
  const auto g = build_dumbbell(3, 0.9, 1.0, 512);
  const auto c = curvature(g);
  const auto it = std::min_element(g.psi.begin() + g.size() / 4, g.psi.begin() + 3 * g.size() / 4);
  const std::size_t i = static_cast<std::size_t>(it - g.psi.begin());
  CHECK(c.R[i] <= 2.0 / (0.9 * 0.9) + 1e-6);
  CHECK(max_abs_dev(c.R, 6.0) == doctest::Approx(4.85507).epsilon(1e-4));
}

TEST_CASE("scaling") {
  const auto g = build_dumbbell(3, 0.4, 1.0, 128);
  const auto gc = scaled(g, 3.0);
  const auto c = curvature(g), cc = curvature(gc);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(cc.R[i] == doctest::Approx(c.R[i] / 9.0).epsilon(1e-12));
  CHECK(arclength(gc).back() == doctest::Approx(3.0 * arclength(g).back()).epsilon(1e-12));
}

TEST_CASE("invalid metrics are rejected") {
  auto g = build_round_sphere(3, 1.0, 64);
  g.psi[10] = -1.0;
  CHECK_THROWS_AS(validate(g), ParameterError);
  auto bad_pole = build_round_sphere(3, 1.0, 64);
  for (double& p : bad_pole.phi) p *= 1.1;
  CHECK_THROWS_AS(validate(bad_pole), ConstructionError);
  CHECK_THROWS_AS(build_round_sphere(1, 1.0, 64), ParameterError);
  CHECK_THROWS_AS(topology_from_string("torus"), ParameterError);
}

}

// The example asks for max |R - 6| < 3 on dumbbell(3, 0.9, 1.0). No profile
// with a neck of radius 0.9 can meet it (see the case above), so this stays
// red and is registered on its own.
TEST_SUITE("geometry_unattainable") {

TEST_CASE("dumbbell 0.9 is within 3 of the round curvature") {
  CHECK(max_abs_dev(curvature(build_dumbbell(3, 0.9, 1.0, 512)).R, 6.0) < 3.0);
}

}
