#include <doctest.h>

#include <random>

#include "riccilab/errors.hpp"
#include "riccilab/functionals.hpp"
#include "support.hpp"

using namespace testing;

namespace {

ScalarField constant(std::size_t m, double c) { return {std::vector<double>(m, c), FieldRole::potential}; }

double soliton_constant(const WarpedMetric& g, double tau) {
  return std::log(total_volume(analyze(g)) / std::pow(4.0 * pi * tau, 0.5 * g.n));
}

}  // namespace

TEST_SUITE("functionals") {

TEST_CASE("F of a constant potential") {
  const auto g = build_round_sphere(3, 1.0, 256);
  for (double c : {0.0, 0.7, -1.2}) {
    CHECK(eval_F(g, constant(256, c)) == doctest::Approx(6.0 * std::exp(-c) * 2.0 * pi * pi).epsilon(1e-4));
  }
  CHECK(std::abs(eval_F(build_cylinder(2, 1.0, 3.0, 64), constant(64, 0.0))) < 1e-10);
}

TEST_CASE("lambda on round spheres and its minimizer") {
  const auto g = build_round_sphere(3, 1.0, 256);
  const EntropyReport L = lambda(g);
  CHECK(std::abs(L.value - 6.0) < 1e-3);
  REQUIRE(L.minimizer);
  CHECK(eval_F(g, *L.minimizer) == doctest::Approx(L.value).epsilon(1e-6));
  CHECK(L.constraint_residual < 1e-8);
  CHECK(std::abs(lambda(build_round_sphere(3, 2.0, 256)).value - 1.5) < 1e-3);

  const auto d = build_dumbbell(3, 0.4, 1.0, 256);
  const EntropyReport Ld = lambda(d);
  CHECK(eval_F(d, *Ld.minimizer) == doctest::Approx(Ld.value).epsilon(1e-5));
}

TEST_CASE("lambda bar") {
  const auto g = build_round_sphere(3, 1.0, 256);
  CHECK(std::abs(lambda_bar(g) - 6.0 * std::pow(2.0 * pi * pi, 2.0 / 3.0)) < 0.1);
  const auto d = build_dumbbell(3, 0.3, 1.0, 128);
  CHECK(lambda_bar(scaled(d, 2.5)) == doctest::Approx(lambda_bar(d)).epsilon(1e-10));
}

TEST_CASE("first variation vanishes for a zero perturbation") {
  const auto g = build_dumbbell(3, 0.3, 1.0, 128);
  const MetricVariation v{std::vector<double>(128, 0.0), std::vector<double>(128, 0.0)};
  CHECK(first_variation_F(g, constant(128, 0.2), v, std::vector<double>(128, 0.0)) == 0.0);
}

TEST_CASE("first variation agrees with centered differences on the dumbbell") {
  const std::size_t m = 256;
  const auto g = build_dumbbell(3, 0.3, 1.0, m);
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double eps = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    // Profile changes phi p1, psi p2 with p1 = p2 at the poles keep them smooth.
    const double a1 = U(rng), a2 = U(rng), b = U(rng), c1 = U(rng), c2 = U(rng);
    const int k1 = 1 + trial % 3;
    std::vector<double> dphi(m), dpsi(m), h(m), f0(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double x = g.x[i];
      const double p1 = 0.3 * (a1 * std::cos(2 * pi * k1 * x) + a2 * std::cos(2 * pi * x));
      const double p2 = p1 + 0.3 * b * std::pow(std::sin(pi * x), 2);
      dphi[i] = g.phi[i] * p1;
      dpsi[i] = g.psi[i] * p2;
      h[i] = c1 * std::cos(2 * pi * x) + c2 * std::cos(4 * pi * x);
      f0[i] = 0.5 * std::cos(2 * pi * x);
    }
    auto shifted = [&](double e) {
      WarpedMetric ge = g;
      ScalarField fe{f0, FieldRole::potential};
      for (std::size_t i = 0; i < m; ++i) {
        ge.phi[i] += e * dphi[i];
        ge.psi[i] += e * dpsi[i];
        fe.values[i] += e * h[i];
      }
      return eval_F(ge, fe);
    };
    const double fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
    const double an = first_variation_F(g, ScalarField{f0}, variation_from_profiles(g, dphi, dpsi), h);
    CHECK(std::abs(an - fd) / std::abs(fd) < 1e-4);
  }
}

TEST_CASE("measure-preserving gradient direction gives twice the Bakry-Emery norm") {
  const std::size_t m = 256;
  const auto g = build_dumbbell(3, 0.4, 1.0, m);
  std::vector<double> f0(m);
  for (std::size_t i = 0; i < m; ++i) f0[i] = 0.3 * std::cos(2 * pi * g.x[i]);
  const ScalarField f{f0, FieldRole::potential};
  const Geometry geo = analyze(g);
  const ScalarDerivatives df = differentiate(geo, f.values);
  MetricVariation v{std::vector<double>(m), std::vector<double>(m)};
  std::vector<double> h(m);
  for (std::size_t i = 0; i < m; ++i) {
    v.v_rad[i] = -2.0 * (geo.curvature.Ric_rad[i] + df.dss[i]);
    v.v_sph[i] = -2.0 * (geo.curvature.Ric_sph[i] + df.hess_sph[i]);
    h[i] = 0.5 * (v.v_rad[i] + (g.n - 1) * v.v_sph[i]);
  }
  const double dF = first_variation_F(g, f, v, h);
  CHECK(dF >= 0.0);
  CHECK(dF == doctest::Approx(F_rate(g, f)).epsilon(1e-3));
}

TEST_CASE("W at the soliton scale of unit S3") {
  const auto g = build_round_sphere(3, 1.0, 256);
  const double tau = 0.25;
  const auto f = constant(256, soliton_constant(g, tau));
  const EntropyReport W = eval_W(g, f, tau);
  CHECK(std::abs(W.value - (-0.2345)) < 1e-3);
  CHECK(W.constraint_residual < 1e-6);
  CHECK(W.value == doctest::Approx(6.0 * tau + f.values[0] - 3.0).epsilon(1e-6));

  auto doubled = f;
  for (double& x : doubled.values) x -= std::log(2.0);
  CHECK(eval_W(g, doubled, tau).constraint_residual == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("W is invariant under simultaneous scaling") {
  const auto g = build_dumbbell(3, 0.4, 1.0, 128);
  std::vector<double> f0(128);
  for (std::size_t i = 0; i < 128; ++i) f0[i] = 0.4 * std::cos(2 * pi * g.x[i]) + 1.0;
  const ScalarField f{f0, FieldRole::potential};
  const double c = 1.7;
  CHECK(eval_W(scaled(g, c), f, c * c * 0.3).value == doctest::Approx(eval_W(g, f, 0.3).value).epsilon(1e-10));
}

TEST_CASE("mu: competitor bound and scale invariance") {
  const auto g = build_round_sphere(3, 1.0, 128);
  const EntropyReport M = mu(g, 0.25);
  CHECK(M.value <= -0.2345 + 1e-3);
  CHECK(M.constraint_residual < 1e-6);
  const auto d = build_dumbbell(3, 0.4, 1.0, 128);
  CHECK(std::abs(mu(scaled(d, 1.5), 2.25 * 0.1).value - mu(d, 0.1).value) < 1e-6);
  CHECK_THROWS_AS(mu(g, 0.0), ParameterError);
}

TEST_CASE("nu on unit S3 sits at the soliton scale") {
  const auto g = build_round_sphere(3, 1.0, 128);
  const NuResult r = nu(g);
  CHECK(!r.at_bracket_edge);
  CHECK(r.tau == doctest::Approx(0.25).epsilon(0.02));
  CHECK(r.value == doctest::Approx(-0.234488).epsilon(1e-4));
  for (double m : r.scan_mu) CHECK(m >= r.value - 1e-9);
  CHECK(std::abs(nu(scaled(g, 2.0)).value - r.value) < 1e-6);
}

TEST_CASE("thermodynamic quantities") {
  const auto d = build_dumbbell(3, 0.4, 1.0, 128);
  const double tau = 0.2;
  std::vector<double> f0(128);
  for (std::size_t i = 0; i < 128; ++i) f0[i] = 0.4 * std::cos(2 * pi * d.x[i]);
  ScalarField f{f0, FieldRole::potential};
  const double shift = soliton_constant(d, tau);
  for (double& x : f.values) x += shift;
  const Thermo th = thermo(d, f, tau);
  CHECK(th.S == doctest::Approx(-eval_W(d, f, tau).value).epsilon(1e-10));
  CHECK(th.sigma >= 0.0);

  const auto g = build_round_sphere(3, 1.0, 256);
  const Thermo ts = thermo(g, constant(256, soliton_constant(g, 0.25)), 0.25);
  CHECK(std::abs(ts.sigma) < 1e-6);
}

}
