#include <doctest.h>

#include "riccilab/errors.hpp"
#include "riccilab/lgeodesics.hpp"
#include "support.hpp"

using namespace testing;

namespace {

FlowHistory flat_history() { return static_history(build_flat_ball(3, 8.0, 512), 2.0); }

}  // namespace

TEST_SUITE("lgeodesics") {

TEST_CASE("straight L-geodesics on a static flat metric") {
  const FlowHistory h = flat_history();
  for (double v0 : {0.0, 0.5, 1.5}) {
    const LPath p = shoot(h, 2.0, v0, 1.0);
    REQUIRE(!p.samples.empty());
    CHECK(!p.truncated);
    double ds = 0.0, dL = 0.0;
    for (const auto& q : p.samples) {
      if (q.tau <= 0.0) continue;
      const double s = q.x * 8.0;
      ds = std::max(ds, std::abs(s - 2.0 * v0 * std::sqrt(q.tau)));
      dL = std::max(dL, std::abs(q.L - 2.0 * v0 * v0 * std::sqrt(q.tau)));
      CHECK(std::abs(q.K) < 1e-9);
    }
    CHECK(ds < 1e-6);
    CHECK(dL < 1e-6);
    const auto& last = p.samples.back();
    CHECK(last.L / (2.0 * std::sqrt(last.tau)) == doctest::Approx(v0 * v0).epsilon(1e-6));
  }
}

TEST_CASE("v0 = 0 stays at the pole of the shrinking sphere") {
  const FlowHistory h = sphere_flow(128, 0.2, 4);
  const double t0 = h.t_last(), tau_max = 0.15;
  const LPath p = shoot(h, t0, 0.0, tau_max);
  for (const auto& q : p.samples) CHECK(std::abs(q.x) < 1e-15);
  // L = int sqrt(tau) 6/(a + 4 tau) dtau with a = 1 - 4 t0.
  const double b = (1.0 - 4.0 * t0) / 4.0, tau = p.samples.back().tau;
  const double exact = 3.0 * (std::sqrt(tau) - std::sqrt(b) * std::atan(std::sqrt(tau / b)));
  CHECK(p.samples.back().L == doctest::Approx(exact).epsilon(1e-4));
}

TEST_CASE("energy identity along shots on the shrinking sphere") {
  const FlowHistory h = sphere_flow(128, 0.2, 4);
  for (double v0 : {0.3, 1.0, 3.0}) {
    const LPath p = shoot(h, h.t_last(), v0, 0.15);
    double worst = 0.0;
    for (double e : energy_identity_errors(p)) worst = std::max(worst, e);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("flat reduced distance and reduced volume") {
  const FlowHistory h = flat_history();
  const auto taus = geometric_ladder(1e-2, 1.0, 5);
  LOptions o;
  o.fan_size = 128;
  const LFan fan = shoot_fan(h, 2.0, taus, o);
  const double gauss = std::pow(4.0 * pi, 1.5);
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const auto& f = fan.fields[k];
    const auto s = arclength(f.g);
    double err = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!f.covered[i]) continue;
      const double exact = s[i] * s[i] / (4.0 * taus[k]);
      err = std::max(err, std::abs(f.l[i] - exact) / std::max(1.0, exact));
    }
    CHECK(err < 1e-3);
    CHECK(f.min_l <= 1.5 + 1e-6);
    CHECK(std::abs(reduced_volume(f, f.g).value / gauss - 1.0) < 0.01);
  }
}

TEST_CASE("reduced volume on the shrinking sphere") {
  const FlowHistory h = sphere_flow(128, 0.2, 4);
  const auto taus = geometric_ladder(1e-3, 0.15, 8);
  LOptions o;
  o.fan_size = 128;
  o.ode_steps = 400;
  const LFan fan = shoot_fan(h, h.t_last(), taus, o);
  double prev = 1e300;
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const auto& f = fan.fields[k];
    const double v = reduced_volume(f, f.g).value;
    CHECK(v <= prev + 1e-3);
    prev = v;
    CHECK(f.min_l <= 1.5 + 1e-6);
  }
  CHECK(std::abs(reduced_volume(fan.fields[0], fan.fields[0].g).value / std::pow(4.0 * pi, 1.5) - 1.0) < 0.02);
}

TEST_CASE("flat Jacobian transport is tight") {
  const FlowHistory h = flat_history();
  const LPath p = shoot(h, 2.0, 1.0, 1.0);
  const JacobianReport rep = jacobian_transport(p, 3, 1e-6);
  CHECK(rep.violations.empty());
  for (const auto& s : rep.samples) {
    if (s.tau < 1e-2) continue;
    CHECK(s.dlogJ_dtau == doctest::Approx(1.5 / s.tau).epsilon(1e-4));
    CHECK(std::abs(s.slack) * s.tau < 1e-4);
  }
}

TEST_CASE("Jacobian monotone quantity on the shrinking sphere") {
  const FlowHistory h = sphere_flow(128, 0.2, 4);
  for (double v0 : {0.5, 2.0}) {
    const JacobianReport rep = jacobian_transport(shoot(h, h.t_last(), v0, 0.15), 3, 1e-3);
    CHECK(rep.violations.empty());
    CHECK(rep.max_increase <= 1e-3);
  }
}

TEST_CASE("identity suite on the static flat metric") {
  const FlowHistory h = flat_history();
  LOptions o;
  o.fan_size = 128;
  const IdentityReport rep = identity_suite(h, 2.0, {0.05, 0.2}, 1.1, o);
  CHECK(rep.max_res_Ltau < 1e-3);
  CHECK(rep.max_res_gradL < 1e-3);
  CHECK(std::abs(rep.min_slack) < 1e-3);
  for (std::size_t k = 1; k < rep.levels.size(); ++k) {
    CHECK(rep.levels[k].min_Lbar_minus_2n_tau <= rep.levels[k - 1].min_Lbar_minus_2n_tau + 1e-6);
  }
}

TEST_CASE("shooting preconditions") {
  const FlowHistory cyl = static_history(build_cylinder(3, 1.0, 2.0, 64), 1.0);
  CHECK_THROWS_AS(shoot(cyl, 1.0, 1.0, 0.5), ParameterError);
  const auto lad = geometric_ladder(1e-3, 1e-1, 3);
  REQUIRE(lad.size() == 3);
  CHECK(lad[1] == doctest::Approx(1e-2).epsilon(1e-12));
  CHECK(lad.front() == 1e-3);
  CHECK(lad.back() == doctest::Approx(1e-1).epsilon(1e-15));
}

}
