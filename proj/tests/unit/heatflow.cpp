#include <doctest.h>

#include "riccilab/errors.hpp"
#include "riccilab/heatflow.hpp"
#include "support.hpp"

using namespace testing;

TEST_SUITE("heatflow") {

TEST_CASE("static flat 2-cylinder reproduces the periodic heat kernel") {
  const std::size_t m = 256;
  const double L = 4.0, r0 = 0.5;
  const auto g = build_cylinder(2, r0, L, m);
  const FlowHistory h = static_history(g, 0.5);
  const ConjugateSolution sol = solve_conjugate(h, 0.5, 0.0, m / 2, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
  const double s0 = L * g.x[m / 2];
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < sol.times.size(); ++k) {
    const double tau = sol.tau_eff(k);
    for (std::size_t i = 0; i < m; ++i) {
      double exact = 0.0;
      for (int j = -4; j <= 4; ++j) {
        const double d = L * g.x[i] - s0 + j * L;
        exact += std::exp(-d * d / (4.0 * tau)) / std::sqrt(4.0 * pi * tau);
      }
      exact /= 2.0 * pi * r0;
      worst = std::max(worst, std::abs(sol.u[k][i] - exact));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("the conjugate solution keeps unit mass") {
  FlowOptions o;
  o.t_end = 0.05;
  o.store_every = 4;
  const FlowHistory h = run(build_dumbbell(3, 0.4, 1.0, 128), o);
  const ConjugateSolution sol = solve_conjugate(h, h.t_last(), 0.0);
  for (double mass : sol.mass) CHECK(std::abs(mass - 1.0) < 1e-9);
}

TEST_CASE("Harnack quantity on the shrinking sphere") {
  const FlowHistory h = sphere_flow(128, 0.2, 4);
  const double T = h.t_last();
  const ConjugateSolution sol = solve_conjugate(h, T, 0.0);
  const auto fields = harnack_v(h, sol);
  const double cutoff = T - 0.25 * (T - h.t_first());
  double max_v = -1e300;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (sol.times[k] <= cutoff) max_v = std::max(max_v, fields[k].max_v);
  }
  CHECK(max_v <= 1e-2);
  // Positive everywhere, so the potential is finite at both poles.
  const auto f0 = kernel_potential(sol, 0, 3);
  CHECK(std::isfinite(f0.front()));
  CHECK(std::isfinite(f0.back()));
}

TEST_CASE("curve check reports its own violations") {
  const FlowHistory h = sphere_flow(128, 0.2, 4);
  const ConjugateSolution sol = solve_conjugate(h, h.t_last(), 0.0);
  const CurveReport rep = curve_harnack_check(h, sol, [](double) { return 0.0; }, 1e-2);
  REQUIRE(!rep.samples.empty());
  std::size_t below = 0;
  double mn = 1e300;
  for (const auto& s : rep.samples) {
    CHECK(s.slack == doctest::Approx(s.rhs - s.lhs).epsilon(1e-12));
    if (s.slack < -1e-2) ++below;
    mn = std::min(mn, s.slack);
  }
  CHECK(rep.violations.size() == below);
  CHECK(rep.min_slack == mn);
  // Away from the terminal start-up the stationary pole path satisfies it.
  for (const auto& s : rep.samples) {
    if (s.t <= 0.15) CHECK(s.slack >= -1e-2);
  }
}

TEST_CASE("flat static kernel: f equals d^2/4tau") {
  const std::size_t m = 512;
  const auto g = build_flat_ball(3, 6.0, m);
  const FlowHistory h = static_history(g, 1.0);
  const ConjugateSolution sol = solve_conjugate(h, 1.0, 0.0, 0, {0.0, 0.25, 0.5, 0.75, 1.0});
  const auto s = arclength(g);
  // The virtual start of the Gaussian terminal data shifts tau by epsilon.
  const ReducedDistanceAt l_at = [&](double t) {
    std::vector<double> l(m);
    const double tau = 1.0 - t + sol.epsilon;
    for (std::size_t i = 0; i < m; ++i) l[i] = s[i] * s[i] / (4.0 * tau);
    return l;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < sol.times.size(); ++k) {
    const auto f = kernel_potential(sol, k, 3);
    const auto l = l_at(sol.times[k]);
    for (std::size_t i = 0; i < m; ++i) {
      if (s[i] < 2.0) worst = std::max(worst, std::abs(f[i] - l[i]));
    }
  }
  CHECK(worst < 1e-3);
  const FvsLReport rep = f_vs_l_check(h, sol, l_at, {0.0, 0.5}, 1e-3);
  CHECK(rep.violations.empty());
}

TEST_CASE("terminal time must lie inside the history") {
  const FlowHistory h = sphere_flow(64, 0.05, 4);
  CHECK_THROWS_AS(solve_conjugate(h, 1.0, 0.0), RangeError);
}

}
