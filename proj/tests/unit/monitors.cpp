#include <doctest.h>

#include "riccilab/errors.hpp"
#include "riccilab/metric_io.hpp"
#include "riccilab/monitors.hpp"
#include "support.hpp"

using namespace testing;

TEST_SUITE("monitors") {

TEST_CASE("three-point derivative is exact for quadratics on uneven grids") {
  const std::vector<double> t{0.0, 0.1, 0.25, 0.3, 0.55, 0.6};
  std::vector<double> v;
  for (double s : t) v.push_back(2.0 - 3.0 * s + 5.0 * s * s);
  const auto d = time_derivative(t, v);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(d[i] == doctest::Approx(-3.0 + 10.0 * t[i]).epsilon(1e-12));
  CHECK(time_derivative({0.0, 1.0}, {1.0, 3.0}) == std::vector<double>{2.0, 2.0});
  CHECK_THROWS_AS(time_derivative({0.0, 1.0}, {1.0}), ParameterError);
}

TEST_CASE("lambda along the unit S3 flow") {
  const FlowHistory h = sphere_flow(128, 0.2, 10);
  MonitorConfig c;
  c.which = MonitorKind::lambda;
  const MonitorSeries s = record(h, c);
  CHECK(s.overall == "holds");
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    CHECK(s.value[i] == doctest::Approx(6.0 / (1.0 - 4.0 * s.t[i])).epsilon(1e-3));
    if (i > 0) CHECK(s.value[i] > s.value[i - 1]);
  }
}

TEST_CASE("W with the soliton schedule is stationary on unit S3") {
  const FlowHistory h = sphere_flow(128, 0.2, 10);
  MonitorConfig c;
  c.which = MonitorKind::W;
  c.f_terminal = "constant";
  c.tau_terminal = 0.25 - h.t_last();
  const MonitorSeries s = record(h, c);
  CHECK(s.overall == "holds");
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    CHECK(std::abs(s.dvalue_dt[i]) <= s.tol[i]);
    CHECK(std::abs(s.predicted_rhs[i]) < 1e-6);
  }
}

TEST_CASE("lambda bar is vacuous while positive") {
  const FlowHistory h = sphere_flow(64, 0.05, 10);
  MonitorConfig c;
  c.which = MonitorKind::lambdabar;
  const MonitorSeries s = record(h, c);
  CHECK(s.overall == "vacuous");
  for (const auto& v : s.verdict) CHECK(v == "vacuous");
}

TEST_CASE("reduced volume decreases on the dumbbell") {
  FlowOptions o;
  o.t_end = 0.1;
  o.store_every = 4;
  const FlowHistory h = run(build_dumbbell(3, 0.5, 1.0, 128), o);
  MonitorConfig c;
  c.which = MonitorKind::vtilde;
  c.tau_count = 8;
  c.lgeo.fan_size = 128;
  c.lgeo.ode_steps = 400;
  const MonitorSeries s = record(h, c);
  CHECK(s.overall == "holds");
  CHECK(s.violations.empty());
}

TEST_CASE("names, strides and csv output") {
  for (const char* name : {"lambda", "lambdabar", "F", "W", "nu", "vtilde", "minLbar", "minvu", "maxvu"}) {
    CHECK(to_string(monitor_from_string(name)) == name);
  }
  CHECK_THROWS_AS(monitor_from_string("entropy"), ParameterError);

  const FlowHistory h = sphere_flow(64, 0.05, 2);
  MonitorConfig c;
  c.which = MonitorKind::lambda;
  c.every = 3;
  const MonitorSeries s = record(h, c);
  CHECK(s.t.front() == h.t_first());
  CHECK(s.t.back() == h.t_last());
  CHECK(s.t.size() == (h.size() - 1) / 3 + 1 + ((h.size() - 1) % 3 != 0));
  c.every = 0;
  CHECK_THROWS_AS(record(h, c), ParameterError);

  TempDir dir("monitors");
  write_monitor_csv(s, dir.path() / "lambda.csv");
  const std::string text = read_text(dir.path() / "lambda.csv");
  CHECK(text.rfind("t,value,dvalue_dt,predicted_rhs,slack,verdict\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == s.t.size() + 1);
}

}
