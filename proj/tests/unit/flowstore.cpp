#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "riccilab/errors.hpp"
#include "riccilab/metric_io.hpp"
#include "support.hpp"

using namespace testing;
namespace fs = std::filesystem;

namespace {

bool same(const WarpedMetric& a, const WarpedMetric& b) {
  return a.n == b.n && a.topology == b.topology && a.x == b.x && a.phi == b.phi && a.psi == b.psi;
}

}  // namespace

TEST_SUITE("flowstore") {

TEST_CASE("at() is exact at snapshot times and follows the shrinking sphere between them") {
  const FlowHistory h = sphere_flow(128, 0.2, 10);
  for (std::size_t k = 0; k < h.size(); ++k) CHECK(same(h.at(h.times()[k]), h.snapshot(k)));
  for (double t : {0.013, 0.077, 0.151, 0.1999}) {
    const auto R = curvature(h.at(t)).R;
    CHECK(max_abs_dev(R, 6.0 / (1.0 - 4.0 * t)) / (6.0 / (1.0 - 4.0 * t)) < 1e-3);
  }
  CHECK_THROWS_AS(h.at(h.t_last() + 1e-9), RangeError);
  CHECK_THROWS_AS(h.at(-1e-9), RangeError);
}

TEST_CASE("appending must move forward in time") {
  FlowHistory h;
  const auto g = build_round_sphere(3, 1.0, 64);
  h.append(0.0, g);
  CHECK_THROWS_AS(h.append(0.0, g), ParameterError);
}

TEST_CASE("save and load round-trip every float") {
  TempDir dir("flowstore");
  FlowOptions o;
  o.t_end = 0.02;
  o.store_every = 5;
  o.regrid_threshold = 1.05;
  const FlowHistory h = run(build_dumbbell(3, 0.3, 1.0, 128), o);
  save_history(h, dir.path() / "h");
  std::vector<std::string> warnings;
  const FlowHistory back = load_history(dir.path() / "h", &warnings);
  CHECK(warnings.empty());
  REQUIRE(back.size() == h.size());
  CHECK(back.times() == h.times());
  for (std::size_t k = 0; k < h.size(); ++k) CHECK(same(back.snapshot(k), h.snapshot(k)));
  CHECK(back.regrid_events().size() == h.regrid_events().size());
  REQUIRE(back.termination);
  CHECK(back.termination->status == h.termination->status);
  CHECK(back.termination->t_final == h.termination->t_final);
}

TEST_CASE("missing snapshot is a format error naming the file") {
  TempDir dir("flowstore-missing");
  const FlowHistory h = sphere_flow(64, 0.01, 5);
  save_history(h, dir.path());
  const auto manifest = nlohmann::json::parse(read_text(dir.path() / "manifest.json"));
  const std::string victim = manifest["files"][1];
  fs::remove(dir.path() / victim);
  try {
    load_history(dir.path());
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.key() == victim);
  }
}

TEST_CASE("unknown manifest keys load with a warning") {
  TempDir dir("flowstore-future");
  const FlowHistory h = sphere_flow(64, 0.01, 5);
  save_history(h, dir.path());
  auto manifest = nlohmann::json::parse(read_text(dir.path() / "manifest.json"));
  manifest["provenance_extra"] = {{"tool", "next"}};
  write_text(dir.path() / "manifest.json", manifest.dump(2));
  std::vector<std::string> warnings;
  const FlowHistory back = load_history(dir.path(), &warnings);
  CHECK(back.size() == h.size());
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("provenance_extra") != std::string::npos);
}

TEST_CASE("regridding keeps arclength and poles") {
  const auto g = build_dumbbell(3, 0.2, 1.0, 128);
  const auto r = regrid_uniform_arclength(g);
  CHECK(arclength(r).back() == doctest::Approx(arclength(g).back()).epsilon(1e-6));
  CHECK(r.psi.front() == 0.0);
  CHECK(r.psi.back() == 0.0);
  CHECK(max_abs_dev(r.phi, r.phi[0]) < 1e-12);
}

}

TEST_SUITE("metric_io") {

TEST_CASE("metric CSV round-trip") {
  TempDir dir("metric-io");
  const auto g = build_dumbbell(3, 0.35, 1.0, 200);
  write_metric(dir.path() / "g.csv", g, 0.125);
  const LoadedMetric back = read_metric(dir.path() / "g.csv");
  CHECK(same(back.metric, g));
  CHECK(back.time == 0.125);
  CHECK(fs::exists(sidecar_path(dir.path() / "g.csv")));
}

TEST_CASE("malformed metric files name the bad entry") {
  TempDir dir("metric-io-bad");
  const auto g = build_round_sphere(3, 1.0, 64);
  const fs::path csv = dir.path() / "g.csv";
  write_metric(csv, g, 0.0);
  auto side = nlohmann::json::parse(read_text(sidecar_path(csv)));
  side["topology"] = "klein";
  write_text(sidecar_path(csv), side.dump());
  try {
    read_metric(csv);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.key() == "topology");
  }
  write_text(dir.path() / "t.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_table(dir.path() / "t.csv"), FormatError);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) CHECK(std::stod(format_double(v)) == v);
}

}
