#include <doctest.h>

#include <json.hpp>

#include "riccilab/metric_io.hpp"
#include "riccilab/scenario.hpp"
#include "support.hpp"

using namespace testing;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "name": "small",
  "metric": {"kind": "sphere", "n": 3, "radius": 1.0, "m": 64},
  "flow": {"t_end": 0.05, "store_every": 10},
  "monitors": [{"which": "lambda"}],
  "checks": [{"kind": "sphere_oracle", "tol": 1e-3}]
})";

std::string config_error_path(const std::string& text, const fs::path& out) {
  try {
    run_scenario_text(text, fs::current_path(), out);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("config hash ignores formatting and key order") {
  const std::string a = R"({"name": "x", "flow": {"t_end": 1, "cfl": 0.5}})";
  const std::string b = "{\"flow\":{\"cfl\":0.5,\"t_end\":1},\n   \"name\":\"x\"}";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(R"({"name": "y", "flow": {"t_end": 1, "cfl": 0.5}})"));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("small scenario writes its outputs") {
  TempDir dir("scenario");
  const ScenarioOutcome out = run_scenario_text(kSmall, dir.path(), dir.path() / "out");
  CHECK(out.verdict == "holds");
  CHECK(out.flow_status == "ok");
  CHECK(out.config_hash == config_hash(kSmall));
  CHECK(fs::exists(dir.path() / "out" / "monitors" / "lambda.csv"));
  CHECK(fs::exists(dir.path() / "out" / "history" / "manifest.json"));
  const auto report = nlohmann::json::parse(read_text(out.report));
  const auto manifest = nlohmann::json::parse(read_text(out.manifest));
  CHECK(manifest["config_hash"] == out.config_hash);
  CHECK(manifest["verdict"] == "holds");
  for (const auto& o : out.outputs) CHECK(fs::exists(dir.path() / "out" / o));
  CHECK(report.dump().find("violated") == std::string::npos);
}

TEST_CASE("scenario on a stored history") {
  TempDir dir("scenario-history");
  save_history(sphere_flow(64, 0.05, 10), dir.path() / "h");
  const std::string text = R"({"name": "stored", "history": "h", "monitors": [{"which": "lambda"}]})";
  const ScenarioOutcome out = run_scenario_text(text, dir.path(), dir.path() / "out");
  CHECK(out.verdict == "holds");
}

TEST_CASE("config errors name the offending key or path") {
  TempDir dir("scenario-errors");
  const fs::path out = dir.path() / "out";
  auto cfg = nlohmann::json::parse(kSmall);
  auto with = [&](auto edit) {
    auto c = cfg;
    edit(c);
    return config_error_path(c.dump(), out);
  };
  CHECK(with([](auto& c) { c["flow"]["tend"] = 1; }) == "flow.tend");
  CHECK(with([](auto& c) { c["monitors"][0]["which"] = "entropy"; }) == "monitors[0].which");
  CHECK(with([](auto& c) { c["history"] = "somewhere"; }) == "scenario");
  CHECK(with([](auto& c) { c.erase("flow"); }) == "scenario");
  CHECK(with([](auto& c) { c["checks"][0]["kind"] = "vibes"; }) == "checks[0].kind");
  CHECK(config_error_path("{not json", out) == "<config>");

  const std::string missing = R"({"name": "m", "history": "no/such/dir"})";
  CHECK(config_error_path(missing, out).find("no/such/dir") != std::string::npos);
  CHECK_THROWS_AS(run_scenario(dir.path() / "absent.json", out), ConfigError);
}

}
