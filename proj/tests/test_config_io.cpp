#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coalmpc/config.hpp"
#include "coalmpc/trace_io.hpp"

using namespace coalmpc;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "coalmpc_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    rows.emplace_back();
    while (std::getline(ss, cell, ',')) rows.back().push_back(std::stod(cell));
  }
  return rows;
}

}  // namespace

TEST_SUITE("config_io") {

TEST_CASE("bundled configuration has the Dez reaches") {
  const RunConfig c = load_config(COALMPC_SOURCE_DIR "/configs/dez_scenario1.json");
  REQUIRE(c.reaches.size() == 13);
  CHECK(c.reaches[0].backwater_surface == doctest::Approx(93180.0));
  CHECK(c.reaches[0].delay_steps == 3);
  CHECK(c.reaches[12].delay_steps == 2);
  const RunConfig c2 = load_config(COALMPC_SOURCE_DIR "/configs/dez_scenario2.json");
  CHECK(c2.scenario.schedule.size() == 8);
}

TEST_CASE("omitted fields take the defaults") {
  const RunConfig c = parse_config("{}");
  CHECK(c.controller.prediction_horizon == 10);
  CHECK(c.controller.control_horizon == 3);
  CHECK(c.controller.level_weight == 250.0);
  CHECK(c.controller.input_weight == 2800.0);
  CHECK(c.controller.slack_weight == 1e4);
  CHECK(c.controller.link_cost == 0.6);
  CHECK(c.controller.sample_time == 300.0);
  CHECK(c.reaches.size() == 13);
}

TEST_CASE("zero delay is rejected") {
  const std::string text = R"({"canal": {"reaches": [
      {"backwater_surface": 1000.0, "delay": 0}]}})";
  CHECK_THROWS(parse_config(text));
}

TEST_CASE("syntax errors carry the line") {
  try {
    parse_config("{\n\"seed\": 1,\n oops\n}", "bad.json");
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("bad.json:3") != std::string::npos);
  }
}

TEST_CASE("unknown keys name the field") {
  try {
    parse_config(R"({"controller": {"horizon": 4}})");
    FAIL("expected rejection");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("horizon") != std::string::npos);
  }
}

TEST_CASE("dumped configuration parses back to the same hash") {
  RunConfig c = default_config();
  c.controller.link_cost = 1.2;
  c.scenario = scenario_by_name("scenario2");
  const RunConfig back = parse_config(dump_config(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(default_config()) != config_hash(c));
}

TEST_CASE("trace round trip is lossless") {
  Scenario s = Scenario::scenario1();
  s.horizon = 90;
  const SimTrace t = run_closed_loop(dez_reaches(), s, SimulationOptions{});
  const auto path = scratch("trace.csv");
  write_trace(t, path.string(), "0123456789abcdef");
  const TraceFile f = read_trace(path.string());
  CHECK(f.config_hash == "0123456789abcdef");
  CHECK(f.version == kSoftwareVersion);
  CHECK(f.trace.steps == t.steps);
  CHECK(trace_columns(13) == 1 + 4 * 13 + 6);
}

TEST_CASE("corrupt trace files are rejected") {
  const auto path = scratch("broken.csv");
  std::ofstream(path) << "# version=0.1.0\nnot,a,trace\n";
  CHECK_THROWS_AS(read_trace(path.string()), TraceFormatError);
}

TEST_CASE("plot data: raster and monotone accumulated costs") {
  Scenario s = Scenario::scenario1();
  s.horizon = 90;
  const SimTrace t = run_centralized(dez_reaches(), s, SimulationOptions{});
  const auto dir = scratch("plot");
  emit_plot_data(t, 0.6, dir.string());
  const auto raster = read_csv(dir / "link_raster.csv");
  REQUIRE(raster.size() == 90);
  for (const auto& row : raster)
    for (std::size_t j = 1; j < row.size(); ++j) CHECK(row[j] == 1.0);
  const auto acc = read_csv(dir / "accumulated_costs.csv");
  for (std::size_t k = 1; k < acc.size(); ++k)
    for (std::size_t j = 1; j < acc[k].size(); ++j) CHECK(acc[k][j] >= acc[k - 1][j]);
  CHECK(std::filesystem::exists(dir / "level_errors.csv"));
  CHECK(std::filesystem::exists(dir / "inflows.csv"));
}

}
