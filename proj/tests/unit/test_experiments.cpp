#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qdparity/errors.hpp"
#include "qdparity/experiments.hpp"

using namespace qdparity;
using namespace qdparity::experiments;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_parity() {
  RunConfig c;
  c.pulse = protocols::PulseShape::ideal;
  c.trajectories = 400;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("config text") {
  RunConfig c;
  apply_config_text(c,
                    "[device]\neta = 0.25\ndrive_meV = 0.02\n"
                    "[run]\ncycles = 3\npulse = ideal\nseed = 42\nunraveling = full\n"
                    "[fig2]\netas = 0, 1\n"
                    "[graph]\nchain_lengths = 2, 16\n");
  CHECK(c.device.eta == 0.25);
  CHECK(c.device.drive == 0.02);
  CHECK(c.cycles == 3);
  CHECK(c.pulse == protocols::PulseShape::ideal);
  CHECK(c.seed == 42u);
  CHECK(c.unraveling == dynamics::Unraveling::full);
  CHECK(c.fig2_etas == std::vector<double>{0.0, 1.0});
  CHECK(c.chain_lengths == std::vector<int>{2, 16});
  CHECK(c.window_ps == 10000.0);  // untouched

  RunConfig bad;
  CHECK_THROWS_AS(apply_config_text(bad, "[run]\ncycels = 2\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(bad, "[extras]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(bad, "[device]\neta = lots\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(bad, "[run]\ncycles = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/qdparity.ini"), ConfigError);
}

TEST_CASE("named inputs") {
  for (auto n : {"00", "01", "10", "11", "plus", "odd_bell", "even_bell"}) CHECK(named_input(n).norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(named_input("ghz"), ConfigError);
}

TEST_CASE("stochastic commands need a seed") {
  RunConfig c;
  CHECK_THROWS_AS(cmd_parity(c), ConfigError);
  CHECK_THROWS_AS(cmd_graph(c), ConfigError);
  c.cnot_parity = "simulated";
  CHECK_THROWS_AS(cmd_cnot(c), ConfigError);
  CHECK_THROWS_AS(run_command("fig9", c), ConfigError);
}

TEST_CASE("fig2 table") {
  RunConfig c;
  c.fig2_t_max_ps = 1000.0;
  const auto r = cmd_fig2(c);
  CHECK(r.all_passed());
  REQUIRE_FALSE(r.tables.empty());
  const auto& t = r.tables.front();
  CHECK(t.columns.front() == "t_ps");
  CHECK(t.rows.size() == 5 * 11);
  CHECK(to_csv(t).rfind("t_ps,eta,", 0) == 0);
}

TEST_CASE("cell formatting round-trips doubles") {
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_cell(x)) == x);
  CHECK(format_cell(7LL) == "7");
  Table t{"t", {"a", "b"}, {}};
  t.add({std::string("x,y"), std::string("say \"hi\"")});
  CHECK(to_csv(t) == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
  CHECK_THROWS(t.add({1.0}));
}

TEST_CASE("same seed, same bytes") {
  const auto dir = fs::temp_directory_path() / "qdparity_unit_outputs";
  fs::remove_all(dir);
  const auto cfg = small_parity();
  const auto first = write_report(cmd_parity(cfg), dir / "a", "csv", "x");
  const auto second = write_report(cmd_parity(cfg), dir / "b", "csv", "x");
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].filename() == second[i].filename());
    CHECK(slurp(first[i]) == slurp(second[i]));
  }
  CHECK(first.front().filename() == "parity_x.csv");
  CHECK(first.back().filename() == "parity_x_checks.csv");

  auto other = cfg;
  other.seed = 6;
  CHECK(to_csv(cmd_parity(other).tables.front()) != slurp(first.front()));
  fs::remove_all(dir);
}

TEST_CASE("json report") {
  const auto dir = fs::temp_directory_path() / "qdparity_unit_json";
  fs::remove_all(dir);
  RunConfig c;
  const auto report = cmd_cnot(c);
  const auto written = write_report(report, dir, "json", "ideal");
  REQUIRE(written.size() == 2);  // the report and the correction table
  CHECK(written[0].filename() == "cnot_ideal.json");
  CHECK(written[1].filename() == "cnot_ideal_corrections.txt");
  const auto j = nlohmann::json::parse(slurp(written[0]));
  CHECK(j["command"] == "cnot");
  CHECK(j["all_passed"] == true);
  CHECK(j["tables"].size() == report.tables.size());
  CHECK_THROWS_AS(write_report(report, dir, "xml", "ideal"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("validate flags a strong drive") {
  RunConfig c;
  CHECK(cmd_validate(c).all_passed());
  c.device.drive = 1.0;
  const auto r = cmd_validate(c);
  CHECK_FALSE(r.all_passed());
}
