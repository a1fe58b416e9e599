#pragma once

// Named experiments behind the command-line tool: each turns a RunConfig into
// tables, pass/fail checks and optional text artifacts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qdparity/dynamics.hpp"
#include "qdparity/model.hpp"
#include "qdparity/protocols.hpp"

namespace qdparity::experiments {

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;  // units in the names, e.g. t_ps
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Artifact {
  std::string name;
  std::string text;
};

struct Report {
  std::string command;
  std::vector<Table> tables;  // the first one is the main table
  std::vector<Check> checks;
  std::vector<std::string> notes;
  std::vector<Artifact> artifacts;

  bool all_passed() const;
};

struct RunConfig {
  model::DeviceParams device;
  model::ChannelMode mode = model::ChannelMode::ideal;
  protocols::PulseShape pulse = protocols::PulseShape::square;
  int cycles = 1;
  double window_ps = 10000.0;
  dynamics::IntegratorConfig integrator;
  dynamics::Unraveling unraveling = dynamics::Unraveling::observed;
  protocols::RegimePolicy regime_policy = protocols::RegimePolicy::reject;
  double regime_threshold = 10.0;
  int trajectories = 10000;
  std::optional<std::uint64_t> seed;
  std::string input = "plus";
  std::string label = "run";

  double fig2_step_ps = 100.0;
  double fig2_t_max_ps = 10000.0;
  std::vector<double> fig2_etas = {0.0, 0.25, 0.5, 0.75, 1.0};

  double fig3_step_ps = 100.0;
  std::vector<double> fig3_omegas_meV = {0.05, 0.1, 0.2};

  std::string cnot_parity = "ideal";  // or "simulated"
  int tomography_runs = 2000;

  std::vector<int> chain_lengths = {2, 4, 8};
  double bond_p = 0.5;
  long long max_attempts = 100'000'000;

  protocols::ParityOptions parity_options() const;
  /// Throws ConfigError when a stochastic experiment has no seed.
  std::uint64_t require_seed(std::string_view command) const;
};

/// Reads a flat INI file ([device], [run], [fig2], [fig3], [cnot], [graph]) over
/// the defaults. Unknown sections or keys throw ConfigError.
RunConfig load_config(const std::filesystem::path& path);
void apply_config_text(RunConfig& cfg, std::string_view ini_text);

/// Named two-qubit inputs: 00, 01, 10, 11, plus (equal superposition), odd_bell, even_bell.
hilbert::StateVector named_input(std::string_view name);

Report cmd_fig2(const RunConfig& cfg);
Report cmd_fig3(const RunConfig& cfg);
Report cmd_parity(const RunConfig& cfg);
Report cmd_cnot(const RunConfig& cfg);
Report cmd_graph(const RunConfig& cfg);
Report cmd_validate(const RunConfig& cfg);

Report run_command(std::string_view command, const RunConfig& cfg);

std::string format_cell(const Cell& cell);
std::string to_csv(const Table& table);
std::string to_json(const Report& report);

/// Writes <command>_<label>.<format> for the main table, <command>_<label>_<table>.csv
/// for the others (json puts everything in one file) and
/// <command>_<label>_<artifact>.txt. Returns the paths written.
std::vector<std::filesystem::path> write_report(const Report& report, const std::filesystem::path& dir,
                                                std::string_view format, std::string_view label);

}  // namespace qdparity::experiments
