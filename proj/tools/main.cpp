// Command-line front end: qdparity <fig2|fig3|parity|cnot|graph|validate> [options]

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "qdparity/errors.hpp"
#include "qdparity/experiments.hpp"

namespace ex = qdparity::experiments;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
  std::string format = "csv";
  std::optional<int> trajectories;
  std::optional<int> cycles;
  std::optional<std::string> label;
  std::optional<std::string> input;
  std::optional<std::string> mode;
  std::optional<std::string> pulse;
  std::optional<std::string> policy;
  std::optional<double> eta;
  std::optional<double> window;
  std::optional<double> dt;
  std::optional<std::string> unraveling;
  std::optional<std::string> parity;
  std::vector<double> omegas;
  std::vector<double> etas;
  std::vector<int> lengths;
  std::optional<double> p;
  bool check = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI file with [device], [run] and per-command sections")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (required for stochastic commands)");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("--label", o.label, "suffix of the output file names");
  cmd->add_option("--trajectories", o.trajectories, "trajectories or runs")->check(CLI::PositiveNumber);
  cmd->add_option("--cycles", o.cycles, "excite-decay cycles per parity measurement")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", o.mode, "ideal, detuned, h2_leakage or detuned_h2_leakage");
  cmd->add_option("--pulse", o.pulse, "square or ideal");
  cmd->add_option("--policy", o.policy, "regime policy: ignore, warn or reject");
  cmd->add_option("--eta", o.eta, "detector efficiency")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--window", o.window, "monitored decay window per cycle [ps]");
  cmd->add_option("--dt", o.dt, "integrator step [ps]");
  cmd->add_option("--unraveling", o.unraveling, "observed or full");
  cmd->add_flag("--check", o.check, "exit non-zero unless every check passes");
  cmd->add_flag("--quiet", o.quiet, "print only failed checks");
}

ex::RunConfig build_config(const Overrides& o) {
  ex::RunConfig c = o.config.empty() ? ex::RunConfig{} : ex::load_config(o.config);
  std::string ini;
  if (o.mode) ini += "mode = " + *o.mode + "\n";
  if (o.pulse) ini += "pulse = " + *o.pulse + "\n";
  if (o.policy) ini += "regime_policy = " + *o.policy + "\n";
  if (o.unraveling) ini += "unraveling = " + *o.unraveling + "\n";
  if (!ini.empty()) ex::apply_config_text(c, "[run]\n" + ini);
  if (o.seed) c.seed = o.seed;
  if (o.trajectories) c.trajectories = *o.trajectories;
  if (o.cycles) c.cycles = *o.cycles;
  if (o.label) c.label = *o.label;
  if (o.input) c.input = *o.input;
  if (o.eta) c.device.eta = *o.eta;
  if (o.window) c.window_ps = *o.window;
  if (o.dt) c.integrator.dt = *o.dt;
  if (o.parity) c.cnot_parity = *o.parity;
  if (!o.omegas.empty()) c.fig3_omegas_meV = o.omegas;
  if (!o.etas.empty()) c.fig2_etas = o.etas;
  if (!o.lengths.empty()) c.chain_lengths = o.lengths;
  if (o.p) c.bond_p = *o.p;
  c.device.validate();
  c.integrator.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-parity measurement on two coupled quantum dots"};
  app.require_subcommand(1);
  Overrides o;

  auto* fig2 = app.add_subcommand("fig2", "no-photon even probability over time vs the closed form");
  add_common(fig2, o);
  fig2->add_option("--etas", o.etas, "detector efficiencies")->delimiter(',');

  auto* fig3 = app.add_subcommand("fig3", "finite pulses with H2 leakage: even probability and fidelity vs drive");
  add_common(fig3, o);
  fig3->add_option("--omegas", o.omegas, "drive strengths [meV]")->delimiter(',');

  auto* parity = app.add_subcommand("parity", "sample parity measurements on a named input");
  add_common(parity, o);
  parity->add_option("--input", o.input, "00, 01, 10, 11, plus, odd_bell or even_bell");

  auto* cnot = app.add_subcommand("cnot", "CNOT from two parity measurements");
  add_common(cnot, o);
  cnot->add_option("--parity", o.parity, "ideal or simulated parity process")
      ->check(CLI::IsMember({"ideal", "simulated"}));

  auto* graph = app.add_subcommand("graph", "probabilistic growth of linear cluster states");
  add_common(graph, o);
  graph->add_option("--lengths", o.lengths, "chain lengths [nodes]")->delimiter(',');
  graph->add_option("--p", o.p, "bond success probability")->check(CLI::Range(0.0, 1.0));

  auto* validate = app.add_subcommand("validate", "check device parameters against the working regime");
  add_common(validate, o);

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const ex::RunConfig cfg = build_config(o);
    const ex::Report report = ex::run_command(command, cfg);
    const auto paths = ex::write_report(report, o.out, o.format, cfg.label);
    for (const auto& c : report.checks) {
      if (!o.quiet || !c.passed) fmt::print("[{}] {}: {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
    }
    if (!o.quiet) {
      for (const auto& n : report.notes) fmt::print("note: {}\n", n);
      for (const auto& p : paths) fmt::print("wrote {}\n", p.string());
    }
    return o.check && !report.all_passed() ? 1 : 0;
  } catch (const qdparity::Error& e) {
    fmt::print(stderr, "qdparity {}: {}\n", command, e.what());
    return 2;
  }
}
