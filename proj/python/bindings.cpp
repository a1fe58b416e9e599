#include <optional>
#include <string>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qdparity/analytics.hpp"
#include "qdparity/errors.hpp"
#include "qdparity/experiments.hpp"
#include "qdparity/model.hpp"
#include "qdparity/protocols.hpp"

namespace py = pybind11;
using namespace qdparity;
namespace pr = qdparity::protocols;
namespace ex = qdparity::experiments;

namespace {

hilbert::DensityOperator to_density(const CMatrix& m) {
  const double tr = m.trace().real();
  return hilbert::DensityOperator(m, std::abs(tr - 1.0) < 1e-12);
}

py::dict report_dict(const ex::Report& r) {
  py::dict tables;
  for (const auto& t : r.tables) {
    py::list rows;
    for (const auto& row : t.rows) {
      py::list out;
      for (const auto& c : row) std::visit([&](const auto& v) { out.append(v); }, c);
      rows.append(out);
    }
    tables[py::str(t.name)] = py::dict(py::arg("columns") = t.columns, py::arg("rows") = rows);
  }
  py::list checks;
  for (const auto& c : r.checks)
    checks.append(py::dict(py::arg("name") = c.name, py::arg("passed") = c.passed, py::arg("detail") = c.detail));
  py::dict artifacts;
  for (const auto& a : r.artifacts) artifacts[py::str(a.name)] = a.text;
  return py::dict(py::arg("command") = r.command, py::arg("tables") = tables, py::arg("checks") = checks,
                  py::arg("notes") = r.notes, py::arg("artifacts") = artifacts,
                  py::arg("all_passed") = r.all_passed());
}

ex::RunConfig make_config(const std::string& config_text, std::optional<std::uint64_t> seed) {
  ex::RunConfig cfg;
  if (!config_text.empty()) ex::apply_config_text(cfg, config_text);
  if (seed) cfg.seed = seed;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spin-parity measurement on two coupled quantum dots (compiled core).";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<RegimeViolation> regime_violation(m, "RegimeViolation", error.ptr());
  static py::exception<StepSizeError> step_size_error(m, "StepSizeError", error.ptr());
  static py::exception<DimensionMismatch> dimension_mismatch(m, "DimensionMismatch", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const RegimeViolation& e) {
      py::set_error(regime_violation, e.what());
    } catch (const StepSizeError& e) {
      py::set_error(step_size_error, e.what());
    } catch (const DimensionMismatch& e) {
      py::set_error(dimension_mismatch, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  // analytics -------------------------------------------------------------
  m.def("p_even", &analytics::p_even, py::arg("t"), py::arg("eta"), py::arg("gamma1"),
        "Probability of no detected photon by time t [ps] for the equal superposition.");
  m.def("fidelity_no_photon", &analytics::fidelity_no_photon, py::arg("eta"));
  m.def("fidelity_repeat", &analytics::fidelity_repeat, py::arg("cycles"), py::arg("eta"));
  m.def("f_spatial", &analytics::f_spatial, py::arg("alpha"));
  m.def("fidelity_spatial", &analytics::fidelity_spatial, py::arg("k0_dr"));
  m.def("timing_infidelity", &analytics::timing_infidelity, py::arg("delta"), py::arg("dt"));
  m.def("detuning_coefficients", [](double delta, double foerster) {
    const auto c = analytics::detuning_coefficients(delta, foerster);
    return py::make_tuple(c.A, c.b1, c.b2);
  }, py::arg("delta"), py::arg("foerster"), "Returns (A, b1, b2).");

  // model -----------------------------------------------------------------
  py::enum_<model::ChannelMode>(m, "ChannelMode")
      .value("ideal", model::ChannelMode::ideal)
      .value("detuned", model::ChannelMode::detuned)
      .value("h2_leakage", model::ChannelMode::h2_leakage)
      .value("detuned_h2_leakage", model::ChannelMode::detuned_h2_leakage);

  const model::DeviceParams kDefaults;
  py::class_<model::DeviceParams>(m, "DeviceParams")
      .def(py::init([](double omega_a, double omega_b, double foerster, double biexciton, double drive,
                       double omega_laser, double gamma1, double gamma2, double gamma3, double eta, double k0_dr) {
             return model::DeviceParams{omega_a, omega_b, foerster, biexciton, drive, omega_laser,
                                        gamma1, gamma2, gamma3, eta, k0_dr};
           }),
           py::kw_only(), py::arg("omega_a") = kDefaults.omega_a, py::arg("omega_b") = kDefaults.omega_b,
           py::arg("foerster") = kDefaults.foerster, py::arg("biexciton") = kDefaults.biexciton,
           py::arg("drive") = kDefaults.drive, py::arg("omega_laser") = kDefaults.omega_laser,
           py::arg("gamma1") = kDefaults.gamma1, py::arg("gamma2") = kDefaults.gamma2,
           py::arg("gamma3") = kDefaults.gamma3, py::arg("eta") = kDefaults.eta, py::arg("k0_dr") = kDefaults.k0_dr,
           "Energies in meV, rates in 1/ps.")
      .def_readwrite("omega_a", &model::DeviceParams::omega_a)
      .def_readwrite("omega_b", &model::DeviceParams::omega_b)
      .def_readwrite("foerster", &model::DeviceParams::foerster)
      .def_readwrite("biexciton", &model::DeviceParams::biexciton)
      .def_readwrite("drive", &model::DeviceParams::drive)
      .def_readwrite("omega_laser", &model::DeviceParams::omega_laser)
      .def_readwrite("gamma1", &model::DeviceParams::gamma1)
      .def_readwrite("gamma2", &model::DeviceParams::gamma2)
      .def_readwrite("gamma3", &model::DeviceParams::gamma3)
      .def_readwrite("eta", &model::DeviceParams::eta)
      .def_readwrite("k0_dr", &model::DeviceParams::k0_dr)
      .def_property_readonly("delta", &model::DeviceParams::delta);

  m.def("validate_regime", [](const model::DeviceParams& p, double threshold) {
    py::list out;
    for (const auto& c : model::validate_regime(p, threshold).conditions)
      out.append(py::dict(py::arg("name") = c.name, py::arg("ratio") = c.ratio, py::arg("passed") = c.passed,
                          py::arg("resonant") = c.resonant));
    return out;
  }, py::arg("device"), py::arg("threshold") = 10.0);

  // parity measurement ------------------------------------------------------
  py::enum_<pr::PulseShape>(m, "PulseShape")
      .value("square", pr::PulseShape::square)
      .value("ideal", pr::PulseShape::ideal);
  py::enum_<pr::RegimePolicy>(m, "RegimePolicy")
      .value("ignore", pr::RegimePolicy::ignore)
      .value("warn", pr::RegimePolicy::warn)
      .value("reject", pr::RegimePolicy::reject);
  py::enum_<dynamics::Unraveling>(m, "Unraveling")
      .value("observed", dynamics::Unraveling::observed)
      .value("full", dynamics::Unraveling::full);
  py::enum_<pr::Verdict>(m, "Verdict").value("even", pr::Verdict::even).value("odd", pr::Verdict::odd);

  py::class_<pr::ParityOptions>(m, "ParityOptions")
      .def(py::init<>())
      .def_readwrite("mode", &pr::ParityOptions::mode)
      .def_readwrite("cycles", &pr::ParityOptions::cycles)
      .def_readwrite("pulse", &pr::ParityOptions::pulse)
      .def_readwrite("window", &pr::ParityOptions::window)
      .def_readwrite("unraveling", &pr::ParityOptions::unraveling)
      .def_readwrite("regime_policy", &pr::ParityOptions::regime_policy)
      .def_readwrite("regime_threshold", &pr::ParityOptions::regime_threshold)
      .def_readwrite("phase_correction", &pr::ParityOptions::phase_correction)
      .def_property(
          "dt", [](const pr::ParityOptions& o) { return o.integrator.dt; },
          [](pr::ParityOptions& o, double dt) { o.integrator.dt = dt; });

  py::class_<pr::ParityOutcome>(m, "ParityOutcome")
      .def_readonly("verdict", &pr::ParityOutcome::verdict)
      .def_property_readonly("photons", [](const pr::ParityOutcome& o) {
        py::list out;
        for (const auto& p : o.photons) out.append(py::make_tuple(p.time, p.cycle));
        return out;
      }, "(time_ps, cycle) of every detected photon")
      .def_readonly("cycles_executed", &pr::ParityOutcome::cycles_executed)
      .def_property_readonly("post_state", [](const pr::ParityOutcome& o) { return o.post_state.matrix(); })
      .def_readonly("leakage", &pr::ParityOutcome::leakage)
      .def_readonly("fidelity", &pr::ParityOutcome::fidelity);

  py::class_<pr::ParityStats>(m, "ParityStats")
      .def_readonly("runs", &pr::ParityStats::runs)
      .def_readonly("odd", &pr::ParityStats::odd)
      .def_readonly("even", &pr::ParityStats::even)
      .def_readonly("odd_fidelity", &pr::ParityStats::odd_fidelity)
      .def_readonly("odd_fidelity_stderr", &pr::ParityStats::odd_fidelity_stderr)
      .def_readonly("even_fidelity", &pr::ParityStats::even_fidelity)
      .def_readonly("even_fidelity_stderr", &pr::ParityStats::even_fidelity_stderr)
      .def_readonly("mean_leakage", &pr::ParityStats::mean_leakage)
      .def_readonly("photon_times", &pr::ParityStats::photon_times)
      .def_readonly("photon_cycles", &pr::ParityStats::photon_cycles);

  py::class_<pr::ParityMeasurement>(m, "ParityMeasurement")
      .def(py::init<model::DeviceParams, pr::ParityOptions>(), py::arg("device"),
           py::arg("options") = pr::ParityOptions{})
      .def_property_readonly("warnings", &pr::ParityMeasurement::warnings)
      .def("measure", [](const pr::ParityMeasurement& pm, const CVector& psi, std::uint64_t seed) {
        const hilbert::StateVector state(psi);
        py::gil_scoped_release release;
        return pm.measure(state, seed);
      }, py::arg("state"), py::arg("seed"), "State is a 4- or 9-component amplitude vector.")
      .def("no_detection_state", [](const pr::ParityMeasurement& pm, const CMatrix& rho) {
        return pm.no_detection_state(to_density(rho)).matrix();
      }, py::arg("rho"))
      .def("ensemble", [](const pr::ParityMeasurement& pm, const CVector& psi, int runs, std::uint64_t seed) {
        const hilbert::StateVector state(psi);
        py::gil_scoped_release release;
        return pr::run_parity_ensemble(pm, state, runs, seed);
      }, py::arg("state"), py::arg("runs"), py::arg("seed"));

  m.def("phase_correct", [](const CVector& psi, double delta, double t) {
    return pr::phase_correct(hilbert::StateVector(psi), delta, t).amplitudes();
  }, py::arg("state"), py::arg("delta"), py::arg("t_detect"));

  // processes -------------------------------------------------------------
  py::class_<pr::GateProcess>(m, "GateProcess")
      .def_readonly("labels", &pr::GateProcess::labels)
      .def_readonly("choi", &pr::GateProcess::choi)
      .def_readonly("probabilities", &pr::GateProcess::probabilities)
      .def_readonly("condition_number", &pr::GateProcess::condition_number)
      .def_readonly("min_choi_eigenvalue", &pr::GateProcess::min_choi_eigenvalue)
      .def("apply", [](const pr::GateProcess& g, const std::string& label, const CMatrix& rho) {
        return g.apply(g.index(label), rho);
      }, py::arg("label"), py::arg("rho"))
      .def("kraus", [](const pr::GateProcess& g, const std::string& label) { return g.kraus(g.index(label)); })
      .def("trace_preservation_defect", &pr::GateProcess::trace_preservation_defect);

  m.def("ideal_parity_process", &pr::ideal_parity_process);
  m.def("extract_parity_process", [](const model::DeviceParams& d, const pr::ParityOptions& o, int runs,
                                     std::uint64_t seed) {
    py::gil_scoped_release release;
    return pr::extract_parity_process(d, o, {runs, seed});
  }, py::arg("device"), py::arg("options"), py::arg("ensemble_size") = 2000, py::arg("seed") = 1);
  m.def("diamond_distance_bound", &pr::diamond_distance_bound);
  m.def("average_gate_fidelity", &pr::average_gate_fidelity, py::arg("choi"), py::arg("unitary"));
  m.def("choi_of_unitary", &pr::choi_of_unitary);
  m.def("cnot_matrix", &pr::cnot_matrix);
  m.def("cnot_compose", [](const pr::GateProcess& parity) {
    const auto r = pr::cnot_compose(parity);
    return py::dict(py::arg("choi") = r.choi, py::arg("average_gate_fidelity") = r.average_gate_fidelity,
                    py::arg("average_gate_fidelity_choi") = r.average_gate_fidelity_choi,
                    py::arg("branch_deviation") = r.branch_deviation,
                    py::arg("corrections") = r.construction.table());
  }, py::arg("parity"));

  // graph growth ----------------------------------------------------------
  m.def("expected_attempts", [](const std::string& strategy, int length, double p) {
    return pr::expected_attempts(pr::parse_growth_strategy(strategy), length, p);
  }, py::arg("strategy"), py::arg("chain_length"), py::arg("p"));
  m.def("grow_graph", [](const std::string& strategy, int length, double p, int runs, std::uint64_t seed,
                         long long max_attempts) {
    pr::GraphGrowthConfig g;
    g.strategy = pr::parse_growth_strategy(strategy);
    g.chain_length = length;
    g.p = p;
    g.runs = runs;
    g.max_attempts = max_attempts;
    py::gil_scoped_release release;
    return pr::grow_graph(g, seed).attempts;
  }, py::arg("strategy"), py::arg("chain_length"), py::arg("p"), py::arg("runs"), py::arg("seed"),
     py::arg("max_attempts") = 100'000'000LL, "Attempt counts of the completed runs.");

  // experiments -----------------------------------------------------------
  m.def("run", [](const std::string& command, const std::string& config_text, std::optional<std::uint64_t> seed) {
    const auto cfg = make_config(config_text, seed);
    ex::Report r;
    {
      py::gil_scoped_release release;
      r = ex::run_command(command, cfg);
    }
    return report_dict(r);
  }, py::arg("command"), py::arg("config") = "", py::arg("seed") = py::none(),
     "Runs a named experiment; config is INI text as accepted by the command-line tool.");
  m.def("run_to_files", [](const std::string& command, const std::filesystem::path& out, const std::string& config_text,
                           std::optional<std::uint64_t> seed, const std::string& format) {
    const auto cfg = make_config(config_text, seed);
    py::gil_scoped_release release;
    return ex::write_report(ex::run_command(command, cfg), out, format, cfg.label);
  }, py::arg("command"), py::arg("out"), py::arg("config") = "", py::arg("seed") = py::none(),
     py::arg("format") = "csv");
}
