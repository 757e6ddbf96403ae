#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "ddspec/error.hpp"

using namespace ddspec;
using namespace ddspec::cli;

namespace {

constexpr int kUsageError = 1;
constexpr int kNumericalError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamical-decoupling noise spectroscopy: simulate, reconstruct, validate"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for grid work (0 = all cores)")->check(CLI::NonNegativeNumber);

  Overrides ov;
  auto add_overrides = [&](CLI::App* sub, bool pipeline) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { ov.seed = s; },
                                            "Noise seed (overrides the config)");
    if (!pipeline) return;
    sub->add_option_function<std::vector<int>>(
           "--harmonics", [&](const std::vector<int>& h) { ov.harmonics = h; }, "Filter harmonics l to scan")
        ->delimiter(',');
    sub->add_option_function<int>("--l-max", [&](const int& l) { ov.l_max = l; }, "Comb terms in the NSD fit");
    sub->add_option_function<int>("--n-min", [&](const int& n) { ov.n_min = n; }, "Smallest n used for T2L");
  };

  // simulate
  std::string sim_config;
  std::string sim_out = ".";
  auto* simulate = app.add_subcommand("simulate", "Simulate coherence traces from a config");
  simulate->add_option("--config", sim_config, "Run config (JSON, or an output embedding one)")->required();
  simulate->add_option("--out", sim_out, "Output directory");
  add_overrides(simulate, false);

  // pipeline
  std::string pipe_config;
  std::string pipe_out = ".";
  auto* pipeline = app.add_subcommand("pipeline", "Scan, fit T2L, reconstruct the NSD and validate");
  pipeline->add_option("--config", pipe_config, "Run config")->required();
  pipeline->add_option("--out", pipe_out, "Output directory");
  add_overrides(pipeline, true);

  // filter
  std::string filter_seq, omega_grid;
  std::optional<std::string> filter_out;
  auto* filter = app.add_subcommand("filter", "Tabulate |Y(omega)|^2 for a sequence");
  filter->add_option("--seq", filter_seq, "Sequence spec JSON")->required();
  filter->add_option("--omega-khz", omega_grid, "Grid: from:to:points or a comma list")->required();
  filter->add_option("--out", filter_out, "Output CSV (stdout if absent)");

  // oracle
  std::string oracle_bath, oracle_seq;
  std::optional<std::string> oracle_grid, oracle_out;
  auto* oracle = app.add_subcommand("oracle", "Exact spin-bath coherence against first-order Magnus");
  oracle->add_option("--bath", oracle_bath, "Bath JSON")->required();
  oracle->add_option("--seq", oracle_seq, "Sequence spec JSON")->required();
  oracle->add_option("--grid", oracle_grid, "Sweep t1 (equidistant) or total time (other families), us");
  oracle->add_option("--out", oracle_out, "Output CSV (stdout if absent)");

  // scan-plan
  double plan_nu = 0.0, plan_b = 0.0, plan_window = 60.0;
  int plan_points = 41;
  std::vector<int> plan_harmonics = {1, 2};
  std::optional<std::string> plan_out;
  auto* plan = app.add_subcommand("scan-plan", "t1 values centering filter harmonics on the Larmor line");
  auto* nu_opt = plan->add_option("--nu-khz", plan_nu, "Line center, kHz");
  auto* b_opt = plan->add_option("--b-field", plan_b, "Bias field, G (center at the 13C Larmor frequency)");
  nu_opt->excludes(b_opt);
  plan->add_option("--harmonics", plan_harmonics, "Harmonics l")->delimiter(',');
  plan->add_option("--window-khz", plan_window, "Half window, kHz");
  plan->add_option("--points", plan_points, "Points per window");
  plan->add_option("--out", plan_out, "Output CSV (stdout if absent)");

  // reconstruct
  ReconstructArgs rec;
  std::string rec_traces, rec_out = "model.json";
  auto* reconstruct = app.add_subcommand("reconstruct", "Method 1: T2L per trace, comb fit of the NSD");
  reconstruct->add_option("--traces", rec_traces, "Directory of trace CSVs")->required();
  reconstruct->add_option("--harmonics", rec.harmonics, "Harmonics to use")->delimiter(',');
  reconstruct->add_option("--l-max", rec.l_max, "Comb terms");
  reconstruct->add_option("--n-min", rec.n_min, "Smallest n used for T2L");
  reconstruct->add_option("--b-field", rec.b_field, "Bias field written to the model, G");
  reconstruct->add_option("--fixed-nu-khz", rec.fixed_nu_khz, "Hold the line center");
  reconstruct->add_option("--out", rec_out, "Model JSON");

  // nuclei
  NucleiArgs nuc;
  std::string nuc_traces, nuc_out = "couplings.json";
  std::optional<std::string> nuc_model;
  auto* nuclei = app.add_subcommand("nuclei", "Detect and fit resolved 13C couplings");
  nuclei->add_option("--traces", nuc_traces, "Directory of equidistant trace CSVs")->required();
  nuclei->add_option("--b-field", nuc.b_field, "Bias field, G")->required();
  nuclei->add_option("--model", nuc_model, "Model JSON supplying the noise spectrum");
  nuclei->add_option("--threshold", nuc.threshold, "Peak threshold, fraction of the largest amplitude");
  nuclei->add_option("--ms", nuc.ms, "Electron spin projection")->check(CLI::IsMember({-1, 1}));
  nuclei->add_option("--out", nuc_out, "Couplings JSON");

  // fit-direct
  std::string fd_traces, fd_model;
  std::optional<std::string> fd_out;
  auto* fit_direct = app.add_subcommand("fit-direct", "Method 2: simultaneous NSD fit over all traces");
  fit_direct->add_option("--traces", fd_traces, "Directory of trace CSVs")->required();
  fit_direct->add_option("--model", fd_model, "Model JSON: nuclei, field and initial NSD")->required();
  fit_direct->add_option("--out", fd_out, "Model JSON (default model2.json)");

  // validate
  ValidateArgs val;
  std::string val_model, val_traces;
  std::optional<std::string> val_model2, val_report;
  auto* validate = app.add_subcommand("validate", "Score one or two models on low-n and high-n data");
  validate->add_option("--model", val_model, "Method 1 model")->required();
  validate->add_option("--model2", val_model2, "Method 2 model (defaults to --model)");
  validate->add_option("--traces", val_traces, "Directory of trace CSVs")->required();
  validate->add_option("--report", val_report, "Report JSON");
  validate->add_option("--low-max", val.low_max, "Low-n group: n below this");
  validate->add_option("--high-min", val.high_min, "High-n group: n at least this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*simulate) return cmd_simulate(load_config(sim_config), ov, sim_out, threads);
    if (*pipeline) return cmd_pipeline(load_config(pipe_config), ov, pipe_out, threads);
    if (*filter) return cmd_filter(filter_seq, omega_grid, filter_out);
    if (*oracle) return cmd_oracle(oracle_bath, oracle_seq, oracle_grid, oracle_out, threads);
    if (*plan) {
      if (!*nu_opt && !*b_opt) throw InvalidArgument("scan-plan: give --nu-khz or --b-field");
      const double nu = *nu_opt ? plan_nu : angular_to_khz(larmor(plan_b));
      return cmd_scan_plan(nu, plan_harmonics, plan_window, plan_points, plan_out);
    }
    if (*reconstruct) {
      rec.traces = rec_traces;
      rec.out = rec_out;
      return cmd_reconstruct(rec);
    }
    if (*nuclei) {
      nuc.traces = nuc_traces;
      nuc.out = nuc_out;
      if (nuc_model) nuc.model = *nuc_model;
      nuc.threads = threads;
      return cmd_nuclei(nuc);
    }
    if (*fit_direct) return cmd_fit_direct(fd_traces, fd_model, fd_out, threads);
    if (*validate) {
      val.model = val_model;
      if (val_model2) val.model2 = *val_model2;
      val.traces = val_traces;
      if (val_report) val.report = *val_report;
      val.threads = threads;
      return cmd_validate(val);
    }
  } catch (const NumericalError& e) {
    std::cerr << "ddspec: numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const InvalidArgument& e) {
    std::cerr << "ddspec: " << e.what() << "\n";
    return kUsageError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "ddspec: config: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "ddspec: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}
