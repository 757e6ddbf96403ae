#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddspec/io.hpp"

namespace ddspec::cli {

namespace fs = std::filesystem;

/// Overrides shared by the config-driven commands. Set values are written
/// back into the config, so the embedded copy reproduces the run.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<int>> harmonics;
  std::optional<int> l_max;
  std::optional<int> n_min;
};

/// Reads a run config. A CSV output or a JSON output with a "config" member
/// yields the config it embeds.
Json load_config(const fs::path& path);

/// Relative output paths land under DDSPEC_OUT_DIR when it is set.
fs::path output_path(const fs::path& path);

int cmd_simulate(Json config, const Overrides& ov, const fs::path& out_dir, int threads);
int cmd_pipeline(Json config, const Overrides& ov, const fs::path& out_dir, int threads);

int cmd_filter(const fs::path& seq, const std::string& omega_khz, const std::optional<fs::path>& out);
int cmd_oracle(const fs::path& bath, const fs::path& seq, const std::optional<std::string>& grid,
               const std::optional<fs::path>& out, int threads);
int cmd_scan_plan(double nu_l_khz, const std::vector<int>& harmonics, double window_khz, int points,
                  const std::optional<fs::path>& out);

struct ReconstructArgs {
  fs::path traces;
  std::vector<int> harmonics = {1, 2};
  int l_max = 2;
  int n_min = 8;
  std::optional<double> b_field;
  std::optional<double> fixed_nu_khz;
  fs::path out = "model.json";
};
int cmd_reconstruct(const ReconstructArgs& args);

struct NucleiArgs {
  fs::path traces;
  double b_field = 0.0;
  std::optional<fs::path> model;
  double threshold = 0.3;
  int ms = -1;
  fs::path out = "couplings.json";
  int threads = 1;
};
int cmd_nuclei(const NucleiArgs& args);

int cmd_fit_direct(const fs::path& traces, const fs::path& model, const std::optional<fs::path>& out,
                   int threads);

struct ValidateArgs {
  fs::path model;
  std::optional<fs::path> model2;
  fs::path traces;
  std::optional<fs::path> report;
  int low_max = 8;
  int high_min = 20;
  int threads = 1;
};
int cmd_validate(const ValidateArgs& args);

/// "a:b:n" (n points from a to b) or "a,b,c".
std::vector<double> parse_grid(const std::string& text, const std::string& what);

}  // namespace ddspec::cli
