#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ddspec/model.hpp"
#include "ddspec/oracle.hpp"
#include "ddspec/sequences.hpp"
#include "ddspec/spectroscopy.hpp"

namespace ddspec {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Every parser takes `where`, the path of the node inside its document, and
// reports schema problems as InvalidArgument("where.field: ...").

Json nsd_to_json(const Nsd& nsd);
Nsd nsd_from_json(const Json& j, const std::string& where = "nsd");

/// Environment model in boundary units (G, kHz, 1/ms). Unknown keys are ignored.
Json env_to_json(const EnvironmentModel& env);
EnvironmentModel env_from_json(const Json& j, const std::string& where = "model");

Json coupling_to_json(const NuclearCoupling& c);
NuclearCoupling coupling_from_json(const Json& j, const std::string& where);

Json sequence_spec_to_json(const SequenceSpec& spec);
SequenceSpec sequence_spec_from_json(const Json& j, const std::string& where = "sequence");

/// Either explicit spins {"omega0_khz", "spins": [...]} or
/// {"omega0_khz", "random": {"count", "ratio", "par_ratio", "fixed_magnitude", "seed"}}.
Json bath_to_json(const SpinBath& bath);
SpinBath bath_from_json(const Json& j, const std::string& where = "bath");

/// Fitted NSD with one-sigma errors, boundary units.
Json nsd_fit_to_json(const FitResult<GaussianNsd>& fit);
Json coupling_fit_to_json(const FitResult<NuclearCoupling>& fit);

/// CSV with header family,t1_us,n,total_time_us,p,sigma_p. Optional leading
/// comment lines: "# config: {...}" (the run configuration) and
/// "# trace: {...}" (label, r_m, harmonic).
std::string trace_to_csv(const CoherenceTrace& trace, const Json* config = nullptr);
CoherenceTrace trace_from_csv(std::string_view text, const std::string& source);

CoherenceTrace read_trace(const std::filesystem::path& path);
/// All *.csv traces in a directory, sorted by file name.
std::vector<CoherenceTrace> read_trace_dir(const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory and renames it into
/// place, so a failed run never leaves a partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// The "# config: {...}" line a CSV file carries, or null.
Json embedded_config(std::string_view csv_text);

/// FNV-1a over the compact dump; identifies a configuration in outputs.
std::string config_hash(const Json& config);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace ddspec
