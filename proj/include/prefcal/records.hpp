#ifndef PREFCAL_RECORDS_HPP
#define PREFCAL_RECORDS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefcal/core.hpp"
#include "prefcal/estimate.hpp"
#include "prefcal/rlsim.hpp"

namespace prefcal {

/// One line of a predictions file; p_orig may be absent when only raw model
/// text is available (it is then recovered through the parser).
struct PredictionLine {
  std::string id;
  std::optional<double> p_orig;
  std::optional<double> p_swap;
  std::optional<double> z_a;
  std::optional<double> z_b;
  std::optional<std::string> raw_text;
};

/// Raised for malformed record files; carries the 1-based line number.
class RecordParseError : public std::runtime_error {
 public:
  RecordParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Line-delimited JSON comparison records. Vote entries may be 0, 1, 0.5 or
/// "tie"; a tie is expanded into one 0 vote and one 1 vote so downstream
/// arithmetic stays exact.
std::vector<ComparisonInstance> read_comparisons(const std::string& path);
void write_comparisons(const std::string& path,
                       std::span<const ComparisonInstance> instances);

std::vector<PredictionLine> read_predictions(const std::string& path);
void write_predictions(const std::string& path,
                       std::span<const PredictionLine> lines);

/// FNV-1a digest of a file's bytes, hex-encoded; used in run manifests.
std::string file_digest(const std::string& path);

/// Reproducibility sidecar written by every CLI command.
struct RunManifest {
  std::string command;
  std::string config_json;  // flag/config snapshot, serialized
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;
  std::string version;
  std::string started_at;
  std::string finished_at;
};
void write_manifest(const RunManifest& manifest, const std::string& path);

/// Population config file: {"contexts": N, "law": "grid" | {"beta": [a,b]},
/// "m": votes per context, "seed": S, "model": "stable" |
/// {"noisy": concentration}}.
PopulationSpec load_population_spec(const std::string& path);

/// Simulation config file: GRPO hyperparameters plus grid step, policy init
/// and consistency tolerances.
struct SimulationSpec {
  GrpoConfig grpo;
  double grid_step = 0.01;
  PolicyInit init = PolicyInit::uniform();
  ConsistencyTolerances tolerances;
  bool tolerances_explicit = false;
};
SimulationSpec load_simulation_spec(const std::string& path);

extern const char* const kToolkitVersion;

}  // namespace prefcal

#endif  // PREFCAL_RECORDS_HPP
