#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vc/lmpc.hpp"
#include "vc/metrics.hpp"
#include "vc/sim.hpp"

namespace vc {

/// File loaders. Paths inside a scenario file resolve relative to the file.
TrainParams load_train(const std::string& path);
LineProfile load_line(const std::string& path);
ScenarioConfig load_scenario(const std::string& path);

/// Writes a scenario with the line and trains inlined, so a run directory
/// stays readable after the referenced files change.
void save_scenario(const std::string& path, const ScenarioConfig& sc);

/// FNV-1a over the canonical text of line, train parameters, and controller
/// config. Learning assignment and iteration count do not enter: stored
/// trajectories stay valid across those.
std::uint64_t scenario_hash(const ScenarioConfig& sc);

/// Per-step CSV, one row per control period, shortest round-trip number
/// formatting; parsing back reproduces every double bitwise.
void write_steps_csv(const std::string& path, const IterationLog& log);

struct LoadedSteps {
  int n_trains = 0;
  std::vector<StepRecord> steps;
  std::vector<IterationTrace> traces;
};
LoadedSteps read_steps_csv(const std::string& path);

/// One stored iteration per train, tagged with the scenario hash.
void write_safe_set_entry(const std::string& path, std::uint64_t config_hash,
                          int iteration_id,
                          const std::vector<std::string>& train_names,
                          const std::vector<const StoredIteration*>& entries);

/// Loads the per-train entries of one file, rejecting a stale hash.
struct SafeSetEntry {
  int iteration_id = 0;
  std::vector<std::string> train_names;
  std::vector<StoredIteration> entries;
};
SafeSetEntry read_safe_set_entry(const std::string& path,
                                 std::uint64_t expected_hash);

/// summary.json body: a deterministic "metrics" subtree recomputable from
/// steps.csv plus a wall-clock "timing" subtree outside the determinism
/// contract. Returned as serialized JSON text.
std::string summary_text(const ScenarioConfig& sc, const IterationLog& log,
                         const MetricsReport& report);

/// The "metrics" subtree alone, serialized; recomputing a report from a
/// written steps.csv yields byte-identical text.
std::string metrics_json_text(const MetricsReport& report);

/// Writes the whole run directory layout:
///   <out_dir>/scenario.json
///   <out_dir>/iter_NN/steps.csv, summary.json, safe_set.json (completed only)
void write_run(const std::string& out_dir, const ScenarioConfig& sc,
               const ScenarioResult& result);

/// Reads a run directory back for reporting.
struct LoadedRun {
  ScenarioConfig scenario;
  std::vector<LoadedSteps> iterations;     // index = iteration id
  std::vector<bool> completed;
  std::vector<std::string> summaries;      // raw summary.json text
};
LoadedRun load_run(const std::string& run_dir);

/// Rebuilds the per-iteration report from loaded steps, identically to the
/// in-process path.
MetricsReport report_from_steps(const ScenarioConfig& sc, const LoadedSteps& steps,
                                const std::vector<SpeedProfile>& profiles);

}  // namespace vc
