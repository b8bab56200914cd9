#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdeshard/field.hpp"
#include "pdeshard/manifest.hpp"
#include "pdeshard/train.hpp"

namespace pdeshard::bench {

struct ScalingRow {
  int worker_count = 1;
  int rank_count = 1;
  int grid_n = 0;
  double total_train_seconds = 0.0;
  double per_rank_max_seconds = 0.0;
  double per_rank_max_cpu_seconds = 0.0;  // not written to the CSV
  double speedup = 1.0;     // T(1) / T(w)
  double efficiency = 1.0;  // speedup / w
  bool oversubscribed = false;
};

// Wall time of one labeled phase ("shard" or "train") at one worker count.
struct PhaseTiming {
  std::string phase;
  int worker_count = 1;
  double seconds = 0.0;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  std::vector<PhaseTiming> phases;
};

inline constexpr std::string_view kScalingHeader =
    "worker_count,rank_count,grid_n,total_train_seconds,per_rank_max_seconds,speedup,efficiency,oversubscribed";

/// px x py with px * py == w, px >= py and px <= 2 py (square or 2:1).
/// Throws ConfigError when no such split exists.
std::pair<int, int> decomposition_for(int w);

/// Strong scaling: for each w, decompose the fixed grid into w ranks and
/// train them on w workers with identical seeds and epochs. Only the
/// training phase is timed into the rows; sharding is timed separately.
/// The first entry of worker_counts must be 1 (the speedup baseline).
ScalingResult run_scaling(const Dataset& d, const std::vector<int>& worker_counts, const train::TrainConfig& cfg);

void write_scaling_csv(const ScalingResult& r, const std::filesystem::path& path);

/// Sets a SolverConfig field from its flag/manifest name (n, t_steps,
/// extent, gamma, ...). Returns false for an unknown key.
bool apply_solver_key(SolverConfig& cfg, const std::string& key, const std::string& value);

// Runs the stages present in the manifest, in order generate, train,
// infer, compare. Artifacts land in [run] dir:
//   dataset.bin  run/  pred.bin  metrics.csv
//   manifest.txt  manifest.hash  status.txt (one "stage: ok|failed: ..." per line)
// A failing stage stops the pipeline and is recorded in status.txt before
// the error propagates; earlier artifacts are kept.
std::filesystem::path run_experiment(const Manifest& manifest, const std::filesystem::path& fallback_dir = "run");

}  // namespace pdeshard::bench
