#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pdeshard/checkpoint.hpp"
#include "pdeshard/field.hpp"
#include "pdeshard/neural.hpp"
#include "pdeshard/partition.hpp"

namespace pdeshard::train {

// Half-open frame index range [begin, end).
struct FrameRange {
  int begin = 0;
  int end = 0;
  int size() const noexcept { return end - begin; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  FrameRange train_range{0, 1000};
  FrameRange val_range{1000, 1500};
  std::uint64_t seed = 42;
  nn::PaddingStrategy strategy = nn::PaddingStrategy::ZeroInner;
  nn::AdamHyper adam;
  double delta = nn::kMapeDelta;
  int px = 2;
  int py = 2;

  /// Checks ranges against a dataset of `frames` frames. A pair (t, t+1)
  /// is formed for every t in train_range, so frame train_range.end must
  /// exist.
  void validate(std::size_t frames) const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct Sample {
  Tensor3 input;   // halo-extended frame t
  Tensor3 target;  // core of frame t+1
};

using Shard = std::vector<Sample>;

struct ShardedSamples {
  std::vector<Shard> per_rank;
};

/// (input, target) pairs for every rank and every t in `range`.
ShardedSamples shard_dataset(const Dataset& d, const Partition& p, FrameRange range);
inline ShardedSamples shard_dataset(const Dataset& d, const Partition& p, const TrainConfig& cfg) {
  return shard_dataset(d, p, cfg.train_range);
}

/// Seed owned by one rank; independent of how ranks map onto workers.
constexpr std::uint64_t rank_seed(std::uint64_t seed, int rank) noexcept {
  return seed ^ static_cast<std::uint64_t>(rank);
}

struct RankResult {
  nn::ConvNet net;
  nn::AdamState adam;
  std::vector<double> loss_curve;  // mean training MAPE per epoch, percent
  double seconds = 0.0;
  double cpu_seconds = 0.0;  // CPU time of the training thread
};

/// Trains one network on one shard: per epoch, shuffle with the rank RNG,
/// average gradients over each batch and take one ADAM step per batch.
/// Throws NumericError naming the epoch and batch on a non-finite loss.
RankResult train_rank(const Shard& shard, nn::ConvNet net, const TrainConfig& cfg, std::uint64_t seed);

struct TrainReport {
  std::vector<std::vector<double>> loss_curves;
  std::vector<double> rank_seconds;
  std::vector<double> rank_cpu_seconds;  // per-rank work, unaffected by time sharing
  std::vector<int> rank_worker;  // worker that trained each rank
  std::uint64_t messages = 0;    // rank-to-rank messages; 0 by construction
  int workers = 1;
  bool oversubscribed = false;   // workers exceeded hardware threads
  double shard_seconds = 0.0;
  double train_seconds = 0.0;    // wall time of the training phase only
};

struct TrainResult {
  std::vector<nn::Checkpoint> models;  // indexed by rank
  TrainReport report;
};

/// Worker pool size: PDESHARD_WORKERS if set, else hardware concurrency.
int default_workers();

/// Trains every rank independently on min(ranks, workers) threads; ranks
/// are dealt round-robin to workers. Results are bit-identical for any
/// worker count. Worker failures surface as WorkerError with the rank id.
TrainResult train_sharded(const ShardedSamples& shards, const Partition& p, const TrainConfig& cfg, int workers);
TrainResult train_parallel(const Dataset& d, const Partition& p, const TrainConfig& cfg, int workers);

/// Mean single-step MAPE of `net` over a shard.
double evaluate_shard(const nn::ConvNet& net, const Shard& shard, nn::PaddingStrategy s, double delta);

// ---- run directory --------------------------------------------------------
//
//   config.json        train config + partition
//   rank_<r>.ckpt      checkpoint per rank
//   loss.csv           rank,epoch,loss
//   timing.csv         rank,worker,seconds,cpu_seconds

struct LoadedRun {
  TrainConfig cfg;
  Partition partition;
  std::vector<nn::Checkpoint> models;
};

void write_run(const std::filesystem::path& dir, const Partition& p, const TrainConfig& cfg,
               const TrainResult& result);
LoadedRun load_run(const std::filesystem::path& dir);

std::string_view to_string(nn::PaddingStrategy s) noexcept;
/// Accepts "zero-inner" or "exact-halo".
nn::PaddingStrategy parse_strategy(std::string_view s);

}  // namespace pdeshard::train
