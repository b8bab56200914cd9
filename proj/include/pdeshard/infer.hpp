#pragma once

#include <chrono>
#include <filesystem>
#include <vector>

#include "pdeshard/exchange.hpp"
#include "pdeshard/field.hpp"
#include "pdeshard/neural.hpp"
#include "pdeshard/partition.hpp"

namespace pdeshard::infer {

struct RolloutConfig {
  int steps = 10;
  nn::PaddingStrategy strategy = nn::PaddingStrategy::ZeroInner;
  int record_every = 1;
  std::chrono::milliseconds timeout = std::chrono::seconds(30);
  std::uint32_t first_index = 0;  // time index of the initial frame, copied into the output
};

struct StepResult {
  std::vector<Tensor3> states;  // core tensors, indexed by rank
  std::vector<LedgerEntry> ledger;
};

/// One bulk-synchronous step: every rank sends its 8 halo strips to its
/// neighbors, builds its halo-extended input from what it receives (zeros
/// at the physical boundary) and predicts its core at t+1.
StepResult predict_step_parallel(const std::vector<Tensor3>& states, const std::vector<nn::ConvNet>& nets,
                                 const Partition& p, nn::PaddingStrategy strategy,
                                 std::chrono::milliseconds timeout = std::chrono::seconds(30));

struct RolloutResult {
  Dataset frames;  // frame 0 is the initial state
  std::vector<LedgerEntry> ledger;
  std::uint64_t messages = 0;
};

/// Autoregressive rollout with one thread per rank. Throws NumericError
/// naming the step and rank if a prediction goes non-finite.
RolloutResult rollout(const Snapshot& initial, const std::vector<nn::ConvNet>& nets, const Partition& p,
                      const RolloutConfig& cfg);

/// Whole-grid forward with zero padding at every layer.
Snapshot predict_monolithic(const Snapshot& x, const nn::ConvNet& net);

/// Whole-grid forward of the all-Valid network on the field zero-padded by
/// the exact halo width; the reference for exact-halo parallel inference.
Tensor3 predict_monolithic_valid(const Tensor3& x, const nn::ConvNet& net);

struct MetricRow {
  int step = 0;
  int channel = 0;
  double mape_percent = 0.0;
  double max_abs_err = 0.0;
};

/// Per-frame, per-channel MAPE and max-abs error. `step` is the index of
/// the frame within `pred`.
std::vector<MetricRow> evaluate(const Dataset& pred, const Dataset& truth, double delta = nn::kMapeDelta);

/// Frames of `truth` at the time indices of `pred` (via first_index/stride).
Dataset align_truth(const Dataset& pred, const Dataset& truth);

inline constexpr std::string_view kMetricsHeader = "step,channel,mape_percent,max_abs_err";
void write_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);

/// Directed messages per step grouped by step index.
std::vector<std::size_t> messages_per_step(const std::vector<LedgerEntry>& ledger, std::size_t steps);

}  // namespace pdeshard::infer
