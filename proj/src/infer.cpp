#include "pdeshard/infer.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "pdeshard/error.hpp"

namespace pdeshard::infer {

namespace {

// One rank's part of an exchange step.
Tensor3 exchange_and_predict(int rank, const Tensor3& state, const nn::ConvNet& net, const Partition& p,
                             nn::PaddingStrategy strategy, ExchangeFabric& fabric, std::uint64_t step) {
  const SubdomainSpec& spec = p.ranks[rank];
  const int halo = nn::halo_width(strategy);
  const auto strips = halo_strips(state, halo);
  for (Direction d : kAllDirections) {
    const int to = spec.neighbor(d);
    if (to != kBoundary) fabric.send(rank, to, d, step, strips[static_cast<int>(d)]);
  }
  std::array<std::optional<Tensor3>, kNumDirections> received;
  for (Direction d : kAllDirections) {
    const int from = spec.neighbor(d);
    if (from == kBoundary) continue;
    HaloMessage msg = fabric.receive(rank, from, step);
    if (msg.direction != mirror(d))
      throw Error("rank " + std::to_string(rank) + ": halo from rank " + std::to_string(from) +
                  " arrived with direction " + std::string(to_string(msg.direction)));
    received[static_cast<int>(d)] = std::move(msg.strip);
  }
  return nn::net_forward(with_halo(state, received, halo), net, strategy);
}

void check_inputs(const std::vector<Tensor3>& states, const std::vector<nn::ConvNet>& nets, const Partition& p,
                  nn::PaddingStrategy strategy) {
  if (static_cast<int>(nets.size()) != p.rank_count())
    throw ConfigError("inference: " + std::to_string(nets.size()) + " networks for " +
                      std::to_string(p.rank_count()) + " ranks");
  if (strategy != p.strategy) throw ConfigError("inference: strategy does not match the partition");
  if (p.rank_count() > 1)
    for (const auto& s : p.ranks)
      if (s.core.rows < p.halo || s.core.cols < p.halo)
        throw ConfigError("inference: halo " + std::to_string(p.halo) + " wider than the " +
                          std::to_string(s.core.rows) + "x" + std::to_string(s.core.cols) +
                          " cores; use fewer subdomains");
  if (static_cast<int>(states.size()) != p.rank_count())
    throw ShapeError("inference: need one state per rank");
  for (const auto& s : p.ranks) {
    const Tensor3& t = states[s.rank];
    if (t.c() != kNumChannels || t.h() != s.core.rows || t.w() != s.core.cols)
      throw ShapeError("inference: rank " + std::to_string(s.rank) + " state is not core-sized");
  }
}

// Rethrows the root-cause failure. Ranks that merely saw the exchange
// aborted are skipped in favor of the rank that actually failed.
void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (int pass = 0; pass < 2; ++pass)
    for (std::size_t r = 0; r < errors.size(); ++r) {
      if (!errors[r]) continue;
      try {
        std::rethrow_exception(errors[r]);
      } catch (const ExchangeAborted& e) {
        if (pass == 1) throw WorkerError(static_cast<int>(r), e.what());
      } catch (const NumericError&) {
        throw;
      } catch (const ExchangeTimeout&) {
        throw;
      } catch (const std::exception& e) {
        throw WorkerError(static_cast<int>(r), e.what());
      }
    }
}

}  // namespace

StepResult predict_step_parallel(const std::vector<Tensor3>& states, const std::vector<nn::ConvNet>& nets,
                                 const Partition& p, nn::PaddingStrategy strategy,
                                 std::chrono::milliseconds timeout) {
  check_inputs(states, nets, p, strategy);
  const int ranks = p.rank_count();
  ExchangeFabric fabric(ranks, timeout);
  StepResult out;
  out.states.resize(ranks);
  std::vector<std::exception_ptr> errors(ranks);
  {
    std::vector<std::jthread> threads;
    for (int r = 0; r < ranks; ++r) {
      threads.emplace_back([&, r] {
        try {
          out.states[r] = exchange_and_predict(r, states[r], nets[r], p, strategy, fabric, 0);
        } catch (...) {
          errors[r] = std::current_exception();
          fabric.abort();
        }
      });
    }
  }
  rethrow_first(errors);
  out.ledger = fabric.ledger();
  return out;
}

RolloutResult rollout(const Snapshot& initial, const std::vector<nn::ConvNet>& nets, const Partition& p,
                      const RolloutConfig& cfg) {
  if (cfg.steps < 0) throw ConfigError("rollout: steps must be >= 0");
  if (cfg.record_every < 1) throw ConfigError("rollout: record_every must be >= 1");
  if (initial.h() != p.global_h || initial.w() != p.global_w)
    throw ShapeError("rollout: initial frame does not match partition grid");

  const int ranks = p.rank_count();
  std::vector<Tensor3> states = split(initial.tensor(), p);
  check_inputs(states, nets, p, cfg.strategy);

  RolloutResult out;
  out.frames.stride = static_cast<std::uint32_t>(cfg.record_every);
  out.frames.first_index = cfg.first_index;
  out.frames.frames.push_back(initial);

  ExchangeFabric fabric(ranks, cfg.timeout);
  std::vector<std::exception_ptr> errors(ranks);
  std::atomic<bool> failed{false};
  std::mutex record_mu;
  int step = 0;

  // Runs once per step after every rank has stored its new core.
  auto on_step = [&]() noexcept {
    ++step;
    if (failed.load() || step % cfg.record_every != 0) return;
    try {
      out.frames.frames.push_back(Snapshot(assemble(states, p)));
    } catch (...) {
      std::lock_guard lock(record_mu);
      if (!errors[0]) errors[0] = std::current_exception();
      failed.store(true);
    }
  };
  std::barrier sync(ranks, on_step);

  {
    std::vector<std::jthread> threads;
    for (int r = 0; r < ranks; ++r) {
      threads.emplace_back([&, r] {
        for (int s = 0; s < cfg.steps; ++s) {
          if (failed.load()) {
            sync.arrive_and_drop();
            return;
          }
          try {
            Tensor3 next = exchange_and_predict(r, states[r], nets[r], p, cfg.strategy, fabric,
                                                static_cast<std::uint64_t>(s));
            if (!next.all_finite())
              throw NumericError("rollout: non-finite prediction at step " + std::to_string(s + 1) + " on rank " +
                                 std::to_string(r));
            // Neighbors may still be reading the old strips only through
            // their own copies, so the state can be replaced here.
            states[r] = std::move(next);
          } catch (...) {
            {
              std::lock_guard lock(record_mu);
              if (!errors[r]) errors[r] = std::current_exception();
            }
            failed.store(true);
            fabric.abort();
            sync.arrive_and_drop();
            return;
          }
          sync.arrive_and_wait();
        }
      });
    }
  }

  rethrow_first(errors);

  out.ledger = fabric.ledger();
  out.messages = fabric.message_count();
  return out;
}

Snapshot predict_monolithic(const Snapshot& x, const nn::ConvNet& net) {
  constexpr std::array<nn::PadMode, nn::kNumLayers> plan = {nn::PadMode::ZeroSame, nn::PadMode::ZeroSame,
                                                            nn::PadMode::ZeroSame, nn::PadMode::ZeroSame};
  return Snapshot(nn::net_forward(x.tensor(), net, plan));
}

Tensor3 predict_monolithic_valid(const Tensor3& x, const nn::ConvNet& net) {
  const int halo = nn::halo_width(nn::PaddingStrategy::ExactHalo);
  const Tensor3 padded =
      slice_region(x, -halo, -halo, x.h() + 2 * halo, x.w() + 2 * halo, OutOfBoundsPolicy::ZeroFill);
  return nn::net_forward(padded, net, nn::PaddingStrategy::ExactHalo);
}

std::vector<MetricRow> evaluate(const Dataset& pred, const Dataset& truth, double delta) {
  if (pred.size() != truth.size()) throw ShapeError("evaluate: frame counts differ");
  std::vector<MetricRow> rows;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const Tensor3& a = pred.frames[f].tensor();
    const Tensor3& b = truth.frames[f].tensor();
    if (!a.same_shape(b)) throw ShapeError("evaluate: frame " + std::to_string(f) + " shapes differ");
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const auto pa = a.plane(ch);
      const auto pb = b.plane(ch);
      double sum = 0.0;
      double mx = 0.0;
      for (std::size_t j = 0; j < pa.size(); ++j) {
        const double e = std::abs(pa[j] - pb[j]);
        sum += e / (std::abs(pb[j]) + delta);
        mx = std::max(mx, e);
      }
      rows.push_back({static_cast<int>(f), ch, 100.0 * sum / static_cast<double>(pa.size()), mx});
    }
  }
  return rows;
}

Dataset align_truth(const Dataset& pred, const Dataset& truth) {
  Dataset out;
  out.dt = truth.dt;
  out.meta = truth.meta;
  out.first_index = pred.first_index;
  out.stride = pred.stride;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const std::size_t t = pred.first_index + f * pred.stride;
    const std::size_t local = t - truth.first_index;
    if (t < truth.first_index || local % truth.stride != 0 || local / truth.stride >= truth.size())
      throw ShapeError("align_truth: truth has no frame for time index " + std::to_string(t));
    out.frames.push_back(truth.frames[local / truth.stride]);
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kMetricsHeader << '\n';
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g\n", r.step,
                  std::string(kChannelNames[r.channel]).c_str(), r.mape_percent, r.max_abs_err);
    out << buf;
  }
}

std::vector<std::size_t> messages_per_step(const std::vector<LedgerEntry>& ledger, std::size_t steps) {
  std::vector<std::size_t> counts(steps, 0);
  for (const auto& e : ledger)
    if (e.step < steps) ++counts[e.step];
  return counts;
}

}  // namespace pdeshard::infer
