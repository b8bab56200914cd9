#include "pdeshard/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pdeshard/error.hpp"
#include "pdeshard/exchange.hpp"
#include "pdeshard/rng.hpp"

namespace pdeshard::train {

using Clock = std::chrono::steady_clock;

namespace {

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

}  // namespace

void TrainConfig::validate(std::size_t frames) const {
  auto fail = [](const std::string& what) { throw ConfigError("TrainConfig: " + what); };
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (px < 1 || py < 1) fail("px, py must be >= 1");
  if (train_range.begin < 0 || train_range.size() < 1) fail("train_range must be a non-empty range from >= 0");
  if (static_cast<std::size_t>(train_range.end) >= frames)
    fail("train_range end " + std::to_string(train_range.end) + " needs frame " + std::to_string(train_range.end) +
         " as a target, dataset has " + std::to_string(frames) + " frames");
  if (val_range.size() > 0) {
    if (val_range.begin < 0 || static_cast<std::size_t>(val_range.end) > frames)
      fail("val_range outside dataset");
    if (val_range.begin < train_range.end && train_range.begin < val_range.end)
      fail("train_range and val_range overlap");
  }
}

ShardedSamples shard_dataset(const Dataset& d, const Partition& p, FrameRange range) {
  if (range.begin < 0 || range.size() < 1 || static_cast<std::size_t>(range.end) >= d.size())
    throw ConfigError("shard_dataset: range [" + std::to_string(range.begin) + ", " + std::to_string(range.end) +
                      ") needs frames up to " + std::to_string(range.end) + ", dataset has " +
                      std::to_string(d.size()));
  if (d.h() != p.global_h || d.w() != p.global_w) throw ShapeError("shard_dataset: dataset grid != partition grid");
  ShardedSamples out;
  out.per_rank.resize(p.ranks.size());
  for (const auto& spec : p.ranks) {
    auto& shard = out.per_rank[spec.rank];
    shard.reserve(static_cast<std::size_t>(range.size()));
    for (int t = range.begin; t < range.end; ++t) {
      const auto& c = spec.core;
      shard.push_back({extract_input(d.frames[t].tensor(), spec, p.halo),
                       slice_region(d.frames[t + 1].tensor(), c.row0, c.col0, c.rows, c.cols)});
    }
  }
  return out;
}

RankResult train_rank(const Shard& shard, nn::ConvNet net, const TrainConfig& cfg, std::uint64_t seed) {
  if (shard.empty()) throw ConfigError("train_rank: empty shard");
  const auto start = Clock::now();
  const double cpu_start = thread_cpu_seconds();
  const auto plan = nn::pad_plan(cfg.strategy);
  RankResult res;
  res.adam = nn::AdamState::fresh(net, cfg.adam);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::ForwardCache cache;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    const std::size_t batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      nn::Gradients batch_grad = nn::Gradients::zeros_like(net);
      for (std::size_t j = lo; j < hi; ++j) {
        const Sample& s = shard[order[j]];
        const Tensor3 pred = nn::net_forward(s.input, net, plan, &cache);
        const auto loss = nn::mape_loss(pred, s.target, cfg.delta);
        if (!std::isfinite(loss.loss))
          throw NumericError("train_rank: non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b));
        epoch_loss += loss.loss;
        batch_grad.add(nn::net_backward(net, cache, loss.grad, plan));
      }
      batch_grad.scale(1.0 / static_cast<double>(hi - lo));
      if (!batch_grad.all_finite())
        throw NumericError("train_rank: non-finite gradient in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      nn::adam_step(net, batch_grad, res.adam);
    }
    res.loss_curve.push_back(epoch_loss / static_cast<double>(shard.size()));
  }
  res.net = std::move(net);
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  res.cpu_seconds = thread_cpu_seconds() - cpu_start;
  return res;
}

int default_workers() {
  if (const char* env = std::getenv("PDESHARD_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

TrainResult train_sharded(const ShardedSamples& shards, const Partition& p, const TrainConfig& cfg, int workers) {
  const int ranks = p.rank_count();
  if (static_cast<int>(shards.per_rank.size()) != ranks) throw ConfigError("train_sharded: shard count != ranks");
  if (workers < 1) throw ConfigError("train_sharded: need at least one worker");
  if (cfg.strategy != p.strategy)
    throw ConfigError(std::string("train_sharded: config strategy ") + std::string(to_string(cfg.strategy)) +
                      " does not match partition strategy " + std::string(to_string(p.strategy)));
  workers = std::min(workers, ranks);

  // Ranks never exchange data while training; the fabric exists so the
  // message counter is read from the same layer inference uses.
  ExchangeFabric fabric(ranks);
  std::vector<RankResult> results(ranks);
  std::vector<std::exception_ptr> errors(ranks);
  std::vector<int> owner(ranks);

  const auto start = Clock::now();
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int r = w; r < ranks; r += workers) {
          owner[r] = w;
          try {
            const auto seed = rank_seed(cfg.seed, r);
            results[r] = train_rank(shards.per_rank[r], nn::init_network(seed), cfg, seed);
          } catch (...) {
            errors[r] = std::current_exception();
          }
        }
      });
    }
  }
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();

  for (int r = 0; r < ranks; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const std::exception& e) {
      throw WorkerError(r, e.what());
    }
  }

  TrainResult out;
  out.report.workers = workers;
  out.report.oversubscribed = workers > static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  out.report.train_seconds = wall;
  out.report.messages = fabric.message_count();
  out.report.rank_worker = owner;
  for (auto& r : results) {
    out.report.loss_curves.push_back(r.loss_curve);
    out.report.rank_seconds.push_back(r.seconds);
    out.report.rank_cpu_seconds.push_back(r.cpu_seconds);
    out.models.push_back({std::move(r.net), std::move(r.adam)});
  }
  return out;
}

TrainResult train_parallel(const Dataset& d, const Partition& p, const TrainConfig& cfg, int workers) {
  cfg.validate(d.size());
  const auto start = Clock::now();
  const auto shards = shard_dataset(d, p, cfg);
  const double shard_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  auto res = train_sharded(shards, p, cfg, workers);
  res.report.shard_seconds = shard_seconds;
  return res;
}

double evaluate_shard(const nn::ConvNet& net, const Shard& shard, nn::PaddingStrategy s, double delta) {
  if (shard.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& sample : shard) sum += nn::mape(nn::net_forward(sample.input, net, s), sample.target, delta);
  return sum / static_cast<double>(shard.size());
}

std::string_view to_string(nn::PaddingStrategy s) noexcept {
  return s == nn::PaddingStrategy::ZeroInner ? "zero-inner" : "exact-halo";
}

nn::PaddingStrategy parse_strategy(std::string_view s) {
  if (s == "zero-inner") return nn::PaddingStrategy::ZeroInner;
  if (s == "exact-halo") return nn::PaddingStrategy::ExactHalo;
  throw ConfigError("unknown padding strategy '" + std::string(s) + "' (expected zero-inner or exact-halo)");
}

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int rank) {
  char name[32];
  std::snprintf(name, sizeof name, "rank_%03d.ckpt", rank);
  return dir / name;
}

json config_json(const Partition& p, const TrainConfig& cfg) {
  return json{
      {"train",
       {{"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"train_range", {cfg.train_range.begin, cfg.train_range.end}},
        {"val_range", {cfg.val_range.begin, cfg.val_range.end}},
        {"seed", cfg.seed},
        {"strategy", to_string(cfg.strategy)},
        {"eta", cfg.adam.eta},
        {"rho1", cfg.adam.rho1},
        {"rho2", cfg.adam.rho2},
        {"eps", cfg.adam.eps},
        {"delta", cfg.delta},
        {"px", cfg.px},
        {"py", cfg.py}}},
      {"partition",
       {{"global_h", p.global_h},
        {"global_w", p.global_w},
        {"px", p.px},
        {"py", p.py},
        {"halo", p.halo},
        {"strategy", to_string(p.strategy)}}},
  };
}

}  // namespace

void write_run(const std::filesystem::path& dir, const Partition& p, const TrainConfig& cfg,
               const TrainResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());

  {
    std::ofstream out(dir / "config.json");
    if (!out) throw IoError("cannot write " + (dir / "config.json").string());
    out << config_json(p, cfg).dump(2) << '\n';
  }
  for (std::size_t r = 0; r < result.models.size(); ++r)
    nn::write_checkpoint(result.models[r], checkpoint_path(dir, static_cast<int>(r)));
  {
    std::ofstream out(dir / "loss.csv");
    out << "rank,epoch,loss\n";
    for (std::size_t r = 0; r < result.report.loss_curves.size(); ++r)
      for (std::size_t e = 0; e < result.report.loss_curves[r].size(); ++e)
        out << r << ',' << e << ',' << fmt_double(result.report.loss_curves[r][e]) << '\n';
  }
  {
    std::ofstream out(dir / "timing.csv");
    out << "rank,worker,seconds,cpu_seconds\n";
    for (std::size_t r = 0; r < result.report.rank_seconds.size(); ++r)
      out << r << ',' << result.report.rank_worker[r] << ',' << fmt_double(result.report.rank_seconds[r]) << ','
          << fmt_double(result.report.rank_cpu_seconds[r]) << '\n';
  }
}

LoadedRun load_run(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw IoError("cannot open " + (dir / "config.json").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError((dir / "config.json").string() + ": " + e.what());
  }
  LoadedRun run;
  try {
    const auto& t = j.at("train");
    TrainConfig& c = run.cfg;
    c.epochs = t.at("epochs");
    c.batch_size = t.at("batch_size");
    c.train_range = {t.at("train_range")[0], t.at("train_range")[1]};
    c.val_range = {t.at("val_range")[0], t.at("val_range")[1]};
    c.seed = t.at("seed");
    c.strategy = parse_strategy(t.at("strategy").get<std::string>());
    c.adam = {t.at("eta"), t.at("rho1"), t.at("rho2"), t.at("eps")};
    c.delta = t.at("delta");
    c.px = t.at("px");
    c.py = t.at("py");
    const auto& p = j.at("partition");
    run.partition = make_partition(p.at("global_h"), p.at("global_w"), p.at("px"), p.at("py"),
                                   parse_strategy(p.at("strategy").get<std::string>()));
  } catch (const json::exception& e) {
    throw FormatError((dir / "config.json").string() + ": " + e.what());
  }
  for (int r = 0; r < run.partition.rank_count(); ++r) run.models.push_back(nn::read_checkpoint(checkpoint_path(dir, r)));
  return run;
}

}  // namespace pdeshard::train
