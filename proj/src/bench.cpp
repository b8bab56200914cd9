#include "pdeshard/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

#include "pdeshard/error.hpp"
#include "pdeshard/euler.hpp"
#include "pdeshard/infer.hpp"

namespace pdeshard::bench {

using Clock = std::chrono::steady_clock;

std::pair<int, int> decomposition_for(int w) {
  if (w < 1) throw ConfigError("decomposition_for: worker count must be >= 1");
  int py = static_cast<int>(std::sqrt(static_cast<double>(w)));
  while (py > 1 && w % py != 0) --py;
  const int px = w / py;
  if (px > 2 * py)
    throw ConfigError("worker count " + std::to_string(w) + " has no square or 2:1 decomposition");
  return {px, py};
}

ScalingResult run_scaling(const Dataset& d, const std::vector<int>& worker_counts, const train::TrainConfig& cfg) {
  if (worker_counts.empty() || worker_counts.front() != 1)
    throw ConfigError("run_scaling: worker counts must start with the 1-worker baseline");
  ScalingResult out;
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  double baseline = 0.0;
  for (int w : worker_counts) {
    const auto [px, py] = decomposition_for(w);
    train::TrainConfig c = cfg;
    c.px = px;
    c.py = py;
    c.validate(d.size());
    const Partition p = make_partition(d.h(), d.w(), px, py, c.strategy);

    const auto t0 = Clock::now();
    const auto shards = train::shard_dataset(d, p, c);
    out.phases.push_back({"shard", w, std::chrono::duration<double>(Clock::now() - t0).count()});

    const auto res = train::train_sharded(shards, p, c, w);
    out.phases.push_back({"train", w, res.report.train_seconds});

    ScalingRow row;
    row.worker_count = w;
    row.rank_count = p.rank_count();
    row.grid_n = d.h();
    row.total_train_seconds = res.report.train_seconds;
    row.per_rank_max_seconds = *std::max_element(res.report.rank_seconds.begin(), res.report.rank_seconds.end());
    row.per_rank_max_cpu_seconds =
        *std::max_element(res.report.rank_cpu_seconds.begin(), res.report.rank_cpu_seconds.end());
    if (w == 1) baseline = row.total_train_seconds;
    row.speedup = baseline / row.total_train_seconds;
    row.efficiency = row.speedup / w;
    row.oversubscribed = w > hw;
    out.rows.push_back(row);
  }
  return out;
}

void write_scaling_csv(const ScalingResult& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kScalingHeader << '\n';
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6f,%.6f,%.4f,%.4f,%s\n", row.worker_count, row.rank_count,
                  row.grid_n, row.total_train_seconds, row.per_rank_max_seconds, row.speedup, row.efficiency,
                  row.oversubscribed ? "true" : "false");
    out << buf;
  }
}

bool apply_solver_key(SolverConfig& cfg, const std::string& key, const std::string& value) {
  auto num = [&] {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw ConfigError("solver key " + key + ": not a number: '" + value + "'");
    return v;
  };
  auto count = [&] {
    const double v = num();
    if (v < 0 || v != std::floor(v) || v > 4294967295.0)
      throw ConfigError("solver key " + key + ": not a count: '" + value + "'");
    return static_cast<std::uint32_t>(v);
  };
  if (key == "n") cfg.n = count();
  else if (key == "t_steps" || key == "steps") cfg.t_steps = count();
  else if (key == "extent") cfg.extent = num();
  else if (key == "gamma") cfg.gamma = num();
  else if (key == "rho_c") cfg.rho_c = num();
  else if (key == "p_c") cfg.p_c = num();
  else if (key == "uc_x") cfg.uc_x = num();
  else if (key == "uc_y") cfg.uc_y = num();
  else if (key == "pulse_amp") cfg.pulse_amp = num();
  else if (key == "pulse_hw") cfg.pulse_hw = num();
  else if (key == "pulse_cx") cfg.pulse_cx = num();
  else if (key == "pulse_cy") cfg.pulse_cy = num();
  else if (key == "cfl") cfg.cfl = num();
  else return false;
  return true;
}

namespace {

void check_keys(const Manifest& m, const std::string& section, const std::set<std::string>& allowed) {
  for (const auto& k : m.keys(section))
    if (!allowed.count(k)) throw ConfigError("manifest [" + section + "]: unknown key '" + k + "'");
}

train::TrainConfig train_config_from(const Manifest& m, std::size_t frames) {
  check_keys(m, "train",
             {"dataset", "px", "py", "epochs", "batch", "seed", "strategy", "train_begin", "train_end", "val_begin",
              "val_end", "eta", "rho1", "rho2", "eps", "delta"});
  train::TrainConfig c;
  c.px = static_cast<int>(m.get_int("train", "px", c.px));
  c.py = static_cast<int>(m.get_int("train", "py", c.py));
  c.epochs = static_cast<int>(m.get_int("train", "epochs", c.epochs));
  c.batch_size = static_cast<int>(m.get_int("train", "batch", c.batch_size));
  c.seed = static_cast<std::uint64_t>(m.get_int("train", "seed", static_cast<long long>(c.seed)));
  c.strategy = train::parse_strategy(m.get_or("train", "strategy", "zero-inner"));
  // Default split: first two thirds train, rest validation.
  const int total = static_cast<int>(frames);
  const int split = total * 2 / 3;
  c.train_range = {static_cast<int>(m.get_int("train", "train_begin", 0)),
                   static_cast<int>(m.get_int("train", "train_end", split))};
  c.val_range = {static_cast<int>(m.get_int("train", "val_begin", c.train_range.end)),
                 static_cast<int>(m.get_int("train", "val_end", total))};
  c.adam.eta = m.get_double("train", "eta", c.adam.eta);
  c.adam.rho1 = m.get_double("train", "rho1", c.adam.rho1);
  c.adam.rho2 = m.get_double("train", "rho2", c.adam.rho2);
  c.adam.eps = m.get_double("train", "eps", c.adam.eps);
  c.delta = m.get_double("train", "delta", c.delta);
  c.validate(frames);
  return c;
}

class StatusLog {
 public:
  explicit StatusLog(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
  }
  void ok(const std::string& stage) { out_ << stage << ": ok" << std::endl; }
  void failed(const std::string& stage, const std::string& what) {
    out_ << stage << ": failed: " << what << std::endl;
  }

 private:
  std::ofstream out_;
};

template <typename F>
void run_stage(StatusLog& log, const std::string& stage, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    log.failed(stage, e.what());
    throw;
  }
  log.ok(stage);
}

}  // namespace

std::filesystem::path run_experiment(const Manifest& m, const std::filesystem::path& fallback_dir) {
  check_keys(m, "run", {"dir", "workers"});
  const std::filesystem::path dir = m.get_or("run", "dir", fallback_dir.string());
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  {
    std::ofstream(dir / "manifest.txt") << m.text();
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.text().data());
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a({bytes, m.text().size()})));
    std::ofstream(dir / "manifest.hash") << hex << '\n';
  }
  StatusLog log(dir / "status.txt");
  const int workers = static_cast<int>(m.get_int("run", "workers", train::default_workers()));

  const auto dataset_path = dir / "dataset.bin";
  const auto run_dir = dir / "run";
  const auto pred_path = dir / "pred.bin";

  if (m.has_section("generate")) {
    run_stage(log, "generate", [&] {
      SolverConfig cfg;
      for (const auto& k : m.keys("generate"))
        if (!apply_solver_key(cfg, k, *m.get("generate", k)))
          throw ConfigError("manifest [generate]: unknown key '" + k + "'");
      write_dataset(euler::run(cfg), dataset_path);
    });
  }

  auto source_dataset = [&] {
    if (auto p = m.get("train", "dataset")) return std::filesystem::path(*p);
    return dataset_path;
  };

  if (m.has_section("train")) {
    run_stage(log, "train", [&] {
      const Dataset d = read_dataset(source_dataset());
      const auto cfg = train_config_from(m, d.size());
      const Partition p = make_partition(d.h(), d.w(), cfg.px, cfg.py, cfg.strategy);
      const auto res = train::train_parallel(d, p, cfg, workers);
      if (res.report.messages != 0) throw Error("training exchanged rank-to-rank messages");
      train::write_run(run_dir, p, cfg, res);
    });
  }

  if (m.has_section("infer")) {
    run_stage(log, "infer", [&] {
      check_keys(m, "infer", {"steps", "start", "record_every", "timeout_ms"});
      const auto run = train::load_run(run_dir);
      const Dataset truth = read_dataset(source_dataset());
      const int start = static_cast<int>(m.get_int("infer", "start", run.cfg.val_range.begin));
      if (start < 0 || static_cast<std::size_t>(start) >= truth.size())
        throw ConfigError("manifest [infer] start outside dataset");
      infer::RolloutConfig rc;
      rc.steps = static_cast<int>(m.get_int("infer", "steps", 10));
      rc.record_every = static_cast<int>(m.get_int("infer", "record_every", 1));
      rc.strategy = run.cfg.strategy;
      rc.timeout = std::chrono::milliseconds(m.get_int("infer", "timeout_ms", 30000));
      rc.first_index = truth.first_index + static_cast<std::uint32_t>(start) * truth.stride;
      std::vector<nn::ConvNet> nets;
      for (const auto& ck : run.models) nets.push_back(ck.net);
      auto res = infer::rollout(truth.frames[start], nets, run.partition, rc);
      res.frames.dt = truth.dt;
      res.frames.meta = truth.meta;
      write_dataset(res.frames, pred_path);
    });
  }

  if (m.has_section("compare")) {
    run_stage(log, "compare", [&] {
      check_keys(m, "compare", {"delta"});
      const Dataset pred = read_dataset(pred_path);
      const Dataset truth = read_dataset(source_dataset());
      const auto rows = infer::evaluate(pred, infer::align_truth(pred, truth),
                                        m.get_double("compare", "delta", nn::kMapeDelta));
      infer::write_metrics_csv(rows, dir / "metrics.csv");
    });
  }
  return dir;
}

}  // namespace pdeshard::bench
