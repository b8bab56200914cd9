// pde-shard: generate linearized-Euler data, train per-subdomain networks,
// roll them out with halo exchange, and benchmark strong scaling.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pdeshard/bench.hpp"
#include "pdeshard/error.hpp"
#include "pdeshard/euler.hpp"
#include "pdeshard/infer.hpp"
#include "pdeshard/train.hpp"

namespace ps = pdeshard;

namespace {

void add_solver_flags(CLI::App* cmd, ps::SolverConfig& cfg) {
  cmd->add_option("--n", cfg.n, "Cells per direction")->capture_default_str();
  cmd->add_option("--steps,--t-steps", cfg.t_steps, "Frames to write, including the initial condition")
      ->capture_default_str();
  cmd->add_option("--extent", cfg.extent, "Domain half-width; the grid spans [-extent, extent]^2")
      ->capture_default_str();
  cmd->add_option("--gamma", cfg.gamma, "Ratio of specific heats")->capture_default_str();
  cmd->add_option("--rho-c", cfg.rho_c, "Background density")->capture_default_str();
  cmd->add_option("--p-c", cfg.p_c, "Background pressure")->capture_default_str();
  cmd->add_option("--uc-x", cfg.uc_x, "Background velocity, x")->capture_default_str();
  cmd->add_option("--uc-y", cfg.uc_y, "Background velocity, y")->capture_default_str();
  cmd->add_option("--pulse-amp", cfg.pulse_amp, "Gaussian pulse amplitude")->capture_default_str();
  cmd->add_option("--pulse-hw", cfg.pulse_hw, "Gaussian pulse half width")->capture_default_str();
  cmd->add_option("--pulse-cx", cfg.pulse_cx, "Pulse center, x")->capture_default_str();
  cmd->add_option("--pulse-cy", cfg.pulse_cy, "Pulse center, y")->capture_default_str();
  cmd->add_option("--cfl", cfg.cfl, "CFL number")->capture_default_str();
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-subdomain CNN surrogates for the 2-D linearized Euler equations"};
  app.require_subcommand(1);

  // generate
  ps::SolverConfig solver;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Run the finite-volume solver and write a dataset");
  add_solver_flags(gen, solver);
  gen->add_option("--out", gen_out, "Dataset file")->required();

  // train
  std::string tr_dataset, tr_out, tr_strategy = "zero-inner";
  ps::train::TrainConfig tcfg;
  int tr_workers = ps::train::default_workers();
  int train_begin = 0, train_end = -1, val_begin = -1, val_end = -1;
  auto* tr = app.add_subcommand("train", "Train one network per subdomain, without communication");
  tr->add_option("--dataset", tr_dataset, "Dataset file")->required();
  tr->add_option("--px", tcfg.px, "Subdomains along x")->capture_default_str();
  tr->add_option("--py", tcfg.py, "Subdomains along y")->capture_default_str();
  tr->add_option("--epochs", tcfg.epochs)->capture_default_str();
  tr->add_option("--batch", tcfg.batch_size)->capture_default_str();
  tr->add_option("--seed", tcfg.seed)->capture_default_str();
  tr->add_option("--strategy", tr_strategy, "zero-inner | exact-halo")->capture_default_str();
  tr->add_option("--eta", tcfg.adam.eta, "ADAM learning rate")->capture_default_str();
  tr->add_option("--rho1", tcfg.adam.rho1)->capture_default_str();
  tr->add_option("--rho2", tcfg.adam.rho2)->capture_default_str();
  tr->add_option("--delta", tcfg.delta, "MAPE denominator regularizer")->capture_default_str();
  tr->add_option("--train-begin", train_begin)->capture_default_str();
  tr->add_option("--train-end", train_end, "Default: two thirds of the frames");
  tr->add_option("--val-begin", val_begin, "Default: train end");
  tr->add_option("--val-end", val_end, "Default: last frame");
  tr->add_option("--workers", tr_workers, "Worker threads (PDESHARD_WORKERS)")->capture_default_str();
  tr->add_option("--out", tr_out, "Run directory")->required();

  // infer
  std::string inf_run, inf_dataset, inf_out;
  int inf_steps = 10, inf_start = -1, inf_every = 1, inf_timeout_ms = 30000;
  auto* inf = app.add_subcommand("infer", "Parallel rollout with halo exchange");
  inf->add_option("--run-dir", inf_run)->required();
  inf->add_option("--dataset", inf_dataset, "Truth dataset providing the initial frame")->required();
  inf->add_option("--steps", inf_steps)->capture_default_str();
  inf->add_option("--start", inf_start, "Initial frame index (default: first validation frame)");
  inf->add_option("--record-every", inf_every)->capture_default_str();
  inf->add_option("--timeout-ms", inf_timeout_ms, "Per-edge exchange wait")->capture_default_str();
  inf->add_option("--out", inf_out, "Predicted dataset file")->required();

  // compare
  std::string cmp_pred, cmp_truth, cmp_out;
  double cmp_delta = ps::nn::kMapeDelta;
  auto* cmp = app.add_subcommand("compare", "Per-step, per-channel MAPE and max-abs error");
  cmp->add_option("--pred", cmp_pred)->required();
  cmp->add_option("--truth", cmp_truth)->required();
  cmp->add_option("--delta", cmp_delta)->capture_default_str();
  cmp->add_option("--out", cmp_out, "metrics CSV")->required();

  // bench
  std::string b_dataset, b_out = "scaling.csv", b_workers = "1,2,4,8", b_strategy = "both";
  int b_n = 64, b_frames = 300;
  ps::train::TrainConfig bcfg;
  bcfg.epochs = 20;
  auto* bn = app.add_subcommand("bench", "Strong-scaling sweep over worker counts");
  bn->add_option("--dataset", b_dataset, "Dataset file (generated when omitted)");
  bn->add_option("--n", b_n, "Grid size when generating")->capture_default_str();
  bn->add_option("--frames", b_frames, "Frames when generating")->capture_default_str();
  bn->add_option("--workers", b_workers, "Comma-separated worker counts, starting with 1")->capture_default_str();
  bn->add_option("--epochs", bcfg.epochs)->capture_default_str();
  bn->add_option("--batch", bcfg.batch_size)->capture_default_str();
  bn->add_option("--seed", bcfg.seed)->capture_default_str();
  bn->add_option("--strategy", b_strategy, "zero-inner, exact-halo or both (one CSV each)")->capture_default_str();
  bn->add_option("--out", b_out)->capture_default_str();

  // run
  std::string manifest_path, run_dir = "run";
  auto* rn = app.add_subcommand("run", "Execute a manifest (generate/train/infer/compare)");
  rn->add_option("manifest", manifest_path)->required();
  rn->add_option("--dir", run_dir, "Output directory when the manifest has no [run] dir")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto d = ps::euler::run(solver);
      ps::write_dataset(d, gen_out);
      std::printf("wrote %zu frames of %dx%d (dt=%.6g) to %s\n", d.size(), d.h(), d.w(), d.dt, gen_out.c_str());
    } else if (tr->parsed()) {
      const auto d = ps::read_dataset(tr_dataset);
      const int total = static_cast<int>(d.size());
      tcfg.strategy = ps::train::parse_strategy(tr_strategy);
      tcfg.train_range = {train_begin, train_end >= 0 ? train_end : total * 2 / 3};
      tcfg.val_range = {val_begin >= 0 ? val_begin : tcfg.train_range.end, val_end >= 0 ? val_end : total};
      tcfg.validate(d.size());
      const auto p = ps::make_partition(d.h(), d.w(), tcfg.px, tcfg.py, tcfg.strategy);
      const auto res = ps::train::train_parallel(d, p, tcfg, tr_workers);
      ps::train::write_run(tr_out, p, tcfg, res);
      std::printf("trained %d ranks on %d workers in %.3f s, %llu rank-to-rank messages\n", p.rank_count(),
                  res.report.workers, res.report.train_seconds,
                  static_cast<unsigned long long>(res.report.messages));
      for (std::size_t r = 0; r < res.report.loss_curves.size(); ++r) {
        const auto& c = res.report.loss_curves[r];
        if (!c.empty()) std::printf("  rank %zu: loss %.4g -> %.4g\n", r, c.front(), c.back());
      }
    } else if (inf->parsed()) {
      const auto run = ps::train::load_run(inf_run);
      const auto truth = ps::read_dataset(inf_dataset);
      const int start = inf_start >= 0 ? inf_start : run.cfg.val_range.begin;
      if (start < 0 || static_cast<std::size_t>(start) >= truth.size())
        throw ps::ConfigError("start frame outside dataset");
      ps::infer::RolloutConfig rc;
      rc.steps = inf_steps;
      rc.strategy = run.cfg.strategy;
      rc.record_every = inf_every;
      rc.timeout = std::chrono::milliseconds(inf_timeout_ms);
      rc.first_index = truth.first_index + static_cast<std::uint32_t>(start) * truth.stride;
      std::vector<ps::nn::ConvNet> nets;
      for (const auto& ck : run.models) nets.push_back(ck.net);
      auto res = ps::infer::rollout(truth.frames[start], nets, run.partition, rc);
      res.frames.dt = truth.dt;
      res.frames.meta = truth.meta;
      ps::write_dataset(res.frames, inf_out);
      std::printf("rolled out %d steps from frame %d: %llu halo messages (%d per step)\n", inf_steps, start,
                  static_cast<unsigned long long>(res.messages), run.partition.messages_per_step());
    } else if (cmp->parsed()) {
      const auto pred = ps::read_dataset(cmp_pred);
      const auto truth = ps::read_dataset(cmp_truth);
      const auto rows = ps::infer::evaluate(pred, ps::infer::align_truth(pred, truth), cmp_delta);
      ps::infer::write_metrics_csv(rows, cmp_out);
      std::printf("wrote %zu metric rows to %s\n", rows.size(), cmp_out.c_str());
    } else if (bn->parsed()) {
      ps::Dataset d;
      if (b_dataset.empty()) {
        ps::SolverConfig sc;
        sc.n = static_cast<std::uint32_t>(b_n);
        sc.t_steps = static_cast<std::uint32_t>(b_frames);
        d = ps::euler::run(sc);
      } else {
        d = ps::read_dataset(b_dataset);
      }
      const int total = static_cast<int>(d.size());
      bcfg.train_range = {0, total * 2 / 3};
      bcfg.val_range = {total * 2 / 3, total};
      std::vector<ps::nn::PaddingStrategy> strategies;
      if (b_strategy == "both")
        strategies = {ps::nn::PaddingStrategy::ZeroInner, ps::nn::PaddingStrategy::ExactHalo};
      else
        strategies = {ps::train::parse_strategy(b_strategy)};
      for (const auto s : strategies) {
        bcfg.strategy = s;
        const auto res = ps::bench::run_scaling(d, parse_int_list(b_workers), bcfg);
        std::filesystem::path out = b_out;
        if (strategies.size() > 1)
          out.replace_filename(out.stem().string() + "_" + std::string(ps::train::to_string(s)) +
                               out.extension().string());
        ps::bench::write_scaling_csv(res, out);
        std::printf("# %s -> %s\n%s\n", std::string(ps::train::to_string(s)).c_str(), out.string().c_str(),
                    std::string(ps::bench::kScalingHeader).c_str());
        for (const auto& r : res.rows)
          std::printf("%d,%d,%d,%.3f,%.3f,%.3f,%.3f,%s\n", r.worker_count, r.rank_count, r.grid_n,
                      r.total_train_seconds, r.per_rank_max_seconds, r.speedup, r.efficiency,
                      r.oversubscribed ? "true" : "false");
      }
    } else if (rn->parsed()) {
      const auto dir = ps::bench::run_experiment(ps::Manifest::load(manifest_path), run_dir);
      std::printf("experiment written to %s\n", dir.string().c_str());
    }
  } catch (const ps::Error& e) {
    std::fprintf(stderr, "pde-shard: %s\n", e.what());
    return 1;
  }
  return 0;
}
