// SPDX-License-Identifier: Apache-2.0
//
// pulsecol: kernel benchmarks, denoising simulations, recall sweeps and
// refresh schedule dumps.

#include <fstream>
#include <iostream>
#include <vector>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pulsecol/baselines.hpp"
#include "pulsecol/error.hpp"
#include "pulsecol/refresh_schedule.hpp"

namespace {

using namespace pulsecol;

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

const std::vector<std::string> kScheduleKinds = {"uniform", "random", "power"};
const std::vector<std::string> kPatterns = {"column", "block", "window", "streaming", "full"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Column-sparse attention toolkit for diffusion LM inference"};
  app.require_subcommand(1);
  // One config file for all subcommands; options live under [kernel-bench],
  // [sim], [recall] or [schedule]. Flags given on the command line win.
  app.set_config("--config", "", "TOML or INI config file");
  app.fallthrough();
  std::string out_path;

  // kernel-bench
  cli::KernelBenchOptions bench;
  auto* kb = app.add_subcommand("kernel-bench", "Dense-reference vs column-sparse kernel timing (CSV)");
  kb->add_option("--n", bench.context_lens, "Context lengths")->delimiter(',');
  kb->add_option("--rho", bench.rhos, "Target sparsities")->delimiter(',');
  kb->add_option("--bm", bench.block_m, "Query block size")->check(CLI::PositiveNumber);
  kb->add_option("--bn", bench.block_n, "KV tile size")->check(CLI::PositiveNumber);
  kb->add_option("--head-dim", bench.head_dim, "Head dimension")->check(CLI::PositiveNumber);
  kb->add_option("--reps", bench.reps, "Timed repetitions (median reported)")->check(CLI::Range(3, 1000));
  kb->add_option("--warmup", bench.warmup, "Untimed warmup runs");
  kb->add_option("--threads", bench.threads, "Worker threads for the sparse kernel")->check(CLI::PositiveNumber);
  kb->add_option("--seed", bench.seed, "Input seed");
  kb->add_option("--out", out_path, "Output file");

  // sim
  cli::SimOptions sim;
  sim.run.prompt_len = 16;
  sim.run.gen_len = 48;
  sim.run.total_steps = 16;
  sim.refreshes = 4;
  auto* sm = app.add_subcommand("sim", "Toy denoising run with a chosen attention pattern (JSON)");
  sm->add_option("--T", sim.run.total_steps, "Denoising steps")->check(CLI::PositiveNumber);
  sm->add_option("--eta", sim.eta, "Refresh window ratio");
  sm->add_option("--R", sim.refreshes, "Refresh budget");
  std::string sim_kind = "uniform";
  std::string sim_pattern = "column";
  sm->add_option("--schedule-kind", sim_kind, "uniform, random or power")
      ->check(CLI::IsMember(kScheduleKinds));
  sm->add_option("--pattern", sim_pattern, "column, block, window, streaming or full")
      ->check(CLI::IsMember(kPatterns));
  sm->add_option("--rho", sim.run.rho, "Target sparsity");
  sm->add_option("--group-size", sim.run.group_size, "Query group / kernel block size");
  sm->add_option("--bn", sim.run.block_n, "Kernel KV tile size");
  sm->add_option("--block-size", sim.run.block_size, "Block baseline block size");
  sm->add_option("--window", sim.run.window, "Sliding window width");
  sm->add_option("--sink-frac", sim.run.sink_frac, "Sink token fraction (streaming)");
  sm->add_option("--skip-frac", sim.run.skip_frac, "Full-attention fraction (block)");
  sm->add_option("--prompt-len", sim.run.prompt_len, "Prompt tokens");
  sm->add_option("--gen-len", sim.run.gen_len, "Generated tokens");
  sm->add_option("--recall-k", sim.run.recall_k, "Oracle top-k used for recall");
  sm->add_flag("--track-recall", sim.run.track_recall, "Also measure recall at reuse steps");
  sm->add_option("--layers", sim.model.layers, "Toy model layers");
  sm->add_option("--heads", sim.model.heads, "Toy model heads");
  sm->add_option("--head-dim", sim.model.head_dim, "Toy model head dimension");
  std::uint64_t sim_seed = 0;
  sm->add_option("--seed", sim_seed, "Seed for model weights, prompt and random schedules");
  sm->add_option("--out", out_path, "Output file");

  // recall
  cli::RecallOptions recall;
  auto* rc = app.add_subcommand("recall", "Oracle top-k recall of column vs block patterns (CSV)");
  rc->add_option("--n", recall.seq_len, "Sequence length")->check(CLI::PositiveNumber);
  rc->add_option("--rho", recall.rhos, "Sparsity grid")->delimiter(',');
  rc->add_option("--group-size", recall.group_size, "Query group size")->check(CLI::PositiveNumber);
  rc->add_option("--block-size", recall.block_size, "Block size")->check(CLI::PositiveNumber);
  rc->add_option("--hot", recall.hot_columns, "High-mass columns per group (synthetic)");
  rc->add_option("--topk", recall.topk, "Oracle top-k per token");
  rc->add_option("--maps", recall.maps, "Synthetic maps to average");
  rc->add_option("--source", recall.source, "synthetic or model")
      ->check(CLI::IsMember({"synthetic", "model"}));
  rc->add_option("--seed", recall.seed, "Seed");
  rc->add_option("--out", out_path, "Output file");

  // schedule
  std::size_t sched_t = 128;
  double sched_eta = 0.3;
  std::size_t sched_r = 16;
  std::string sched_kind = "uniform";
  std::uint64_t sched_seed = 0;
  auto* sc = app.add_subcommand("schedule", "Dump a refresh schedule (JSON)");
  sc->add_option("--T", sched_t, "Denoising steps");
  sc->add_option("--eta", sched_eta, "Refresh window ratio");
  sc->add_option("--R", sched_r, "Refresh budget");
  sc->add_option("--schedule-kind", sched_kind, "uniform, random or power")
      ->check(CLI::IsMember(kScheduleKinds));
  sc->add_option("--seed", sched_seed, "Seed for random schedules");
  sc->add_option("--out", out_path, "Output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*kb) {
      std::cerr << "baseline: dense-reference (this library's own exact attention)\n";
      const auto rows = cli::run_kernel_bench(bench);
      Output out(out_path);
      cli::write_bench_csv(out.stream(), rows);
    } else if (*sm) {
      sim.schedule_kind = parse_schedule_kind(sim_kind);
      sim.run.pattern = parse_pattern_kind(sim_pattern);
      sim.model.seed = sim_seed;
      sim.run.seed = sim_seed;
      const auto result = cli::run_sim(sim);
      Output out(out_path);
      out.stream() << cli::run_to_json(sim, result).dump(2) << '\n';
    } else if (*rc) {
      const auto rows = cli::run_recall_sweep(recall);
      Output out(out_path);
      cli::write_recall_csv(out.stream(), rows);
    } else if (*sc) {
      const auto schedule = make_schedule(parse_schedule_kind(sched_kind), sched_t, sched_eta, sched_r, sched_seed);
      Output out(out_path);
      out.stream() << cli::schedule_to_json(schedule).dump(2) << '\n';
    }
  } catch (const pulsecol::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
