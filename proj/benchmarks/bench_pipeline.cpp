#include <benchmark/benchmark.h>

#include <cstdint>
#include <filesystem>

#include "relgen/config.hpp"
#include "relgen/content.hpp"
#include "relgen/dfs.hpp"
#include "relgen/errors.hpp"
#include "relgen/eval.hpp"
#include "relgen/io.hpp"
#include "relgen/rng.hpp"
#include "relgen/task.hpp"

using namespace relgen;

namespace {

void bm_generate_database(benchmark::State& state) {
  GeneratorConfig cfg = default_config();
  std::uint64_t seed = 1;
  for (auto _ : state) {
    DatabaseInstance db = generate_database(cfg, seed++);
    benchmark::DoNotOptimize(db.tables.size());
  }
}
BENCHMARK(bm_generate_database)->Unit(benchmark::kMillisecond);

/// Full per-block pipeline at the default config; items/s is complete tasks
/// per second for the given category.
void bm_build_block(benchmark::State& state, TaskCategory category) {
  GeneratorConfig cfg = default_config();
  std::uint64_t seed = 1000;
  std::int64_t tasks = 0;
  for (auto _ : state) {
    try {
      BlockTasks block = build_tasks(cfg, seed++, category);
      tasks += static_cast<std::int64_t>(block.tasks.size());
    } catch (const Error&) {
    }
  }
  state.SetItemsProcessed(tasks);
}
void bm_block_single_table(benchmark::State& state) {
  bm_build_block(state, TaskCategory::single_table);
}
void bm_block_one_hop(benchmark::State& state) { bm_build_block(state, TaskCategory::one_hop); }
void bm_block_two_hop(benchmark::State& state) { bm_build_block(state, TaskCategory::two_hop); }
BENCHMARK(bm_block_single_table)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_block_one_hop)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_block_two_hop)->Unit(benchmark::kMillisecond);

void bm_dfs_linearize(benchmark::State& state) {
  GeneratorConfig cfg = default_config();
  DatabaseInstance db = generate_database(cfg, 7);
  DfsConfig dfs = cfg.dfs;
  dfs.depth = static_cast<std::int32_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    Rng rng(seed++);
    LinearizedTask lin = dfs_linearize(db, 0, dfs, rng);
    benchmark::DoNotOptimize(lin.x.data());
  }
}
BENCHMARK(bm_dfs_linearize)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void bm_fit_logistic(benchmark::State& state) {
  GeneratorConfig cfg = default_config();
  BlockTasks block = build_tasks(cfg, 12345, TaskCategory::one_hop);
  PreparedFeatures prep = prepare_features(block.tasks.front());
  const std::vector<std::uint8_t>& y = block.tasks.front().y_ctx;
  for (auto _ : state) {
    LogisticModel model = fit_logistic(prep.ctx, y, 1e-3, 300);
    benchmark::DoNotOptimize(model.bias);
  }
}
BENCHMARK(bm_fit_logistic)->Unit(benchmark::kMillisecond);

void bm_task_roundtrip(benchmark::State& state) {
  GeneratorConfig cfg = default_config();
  BlockTasks block = build_tasks(cfg, 12345, TaskCategory::one_hop);
  const IclTask& task = block.tasks.front();
  std::filesystem::path path =
      std::filesystem::temp_directory_path() / "relgen_bench_task.bin";
  for (auto _ : state) {
    write_task(task, path, cfg);
    IclTask back = read_task(path);
    benchmark::DoNotOptimize(back.x_ctx.data());
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}
BENCHMARK(bm_task_roundtrip)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
