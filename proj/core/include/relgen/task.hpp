#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relgen/config.hpp"
#include "relgen/dfs.hpp"
#include "relgen/instance.hpp"
#include "relgen/rng.hpp"

namespace relgen {

enum class TaskCategory { single_table, one_hop, two_hop };

std::string task_category_name(TaskCategory c);
TaskCategory task_category_from_name(const std::string& name);

struct TaskMeta {
  std::uint64_t db_seed = 0;
  TaskCategory category = TaskCategory::one_hop;
  std::int32_t target_table = -1;
  std::int32_t target_column = -1;
  std::int32_t positive_class = -1;  ///< one-vs-rest class; -1 for median splits
  double threshold = 0.0;            ///< median used for continuous targets
  std::int32_t n_ctx = 0;
};

/// One supervised in-context task: disjoint context and query blocks over the
/// same feature columns, binary labels, row-major missing masks.
struct IclTask {
  Matrix x_ctx;
  Matrix x_query;
  std::vector<std::uint8_t> y_ctx;
  std::vector<std::uint8_t> y_query;
  std::vector<std::uint8_t> missing_ctx;
  std::vector<std::uint8_t> missing_query;
  std::vector<FeaturePath> provenance;  ///< one entry per feature column
  std::vector<std::int64_t> ctx_rows;   ///< source row ids, audit trail
  std::vector<std::int64_t> query_rows;
  TaskMeta meta;

  std::size_t width() const { return x_ctx.cols(); }
};

/// min(k, available) distinct feature columns of the target table, chosen
/// uniformly; ascending order. Throws GenerationError when the table has no
/// feature columns.
std::vector<std::size_t> sample_targets(const DatabaseInstance& db, std::int32_t target_table,
                                        std::int32_t k, Rng& rng);

struct BinarizedTarget {
  std::vector<std::uint8_t> labels;
  std::int32_t positive_class = -1;
  double threshold = 0.0;
};

/// Continuous and timestamp columns split at the lower median (strictly above
/// -> 1); categorical columns go one-vs-rest against a uniformly chosen
/// observed class. Constant columns raise DegenerateError.
BinarizedTarget binarize(const ColumnValues& column, Rng& rng);

/// Row-downsampled task table: the linearized features plus aligned labels.
struct ShapedTask {
  LinearizedTask lin;
  std::vector<std::uint8_t> y;
};

/// Uniform row subsample to cfg.task_rows (all rows when fewer). Raises
/// DegenerateError when fewer than cfg.min_task_rows rows exist or either
/// class has fewer than 2 rows.
ShapedTask shape_task(const LinearizedTask& lin, const std::vector<std::uint8_t>& y,
                      const TaskConfig& cfg, Rng& rng);

/// Disjoint uniform context/query split with n_ctx context rows. Contexts of
/// at least cfg.min_ctx_for_both_classes rows must contain both classes; the
/// draw is retried up to cfg.max_context_resample times, then the task is
/// declared degenerate. n_ctx must leave at least one query row, otherwise
/// DegenerateError.
IclTask split_context_query(const ShapedTask& shaped, std::int32_t n_ctx,
                            const TaskConfig& cfg, Rng& rng);

struct TaskBuildStats {
  std::int64_t built = 0;
  std::int64_t no_target = 0;         ///< slots beyond the table's column budget
  std::int64_t degenerate_label = 0;  ///< constant target column
  std::int64_t too_few_rows = 0;
  std::int64_t split_failed = 0;      ///< single-class context after resampling

  std::int64_t discarded() const {
    return no_target + degenerate_label + too_few_rows + split_failed;
  }
};

struct BlockTasks {
  std::vector<IclTask> tasks;  ///< at most cfg.task.targets_per_schema
  TaskBuildStats stats;
};

/// One block: generate a database from db_seed, pick a target table, sample
/// target columns, linearize once, and emit one task per target sharing that
/// pool (each task drops its own target identity column). The category picks
/// the schema mode and feature depth: single_table forces one-table schemas
/// at single_table_width, one_hop/two_hop linearize at depth 1/2 and
/// standard_width. Fully determined by (cfg, db_seed, category).
BlockTasks build_tasks(const GeneratorConfig& cfg, std::uint64_t db_seed, TaskCategory category);

}  // namespace relgen
