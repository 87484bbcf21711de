#include "relgen/task.hpp"

#include <algorithm>
#include <set>

#include "relgen/content.hpp"
#include "relgen/errors.hpp"

namespace relgen {

std::string task_category_name(TaskCategory c) {
  switch (c) {
    case TaskCategory::single_table: return "single_table";
    case TaskCategory::one_hop: return "one_hop";
    case TaskCategory::two_hop: return "two_hop";
  }
  throw ContractError("unhandled task category");
}

TaskCategory task_category_from_name(const std::string& name) {
  if (name == "single_table") return TaskCategory::single_table;
  if (name == "one_hop") return TaskCategory::one_hop;
  if (name == "two_hop") return TaskCategory::two_hop;
  throw FormatError("unknown task category: " + name);
}

std::vector<std::size_t> sample_targets(const DatabaseInstance& db, std::int32_t target_table,
                                        std::int32_t k, Rng& rng) {
  if (target_table < 0 || static_cast<std::size_t>(target_table) >= db.schema.tables.size()) {
    throw ContractError("target table out of range");
  }
  if (k < 1) throw ContractError("target count must be positive");
  auto features = db.schema.tables[target_table].feature_columns();
  if (features.empty()) {
    throw GenerationError("table " + db.schema.tables[target_table].name +
                          " has no feature columns to predict");
  }
  std::uint32_t avail = static_cast<std::uint32_t>(features.size());
  std::uint32_t want = std::min(avail, static_cast<std::uint32_t>(k));
  std::vector<std::size_t> out;
  for (std::uint32_t idx : rng.sample_without_replacement(avail, want)) {
    out.push_back(features[idx]);
  }
  return out;
}

BinarizedTarget binarize(const ColumnValues& column, Rng& rng) {
  BinarizedTarget out;
  if (column.kind == ColumnKind::categorical) {
    if (column.cls.empty()) throw DegenerateError("empty target column");
    std::set<std::int32_t> observed(column.cls.begin(), column.cls.end());
    if (observed.size() < 2) throw DegenerateError("constant categorical target");
    std::uint64_t pick = rng.uniform_int(observed.size());
    auto it = observed.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(pick));
    out.positive_class = *it;
    out.labels.reserve(column.cls.size());
    for (std::int32_t c : column.cls) {
      out.labels.push_back(c == out.positive_class ? 1 : 0);
    }
    return out;
  }
  if (column.num.empty()) throw DegenerateError("empty target column");
  std::vector<float> sorted(column.num);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw DegenerateError("constant continuous target");
  // Lower median; strictly-above goes positive.
  out.threshold = sorted[(sorted.size() - 1) / 2];
  std::size_t positives = 0;
  out.labels.reserve(column.num.size());
  for (float v : column.num) {
    bool pos = static_cast<double>(v) > out.threshold;
    out.labels.push_back(pos ? 1 : 0);
    positives += pos ? 1 : 0;
  }
  // Heavy ties can push the whole column to one side of the median.
  if (positives == 0 || positives == out.labels.size()) {
    throw DegenerateError("single-sided median split");
  }
  return out;
}

namespace {

void take_rows(const LinearizedTask& lin, const std::vector<std::uint8_t>& y,
               const std::vector<std::size_t>& rows, Matrix& x_out,
               std::vector<std::uint8_t>& missing_out, std::vector<std::uint8_t>& y_out,
               std::vector<std::int64_t>& ids_out) {
  const std::size_t w = lin.x.cols();
  x_out = Matrix(rows.size(), w, 0.0f);
  missing_out.assign(rows.size() * w, 0);
  y_out.clear();
  ids_out.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t r = rows[i];
    for (std::size_t c = 0; c < w; ++c) {
      x_out(i, c) = lin.x(r, c);
      missing_out[i * w + c] = lin.missing[r * w + c];
    }
    y_out.push_back(y[r]);
    ids_out.push_back(lin.row_ids[r]);
  }
}

}  // namespace

ShapedTask shape_task(const LinearizedTask& lin, const std::vector<std::uint8_t>& y,
                      const TaskConfig& cfg, Rng& rng) {
  const std::size_t n = lin.x.rows();
  if (y.size() != n) throw DimensionError("label vector does not match the feature rows");
  if (n < static_cast<std::size_t>(cfg.min_task_rows)) {
    throw DegenerateError("too few rows for a task");
  }
  auto class_support_ok = [](const std::vector<std::uint8_t>& labels) {
    std::size_t pos = 0;
    for (std::uint8_t v : labels) pos += v;
    return pos >= 2 && labels.size() - pos >= 2;
  };
  if (!class_support_ok(y)) throw DegenerateError("class support below two rows");

  std::vector<std::size_t> keep;
  if (n > static_cast<std::size_t>(cfg.task_rows)) {
    for (std::uint32_t idx : rng.sample_without_replacement(
             static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(cfg.task_rows))) {
      keep.push_back(idx);
    }
  } else {
    keep.resize(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = i;
  }

  ShapedTask out;
  out.lin.target_table = lin.target_table;
  out.lin.provenance = lin.provenance;
  take_rows(lin, y, keep, out.lin.x, out.lin.missing, out.y, out.lin.row_ids);
  if (!class_support_ok(out.y)) throw DegenerateError("class support below two rows");
  return out;
}

IclTask split_context_query(const ShapedTask& shaped, std::int32_t n_ctx,
                            const TaskConfig& cfg, Rng& rng) {
  const std::size_t n = shaped.lin.x.rows();
  if (n_ctx < 1) throw ContractError("context size must be positive");
  const std::size_t ctx = static_cast<std::size_t>(n_ctx);
  if (ctx >= n) throw DegenerateError("context size leaves no query rows");

  bool need_both = n_ctx >= cfg.min_ctx_for_both_classes;
  for (std::int32_t attempt = 0; attempt <= cfg.max_context_resample; ++attempt) {
    auto picked = rng.sample_without_replacement(static_cast<std::uint32_t>(n),
                                                static_cast<std::uint32_t>(ctx));
    std::vector<std::size_t> ctx_rows(picked.begin(), picked.end());
    if (need_both) {
      std::size_t pos = 0;
      for (std::size_t r : ctx_rows) pos += shaped.y[r];
      if (pos == 0 || pos == ctx_rows.size()) continue;
    }
    std::vector<std::uint8_t> in_ctx(n, 0);
    for (std::size_t r : ctx_rows) in_ctx[r] = 1;
    std::vector<std::size_t> query_rows;
    for (std::size_t r = 0; r < n; ++r) {
      if (!in_ctx[r]) query_rows.push_back(r);
    }
    IclTask task;
    take_rows(shaped.lin, shaped.y, ctx_rows, task.x_ctx, task.missing_ctx, task.y_ctx,
              task.ctx_rows);
    take_rows(shaped.lin, shaped.y, query_rows, task.x_query, task.missing_query, task.y_query,
              task.query_rows);
    task.provenance = shaped.lin.provenance;
    task.meta.target_table = shaped.lin.target_table;
    task.meta.n_ctx = n_ctx;
    return task;
  }
  throw DegenerateError("context stayed single-class after resampling");
}

BlockTasks build_tasks(const GeneratorConfig& cfg, std::uint64_t db_seed,
                       TaskCategory category) {
  GeneratorConfig block_cfg = cfg;
  block_cfg.single_table = category == TaskCategory::single_table;
  const std::int32_t depth = category == TaskCategory::two_hop ? 2 : 1;
  const std::int32_t width = block_cfg.single_table ? cfg.task.single_table_width
                                                    : cfg.dfs.standard_width;

  DatabaseInstance db = generate_database(block_cfg, db_seed);
  Rng root(db_seed);
  Rng block_rng = root.child(10);

  std::vector<std::int32_t> candidates;
  for (std::size_t t = 0; t < db.schema.tables.size(); ++t) {
    if (!db.schema.tables[t].feature_columns().empty()) {
      candidates.push_back(static_cast<std::int32_t>(t));
    }
  }
  if (candidates.empty()) throw GenerationError("no table offers target columns");
  std::int32_t target_table =
      candidates[static_cast<std::size_t>(block_rng.uniform_int(candidates.size()))];
  std::vector<std::size_t> targets =
      sample_targets(db, target_table, cfg.task.targets_per_schema, block_rng);

  DfsConfig dfs_cfg = cfg.dfs;
  dfs_cfg.depth = depth;
  std::vector<FeaturePath> paths =
      enumerate_paths(db.schema, target_table, depth, dfs_cfg.aggregators);
  const std::size_t budget = static_cast<std::size_t>(dfs_cfg.overgen_width());
  if (paths.size() > budget) {
    std::vector<FeaturePath> subset;
    subset.reserve(budget);
    for (std::uint32_t k : block_rng.sample_without_replacement(
             static_cast<std::uint32_t>(paths.size()), static_cast<std::uint32_t>(budget))) {
      subset.push_back(paths[k]);
    }
    paths.swap(subset);
  }
  EvaluatedPool pool = evaluate_paths(db, target_table, paths);

  BlockTasks out;
  Rng slot_base = root.child(11);
  for (std::int32_t slot = 0; slot < cfg.task.targets_per_schema; ++slot) {
    if (static_cast<std::size_t>(slot) >= targets.size()) {
      ++out.stats.no_target;
      continue;
    }
    Rng slot_rng = slot_base.child(static_cast<std::uint64_t>(slot));
    const std::size_t target_col = targets[static_cast<std::size_t>(slot)];

    BinarizedTarget bin;
    try {
      bin = binarize(db.tables[target_table].columns[target_col], slot_rng);
    } catch (const DegenerateError&) {
      ++out.stats.degenerate_label;
      continue;
    }

    LinearizedTask lin = assemble_task(pool, target_table, width,
                                       static_cast<std::int32_t>(target_col), slot_rng);

    ShapedTask shaped;
    try {
      shaped = shape_task(lin, bin.labels, cfg.task, slot_rng);
    } catch (const DegenerateError&) {
      ++out.stats.too_few_rows;
      continue;
    }

    try {
      IclTask task = split_context_query(shaped, cfg.task.n_ctx, cfg.task, slot_rng);
      task.meta.db_seed = db_seed;
      task.meta.category = category;
      task.meta.target_table = target_table;
      task.meta.target_column = static_cast<std::int32_t>(target_col);
      task.meta.positive_class = bin.positive_class;
      task.meta.threshold = bin.threshold;
      out.tasks.push_back(std::move(task));
      ++out.stats.built;
    } catch (const DegenerateError&) {
      ++out.stats.split_failed;
      continue;
    }
  }
  return out;
}

}  // namespace relgen
