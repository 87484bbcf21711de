#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "relgen/accum.hpp"
#include "relgen/config.hpp"
#include "relgen/content.hpp"
#include "relgen/dfs.hpp"
#include "relgen/diagnostics.hpp"
#include "relgen/errors.hpp"
#include "relgen/eval.hpp"
#include "relgen/instance.hpp"
#include "relgen/io.hpp"
#include "relgen/struct_gen.hpp"
#include "relgen/task.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace relgen;

namespace {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::contract: return "contract";
    case ErrorKind::generation: return "generation";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::degenerate: return "degenerate";
  }
  return "unknown";
}

/// Process exit codes: 0 success, 2 configuration or usage, 3 filesystem,
/// 1 everything else (including validation findings).
int exit_code_for(ErrorKind k) {
  if (k == ErrorKind::config) return 2;
  if (k == ErrorKind::io) return 3;
  return 1;
}

void emit_error_line(const std::string& message, const std::string& kind) {
  ordered_json line;
  line["error"] = message;
  line["kind"] = kind;
  std::cerr << line.dump() << "\n";
}

/// Opens out_path for writing when non-empty, otherwise stdout.
std::ostream& open_output(const std::string& out_path, std::ofstream& file) {
  if (out_path.empty()) return std::cout;
  file.open(out_path);
  if (!file) throw IoError("cannot open for writing: " + out_path);
  return file;
}

struct GenerateArgs {
  std::string config_path;
  std::int64_t count = 0;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::int32_t workers = 1;
};

int cmd_generate(const GenerateArgs& args) {
  GeneratorConfig cfg = args.config_path.empty() ? default_config() : load_config(args.config_path);
  if (args.seed_given) cfg.seed = args.seed;
  CorpusStats stats = stream_corpus(cfg, args.count, args.out_dir, args.workers);
  std::cout << corpus_stats_to_json(stats).dump(2) << "\n";
  return 0;
}

std::vector<ordered_json> read_manifest(const fs::path& dir) {
  fs::path manifest = dir / "manifest.jsonl";
  if (!fs::exists(manifest)) throw IoError("manifest not found: " + manifest.string());
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  std::vector<ordered_json> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      entries.push_back(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      ordered_json bad;
      bad["parse_error"] = e.what();
      entries.push_back(bad);
    }
  }
  return entries;
}

/// Cross-checks one manifest entry against the task file it names. Emits
/// findings through `emit`; read failures become findings, not errors.
void check_corpus_entry(const fs::path& dir, const ordered_json& entry, std::int64_t line,
                        const std::function<void(ordered_json)>& emit) {
  auto finding = [&](const char* code, const std::string& message) {
    ordered_json f;
    f["code"] = code;
    f["line"] = line;
    if (entry.contains("file")) f["file"] = entry["file"];
    f["message"] = message;
    emit(f);
  };
  if (entry.contains("parse_error")) {
    finding("MANIFEST_PARSE", entry["parse_error"].get<std::string>());
    return;
  }
  if (!entry.contains("file") || !entry["file"].is_string()) {
    finding("MANIFEST_PARSE", "entry lacks a file field");
    return;
  }
  fs::path task_path = dir / entry["file"].get<std::string>();
  IclTask task;
  try {
    task = read_task(task_path);
  } catch (const IoError& e) {
    finding("MISSING_FILE", e.what());
    return;
  } catch (const FormatError& e) {
    finding("CORRUPT", e.what());
    return;
  }

  if (entry.value("index", std::int64_t{-1}) != line) {
    finding("MANIFEST_MISMATCH", "index does not match manifest position");
  }
  if (entry.value("db_seed", std::uint64_t{0}) != task.meta.db_seed ||
      entry.value("category", std::string()) != task_category_name(task.meta.category) ||
      entry.value("target_table", std::int32_t{-2}) != task.meta.target_table ||
      entry.value("target_column", std::int32_t{-2}) != task.meta.target_column ||
      entry.value("positive_class", std::int32_t{-2}) != task.meta.positive_class ||
      entry.value("n_ctx", std::int32_t{-2}) != task.meta.n_ctx) {
    finding("MANIFEST_MISMATCH", "entry disagrees with the task header");
  }

  GeneratorConfig cfg;
  try {
    ordered_json side = read_task_sidecar(task_path);
    cfg = config_from_json(side.at("config"));
  } catch (const std::exception& e) {
    finding("SIDECAR_INVALID", e.what());
    return;
  }
  const bool single = task.meta.category == TaskCategory::single_table;
  const std::int64_t want_width = single ? cfg.task.single_table_width : cfg.dfs.standard_width;
  const std::int64_t rows =
      static_cast<std::int64_t>(task.x_ctx.rows() + task.x_query.rows());
  if (static_cast<std::int64_t>(task.width()) != want_width) {
    finding("SHAPE", "width " + std::to_string(task.width()) + ", expected " +
                         std::to_string(want_width));
  }
  if (rows < cfg.task.min_task_rows || rows > cfg.task.task_rows) {
    finding("SHAPE", "row count " + std::to_string(rows) + " outside [" +
                         std::to_string(cfg.task.min_task_rows) + ", " +
                         std::to_string(cfg.task.task_rows) + "]");
  }

  auto mixed = [](const std::vector<std::uint8_t>& y) {
    bool pos = false, neg = false;
    for (std::uint8_t v : y) (v != 0 ? pos : neg) = true;
    return pos && neg;
  };
  if (!mixed(task.y_ctx) || !mixed(task.y_query)) {
    finding("LABEL", "single-class context or query labels");
  }
}

int cmd_validate(const std::string& target) {
  fs::path path(target);
  std::int64_t findings = 0;
  auto emit = [&](ordered_json f) {
    ++findings;
    std::cout << f.dump() << "\n";
  };

  if (fs::is_directory(path)) {
    std::vector<ordered_json> entries = read_manifest(path);
    std::set<std::string> listed;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      check_corpus_entry(path, entries[i], static_cast<std::int64_t>(i), emit);
      if (entries[i].contains("file") && entries[i]["file"].is_string()) {
        listed.insert(entries[i]["file"].get<std::string>());
      }
    }
    for (const fs::directory_entry& e : fs::directory_iterator(path)) {
      std::string name = e.path().filename().string();
      if (e.path().extension() != ".bin") continue;
      if (!listed.contains(name)) {
        ordered_json f;
        f["code"] = "ORPHAN_FILE";
        f["file"] = name;
        f["message"] = "task file not listed in the manifest";
        emit(f);
      }
    }
  } else if (path.extension() == ".json") {
    DatabaseInstance db;
    try {
      db = read_database(path);
    } catch (const FormatError& e) {
      ordered_json f;
      f["code"] = "CORRUPT";
      f["path"] = path.string();
      f["message"] = e.what();
      emit(f);
      return 1;
    }
    for (const ValidationFinding& v : validate_database(db)) {
      ordered_json f;
      f["code"] = v.code;
      f["path"] = path.string();
      f["message"] = v.message;
      f["table"] = v.table;
      f["column"] = v.column;
      emit(f);
    }
  } else {
    try {
      read_task(path);
    } catch (const FormatError& e) {
      ordered_json f;
      f["code"] = "CORRUPT";
      f["path"] = path.string();
      f["message"] = e.what();
      emit(f);
    }
  }
  return findings == 0 ? 0 : 1;
}

int cmd_stats(const std::string& dir_str, std::int32_t sample) {
  if (sample < 0) throw ConfigError("sample: must be non-negative");
  fs::path dir(dir_str);
  ordered_json report;
  if (!fs::exists(dir / "manifest.jsonl")) {
    report["tasks"] = 0;
    std::cout << report.dump(2) << "\n";
    return 0;
  }
  std::vector<ordered_json> entries = read_manifest(dir);

  std::int64_t tasks = 0, unreadable = 0, bytes = 0;
  std::map<std::string, std::int64_t> by_category;
  std::vector<std::int64_t> prevalence_bins(10, 0);
  std::vector<double> prevalences;

  std::int64_t corr_sampled = 0, corr_within_gt = 0;
  std::vector<double> corr_within, corr_cross;

  struct RegenPick {
    std::uint64_t db_seed;
    TaskCategory category;
    fs::path file;
  };
  std::vector<RegenPick> picks;
  std::set<std::uint64_t> picked_seeds;

  for (const ordered_json& entry : entries) {
    if (entry.contains("parse_error") || !entry.contains("file")) {
      ++unreadable;
      continue;
    }
    fs::path task_path = dir / entry["file"].get<std::string>();
    IclTask task;
    try {
      task = read_task(task_path);
    } catch (const Error&) {
      ++unreadable;
      continue;
    }
    ++tasks;
    ++by_category[task_category_name(task.meta.category)];
    std::error_code ec;
    std::uintmax_t sz = fs::file_size(task_path, ec);
    if (!ec) bytes += static_cast<std::int64_t>(sz);

    std::int64_t pos = 0;
    for (std::uint8_t v : task.y_ctx) pos += v;
    for (std::uint8_t v : task.y_query) pos += v;
    const double n = static_cast<double>(task.y_ctx.size() + task.y_query.size());
    const double p = static_cast<double>(pos) / n;
    prevalences.push_back(p);
    ++prevalence_bins[std::min<std::size_t>(9, static_cast<std::size_t>(p * 10.0))];

    const bool relational = task.meta.category != TaskCategory::single_table;
    if (relational && corr_sampled < sample) {
      try {
        CorrelationReport rep = correlation_report(task.x_ctx, task.provenance);
        ++corr_sampled;
        corr_within.push_back(rep.within_mean_abs);
        corr_cross.push_back(rep.cross_mean_abs);
        if (rep.within_mean_abs > rep.cross_mean_abs) ++corr_within_gt;
      } catch (const DegenerateError&) {
      }
    }
    if (relational && static_cast<std::int32_t>(picks.size()) < sample &&
        !picked_seeds.contains(task.meta.db_seed)) {
      picked_seeds.insert(task.meta.db_seed);
      picks.push_back({task.meta.db_seed, task.meta.category, task_path});
    }
  }

  // Regenerates sampled blocks from their sidecar config echo: degree Gini
  // per attachment mode plus a fresh single-core throughput measurement.
  std::vector<std::int64_t> pool_a, pool_b;
  std::int64_t blocks_timed = 0, tasks_built = 0, databases = 0;
  double regen_seconds = 0.0;
  for (const RegenPick& pick : picks) {
    GeneratorConfig cfg;
    try {
      cfg = config_from_json(read_task_sidecar(pick.file).at("config"));
    } catch (const std::exception&) {
      continue;
    }
    try {
      auto t0 = std::chrono::steady_clock::now();
      BlockTasks block = build_tasks(cfg, pick.db_seed, pick.category);
      auto t1 = std::chrono::steady_clock::now();
      regen_seconds += std::chrono::duration<double>(t1 - t0).count();
      ++blocks_timed;
      tasks_built += static_cast<std::int64_t>(block.tasks.size());
    } catch (const Error&) {
    }
    try {
      GeneratorConfig dcfg = cfg;
      dcfg.single_table = false;
      DatabaseInstance db = generate_database(dcfg, pick.db_seed);
      ++databases;
      for (std::size_t e = 0; e < db.relations.size(); ++e) {
        const std::size_t child = static_cast<std::size_t>(db.schema.edges[e].child);
        const std::size_t boundary = db.tables[child].mode_a_rows;
        for (std::int64_t d : parent_degrees_mode(db.relations[e], boundary, false)) {
          pool_a.push_back(d);
        }
        for (std::int64_t d : parent_degrees_mode(db.relations[e], boundary, true)) {
          pool_b.push_back(d);
        }
      }
    } catch (const Error&) {
    }
  }

  report["tasks"] = tasks;
  report["unreadable"] = unreadable;
  report["bytes"] = bytes;
  ordered_json cats;
  for (TaskCategory c : {TaskCategory::single_table, TaskCategory::one_hop, TaskCategory::two_hop}) {
    std::string name = task_category_name(c);
    cats[name] = by_category.contains(name) ? by_category[name] : 0;
  }
  report["by_category"] = cats;

  ordered_json prev;
  prev["mean"] = prevalences.empty() ? 0.0 : sorted_sum(prevalences) / prevalences.size();
  prev["histogram"] = prevalence_bins;
  report["label_prevalence"] = prev;

  ordered_json corr;
  corr["sampled"] = corr_sampled;
  corr["within_gt_cross"] = corr_within_gt;
  corr["mean_within"] = corr_within.empty() ? 0.0 : sorted_sum(corr_within) / corr_within.size();
  corr["mean_cross"] = corr_cross.empty() ? 0.0 : sorted_sum(corr_cross) / corr_cross.size();
  report["correlation"] = corr;

  ordered_json degrees;
  degrees["databases"] = databases;
  degrees["gini_mode_a"] = pool_a.empty() ? ordered_json() : ordered_json(gini(pool_a));
  degrees["gini_mode_b"] = pool_b.empty() ? ordered_json() : ordered_json(gini(pool_b));
  report["degrees"] = degrees;

  ordered_json throughput;
  throughput["blocks_timed"] = blocks_timed;
  throughput["tasks_built"] = tasks_built;
  throughput["tasks_per_minute"] =
      regen_seconds > 0.0 ? 60.0 * static_cast<double>(tasks_built) / regen_seconds : 0.0;
  report["throughput"] = throughput;

  std::cout << report.dump(2) << "\n";
  return 0;
}

struct DfsArgs {
  std::string db_path;
  std::int32_t target = -1;
  std::int32_t depth = 2;
  std::int32_t width = 30;
  std::uint64_t seed = 0;
  std::string out_path;
};

int cmd_dfs(const DfsArgs& args) {
  DatabaseInstance db = read_database(args.db_path);
  if (args.target < 0 || static_cast<std::size_t>(args.target) >= db.schema.tables.size()) {
    throw ConfigError("target: table index out of range");
  }
  DfsConfig cfg;
  cfg.depth = args.depth;
  cfg.standard_width = args.width;
  cfg.validate();
  Rng rng(args.seed);
  LinearizedTask lin = dfs_linearize(db, args.target, cfg, rng);

  ordered_json doc;
  doc["target_table"] = lin.target_table;
  doc["rows"] = lin.x.rows();
  doc["width"] = lin.width();
  doc["row_ids"] = lin.row_ids;
  ordered_json prov = ordered_json::array();
  for (const FeaturePath& p : lin.provenance) prov.push_back(path_to_json(p));
  doc["provenance"] = prov;
  ordered_json x = ordered_json::array();
  ordered_json missing = ordered_json::array();
  for (std::size_t r = 0; r < lin.x.rows(); ++r) {
    ordered_json xrow = ordered_json::array();
    ordered_json mrow = ordered_json::array();
    for (std::size_t c = 0; c < lin.x.cols(); ++c) {
      xrow.push_back(lin.x(r, c));
      mrow.push_back(static_cast<int>(lin.missing[r * lin.x.cols() + c]));
    }
    x.push_back(std::move(xrow));
    missing.push_back(std::move(mrow));
  }
  doc["x"] = x;
  doc["missing"] = missing;

  std::ofstream file;
  std::ostream& out = open_output(args.out_path, file);
  out << doc.dump(2) << "\n";
  return 0;
}

struct EvalArgs {
  std::string dir;
  std::string baseline = "logistic";
  EvalConfig cfg;
  std::string out_path;
};

int cmd_eval(const EvalArgs& args) {
  const Baseline baseline = baseline_from_name(args.baseline);
  args.cfg.validate();
  fs::path dir(args.dir);
  std::vector<ordered_json> entries = read_manifest(dir);

  std::ofstream file;
  std::ostream& out = open_output(args.out_path, file);

  // Tasks stream one at a time; aggregation matches evaluate_stream:
  // degenerate tasks are skipped, mean uses an order-invariant sum and the
  // median averages the middle pair on even counts.
  std::int64_t evaluated = 0, skipped = 0;
  std::vector<double> aucs;
  for (const ordered_json& entry : entries) {
    if (entry.contains("parse_error") || !entry.contains("file")) {
      throw FormatError("unreadable manifest entry in " + dir.string());
    }
    IclTask task = read_task(dir / entry["file"].get<std::string>());
    try {
      EvalResult r = evaluate_task(task, baseline, args.cfg);
      ++evaluated;
      aucs.push_back(r.auc);
      out << eval_result_to_json(r).dump() << "\n";
    } catch (const DegenerateError&) {
      ++skipped;
    }
  }

  double mean = 0.0, median = 0.0;
  if (!aucs.empty()) {
    std::vector<double> sorted = aucs;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    mean = sorted_sum(sorted) / static_cast<double>(sorted.size());
  }
  ordered_json summary;
  summary["summary"] = true;
  summary["baseline"] = args.baseline;
  summary["evaluated"] = evaluated;
  summary["skipped"] = skipped;
  summary["mean_auc"] = mean;
  summary["median_auc"] = median;
  out << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relgen: synthesizes relational databases from a three-stage prior and "
               "linearizes them into binary in-context classification tasks"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 failure or findings, 2 configuration or usage "
             "error, 3 I/O error. Errors print one JSON line on stderr.");

  GenerateArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("generate", "Stream a seeded task corpus to a directory");
  gen_cmd->add_option("-c,--config", gen.config_path, "Generator config JSON (defaults applied)");
  gen_cmd->add_option("-n,--count", gen.count, "Number of tasks to produce")->required();
  gen_cmd->add_option("-o,--out", gen.out_dir, "Output directory")->required();
  CLI::Option* seed_opt =
      gen_cmd->add_option("--seed", gen.seed, "Corpus seed; overrides the config value")
          ->envname("RELGEN_SEED");
  gen_cmd->add_option("--workers", gen.workers, "Worker threads");

  std::string validate_target;
  CLI::App* val_cmd =
      app.add_subcommand("validate", "Check a corpus directory, database JSON or task file");
  val_cmd->add_option("path", validate_target, "Corpus directory, .json database or task binary")
      ->required();

  std::string stats_dir;
  std::int32_t stats_sample = 8;
  CLI::App* stats_cmd = app.add_subcommand("stats", "Summarize a corpus directory");
  stats_cmd->add_option("dir", stats_dir, "Corpus directory")->required();
  stats_cmd->add_option("--sample", stats_sample,
                        "Blocks to regenerate for correlation, degree and timing stats");

  DfsArgs dfs;
  CLI::App* dfs_cmd = app.add_subcommand("dfs", "Linearize a serialized database");
  dfs_cmd->add_option("--db", dfs.db_path, "Database JSON path")->required();
  dfs_cmd->add_option("--target", dfs.target, "Anchor table index")->required();
  dfs_cmd->add_option("--depth", dfs.depth, "Feature path depth")->check(CLI::IsMember({1, 2}));
  dfs_cmd->add_option("--width", dfs.width, "Feature columns after subsampling");
  dfs_cmd->add_option("--seed", dfs.seed, "Column subsampling seed")->envname("RELGEN_SEED");
  dfs_cmd->add_option("-o,--out", dfs.out_path, "Output JSON path (default stdout)");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Run a baseline over every task in a corpus");
  eval_cmd->add_option("--dir", ev.dir, "Corpus directory")->required();
  eval_cmd->add_option("--baseline", ev.baseline, "Baseline model")
      ->check(CLI::IsMember({"logistic", "knn"}));
  eval_cmd->add_option("--l2", ev.cfg.l2, "Logistic ridge strength");
  eval_cmd->add_option("--iters", ev.cfg.iters, "Logistic gradient steps");
  eval_cmd->add_option("--knn-k", ev.cfg.knn_k, "Neighbor count");
  eval_cmd->add_option("-o,--out", ev.out_path, "Results JSON-lines path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error_line(e.what(), "usage");
    return 2;
  }
  gen.seed_given = seed_opt->count() > 0;

  try {
    if (gen_cmd->parsed()) return cmd_generate(gen);
    if (val_cmd->parsed()) return cmd_validate(validate_target);
    if (stats_cmd->parsed()) return cmd_stats(stats_dir, stats_sample);
    if (dfs_cmd->parsed()) return cmd_dfs(dfs);
    if (eval_cmd->parsed()) return cmd_eval(ev);
  } catch (const Error& e) {
    emit_error_line(e.what(), error_kind_name(e.kind()));
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    emit_error_line(e.what(), "internal");
    return 1;
  }
  return 0;
}
