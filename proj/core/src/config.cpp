#include "relgen/config.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "relgen/errors.hpp"

namespace relgen {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::set<std::string> kAggregatorNames = {"mean", "max", "min", "count", "mode"};

/// Typed field readers. Absent fields keep their defaults; present fields
/// must match the expected JSON type exactly, otherwise the full field path
/// is named in the error.
void wrong_type(const std::string& path, const char* name, const char* expected) {
  throw ConfigError("config field " + path + name + ": expected " + expected);
}

void read_i32(const json& j, const std::string& path, const char* name, std::int32_t& out) {
  auto it = j.find(name);
  if (it == j.end()) return;
  if (!it->is_number_integer()) wrong_type(path, name, "an integer");
  out = it->get<std::int32_t>();
}

void read_u64(const json& j, const std::string& path, const char* name, std::uint64_t& out) {
  auto it = j.find(name);
  if (it == j.end()) return;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    wrong_type(path, name, "a non-negative integer");
  }
  out = it->get<std::uint64_t>();
}

void read_f64(const json& j, const std::string& path, const char* name, double& out) {
  auto it = j.find(name);
  if (it == j.end()) return;
  if (!it->is_number()) wrong_type(path, name, "a number");
  out = it->get<double>();
}

void read_bool(const json& j, const std::string& path, const char* name, bool& out) {
  auto it = j.find(name);
  if (it == j.end()) return;
  if (!it->is_boolean()) wrong_type(path, name, "a boolean");
  out = it->get<bool>();
}

void read_str_list(const json& j, const std::string& path, const char* name,
                   std::vector<std::string>& out) {
  auto it = j.find(name);
  if (it == j.end()) return;
  if (!it->is_array()) wrong_type(path, name, "an array of strings");
  std::vector<std::string> vals;
  for (const auto& v : *it) {
    if (!v.is_string()) wrong_type(path, name, "an array of strings");
    vals.push_back(v.get<std::string>());
  }
  out = std::move(vals);
}

void check_known(const json& j, const std::string& path, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError("config section " + path + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = std::any_of(known.begin(), known.end(),
                          [&](const char* k) { return item.key() == k; });
    if (!ok) throw ConfigError("unknown config field: " + path + item.key());
  }
}

void parse_schema(const json& j, const std::string& path, SchemaConfig& c) {
  check_known(j, path,
              {"min_tables", "max_tables", "min_layers", "max_layers", "min_parents",
               "max_parents", "min_feature_cols", "max_feature_cols", "p_categorical",
               "p_timestamp", "min_cardinality", "max_cardinality"});
  read_i32(j, path, "min_tables", c.min_tables);
  read_i32(j, path, "max_tables", c.max_tables);
  read_i32(j, path, "min_layers", c.min_layers);
  read_i32(j, path, "max_layers", c.max_layers);
  read_i32(j, path, "min_parents", c.min_parents);
  read_i32(j, path, "max_parents", c.max_parents);
  read_i32(j, path, "min_feature_cols", c.min_feature_cols);
  read_i32(j, path, "max_feature_cols", c.max_feature_cols);
  read_f64(j, path, "p_categorical", c.p_categorical);
  read_f64(j, path, "p_timestamp", c.p_timestamp);
  read_i32(j, path, "min_cardinality", c.min_cardinality);
  read_i32(j, path, "max_cardinality", c.max_cardinality);
}

void parse_temporal(const json& j, const std::string& path, TemporalConfig& c) {
  check_known(j, path,
              {"window_seconds", "base_rate", "min_components", "max_components",
               "trend_slope_abs", "min_period_frac", "max_period_frac", "max_amplitude",
               "min_spikes", "max_spikes", "spike_width_frac", "max_spike_magnitude",
               "child_gap_mean"});
  read_f64(j, path, "window_seconds", c.window_seconds);
  read_f64(j, path, "base_rate", c.base_rate);
  read_i32(j, path, "min_components", c.min_components);
  read_i32(j, path, "max_components", c.max_components);
  read_f64(j, path, "trend_slope_abs", c.trend_slope_abs);
  read_f64(j, path, "min_period_frac", c.min_period_frac);
  read_f64(j, path, "max_period_frac", c.max_period_frac);
  read_f64(j, path, "max_amplitude", c.max_amplitude);
  read_i32(j, path, "min_spikes", c.min_spikes);
  read_i32(j, path, "max_spikes", c.max_spikes);
  read_f64(j, path, "spike_width_frac", c.spike_width_frac);
  read_f64(j, path, "max_spike_magnitude", c.max_spike_magnitude);
  read_f64(j, path, "child_gap_mean", c.child_gap_mean);
}

void parse_structure(const json& j, const std::string& path, StructConfig& c) {
  check_known(j, path,
              {"latent_dim", "noise_dim", "embed_dim", "att_dim", "hidden_dim",
               "candidate_count", "mode_mix", "feedback_scale", "mode_b_batch_rows",
               "min_rows", "max_rows"});
  read_i32(j, path, "latent_dim", c.latent_dim);
  read_i32(j, path, "noise_dim", c.noise_dim);
  read_i32(j, path, "embed_dim", c.embed_dim);
  read_i32(j, path, "att_dim", c.att_dim);
  read_i32(j, path, "hidden_dim", c.hidden_dim);
  read_i32(j, path, "candidate_count", c.candidate_count);
  read_f64(j, path, "mode_mix", c.mode_mix);
  read_f64(j, path, "feedback_scale", c.feedback_scale);
  read_i32(j, path, "mode_b_batch_rows", c.mode_b_batch_rows);
  read_i32(j, path, "min_rows", c.min_rows);
  read_i32(j, path, "max_rows", c.max_rows);
}

void parse_content(const json& j, const std::string& path, ContentConfig& c) {
  check_known(j, path,
              {"rounds", "msg_dim", "hidden_dim", "trunk_dim", "clip_abs_min", "clip_abs_max"});
  read_i32(j, path, "rounds", c.rounds);
  read_i32(j, path, "msg_dim", c.msg_dim);
  read_i32(j, path, "hidden_dim", c.hidden_dim);
  read_i32(j, path, "trunk_dim", c.trunk_dim);
  read_f64(j, path, "clip_abs_min", c.clip_abs_min);
  read_f64(j, path, "clip_abs_max", c.clip_abs_max);
}

void parse_dfs(const json& j, const std::string& path, DfsConfig& c) {
  check_known(j, path,
              {"depth", "overgen_depth1", "overgen_depth2", "standard_width", "aggregators"});
  read_i32(j, path, "depth", c.depth);
  read_i32(j, path, "overgen_depth1", c.overgen_depth1);
  read_i32(j, path, "overgen_depth2", c.overgen_depth2);
  read_i32(j, path, "standard_width", c.standard_width);
  read_str_list(j, path, "aggregators", c.aggregators);
}

void parse_task(const json& j, const std::string& path, TaskConfig& c) {
  check_known(j, path,
              {"task_rows", "min_task_rows", "targets_per_schema", "n_ctx",
               "max_context_resample", "min_ctx_for_both_classes", "single_table_width"});
  read_i32(j, path, "task_rows", c.task_rows);
  read_i32(j, path, "min_task_rows", c.min_task_rows);
  read_i32(j, path, "targets_per_schema", c.targets_per_schema);
  read_i32(j, path, "n_ctx", c.n_ctx);
  read_i32(j, path, "max_context_resample", c.max_context_resample);
  read_i32(j, path, "min_ctx_for_both_classes", c.min_ctx_for_both_classes);
  read_i32(j, path, "single_table_width", c.single_table_width);
}

void parse_corpus(const json& j, const std::string& path, CorpusConfig& c) {
  check_known(j, path, {"mix"});
  auto it = j.find("mix");
  if (it == j.end()) return;
  std::string mix_path = path + "mix.";
  check_known(*it, mix_path, {"single_table", "one_hop", "two_hop"});
  read_f64(*it, mix_path, "single_table", c.mix.single_table);
  read_f64(*it, mix_path, "one_hop", c.mix.one_hop);
  read_f64(*it, mix_path, "two_hop", c.mix.two_hop);
}

}  // namespace

void ContentConfig::validate() const {
  if (rounds < 0) throw ConfigError("content.rounds: negative");
  if (msg_dim < 1 || hidden_dim < 1 || trunk_dim < 1) {
    throw ConfigError("content dimensions: must be positive");
  }
  if (!(clip_abs_min > 0.0) || clip_abs_min > clip_abs_max) {
    throw ConfigError("content.clip_abs_min/clip_abs_max: invalid range");
  }
}

void DfsConfig::validate() const {
  if (depth != 1 && depth != 2) throw ConfigError("dfs.depth: must be 1 or 2");
  if (overgen_depth1 < 1 || overgen_depth2 < 1) {
    throw ConfigError("dfs.overgen_depth1/overgen_depth2: must be positive");
  }
  if (standard_width < 1) throw ConfigError("dfs.standard_width: must be positive");
  if (aggregators.empty()) throw ConfigError("dfs.aggregators: empty");
  std::set<std::string> seen;
  for (const auto& a : aggregators) {
    if (!kAggregatorNames.count(a)) throw ConfigError("dfs.aggregators: unknown name " + a);
    if (!seen.insert(a).second) throw ConfigError("dfs.aggregators: duplicate name " + a);
  }
}

void TaskConfig::validate() const {
  if (min_task_rows < 2) throw ConfigError("task.min_task_rows: must be at least 2");
  if (task_rows < min_task_rows) throw ConfigError("task.task_rows: below task.min_task_rows");
  if (targets_per_schema < 1) throw ConfigError("task.targets_per_schema: must be positive");
  if (n_ctx < 2 || n_ctx >= task_rows) {
    throw ConfigError("task.n_ctx: must be in [2, task.task_rows)");
  }
  if (max_context_resample < 0) throw ConfigError("task.max_context_resample: negative");
  if (min_ctx_for_both_classes < 2) {
    throw ConfigError("task.min_ctx_for_both_classes: must be at least 2");
  }
  if (single_table_width < 1) throw ConfigError("task.single_table_width: must be positive");
}

void CorpusConfig::validate() const {
  if (mix.single_table < 0.0 || mix.one_hop < 0.0 || mix.two_hop < 0.0) {
    throw ConfigError("corpus.mix: negative weight");
  }
  if (mix.single_table + mix.one_hop + mix.two_hop <= 0.0) {
    throw ConfigError("corpus.mix: weights sum to zero");
  }
}

void GeneratorConfig::validate() const {
  if (version != 1) throw ConfigError("version: unsupported config version");
  schema.validate();
  temporal.validate();
  structure.validate();
  content.validate();
  dfs.validate();
  task.validate();
  corpus.validate();
}

GeneratorConfig default_config() { return GeneratorConfig{}; }

GeneratorConfig config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  check_known(j, "",
              {"version", "seed", "single_table", "schema", "temporal", "structure", "content",
               "dfs", "task", "corpus"});
  read_i32(j, "", "version", c.version);
  read_u64(j, "", "seed", c.seed);
  read_bool(j, "", "single_table", c.single_table);
  if (auto it = j.find("schema"); it != j.end()) parse_schema(*it, "schema.", c.schema);
  if (auto it = j.find("temporal"); it != j.end()) parse_temporal(*it, "temporal.", c.temporal);
  if (auto it = j.find("structure"); it != j.end()) {
    parse_structure(*it, "structure.", c.structure);
  }
  if (auto it = j.find("content"); it != j.end()) parse_content(*it, "content.", c.content);
  if (auto it = j.find("dfs"); it != j.end()) parse_dfs(*it, "dfs.", c.dfs);
  if (auto it = j.find("task"); it != j.end()) parse_task(*it, "task.", c.task);
  if (auto it = j.find("corpus"); it != j.end()) parse_corpus(*it, "corpus.", c.corpus);
  c.validate();
  return c;
}

GeneratorConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

nlohmann::ordered_json config_to_json(const GeneratorConfig& cfg) {
  ordered_json j;
  j["version"] = cfg.version;
  j["seed"] = cfg.seed;
  j["single_table"] = cfg.single_table;
  ordered_json s;
  s["min_tables"] = cfg.schema.min_tables;
  s["max_tables"] = cfg.schema.max_tables;
  s["min_layers"] = cfg.schema.min_layers;
  s["max_layers"] = cfg.schema.max_layers;
  s["min_parents"] = cfg.schema.min_parents;
  s["max_parents"] = cfg.schema.max_parents;
  s["min_feature_cols"] = cfg.schema.min_feature_cols;
  s["max_feature_cols"] = cfg.schema.max_feature_cols;
  s["p_categorical"] = cfg.schema.p_categorical;
  s["p_timestamp"] = cfg.schema.p_timestamp;
  s["min_cardinality"] = cfg.schema.min_cardinality;
  s["max_cardinality"] = cfg.schema.max_cardinality;
  j["schema"] = std::move(s);
  ordered_json t;
  t["window_seconds"] = cfg.temporal.window_seconds;
  t["base_rate"] = cfg.temporal.base_rate;
  t["min_components"] = cfg.temporal.min_components;
  t["max_components"] = cfg.temporal.max_components;
  t["trend_slope_abs"] = cfg.temporal.trend_slope_abs;
  t["min_period_frac"] = cfg.temporal.min_period_frac;
  t["max_period_frac"] = cfg.temporal.max_period_frac;
  t["max_amplitude"] = cfg.temporal.max_amplitude;
  t["min_spikes"] = cfg.temporal.min_spikes;
  t["max_spikes"] = cfg.temporal.max_spikes;
  t["spike_width_frac"] = cfg.temporal.spike_width_frac;
  t["max_spike_magnitude"] = cfg.temporal.max_spike_magnitude;
  t["child_gap_mean"] = cfg.temporal.child_gap_mean;
  j["temporal"] = std::move(t);
  ordered_json g;
  g["latent_dim"] = cfg.structure.latent_dim;
  g["noise_dim"] = cfg.structure.noise_dim;
  g["embed_dim"] = cfg.structure.embed_dim;
  g["att_dim"] = cfg.structure.att_dim;
  g["hidden_dim"] = cfg.structure.hidden_dim;
  g["candidate_count"] = cfg.structure.candidate_count;
  g["mode_mix"] = cfg.structure.mode_mix;
  g["feedback_scale"] = cfg.structure.feedback_scale;
  g["mode_b_batch_rows"] = cfg.structure.mode_b_batch_rows;
  g["min_rows"] = cfg.structure.min_rows;
  g["max_rows"] = cfg.structure.max_rows;
  j["structure"] = std::move(g);
  ordered_json c;
  c["rounds"] = cfg.content.rounds;
  c["msg_dim"] = cfg.content.msg_dim;
  c["hidden_dim"] = cfg.content.hidden_dim;
  c["trunk_dim"] = cfg.content.trunk_dim;
  c["clip_abs_min"] = cfg.content.clip_abs_min;
  c["clip_abs_max"] = cfg.content.clip_abs_max;
  j["content"] = std::move(c);
  ordered_json d;
  d["depth"] = cfg.dfs.depth;
  d["overgen_depth1"] = cfg.dfs.overgen_depth1;
  d["overgen_depth2"] = cfg.dfs.overgen_depth2;
  d["standard_width"] = cfg.dfs.standard_width;
  d["aggregators"] = cfg.dfs.aggregators;
  j["dfs"] = std::move(d);
  ordered_json k;
  k["task_rows"] = cfg.task.task_rows;
  k["min_task_rows"] = cfg.task.min_task_rows;
  k["targets_per_schema"] = cfg.task.targets_per_schema;
  k["n_ctx"] = cfg.task.n_ctx;
  k["max_context_resample"] = cfg.task.max_context_resample;
  k["min_ctx_for_both_classes"] = cfg.task.min_ctx_for_both_classes;
  k["single_table_width"] = cfg.task.single_table_width;
  j["task"] = std::move(k);
  ordered_json m;
  m["single_table"] = cfg.corpus.mix.single_table;
  m["one_hop"] = cfg.corpus.mix.one_hop;
  m["two_hop"] = cfg.corpus.mix.two_hop;
  j["corpus"] = ordered_json{{"mix", std::move(m)}};
  return j;
}

std::string config_digest(const GeneratorConfig& cfg) {
  std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::nouppercase;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace relgen
