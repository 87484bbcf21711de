#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relgen/schema.hpp"
#include "relgen/struct_gen.hpp"
#include "relgen/temporal.hpp"

namespace relgen {

struct ContentConfig {
  std::int32_t rounds = 2;        ///< message passing rounds K
  std::int32_t msg_dim = 8;
  std::int32_t hidden_dim = 16;
  std::int32_t trunk_dim = 12;
  double clip_abs_min = 2.0;      ///< per-column clip bound drawn from this range
  double clip_abs_max = 4.0;

  void validate() const;
};

struct DfsConfig {
  std::int32_t depth = 2;               ///< feature path depth, 1 or 2
  std::int32_t overgen_depth1 = 60;     ///< evaluated column budget at depth 1
  std::int32_t overgen_depth2 = 90;     ///< evaluated column budget at depth 2
  std::int32_t standard_width = 30;     ///< final feature width after subsampling
  std::vector<std::string> aggregators = {"mean", "max", "min", "count", "mode"};

  std::int32_t overgen_width() const { return depth == 1 ? overgen_depth1 : overgen_depth2; }
  void validate() const;
};

struct TaskConfig {
  std::int32_t task_rows = 600;
  std::int32_t min_task_rows = 32;       ///< smaller tasks are discarded
  std::int32_t targets_per_schema = 6;
  std::int32_t n_ctx = 512;
  std::int32_t max_context_resample = 10;
  std::int32_t min_ctx_for_both_classes = 4;  ///< contexts this large must mix classes
  std::int32_t single_table_width = 18;

  void validate() const;
};

/// Corpus composition; normalized before use. Defaults follow the
/// 600k : (800k + 200k) : 200k single/1-hop/2-hop split.
struct CorpusMix {
  double single_table = 6.0 / 18.0;
  double one_hop = 10.0 / 18.0;
  double two_hop = 2.0 / 18.0;
};

struct CorpusConfig {
  CorpusMix mix;

  void validate() const;
};

struct GeneratorConfig {
  std::int32_t version = 1;
  std::uint64_t seed = 0;
  bool single_table = false;  ///< force one-table schemas and the narrow width
  SchemaConfig schema;
  TemporalConfig temporal;
  StructConfig structure;
  ContentConfig content;
  DfsConfig dfs;
  TaskConfig task;
  CorpusConfig corpus;

  void validate() const;
};

GeneratorConfig default_config();

/// Strict parse: any unknown or mistyped field raises ConfigError naming the
/// full field path. Absent fields keep their defaults.
GeneratorConfig config_from_json(const nlohmann::json& j);
GeneratorConfig load_config(const std::filesystem::path& path);

/// Full echo with every default resolved; stable field order.
nlohmann::ordered_json config_to_json(const GeneratorConfig& cfg);

/// FNV-1a 64 hex digest of the canonical JSON dump.
std::string config_digest(const GeneratorConfig& cfg);

}  // namespace relgen
