#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relgen/config.hpp"
#include "relgen/instance.hpp"
#include "relgen/task.hpp"

namespace relgen {

inline constexpr std::array<char, 8> kTaskMagic = {'R', 'D', 'B', 'P', 'F', 'N', '0', '1'};
inline constexpr std::uint32_t kTaskFormatVersion = 1;
inline constexpr std::size_t kTaskHeaderSize = 68;
inline constexpr std::uint32_t kTaskFlagMask = 1;  ///< bit 0: missing mask present

/// Fixed little-endian preamble of a task file. Payloads are packed back to
/// back directly after the header, so every offset is load-bearing: a reader
/// rejects any file whose offsets, flags, or sizes disagree with the packed
/// layout.
struct TaskFileHeader {
  std::uint32_t version = kTaskFormatVersion;
  std::uint32_t n_rows = 0;  ///< context plus query rows
  std::uint32_t width = 0;
  std::uint32_t n_ctx = 0;
  std::uint32_t flags = 0;
  std::uint64_t x_offset = 0;     ///< f32 column-major cells, context rows first
  std::uint64_t y_offset = 0;     ///< u8 labels, context rows first
  std::uint64_t rows_offset = 0;  ///< i64 source row ids, context rows first
  std::uint64_t mask_offset = 0;  ///< LSB-first bitset over column-major cells; 0 when absent
  std::uint64_t file_size = 0;
};

/// Writes the binary task file plus a "<path>.json" sidecar carrying the task
/// meta, per-column provenance, and the full generator config with its
/// digest. Two writes of the same task are byte-identical. Throws
/// DimensionError on internally inconsistent tasks and IoError on filesystem
/// failure.
void write_task(const IclTask& task, const std::filesystem::path& path,
                const GeneratorConfig& cfg);

/// Exact inverse of write_task. Throws IoError when either file is missing
/// and FormatError on any structural corruption: bad magic or version,
/// truncation, non-packed offsets, unknown flags, non-finite cells, labels
/// outside {0,1}, stray mask padding bits, or a sidecar that disagrees with
/// the header.
IclTask read_task(const std::filesystem::path& path);

/// Parsed "<path>.json" sidecar for a task file.
nlohmann::ordered_json read_task_sidecar(const std::filesystem::path& path);

nlohmann::ordered_json database_to_json(const DatabaseInstance& db);
DatabaseInstance database_from_json(const nlohmann::json& j);

/// JSON database files; relations are rebuilt from FK cells on read.
void write_database(const DatabaseInstance& db, const std::filesystem::path& path);
DatabaseInstance read_database(const std::filesystem::path& path);

struct CorpusStats {
  std::int64_t written = 0;
  std::int64_t blocks = 0;  ///< blocks consumed from the deterministic sequence
  TaskBuildStats discards;
  std::array<std::int64_t, 3> by_category = {0, 0, 0};  ///< indexed by TaskCategory
  double seconds = 0.0;
  double tasks_per_minute = 0.0;
};

nlohmann::ordered_json corpus_stats_to_json(const CorpusStats& stats);

/// Deterministic per-block database seed for a corpus.
std::uint64_t corpus_block_seed(std::uint64_t corpus_seed, std::int64_t block);

/// Deterministic low-discrepancy category schedule: golden-ratio rotation
/// against the normalized mix, so every prefix of blocks tracks the target
/// proportions within O(log n / n).
TaskCategory corpus_category(const CorpusMix& mix, std::int64_t block);

/// Streams exactly n_tasks task files into out_dir plus a manifest.jsonl
/// listing them in (block, slot) order. Blocks are independent: block b uses
/// corpus_block_seed(cfg.seed, b) and corpus_category(mix, b), so the corpus
/// is a pure function of (cfg, n_tasks) and byte-identical across runs and
/// worker counts. On a worker failure the manifest still covers the completed
/// contiguous block prefix before the error is rethrown.
CorpusStats stream_corpus(const GeneratorConfig& cfg, std::int64_t n_tasks,
                          const std::filesystem::path& out_dir, std::int32_t workers);

}  // namespace relgen
