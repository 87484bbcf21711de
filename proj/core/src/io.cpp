#include "relgen/io.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "relgen/dfs.hpp"
#include "relgen/errors.hpp"
#include "relgen/rng.hpp"

namespace relgen {

namespace {

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_f32(std::vector<std::uint8_t>& out, float v) {
  append_u32(out, std::bit_cast<std::uint32_t>(v));
}

void append_i64(std::vector<std::uint8_t>& out, std::int64_t v) {
  append_u64(out, static_cast<std::uint64_t>(v));
}

std::uint32_t take_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

std::uint64_t take_u64(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void check_task_sizes(const IclTask& task) {
  const std::size_t w = task.x_ctx.cols();
  const std::size_t nc = task.x_ctx.rows();
  const std::size_t nq = task.x_query.rows();
  if (w == 0) throw DimensionError("task has zero feature columns");
  if (nc == 0) throw DimensionError("task has an empty context block");
  if (nq == 0) throw DimensionError("task has an empty query block");
  if (task.x_query.cols() != w) throw DimensionError("context and query widths differ");
  if (task.y_ctx.size() != nc || task.y_query.size() != nq) {
    throw DimensionError("labels do not match the feature rows");
  }
  if (task.missing_ctx.size() != nc * w || task.missing_query.size() != nq * w) {
    throw DimensionError("missing masks do not match the feature blocks");
  }
  if (task.provenance.size() != w) throw DimensionError("provenance does not match the width");
  if (task.ctx_rows.size() != nc || task.query_rows.size() != nq) {
    throw DimensionError("row ids do not match the feature rows");
  }
}

/// Cell (r, c) over the concatenated row blocks, context first.
float task_cell(const IclTask& task, std::size_t r, std::size_t c) {
  const std::size_t nc = task.x_ctx.rows();
  return r < nc ? task.x_ctx(r, c) : task.x_query(r - nc, c);
}

bool task_cell_missing(const IclTask& task, std::size_t r, std::size_t c) {
  const std::size_t nc = task.x_ctx.rows();
  const std::size_t w = task.x_ctx.cols();
  return (r < nc ? task.missing_ctx[r * w + c] : task.missing_query[(r - nc) * w + c]) != 0;
}

nlohmann::ordered_json meta_to_json(const TaskMeta& meta, std::uint32_t n_ctx) {
  nlohmann::ordered_json j;
  j["db_seed"] = meta.db_seed;
  j["category"] = task_category_name(meta.category);
  j["target_table"] = meta.target_table;
  j["target_column"] = meta.target_column;
  j["positive_class"] = meta.positive_class;
  j["threshold"] = meta.threshold;
  j["n_ctx"] = n_ctx;
  return j;
}

TaskMeta meta_from_json(const nlohmann::json& j) {
  TaskMeta meta;
  meta.db_seed = j.at("db_seed").get<std::uint64_t>();
  meta.category = task_category_from_name(j.at("category").get<std::string>());
  meta.target_table = j.at("target_table").get<std::int32_t>();
  meta.target_column = j.at("target_column").get<std::int32_t>();
  meta.positive_class = j.at("positive_class").get<std::int32_t>();
  meta.threshold = j.at("threshold").get<double>();
  meta.n_ctx = j.at("n_ctx").get<std::int32_t>();
  return meta;
}

}  // namespace

void write_task(const IclTask& task, const std::filesystem::path& path,
                const GeneratorConfig& cfg) {
  check_task_sizes(task);
  const std::size_t w = task.x_ctx.cols();
  const std::size_t nc = task.x_ctx.rows();
  const std::size_t n = nc + task.x_query.rows();

  bool any_missing = false;
  for (std::uint8_t v : task.missing_ctx) any_missing = any_missing || v != 0;
  for (std::uint8_t v : task.missing_query) any_missing = any_missing || v != 0;

  const std::size_t x_len = 4 * n * w;
  const std::size_t y_len = n;
  const std::size_t rows_len = 8 * n;
  const std::size_t mask_len = any_missing ? (n * w + 7) / 8 : 0;

  TaskFileHeader h;
  h.n_rows = static_cast<std::uint32_t>(n);
  h.width = static_cast<std::uint32_t>(w);
  h.n_ctx = static_cast<std::uint32_t>(nc);
  h.flags = any_missing ? kTaskFlagMask : 0;
  h.x_offset = kTaskHeaderSize;
  h.y_offset = h.x_offset + x_len;
  h.rows_offset = h.y_offset + y_len;
  h.mask_offset = any_missing ? h.rows_offset + rows_len : 0;
  h.file_size = h.rows_offset + rows_len + mask_len;

  std::vector<std::uint8_t> bytes;
  bytes.reserve(h.file_size);
  for (char c : kTaskMagic) bytes.push_back(static_cast<std::uint8_t>(c));
  append_u32(bytes, h.version);
  append_u32(bytes, h.n_rows);
  append_u32(bytes, h.width);
  append_u32(bytes, h.n_ctx);
  append_u32(bytes, h.flags);
  append_u64(bytes, h.x_offset);
  append_u64(bytes, h.y_offset);
  append_u64(bytes, h.rows_offset);
  append_u64(bytes, h.mask_offset);
  append_u64(bytes, h.file_size);

  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < n; ++r) append_f32(bytes, task_cell(task, r, c));
  }
  for (std::uint8_t v : task.y_ctx) bytes.push_back(v != 0 ? 1 : 0);
  for (std::uint8_t v : task.y_query) bytes.push_back(v != 0 ? 1 : 0);
  for (std::int64_t v : task.ctx_rows) append_i64(bytes, v);
  for (std::int64_t v : task.query_rows) append_i64(bytes, v);
  if (any_missing) {
    std::vector<std::uint8_t> mask(mask_len, 0);
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t r = 0; r < n; ++r) {
        if (task_cell_missing(task, r, c)) {
          std::size_t cell = c * n + r;
          mask[cell / 8] |= static_cast<std::uint8_t>(1u << (cell % 8));
        }
      }
    }
    bytes.insert(bytes.end(), mask.begin(), mask.end());
  }
  if (bytes.size() != h.file_size) throw ContractError("task payload layout out of sync");
  write_file_bytes(path, bytes.data(), bytes.size());

  nlohmann::ordered_json side;
  side["format"] = "relgen-task-sidecar";
  side["sidecar_version"] = 1;
  side["meta"] = meta_to_json(task.meta, h.n_ctx);
  nlohmann::ordered_json prov = nlohmann::ordered_json::array();
  for (const FeaturePath& p : task.provenance) prov.push_back(path_to_json(p));
  side["provenance"] = std::move(prov);
  side["config_digest"] = config_digest(cfg);
  side["config"] = config_to_json(cfg);
  std::string text = side.dump(2);
  text.push_back('\n');
  write_file_bytes(sidecar_path(path), text.data(), text.size());
}

nlohmann::ordered_json read_task_sidecar(const std::filesystem::path& path) {
  std::filesystem::path sp = sidecar_path(path);
  std::vector<std::uint8_t> bytes = read_file_bytes(sp);
  try {
    return nlohmann::ordered_json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad sidecar " + sp.string() + ": " + e.what());
  }
}

IclTask read_task(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_file_bytes(path);
  auto corrupt = [&](const std::string& why) {
    return FormatError("corrupt task file " + path.string() + ": " + why);
  };
  if (bytes.size() < kTaskHeaderSize) throw corrupt("shorter than the header");
  for (std::size_t i = 0; i < kTaskMagic.size(); ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(kTaskMagic[i])) throw corrupt("bad magic");
  }
  TaskFileHeader h;
  h.version = take_u32(bytes, 8);
  h.n_rows = take_u32(bytes, 12);
  h.width = take_u32(bytes, 16);
  h.n_ctx = take_u32(bytes, 20);
  h.flags = take_u32(bytes, 24);
  h.x_offset = take_u64(bytes, 28);
  h.y_offset = take_u64(bytes, 36);
  h.rows_offset = take_u64(bytes, 44);
  h.mask_offset = take_u64(bytes, 52);
  h.file_size = take_u64(bytes, 60);

  if (h.version != kTaskFormatVersion) throw corrupt("unsupported version");
  if ((h.flags & ~kTaskFlagMask) != 0) throw corrupt("unknown flags");
  if (h.width == 0) throw corrupt("zero width");
  if (h.n_ctx == 0) throw corrupt("zero-row context");
  if (h.n_rows <= h.n_ctx) throw corrupt("zero-row query");

  const std::size_t n = h.n_rows;
  const std::size_t w = h.width;
  const bool has_mask = (h.flags & kTaskFlagMask) != 0;
  const std::size_t mask_len = has_mask ? (n * w + 7) / 8 : 0;
  // The writer packs payloads back to back; accept nothing else.
  if (h.x_offset != kTaskHeaderSize) throw corrupt("x payload not packed after the header");
  if (h.y_offset != h.x_offset + 4 * n * w) throw corrupt("y payload offset inconsistent");
  if (h.rows_offset != h.y_offset + n) throw corrupt("row id payload offset inconsistent");
  std::uint64_t end = h.rows_offset + 8 * n;
  if (has_mask) {
    if (h.mask_offset != end) throw corrupt("mask payload offset inconsistent");
    end += mask_len;
  } else if (h.mask_offset != 0) {
    throw corrupt("mask offset set without the mask flag");
  }
  if (h.file_size != end) throw corrupt("declared size disagrees with the layout");
  if (bytes.size() != h.file_size) throw corrupt("actual size disagrees with the header");

  IclTask task;
  const std::size_t nc = h.n_ctx;
  const std::size_t nq = n - nc;
  task.x_ctx = Matrix(nc, w);
  task.x_query = Matrix(nq, w);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      float v = std::bit_cast<float>(take_u32(bytes, h.x_offset + 4 * (c * n + r)));
      if (!std::isfinite(v)) throw corrupt("non-finite feature cell");
      if (r < nc) {
        task.x_ctx(r, c) = v;
      } else {
        task.x_query(r - nc, c) = v;
      }
    }
  }
  task.y_ctx.resize(nc);
  task.y_query.resize(nq);
  for (std::size_t r = 0; r < n; ++r) {
    std::uint8_t v = bytes[h.y_offset + r];
    if (v > 1) throw corrupt("label outside {0,1}");
    (r < nc ? task.y_ctx[r] : task.y_query[r - nc]) = v;
  }
  task.ctx_rows.resize(nc);
  task.query_rows.resize(nq);
  for (std::size_t r = 0; r < n; ++r) {
    std::int64_t v = static_cast<std::int64_t>(take_u64(bytes, h.rows_offset + 8 * r));
    (r < nc ? task.ctx_rows[r] : task.query_rows[r - nc]) = v;
  }
  task.missing_ctx.assign(nc * w, 0);
  task.missing_query.assign(nq * w, 0);
  if (has_mask) {
    for (std::size_t bit = n * w; bit < mask_len * 8; ++bit) {
      if ((bytes[h.mask_offset + bit / 8] >> (bit % 8)) & 1u) {
        throw corrupt("mask padding bits set");
      }
    }
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t cell = c * n + r;
        if ((bytes[h.mask_offset + cell / 8] >> (cell % 8)) & 1u) {
          if (r < nc) {
            task.missing_ctx[r * w + c] = 1;
          } else {
            task.missing_query[(r - nc) * w + c] = 1;
          }
        }
      }
    }
  }

  nlohmann::ordered_json side = read_task_sidecar(path);
  try {
    task.meta = meta_from_json(side.at("meta"));
    for (const auto& pj : side.at("provenance")) task.provenance.push_back(path_from_json(pj));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  if (task.provenance.size() != w) throw corrupt("sidecar provenance disagrees with the width");
  if (task.meta.n_ctx != static_cast<std::int32_t>(nc)) {
    throw corrupt("sidecar context size disagrees with the header");
  }
  return task;
}

nlohmann::ordered_json database_to_json(const DatabaseInstance& db) {
  nlohmann::ordered_json j;
  j["format"] = "relgen-database";
  j["version"] = 1;
  j["seed"] = db.seed;
  j["schema"] = db.schema.to_json();
  nlohmann::ordered_json tables = nlohmann::ordered_json::array();
  for (const TableData& td : db.tables) {
    nlohmann::ordered_json tj;
    tj["mode_a_rows"] = td.mode_a_rows;
    nlohmann::ordered_json timestamps = nlohmann::ordered_json::array();
    nlohmann::ordered_json latents = nlohmann::ordered_json::array();
    nlohmann::ordered_json embeds = nlohmann::ordered_json::array();
    for (const RowNode& row : td.rows) {
      timestamps.push_back(row.timestamp);
      latents.push_back(row.latent);
      embeds.push_back(row.embed);
    }
    tj["timestamps"] = std::move(timestamps);
    tj["latents"] = std::move(latents);
    tj["embeds"] = std::move(embeds);
    tj["fk"] = td.fk;
    nlohmann::ordered_json cols = nlohmann::ordered_json::array();
    for (const ColumnValues& cv : td.columns) {
      nlohmann::ordered_json cj;
      cj["kind"] = column_kind_name(cv.kind);
      if (cv.kind == ColumnKind::categorical) {
        cj["cls"] = cv.cls;
      } else {
        cj["num"] = cv.num;
      }
      cols.push_back(std::move(cj));
    }
    tj["columns"] = std::move(cols);
    tables.push_back(std::move(tj));
  }
  j["tables"] = std::move(tables);
  return j;
}

DatabaseInstance database_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "relgen-database") {
      throw FormatError("not a database document");
    }
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported database version");
    DatabaseInstance db;
    db.seed = j.at("seed").get<std::uint64_t>();
    db.schema = SchemaGraph::from_json(j.at("schema"));
    for (const auto& tj : j.at("tables")) {
      TableData td;
      td.mode_a_rows = tj.at("mode_a_rows").get<std::size_t>();
      const auto& timestamps = tj.at("timestamps");
      const auto& latents = tj.at("latents");
      const auto& embeds = tj.at("embeds");
      if (latents.size() != timestamps.size() || embeds.size() != timestamps.size()) {
        throw FormatError("row arrays disagree in length");
      }
      td.rows.resize(timestamps.size());
      for (std::size_t r = 0; r < td.rows.size(); ++r) {
        td.rows[r].timestamp = timestamps[r].get<double>();
        td.rows[r].latent = latents[r].get<Vector>();
        td.rows[r].embed = embeds[r].get<Vector>();
      }
      td.fk = tj.at("fk").get<std::vector<std::vector<std::int64_t>>>();
      for (const auto& cj : tj.at("columns")) {
        ColumnValues cv;
        cv.kind = column_kind_from_name(cj.at("kind").get<std::string>());
        if (cv.kind == ColumnKind::categorical) {
          cv.cls = cj.at("cls").get<std::vector<std::int32_t>>();
        } else {
          cv.num = cj.value("num", std::vector<float>{});
        }
        td.columns.push_back(std::move(cv));
      }
      db.tables.push_back(std::move(td));
    }
    if (db.tables.size() != db.schema.tables.size()) {
      throw FormatError("table count disagrees with the schema");
    }
    // Tolerant adjacency rebuild: dangling fk cells are kept in parent_of but
    // never indexed, so a corrupted document still loads and validate_database
    // can report the violation as a finding.
    db.relations.resize(db.schema.edges.size());
    for (std::size_t e = 0; e < db.schema.edges.size(); ++e) {
      const SchemaEdge& edge = db.schema.edges[e];
      if (edge.child < 0 || static_cast<std::size_t>(edge.child) >= db.tables.size() ||
          edge.parent < 0 || static_cast<std::size_t>(edge.parent) >= db.tables.size()) {
        continue;
      }
      const TableData& child = db.tables[edge.child];
      const TableData& parent = db.tables[edge.parent];
      std::vector<std::size_t> fks = db.schema.tables[edge.child].fk_columns();
      std::size_t slot = fks.size();
      for (std::size_t i = 0; i < fks.size(); ++i) {
        if (static_cast<std::int32_t>(fks[i]) == edge.fk_column) slot = i;
      }
      if (slot >= fks.size() || slot >= child.fk.size()) continue;
      Relation& rel = db.relations[e];
      rel.children_of.assign(parent.n_rows(), {});
      rel.parent_of = child.fk[slot];
      for (std::size_t r = 0; r < rel.parent_of.size(); ++r) {
        std::int64_t p = rel.parent_of[r];
        if (p >= 0 && p < static_cast<std::int64_t>(parent.n_rows())) {
          rel.children_of[p].push_back(static_cast<std::int64_t>(r));
        }
      }
    }
    return db;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad database document: ") + e.what());
  }
}

void write_database(const DatabaseInstance& db, const std::filesystem::path& path) {
  std::string text = database_to_json(db).dump(2);
  text.push_back('\n');
  write_file_bytes(path, text.data(), text.size());
}

DatabaseInstance read_database(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad database file " + path.string() + ": " + e.what());
  }
  return database_from_json(j);
}

nlohmann::ordered_json corpus_stats_to_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["written"] = stats.written;
  j["blocks"] = stats.blocks;
  nlohmann::ordered_json d;
  d["no_target"] = stats.discards.no_target;
  d["degenerate_label"] = stats.discards.degenerate_label;
  d["too_few_rows"] = stats.discards.too_few_rows;
  d["split_failed"] = stats.discards.split_failed;
  d["total"] = stats.discards.discarded();
  j["discarded"] = std::move(d);
  nlohmann::ordered_json mix;
  for (int c = 0; c < 3; ++c) {
    mix[task_category_name(static_cast<TaskCategory>(c))] = stats.by_category[c];
  }
  j["by_category"] = std::move(mix);
  j["seconds"] = stats.seconds;
  j["tasks_per_minute"] = stats.tasks_per_minute;
  return j;
}

std::uint64_t corpus_block_seed(std::uint64_t corpus_seed, std::int64_t block) {
  return Rng(corpus_seed).child(20).child(static_cast<std::uint64_t>(block)).next_u64();
}

TaskCategory corpus_category(const CorpusMix& mix, std::int64_t block) {
  double total = mix.single_table + mix.one_hop + mix.two_hop;
  if (!(total > 0.0)) throw ConfigError("corpus mix sums to zero");
  constexpr double kInvPhi = 0.61803398874989485;
  double u = std::fmod((static_cast<double>(block) + 1.0) * kInvPhi, 1.0);
  if (u < mix.single_table / total) return TaskCategory::single_table;
  if (u < (mix.single_table + mix.one_hop) / total) return TaskCategory::one_hop;
  return TaskCategory::two_hop;
}

namespace {

struct BlockRecord {
  std::int64_t block = 0;
  std::uint64_t db_seed = 0;
  TaskCategory category = TaskCategory::single_table;
  TaskBuildStats stats;
  std::vector<std::string> files;  ///< one binary name per built task, slot order
  std::vector<TaskMeta> metas;
};

std::string task_file_name(std::uint64_t db_seed, std::size_t slot) {
  return "task_" + hex16(db_seed) + "_" + std::to_string(slot) + ".bin";
}

void remove_task_files(const std::filesystem::path& dir, const std::string& name) {
  std::error_code ec;
  std::filesystem::remove(dir / name, ec);
  std::filesystem::remove(sidecar_path(dir / name), ec);
}

/// Keeps the first n_tasks tasks in (block, slot) order, deletes the rest,
/// and writes the manifest. records must be sorted by block.
CorpusStats finalize_corpus(const std::vector<BlockRecord>& records, std::int64_t n_tasks,
                            const std::filesystem::path& out_dir, double seconds) {
  CorpusStats stats;
  stats.seconds = seconds;
  std::ofstream manifest(out_dir / "manifest.jsonl", std::ios::trunc);
  if (!manifest) throw IoError("cannot open " + (out_dir / "manifest.jsonl").string());
  for (const BlockRecord& rec : records) {
    const bool consumed = stats.written < n_tasks;
    std::size_t keep = 0;
    if (consumed) {
      keep = std::min<std::size_t>(rec.files.size(),
                                   static_cast<std::size_t>(n_tasks - stats.written));
    }
    for (std::size_t s = keep; s < rec.files.size(); ++s) {
      remove_task_files(out_dir, rec.files[s]);
    }
    if (!consumed) continue;
    for (std::size_t s = 0; s < keep; ++s) {
      nlohmann::ordered_json line;
      line["index"] = stats.written + static_cast<std::int64_t>(s);
      line["block"] = rec.block;
      line["slot"] = s;
      line["file"] = rec.files[s];
      line["db_seed"] = rec.db_seed;
      line["category"] = task_category_name(rec.metas[s].category);
      line["target_table"] = rec.metas[s].target_table;
      line["target_column"] = rec.metas[s].target_column;
      line["positive_class"] = rec.metas[s].positive_class;
      line["n_ctx"] = rec.metas[s].n_ctx;
      manifest << line.dump() << "\n";
    }
    stats.written += static_cast<std::int64_t>(keep);
    stats.blocks += 1;
    stats.by_category[static_cast<int>(rec.category)] += static_cast<std::int64_t>(keep);
    stats.discards.no_target += rec.stats.no_target;
    stats.discards.degenerate_label += rec.stats.degenerate_label;
    stats.discards.too_few_rows += rec.stats.too_few_rows;
    stats.discards.split_failed += rec.stats.split_failed;
    stats.discards.built += rec.stats.built;
  }
  manifest.flush();
  if (!manifest) throw IoError("write failed: " + (out_dir / "manifest.jsonl").string());
  if (seconds > 0.0) stats.tasks_per_minute = 60.0 * static_cast<double>(stats.written) / seconds;
  return stats;
}

}  // namespace

CorpusStats stream_corpus(const GeneratorConfig& cfg, std::int64_t n_tasks,
                          const std::filesystem::path& out_dir, std::int32_t workers) {
  cfg.validate();
  if (n_tasks < 0) throw ConfigError("n_tasks must be non-negative");
  if (workers < 1) throw ConfigError("workers must be positive");
  std::filesystem::create_directories(out_dir);

  auto start = std::chrono::steady_clock::now();
  std::atomic<std::int64_t> next_block{0};
  std::atomic<std::int64_t> built_total{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::vector<BlockRecord> records;
  std::exception_ptr first_error;

  // Gives up only when nothing at all has been built after far more blocks
  // than a healthy config needs, so one barren block never aborts a corpus.
  const std::int64_t targets = std::max<std::int32_t>(cfg.task.targets_per_schema, 1);
  const std::int64_t give_up = 64 + 8 * (n_tasks / targets + 1);

  auto work = [&]() {
    while (!failed.load() && built_total.load() < n_tasks) {
      std::int64_t b = next_block.fetch_add(1);
      try {
        if (built_total.load() == 0 && b >= give_up) {
          throw GenerationError("corpus produced no tasks after " + std::to_string(b) +
                                " blocks");
        }
        BlockRecord rec;
        rec.block = b;
        rec.category = corpus_category(cfg.corpus.mix, b);
        rec.db_seed = corpus_block_seed(cfg.seed, b);
        BlockTasks built = build_tasks(cfg, rec.db_seed, rec.category);
        rec.stats = built.stats;
        for (std::size_t s = 0; s < built.tasks.size(); ++s) {
          std::string name = task_file_name(rec.db_seed, s);
          write_task(built.tasks[s], out_dir / name, cfg);
          rec.files.push_back(std::move(name));
          rec.metas.push_back(built.tasks[s].meta);
        }
        built_total.fetch_add(static_cast<std::int64_t>(built.tasks.size()));
        std::lock_guard<std::mutex> lock(mu);
        records.push_back(std::move(rec));
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::int32_t i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  std::sort(records.begin(), records.end(),
            [](const BlockRecord& a, const BlockRecord& b) { return a.block < b.block; });
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (first_error) {
    // Keep the completed contiguous prefix reachable through the manifest,
    // then surface the original failure.
    std::size_t prefix = 0;
    while (prefix < records.size() && records[prefix].block == static_cast<std::int64_t>(prefix)) {
      ++prefix;
    }
    for (std::size_t i = prefix; i < records.size(); ++i) {
      for (const std::string& name : records[i].files) remove_task_files(out_dir, name);
    }
    records.resize(prefix);
    try {
      finalize_corpus(records, n_tasks, out_dir, seconds);
    } catch (...) {
    }
    std::rethrow_exception(first_error);
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].block != static_cast<std::int64_t>(i)) {
      throw ContractError("corpus block records are not contiguous");
    }
  }
  return finalize_corpus(records, n_tasks, out_dir, seconds);
}

}  // namespace relgen
