#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "relgen/config.hpp"
#include "relgen/content.hpp"
#include "relgen/errors.hpp"
#include "relgen/io.hpp"
#include "relgen/rng.hpp"
#include "relgen/task.hpp"

using namespace relgen;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("relgen_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

/// Small fully populated task exercising masks, hops, and negative values.
IclTask tiny_task() {
  Rng rng(5150);
  IclTask t;
  t.x_ctx = Matrix(6, 4);
  t.x_query = Matrix(3, 4);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 4; ++c) t.x_ctx(r, c) = static_cast<float>(rng.normal());
  }
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) t.x_query(r, c) = static_cast<float>(rng.normal());
  }
  t.y_ctx = {0, 1, 0, 1, 1, 0};
  t.y_query = {1, 0, 1};
  t.missing_ctx.assign(24, 0);
  t.missing_query.assign(12, 0);
  t.missing_ctx[5] = 1;
  t.missing_ctx[13] = 1;
  t.missing_query[2] = 1;
  for (std::int32_t c = 0; c < 3; ++c) {
    t.provenance.push_back(FeaturePath{{}, 0, c, Aggregator::identity});
  }
  t.provenance.push_back(
      FeaturePath{{Hop{2, HopDirection::backward_aggregate}}, 1, -1, Aggregator::count});
  t.ctx_rows = {0, 1, 2, 3, 4, 5};
  t.query_rows = {6, 7, 8};
  t.meta.db_seed = 42;
  t.meta.category = TaskCategory::one_hop;
  t.meta.target_table = 0;
  t.meta.target_column = 1;
  t.meta.positive_class = -1;
  t.meta.threshold = 0.5;
  t.meta.n_ctx = 6;
  return t;
}

void check_tasks_equal(const IclTask& a, const IclTask& b) {
  REQUIRE(a.x_ctx.rows() == b.x_ctx.rows());
  REQUIRE(a.x_ctx.cols() == b.x_ctx.cols());
  REQUIRE(a.x_query.rows() == b.x_query.rows());
  CHECK(std::equal(a.x_ctx.data(), a.x_ctx.data() + a.x_ctx.rows() * a.x_ctx.cols(),
                   b.x_ctx.data()));
  CHECK(std::equal(a.x_query.data(), a.x_query.data() + a.x_query.rows() * a.x_query.cols(),
                   b.x_query.data()));
  CHECK(a.y_ctx == b.y_ctx);
  CHECK(a.y_query == b.y_query);
  CHECK(a.missing_ctx == b.missing_ctx);
  CHECK(a.missing_query == b.missing_query);
  CHECK(a.provenance == b.provenance);
  CHECK(a.ctx_rows == b.ctx_rows);
  CHECK(a.query_rows == b.query_rows);
  CHECK(a.meta.db_seed == b.meta.db_seed);
  CHECK(a.meta.category == b.meta.category);
  CHECK(a.meta.target_table == b.meta.target_table);
  CHECK(a.meta.target_column == b.meta.target_column);
  CHECK(a.meta.positive_class == b.meta.positive_class);
  CHECK(a.meta.threshold == b.meta.threshold);
  CHECK(a.meta.n_ctx == b.meta.n_ctx);
}

/// Small databases and contexts keep corpus tests fast.
GeneratorConfig fast_config() {
  GeneratorConfig cfg = default_config();
  cfg.schema.max_tables = 3;
  cfg.structure.min_rows = 80;
  cfg.structure.max_rows = 120;
  cfg.task.n_ctx = 64;
  return cfg;
}

}  // namespace

TEST_CASE("task files round trip exactly") {
  fs::path dir = fresh_dir("roundtrip");
  GeneratorConfig cfg = default_config();

  SUBCASE("hand-built task with masks") {
    IclTask t = tiny_task();
    write_task(t, dir / "t.bin", cfg);
    IclTask back = read_task(dir / "t.bin");
    check_tasks_equal(t, back);
  }
  SUBCASE("generated relational task") {
    GeneratorConfig fc = fast_config();
    BlockTasks block = build_tasks(fc, 99001, TaskCategory::one_hop);
    REQUIRE(!block.tasks.empty());
    write_task(block.tasks[0], dir / "g.bin", fc);
    IclTask back = read_task(dir / "g.bin");
    check_tasks_equal(block.tasks[0], back);
  }
  SUBCASE("generated single-table task") {
    GeneratorConfig fc = fast_config();
    BlockTasks block = build_tasks(fc, 99002, TaskCategory::single_table);
    REQUIRE(!block.tasks.empty());
    write_task(block.tasks[0], dir / "s.bin", fc);
    IclTask back = read_task(dir / "s.bin");
    check_tasks_equal(block.tasks[0], back);
  }
}

TEST_CASE("task writes are byte deterministic") {
  fs::path dir = fresh_dir("determinism");
  GeneratorConfig cfg = default_config();
  IclTask t = tiny_task();
  write_task(t, dir / "a.bin", cfg);
  write_task(t, dir / "b.bin", cfg);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(slurp(dir / "a.bin.json") == slurp(dir / "b.bin.json"));
}

TEST_CASE("task write rejects inconsistent tasks") {
  fs::path dir = fresh_dir("badwrite");
  GeneratorConfig cfg = default_config();
  IclTask t = tiny_task();

  IclTask no_query = t;
  no_query.x_query = Matrix(0, 4);
  no_query.y_query.clear();
  no_query.missing_query.clear();
  no_query.query_rows.clear();
  CHECK_THROWS_AS(write_task(no_query, dir / "x.bin", cfg), DimensionError);

  IclTask bad_labels = t;
  bad_labels.y_ctx.pop_back();
  CHECK_THROWS_AS(write_task(bad_labels, dir / "x.bin", cfg), DimensionError);

  IclTask bad_prov = t;
  bad_prov.provenance.pop_back();
  CHECK_THROWS_AS(write_task(bad_prov, dir / "x.bin", cfg), DimensionError);

  IclTask bad_rows = t;
  bad_rows.ctx_rows.pop_back();
  CHECK_THROWS_AS(write_task(bad_rows, dir / "x.bin", cfg), DimensionError);
}

TEST_CASE("every truncation and header bit flip is detected") {
  fs::path dir = fresh_dir("corruption");
  GeneratorConfig cfg = default_config();
  IclTask t = tiny_task();
  write_task(t, dir / "ok.bin", cfg);
  std::vector<std::uint8_t> good = slurp(dir / "ok.bin");
  std::vector<std::uint8_t> sidecar = slurp(dir / "ok.bin.json");
  fs::path victim = dir / "bad.bin";
  spit(dir / "bad.bin.json", sidecar);

  SUBCASE("truncations") {
    for (std::size_t len = 0; len < good.size(); ++len) {
      spit(victim, std::vector<std::uint8_t>(good.begin(), good.begin() + len));
      CHECK_THROWS_AS(read_task(victim), FormatError);
    }
  }
  SUBCASE("trailing junk") {
    std::vector<std::uint8_t> longer = good;
    longer.push_back(0);
    spit(victim, longer);
    CHECK_THROWS_AS(read_task(victim), FormatError);
  }
  SUBCASE("header bit flips") {
    for (std::size_t byte = 0; byte < kTaskHeaderSize; ++byte) {
      for (int bit = 0; bit < 8; ++bit) {
        std::vector<std::uint8_t> bad = good;
        bad[byte] ^= static_cast<std::uint8_t>(1u << bit);
        spit(victim, bad);
        CHECK_THROWS_AS(read_task(victim), FormatError);
      }
    }
  }
  SUBCASE("non-finite feature cell") {
    std::vector<std::uint8_t> bad = good;
    // First x cell becomes +inf.
    bad[kTaskHeaderSize + 0] = 0x00;
    bad[kTaskHeaderSize + 1] = 0x00;
    bad[kTaskHeaderSize + 2] = 0x80;
    bad[kTaskHeaderSize + 3] = 0x7F;
    spit(victim, bad);
    CHECK_THROWS_AS(read_task(victim), FormatError);
  }
  SUBCASE("label outside the binary alphabet") {
    // y payload follows the x block: 9 rows x 4 cols of f32.
    std::size_t y_at = kTaskHeaderSize + 4 * 9 * 4;
    std::vector<std::uint8_t> bad = good;
    bad[y_at] = 7;
    spit(victim, bad);
    CHECK_THROWS_AS(read_task(victim), FormatError);
  }
  SUBCASE("missing sidecar") {
    spit(victim, good);
    fs::remove(dir / "bad.bin.json");
    CHECK_THROWS_AS(read_task(victim), IoError);
  }
  SUBCASE("mangled sidecar") {
    spit(victim, good);
    spit(dir / "bad.bin.json", {'{', 'n', 'o', 'p', 'e'});
    CHECK_THROWS_AS(read_task(victim), FormatError);
  }
  SUBCASE("missing binary") {
    CHECK_THROWS_AS(read_task(dir / "absent.bin"), IoError);
  }
}

TEST_CASE("sidecars echo the generator config") {
  fs::path dir = fresh_dir("sidecar");
  GeneratorConfig cfg = default_config();
  cfg.seed = 31337;
  write_task(tiny_task(), dir / "t.bin", cfg);
  nlohmann::ordered_json side = read_task_sidecar(dir / "t.bin");
  CHECK(side.at("format") == "relgen-task-sidecar");
  CHECK(side.at("config_digest") == config_digest(cfg));
  CHECK(side.at("config") == config_to_json(cfg));
  CHECK(side.at("meta").at("category") == "one_hop");
  CHECK(side.at("provenance").size() == 4);
}

TEST_CASE("databases round trip through json") {
  GeneratorConfig cfg = fast_config();
  DatabaseInstance db = generate_database(cfg, 424243);
  fs::path dir = fresh_dir("db");
  write_database(db, dir / "db.json");
  DatabaseInstance back = read_database(dir / "db.json");

  CHECK(back.seed == db.seed);
  CHECK(back.schema.to_json() == db.schema.to_json());
  REQUIRE(back.tables.size() == db.tables.size());
  for (std::size_t t = 0; t < db.tables.size(); ++t) {
    const TableData& a = db.tables[t];
    const TableData& b = back.tables[t];
    REQUIRE(a.n_rows() == b.n_rows());
    CHECK(a.mode_a_rows == b.mode_a_rows);
    CHECK(a.fk == b.fk);
    for (std::size_t r = 0; r < a.n_rows(); ++r) {
      CHECK(a.rows[r].timestamp == b.rows[r].timestamp);
      CHECK(a.rows[r].latent == b.rows[r].latent);
      CHECK(a.rows[r].embed == b.rows[r].embed);
    }
    REQUIRE(a.columns.size() == b.columns.size());
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
      CHECK(a.columns[c].kind == b.columns[c].kind);
      CHECK(a.columns[c].num == b.columns[c].num);
      CHECK(a.columns[c].cls == b.columns[c].cls);
    }
  }
  REQUIRE(back.relations.size() == db.relations.size());
  for (std::size_t e = 0; e < db.relations.size(); ++e) {
    CHECK(back.relations[e].parent_of == db.relations[e].parent_of);
    CHECK(back.relations[e].children_of == db.relations[e].children_of);
  }
  CHECK(validate_database(back).empty());

  SUBCASE("write is deterministic") {
    write_database(db, dir / "db2.json");
    CHECK(slurp(dir / "db.json") == slurp(dir / "db2.json"));
  }
  SUBCASE("injected fk violation surfaces as a referential finding") {
    GeneratorConfig layered = fast_config();
    layered.schema.min_layers = 2;
    nlohmann::ordered_json j = database_to_json(generate_database(layered, 424244));
    bool injected = false;
    for (auto& tj : j["tables"]) {
      if (!tj["fk"].empty() && !tj["fk"][0].empty()) {
        tj["fk"][0][0] = 999999;
        injected = true;
        break;
      }
    }
    REQUIRE(injected);
    DatabaseInstance broken = database_from_json(j);
    std::vector<ValidationFinding> findings = validate_database(broken);
    bool ref = false;
    for (const ValidationFinding& f : findings) ref = ref || f.code == "REF_INTEGRITY";
    CHECK(ref);
  }
  SUBCASE("mangled document is rejected") {
    spit(dir / "broken.json", {'n', 'o', 't', ' ', 'j', 's', 'o', 'n'});
    CHECK_THROWS_AS(read_database(dir / "broken.json"), FormatError);
    CHECK_THROWS_AS(read_database(dir / "nope.json"), IoError);
  }
}

TEST_CASE("corpus schedule tracks the mix proportions") {
  CorpusMix mix;
  mix.single_table = 1.0;
  mix.one_hop = 2.0;
  mix.two_hop = 1.0;
  std::map<TaskCategory, std::int64_t> counts;
  for (std::int64_t b = 0; b < 1000; ++b) counts[corpus_category(mix, b)] += 1;
  CHECK(std::abs(counts[TaskCategory::single_table] - 250) <= 30);
  CHECK(std::abs(counts[TaskCategory::one_hop] - 500) <= 30);
  CHECK(std::abs(counts[TaskCategory::two_hop] - 250) <= 30);

  counts.clear();
  CorpusMix dflt;
  for (std::int64_t b = 0; b < 10000; ++b) counts[corpus_category(dflt, b)] += 1;
  CHECK(std::abs(counts[TaskCategory::single_table] - 10000 * 6 / 18) <= 100);
  CHECK(std::abs(counts[TaskCategory::one_hop] - 10000 * 10 / 18) <= 100);
  CHECK(std::abs(counts[TaskCategory::two_hop] - 10000 * 2 / 18) <= 100);

  CorpusMix zero;
  zero.single_table = zero.one_hop = zero.two_hop = 0.0;
  CHECK_THROWS_AS(corpus_category(zero, 0), ConfigError);
}

TEST_CASE("corpus streaming is exact, tagged, and worker independent") {
  GeneratorConfig cfg = fast_config();
  cfg.seed = 2477;

  SUBCASE("zero tasks still writes an empty manifest") {
    fs::path dir = fresh_dir("corpus_empty");
    CorpusStats stats = stream_corpus(cfg, 0, dir, 1);
    CHECK(stats.written == 0);
    CHECK(stats.blocks == 0);
    CHECK(slurp(dir / "manifest.jsonl").empty());
  }
  SUBCASE("manifest lines agree with the deterministic schedule") {
    fs::path dir = fresh_dir("corpus_small");
    CorpusStats stats = stream_corpus(cfg, 8, dir, 1);
    CHECK(stats.written == 8);
    CHECK(stats.by_category[0] + stats.by_category[1] + stats.by_category[2] == 8);
    CHECK(stats.tasks_per_minute > 0.0);

    std::ifstream manifest(dir / "manifest.jsonl");
    std::string line;
    std::int64_t index = 0;
    while (std::getline(manifest, line)) {
      nlohmann::json entry = nlohmann::json::parse(line);
      CHECK(entry.at("index") == index);
      std::int64_t block = entry.at("block").get<std::int64_t>();
      CHECK(entry.at("db_seed").get<std::uint64_t>() == corpus_block_seed(cfg.seed, block));
      CHECK(entry.at("category").get<std::string>() ==
            task_category_name(corpus_category(cfg.corpus.mix, block)));
      fs::path file = dir / entry.at("file").get<std::string>();
      CHECK(fs::exists(file));
      IclTask task = read_task(file);
      CHECK(task.meta.db_seed == corpus_block_seed(cfg.seed, block));
      CHECK(task_category_name(task.meta.category) == entry.at("category").get<std::string>());
      ++index;
    }
    CHECK(index == 8);
  }
  SUBCASE("reruns and worker counts give byte-identical corpora") {
    fs::path d1 = fresh_dir("corpus_w1");
    fs::path d2 = fresh_dir("corpus_w4");
    fs::path d3 = fresh_dir("corpus_again");
    stream_corpus(cfg, 12, d1, 1);
    stream_corpus(cfg, 12, d2, 4);
    stream_corpus(cfg, 12, d3, 1);

    auto listing = [](const fs::path& dir) {
      std::vector<std::string> names;
      for (const auto& e : fs::directory_iterator(dir)) {
        names.push_back(e.path().filename().string());
      }
      std::sort(names.begin(), names.end());
      return names;
    };
    std::vector<std::string> l1 = listing(d1);
    CHECK(l1 == listing(d2));
    CHECK(l1 == listing(d3));
    CHECK(l1.size() == 25);  // 12 tasks x 2 files + manifest
    for (const std::string& name : l1) {
      CHECK(slurp(d1 / name) == slurp(d2 / name));
      CHECK(slurp(d1 / name) == slurp(d3 / name));
    }
  }
  SUBCASE("worker failure leaves a manifest behind") {
    GeneratorConfig bad = fast_config();
    bad.schema.min_tables = 2;
    bad.structure.min_rows = 0;
    bad.structure.max_rows = 0;
    fs::path dir = fresh_dir("corpus_fail");
    CHECK_THROWS_AS(stream_corpus(bad, 10, dir, 2), GenerationError);
    CHECK(fs::exists(dir / "manifest.jsonl"));
  }
  SUBCASE("invalid arguments are rejected") {
    fs::path dir = fresh_dir("corpus_args");
    CHECK_THROWS_AS(stream_corpus(cfg, -1, dir, 1), ConfigError);
    CHECK_THROWS_AS(stream_corpus(cfg, 1, dir, 0), ConfigError);
  }
}
