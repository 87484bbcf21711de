#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"

#include "relgen/accum.hpp"
#include "relgen/config.hpp"
#include "relgen/content.hpp"
#include "relgen/errors.hpp"
#include "relgen/instance.hpp"
#include "relgen/rng.hpp"

#include "fixtures.hpp"
#include "stats_util.hpp"

using namespace relgen;

namespace {

/// Hand-built chain instance with pinned sizes, FK cells and latents.
DatabaseInstance chain_instance(int len, int state_dim, const std::vector<std::size_t>& sizes,
                                const std::vector<std::vector<std::int64_t>>& fks) {
  DatabaseInstance db;
  db.schema = fixtures::chain_schema(len, 1);
  db.tables.resize(len);
  for (int t = 0; t < len; ++t) {
    TableData& td = db.tables[t];
    td.rows.resize(sizes[t]);
    for (std::size_t r = 0; r < sizes[t]; ++r) {
      td.rows[r].latent.resize(state_dim);
      for (int d = 0; d < state_dim; ++d) {
        td.rows[r].latent[d] =
            0.3f * static_cast<float>(t + 1) - 0.07f * static_cast<float>(r) +
            0.011f * static_cast<float>(d);
      }
      td.rows[r].embed.assign(state_dim, 0.0f);
      td.rows[r].timestamp = static_cast<double>(r);
    }
    const TableSpec& ts = db.schema.tables[t];
    td.columns.assign(ts.columns.size(), ColumnValues{});
    for (std::size_t ci = 0; ci < ts.columns.size(); ++ci) {
      td.columns[ci].kind = ts.columns[ci].kind;
    }
    if (t > 0) td.fk.assign(1, fks[t]);
  }
  db.relations.resize(db.schema.edges.size());
  for (std::size_t e = 0; e < db.schema.edges.size(); ++e) {
    db.relations[e] = build_relation(db, e);
  }
  return db;
}

bool same_vec(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

bool same_mat(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.rows() * a.cols(), b.data());
}

}  // namespace

TEST_CASE("quantile edges and classes match hand-computed cuts") {
  // Four distinct values, two classes: the single edge sits at the upper
  // median and splits 2/2.
  std::vector<double> vals = {1.0, 2.0, 3.0, 4.0};
  auto edges = quantile_edges(vals, 2);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0] == 3.0);
  auto cls = [&](double v) {
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
  };
  CHECK(cls(1.0) == 0);
  CHECK(cls(2.0) == 0);
  CHECK(cls(3.0) == 1);
  CHECK(cls(4.0) == 1);

  SUBCASE("constant input collapses to one class") {
    std::vector<double> flat(10, 2.5);
    auto e2 = quantile_edges(flat, 4);
    REQUIRE(e2.size() == 3);
    int c = static_cast<int>(std::upper_bound(e2.begin(), e2.end(), 2.5) - e2.begin());
    CHECK(c == 3);  // all edges equal the value, every row lands in the top class
  }
  SUBCASE("cardinality below two is rejected") {
    CHECK_THROWS_AS(quantile_edges(vals, 1), ContractError);
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(quantile_edges({}, 2), ContractError);
  }
}

TEST_CASE("quantile classes on distinct values stay within one of even") {
  Rng rng(311);
  for (int n : {12, 13, 100, 601}) {
    for (int card : {2, 3, 6}) {
      std::vector<double> vals(n);
      for (auto& v : vals) v = rng.normal();
      std::vector<double> sorted = vals;
      std::sort(sorted.begin(), sorted.end());
      auto edges = quantile_edges(sorted, card);
      std::vector<int> count(card, 0);
      for (double v : vals) {
        int c = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
        REQUIRE(c >= 0);
        REQUIRE(c < card);
        ++count[c];
      }
      for (int c = 0; c < card; ++c) {
        CHECK(std::abs(count[c] - n / card) <= 1);
      }
    }
  }
}

TEST_CASE("zero rounds of message passing return the latents unchanged") {
  auto db = chain_instance(2, 4, {3, 5}, {{}, {0, 0, 1, 2, 2}});
  ContentConfig cc;
  cc.rounds = 0;
  Rng rng(7);
  auto params = sample_content_params(db.schema, cc, 4, rng);
  auto states = message_passing(db, params);
  REQUIRE(states.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    REQUIRE(states[t].size() == db.tables[t].n_rows());
    for (std::size_t r = 0; r < states[t].size(); ++r) {
      CHECK(same_vec(states[t][r], db.tables[t].rows[r].latent));
    }
  }
}

TEST_CASE("a round of message passing moves information exactly one hop") {
  const int state_dim = 4;
  // t0 (2 rows) <- t1 (3 rows) <- t2 (4 rows).
  auto base = chain_instance(3, state_dim, {2, 3, 4}, {{}, {0, 0, 1}, {0, 1, 2, 2}});
  ContentConfig cc;
  Rng rng(41);
  auto params = sample_content_params(base.schema, cc, state_dim, rng);

  SUBCASE("downstream: a source perturbation reaches grandchildren only at two rounds") {
    auto bumped = base;
    bumped.tables[0].rows[0].latent[1] += 0.5f;

    params.rounds = 1;
    auto s1 = message_passing(base, params);
    auto p1 = message_passing(bumped, params);
    // Children of the bumped row move, the rest of t1 does not.
    CHECK_FALSE(same_vec(s1[1][0], p1[1][0]));
    CHECK_FALSE(same_vec(s1[1][1], p1[1][1]));
    CHECK(same_vec(s1[1][2], p1[1][2]));
    // t2 is two hops away: bitwise untouched after one round.
    for (std::size_t r = 0; r < 4; ++r) CHECK(same_vec(s1[2][r], p1[2][r]));

    params.rounds = 2;
    auto s2 = message_passing(base, params);
    auto p2 = message_passing(bumped, params);
    // Grandchildren through t1 rows 0 and 1 move; rows under t1 row 2 do not.
    CHECK_FALSE(same_vec(s2[2][0], p2[2][0]));
    CHECK_FALSE(same_vec(s2[2][1], p2[2][1]));
    CHECK(same_vec(s2[2][2], p2[2][2]));
    CHECK(same_vec(s2[2][3], p2[2][3]));
  }

  SUBCASE("upstream: a leaf perturbation reaches the grandparent only at two rounds") {
    auto bumped = base;
    bumped.tables[2].rows[3].latent[0] += 0.5f;  // child of t1 row 2, under t0 row 1

    params.rounds = 1;
    auto s1 = message_passing(base, params);
    auto p1 = message_passing(bumped, params);
    CHECK(same_vec(s1[1][0], p1[1][0]));
    CHECK(same_vec(s1[1][1], p1[1][1]));
    CHECK_FALSE(same_vec(s1[1][2], p1[1][2]));
    for (std::size_t r = 0; r < 2; ++r) CHECK(same_vec(s1[0][r], p1[0][r]));

    params.rounds = 2;
    auto s2 = message_passing(base, params);
    auto p2 = message_passing(bumped, params);
    CHECK(same_vec(s2[0][0], p2[0][0]));
    CHECK_FALSE(same_vec(s2[0][1], p2[0][1]));
  }
}

TEST_CASE("sibling relabeling permutes states and cells without changing values") {
  const int state_dim = 5;
  auto base = chain_instance(3, state_dim, {2, 3, 6}, {{}, {0, 1, 1}, {0, 0, 1, 1, 2, 2}});
  ContentConfig cc;
  cc.rounds = 2;
  Rng rng(99);
  auto params = sample_content_params(base.schema, cc, state_dim, rng);

  // Relabel t2: new row i holds old row perm[i].
  const std::vector<std::size_t> perm = {4, 0, 5, 2, 1, 3};
  auto shuffled = base;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.tables[2].rows[i] = base.tables[2].rows[perm[i]];
    shuffled.tables[2].fk[0][i] = base.tables[2].fk[0][perm[i]];
  }
  for (std::size_t e = 0; e < shuffled.schema.edges.size(); ++e) {
    shuffled.relations[e] = build_relation(shuffled, e);
  }

  auto s = message_passing(base, params);
  auto p = message_passing(shuffled, params);
  // Ancestor tables see the same child multiset, so their states are
  // bit-identical; the relabeled table's states follow the permutation.
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t r = 0; r < s[t].size(); ++r) CHECK(same_vec(s[t][r], p[t][r]));
  }
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(same_vec(p[2][i], s[2][perm[i]]));

  decode_columns(base, s, params);
  decode_columns(shuffled, p, params);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& a = base.tables[t].columns;
    const auto& b = shuffled.tables[t].columns;
    for (std::size_t ci = 0; ci < a.size(); ++ci) {
      CHECK(a[ci].num == b[ci].num);
      CHECK(a[ci].cls == b[ci].cls);
    }
  }
  const auto& a2 = base.tables[2].columns[2].num;
  const auto& b2 = shuffled.tables[2].columns[2].num;
  REQUIRE(a2.size() == perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(b2[i] == a2[perm[i]]);
}

TEST_CASE("decoded continuous columns are z-scored per table") {
  auto db = chain_instance(2, 6, {40, 90}, {{}, [] {
                             std::vector<std::int64_t> fk(90);
                             for (int i = 0; i < 90; ++i) fk[i] = i % 40;
                             return fk;
                           }()});
  ContentConfig cc;
  Rng rng(5);
  auto params = sample_content_params(db.schema, cc, 6, rng);
  auto states = message_passing(db, params);
  decode_columns(db, states, params);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& num = db.tables[t].columns[t == 0 ? 1 : 2].num;
    REQUIRE(num.size() == db.tables[t].n_rows());
    Moments m = sorted_moments(num);
    CHECK(std::abs(m.mean) < 1e-6);
    CHECK(std::abs(std::sqrt(m.var) - 1.0) < 1e-5);
  }
}

TEST_CASE("message parameters must cover the schema they run on") {
  auto db = chain_instance(3, 4, {2, 2, 2}, {{}, {0, 1}, {0, 1}});
  ContentConfig cc;
  Rng rng(3);
  auto pair_params = sample_content_params(fixtures::pair_schema(), cc, 4, rng);
  CHECK_THROWS_AS(message_passing(db, pair_params), ConfigError);
}

TEST_CASE("content parameter draws are seed-pinned") {
  auto schema = fixtures::chain_schema(3, 2);
  ContentConfig cc;
  Rng r1(77), r2(77), r3(78);
  auto a = sample_content_params(schema, cc, 8, r1);
  auto b = sample_content_params(schema, cc, 8, r2);
  auto c = sample_content_params(schema, cc, 8, r3);
  REQUIRE(a.msg_from_parent.size() == 2);
  CHECK(same_mat(a.msg_from_parent[0].weights[0], b.msg_from_parent[0].weights[0]));
  CHECK(same_mat(a.update[1].weights[1], b.update[1].weights[1]));
  CHECK(a.decode[0][0].clip_abs == b.decode[0][0].clip_abs);
  CHECK_FALSE(same_mat(a.trunk.weights[0], c.trunk.weights[0]));
}

TEST_CASE("full generation yields sound, reproducible databases") {
  GeneratorConfig cfg;
  cfg.structure.min_rows = 50;
  cfg.structure.max_rows = 80;
  auto db = generate_database(cfg, 2024);
  CHECK(validate_database(db).empty());
  REQUIRE(db.tables.size() == db.schema.tables.size());
  for (std::size_t t = 0; t < db.tables.size(); ++t) {
    const TableSpec& ts = db.schema.tables[t];
    const TableData& td = db.tables[t];
    CHECK(td.n_rows() >= 50);
    CHECK(td.n_rows() <= 80);
    for (std::size_t ci = 0; ci < ts.columns.size(); ++ci) {
      const ColumnSpec& cs = ts.columns[ci];
      const ColumnValues& cv = td.columns[ci];
      if (cs.kind == ColumnKind::continuous || cs.kind == ColumnKind::timestamp) {
        REQUIRE(cv.num.size() == td.n_rows());
        for (float v : cv.num) CHECK(std::isfinite(v));
      } else if (cs.kind == ColumnKind::categorical) {
        REQUIRE(cv.cls.size() == td.n_rows());
        for (std::int32_t c : cv.cls) {
          CHECK(c >= 0);
          CHECK(c < cs.cardinality);
        }
      }
      if (cs.kind == ColumnKind::timestamp) {
        for (std::size_t r = 0; r < td.n_rows(); ++r) {
          CHECK(cv.num[r] == static_cast<float>(td.rows[r].timestamp));
        }
      }
    }
  }

  auto db2 = generate_database(cfg, 2024);
  REQUIRE(db2.tables.size() == db.tables.size());
  for (std::size_t t = 0; t < db.tables.size(); ++t) {
    CHECK(db.tables[t].fk == db2.tables[t].fk);
    for (std::size_t ci = 0; ci < db.tables[t].columns.size(); ++ci) {
      CHECK(db.tables[t].columns[ci].num == db2.tables[t].columns[ci].num);
      CHECK(db.tables[t].columns[ci].cls == db2.tables[t].columns[ci].cls);
    }
    for (std::size_t r = 0; r < db.tables[t].n_rows(); ++r) {
      CHECK(same_vec(db.tables[t].rows[r].latent, db2.tables[t].rows[r].latent));
    }
  }

  auto db3 = generate_database(cfg, 2025);
  bool differs = db3.schema.tables.size() != db.schema.tables.size();
  if (!differs) {
    for (std::size_t t = 0; t < db.tables.size() && !differs; ++t) {
      differs = db.tables[t].n_rows() != db3.tables[t].n_rows() ||
                db.tables[t].fk != db3.tables[t].fk;
    }
  }
  CHECK(differs);
}

TEST_CASE("single-table mode yields one table and no keys to follow") {
  GeneratorConfig cfg;
  cfg.single_table = true;
  cfg.structure.min_rows = 40;
  cfg.structure.max_rows = 50;
  auto db = generate_database(cfg, 9);
  CHECK(db.schema.tables.size() == 1);
  CHECK(db.schema.edges.empty());
  CHECK(db.schema.tables[0].fk_columns().empty());
  CHECK(validate_database(db).empty());
}

TEST_CASE("pipeline failures name their stage") {
  GeneratorConfig cfg;
  cfg.structure.min_rows = 10;
  cfg.structure.max_rows = 12;

  SUBCASE("schema stage") {
    auto bad = fixtures::pair_schema();
    bad.tables[1].columns[1].ref_table = 7;
    FixedSchemaSource src({bad});
    try {
      generate_database(cfg, 1, &src);
      FAIL("expected a generation error");
    } catch (const GenerationError& e) {
      CHECK(std::string(e.what()).rfind("schema stage:", 0) == 0);
    }
  }

  SUBCASE("structure stage") {
    cfg.structure.min_rows = 0;
    cfg.structure.max_rows = 0;
    FixedSchemaSource src({fixtures::pair_schema()});
    try {
      generate_database(cfg, 1, &src);
      FAIL("expected a generation error");
    } catch (const GenerationError& e) {
      std::string msg = e.what();
      CHECK(msg.rfind("structure stage:", 0) == 0);
      CHECK(msg.find("parent table") != std::string::npos);
    }
  }

  SUBCASE("invalid configuration is rejected before any stage runs") {
    cfg.structure.candidate_count = 0;
    CHECK_THROWS_AS(generate_database(cfg, 1), ConfigError);
  }
}

TEST_CASE("generation fuzz: random seeds give valid instances") {
  GeneratorConfig cfg;
  cfg.structure.min_rows = 30;
  cfg.structure.max_rows = 45;
  for (std::uint64_t seed = 400; seed < 412; ++seed) {
    auto db = generate_database(cfg, seed);
    auto findings = validate_database(db);
    CAPTURE(seed);
    CHECK(findings.empty());
  }
}
