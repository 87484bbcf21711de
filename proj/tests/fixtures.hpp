#pragma once

// Hand-built schemas, parameters and instances shared across test files.

#include <cstdint>
#include <string>
#include <vector>

#include "relgen/instance.hpp"
#include "relgen/mlp.hpp"
#include "relgen/schema.hpp"
#include "relgen/struct_gen.hpp"
#include "relgen/temporal.hpp"

namespace fixtures {

using namespace relgen;

/// Schema with one source table and one child table holding a single FK.
/// Tables get `features` continuous columns each.
inline SchemaGraph pair_schema(int features = 2) {
  SchemaGraph g;
  TableSpec t0;
  t0.name = "t0";
  t0.layer = 0;
  t0.columns.push_back({"t0_id", ColumnKind::primary_key, 0, -1});
  for (int f = 0; f < features; ++f) {
    t0.columns.push_back({"num" + std::to_string(f), ColumnKind::continuous, 0, -1});
  }
  TableSpec t1;
  t1.name = "t1";
  t1.layer = 1;
  t1.columns.push_back({"t1_id", ColumnKind::primary_key, 0, -1});
  t1.columns.push_back({"t0_ref", ColumnKind::foreign_key, 0, 0});
  for (int f = 0; f < features; ++f) {
    t1.columns.push_back({"num" + std::to_string(f), ColumnKind::continuous, 0, -1});
  }
  g.tables = {t0, t1};
  g.edges = {{0, 1, 1}};
  return g;
}

/// Chain t0 <- t1 <- ... <- t{len-1}, one FK per link, `features` continuous
/// columns per table.
inline SchemaGraph chain_schema(int len, int features = 1) {
  SchemaGraph g;
  for (int i = 0; i < len; ++i) {
    TableSpec t;
    t.name = "t" + std::to_string(i);
    t.layer = i;
    t.columns.push_back({t.name + "_id", ColumnKind::primary_key, 0, -1});
    if (i > 0) t.columns.push_back({"ref", ColumnKind::foreign_key, 0, i - 1});
    for (int f = 0; f < features; ++f) {
      t.columns.push_back({"num" + std::to_string(f), ColumnKind::continuous, 0, -1});
    }
    g.tables.push_back(t);
    if (i > 0) g.edges.push_back({i - 1, i, 1});
  }
  return g;
}

inline Matrix zero_matrix(std::size_t r, std::size_t c) { return Matrix(r, c, 0.0f); }

inline Matrix identity_matrix(std::size_t n, float scale = 1.0f) {
  Matrix m(n, n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

/// Single-layer network computing y = W^T x.
inline MlpParams linear_mlp(Matrix w) {
  MlpParams p;
  p.activation = Activation::identity;
  p.biases.emplace_back(w.cols(), 0.0f);
  p.weights.push_back(std::move(w));
  return p;
}

struct PairDb {
  DatabaseInstance db;
  StructParams parent_params;
  StructParams child_params;
  TemporalSignature sig;
  TemporalConfig tcfg;
};

/// Source + child instance over pair_schema. `strong_feedback` swaps in
/// hand-built attention and feedback nets (identity W_Q/W_K, mlp_comb
/// passthrough, feedback that scales a selected parent's embedding by
/// `gamma`), which makes repeated selection self-reinforcing.
inline PairDb make_pair_db(std::size_t n_parents, std::size_t n_children, double mode_mix,
                           std::uint64_t seed, bool strong_feedback = false,
                           double gamma = 1.4, bool zero_attention = false) {
  PairDb out;
  out.db.schema = pair_schema();
  out.db.seed = seed;
  out.db.tables.resize(2);
  out.db.relations.resize(1);
  out.tcfg.window_seconds = 10000.0;
  out.tcfg.child_gap_mean = 10.0;

  TemporalComponent flat;
  flat.kind = TemporalKind::trend;
  flat.slope = 0.0;
  out.sig.components = {flat};

  StructConfig cfg;
  cfg.mode_mix = mode_mix;
  cfg.min_rows = 1;
  Rng prng = Rng(seed).child(1);
  out.parent_params = sample_struct_params(out.db.schema, 0, cfg, prng);
  Rng crng = Rng(seed).child(2);
  out.child_params = sample_struct_params(out.db.schema, 1, cfg, crng);

  const std::size_t d = static_cast<std::size_t>(cfg.latent_dim);
  const std::size_t e = static_cast<std::size_t>(cfg.embed_dim);
  if (strong_feedback) {
    out.child_params.mlp_comb = linear_mlp(identity_matrix(e));
    out.child_params.w_q = identity_matrix(d);
    out.child_params.w_k = identity_matrix(e);
    Matrix fb(e + d, e, 0.0f);
    for (std::size_t i = 0; i < e; ++i) fb(i, i) = static_cast<float>(gamma);
    out.child_params.mlp_fb = linear_mlp(fb);
    out.child_params.feedback_scale = 1.0;
  }
  if (zero_attention) {
    out.child_params.w_q = zero_matrix(d, cfg.att_dim);
  }

  Rng gen = Rng(seed).child(3);
  gen_source_table(out.db, 0, out.parent_params, out.sig, out.tcfg, n_parents, gen);
  Rng genc = Rng(seed).child(4);
  gen_dependent_table(out.db, 1, out.child_params, out.sig, out.tcfg, n_children, genc);
  return out;
}

}  // namespace fixtures
