#include "relgen/content.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "relgen/accum.hpp"
#include "relgen/errors.hpp"
#include "relgen/struct_gen.hpp"

namespace relgen {

namespace {

void check_params_match(const SchemaGraph& schema, const ContentParams& p) {
  if (p.msg_from_parent.size() != schema.edges.size() ||
      p.msg_from_child.size() != schema.edges.size()) {
    throw ConfigError("content parameters: message nets do not cover every relation");
  }
  if (p.update.size() != schema.tables.size()) {
    throw ConfigError("content parameters: update nets do not cover every table");
  }
}

}  // namespace

std::vector<RelationSlot> relation_slots(const SchemaGraph& schema, std::size_t table) {
  std::vector<RelationSlot> slots;
  for (std::size_t e : schema.edges_as_child(static_cast<std::int32_t>(table))) {
    slots.push_back({e, true});
  }
  for (std::size_t e : schema.edges_as_parent(static_cast<std::int32_t>(table))) {
    slots.push_back({e, false});
  }
  return slots;
}

ContentParams sample_content_params(const SchemaGraph& schema, const ContentConfig& cfg,
                                    std::int32_t state_dim, Rng& rng) {
  cfg.validate();
  if (state_dim < 1) throw DimensionError("content state dimension must be positive");
  const std::size_t sd = static_cast<std::size_t>(state_dim);
  const std::size_t hd = static_cast<std::size_t>(cfg.hidden_dim);
  const std::size_t md = static_cast<std::size_t>(cfg.msg_dim);
  const std::size_t kd = static_cast<std::size_t>(cfg.trunk_dim);
  ContentParams p;
  p.rounds = cfg.rounds;
  p.msg_dim = cfg.msg_dim;
  for (std::size_t e = 0; e < schema.edges.size(); ++e) {
    p.msg_from_parent.push_back(mlp_init({sd, hd, md}, Activation::tanh, rng));
    p.msg_from_child.push_back(mlp_init({sd, hd, md}, Activation::tanh, rng));
  }
  for (std::size_t t = 0; t < schema.tables.size(); ++t) {
    auto slots = relation_slots(schema, t);
    std::size_t in_dim = sd + md * slots.size();
    p.update.push_back(mlp_init({in_dim, hd, sd}, Activation::tanh, rng));
  }
  p.trunk = mlp_init({sd, hd, kd}, Activation::tanh, rng);
  for (const TableSpec& ts : schema.tables) {
    auto decoded = ts.decoded_columns();
    if (decoded.empty()) {
      p.head.emplace_back();
      p.decode.emplace_back();
      continue;
    }
    p.head.push_back(mlp_init({kd, decoded.size()}, Activation::identity, rng));
    std::vector<ColumnDecode> specs;
    for (std::size_t k = 0; k < decoded.size(); ++k) {
      ColumnDecode d;
      d.clip_abs = cfg.clip_abs_min + (cfg.clip_abs_max - cfg.clip_abs_min) * rng.uniform();
      specs.push_back(d);
    }
    p.decode.push_back(std::move(specs));
  }
  return p;
}

std::vector<std::vector<Vector>> message_passing(const DatabaseInstance& db,
                                                 const ContentParams& params) {
  const SchemaGraph& schema = db.schema;
  check_params_match(schema, params);
  if (db.relations.size() != schema.edges.size()) {
    throw ContractError("message passing requires instance relations for every edge");
  }

  std::vector<std::vector<Vector>> states(schema.tables.size());
  for (std::size_t t = 0; t < schema.tables.size(); ++t) {
    states[t].reserve(db.tables[t].n_rows());
    for (const RowNode& r : db.tables[t].rows) states[t].push_back(r.latent);
  }

  const std::size_t md = static_cast<std::size_t>(params.msg_dim);
  std::vector<double> scratch;
  for (std::int32_t round = 0; round < params.rounds; ++round) {
    // All messages in a round read the same state snapshot, so table order
    // does not matter and a row's state after K rounds depends only on its
    // K-hop neighborhood.
    std::vector<std::vector<Vector>> from_parent(schema.edges.size());
    std::vector<std::vector<Vector>> from_child(schema.edges.size());
    for (std::size_t e = 0; e < schema.edges.size(); ++e) {
      const SchemaEdge& edge = schema.edges[e];
      from_parent[e].reserve(states[edge.parent].size());
      for (const Vector& h : states[edge.parent]) {
        from_parent[e].push_back(mlp_forward(params.msg_from_parent[e], h));
      }
      from_child[e].reserve(states[edge.child].size());
      for (const Vector& h : states[edge.child]) {
        from_child[e].push_back(mlp_forward(params.msg_from_child[e], h));
      }
    }

    std::vector<std::vector<Vector>> next(schema.tables.size());
    for (std::size_t t = 0; t < schema.tables.size(); ++t) {
      auto slots = relation_slots(schema, t);
      const std::size_t n = states[t].size();
      next[t].resize(n);
      Vector input(states[t].empty() ? 0 : states[t][0].size() + md * slots.size());
      for (std::size_t r = 0; r < n; ++r) {
        const Vector& h = states[t][r];
        input.assign(h.begin(), h.end());
        for (const RelationSlot& slot : slots) {
          const Relation& rel = db.relations[slot.edge];
          if (slot.as_child) {
            std::int64_t pr = rel.parent_of.at(r);
            const Vector& m = from_parent[slot.edge][static_cast<std::size_t>(pr)];
            input.insert(input.end(), m.begin(), m.end());
          } else {
            const auto& kids = rel.children_of.at(r);
            for (std::size_t d = 0; d < md; ++d) {
              scratch.clear();
              for (std::int64_t c : kids) {
                scratch.push_back(from_child[slot.edge][static_cast<std::size_t>(c)][d]);
              }
              input.push_back(static_cast<float>(sorted_sum(scratch)));
            }
          }
        }
        next[t][r] = mlp_forward(params.update[t], input);
      }
    }
    states = std::move(next);
  }
  return states;
}

std::vector<double> quantile_edges(std::vector<double> sorted_vals, std::int32_t cardinality) {
  if (cardinality < 2) throw ContractError("quantile binning needs cardinality >= 2");
  if (sorted_vals.empty()) throw ContractError("quantile binning needs at least one value");
  const std::size_t n = sorted_vals.size();
  std::vector<double> edges;
  for (std::int32_t k = 1; k < cardinality; ++k) {
    std::size_t idx = static_cast<std::size_t>(k) * n / static_cast<std::size_t>(cardinality);
    edges.push_back(sorted_vals[idx]);
  }
  return edges;
}

void decode_columns(DatabaseInstance& db, const std::vector<std::vector<Vector>>& states,
                    const ContentParams& params) {
  const SchemaGraph& schema = db.schema;
  if (states.size() != schema.tables.size() || params.head.size() != schema.tables.size() ||
      params.decode.size() != schema.tables.size()) {
    throw ContractError("decode inputs do not cover every table");
  }
  for (std::size_t t = 0; t < schema.tables.size(); ++t) {
    const TableSpec& ts = schema.tables[t];
    TableData& td = db.tables[t];
    const std::size_t n = td.n_rows();
    if (states[t].size() != n) throw ContractError("decode state count mismatch");
    if (td.columns.size() != ts.columns.size()) {
      td.columns.assign(ts.columns.size(), ColumnValues{});
      for (std::size_t ci = 0; ci < ts.columns.size(); ++ci) {
        td.columns[ci].kind = ts.columns[ci].kind;
      }
    }

    auto decoded = ts.decoded_columns();
    if (!decoded.empty()) {
      if (params.decode[t].size() != decoded.size()) {
        throw ConfigError("content parameters: decode specs do not match table columns");
      }
      std::vector<std::vector<double>> raw(decoded.size(), std::vector<double>(n));
      for (std::size_t r = 0; r < n; ++r) {
        Vector channels = mlp_forward(params.head[t], mlp_forward(params.trunk, states[t][r]));
        for (std::size_t k = 0; k < decoded.size(); ++k) raw[k][r] = channels[k];
      }
      for (std::size_t k = 0; k < decoded.size(); ++k) {
        const ColumnSpec& cs = ts.columns[decoded[k]];
        ColumnValues& cv = td.columns[decoded[k]];
        const double clip = params.decode[t][k].clip_abs;
        if (cs.kind == ColumnKind::continuous) {
          std::vector<float> clipped(n);
          for (std::size_t r = 0; r < n; ++r) {
            clipped[r] = static_cast<float>(std::clamp(raw[k][r], -clip, clip));
          }
          Moments m = sorted_moments(clipped);
          double sd = std::sqrt(m.var);
          cv.num.resize(n);
          // Constant channels z-score to all zeros instead of dividing by ~0.
          for (std::size_t r = 0; r < n; ++r) {
            cv.num[r] = sd < 1e-12 ? 0.0f
                                   : static_cast<float>((clipped[r] - m.mean) / sd);
          }
        } else {
          std::vector<double> sorted(raw[k]);
          std::sort(sorted.begin(), sorted.end());
          std::vector<double> edges = quantile_edges(std::move(sorted), cs.cardinality);
          cv.cls.resize(n);
          for (std::size_t r = 0; r < n; ++r) {
            auto it = std::upper_bound(edges.begin(), edges.end(), raw[k][r]);
            cv.cls[r] = static_cast<std::int32_t>(it - edges.begin());
          }
        }
      }
    }

    for (std::size_t ci = 0; ci < ts.columns.size(); ++ci) {
      if (ts.columns[ci].kind != ColumnKind::timestamp) continue;
      ColumnValues& cv = td.columns[ci];
      cv.num.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        cv.num[r] = static_cast<float>(td.rows[r].timestamp);
      }
    }
  }
}

namespace {

template <typename F>
decltype(auto) run_stage(const std::string& stage, F&& f) {
  try {
    return std::forward<F>(f)();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw GenerationError(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw GenerationError(stage + ": " + e.what());
  }
}

}  // namespace

DatabaseInstance generate_database(const GeneratorConfig& cfg, std::uint64_t seed,
                                   SchemaSource* source) {
  cfg.validate();
  Rng root(seed);
  DatabaseInstance db;
  db.seed = seed;

  run_stage("schema stage", [&] {
    Rng rng = root.child(1);
    if (source != nullptr) {
      db.schema = source->next(rng);
    } else if (cfg.single_table) {
      SchemaConfig sc = cfg.schema;
      sc.min_tables = 1;
      sc.max_tables = 1;
      sc.min_layers = 1;
      sc.max_layers = 1;
      db.schema = sample_schema(sc, rng);
    } else {
      db.schema = sample_schema(cfg.schema, rng);
    }
    auto findings = validate_schema(db.schema);
    if (!findings.empty()) {
      throw GenerationError("invalid schema: " + findings.front().code + " " +
                            findings.front().message);
    }
  });

  const std::size_t n_tables = db.schema.tables.size();
  db.tables.resize(n_tables);
  db.relations.resize(db.schema.edges.size());

  run_stage("structure stage", [&] {
    std::vector<TemporalSignature> sigs(n_tables);
    std::vector<StructParams> params(n_tables);
    std::vector<std::size_t> counts(n_tables);
    Rng sig_rng = root.child(2);
    Rng par_rng = root.child(3);
    Rng cnt_rng = root.child(4);
    Rng gen_rng = root.child(5);
    for (std::size_t t = 0; t < n_tables; ++t) {
      std::uint64_t stream = static_cast<std::uint64_t>(t);
      Rng r1 = sig_rng.child(stream);
      sigs[t] = sample_temporal_signature(cfg.temporal, r1);
      Rng r2 = par_rng.child(stream);
      params[t] = sample_struct_params(db.schema, static_cast<std::int32_t>(t), cfg.structure, r2);
      Rng r3 = cnt_rng.child(stream);
      counts[t] = static_cast<std::size_t>(r3.uniform_int(
          static_cast<std::uint64_t>(cfg.structure.max_rows - cfg.structure.min_rows + 1))) +
          static_cast<std::size_t>(cfg.structure.min_rows);
    }
    for (std::int32_t t : topological_order(db.schema)) {
      Rng r = gen_rng.child(static_cast<std::uint64_t>(t));
      if (db.schema.tables[t].fk_columns().empty()) {
        gen_source_table(db, t, params[t], sigs[t], cfg.temporal, counts[t], r);
      } else {
        gen_dependent_table(db, t, params[t], sigs[t], cfg.temporal, counts[t], r);
      }
    }
  });

  run_stage("content stage", [&] {
    Rng rng = root.child(6);
    ContentParams cp =
        sample_content_params(db.schema, cfg.content, cfg.structure.latent_dim, rng);
    auto states = message_passing(db, cp);
    decode_columns(db, states, cp);
  });

  return db;
}

}  // namespace relgen
