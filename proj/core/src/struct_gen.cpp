#include "relgen/struct_gen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relgen/errors.hpp"

namespace relgen {

void StructConfig::validate() const {
  if (latent_dim < 1 || noise_dim < 1 || embed_dim < 1 || att_dim < 1 || hidden_dim < 1) {
    throw ConfigError("structure: all dimensions must be positive");
  }
  if (candidate_count < 1) throw ConfigError("structure.candidate_count: must be positive");
  if (mode_mix < 0.0 || mode_mix > 1.0) throw ConfigError("structure.mode_mix: outside [0, 1]");
  if (feedback_scale < 0.0 || feedback_scale > 1.0) {
    throw ConfigError("structure.feedback_scale: outside [0, 1]");
  }
  if (mode_b_batch_rows < 1) throw ConfigError("structure.mode_b_batch_rows: must be positive");
  if (min_rows < 0 || min_rows > max_rows) {
    throw ConfigError("structure.min_rows/max_rows: invalid range");
  }
}

StructParams sample_struct_params(const SchemaGraph& schema, std::int32_t table,
                                  const StructConfig& cfg, Rng& rng) {
  cfg.validate();
  const TableSpec& spec = schema.tables[table];
  std::size_t p = spec.fk_columns().size();
  const std::size_t d = static_cast<std::size_t>(cfg.latent_dim);
  const std::size_t e = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t h = static_cast<std::size_t>(cfg.hidden_dim);
  const std::size_t a = static_cast<std::size_t>(cfg.att_dim);

  StructParams out;
  out.candidate_count = cfg.candidate_count;
  out.mode_mix = cfg.mode_mix;
  out.feedback_scale = cfg.feedback_scale;
  out.mode_b_batch_rows = cfg.mode_b_batch_rows;

  std::size_t init_in = static_cast<std::size_t>(cfg.noise_dim) + (p == 0 ? kTemporalChannels : 0);
  out.mlp_init = mlp_init({init_in, h, d}, Activation::relu, rng);
  if (p > 0) {
    out.mlp_comb = mlp_init({p * e, h, e}, Activation::relu, rng);
    out.mlp_child = mlp_init({d + e, h, d}, Activation::relu, rng);
    out.mlp_fb = mlp_init({e + d, h, e}, Activation::relu, rng);
    out.w_q = kaiming_matrix(d, a, rng);
    out.w_k = kaiming_matrix(e, a, rng);
  }
  out.w_embed = kaiming_matrix(d, e, rng);
  return out;
}

namespace {

void init_table_storage(DatabaseInstance& db, std::int32_t table, std::size_t n_rows) {
  const TableSpec& spec = db.schema.tables[table];
  TableData& t = db.tables[table];
  t.rows.assign(n_rows, RowNode{});
  t.fk.assign(spec.fk_columns().size(), std::vector<std::int64_t>(n_rows, -1));
  t.columns.assign(spec.columns.size(), ColumnValues{});
  for (std::size_t ci = 0; ci < spec.columns.size(); ++ci) {
    t.columns[ci].kind = spec.columns[ci].kind;
  }
  t.mode_a_rows = n_rows;
}

Vector concat(const Vector& x, const Vector& y) {
  Vector out;
  out.reserve(x.size() + y.size());
  out.insert(out.end(), x.begin(), x.end());
  out.insert(out.end(), y.begin(), y.end());
  return out;
}

struct ParentSlots {
  std::vector<std::int32_t> tables;   ///< parent table id per fk slot
  std::vector<std::size_t> edge_ids;  ///< schema edge per fk slot
};

ParentSlots resolve_parents(const DatabaseInstance& db, std::int32_t table,
                            const char* who) {
  const TableSpec& spec = db.schema.tables[table];
  ParentSlots ps;
  for (std::size_t ci : spec.fk_columns()) {
    std::int32_t parent = spec.columns[ci].ref_table;
    ps.tables.push_back(parent);
    bool found = false;
    for (std::size_t e = 0; e < db.schema.edges.size(); ++e) {
      if (db.schema.edges[e].child == table &&
          db.schema.edges[e].fk_column == static_cast<std::int32_t>(ci)) {
        ps.edge_ids.push_back(e);
        found = true;
      }
    }
    if (!found) {
      throw ContractError(std::string(who) + "(" + spec.name + "): fk column missing edge");
    }
    if (db.tables[parent].n_rows() == 0) {
      throw GenerationError(std::string(who) + "(" + spec.name + "): parent table " +
                            db.schema.tables[parent].name + " is empty");
    }
  }
  if (ps.tables.empty()) {
    throw ContractError(std::string(who) + "(" + spec.name + "): table has no parents");
  }
  return ps;
}

double child_timestamp(const DatabaseInstance& db, const ParentSlots& ps,
                       const std::vector<std::int64_t>& tuple, const TemporalSignature& sig,
                       const TemporalConfig& tcfg, Rng& rng) {
  double t_max = 0.0;
  for (std::size_t s = 0; s < ps.tables.size(); ++s) {
    t_max = std::max(t_max, db.tables[ps.tables[s]].rows[tuple[s]].timestamp);
  }
  double mean = tcfg.child_gap_mean / temporal_intensity(sig, t_max, tcfg.base_rate);
  return t_max + rng.exponential(mean);
}

Vector combined_parent_embedding(const DatabaseInstance& db, const ParentSlots& ps,
                                 const std::vector<std::int64_t>& tuple,
                                 const MlpParams& mlp_comb) {
  Vector cat;
  for (std::size_t s = 0; s < ps.tables.size(); ++s) {
    const Vector& e = db.tables[ps.tables[s]].rows[tuple[s]].embed;
    cat.insert(cat.end(), e.begin(), e.end());
  }
  return mlp_forward(mlp_comb, cat);
}

void finish_child_row(DatabaseInstance& db, std::int32_t table, std::size_t row,
                      const ParentSlots& ps, const std::vector<std::int64_t>& tuple,
                      const Vector& z0, const Vector& h_sel, const StructParams& params,
                      const TemporalSignature& sig, const TemporalConfig& tcfg, Rng& rng) {
  TableData& t = db.tables[table];
  for (std::size_t s = 0; s < tuple.size(); ++s) t.fk[s][row] = tuple[s];
  RowNode& node = t.rows[row];
  node.latent = mlp_forward(params.mlp_child, concat(z0, h_sel));
  node.embed = linear(params.w_embed, node.latent);
  node.timestamp = child_timestamp(db, ps, tuple, sig, tcfg, rng);
}

}  // namespace

void gen_source_table(DatabaseInstance& db, std::int32_t table, const StructParams& params,
                      const TemporalSignature& sig, const TemporalConfig& tcfg,
                      std::size_t n_rows, Rng& rng) {
  const TableSpec& spec = db.schema.tables[table];
  if (!spec.fk_columns().empty()) {
    throw ContractError("gen_source_table(" + spec.name + "): table has foreign keys");
  }
  init_table_storage(db, table, n_rows);
  if (n_rows == 0) return;

  TableData& t = db.tables[table];
  std::vector<double> ts = sample_timestamps(sig, tcfg, n_rows, rng);
  const std::size_t noise_dim = params.mlp_init.input_dim() - kTemporalChannels;
  for (std::size_t i = 0; i < n_rows; ++i) {
    Vector in(noise_dim + kTemporalChannels);
    for (std::size_t k = 0; k < noise_dim; ++k) in[k] = static_cast<float>(rng.normal());
    auto ch = eval_temporal(sig, ts[i]);
    for (std::size_t k = 0; k < kTemporalChannels; ++k) {
      in[noise_dim + k] = static_cast<float>(ch[k]);
    }
    RowNode& node = t.rows[i];
    node.timestamp = ts[i];
    node.latent = mlp_forward(params.mlp_init, in);
    node.embed = linear(params.w_embed, node.latent);
  }
}

void gen_dependent_table(DatabaseInstance& db, std::int32_t table, const StructParams& params,
                         const TemporalSignature& sig, const TemporalConfig& tcfg,
                         std::size_t n_rows, Rng& rng) {
  ParentSlots ps = resolve_parents(db, table, "gen_dependent_table");
  init_table_storage(db, table, n_rows);
  TableData& t = db.tables[table];

  const std::size_t n_p = ps.tables.size();
  const std::size_t m = static_cast<std::size_t>(params.candidate_count);
  std::size_t n_b = static_cast<std::size_t>(
      std::llround(params.mode_mix * static_cast<double>(n_rows)));
  n_b = std::min(n_b, n_rows);
  const std::size_t n_a = n_rows - n_b;
  t.mode_a_rows = n_a;

  struct PendingFeedback {
    std::int32_t ptable;
    std::int64_t prow;
    Vector z;
  };
  std::vector<PendingFeedback> pending;
  std::size_t rows_since_flush = 0;

  auto flush_feedback = [&]() {
    for (const PendingFeedback& fb : pending) {
      RowNode& parent = db.tables[fb.ptable].rows[fb.prow];
      Vector out = mlp_forward(params.mlp_fb, concat(parent.embed, fb.z));
      const double alpha = params.feedback_scale;
      for (std::size_t k = 0; k < parent.embed.size(); ++k) {
        parent.embed[k] = static_cast<float>((1.0 - alpha) * parent.embed[k] +
                                             alpha * static_cast<double>(out[k]));
      }
    }
    pending.clear();
    rows_since_flush = 0;
  };

  std::vector<std::vector<std::int64_t>> tuples(m, std::vector<std::int64_t>(n_p));
  for (std::size_t i = 0; i < n_rows; ++i) {
    const bool mode_b = i >= n_a;

    Vector noise(params.mlp_init.input_dim());
    for (std::size_t k = 0; k < noise.size(); ++k) noise[k] = static_cast<float>(rng.normal());
    Vector z0 = mlp_forward(params.mlp_init, noise);

    // Candidate tuples are uniform over the parent cross-product, drawn with
    // replacement, so candidate_count may exceed the number of distinct
    // tuples.
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t s = 0; s < n_p; ++s) {
        tuples[j][s] = static_cast<std::int64_t>(
            rng.uniform_int(db.tables[ps.tables[s]].n_rows()));
      }
    }

    std::vector<double> q = linear_f64(params.w_q, z0);
    std::vector<double> scores(m);
    std::vector<Vector> combined(m);
    for (std::size_t j = 0; j < m; ++j) {
      combined[j] = combined_parent_embedding(db, ps, tuples[j], params.mlp_comb);
      std::vector<double> kj = linear_f64(params.w_k, combined[j]);
      double s = 0.0;
      for (std::size_t x = 0; x < q.size(); ++x) s += q[x] * kj[x];
      scores[j] = s;
    }
    std::size_t pick = sample_categorical(softmax(scores), rng);

    finish_child_row(db, table, i, ps, tuples[pick], z0, combined[pick], params, sig, tcfg, rng);

    if (mode_b) {
      for (std::size_t s = 0; s < n_p; ++s) {
        pending.push_back({ps.tables[s], tuples[pick][s], t.rows[i].latent});
      }
      if (++rows_since_flush >= static_cast<std::size_t>(params.mode_b_batch_rows)) {
        flush_feedback();
      }
    }
  }
  flush_feedback();

  if (db.relations.size() != db.schema.edges.size()) {
    db.relations.resize(db.schema.edges.size());
  }
  for (std::size_t e : ps.edge_ids) db.relations[e] = build_relation(db, e);
}

void simple_edge_variant(DatabaseInstance& db, std::int32_t table, EdgeVariant variant,
                         const StructParams& params, const TemporalSignature& sig,
                         const TemporalConfig& tcfg, std::size_t n_rows, Rng& rng) {
  if (variant != EdgeVariant::fixed_prob && variant != EdgeVariant::concat_mlp) {
    throw ConfigError("simple_edge_variant: unknown variant");
  }
  ParentSlots ps = resolve_parents(db, table, "simple_edge_variant");
  init_table_storage(db, table, n_rows);

  const std::size_t n_p = ps.tables.size();
  const std::size_t m = static_cast<std::size_t>(params.candidate_count);

  for (std::size_t i = 0; i < n_rows; ++i) {
    Vector noise(params.mlp_init.input_dim());
    for (std::size_t k = 0; k < noise.size(); ++k) noise[k] = static_cast<float>(rng.normal());
    Vector z0 = mlp_forward(params.mlp_init, noise);

    std::vector<std::int64_t> tuple(n_p);
    Vector h_sel;
    if (variant == EdgeVariant::fixed_prob) {
      for (std::size_t s = 0; s < n_p; ++s) {
        tuple[s] = static_cast<std::int64_t>(rng.uniform_int(db.tables[ps.tables[s]].n_rows()));
      }
      h_sel = combined_parent_embedding(db, ps, tuple, params.mlp_comb);
    } else {
      std::vector<std::vector<std::int64_t>> tuples(m, std::vector<std::int64_t>(n_p));
      std::vector<double> scores(m);
      std::vector<Vector> combined(m);
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t s = 0; s < n_p; ++s) {
          tuples[j][s] = static_cast<std::int64_t>(
              rng.uniform_int(db.tables[ps.tables[s]].n_rows()));
        }
        combined[j] = combined_parent_embedding(db, ps, tuples[j], params.mlp_comb);
        double s = 0.0;
        for (float v : combined[j]) s += static_cast<double>(v);
        scores[j] = s / static_cast<double>(combined[j].size());
      }
      std::size_t pick = sample_categorical(softmax(scores), rng);
      tuple = tuples[pick];
      h_sel = combined[pick];
    }
    finish_child_row(db, table, i, ps, tuple, z0, h_sel, params, sig, tcfg, rng);
  }

  if (db.relations.size() != db.schema.edges.size()) {
    db.relations.resize(db.schema.edges.size());
  }
  for (std::size_t e : ps.edge_ids) db.relations[e] = build_relation(db, e);
}

std::map<std::int64_t, std::int64_t> degree_histogram(const Relation& rel) {
  std::map<std::int64_t, std::int64_t> hist;
  for (const auto& children : rel.children_of) {
    ++hist[static_cast<std::int64_t>(children.size())];
  }
  return hist;
}

std::vector<std::int64_t> parent_degrees(const Relation& rel) {
  std::vector<std::int64_t> out;
  out.reserve(rel.children_of.size());
  for (const auto& children : rel.children_of) {
    out.push_back(static_cast<std::int64_t>(children.size()));
  }
  return out;
}

std::vector<std::int64_t> parent_degrees_mode(const Relation& rel, std::size_t first_b_row,
                                              bool mode_b) {
  std::vector<std::int64_t> out(rel.children_of.size(), 0);
  for (std::size_t p = 0; p < rel.children_of.size(); ++p) {
    for (std::int64_t c : rel.children_of[p]) {
      bool is_b = c >= static_cast<std::int64_t>(first_b_row);
      if (is_b == mode_b) ++out[p];
    }
  }
  return out;
}

}  // namespace relgen
