#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "relgen/instance.hpp"
#include "relgen/mlp.hpp"
#include "relgen/temporal.hpp"

namespace relgen {

struct StructConfig {
  std::int32_t latent_dim = 8;
  std::int32_t noise_dim = 4;
  std::int32_t embed_dim = 8;
  std::int32_t att_dim = 8;
  std::int32_t hidden_dim = 16;
  std::int32_t candidate_count = 16;   ///< M, candidate parent tuples per child
  double mode_mix = 0.5;               ///< fraction of rows generated with feedback
  double feedback_scale = 1.0;         ///< interpolation toward the feedback output
  std::int32_t mode_b_batch_rows = 32; ///< feedback applied after each mini-batch
  std::int32_t min_rows = 700;
  std::int32_t max_rows = 1200;

  void validate() const;
};

/// Per-table generator parameters. Every table owns its own networks; the
/// candidate scorer is a bilinear attention between the child's initial
/// latent (through w_q) and the combined parent embedding (through w_k).
struct StructParams {
  MlpParams mlp_init;   ///< noise (+ temporal channels for source tables) -> latent
  MlpParams mlp_comb;   ///< concatenated parent embeddings -> combined embedding
  MlpParams mlp_child;  ///< (initial latent ++ combined embedding) -> latent
  MlpParams mlp_fb;     ///< (parent embedding ++ child latent) -> parent embedding
  Matrix w_q;           ///< latent_dim x att_dim
  Matrix w_k;           ///< embed_dim x att_dim
  Matrix w_embed;       ///< latent_dim x embed_dim, row embedding projection
  std::int32_t candidate_count = 16;
  double mode_mix = 0.5;
  double feedback_scale = 1.0;
  std::int32_t mode_b_batch_rows = 32;
};

/// Samples parameters for one table of the given schema. Source tables get a
/// latent initializer over noise plus the four temporal channels; dependent
/// tables over pure noise plus the full selection machinery.
StructParams sample_struct_params(const SchemaGraph& schema, std::int32_t table,
                                  const StructConfig& cfg, Rng& rng);

/// Populates a source (layer-0) table: event times drawn proportional to the
/// table's temporal intensity, latents from mlp_init(noise ++ temporal
/// channels), embeddings as the linear projection of the latent.
void gen_source_table(DatabaseInstance& db, std::int32_t table, const StructParams& params,
                      const TemporalSignature& sig, const TemporalConfig& tcfg,
                      std::size_t n_rows, Rng& rng);

/// Populates a dependent table row by row: draw the initial latent, score
/// candidate_count uniformly drawn candidate parent tuples (with replacement)
/// by attention, sample the winner from the softmax, set the FK cells, update
/// the latent with the combined parent embedding, and stamp the row after its
/// parents with an exponential gap.
///
/// Rows [0, n_a) form one frozen batch (no feedback); the remaining
/// mode_mix fraction is generated sequentially in mini-batches of
/// mode_b_batch_rows, with selected parents' embeddings rewritten through
/// mlp_fb after each mini-batch. Throws GenerationError (naming the table)
/// when a parent table is empty.
void gen_dependent_table(DatabaseInstance& db, std::int32_t table, const StructParams& params,
                         const TemporalSignature& sig, const TemporalConfig& tcfg,
                         std::size_t n_rows, Rng& rng);

/// Baseline edge samplers for ablations: fixed_prob picks parents uniformly
/// with no scoring; concat_mlp scores candidates by the mean output of
/// mlp_comb over the concatenated parent embeddings (no latent query, no
/// feedback). Latent and timestamp handling match gen_dependent_table.
enum class EdgeVariant { fixed_prob, concat_mlp };

void simple_edge_variant(DatabaseInstance& db, std::int32_t table, EdgeVariant variant,
                         const StructParams& params, const TemporalSignature& sig,
                         const TemporalConfig& tcfg, std::size_t n_rows, Rng& rng);

/// Map degree -> number of parents with that degree. Histogram mass weighted
/// by degree equals the relation's edge count; parents with zero children
/// land in bin 0; an empty relation gives an empty histogram.
std::map<std::int64_t, std::int64_t> degree_histogram(const Relation& rel);

/// Child count per parent row.
std::vector<std::int64_t> parent_degrees(const Relation& rel);

/// Child counts restricted to children generated in one mode; first_b_row is
/// the child table's mode_a_rows boundary.
std::vector<std::int64_t> parent_degrees_mode(const Relation& rel, std::size_t first_b_row,
                                              bool mode_b);

}  // namespace relgen
