#pragma once

#include <cstdint>
#include <vector>

#include "relgen/config.hpp"
#include "relgen/instance.hpp"
#include "relgen/mlp.hpp"
#include "relgen/rng.hpp"
#include "relgen/schema.hpp"

namespace relgen {

/// Per-column decoding spec. Continuous channels are clipped to
/// [-clip_abs, clip_abs] before z-scoring; categorical channels are cut at
/// empirical quantile edges.
struct ColumnDecode {
  double clip_abs = 3.0;
};

struct ContentParams {
  std::int32_t rounds = 2;
  std::int32_t msg_dim = 8;
  /// Aligned with schema.edges: message nets for both directions of each
  /// relation. msg_from_parent maps a parent row state to the message its
  /// children receive; msg_from_child maps a child row state to the message
  /// its parent receives (summed over children, order-invariant).
  std::vector<MlpParams> msg_from_parent;
  std::vector<MlpParams> msg_from_child;
  /// Per table: update net over concat(h, one message block per incident
  /// relation in canonical order: edges where the table is the child first,
  /// then edges where it is the parent).
  std::vector<MlpParams> update;
  /// Decoding: shared trunk applied to the final state, then a per-table head
  /// emitting one channel per decoded column.
  MlpParams trunk;
  std::vector<MlpParams> head;
  /// Per table, aligned with the table's decoded_columns().
  std::vector<std::vector<ColumnDecode>> decode;
};

/// Relation slots feeding a table's update net, in canonical order.
struct RelationSlot {
  std::size_t edge = 0;
  bool as_child = false;  ///< table receives from its parent through this edge
};

std::vector<RelationSlot> relation_slots(const SchemaGraph& schema, std::size_t table);

ContentParams sample_content_params(const SchemaGraph& schema, const ContentConfig& cfg,
                                    std::int32_t state_dim, Rng& rng);

/// K rounds of bidirectional message passing over the instance graph, starting
/// from the structural latents. rounds == 0 returns the latents unchanged.
/// Result: per table, per row, the final state vector.
std::vector<std::vector<Vector>> message_passing(const DatabaseInstance& db,
                                                 const ContentParams& params);

/// Fills every feature column from the final states: continuous columns are
/// clipped and z-scored per table, categorical columns are quantile-binned to
/// their cardinality, timestamp columns copy the row timestamps. Key columns
/// are left untouched.
void decode_columns(DatabaseInstance& db, const std::vector<std::vector<Vector>>& states,
                    const ContentParams& params);

/// Empirical quantile cut points for binning n values into `cardinality`
/// classes; class(v) counts edges <= v. Duplicate edges collapse classes, so
/// constant inputs map to a single class.
std::vector<double> quantile_edges(std::vector<double> sorted_vals, std::int32_t cardinality);

/// Full pipeline: schema, temporal signatures, structure, content, decode.
/// Errors raised mid-pipeline are rethrown as GenerationError tagged with the
/// failing stage. `source` overrides the schema prior when non-null.
DatabaseInstance generate_database(const GeneratorConfig& cfg, std::uint64_t seed,
                                   SchemaSource* source = nullptr);

}  // namespace relgen
