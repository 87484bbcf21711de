#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relgen/config.hpp"
#include "relgen/instance.hpp"
#include "relgen/rng.hpp"
#include "relgen/tensor.hpp"

namespace relgen {

enum class HopDirection { forward_inherit, backward_aggregate };

/// One traversal step along a schema edge. Forward hops walk child -> parent
/// (each row reaches exactly one parent); backward hops walk parent ->
/// children (a row reaches its whole child set).
struct Hop {
  std::size_t edge = 0;
  HopDirection dir = HopDirection::forward_inherit;

  friend bool operator==(const Hop&, const Hop&) = default;
};

enum class Aggregator { identity, mean, max, min, count, mode };

std::string aggregator_name(Aggregator a);
Aggregator aggregator_from_name(const std::string& name);

/// One flattened feature: follow `hops` from the anchor table, then reduce the
/// reached rows' `column` with `agg`. column == -1 marks a count path (the
/// reached multiset's size, no source column) and the zero padding columns.
struct FeaturePath {
  std::vector<Hop> hops;
  std::int32_t table = -1;   ///< terminal table the column lives in
  std::int32_t column = -1;
  Aggregator agg = Aggregator::identity;

  friend bool operator==(const FeaturePath&, const FeaturePath&) = default;
};

/// Reduces one multiset of numeric values. count -> size (0 on empty);
/// mean/max/min/mode on an empty multiset -> nullopt (missing). mean uses
/// sorted accumulation and mode counts exact values with ties broken toward
/// the smallest, so any permutation of the input gives the same result.
std::optional<double> aggregate(std::span<const float> values, Aggregator agg);

/// Same for class indices. mean/max/min are meaningless on classes and raise
/// ContractError; mode ties break toward the smallest class index.
std::optional<double> aggregate_classes(std::span<const std::int32_t> values, Aggregator agg);

/// All feature paths of length <= depth anchored at target_table, in canonical
/// order: hop sequence (edge id, then direction), then source column, then
/// aggregator. Depth must be 1 or 2. Includes the zero-hop identity paths over
/// the anchor's own feature columns. Aggregating paths cross numeric columns
/// with mean/max/min/mode and categorical columns with mode, plus one count
/// per hop sequence ending in a backward hop. A backward hop followed by a
/// forward hop up the same edge lands back on the anchor row and would copy
/// its values verbatim, so those sequences are skipped.
std::vector<FeaturePath> enumerate_paths(const SchemaGraph& schema, std::int32_t target_table,
                                         std::int32_t depth,
                                         const std::vector<std::string>& aggregators = {
                                             "mean", "max", "min", "count", "mode"});

/// Evaluated feature columns for every row of the anchor table.
struct EvaluatedPool {
  std::vector<FeaturePath> paths;
  Matrix values;                      ///< n_rows x paths.size()
  std::vector<std::uint8_t> missing;  ///< same shape, row-major
};

EvaluatedPool evaluate_paths(const DatabaseInstance& db, std::int32_t target_table,
                             const std::vector<FeaturePath>& paths);

struct LinearizedTask {
  Matrix x;                           ///< n_rows x width
  std::vector<FeaturePath> provenance;
  std::vector<std::uint8_t> missing;  ///< row-major mask, true where x is filler
  std::int32_t target_table = -1;
  std::vector<std::int64_t> row_ids;  ///< anchor rows, in x row order

  std::size_t width() const { return x.cols(); }
};

/// Uniformly subsamples pool columns to `width` (keeping canonical order) and
/// pads with masked zero columns when fewer exist. exclude_column >= 0 drops
/// that anchor-table identity column from the eligible set first.
LinearizedTask assemble_task(const EvaluatedPool& pool, std::int32_t target_table,
                             std::int32_t width, std::int32_t exclude_column, Rng& rng);

/// Full linearization: enumerate, cap the evaluation budget at
/// cfg.overgen_width() by uniform subsampling, evaluate, subsample to
/// cfg.standard_width. Deterministic given (db, rng state).
LinearizedTask dfs_linearize(const DatabaseInstance& db, std::int32_t target_table,
                             const DfsConfig& cfg, Rng& rng);

nlohmann::ordered_json path_to_json(const FeaturePath& path);
FeaturePath path_from_json(const nlohmann::json& j);

}  // namespace relgen
