#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relgen/rng.hpp"

namespace relgen {

enum class ColumnKind { primary_key, foreign_key, continuous, categorical, timestamp };

std::string column_kind_name(ColumnKind k);
ColumnKind column_kind_from_name(const std::string& name);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::int32_t cardinality = 0;  ///< categorical only, >= 2
  std::int32_t ref_table = -1;   ///< foreign_key only
};

struct TableSpec {
  std::string name;
  std::int32_t layer = 0;
  std::vector<ColumnSpec> columns;

  /// Indices of foreign key columns, in declaration order.
  std::vector<std::size_t> fk_columns() const;
  /// Indices of continuous, categorical and timestamp columns.
  std::vector<std::size_t> feature_columns() const;
  /// Feature columns whose values come from the content decoder
  /// (continuous and categorical; timestamps are filled structurally).
  std::vector<std::size_t> decoded_columns() const;
};

/// One foreign key relation: child.columns[fk_column] references parent's PK.
struct SchemaEdge {
  std::int32_t parent = -1;
  std::int32_t child = -1;
  std::int32_t fk_column = -1;
};

struct SchemaGraph {
  std::vector<TableSpec> tables;
  std::vector<SchemaEdge> edges;  ///< canonical order: (child, fk_column) ascending

  /// Edge ids where the table is the child, then where it is the parent.
  /// This fixed order also defines the relation slot order used by the
  /// content stage.
  std::vector<std::size_t> edges_as_child(std::int32_t table) const;
  std::vector<std::size_t> edges_as_parent(std::int32_t table) const;

  nlohmann::ordered_json to_json() const;
  static SchemaGraph from_json(const nlohmann::json& j);
};

struct SchemaConfig {
  std::int32_t min_tables = 2;
  std::int32_t max_tables = 5;
  std::int32_t min_layers = 1;
  std::int32_t max_layers = 3;
  std::int32_t min_parents = 1;
  std::int32_t max_parents = 2;
  std::int32_t min_feature_cols = 4;
  std::int32_t max_feature_cols = 8;
  double p_categorical = 0.25;
  double p_timestamp = 0.5;
  std::int32_t min_cardinality = 2;
  std::int32_t max_cardinality = 6;

  /// Throws ConfigError when the bounds are malformed or can never be met
  /// (for example multi-layer schemas whose tables cannot reach min_parents).
  void validate() const;
};

/// Samples a layered schema DAG. Tables are indexed in layer order, so every
/// edge points from a lower table index (parent) to a higher one (child);
/// dependent tables draw 1..max_parents distinct parents from strictly
/// earlier layers.
SchemaGraph sample_schema(const SchemaConfig& cfg, Rng& rng);

/// Parent-before-child order; ties broken by table index. Throws
/// ContractError if the graph has a cycle.
std::vector<std::int32_t> topological_order(const SchemaGraph& schema);

struct ValidationFinding {
  std::string code;     ///< MISSING_PK, EXTRA_PK, DANGLING_REF, CYCLE, ...
  std::string message;
  std::int32_t table = -1;
  std::int32_t column = -1;
};

/// Structural checks on an arbitrary schema graph: PK presence, FK targets,
/// edge/column consistency, cardinalities, acyclicity. Returns an empty list
/// for a well-formed schema.
std::vector<ValidationFinding> validate_schema(const SchemaGraph& schema);

/// Seam for schema injection: anything that can produce schema graphs can
/// drive the downstream stages.
class SchemaSource {
 public:
  virtual ~SchemaSource() = default;
  virtual SchemaGraph next(Rng& rng) = 0;
};

/// Default source: the layered prior above.
class PriorSchemaSource : public SchemaSource {
 public:
  explicit PriorSchemaSource(SchemaConfig cfg) : cfg_(cfg) {}
  SchemaGraph next(Rng& rng) override { return sample_schema(cfg_, rng); }

 private:
  SchemaConfig cfg_;
};

/// Replays a fixed list of schemas round-robin; used to pin schemas in tests
/// and to linearize externally supplied databases.
class FixedSchemaSource : public SchemaSource {
 public:
  explicit FixedSchemaSource(std::vector<SchemaGraph> schemas)
      : schemas_(std::move(schemas)) {}
  SchemaGraph next(Rng&) override;

 private:
  std::vector<SchemaGraph> schemas_;
  std::size_t next_ = 0;
};

}  // namespace relgen
