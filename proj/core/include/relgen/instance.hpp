#pragma once

#include <cstdint>
#include <vector>

#include "relgen/schema.hpp"
#include "relgen/tensor.hpp"

namespace relgen {

/// One generated row. The primary key is the row index itself (a trivially
/// injective encoding), so it is never stored.
struct RowNode {
  Vector latent;       ///< Z_r, the structural latent state
  Vector embed;        ///< e_r, this row's embedding when acting as a parent
  double timestamp = 0.0;  ///< seconds since epoch start of the event window
};

/// Per-column cell storage; exactly one of num/cls is populated depending on
/// the column kind. Slots for PK/FK columns stay empty (keys live in
/// TableData::fk and the row index).
struct ColumnValues {
  ColumnKind kind = ColumnKind::continuous;
  std::vector<float> num;          ///< continuous or timestamp cells
  std::vector<std::int32_t> cls;   ///< categorical class indices
};

/// Instance-level adjacency for one schema edge. children_of is the exact
/// transpose of parent_of, with child lists kept ascending.
struct Relation {
  std::vector<std::vector<std::int64_t>> children_of;  ///< parent row -> child rows
  std::vector<std::int64_t> parent_of;                 ///< child row -> parent row
};

struct TableData {
  std::vector<RowNode> rows;
  /// FK cell values, aligned with TableSpec::fk_columns() order.
  std::vector<std::vector<std::int64_t>> fk;
  /// Cell storage aligned with TableSpec::columns.
  std::vector<ColumnValues> columns;
  /// Rows [0, mode_a_rows) were generated in the frozen batch; the rest
  /// sequentially with feedback.
  std::size_t mode_a_rows = 0;

  std::size_t n_rows() const { return rows.size(); }
};

struct DatabaseInstance {
  SchemaGraph schema;
  std::vector<TableData> tables;      ///< aligned with schema.tables
  std::vector<Relation> relations;    ///< aligned with schema.edges
  std::uint64_t seed = 0;
};

/// Builds the adjacency for one edge from the child table's FK cells.
Relation build_relation(const DatabaseInstance& db, std::size_t edge);

/// Structural integrity findings over a full instance: schema findings,
/// referential integrity, relation/FK consistency, NaN cells, class ranges,
/// child-after-parent timestamps. Empty means the instance is sound.
std::vector<ValidationFinding> validate_database(const DatabaseInstance& db);

}  // namespace relgen
