#include "relgen/instance.hpp"

#include <cmath>
#include <string>

#include "relgen/errors.hpp"

namespace relgen {

Relation build_relation(const DatabaseInstance& db, std::size_t edge) {
  const SchemaEdge& e = db.schema.edges[edge];
  const TableSpec& child_spec = db.schema.tables[e.child];
  const TableData& child = db.tables[e.child];
  const TableData& parent = db.tables[e.parent];

  std::size_t fk_slot = 0;
  bool found = false;
  std::vector<std::size_t> fks = child_spec.fk_columns();
  for (std::size_t i = 0; i < fks.size(); ++i) {
    if (static_cast<std::int32_t>(fks[i]) == e.fk_column) {
      fk_slot = i;
      found = true;
    }
  }
  if (!found) throw ContractError("build_relation: edge has no matching fk column");

  Relation rel;
  rel.children_of.assign(parent.n_rows(), {});
  rel.parent_of = child.fk[fk_slot];
  for (std::size_t r = 0; r < rel.parent_of.size(); ++r) {
    std::int64_t p = rel.parent_of[r];
    if (p < 0 || p >= static_cast<std::int64_t>(parent.n_rows())) {
      throw ContractError("build_relation: fk value out of range");
    }
    rel.children_of[p].push_back(static_cast<std::int64_t>(r));
  }
  return rel;
}

namespace {

bool finite(float v) { return std::isfinite(v); }

}  // namespace

std::vector<ValidationFinding> validate_database(const DatabaseInstance& db) {
  std::vector<ValidationFinding> out = validate_schema(db.schema);
  auto add = [&out](std::string code, std::string msg, std::int32_t t, std::int32_t c) {
    out.push_back({std::move(code), std::move(msg), t, c});
  };

  std::int32_t n = static_cast<std::int32_t>(db.schema.tables.size());
  if (db.tables.size() != db.schema.tables.size()) {
    add("SHAPE_MISMATCH", "table data count differs from schema", -1, -1);
    return out;
  }
  if (db.relations.size() != db.schema.edges.size()) {
    add("SHAPE_MISMATCH", "relation count differs from schema edges", -1, -1);
  }

  for (std::int32_t ti = 0; ti < n; ++ti) {
    const TableSpec& spec = db.schema.tables[ti];
    const TableData& t = db.tables[ti];
    std::size_t rows = t.n_rows();

    if (t.columns.size() != spec.columns.size()) {
      add("SHAPE_MISMATCH", spec.name + ": column storage count mismatch", ti, -1);
      continue;
    }
    if (t.fk.size() != spec.fk_columns().size()) {
      add("SHAPE_MISMATCH", spec.name + ": fk storage count mismatch", ti, -1);
      continue;
    }

    for (std::size_t ci = 0; ci < spec.columns.size(); ++ci) {
      const ColumnSpec& cs = spec.columns[ci];
      const ColumnValues& cv = t.columns[ci];
      // Empty cell stores mean the content stage has not run; only a partial
      // fill is a shape violation.
      if (cs.kind == ColumnKind::continuous || cs.kind == ColumnKind::timestamp) {
        if (cv.num.empty()) continue;
        if (cv.num.size() != rows) {
          add("SHAPE_MISMATCH", spec.name + "." + cs.name + ": cell count mismatch", ti,
              static_cast<std::int32_t>(ci));
          continue;
        }
        for (float v : cv.num) {
          if (!finite(v)) {
            add("NAN_VALUE", spec.name + "." + cs.name + ": non-finite cell", ti,
                static_cast<std::int32_t>(ci));
            break;
          }
        }
      } else if (cs.kind == ColumnKind::categorical) {
        if (cv.cls.empty()) continue;
        if (cv.cls.size() != rows) {
          add("SHAPE_MISMATCH", spec.name + "." + cs.name + ": cell count mismatch", ti,
              static_cast<std::int32_t>(ci));
          continue;
        }
        for (std::int32_t v : cv.cls) {
          if (v < 0 || v >= cs.cardinality) {
            add("BAD_CLASS", spec.name + "." + cs.name + ": class out of range", ti,
                static_cast<std::int32_t>(ci));
            break;
          }
        }
      }
    }

    for (const RowNode& r : t.rows) {
      bool ok = std::isfinite(r.timestamp);
      for (float v : r.latent) ok = ok && finite(v);
      for (float v : r.embed) ok = ok && finite(v);
      if (!ok) {
        add("NAN_VALUE", spec.name + ": non-finite latent state", ti, -1);
        break;
      }
    }
  }

  for (std::size_t e = 0; e < db.schema.edges.size() && e < db.relations.size(); ++e) {
    const SchemaEdge& edge = db.schema.edges[e];
    if (edge.parent < 0 || edge.parent >= n || edge.child < 0 || edge.child >= n) continue;
    const TableData& parent = db.tables[edge.parent];
    const TableData& child = db.tables[edge.child];
    const Relation& rel = db.relations[e];
    const std::string ename =
        db.schema.tables[edge.parent].name + "->" + db.schema.tables[edge.child].name;

    if (rel.parent_of.size() != child.n_rows() || rel.children_of.size() != parent.n_rows()) {
      add("RELATION_MISMATCH", ename + ": adjacency sized wrong", edge.child, edge.fk_column);
      continue;
    }
    bool bad_ref = false, bad_transpose = false, bad_time = false;
    std::size_t edge_count = 0;
    for (std::size_t r = 0; r < rel.parent_of.size(); ++r) {
      std::int64_t p = rel.parent_of[r];
      if (p < 0 || p >= static_cast<std::int64_t>(parent.n_rows())) {
        bad_ref = true;
        continue;
      }
      if (child.rows[r].timestamp < parent.rows[p].timestamp) bad_time = true;
    }
    for (std::size_t p = 0; p < rel.children_of.size(); ++p) {
      std::int64_t prev = -1;
      for (std::int64_t c : rel.children_of[p]) {
        ++edge_count;
        if (c <= prev) bad_transpose = true;
        prev = c;
        if (c < 0 || c >= static_cast<std::int64_t>(child.n_rows()) ||
            rel.parent_of[c] != static_cast<std::int64_t>(p)) {
          bad_transpose = true;
        }
      }
    }
    if (edge_count != rel.parent_of.size() && !bad_ref) bad_transpose = true;
    if (bad_ref) add("REF_INTEGRITY", ename + ": fk outside parent table", edge.child, edge.fk_column);
    if (bad_transpose) add("RELATION_MISMATCH", ename + ": transpose inconsistent", edge.child, edge.fk_column);
    if (bad_time) add("TIME_ORDER", ename + ": child precedes parent", edge.child, edge.fk_column);
  }

  return out;
}

}  // namespace relgen
