#include "relgen/schema.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <string>

#include "relgen/errors.hpp"

namespace relgen {

std::string column_kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::primary_key: return "primary_key";
    case ColumnKind::foreign_key: return "foreign_key";
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::timestamp: return "timestamp";
  }
  return "unknown";
}

ColumnKind column_kind_from_name(const std::string& name) {
  if (name == "primary_key") return ColumnKind::primary_key;
  if (name == "foreign_key") return ColumnKind::foreign_key;
  if (name == "continuous") return ColumnKind::continuous;
  if (name == "categorical") return ColumnKind::categorical;
  if (name == "timestamp") return ColumnKind::timestamp;
  throw FormatError("unknown column kind: " + name);
}

std::vector<std::size_t> TableSpec::fk_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].kind == ColumnKind::foreign_key) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> TableSpec::feature_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    ColumnKind k = columns[i].kind;
    if (k == ColumnKind::continuous || k == ColumnKind::categorical ||
        k == ColumnKind::timestamp) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> TableSpec::decoded_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    ColumnKind k = columns[i].kind;
    if (k == ColumnKind::continuous || k == ColumnKind::categorical) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SchemaGraph::edges_as_child(std::int32_t table) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].child == table) out.push_back(e);
  }
  return out;
}

std::vector<std::size_t> SchemaGraph::edges_as_parent(std::int32_t table) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].parent == table) out.push_back(e);
  }
  return out;
}

nlohmann::ordered_json SchemaGraph::to_json() const {
  nlohmann::ordered_json j;
  j["tables"] = nlohmann::ordered_json::array();
  for (const TableSpec& t : tables) {
    nlohmann::ordered_json jt;
    jt["name"] = t.name;
    jt["layer"] = t.layer;
    jt["columns"] = nlohmann::ordered_json::array();
    for (const ColumnSpec& c : t.columns) {
      nlohmann::ordered_json jc;
      jc["name"] = c.name;
      jc["kind"] = column_kind_name(c.kind);
      if (c.kind == ColumnKind::categorical) jc["cardinality"] = c.cardinality;
      if (c.kind == ColumnKind::foreign_key) jc["ref_table"] = c.ref_table;
      jt["columns"].push_back(jc);
    }
    j["tables"].push_back(jt);
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const SchemaEdge& e : edges) {
    j["edges"].push_back({{"parent", e.parent}, {"child", e.child}, {"fk_column", e.fk_column}});
  }
  return j;
}

SchemaGraph SchemaGraph::from_json(const nlohmann::json& j) {
  SchemaGraph g;
  try {
    for (const auto& jt : j.at("tables")) {
      TableSpec t;
      t.name = jt.at("name").get<std::string>();
      t.layer = jt.value("layer", 0);
      for (const auto& jc : jt.at("columns")) {
        ColumnSpec c;
        c.name = jc.at("name").get<std::string>();
        c.kind = column_kind_from_name(jc.at("kind").get<std::string>());
        c.cardinality = jc.value("cardinality", 0);
        c.ref_table = jc.value("ref_table", -1);
        t.columns.push_back(c);
      }
      g.tables.push_back(std::move(t));
    }
    for (const auto& je : j.at("edges")) {
      SchemaEdge e;
      e.parent = je.at("parent").get<std::int32_t>();
      e.child = je.at("child").get<std::int32_t>();
      e.fk_column = je.at("fk_column").get<std::int32_t>();
      g.edges.push_back(e);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("schema json: ") + ex.what());
  }
  return g;
}

void SchemaConfig::validate() const {
  auto range_ok = [](std::int32_t lo, std::int32_t hi) { return lo >= 0 && lo <= hi; };
  if (!range_ok(min_tables, max_tables) || min_tables < 1) {
    throw ConfigError("schema.min_tables/max_tables: invalid range");
  }
  if (!range_ok(min_layers, max_layers) || min_layers < 1) {
    throw ConfigError("schema.min_layers/max_layers: invalid range");
  }
  if (!range_ok(min_parents, max_parents) || min_parents < 1) {
    throw ConfigError("schema.min_parents/max_parents: invalid range");
  }
  if (!range_ok(min_feature_cols, max_feature_cols) || min_feature_cols < 1) {
    throw ConfigError("schema.min_feature_cols/max_feature_cols: invalid range");
  }
  if (p_categorical < 0.0 || p_categorical > 1.0) {
    throw ConfigError("schema.p_categorical: outside [0, 1]");
  }
  if (p_timestamp < 0.0 || p_timestamp > 1.0) {
    throw ConfigError("schema.p_timestamp: outside [0, 1]");
  }
  if (min_cardinality < 2 || min_cardinality > max_cardinality) {
    throw ConfigError("schema.min_cardinality/max_cardinality: invalid range");
  }
  // Dependent tables draw parents from earlier layers, so multi-layer schemas
  // need at least min_parents + 1 tables to ever satisfy the bound.
  if (min_layers >= 2 && min_parents + 1 > max_tables) {
    throw ConfigError("schema.min_parents: unsatisfiable, needs more tables than max_tables");
  }
}

SchemaGraph sample_schema(const SchemaConfig& cfg, Rng& rng) {
  cfg.validate();
  auto draw = [&rng](std::int32_t lo, std::int32_t hi) {
    return lo + static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
  };

  std::int32_t n_tables = draw(cfg.min_tables, cfg.max_tables);
  // A schema can only host dependent tables when enough earlier tables exist
  // to satisfy min_parents.
  std::int32_t max_l = std::min(cfg.max_layers, n_tables);
  if (n_tables < cfg.min_parents + 1) max_l = 1;
  std::int32_t min_l = std::min(cfg.min_layers, max_l);
  std::int32_t n_layers = draw(min_l, max_l);

  // Layer sizes: layer 0 needs min_parents tables when dependents exist,
  // every layer needs at least one.
  std::vector<std::int32_t> layer_size(n_layers, 0);
  std::int32_t first_min = (n_layers >= 2) ? std::max(1, cfg.min_parents) : 1;
  std::int32_t remaining = n_tables;
  for (std::int32_t l = 0; l < n_layers; ++l) {
    std::int32_t need_after = 0;
    for (std::int32_t k = l + 1; k < n_layers; ++k) need_after += 1;
    std::int32_t lo = (l == 0) ? first_min : 1;
    std::int32_t hi = remaining - need_after;
    layer_size[l] = (l + 1 == n_layers) ? remaining : draw(lo, hi);
    remaining -= layer_size[l];
  }

  SchemaGraph g;
  std::vector<std::int32_t> table_layer;
  for (std::int32_t l = 0; l < n_layers; ++l) {
    for (std::int32_t k = 0; k < layer_size[l]; ++k) table_layer.push_back(l);
  }

  std::vector<std::int32_t> earlier;  // table ids in layers before the current one
  std::int32_t layer_start = 0;
  for (std::int32_t i = 0; i < n_tables; ++i) {
    if (i > 0 && table_layer[i] != table_layer[i - 1]) {
      for (std::int32_t t = layer_start; t < i; ++t) earlier.push_back(t);
      layer_start = i;
    }
    TableSpec t;
    t.name = "t" + std::to_string(i);
    t.layer = table_layer[i];
    t.columns.push_back({t.name + "_id", ColumnKind::primary_key, 0, -1});

    if (t.layer > 0) {
      std::int32_t pool = static_cast<std::int32_t>(earlier.size());
      std::int32_t hi_parents = std::min(cfg.max_parents, pool);
      std::int32_t n_parents = draw(std::min(cfg.min_parents, hi_parents), hi_parents);
      std::vector<std::uint32_t> pick = rng.sample_without_replacement(
          static_cast<std::uint32_t>(pool), static_cast<std::uint32_t>(n_parents));
      for (std::uint32_t p : pick) {
        std::int32_t parent = earlier[p];
        ColumnSpec c;
        c.name = "t" + std::to_string(parent) + "_ref";
        c.kind = ColumnKind::foreign_key;
        c.ref_table = parent;
        t.columns.push_back(c);
      }
    }

    std::int32_t n_feat = draw(cfg.min_feature_cols, cfg.max_feature_cols);
    std::int32_t n_num = 0, n_cat = 0;
    for (std::int32_t f = 0; f < n_feat; ++f) {
      if (rng.uniform() < cfg.p_categorical) {
        ColumnSpec c;
        c.name = "cat" + std::to_string(n_cat++);
        c.kind = ColumnKind::categorical;
        c.cardinality = draw(cfg.min_cardinality, cfg.max_cardinality);
        t.columns.push_back(c);
      } else {
        ColumnSpec c;
        c.name = "num" + std::to_string(n_num++);
        c.kind = ColumnKind::continuous;
        t.columns.push_back(c);
      }
    }
    if (rng.uniform() < cfg.p_timestamp) {
      t.columns.push_back({"ts", ColumnKind::timestamp, 0, -1});
    }
    g.tables.push_back(std::move(t));
  }

  for (std::int32_t i = 0; i < n_tables; ++i) {
    const TableSpec& t = g.tables[i];
    for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
      if (t.columns[ci].kind == ColumnKind::foreign_key) {
        g.edges.push_back({t.columns[ci].ref_table, i, static_cast<std::int32_t>(ci)});
      }
    }
  }
  return g;
}

std::vector<std::int32_t> topological_order(const SchemaGraph& schema) {
  std::size_t n = schema.tables.size();
  std::vector<std::int32_t> indeg(n, 0);
  std::vector<std::vector<std::int32_t>> children(n);
  for (const SchemaEdge& e : schema.edges) {
    if (e.parent < 0 || e.child < 0 || e.parent >= static_cast<std::int32_t>(n) ||
        e.child >= static_cast<std::int32_t>(n)) {
      throw ContractError("topological_order: edge endpoint out of range");
    }
    ++indeg[e.child];
    children[e.parent].push_back(e.child);
  }
  // Kahn's algorithm; the ready set is kept sorted so the order is a pure
  // function of the graph.
  std::set<std::int32_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.insert(static_cast<std::int32_t>(i));
  }
  std::vector<std::int32_t> order;
  while (!ready.empty()) {
    std::int32_t t = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(t);
    for (std::int32_t c : children[t]) {
      if (--indeg[c] == 0) ready.insert(c);
    }
  }
  if (order.size() != n) throw ContractError("topological_order: schema graph has a cycle");
  return order;
}

std::vector<ValidationFinding> validate_schema(const SchemaGraph& schema) {
  std::vector<ValidationFinding> out;
  std::int32_t n = static_cast<std::int32_t>(schema.tables.size());
  auto add = [&out](std::string code, std::string msg, std::int32_t t, std::int32_t c) {
    out.push_back({std::move(code), std::move(msg), t, c});
  };

  for (std::int32_t ti = 0; ti < n; ++ti) {
    const TableSpec& t = schema.tables[ti];
    std::int32_t pks = 0;
    std::set<std::string> names;
    for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
      const ColumnSpec& c = t.columns[ci];
      if (!names.insert(c.name).second) {
        add("DUPLICATE_COLUMN", t.name + ": duplicate column " + c.name, ti,
            static_cast<std::int32_t>(ci));
      }
      switch (c.kind) {
        case ColumnKind::primary_key:
          ++pks;
          break;
        case ColumnKind::foreign_key:
          if (c.ref_table < 0 || c.ref_table >= n) {
            add("DANGLING_REF", t.name + "." + c.name + ": references missing table", ti,
                static_cast<std::int32_t>(ci));
          } else if (c.ref_table == ti) {
            add("CYCLE", t.name + "." + c.name + ": self reference", ti,
                static_cast<std::int32_t>(ci));
          }
          break;
        case ColumnKind::categorical:
          if (c.cardinality < 2) {
            add("BAD_CARDINALITY", t.name + "." + c.name + ": cardinality < 2", ti,
                static_cast<std::int32_t>(ci));
          }
          break;
        default:
          break;
      }
    }
    if (pks == 0) add("MISSING_PK", t.name + ": no primary key", ti, -1);
    if (pks > 1) add("EXTRA_PK", t.name + ": multiple primary keys", ti, -1);
  }

  // Edge list must mirror the FK columns one-to-one.
  std::set<std::pair<std::int32_t, std::int32_t>> edge_cols;
  for (const SchemaEdge& e : schema.edges) {
    bool in_range = e.child >= 0 && e.child < n && e.fk_column >= 0 &&
                    e.fk_column < static_cast<std::int32_t>(
                                      schema.tables[e.child >= 0 && e.child < n ? e.child : 0]
                                          .columns.size());
    if (!in_range) {
      add("EDGE_MISMATCH", "edge references missing child column", e.child, e.fk_column);
      continue;
    }
    const ColumnSpec& c = schema.tables[e.child].columns[e.fk_column];
    if (c.kind != ColumnKind::foreign_key || c.ref_table != e.parent) {
      add("EDGE_MISMATCH", "edge disagrees with column " + c.name, e.child, e.fk_column);
    }
    edge_cols.insert({e.child, e.fk_column});
  }
  for (std::int32_t ti = 0; ti < n; ++ti) {
    for (std::size_t ci : schema.tables[ti].fk_columns()) {
      if (!edge_cols.count({ti, static_cast<std::int32_t>(ci)})) {
        add("EDGE_MISMATCH", schema.tables[ti].name + ": fk column missing from edge list", ti,
            static_cast<std::int32_t>(ci));
      }
    }
  }

  // Cycle detection over the table graph (self references reported above).
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<std::vector<std::int32_t>> children(n);
  for (const SchemaEdge& e : schema.edges) {
    if (e.parent >= 0 && e.parent < n && e.child >= 0 && e.child < n && e.parent != e.child) {
      children[e.parent].push_back(e.child);
    }
  }
  bool cycle = false;
  std::function<void(std::int32_t)> dfs = [&](std::int32_t v) {
    state[v] = 1;
    for (std::int32_t c : children[v]) {
      if (state[c] == 1) cycle = true;
      else if (state[c] == 0) dfs(c);
    }
    state[v] = 2;
  };
  for (std::int32_t v = 0; v < n && !cycle; ++v) {
    if (state[v] == 0) dfs(v);
  }
  if (cycle) add("CYCLE", "schema graph has a directed cycle", -1, -1);

  return out;
}

SchemaGraph FixedSchemaSource::next(Rng&) {
  if (schemas_.empty()) throw ContractError("FixedSchemaSource: no schemas");
  SchemaGraph g = schemas_[next_ % schemas_.size()];
  ++next_;
  return g;
}

}  // namespace relgen
