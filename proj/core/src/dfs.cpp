#include "relgen/dfs.hpp"

#include <algorithm>
#include <set>

#include "relgen/accum.hpp"
#include "relgen/errors.hpp"

namespace relgen {

namespace {

/// Longest run in a sorted sequence; the scan keeps the first (smallest)
/// value on ties.
template <typename T>
double sorted_mode(std::vector<T> vals) {
  std::sort(vals.begin(), vals.end());
  T best = vals.front();
  std::size_t best_run = 0;
  std::size_t i = 0;
  while (i < vals.size()) {
    std::size_t j = i;
    while (j < vals.size() && vals[j] == vals[i]) ++j;
    if (j - i > best_run) {
      best_run = j - i;
      best = vals[i];
    }
    i = j;
  }
  return static_cast<double>(best);
}

}  // namespace

std::string aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::identity: return "identity";
    case Aggregator::mean: return "mean";
    case Aggregator::max: return "max";
    case Aggregator::min: return "min";
    case Aggregator::count: return "count";
    case Aggregator::mode: return "mode";
  }
  throw ContractError("unhandled aggregator");
}

Aggregator aggregator_from_name(const std::string& name) {
  if (name == "identity") return Aggregator::identity;
  if (name == "mean") return Aggregator::mean;
  if (name == "max") return Aggregator::max;
  if (name == "min") return Aggregator::min;
  if (name == "count") return Aggregator::count;
  if (name == "mode") return Aggregator::mode;
  throw FormatError("unknown aggregator name: " + name);
}

std::optional<double> aggregate(std::span<const float> values, Aggregator agg) {
  if (agg == Aggregator::count) return static_cast<double>(values.size());
  if (values.empty()) return std::nullopt;
  switch (agg) {
    case Aggregator::mean:
      return sorted_sum(values) / static_cast<double>(values.size());
    case Aggregator::max:
      return static_cast<double>(*std::max_element(values.begin(), values.end()));
    case Aggregator::min:
      return static_cast<double>(*std::min_element(values.begin(), values.end()));
    case Aggregator::mode:
      return sorted_mode(std::vector<float>(values.begin(), values.end()));
    case Aggregator::identity:
      if (values.size() != 1) {
        throw ContractError("identity aggregation needs exactly one value");
      }
      return static_cast<double>(values.front());
    case Aggregator::count:
      break;
  }
  throw ContractError("unhandled aggregator");
}

std::optional<double> aggregate_classes(std::span<const std::int32_t> values, Aggregator agg) {
  if (agg == Aggregator::count) return static_cast<double>(values.size());
  if (values.empty()) return std::nullopt;
  switch (agg) {
    case Aggregator::mode:
      return sorted_mode(std::vector<std::int32_t>(values.begin(), values.end()));
    case Aggregator::identity:
      if (values.size() != 1) {
        throw ContractError("identity aggregation needs exactly one value");
      }
      return static_cast<double>(values.front());
    case Aggregator::mean:
    case Aggregator::max:
    case Aggregator::min:
      throw ContractError("mean/max/min are undefined on class indices");
    case Aggregator::count:
      break;
  }
  throw ContractError("unhandled aggregator");
}

namespace {

bool is_numeric(ColumnKind k) {
  return k == ColumnKind::continuous || k == ColumnKind::timestamp;
}

void emit_paths_for_sequence(const SchemaGraph& schema, const std::vector<Hop>& hops,
                             std::int32_t terminal, const std::set<Aggregator>& aggs,
                             std::vector<FeaturePath>& out) {
  const TableSpec& ts = schema.tables[terminal];
  bool aggregating = std::any_of(hops.begin(), hops.end(), [](const Hop& h) {
    return h.dir == HopDirection::backward_aggregate;
  });
  if (!aggregating) {
    for (std::size_t ci : ts.feature_columns()) {
      out.push_back({hops, terminal, static_cast<std::int32_t>(ci), Aggregator::identity});
    }
    return;
  }
  // One count per sequence; trailing forward hops keep the multiset size, so
  // the count is attached where the last hop aggregates.
  if (aggs.count(Aggregator::count) != 0 &&
      hops.back().dir == HopDirection::backward_aggregate) {
    out.push_back({hops, terminal, -1, Aggregator::count});
  }
  for (std::size_t ci : ts.feature_columns()) {
    const ColumnSpec& cs = ts.columns[ci];
    for (Aggregator a : {Aggregator::mean, Aggregator::max, Aggregator::min, Aggregator::mode}) {
      if (aggs.count(a) == 0) continue;
      if (!is_numeric(cs.kind) && a != Aggregator::mode) continue;
      out.push_back({hops, terminal, static_cast<std::int32_t>(ci), a});
    }
  }
}

void expand_sequences(const SchemaGraph& schema, std::int32_t table, std::vector<Hop>& hops,
                      std::int32_t depth_left, const std::set<Aggregator>& aggs,
                      std::vector<FeaturePath>& out) {
  emit_paths_for_sequence(schema, hops, table, aggs, out);
  if (depth_left == 0) return;
  for (std::size_t e = 0; e < schema.edges.size(); ++e) {
    const SchemaEdge& edge = schema.edges[e];
    if (edge.child == table) {
      // Skip the sequence that walks a backward hop straight back up the same
      // edge: it reaches only the anchor row and copies its values verbatim.
      bool backtrack = !hops.empty() && hops.back().edge == e &&
                       hops.back().dir == HopDirection::backward_aggregate;
      if (!backtrack) {
        hops.push_back({e, HopDirection::forward_inherit});
        expand_sequences(schema, edge.parent, hops, depth_left - 1, aggs, out);
        hops.pop_back();
      }
    }
    if (edge.parent == table) {
      hops.push_back({e, HopDirection::backward_aggregate});
      expand_sequences(schema, edge.child, hops, depth_left - 1, aggs, out);
      hops.pop_back();
    }
  }
}

}  // namespace

std::vector<FeaturePath> enumerate_paths(const SchemaGraph& schema, std::int32_t target_table,
                                         std::int32_t depth,
                                         const std::vector<std::string>& aggregators) {
  if (depth != 1 && depth != 2) throw ConfigError("dfs.depth: must be 1 or 2");
  if (target_table < 0 || static_cast<std::size_t>(target_table) >= schema.tables.size()) {
    throw ContractError("target table out of range");
  }
  std::set<Aggregator> aggs;
  for (const std::string& name : aggregators) {
    Aggregator a = aggregator_from_name(name);
    if (a == Aggregator::identity) {
      throw ConfigError("dfs.aggregators: identity is implicit, not configurable");
    }
    aggs.insert(a);
  }
  std::vector<FeaturePath> out;
  std::vector<Hop> hops;
  expand_sequences(schema, target_table, hops, depth, aggs, out);
  return out;
}

EvaluatedPool evaluate_paths(const DatabaseInstance& db, std::int32_t target_table,
                             const std::vector<FeaturePath>& paths) {
  if (target_table < 0 || static_cast<std::size_t>(target_table) >= db.schema.tables.size()) {
    throw ContractError("target table out of range");
  }
  if (db.relations.size() != db.schema.edges.size()) {
    throw ContractError("path evaluation requires instance relations for every edge");
  }
  const std::size_t n = db.tables[target_table].n_rows();
  EvaluatedPool pool;
  pool.paths = paths;
  pool.values = Matrix(n, paths.size(), 0.0f);
  pool.missing.assign(n * paths.size(), 0);

  std::vector<std::int64_t> reach;
  std::vector<std::int64_t> next;
  std::vector<float> nums;
  std::vector<std::int32_t> classes;
  std::size_t g = 0;
  while (g < paths.size()) {
    // Paths arrive grouped by hop sequence (canonical order), so the reach is
    // computed once per group and row.
    std::size_t g_end = g;
    while (g_end < paths.size() && paths[g_end].hops == paths[g].hops) ++g_end;
    const std::vector<Hop>& hops = paths[g].hops;

    std::int32_t terminal = target_table;
    for (const Hop& h : hops) {
      const SchemaEdge& edge = db.schema.edges.at(h.edge);
      std::int32_t from = h.dir == HopDirection::forward_inherit ? edge.child : edge.parent;
      if (from != terminal) throw ContractError("path hops do not follow the schema");
      terminal = h.dir == HopDirection::forward_inherit ? edge.parent : edge.child;
    }

    for (std::size_t r = 0; r < n; ++r) {
      reach.assign(1, static_cast<std::int64_t>(r));
      for (const Hop& h : hops) {
        const Relation& rel = db.relations[h.edge];
        next.clear();
        if (h.dir == HopDirection::forward_inherit) {
          for (std::int64_t v : reach) {
            next.push_back(rel.parent_of.at(static_cast<std::size_t>(v)));
          }
        } else {
          for (std::int64_t v : reach) {
            const auto& kids = rel.children_of.at(static_cast<std::size_t>(v));
            next.insert(next.end(), kids.begin(), kids.end());
          }
        }
        reach.swap(next);
      }

      for (std::size_t pi = g; pi < g_end; ++pi) {
        const FeaturePath& path = paths[pi];
        if (path.table != terminal) throw ContractError("path terminal table mismatch");
        std::optional<double> v;
        if (path.column < 0) {
          if (path.agg != Aggregator::count) {
            throw ContractError("column-free paths must use the count aggregator");
          }
          v = static_cast<double>(reach.size());
        } else {
          const ColumnValues& cv =
              db.tables[terminal].columns.at(static_cast<std::size_t>(path.column));
          if (cv.kind == ColumnKind::categorical) {
            classes.clear();
            for (std::int64_t rv : reach) {
              classes.push_back(cv.cls.at(static_cast<std::size_t>(rv)));
            }
            v = aggregate_classes(classes, path.agg);
          } else {
            nums.clear();
            for (std::int64_t rv : reach) {
              nums.push_back(cv.num.at(static_cast<std::size_t>(rv)));
            }
            v = aggregate(nums, path.agg);
          }
        }
        if (v.has_value()) {
          pool.values(r, pi) = static_cast<float>(*v);
        } else {
          pool.missing[r * paths.size() + pi] = 1;
        }
      }
    }
    g = g_end;
  }
  return pool;
}

LinearizedTask assemble_task(const EvaluatedPool& pool, std::int32_t target_table,
                             std::int32_t width, std::int32_t exclude_column, Rng& rng) {
  if (width < 1) throw ConfigError("dfs.standard_width: must be positive");
  const std::size_t n = pool.values.rows();
  std::vector<std::size_t> eligible;
  for (std::size_t pi = 0; pi < pool.paths.size(); ++pi) {
    const FeaturePath& p = pool.paths[pi];
    bool target_identity = p.hops.empty() && p.table == target_table &&
                           p.column == exclude_column && exclude_column >= 0;
    if (!target_identity) eligible.push_back(pi);
  }
  const std::size_t w = static_cast<std::size_t>(width);
  std::vector<std::size_t> chosen;
  if (eligible.size() > w) {
    for (std::uint32_t k : rng.sample_without_replacement(
             static_cast<std::uint32_t>(eligible.size()), static_cast<std::uint32_t>(w))) {
      chosen.push_back(eligible[k]);
    }
  } else {
    chosen = eligible;
  }

  LinearizedTask task;
  task.target_table = target_table;
  task.x = Matrix(n, w, 0.0f);
  task.missing.assign(n * w, 0);
  task.provenance.assign(w, FeaturePath{{}, target_table, -1, Aggregator::identity});
  task.row_ids.resize(n);
  for (std::size_t r = 0; r < n; ++r) task.row_ids[r] = static_cast<std::int64_t>(r);
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    task.provenance[c] = pool.paths[chosen[c]];
    for (std::size_t r = 0; r < n; ++r) {
      task.x(r, c) = pool.values(r, chosen[c]);
      task.missing[r * w + c] = pool.missing[r * pool.paths.size() + chosen[c]];
    }
  }
  // Padding columns stay all-zero and fully masked.
  for (std::size_t c = chosen.size(); c < w; ++c) {
    for (std::size_t r = 0; r < n; ++r) task.missing[r * w + c] = 1;
  }
  return task;
}

LinearizedTask dfs_linearize(const DatabaseInstance& db, std::int32_t target_table,
                             const DfsConfig& cfg, Rng& rng) {
  cfg.validate();
  if (target_table < 0 || static_cast<std::size_t>(target_table) >= db.schema.tables.size()) {
    throw ContractError("target table out of range");
  }
  if (db.tables[target_table].n_rows() == 0) {
    throw GenerationError("cannot linearize an empty target table");
  }
  std::vector<FeaturePath> paths =
      enumerate_paths(db.schema, target_table, cfg.depth, cfg.aggregators);
  const std::size_t budget = static_cast<std::size_t>(cfg.overgen_width());
  if (paths.size() > budget) {
    std::vector<FeaturePath> subset;
    subset.reserve(budget);
    for (std::uint32_t k : rng.sample_without_replacement(
             static_cast<std::uint32_t>(paths.size()), static_cast<std::uint32_t>(budget))) {
      subset.push_back(paths[k]);
    }
    paths.swap(subset);
  }
  EvaluatedPool pool = evaluate_paths(db, target_table, paths);
  return assemble_task(pool, target_table, cfg.standard_width, -1, rng);
}

nlohmann::ordered_json path_to_json(const FeaturePath& path) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json hops = nlohmann::ordered_json::array();
  for (const Hop& h : path.hops) {
    hops.push_back({{"edge", h.edge},
                    {"dir", h.dir == HopDirection::forward_inherit ? "forward" : "backward"}});
  }
  j["hops"] = std::move(hops);
  j["table"] = path.table;
  j["column"] = path.column;
  j["agg"] = aggregator_name(path.agg);
  return j;
}

FeaturePath path_from_json(const nlohmann::json& j) {
  try {
    FeaturePath p;
    for (const auto& hj : j.at("hops")) {
      Hop h;
      h.edge = hj.at("edge").get<std::size_t>();
      std::string dir = hj.at("dir").get<std::string>();
      if (dir == "forward") {
        h.dir = HopDirection::forward_inherit;
      } else if (dir == "backward") {
        h.dir = HopDirection::backward_aggregate;
      } else {
        throw FormatError("unknown hop direction: " + dir);
      }
      p.hops.push_back(h);
    }
    p.table = j.at("table").get<std::int32_t>();
    p.column = j.at("column").get<std::int32_t>();
    p.agg = aggregator_from_name(j.at("agg").get<std::string>());
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed feature path: ") + e.what());
  }
}

}  // namespace relgen
