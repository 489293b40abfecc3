#include "terla/obsgraph/graph.hpp"

#include <algorithm>
#include <set>

#include "terla/error.hpp"

namespace terla::obsgraph {

using nlohmann::json;

std::string_view to_string(NodeType type) {
  switch (type) {
    case NodeType::Mission: return "mission";
    case NodeType::Subnet: return "subnet";
    case NodeType::Host: return "host";
  }
  return "?";
}

namespace {

std::size_t index(NodeType t) { return static_cast<std::size_t>(t); }

}  // namespace

std::size_t GraphSchema::feature_width(NodeType type) const {
  switch (type) {
    case NodeType::Mission: return kMissionWidth;
    case NodeType::Subnet: return kSubnetWidth;
    case NodeType::Host: return kHostWidth;
  }
  throw SchemaError("unknown node type");
}

std::vector<Relation> GraphSchema::relations() const {
  std::vector<Relation> rel = {
      {"mission_subnet", NodeType::Mission, NodeType::Subnet, 1},
      {"subnet_mission", NodeType::Subnet, NodeType::Mission, 0},
      {"subnet_host", NodeType::Subnet, NodeType::Host, 3},
      {"host_subnet", NodeType::Host, NodeType::Subnet, 2},
  };
  if (subnet_links) rel.push_back({"subnet_subnet", NodeType::Subnet, NodeType::Subnet, 4});
  return rel;
}

json schema_to_json(const GraphSchema& schema) {
  json rels = json::array();
  for (const auto& r : schema.relations()) {
    rels.push_back(json{{"name", r.name},
                        {"src", std::string(to_string(r.src))},
                        {"dst", std::string(to_string(r.dst))}});
  }
  return json{{"node_types",
               {{"mission", GraphSchema::kMissionWidth},
                {"subnet", GraphSchema::kSubnetWidth},
                {"host", GraphSchema::kHostWidth}}},
              {"subnet_links", schema.subnet_links},
              {"relations", rels}};
}

GraphSchema schema_from_json(const json& j) {
  GraphSchema schema;
  try {
    schema.subnet_links = j.at("subnet_links").get<bool>();
    const auto& nt = j.at("node_types");
    if (nt.at("mission").get<std::size_t>() != GraphSchema::kMissionWidth ||
        nt.at("subnet").get<std::size_t>() != GraphSchema::kSubnetWidth ||
        nt.at("host").get<std::size_t>() != GraphSchema::kHostWidth) {
      throw SchemaError("graph schema feature widths differ from mission:3 subnet:1 host:2");
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed graph schema: ") + e.what());
  }
  return schema;
}

HeteroGraph observation_to_graph(const netsim::SegmentObservation& obs,
                                 const netsim::SegmentLayout& layout, const GraphSchema& schema) {
  const std::size_t slots = layout.slot_count();
  if (obs.subnet_vector.size() != layout.subnet_count()) {
    throw DimensionError("subnet vector has " + std::to_string(obs.subnet_vector.size()) +
                         " entries, layout has " + std::to_string(layout.subnet_count()) + " subnets");
  }
  if (obs.host_malicious_process.size() != slots || obs.host_malicious_network.size() != slots) {
    throw DimensionError("host event vectors do not match the layout's " + std::to_string(slots) +
                         " host slots");
  }
  if (obs.active_host_count != layout.active_count()) {
    throw DimensionError("observation reports " + std::to_string(obs.active_host_count) +
                         " active hosts, layout has " + std::to_string(layout.active_count()));
  }

  HeteroGraph g;
  g.schema = schema;
  const auto relations = schema.relations();
  g.edges.assign(relations.size(), {});

  numeric::Tensor mission(numeric::Shape{1, GraphSchema::kMissionWidth});
  mission[static_cast<std::size_t>(obs.mission_phase)] = 1.0f;

  const std::size_t subnets = layout.subnet_count();
  numeric::Tensor subnet(numeric::Shape{subnets, GraphSchema::kSubnetWidth});
  for (std::size_t s = 0; s < subnets; ++s) {
    subnet[s] = obs.subnet_vector[s] ? 1.0f : 0.0f;
    g.edges[0].emplace_back(0, s);
    g.edges[1].emplace_back(s, 0);
  }

  const auto live = layout.active_slots();
  numeric::Tensor host(numeric::Shape{live.size(), GraphSchema::kHostWidth});
  for (std::size_t i = 0; i < live.size(); ++i) {
    const std::size_t slot = live[i];
    host(i, 0) = obs.host_malicious_process[slot] ? 1.0f : 0.0f;
    host(i, 1) = obs.host_malicious_network[slot] ? 1.0f : 0.0f;
    const std::size_t s = layout.subnet_of(slot);
    g.edges[2].emplace_back(s, i);
    g.edges[3].emplace_back(i, s);
    g.host_slot.push_back(slot);
  }

  if (schema.subnet_links) {
    for (std::size_t a = 0; a < subnets; ++a)
      for (std::size_t b = 0; b < subnets; ++b)
        if (a != b) g.edges[4].emplace_back(a, b);
  }

  g.features = {std::move(mission), std::move(subnet), std::move(host)};
  g.declared_active_hosts = obs.active_host_count;
  return g;
}

std::vector<Violation> validate(const HeteroGraph& g) {
  std::vector<Violation> out;
  auto report = [&](std::string kind, std::string detail) {
    out.push_back({std::move(kind), std::move(detail)});
  };

  for (std::size_t t = 0; t < kNodeTypeCount; ++t) {
    const auto type = static_cast<NodeType>(t);
    const auto& f = g.features[t];
    if (f.rank() != 2 || f.cols() != g.schema.feature_width(type)) {
      report("feature", std::string(to_string(type)) + " features have shape " +
                            numeric::shape_str(f.shape()));
    }
  }

  const std::size_t missions = g.node_count(NodeType::Mission);
  if (missions != 1) report("cardinality", "expected 1 mission node, found " + std::to_string(missions));
  for (std::size_t m = 0; m < missions && g.features[0].cols() == GraphSchema::kMissionWidth; ++m) {
    float total = 0.0f;
    for (std::size_t c = 0; c < GraphSchema::kMissionWidth; ++c) total += g.features[0](m, c);
    if (total != 1.0f) report("feature", "mission one-hot sums to " + std::to_string(total));
  }

  const auto relations = g.schema.relations();
  if (g.edges.size() != relations.size()) {
    report("schema", "graph has " + std::to_string(g.edges.size()) + " edge sets, schema has " +
                         std::to_string(relations.size()));
    return out;
  }

  std::vector<std::set<std::pair<std::size_t, std::size_t>>> sets(relations.size());
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const std::size_t ns = g.node_count(relations[r].src), nd = g.node_count(relations[r].dst);
    for (const auto& [u, v] : g.edges[r]) {
      if (u >= ns || v >= nd) {
        report("range", relations[r].name + " edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ") references a missing node");
      }
      sets[r].insert({u, v});
    }
  }
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const auto& rev = sets[relations[r].reverse];
    for (const auto& [u, v] : g.edges[r]) {
      if (!rev.count({v, u})) {
        report("symmetry", relations[r].name + " edge (" + std::to_string(u) + "," +
                               std::to_string(v) + ") has no reverse in " +
                               relations[relations[r].reverse].name);
      }
    }
  }

  const std::size_t hosts = g.node_count(NodeType::Host);
  const std::size_t subnets = g.node_count(NodeType::Subnet);
  std::vector<std::size_t> host_links(hosts, 0);
  for (const auto& [h, s] : g.edges[3])
    if (h < hosts) ++host_links[h];
  for (std::size_t h = 0; h < hosts; ++h) {
    if (host_links[h] != 1) {
      report("connectivity", "host node " + std::to_string(h) + " links to " +
                                 std::to_string(host_links[h]) + " subnets");
    }
  }
  std::vector<std::uint8_t> subnet_to_mission(subnets, 0);
  for (const auto& [s, m] : g.edges[1])
    if (s < subnets) subnet_to_mission[s] = 1;
  for (std::size_t s = 0; s < subnets; ++s) {
    if (!subnet_to_mission[s]) report("connectivity", "subnet node " + std::to_string(s) + " has no mission link");
  }

  if (hosts != g.declared_active_hosts) {
    report("count", std::to_string(hosts) + " host nodes for " +
                        std::to_string(g.declared_active_hosts) + " active hosts");
  }
  if (g.host_slot.size() != hosts) report("count", "host slot map does not cover every host node");
  return out;
}

json graph_to_json(const HeteroGraph& g) {
  json nodes;
  for (std::size_t t = 0; t < kNodeTypeCount; ++t) {
    const auto& f = g.features[t];
    json rows = json::array();
    for (std::size_t r = 0; r < f.rows(); ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < f.cols(); ++c) row.push_back(f(r, c));
      rows.push_back(std::move(row));
    }
    nodes[std::string(to_string(static_cast<NodeType>(t)))] = std::move(rows);
  }
  json edges;
  const auto relations = g.schema.relations();
  for (std::size_t r = 0; r < relations.size() && r < g.edges.size(); ++r) {
    json list = json::array();
    for (const auto& [u, v] : g.edges[r]) list.push_back(json::array({u, v}));
    edges[relations[r].name] = std::move(list);
  }
  return json{{"schema", schema_to_json(g.schema)},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"host_slot", g.host_slot},
              {"declared_active_hosts", g.declared_active_hosts}};
}

HeteroGraph graph_from_json(const json& j) {
  HeteroGraph g;
  try {
    g.schema = schema_from_json(j.at("schema"));
    for (std::size_t t = 0; t < kNodeTypeCount; ++t) {
      const auto type = static_cast<NodeType>(t);
      const auto& rows = j.at("nodes").at(std::string(to_string(type)));
      const std::size_t w = g.schema.feature_width(type);
      std::vector<float> data;
      for (const auto& row : rows) {
        if (row.size() != w) throw SchemaError(std::string(to_string(type)) + " row width mismatch");
        for (const auto& v : row) data.push_back(v.get<float>());
      }
      g.features[t] = numeric::Tensor(numeric::Shape{rows.size(), w}, std::move(data));
    }
    const auto relations = g.schema.relations();
    g.edges.assign(relations.size(), {});
    for (std::size_t r = 0; r < relations.size(); ++r) {
      if (!j.at("edges").contains(relations[r].name)) continue;
      for (const auto& e : j.at("edges").at(relations[r].name)) {
        g.edges[r].emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
      }
    }
    g.host_slot = j.at("host_slot").get<std::vector<std::size_t>>();
    g.declared_active_hosts = j.at("declared_active_hosts").get<std::size_t>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed graph dump: ") + e.what());
  }
  return g;
}

GraphBatch make_batch(const std::vector<const HeteroGraph*>& graphs) {
  if (graphs.empty()) throw DimensionError("cannot batch zero graphs");
  GraphBatch batch;
  batch.graph_count = graphs.size();
  auto& m = batch.merged;
  m.schema = graphs.front()->schema;
  const std::size_t nrel = m.schema.relations().size();
  m.edges.assign(nrel, {});

  std::array<std::size_t, kNodeTypeCount> rows{};
  for (const auto* g : graphs) {
    if (!(g->schema == m.schema)) throw SchemaError("cannot batch graphs with different schemas");
    for (std::size_t t = 0; t < kNodeTypeCount; ++t) rows[t] += g->features[t].rows();
  }
  for (std::size_t t = 0; t < kNodeTypeCount; ++t) {
    m.features[t] = numeric::Tensor(
        numeric::Shape{rows[t], m.schema.feature_width(static_cast<NodeType>(t))});
  }

  const auto relations = m.schema.relations();
  std::array<std::size_t, kNodeTypeCount> offset{};
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = *graphs[gi];
    for (std::size_t t = 0; t < kNodeTypeCount; ++t) {
      const auto& src = g.features[t].data();
      const std::size_t w = m.features[t].cols();
      std::copy(src.begin(), src.end(), m.features[t].data().begin() + offset[t] * w);
    }
    for (std::size_t r = 0; r < nrel; ++r) {
      const std::size_t os = offset[index(relations[r].src)], od = offset[index(relations[r].dst)];
      for (const auto& [u, v] : g.edges[r]) m.edges[r].emplace_back(u + os, v + od);
    }
    for (std::size_t h = 0; h < g.node_count(NodeType::Host); ++h) {
      batch.host_graph.push_back(gi);
      m.host_slot.push_back(g.host_slot[h]);
    }
    m.declared_active_hosts += g.declared_active_hosts;
    for (std::size_t t = 0; t < kNodeTypeCount; ++t) offset[t] += g.features[t].rows();
  }
  return batch;
}

}  // namespace terla::obsgraph
