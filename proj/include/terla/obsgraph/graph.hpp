#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "terla/netsim/types.hpp"
#include "terla/numeric/tensor.hpp"

namespace terla::obsgraph {

enum class NodeType : std::uint8_t { Mission = 0, Subnet = 1, Host = 2 };
inline constexpr std::size_t kNodeTypeCount = 3;

std::string_view to_string(NodeType type);

struct Relation {
  std::string name;
  NodeType src;
  NodeType dst;
  std::size_t reverse;  // index of the relation carrying the opposite direction
};

// Node types, their feature widths, and the directed relations between them.
// Every undirected edge is stored once in each direction.
struct GraphSchema {
  static constexpr std::size_t kMissionWidth = 3;
  static constexpr std::size_t kSubnetWidth = 1;
  static constexpr std::size_t kHostWidth = 2;

  bool subnet_links = true;

  std::size_t feature_width(NodeType type) const;
  std::size_t host_feature_width() const { return kHostWidth; }
  std::vector<Relation> relations() const;

  bool operator==(const GraphSchema&) const = default;
};

nlohmann::json schema_to_json(const GraphSchema& schema);
GraphSchema schema_from_json(const nlohmann::json& j);

struct HeteroGraph {
  GraphSchema schema;
  // One feature matrix per node type, rows are nodes.
  std::array<numeric::Tensor, kNodeTypeCount> features;
  // Directed (src, dst) node pairs per relation, in schema().relations() order.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edges;
  // Host node i came from observation slot host_slot[i].
  std::vector<std::size_t> host_slot;
  std::size_t declared_active_hosts = 0;

  std::size_t node_count(NodeType type) const { return features[static_cast<std::size_t>(type)].rows(); }
  const numeric::Tensor& node_features(NodeType type) const {
    return features[static_cast<std::size_t>(type)];
  }

  bool operator==(const HeteroGraph&) const = default;
};

// Blocked-subnet and communication-policy data are not part of the input and
// never reach the graph. Throws DimensionError when the observation vectors
// disagree with the layout.
HeteroGraph observation_to_graph(const netsim::SegmentObservation& obs,
                                 const netsim::SegmentLayout& layout,
                                 const GraphSchema& schema = {});

struct Violation {
  std::string kind;  // "cardinality", "feature", "symmetry", "connectivity", "count", "range"
  std::string detail;
};

std::vector<Violation> validate(const HeteroGraph& graph);

nlohmann::json graph_to_json(const HeteroGraph& graph);
HeteroGraph graph_from_json(const nlohmann::json& j);

// Disjoint union of several graphs for a single batched encoder pass.
struct GraphBatch {
  HeteroGraph merged;
  std::vector<std::size_t> host_graph;  // graph index of every merged host node
  std::size_t graph_count = 0;
};

GraphBatch make_batch(const std::vector<const HeteroGraph*>& graphs);

}  // namespace terla::obsgraph
