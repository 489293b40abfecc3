#pragma once

#include <random>
#include <string>
#include <vector>

#include "terla/encoder/hgt.hpp"

namespace terla::encoder {

struct EncoderOptions {
  std::size_t hidden = 70;
  HgtOptions hgt;
};

// Two HGT layers, sum pooling over host nodes, then layer normalisation.
// The embedding width depends on the schema only, never on the graph size.
template <typename T>
class Encoder {
 public:
  Encoder(ParameterStore<T>& store, const obsgraph::GraphSchema& schema, const EncoderOptions& options,
          std::mt19937_64& rng, const std::string& prefix = "encoder")
      : schema_(schema),
        options_(options),
        first_(store, prefix + ".hgt0", schema,
               {schema.feature_width(NodeType::Mission), schema.feature_width(NodeType::Subnet),
                schema.feature_width(NodeType::Host)},
               options.hidden, options.hgt, rng),
        second_(store, prefix + ".hgt1", schema, {options.hidden, options.hidden, options.hidden},
                options.hidden, options.hgt, rng),
        gamma_(&store.add(prefix + ".norm.gamma", BasicTensor<T>(numeric::Shape{options.hidden}, T{1}))),
        beta_(&store.add(prefix + ".norm.beta", BasicTensor<T>(numeric::Shape{options.hidden}))) {}

  std::size_t width() const { return options_.hidden; }
  const obsgraph::GraphSchema& schema() const { return schema_; }

  NodeFeatures<T> node_outputs(Tape<T>& tape, const HeteroGraph& graph,
                               std::vector<AttentionTrace<T>>* traces = nullptr) const {
    NodeFeatures<T> x;
    for (std::size_t t = 0; t < obsgraph::kNodeTypeCount; ++t) {
      x[t] = tape.constant(graph.features[t].template cast<T>());
    }
    AttentionTrace<T> a, b;
    auto h = first_(tape, graph, x, traces ? &a : nullptr);
    h = second_(tape, graph, h, traces ? &b : nullptr);
    if (traces) {
      traces->push_back(std::move(a));
      traces->push_back(std::move(b));
    }
    return h;
  }

  // Pooled host sum before normalisation, one row per graph in the batch.
  Var<T> pooled(Tape<T>& tape, const obsgraph::GraphBatch& batch) const {
    if (batch.merged.node_count(NodeType::Host) == 0) {
      throw SchemaError("cannot encode a graph without host nodes");
    }
    std::vector<std::size_t> per_graph(batch.graph_count, 0);
    for (std::size_t g : batch.host_graph) ++per_graph[g];
    for (std::size_t n : per_graph) {
      if (n == 0) throw SchemaError("cannot encode a graph without host nodes");
    }
    const auto h = node_outputs(tape, batch.merged);
    return numeric::scatter_add_rows(h[static_cast<std::size_t>(NodeType::Host)], batch.host_graph,
                                     batch.graph_count);
  }

  Var<T> normalise(Tape<T>& tape, const Var<T>& pooled_sum) const {
    return numeric::layer_norm(pooled_sum, tape.parameter(*gamma_), tape.parameter(*beta_));
  }

  // [graphs, width] embeddings for a batch.
  Var<T> encode(Tape<T>& tape, const obsgraph::GraphBatch& batch) const {
    return normalise(tape, pooled(tape, batch));
  }

  // [1, width] embedding of one graph.
  Var<T> encode(Tape<T>& tape, const HeteroGraph& graph) const {
    return encode(tape, obsgraph::make_batch({&graph}));
  }

 private:
  obsgraph::GraphSchema schema_;
  EncoderOptions options_;
  HgtLayer<T> first_;
  HgtLayer<T> second_;
  BasicParameter<T>* gamma_;
  BasicParameter<T>* beta_;
};

}  // namespace terla::encoder
