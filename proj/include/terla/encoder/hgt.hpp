#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "terla/error.hpp"
#include "terla/numeric/parameters.hpp"
#include "terla/obsgraph/graph.hpp"

namespace terla::encoder {

using numeric::BasicParameter;
using numeric::BasicTensor;
using numeric::Linear;
using numeric::ParameterStore;
using numeric::Tape;
using numeric::Var;
using obsgraph::HeteroGraph;
using obsgraph::NodeType;

// Encoder width from the graph schema: (host features + TERLA actions) * 10.
inline std::size_t encoder_hidden_size(const obsgraph::GraphSchema& schema,
                                       std::size_t terla_action_count) {
  return (schema.host_feature_width() + terla_action_count) * 10;
}

struct HgtOptions {
  std::size_t heads = 2;
  bool residual = true;        // add the layer input when widths agree
  bool relation_prior = true;  // learned per-relation, per-head attention scale
};

template <typename T>
using NodeFeatures = std::array<Var<T>, obsgraph::kNodeTypeCount>;

// Attention coefficients of one layer pass, one row per (relation, edge)
// including self-loops, one column per head; dst_group is the global target id.
template <typename T>
struct AttentionTrace {
  BasicTensor<T> weights;
  std::vector<std::size_t> dst_group;
  std::size_t groups = 0;
};

// One heterogeneous graph transformer layer. Every node type has its own
// query/key/value/output projections; every relation (plus an implicit
// self-loop per node type) has per-head attention and message matrices.
// Attention for a target node is normalised jointly over all incoming
// edges of all relations.
template <typename T>
class HgtLayer {
 public:
  HgtLayer(ParameterStore<T>& store, const std::string& prefix, const obsgraph::GraphSchema& schema,
           std::array<std::size_t, obsgraph::kNodeTypeCount> in_widths, std::size_t out_width,
           const HgtOptions& options, std::mt19937_64& rng)
      : schema_(schema), in_widths_(in_widths), out_(out_width), options_(options) {
    if (options_.heads == 0 || out_width % options_.heads != 0) {
      throw SchemaError("hidden width " + std::to_string(out_width) + " is not divisible by " +
                        std::to_string(options_.heads) + " heads");
    }
    head_dim_ = out_width / options_.heads;
    for (std::size_t t = 0; t < obsgraph::kNodeTypeCount; ++t) {
      const std::string tn = prefix + "." + std::string(obsgraph::to_string(static_cast<NodeType>(t)));
      auto& tp = types_[t];
      tp.query = Linear<T>(store, tn + ".query", in_widths[t], out_width, rng);
      tp.key = Linear<T>(store, tn + ".key", in_widths[t], out_width, rng);
      tp.value = Linear<T>(store, tn + ".value", in_widths[t], out_width, rng);
      tp.out = Linear<T>(store, tn + ".out", out_width, out_width, rng);
    }
    for (const auto& r : schema.relations()) relations_.push_back({r.name, r.src, r.dst, false, {}, {}, nullptr});
    for (std::size_t t = 0; t < obsgraph::kNodeTypeCount; ++t) {
      const auto type = static_cast<NodeType>(t);
      relations_.push_back({"self_" + std::string(obsgraph::to_string(type)), type, type, true, {}, {}, nullptr});
    }
    for (auto& rel : relations_) {
      const std::string rn = prefix + "." + rel.name;
      for (std::size_t h = 0; h < options_.heads; ++h) {
        rel.attention.push_back(&store.add(rn + ".att.h" + std::to_string(h),
                                           numeric::xavier_uniform<T>(head_dim_, head_dim_, rng)));
        rel.message.push_back(&store.add(rn + ".msg.h" + std::to_string(h),
                                         numeric::xavier_uniform<T>(head_dim_, head_dim_, rng)));
      }
      if (options_.relation_prior) {
        rel.prior = &store.add(rn + ".prior", BasicTensor<T>(numeric::Shape{1, options_.heads}, T{1}));
      }
    }
  }

  std::size_t out_width() const { return out_; }

  NodeFeatures<T> operator()(Tape<T>& tape, const HeteroGraph& graph, const NodeFeatures<T>& x,
                             AttentionTrace<T>* trace = nullptr) const {
    using numeric::concat_cols;
    using numeric::gather_rows;
    using numeric::matmul;
    using numeric::mul;
    using numeric::mul_col;
    using numeric::row_sum;
    using numeric::slice_cols;

    if (graph.edges.size() != schema_.relations().size() || !(graph.schema == schema_)) {
      throw SchemaError("graph schema does not match the encoder schema");
    }
    std::array<std::size_t, obsgraph::kNodeTypeCount> count{}, offset{};
    std::size_t total = 0;
    for (std::size_t t = 0; t < obsgraph::kNodeTypeCount; ++t) {
      count[t] = x[t].rows();
      if (count[t] == 0) throw SchemaError("graph has no " + std::string(obsgraph::to_string(static_cast<NodeType>(t))) + " nodes");
      if (x[t].cols() != in_widths_[t]) {
        throw DimensionError("layer input for " + std::string(obsgraph::to_string(static_cast<NodeType>(t))) +
                             " has width " + std::to_string(x[t].cols()) + ", expected " +
                             std::to_string(in_widths_[t]));
      }
      offset[t] = total;
      total += count[t];
    }

    NodeFeatures<T> q, k, v;
    for (std::size_t t = 0; t < obsgraph::kNodeTypeCount; ++t) {
      q[t] = types_[t].query(tape, x[t]);
      k[t] = types_[t].key(tape, x[t]);
      v[t] = types_[t].value(tape, x[t]);
    }

    const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(head_dim_));
    struct EdgeBlock {
      std::vector<std::size_t> dst;
      std::vector<Var<T>> messages;  // per head, [E, head_dim]
      std::size_t begin = 0, end = 0;
      std::size_t dst_type = 0;
    };
    std::vector<EdgeBlock> blocks;
    std::vector<Var<T>> score_parts;
    std::vector<std::size_t> groups;
    std::size_t rows = 0;

    for (std::size_t r = 0; r < relations_.size(); ++r) {
      const auto& rel = relations_[r];
      const std::size_t st = static_cast<std::size_t>(rel.src), dt = static_cast<std::size_t>(rel.dst);
      std::vector<std::size_t> src, dst;
      if (rel.self) {
        for (std::size_t i = 0; i < count[st]; ++i) {
          src.push_back(i);
          dst.push_back(i);
        }
      } else {
        for (const auto& [u, w] : graph.edges[r]) {
          src.push_back(u);
          dst.push_back(w);
        }
      }
      if (src.empty()) continue;

      const Var<T> ks = gather_rows(k[st], src);
      const Var<T> qd = gather_rows(q[dt], dst);
      const Var<T> vs = gather_rows(v[st], src);
      std::vector<Var<T>> head_scores;
      EdgeBlock block;
      for (std::size_t h = 0; h < options_.heads; ++h) {
        const std::size_t b = h * head_dim_, e = b + head_dim_;
        const Var<T> kw = matmul(slice_cols(ks, b, e), tape.parameter(*rel.attention[h]));
        Var<T> score = numeric::scale(row_sum(mul(kw, slice_cols(qd, b, e))), inv_sqrt);
        if (rel.prior) score = matmul(score, slice_cols(tape.parameter(*rel.prior), h, h + 1));
        head_scores.push_back(score);
        block.messages.push_back(matmul(slice_cols(vs, b, e), tape.parameter(*rel.message[h])));
      }
      score_parts.push_back(head_scores.size() == 1 ? head_scores.front() : concat_cols(head_scores));
      for (std::size_t d : dst) groups.push_back(offset[dt] + d);
      block.begin = rows;
      rows += dst.size();
      block.end = rows;
      block.dst = std::move(dst);
      block.dst_type = dt;
      blocks.push_back(std::move(block));
    }

    const Var<T> scores = score_parts.size() == 1 ? score_parts.front() : numeric::concat_rows(score_parts);
    const Var<T> attention = numeric::segment_softmax(scores, groups, total);
    if (trace) {
      trace->weights = attention.value();
      trace->dst_group = groups;
      trace->groups = total;
    }

    std::array<std::optional<Var<T>>, obsgraph::kNodeTypeCount> aggregate;
    for (const auto& block : blocks) {
      const Var<T> att = numeric::slice_rows(attention, block.begin, block.end);
      std::vector<Var<T>> weighted;
      for (std::size_t h = 0; h < options_.heads; ++h) {
        weighted.push_back(mul_col(block.messages[h], slice_cols(att, h, h + 1)));
      }
      const Var<T> msg = weighted.size() == 1 ? weighted.front() : concat_cols(weighted);
      const Var<T> summed = numeric::scatter_add_rows(msg, block.dst, count[block.dst_type]);
      auto& slot = aggregate[block.dst_type];
      slot = slot ? numeric::add(*slot, summed) : summed;
    }

    NodeFeatures<T> out;
    for (std::size_t t = 0; t < obsgraph::kNodeTypeCount; ++t) {
      Var<T> y = types_[t].out(tape, *aggregate[t]);
      if (options_.residual && in_widths_[t] == out_) y = numeric::add(y, x[t]);
      out[t] = numeric::relu(y);
    }
    return out;
  }

 private:
  struct TypeParams {
    Linear<T> query, key, value, out;
  };
  struct RelationParams {
    std::string name;
    NodeType src, dst;
    bool self;
    std::vector<BasicParameter<T>*> attention;
    std::vector<BasicParameter<T>*> message;
    BasicParameter<T>* prior;
  };

  obsgraph::GraphSchema schema_;
  std::array<std::size_t, obsgraph::kNodeTypeCount> in_widths_;
  std::size_t out_;
  std::size_t head_dim_ = 0;
  HgtOptions options_;
  std::array<TypeParams, obsgraph::kNodeTypeCount> types_;
  std::vector<RelationParams> relations_;
};

}  // namespace terla::encoder
