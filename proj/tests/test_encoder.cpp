#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "terla/encoder/encoder.hpp"
#include "terla/error.hpp"
#include "terla/netsim/simulator.hpp"
#include "test_util.hpp"

namespace terla::encoder {
namespace {

using netsim::SegmentLayout;
using obsgraph::GraphSchema;

constexpr std::size_t kActions = 5;

HeteroGraph random_graph(const SegmentLayout& layout, std::mt19937_64& rng, const GraphSchema& schema = {}) {
  std::bernoulli_distribution coin(0.4);
  netsim::SegmentObservation obs;
  obs.mission_phase = static_cast<netsim::MissionPhase>(rng() % 3);
  obs.subnet_vector.assign(layout.subnet_count(), 1);
  for (std::size_t i = 0; i < layout.slot_count(); ++i) {
    obs.host_malicious_process.push_back(coin(rng) ? 1 : 0);
    obs.host_malicious_network.push_back(coin(rng) ? 1 : 0);
  }
  obs.active_host_count = layout.active_count();
  return obsgraph::observation_to_graph(obs, layout, schema);
}

// Same graph with host node ids relabelled by perm (new id = perm[old id]).
HeteroGraph permute_hosts(const HeteroGraph& g, const std::vector<std::size_t>& perm) {
  HeteroGraph p = g;
  const std::size_t host = static_cast<std::size_t>(NodeType::Host);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t c = 0; c < g.features[host].cols(); ++c) p.features[host](perm[i], c) = g.features[host](i, c);
    p.host_slot[perm[i]] = g.host_slot[i];
  }
  const auto rel = g.schema.relations();
  for (std::size_t r = 0; r < rel.size(); ++r) {
    for (auto& [s, d] : p.edges[r]) {
      if (rel[r].src == NodeType::Host) s = perm[s];
      if (rel[r].dst == NodeType::Host) d = perm[d];
    }
  }
  return p;
}

template <typename T>
numeric::BasicTensor<T> embed(const Encoder<T>& enc, const HeteroGraph& g) {
  Tape<T> tape(false);
  return enc.encode(tape, g).value();
}

TEST(EncoderWidth, FollowsSchemaAndActionCount) {
  GraphSchema schema;
  EXPECT_EQ(encoder_hidden_size(schema, kActions), 70u);
  EXPECT_EQ(encoder_hidden_size(schema, 0), 20u);
  EXPECT_EQ(encoder_hidden_size(schema, 12), 140u);
}

TEST(EncoderWidth, IndependentOfGraphSize) {
  std::mt19937_64 rng(1);
  ParameterStore<float> store;
  Encoder<float> enc(store, GraphSchema{}, {}, rng);
  const auto small = random_graph(SegmentLayout{{4}, {4}}, rng);
  const auto big = random_graph(SegmentLayout{{16, 16, 16}, {16, 16, 16}}, rng);
  ASSERT_EQ(big.node_count(NodeType::Host), 48u);
  EXPECT_EQ(embed(enc, small).shape(), (numeric::Shape{1, 70}));
  EXPECT_EQ(embed(enc, big).shape(), (numeric::Shape{1, 70}));
}

TEST(Encoder, InvariantToHostOrdering) {
  std::mt19937_64 rng(2);
  ParameterStore<double> store;
  Encoder<double> enc(store, GraphSchema{}, {}, rng);
  const auto g = random_graph(SegmentLayout{{6, 5}, {5, 4}}, rng);
  std::vector<std::size_t> perm(g.node_count(NodeType::Host));
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = embed(enc, g), b = embed(enc, permute_hosts(g, perm));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
  }
}

TEST(Encoder, AttentionIsNormalisedPerTargetAndHead) {
  std::mt19937_64 rng(3);
  ParameterStore<double> store;
  Encoder<double> enc(store, GraphSchema{}, {}, rng);
  const auto g = random_graph(SegmentLayout{{4, 4}, {3, 4}}, rng);
  Tape<double> tape(false);
  std::vector<AttentionTrace<double>> traces;
  enc.node_outputs(tape, g, &traces);
  ASSERT_EQ(traces.size(), 2u);
  for (const auto& tr : traces) {
    ASSERT_EQ(tr.weights.cols(), 2u);
    std::vector<std::array<double, 2>> total(tr.groups, {0.0, 0.0});
    for (std::size_t e = 0; e < tr.dst_group.size(); ++e)
      for (std::size_t h = 0; h < 2; ++h) {
        EXPECT_GE(tr.weights(e, h), 0.0);
        total[tr.dst_group[e]][h] += tr.weights(e, h);
      }
    for (const auto& t : total) {
      EXPECT_NEAR(t[0], 1.0, 1e-12);
      EXPECT_NEAR(t[1], 1.0, 1e-12);
    }
  }
}

TEST(Encoder, HostWithoutEdgesStillEncodes) {
  std::mt19937_64 rng(4);
  ParameterStore<double> store;
  Encoder<double> enc(store, GraphSchema{}, {}, rng);
  auto g = random_graph(SegmentLayout{{4}, {4}}, rng);
  for (auto& rel : g.edges) {
    rel.erase(std::remove_if(rel.begin(), rel.end(),
                             [](const auto& e) { return e.first == 3 || e.second == 3; }),
              rel.end());
  }
  Tape<double> tape(false);
  const auto h = enc.node_outputs(tape, g)[static_cast<std::size_t>(NodeType::Host)].value();
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_TRUE(std::isfinite(h[i]));
  for (std::size_t i = 0; i < 70; ++i) EXPECT_TRUE(std::isfinite(embed(enc, g)[i]));
}

TEST(Encoder, BatchRowsMatchSingleGraphs) {
  std::mt19937_64 rng(5);
  ParameterStore<double> store;
  Encoder<double> enc(store, GraphSchema{}, {}, rng);
  const auto a = random_graph(SegmentLayout{{4}, {4}}, rng);
  const auto b = random_graph(SegmentLayout{{8, 8}, {5, 7}}, rng);
  Tape<double> tape(false);
  const auto both = enc.encode(tape, obsgraph::make_batch({&a, &b})).value();
  const auto ea = embed(enc, a), eb = embed(enc, b);
  for (std::size_t c = 0; c < 70; ++c) {
    EXPECT_NEAR(both(0, c), ea(0, c), 1e-10);
    EXPECT_NEAR(both(1, c), eb(0, c), 1e-10);
  }
}

TEST(Encoder, ZeroInputsAndBiasesGiveZeroPooledSum) {
  std::mt19937_64 rng(6);
  ParameterStore<double> store;
  Encoder<double> enc(store, GraphSchema{}, {}, rng);
  for (auto* p : store.list())
    if (p->name().ends_with(".bias")) p->value().fill(0.0);
  auto g = random_graph(SegmentLayout{{4, 4}, {4, 4}}, rng);
  for (auto& f : g.features) f.fill(0.0f);
  Tape<double> tape(false);
  const auto s = enc.pooled(tape, obsgraph::make_batch({&g})).value();
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], 0.0);
}

TEST(Encoder, RejectsGraphWithoutHosts) {
  std::mt19937_64 rng(7);
  ParameterStore<float> store;
  Encoder<float> enc(store, GraphSchema{}, {}, rng);
  auto g = random_graph(SegmentLayout{{4}, {4}}, rng);
  g.features[static_cast<std::size_t>(NodeType::Host)] = numeric::Tensor(numeric::Shape{0, 2});
  g.host_slot.clear();
  for (auto& rel : g.edges) rel.clear();
  Tape<float> tape(false);
  EXPECT_THROW(enc.encode(tape, g), SchemaError);
}

TEST(Encoder, RejectsForeignSchema) {
  std::mt19937_64 rng(8);
  ParameterStore<float> store;
  Encoder<float> enc(store, GraphSchema{}, {}, rng);
  GraphSchema off;
  off.subnet_links = false;
  const auto g = random_graph(SegmentLayout{{4}, {4}}, rng, off);
  Tape<float> tape(false);
  EXPECT_THROW(enc.encode(tape, g), SchemaError);
}

TEST(HgtLayer, RejectsIndivisibleHeads) {
  std::mt19937_64 rng(9);
  ParameterStore<float> store;
  HgtOptions opt;
  opt.heads = 3;
  EXPECT_THROW(Encoder<float>(store, GraphSchema{}, {70, opt}, rng), SchemaError);
}

TEST(Encoder, OptionsChangeParameterSet) {
  std::mt19937_64 rng(10);
  ParameterStore<float> with, without;
  Encoder<float> a(with, GraphSchema{}, {}, rng);
  HgtOptions opt;
  opt.relation_prior = false;
  Encoder<float> b(without, GraphSchema{}, {70, opt}, rng);
  // Two layers, 5 schema relations + 3 self relations, one [1,2] prior each.
  EXPECT_EQ(with.scalar_count() - without.scalar_count(), 2u * 8u * 2u);
}

// Parameter gradients of a scalar readout of the embedding against central
// differences, on a sample of entries from every parameter tensor.
TEST(Encoder, ParameterGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  ParameterStore<double> store;
  Encoder<double> enc(store, GraphSchema{}, {}, rng);
  for (auto* p : store.list()) {
    for (auto& x : p->value().storage()) x += std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
  }
  const auto a = random_graph(SegmentLayout{{4, 3}, {4, 2}}, rng);
  const auto b = random_graph(SegmentLayout{{4}, {3}}, rng);
  const auto batch = obsgraph::make_batch({&a, &b});
  const auto readout = testing::random_tensor(numeric::Shape{2, 70}, rng);

  auto loss = [&](Tape<double>& tape) {
    return numeric::sum(numeric::mul(enc.encode(tape, batch), tape.constant(readout)));
  };
  store.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  const double h = 1e-6;
  double diff = 0.0, scale = 0.0;
  for (auto* p : store.list()) {
    auto& v = p->value();
    for (int k = 0; k < 3; ++k) {
      const std::size_t i = rng() % v.size();
      const double keep = v[i];
      v[i] = keep + h;
      Tape<double> t1(false);
      const double up = loss(t1).value().item();
      v[i] = keep - h;
      Tape<double> t2(false);
      const double down = loss(t2).value().item();
      v[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad()[i];
      diff += (numeric - analytic) * (numeric - analytic);
      scale += std::max(numeric * numeric, analytic * analytic);
    }
  }
  ASSERT_GT(scale, 0.0);
  EXPECT_LT(std::sqrt(diff / scale), 1e-5);
}

TEST(Encoder, SameSeedSameEmbedding) {
  std::mt19937_64 r1(12), r2(12), g(13);
  ParameterStore<float> s1, s2;
  Encoder<float> e1(s1, GraphSchema{}, {}, r1), e2(s2, GraphSchema{}, {}, r2);
  const auto graph = random_graph(SegmentLayout{{4, 4}, {4, 4}}, g);
  EXPECT_EQ(embed(e1, graph), embed(e2, graph));
}

}  // namespace
}  // namespace terla::encoder
