#include "terla/harness/policies.hpp"

#include "terla/error.hpp"
#include "terla/netsim/flat.hpp"
#include "terla/random.hpp"
#include "terla/wrapper/wrapper.hpp"

namespace terla::harness {

namespace {

class SleepPolicy final : public SegmentPolicy {
 public:
  netsim::EnvAction act(const netsim::SegmentObservation&, const netsim::SegmentLayout&, std::mt19937_64&) override {
    return netsim::EnvAction::sleep();
  }
};

class RandomPolicy final : public SegmentPolicy {
 public:
  netsim::EnvAction act(const netsim::SegmentObservation&, const netsim::SegmentLayout& layout,
                        std::mt19937_64& rng) override {
    return netsim::decode_flat_action(uniform_index(rng, netsim::flat_action_count(layout)), layout);
  }
};

class TerlaPolicy final : public SegmentPolicy {
 public:
  TerlaPolicy(std::shared_ptr<const TerlaNet> net, obsgraph::GraphSchema schema)
      : net_(std::move(net)), schema_(schema) {}

  netsim::EnvAction act(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout,
                        std::mt19937_64&) override {
    const auto graph = obsgraph::observation_to_graph(obs, layout, schema_);
    numeric::Tape<float> tape(false);
    const auto out = net_->forward(tape, {&graph});
    const auto a = wrapper::terla_action(policy::greedy_action(out.logits.value()));
    return wrapper::target_action(a, obs, layout);
  }
  bool waits() const override { return true; }

 private:
  std::shared_ptr<const TerlaNet> net_;
  obsgraph::GraphSchema schema_;
};

class FlatPolicy final : public SegmentPolicy {
 public:
  FlatPolicy(std::shared_ptr<const FlatNet> net, bool waits) : net_(std::move(net)), waits_(waits) {}

  netsim::EnvAction act(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout,
                        std::mt19937_64&) override {
    if (netsim::flat_action_count(layout) != net_->action_count()) {
      throw SchemaError("flat policy has " + std::to_string(net_->action_count()) + " actions, segment needs " +
                        std::to_string(netsim::flat_action_count(layout)));
    }
    const auto x = netsim::flat_observation(obs);
    numeric::Tape<float> tape(false);
    const auto out = net_->forward(tape, {&x});
    return netsim::decode_flat_action(policy::greedy_action(out.logits.value()), layout);
  }
  bool waits() const override { return waits_; }

 private:
  std::shared_ptr<const FlatNet> net_;
  bool waits_;
};

const nlohmann::json& network_of(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("network")) throw CheckpointError("checkpoint metadata lacks a network description");
  return ckpt.metadata.at("network");
}

}  // namespace

std::unique_ptr<SegmentPolicy> make_sleep_policy() { return std::make_unique<SleepPolicy>(); }
std::unique_ptr<SegmentPolicy> make_random_policy() { return std::make_unique<RandomPolicy>(); }

std::unique_ptr<SegmentPolicy> make_terla_policy(std::shared_ptr<const TerlaNet> net, obsgraph::GraphSchema schema) {
  return std::make_unique<TerlaPolicy>(std::move(net), schema);
}

std::unique_ptr<SegmentPolicy> make_flat_policy(std::shared_ptr<const FlatNet> net, bool waits) {
  return std::make_unique<FlatPolicy>(std::move(net), waits);
}

nlohmann::json terla_network_spec(const obsgraph::GraphSchema& schema, const encoder::HgtOptions& hgt,
                                  std::size_t actions) {
  return {{"type", "terla"},
          {"schema", obsgraph::schema_to_json(schema)},
          {"actions", actions},
          {"hgt", {{"heads", hgt.heads}, {"residual", hgt.residual}, {"relation_prior", hgt.relation_prior}}}};
}

nlohmann::json flat_network_spec(std::size_t input_width, const std::vector<std::size_t>& hidden,
                                 std::size_t actions) {
  return {{"type", "flat"}, {"input_width", input_width}, {"hidden", hidden}, {"actions", actions}};
}

std::shared_ptr<TerlaNet> terla_network_from_checkpoint(const Checkpoint& ckpt) {
  const auto& n = network_of(ckpt);
  if (n.value("type", "") != "terla") throw SchemaError("checkpoint does not hold a TERLA network");
  try {
    const auto schema = obsgraph::schema_from_json(n.at("schema"));
    encoder::HgtOptions hgt;
    hgt.heads = n.at("hgt").at("heads").get<std::size_t>();
    hgt.residual = n.at("hgt").at("residual").get<bool>();
    hgt.relation_prior = n.at("hgt").at("relation_prior").get<bool>();
    std::mt19937_64 rng(0);
    auto net = std::make_shared<TerlaNet>(schema, n.at("actions").get<std::size_t>(), rng, hgt);
    restore_parameters(net->parameters(), ckpt.tensors);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad TERLA network description: ") + e.what());
  }
}

std::shared_ptr<FlatNet> flat_network_from_checkpoint(const Checkpoint& ckpt) {
  const auto& n = network_of(ckpt);
  if (n.value("type", "") != "flat") throw SchemaError("checkpoint does not hold a flat PPO network");
  try {
    std::mt19937_64 rng(0);
    auto net = std::make_shared<FlatNet>(n.at("input_width").get<std::size_t>(),
                                         n.at("hidden").get<std::vector<std::size_t>>(),
                                         n.at("actions").get<std::size_t>(), rng);
    restore_parameters(net->parameters(), ckpt.tensors);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad flat network description: ") + e.what());
  }
}

std::unique_ptr<SegmentPolicy> policy_from_checkpoint(const Checkpoint& ckpt) {
  const auto& n = network_of(ckpt);
  if (n.value("type", "") == "terla") {
    auto net = terla_network_from_checkpoint(ckpt);
    return make_terla_policy(net, obsgraph::schema_from_json(n.at("schema")));
  }
  const AgentKind kind = parse_agent_kind(ckpt.metadata.value("kind", "ppo"));
  return make_flat_policy(flat_network_from_checkpoint(ckpt), uses_action_waiting(kind));
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, AgentKind kind,
                                      const std::string& segment_id) {
  std::string name(to_string(kind));
  if (!segment_id.empty()) name += "_" + segment_id;
  return dir / (name + ".ckpt");
}

}  // namespace terla::harness
