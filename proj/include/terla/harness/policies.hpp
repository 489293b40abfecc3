#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include <json.hpp>

#include "terla/harness/agent_kind.hpp"
#include "terla/harness/checkpoint.hpp"
#include "terla/netsim/types.hpp"
#include "terla/policy/networks.hpp"

namespace terla::harness {

using TerlaNet = policy::TerlaNetwork<float>;
using FlatNet = policy::FlatNetwork<float>;

// Chooses one environment action for one defended segment.
class SegmentPolicy {
 public:
  virtual ~SegmentPolicy() = default;
  virtual netsim::EnvAction act(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout,
                                std::mt19937_64& rng) = 0;
  // True when the agent is only asked again after its action has finished.
  virtual bool waits() const { return false; }
};

std::unique_ptr<SegmentPolicy> make_sleep_policy();
// Uniform over the segment's flat action space.
std::unique_ptr<SegmentPolicy> make_random_policy();
// Greedy (argmax) policies over trained networks.
std::unique_ptr<SegmentPolicy> make_terla_policy(std::shared_ptr<const TerlaNet> net, obsgraph::GraphSchema schema);
std::unique_ptr<SegmentPolicy> make_flat_policy(std::shared_ptr<const FlatNet> net, bool waits);

nlohmann::json terla_network_spec(const obsgraph::GraphSchema& schema, const encoder::HgtOptions& hgt,
                                  std::size_t actions);
nlohmann::json flat_network_spec(std::size_t input_width, const std::vector<std::size_t>& hidden,
                                 std::size_t actions);

// Rebuilds the network described by the checkpoint metadata and loads its
// parameters. Throws SchemaError when the tensors do not fit the description.
std::shared_ptr<TerlaNet> terla_network_from_checkpoint(const Checkpoint& ckpt);
std::shared_ptr<FlatNet> flat_network_from_checkpoint(const Checkpoint& ckpt);
std::unique_ptr<SegmentPolicy> policy_from_checkpoint(const Checkpoint& ckpt);

// <dir>/<kind>.ckpt for a shared network, <dir>/<kind>_<segment>.ckpt otherwise.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, AgentKind kind,
                                      const std::string& segment_id = "");

}  // namespace terla::harness
