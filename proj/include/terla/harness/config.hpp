#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "terla/encoder/hgt.hpp"
#include "terla/harness/agent_kind.hpp"
#include "terla/netsim/simulator.hpp"
#include "terla/netsim/topology.hpp"
#include "terla/obsgraph/graph.hpp"
#include "terla/policy/ppo.hpp"

namespace terla::harness {

struct EvalSettings {
  std::size_t episodes = 100;
  std::size_t episode_length = 500;
  std::uint64_t seed = 1000;  // episode i runs with seed + i

  bool operator==(const EvalSettings&) const = default;
};

struct ExperimentConfig {
  std::string topology_source = "desk_default";  // file path, "inline" or "desk_default"
  netsim::NetworkTopology topology = netsim::NetworkTopology::desk_default();
  // episode_length here is ignored; training and evaluation set their own.
  netsim::SimConfig sim;
  policy::Hyperparameters hp;
  obsgraph::GraphSchema schema;
  encoder::HgtOptions hgt;
  std::vector<std::uint64_t> seeds{1};
  EvalSettings eval;
  std::filesystem::path output_dir = "out";
  std::optional<AgentKind> agent;
};

// Relative paths inside the JSON resolve against base_dir.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

}  // namespace terla::harness
