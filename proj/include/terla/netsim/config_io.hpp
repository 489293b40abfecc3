#pragma once

#include <filesystem>

#include <json.hpp>

#include "terla/netsim/simulator.hpp"
#include "terla/netsim/topology.hpp"

namespace terla::netsim {

NetworkTopology topology_from_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const NetworkTopology& topology);
NetworkTopology load_topology(const std::filesystem::path& path);

// Missing keys keep the values in `defaults`.
SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig defaults = {});
nlohmann::json sim_config_to_json(const SimConfig& config);

}  // namespace terla::netsim
