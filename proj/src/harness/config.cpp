#include "terla/harness/config.hpp"

#include <fstream>
#include <set>

#include "terla/error.hpp"
#include "terla/netsim/config_io.hpp"

namespace terla::harness {

namespace {

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  reject_unknown(j, {"topology", "sim", "training", "encoder", "seeds", "eval", "output_dir", "agent"}, "config");
  ExperimentConfig c;
  try {
    if (j.contains("topology")) {
      const auto& t = j.at("topology");
      if (t.is_string() && t.get<std::string>() == "desk_default") {
        c.topology_source = "desk_default";
        c.topology = netsim::NetworkTopology::desk_default();
      } else if (t.is_string()) {
        std::filesystem::path p = t.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw ConfigError("topology file " + p.string() + " does not exist");
        c.topology_source = p.string();
        c.topology = netsim::load_topology(p);
      } else {
        c.topology_source = "inline";
        c.topology = netsim::topology_from_json(t);
      }
    }
    if (j.contains("sim")) c.sim = netsim::sim_config_from_json(j.at("sim"), c.sim);
    if (j.contains("training")) c.hp = policy::hyperparameters_from_json(j.at("training"));
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      reject_unknown(e, {"heads", "residual", "relation_prior", "subnet_links"}, "encoder");
      read(e, "heads", c.hgt.heads);
      read(e, "residual", c.hgt.residual);
      read(e, "relation_prior", c.hgt.relation_prior);
      read(e, "subnet_links", c.schema.subnet_links);
      if (c.hgt.heads == 0) throw ConfigError("encoder.heads must be positive");
    }
    if (j.contains("seeds")) {
      c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown(e, {"episodes", "episode_length", "seed"}, "eval");
      read(e, "episodes", c.eval.episodes);
      read(e, "episode_length", c.eval.episode_length);
      read(e, "seed", c.eval.seed);
      if (c.eval.episodes == 0 || c.eval.episode_length == 0) {
        throw ConfigError("eval.episodes and eval.episode_length must be positive");
      }
    }
    if (j.contains("output_dir")) {
      std::filesystem::path p = j.at("output_dir").get<std::string>();
      c.output_dir = p.is_relative() ? base_dir / p : p;
    }
    if (j.contains("agent")) c.agent = parse_agent_kind(j.at("agent").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["topology"] = netsim::topology_to_json(c.topology);
  j["sim"] = netsim::sim_config_to_json(c.sim);
  j["training"] = policy::hyperparameters_to_json(c.hp);
  j["encoder"] = {{"heads", c.hgt.heads},
                  {"residual", c.hgt.residual},
                  {"relation_prior", c.hgt.relation_prior},
                  {"subnet_links", c.schema.subnet_links}};
  j["seeds"] = c.seeds;
  j["eval"] = {{"episodes", c.eval.episodes}, {"episode_length", c.eval.episode_length}, {"seed", c.eval.seed}};
  j["output_dir"] = c.output_dir.string();
  if (c.agent) j["agent"] = std::string(to_string(*c.agent));
  return j;
}

}  // namespace terla::harness
