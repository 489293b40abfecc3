#include "terla/netsim/config_io.hpp"

#include <fstream>

#include "terla/error.hpp"

namespace terla::netsim {

using nlohmann::json;

namespace {

template <typename V>
V field(const json& j, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

const json& require(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string(where) + " is missing '" + key + "'");
  }
  return j.at(key);
}

}  // namespace

NetworkTopology topology_from_json(const json& j) {
  NetworkTopology topo;
  for (const auto& js : require(j, "segments", "topology")) {
    Segment seg;
    seg.id = require(js, "id", "segment").get<std::string>();
    seg.defended = field(js, "defended", true);
    if (js.contains("critical_phase") && !js.at("critical_phase").is_null()) {
      seg.critical_phase = parse_mission_phase(js.at("critical_phase").get<std::string>());
    }
    for (const auto& jn : require(js, "subnets", "segment")) {
      Subnet sub;
      sub.id = require(jn, "id", "subnet").get<std::string>();
      if (jn.contains("min_active")) sub.min_active = jn.at("min_active").get<std::size_t>();
      for (const auto& jh : require(jn, "hosts", "subnet")) {
        HostSpec h;
        h.id = require(jh, "id", "host").get<std::string>();
        h.is_ot = field(jh, "ot", false);
        h.services = field(jh, "services", std::vector<std::string>{"svc0"});
        sub.hosts.push_back(std::move(h));
      }
      seg.subnets.push_back(std::move(sub));
    }
    topo.segments.push_back(std::move(seg));
  }
  topo.validate();
  return topo;
}

json topology_to_json(const NetworkTopology& topology) {
  json segs = json::array();
  for (const auto& seg : topology.segments) {
    json js{{"id", seg.id}, {"defended", seg.defended}};
    if (seg.critical_phase) js["critical_phase"] = std::string(to_string(*seg.critical_phase));
    json subs = json::array();
    for (const auto& sub : seg.subnets) {
      json jn{{"id", sub.id}};
      if (sub.min_active) jn["min_active"] = *sub.min_active;
      json hosts = json::array();
      for (const auto& h : sub.hosts) {
        hosts.push_back(json{{"id", h.id}, {"ot", h.is_ot}, {"services", h.services}});
      }
      jn["hosts"] = std::move(hosts);
      subs.push_back(std::move(jn));
    }
    js["subnets"] = std::move(subs);
    segs.push_back(std::move(js));
  }
  return json{{"segments", std::move(segs)}};
}

NetworkTopology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open topology file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("topology file " + path.string() + ": " + e.what());
  }
  return topology_from_json(j);
}

SimConfig sim_config_from_json(const json& j, SimConfig c) {
  if (j.is_null()) return c;
  c.episode_length = field(j, "episode_length", c.episode_length);
  c.fp_rate = field(j, "fp_rate", c.fp_rate);
  c.fn_rate = field(j, "fn_rate", c.fn_rate);
  if (j.contains("red")) {
    const auto& r = j.at("red");
    c.red.discover = field(r, "discover", c.red.discover);
    c.red.exploit = field(r, "exploit", c.red.exploit);
    c.red.escalate = field(r, "escalate", c.red.escalate);
    c.red.lateral = field(r, "lateral", c.red.lateral);
    c.red.cross_segment = field(r, "cross_segment", c.red.cross_segment);
    c.red.degrade = field(r, "degrade", c.red.degrade);
    c.red.degrade_amount = field(r, "degrade_amount", c.red.degrade_amount);
    c.red.enabled = field(r, "enabled", c.red.enabled);
  }
  if (j.contains("green")) {
    const auto& g = j.at("green");
    c.green.access_probability = field(g, "access_probability", c.green.access_probability);
    c.green.failure_threshold = field(g, "failure_threshold", c.green.failure_threshold);
  }
  if (j.contains("reward")) {
    const auto& w = j.at("reward");
    c.reward.green_failure_penalty = field(w, "green_failure_penalty", c.reward.green_failure_penalty);
    c.reward.critical_multiplier = field(w, "critical_multiplier", c.reward.critical_multiplier);
    c.reward.restore_penalty = field(w, "restore_penalty", c.reward.restore_penalty);
  }
  return c;
}

json sim_config_to_json(const SimConfig& c) {
  return json{
      {"episode_length", c.episode_length},
      {"fp_rate", c.fp_rate},
      {"fn_rate", c.fn_rate},
      {"red",
       {{"discover", c.red.discover},
        {"exploit", c.red.exploit},
        {"escalate", c.red.escalate},
        {"lateral", c.red.lateral},
        {"cross_segment", c.red.cross_segment},
        {"degrade", c.red.degrade},
        {"degrade_amount", c.red.degrade_amount},
        {"enabled", c.red.enabled}}},
      {"green",
       {{"access_probability", c.green.access_probability},
        {"failure_threshold", c.green.failure_threshold}}},
      {"reward",
       {{"green_failure_penalty", c.reward.green_failure_penalty},
        {"critical_multiplier", c.reward.critical_multiplier},
        {"restore_penalty", c.reward.restore_penalty}}},
  };
}

}  // namespace terla::netsim
