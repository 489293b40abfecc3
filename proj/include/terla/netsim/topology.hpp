#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "terla/netsim/types.hpp"

namespace terla::netsim {

struct HostSpec {
  std::string id;
  bool is_ot = false;
  std::vector<std::string> services;
};

struct Subnet {
  std::string id;
  std::vector<HostSpec> hosts;  // one per slot; hosts.size() is the slot capacity
  // Lower bound on live hosts per episode; unset means every slot is live.
  std::optional<std::size_t> min_active;
};

struct Segment {
  std::string id;
  bool defended = true;
  // Phase in which green failures in this segment weigh double.
  std::optional<MissionPhase> critical_phase;
  std::vector<Subnet> subnets;

  std::size_t host_capacity() const;
};

struct NetworkTopology {
  std::vector<Segment> segments;

  // Throws ConfigError on duplicate ids, empty subnets, bad min_active, or
  // when no segment is undefended.
  void validate() const;

  std::vector<std::size_t> defended_indices() const;
  std::vector<std::size_t> undefended_indices() const;

  // Four defended segments of (1x4), (1x6), (1x8), (2x4) hosts plus one
  // undefended segment where the attacker starts.
  static NetworkTopology desk_default();
};

}  // namespace terla::netsim
