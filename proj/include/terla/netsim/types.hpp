#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace terla::netsim {

enum class MissionPhase : std::uint8_t { Phase1 = 0, Phase2A = 1, Phase2B = 2 };
inline constexpr std::size_t kMissionPhaseCount = 3;

enum class ActionKind : std::uint8_t { Sleep, Monitor, Analyse, Remove, Restore, DeployDecoy };
inline constexpr std::size_t kActionKindCount = 6;

enum class CompromiseStage : std::uint8_t { Clean, User, Privileged };

// Timesteps an action occupies its segment, including the step it is issued.
constexpr int duration(ActionKind kind) {
  switch (kind) {
    case ActionKind::Sleep:
    case ActionKind::Monitor:
      return 1;
    case ActionKind::Analyse:
    case ActionKind::DeployDecoy:
      return 2;
    case ActionKind::Remove:
      return 3;
    case ActionKind::Restore:
      return 5;
  }
  return 1;
}

// Sleep and Monitor are the "non-actions" that do not count toward action rates.
constexpr bool is_active_action(ActionKind kind) {
  return kind != ActionKind::Sleep && kind != ActionKind::Monitor;
}

constexpr bool targets_host(ActionKind kind) { return is_active_action(kind); }

std::string_view to_string(ActionKind kind);
std::string_view to_string(MissionPhase phase);
ActionKind parse_action_kind(std::string_view text);
MissionPhase parse_mission_phase(std::string_view text);

// Phase1 for the first third of an episode, Phase2A the second, Phase2B the rest.
MissionPhase mission_phase_at(int t, int episode_length);

struct EnvAction {
  ActionKind kind = ActionKind::Sleep;
  std::size_t subnet_index = 0;
  std::size_t host_index = 0;

  static EnvAction sleep() { return {}; }
  static EnvAction on(ActionKind kind, std::size_t subnet, std::size_t host) {
    return {kind, subnet, host};
  }
  bool operator==(const EnvAction&) const = default;
};

// Host slots of one segment for the current episode. Slots are numbered
// segment-wide, subnet by subnet; the first active[s] slots of subnet s are live.
struct SegmentLayout {
  std::vector<std::size_t> capacity;
  std::vector<std::size_t> active;

  std::size_t subnet_count() const { return capacity.size(); }
  std::size_t slot_count() const;
  std::size_t active_count() const;
  std::size_t slot(std::size_t subnet, std::size_t host) const;
  std::size_t subnet_of(std::size_t slot) const;
  std::size_t host_in_subnet(std::size_t slot) const;
  bool is_active(std::size_t slot) const;
  bool is_active(std::size_t subnet, std::size_t host) const;
  std::vector<std::size_t> active_slots() const;

  bool operator==(const SegmentLayout&) const = default;
};

struct SegmentObservation {
  MissionPhase mission_phase = MissionPhase::Phase1;
  std::vector<std::uint8_t> subnet_vector;
  std::vector<std::uint8_t> host_malicious_process;
  std::vector<std::uint8_t> host_malicious_network;
  std::size_t active_host_count = 0;

  bool operator==(const SegmentObservation&) const = default;
};

struct HostState {
  int red_sessions = 0;
  CompromiseStage stage = CompromiseStage::Clean;
  bool decoy_deployed = false;
  int downtime_remaining = 0;
  std::vector<double> unreliability;  // one entry per service, in [0,1]
  bool is_ot = false;
  bool active = true;
  bool discovered = false;

  bool operator==(const HostState&) const = default;
};

struct SegmentState {
  std::vector<HostState> hosts;
};

}  // namespace terla::netsim
