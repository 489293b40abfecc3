#include "terla/netsim/types.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "terla/error.hpp"

namespace terla::netsim {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Sleep: return "Sleep";
    case ActionKind::Monitor: return "Monitor";
    case ActionKind::Analyse: return "Analyse";
    case ActionKind::Remove: return "Remove";
    case ActionKind::Restore: return "Restore";
    case ActionKind::DeployDecoy: return "DeployDecoy";
  }
  return "Unknown";
}

std::string_view to_string(MissionPhase phase) {
  switch (phase) {
    case MissionPhase::Phase1: return "1";
    case MissionPhase::Phase2A: return "2A";
    case MissionPhase::Phase2B: return "2B";
  }
  return "?";
}

ActionKind parse_action_kind(std::string_view text) {
  for (std::size_t k = 0; k < kActionKindCount; ++k) {
    const auto kind = static_cast<ActionKind>(k);
    if (to_string(kind) == text) return kind;
  }
  throw ConfigError("unknown action kind '" + std::string(text) + "'");
}

MissionPhase parse_mission_phase(std::string_view text) {
  if (text == "1" || text == "Phase1") return MissionPhase::Phase1;
  if (text == "2A" || text == "Phase2A") return MissionPhase::Phase2A;
  if (text == "2B" || text == "Phase2B") return MissionPhase::Phase2B;
  throw ConfigError("unknown mission phase '" + std::string(text) + "'");
}

MissionPhase mission_phase_at(int t, int episode_length) {
  if (episode_length <= 0) throw ConfigError("episode length must be positive");
  const int clamped = std::clamp(t, 0, episode_length - 1);
  const long third = (3L * clamped) / episode_length;
  return static_cast<MissionPhase>(std::min(third, 2L));
}

std::size_t SegmentLayout::slot_count() const {
  return std::accumulate(capacity.begin(), capacity.end(), std::size_t{0});
}

std::size_t SegmentLayout::active_count() const {
  return std::accumulate(active.begin(), active.end(), std::size_t{0});
}

std::size_t SegmentLayout::slot(std::size_t subnet, std::size_t host) const {
  std::size_t base = 0;
  for (std::size_t s = 0; s < subnet; ++s) base += capacity[s];
  return base + host;
}

std::size_t SegmentLayout::subnet_of(std::size_t slot) const {
  for (std::size_t s = 0; s < capacity.size(); ++s) {
    if (slot < capacity[s]) return s;
    slot -= capacity[s];
  }
  throw DimensionError("slot " + std::to_string(slot) + " outside segment layout");
}

std::size_t SegmentLayout::host_in_subnet(std::size_t slot) const {
  for (std::size_t s = 0; s < capacity.size(); ++s) {
    if (slot < capacity[s]) return slot;
    slot -= capacity[s];
  }
  throw DimensionError("slot outside segment layout");
}

bool SegmentLayout::is_active(std::size_t slot) const {
  for (std::size_t s = 0; s < capacity.size(); ++s) {
    if (slot < capacity[s]) return slot < active[s];
    slot -= capacity[s];
  }
  return false;
}

bool SegmentLayout::is_active(std::size_t subnet, std::size_t host) const {
  return subnet < capacity.size() && host < active[subnet];
}

std::vector<std::size_t> SegmentLayout::active_slots() const {
  std::vector<std::size_t> out;
  std::size_t base = 0;
  for (std::size_t s = 0; s < capacity.size(); ++s) {
    for (std::size_t h = 0; h < active[s]; ++h) out.push_back(base + h);
    base += capacity[s];
  }
  return out;
}

}  // namespace terla::netsim
