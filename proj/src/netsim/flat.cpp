#include "terla/netsim/flat.hpp"

#include <array>
#include <string>

#include "terla/error.hpp"

namespace terla::netsim {

namespace {
constexpr std::array<ActionKind, 4> kHostKinds = {ActionKind::Analyse, ActionKind::Remove,
                                                  ActionKind::Restore, ActionKind::DeployDecoy};
}

std::size_t flat_action_count(const SegmentLayout& layout) {
  return 2 + kHostKinds.size() * layout.slot_count();
}

EnvAction decode_flat_action(std::size_t index, const SegmentLayout& layout) {
  if (index >= flat_action_count(layout)) {
    throw DimensionError("flat action " + std::to_string(index) + " out of range");
  }
  if (index == 0) return EnvAction::sleep();
  if (index == 1) return EnvAction{ActionKind::Monitor, 0, 0};
  const std::size_t k = index - 2;
  const std::size_t slot = k / kHostKinds.size();
  return EnvAction{kHostKinds[k % kHostKinds.size()], layout.subnet_of(slot),
                   layout.host_in_subnet(slot)};
}

std::size_t encode_flat_action(const EnvAction& action, const SegmentLayout& layout) {
  if (action.kind == ActionKind::Sleep) return 0;
  if (action.kind == ActionKind::Monitor) return 1;
  std::size_t k = 0;
  while (kHostKinds[k] != action.kind) ++k;
  return 2 + layout.slot(action.subnet_index, action.host_index) * kHostKinds.size() + k;
}

std::size_t flat_observation_width(const SegmentLayout& layout) {
  return kMissionPhaseCount + layout.subnet_count() + 2 * layout.slot_count();
}

std::vector<float> flat_observation(const SegmentObservation& obs) {
  std::vector<float> out(kMissionPhaseCount, 0.0f);
  out[static_cast<std::size_t>(obs.mission_phase)] = 1.0f;
  for (auto v : obs.subnet_vector) out.push_back(v);
  for (auto v : obs.host_malicious_process) out.push_back(v);
  for (auto v : obs.host_malicious_network) out.push_back(v);
  return out;
}

}  // namespace terla::netsim
