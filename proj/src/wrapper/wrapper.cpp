#include "terla/wrapper/wrapper.hpp"

#include <algorithm>

#include "terla/error.hpp"

namespace terla::wrapper {

std::string_view to_string(TerlaAction a) {
  switch (a) {
    case TerlaAction::DoNothing: return "DoNothing";
    case TerlaAction::CheckLeastCompromised: return "CheckLeastCompromised";
    case TerlaAction::RemoveMostCompromised: return "RemoveMostCompromised";
    case TerlaAction::RestoreMostCompromised: return "RestoreMostCompromised";
    case TerlaAction::DecoyMostCompromised: return "DecoyMostCompromised";
  }
  return "?";
}

TerlaAction terla_action(std::size_t index) {
  if (index >= kTerlaActionCount) throw Error("TERLA action index " + std::to_string(index) + " out of range");
  return static_cast<TerlaAction>(index);
}

int compromise_tier(bool process, bool network) {
  if (process && network) return 0;
  if (process) return 1;
  if (network) return 2;
  return 3;
}

namespace {

int tier_of(const netsim::SegmentObservation& obs, std::size_t slot) {
  return compromise_tier(obs.host_malicious_process.at(slot) != 0, obs.host_malicious_network.at(slot) != 0);
}

}  // namespace

CompromiseRank rank_hosts(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout) {
  CompromiseRank rank;
  rank.order = layout.active_slots();
  std::stable_sort(rank.order.begin(), rank.order.end(),
                   [&](std::size_t a, std::size_t b) { return tier_of(obs, a) < tier_of(obs, b); });
  return rank;
}

std::size_t least_compromised(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout) {
  const auto slots = layout.active_slots();
  if (slots.empty()) throw Error("segment has no active hosts");
  std::size_t best = slots.front();
  for (std::size_t s : slots)
    if (tier_of(obs, s) > tier_of(obs, best)) best = s;
  return best;
}

netsim::EnvAction target_action(TerlaAction a, const netsim::SegmentObservation& obs,
                                const netsim::SegmentLayout& layout) {
  if (a == TerlaAction::DoNothing) return netsim::EnvAction::sleep();
  netsim::ActionKind kind = netsim::ActionKind::Analyse;
  std::size_t slot = 0;
  if (a == TerlaAction::CheckLeastCompromised) {
    slot = least_compromised(obs, layout);
  } else {
    const auto rank = rank_hosts(obs, layout);
    if (rank.order.empty()) throw Error("segment has no active hosts");
    slot = rank.most();
    kind = a == TerlaAction::RemoveMostCompromised    ? netsim::ActionKind::Remove
           : a == TerlaAction::RestoreMostCompromised ? netsim::ActionKind::Restore
                                                      : netsim::ActionKind::DeployDecoy;
  }
  return netsim::EnvAction::on(kind, layout.subnet_of(slot), layout.host_in_subnet(slot));
}

}  // namespace terla::wrapper
