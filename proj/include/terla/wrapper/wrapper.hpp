#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "terla/netsim/types.hpp"

namespace terla::wrapper {

enum class TerlaAction : std::uint8_t {
  DoNothing = 0,
  CheckLeastCompromised = 1,
  RemoveMostCompromised = 2,
  RestoreMostCompromised = 3,
  DecoyMostCompromised = 4,
};
inline constexpr std::size_t kTerlaActionCount = 5;

std::string_view to_string(TerlaAction a);
TerlaAction terla_action(std::size_t index);  // throws for index >= 5

// Active host slots ordered from most to least compromised: both flags,
// process only, network only, none; ascending slot within a tier.
struct CompromiseRank {
  std::vector<std::size_t> order;

  std::size_t most() const { return order.front(); }
};

// 0 = both flags, 1 = process only, 2 = network only, 3 = none.
int compromise_tier(bool process, bool network);

CompromiseRank rank_hosts(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout);

// Least compromised is the first host of the cleanest non-empty tier, so it
// is not simply the reverse of the most-compromised order within a tier.
std::size_t least_compromised(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout);

netsim::EnvAction target_action(TerlaAction a, const netsim::SegmentObservation& obs,
                                const netsim::SegmentLayout& layout);

// Suppresses observations while the agent's last accepted action is running.
class ActionWaiter {
 public:
  // Call after the environment accepted an action of the given duration.
  void on_accepted(int duration) { remaining_ = duration > 1 ? duration - 1 : 0; }
  // Call once per environment step after on_accepted; returns whether the
  // agent receives this step's observation and must choose a new action.
  bool deliver() {
    if (remaining_ > 0) {
      --remaining_;
      return false;
    }
    return true;
  }
  int remaining() const { return remaining_; }
  void reset() { remaining_ = 0; }

 private:
  int remaining_ = 0;
};

// Segment-local reward: change in the segment's health since the last step.
class ShapedReward {
 public:
  explicit ShapedReward(double initial_health = 0.0) : previous_(initial_health) {}
  void reset(double initial_health) { previous_ = initial_health; }
  double operator()(double current_health) {
    const double r = current_health - previous_;
    previous_ = current_health;
    return r;
  }
  double previous() const { return previous_; }

 private:
  double previous_;
};

}  // namespace terla::wrapper
