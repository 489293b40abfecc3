#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "terla/netsim/topology.hpp"
#include "terla/netsim/types.hpp"

namespace terla::netsim {

struct RedConfig {
  double discover = 0.15;
  double exploit = 0.10;
  double escalate = 0.10;
  double lateral = 0.08;
  double cross_segment = 0.02;
  // Chance per step that a privileged host has one service degraded.
  double degrade = 0.10;
  double degrade_amount = 0.5;
  bool enabled = true;
};

struct GreenConfig {
  double access_probability = 0.3;
  double failure_threshold = 0.5;
};

struct RewardWeights {
  double green_failure_penalty = 1.0;
  double critical_multiplier = 2.0;
  double restore_penalty = 1.0;
};

struct SimConfig {
  int episode_length = 500;
  double fp_rate = 0.02;
  double fn_rate = 0.25;
  RedConfig red;
  GreenConfig green;
  RewardWeights reward;
};

// Ground truth for one host at observation time.
struct HostActivity {
  bool process = false;
  bool network = false;
  bool decoy_triggered = false;
  bool analysed = false;
};

struct EventFlags {
  bool process = false;
  bool network = false;
};

// Applies IDS noise to one host's ground truth. Analysed hosts report ground
// truth exactly; a decoy interaction always raises the network flag.
EventFlags ids_observe(const HostActivity& truth, double fp_rate, double fn_rate,
                       std::mt19937_64& rng);

// Health of one segment: minus the sum over live hosts of red
// sessions plus service unreliability weighted 1 (standard) or 2 (OT).
double segment_health(const SegmentState& segment);

double shared_reward(const std::vector<SegmentState>& defended,
                     const std::vector<int>& green_failures,
                     const std::vector<double>& criticality, int restore_events,
                     const RewardWeights& weights);

struct StepInfo {
  // Per defended segment.
  std::vector<EnvAction> requested;
  std::vector<EnvAction> executed;
  std::vector<std::uint8_t> valid;      // false when the request targeted a dead slot
  std::vector<std::uint8_t> converted;  // true when a busy segment forced Sleep
  std::vector<std::uint8_t> accepted;   // a new action started this step
  std::vector<int> green_failures;
  std::vector<std::vector<CompromiseStage>> true_compromise;
  int restore_events = 0;
};

struct StepResult {
  std::vector<SegmentObservation> observations;  // per defended segment
  double shared_reward = 0.0;
  std::vector<double> segment_health;            // per defended segment
  bool done = false;
  int time = 0;
  StepInfo info;
};

class Simulator {
 public:
  explicit Simulator(NetworkTopology topology, SimConfig config = {});

  StepResult reset(std::uint64_t seed);
  // One action per defended segment, in defended-segment order.
  StepResult step(const std::vector<EnvAction>& actions);

  const NetworkTopology& topology() const { return topology_; }
  const SimConfig& config() const { return config_; }
  std::size_t defended_count() const { return defended_.size(); }
  const Segment& defended_segment(std::size_t d) const { return topology_.segments[defended_[d]]; }
  const SegmentLayout& layout(std::size_t d) const { return layouts_[defended_[d]]; }
  const SegmentState& state(std::size_t d) const { return states_[defended_[d]]; }
  int busy_remaining(std::size_t d) const { return busy_[d]; }
  int time() const { return t_; }
  bool done() const { return t_ >= config_.episode_length; }
  MissionPhase phase() const;

  // Scenario hook: places red on a live host of a defended segment.
  void inject_compromise(std::size_t d, std::size_t slot, CompromiseStage stage);

 private:
  struct Activity {
    std::vector<HostActivity> hosts;
  };

  void apply_blue(std::size_t d, const EnvAction& action, StepInfo& info);
  void advance_red();
  void red_segment(std::size_t s);
  void try_exploit(std::size_t s, std::size_t slot);
  void compromise(std::size_t s, std::size_t slot, CompromiseStage stage);
  int run_green(std::size_t s);
  SegmentObservation observe(std::size_t s);
  StepResult make_result(StepInfo info);
  double unit();

  NetworkTopology topology_;
  SimConfig config_;
  std::vector<std::size_t> defended_;
  std::vector<SegmentLayout> layouts_;
  std::vector<SegmentState> states_;
  std::vector<Activity> activity_;
  std::vector<int> busy_;
  std::vector<std::vector<std::uint8_t>> analyse_next_;  // per segment, per slot
  std::mt19937_64 rng_;
  int t_ = 0;
  bool started_ = false;
};

// CSV trace: step,segment,action_kind,valid,shared_reward,health
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out);
  void write(const Simulator& sim, const StepResult& result);

 private:
  std::ostream& out_;
};

}  // namespace terla::netsim
