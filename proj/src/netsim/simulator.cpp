#include "terla/netsim/simulator.hpp"

#include <algorithm>
#include <ostream>

#include "terla/error.hpp"
#include "terla/random.hpp"

namespace terla::netsim {

EventFlags ids_observe(const HostActivity& truth, double fp_rate, double fn_rate,
                       std::mt19937_64& rng) {
  // Draw both variates unconditionally so the stream position does not depend on state.
  const double u_process = uniform01(rng);
  const double u_network = uniform01(rng);
  if (truth.analysed) return {truth.process, truth.network || truth.decoy_triggered};
  auto noisy = [&](bool real, double u) { return real ? u >= fn_rate : u < fp_rate; };
  EventFlags flags;
  flags.process = noisy(truth.process, u_process);
  flags.network = truth.decoy_triggered || noisy(truth.network, u_network);
  return flags;
}

double segment_health(const SegmentState& segment) {
  double total = 0.0;
  for (const auto& h : segment.hosts) {
    if (!h.active) continue;
    const double ot = h.is_ot ? 2.0 : 1.0;
    double host = h.red_sessions;
    for (double u : h.unreliability) host += u * ot;
    total += host;
  }
  return -total;
}

double shared_reward(const std::vector<SegmentState>& defended,
                     const std::vector<int>& green_failures,
                     const std::vector<double>& criticality, int restore_events,
                     const RewardWeights& weights) {
  double reward = 0.0;
  for (const auto& seg : defended) reward += segment_health(seg);
  for (std::size_t i = 0; i < green_failures.size(); ++i) {
    const double crit = i < criticality.size() ? criticality[i] : 1.0;
    reward -= weights.green_failure_penalty * crit * green_failures[i];
  }
  reward -= weights.restore_penalty * restore_events;
  return reward;
}

Simulator::Simulator(NetworkTopology topology, SimConfig config)
    : topology_(std::move(topology)), config_(config) {
  topology_.validate();
  if (config_.episode_length <= 0) throw ConfigError("episode_length must be positive");
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(config_.fp_rate) || !rate_ok(config_.fn_rate)) {
    throw ConfigError("IDS rates must lie in [0,1]");
  }
  defended_ = topology_.defended_indices();
}

MissionPhase Simulator::phase() const { return mission_phase_at(t_, config_.episode_length); }

double Simulator::unit() { return uniform01(rng_); }

StepResult Simulator::reset(std::uint64_t seed) {
  rng_.seed(seed);
  t_ = 0;
  started_ = true;
  const std::size_t n = topology_.segments.size();
  layouts_.assign(n, {});
  states_.assign(n, {});
  activity_.assign(n, {});
  analyse_next_.assign(n, {});
  busy_.assign(defended_.size(), 0);

  for (std::size_t s = 0; s < n; ++s) {
    const auto& seg = topology_.segments[s];
    auto& layout = layouts_[s];
    for (const auto& sub : seg.subnets) {
      const std::size_t cap = sub.hosts.size();
      std::size_t live = cap;
      if (sub.min_active && *sub.min_active < cap) {
        live = *sub.min_active + uniform_index(rng_, cap - *sub.min_active + 1);
      }
      layout.capacity.push_back(cap);
      layout.active.push_back(live);
      for (std::size_t h = 0; h < cap; ++h) {
        HostState hs;
        hs.is_ot = sub.hosts[h].is_ot;
        hs.active = h < live;
        hs.unreliability.assign(sub.hosts[h].services.size(), 0.0);
        states_[s].hosts.push_back(std::move(hs));
      }
    }
    activity_[s].hosts.assign(states_[s].hosts.size(), {});
    analyse_next_[s].assign(states_[s].hosts.size(), 0);
  }

  // Initial foothold on a random live host of a random undefended segment.
  const auto undefended = topology_.undefended_indices();
  const std::size_t s0 = undefended[uniform_index(rng_, undefended.size())];
  const auto live = layouts_[s0].active_slots();
  compromise(s0, live[uniform_index(rng_, live.size())], CompromiseStage::User);

  StepInfo info;
  info.requested.assign(defended_.size(), EnvAction::sleep());
  info.executed = info.requested;
  info.valid.assign(defended_.size(), 1);
  info.converted.assign(defended_.size(), 0);
  info.accepted.assign(defended_.size(), 0);
  info.green_failures.assign(defended_.size(), 0);
  return make_result(std::move(info));
}

void Simulator::inject_compromise(std::size_t d, std::size_t slot, CompromiseStage stage) {
  const std::size_t s = defended_.at(d);
  if (slot >= states_[s].hosts.size() || !states_[s].hosts[slot].active) {
    throw DimensionError("inject_compromise: slot " + std::to_string(slot) + " is not a live host");
  }
  compromise(s, slot, stage);
}

void Simulator::compromise(std::size_t s, std::size_t slot, CompromiseStage stage) {
  auto& h = states_[s].hosts[slot];
  h.stage = stage;
  h.red_sessions = stage == CompromiseStage::Clean ? 0 : (stage == CompromiseStage::User ? 1 : 2);
  h.discovered = h.discovered || stage != CompromiseStage::Clean;
}

StepResult Simulator::step(const std::vector<EnvAction>& actions) {
  if (!started_) throw RuntimeFailure("step() before reset()");
  if (done()) throw RuntimeFailure("step() after the episode finished");
  if (actions.size() != defended_.size()) {
    throw DimensionError("step needs " + std::to_string(defended_.size()) + " actions, got " +
                         std::to_string(actions.size()));
  }
  const MissionPhase phase_now = phase();

  for (auto& act : activity_) std::fill(act.hosts.begin(), act.hosts.end(), HostActivity{});

  for (auto& seg : states_) {
    for (auto& h : seg.hosts) {
      if (h.downtime_remaining > 0 && --h.downtime_remaining == 0) {
        std::fill(h.unreliability.begin(), h.unreliability.end(), 0.0);
      }
    }
  }

  StepInfo info;
  const std::size_t nd = defended_.size();
  info.requested = actions;
  info.executed.assign(nd, EnvAction::sleep());
  info.valid.assign(nd, 1);
  info.converted.assign(nd, 0);
  info.accepted.assign(nd, 0);
  info.green_failures.assign(nd, 0);
  for (std::size_t d = 0; d < nd; ++d) apply_blue(d, actions[d], info);

  advance_red();

  for (std::size_t d = 0; d < nd; ++d) {
    const std::size_t s = defended_[d];
    info.green_failures[d] = run_green(s);
  }

  std::vector<double> criticality(nd, 1.0);
  for (std::size_t d = 0; d < nd; ++d) {
    const auto& seg = topology_.segments[defended_[d]];
    if (seg.critical_phase && *seg.critical_phase == phase_now) {
      criticality[d] = config_.reward.critical_multiplier;
    }
  }

  ++t_;
  StepResult result = make_result(std::move(info));
  std::vector<SegmentState> defended_states;
  defended_states.reserve(nd);
  for (std::size_t s : defended_) defended_states.push_back(states_[s]);
  result.shared_reward = shared_reward(defended_states, result.info.green_failures, criticality,
                                       result.info.restore_events, config_.reward);
  return result;
}

void Simulator::apply_blue(std::size_t d, const EnvAction& action, StepInfo& info) {
  if (busy_[d] > 0) {
    --busy_[d];
    info.converted[d] = 1;
    return;
  }
  const std::size_t s = defended_[d];
  const auto& layout = layouts_[s];
  EnvAction exec = action;
  if (targets_host(action.kind) && !layout.is_active(action.subnet_index, action.host_index)) {
    info.valid[d] = 0;
    exec = EnvAction::sleep();
  }
  if (!targets_host(exec.kind)) exec.subnet_index = exec.host_index = 0;
  info.executed[d] = exec;
  info.accepted[d] = 1;
  busy_[d] = duration(exec.kind) - 1;
  if (!targets_host(exec.kind)) return;

  const std::size_t slot = layout.slot(exec.subnet_index, exec.host_index);
  auto& h = states_[s].hosts[slot];
  switch (exec.kind) {
    case ActionKind::Analyse:
      analyse_next_[s][slot] = 1;
      break;
    case ActionKind::Remove:
      if (h.stage == CompromiseStage::User && h.downtime_remaining == 0) {
        h.stage = CompromiseStage::Clean;
        h.red_sessions = 0;
      }
      break;
    case ActionKind::Restore:
      h.stage = CompromiseStage::Clean;
      h.red_sessions = 0;
      h.discovered = false;
      h.decoy_deployed = false;
      h.downtime_remaining = duration(ActionKind::Restore);
      std::fill(h.unreliability.begin(), h.unreliability.end(), 1.0);
      ++info.restore_events;
      break;
    case ActionKind::DeployDecoy:
      if (h.downtime_remaining == 0) h.decoy_deployed = true;
      break;
    default:
      break;
  }
}

void Simulator::advance_red() {
  if (!config_.red.enabled) return;
  const std::size_t n = states_.size();
  std::vector<std::uint8_t> presence(n, 0);
  bool foothold = false;
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& h : states_[s].hosts) {
      if (h.active && h.stage != CompromiseStage::Clean) presence[s] = 1;
    }
    foothold = foothold || presence[s];
  }

  if (foothold) {
    for (std::size_t s : defended_) {
      if (unit() >= config_.red.cross_segment) continue;
      const auto live = layouts_[s].active_slots();
      try_exploit(s, live[uniform_index(rng_, live.size())]);
    }
  }

  for (std::size_t s = 0; s < n; ++s) {
    if (presence[s]) red_segment(s);
  }
}

void Simulator::red_segment(std::size_t s) {
  auto& hosts = states_[s].hosts;
  auto& act = activity_[s].hosts;
  const auto& layout = layouts_[s];
  const auto& red = config_.red;

  std::vector<CompromiseStage> before(hosts.size());
  for (std::size_t i = 0; i < hosts.size(); ++i) before[i] = hosts[i].stage;

  for (std::size_t i = 0; i < hosts.size(); ++i) {
    auto& h = hosts[i];
    if (!h.active || h.downtime_remaining > 0 || before[i] != CompromiseStage::Clean) continue;
    if (!h.discovered) {
      if (unit() < red.discover) {
        h.discovered = true;
        act[i].network = true;
      }
    } else if (unit() < red.exploit) {
      try_exploit(s, i);
    }
  }

  for (std::size_t i = 0; i < hosts.size(); ++i) {
    auto& h = hosts[i];
    if (before[i] == CompromiseStage::User && h.stage == CompromiseStage::User &&
        unit() < red.escalate) {
      compromise(s, i, CompromiseStage::Privileged);
    }
  }

  for (std::size_t i = 0; i < hosts.size(); ++i) {
    if (before[i] == CompromiseStage::Clean || hosts[i].stage == CompromiseStage::Clean) continue;
    if (unit() >= red.lateral) continue;
    const std::size_t sub = layout.subnet_of(i);
    const std::size_t base = layout.slot(sub, 0);
    const std::size_t live = layout.active[sub];
    if (live < 2) continue;
    std::size_t target = base + uniform_index(rng_, live - 1);
    if (target >= i) ++target;
    act[i].network = true;
    try_exploit(s, target);
  }

  for (std::size_t i = 0; i < hosts.size(); ++i) {
    auto& h = hosts[i];
    if (before[i] != CompromiseStage::Privileged || h.stage != CompromiseStage::Privileged) continue;
    if (unit() >= red.degrade || h.unreliability.empty()) continue;
    auto& u = h.unreliability[uniform_index(rng_, h.unreliability.size())];
    u = std::min(1.0, u + red.degrade_amount);
  }
}

void Simulator::try_exploit(std::size_t s, std::size_t slot) {
  auto& h = states_[s].hosts[slot];
  if (!h.active || h.downtime_remaining > 0) return;
  auto& act = activity_[s].hosts[slot];
  act.network = true;
  if (h.decoy_deployed) {
    act.decoy_triggered = true;
    return;
  }
  if (h.stage == CompromiseStage::Clean) compromise(s, slot, CompromiseStage::User);
}

int Simulator::run_green(std::size_t s) {
  int failures = 0;
  for (const auto& h : states_[s].hosts) {
    if (!h.active) continue;
    for (double u : h.unreliability) {
      if (unit() < config_.green.access_probability && u > config_.green.failure_threshold) {
        ++failures;
      }
    }
  }
  return failures;
}

SegmentObservation Simulator::observe(std::size_t s) {
  const auto& layout = layouts_[s];
  const auto& hosts = states_[s].hosts;
  SegmentObservation obs;
  obs.mission_phase = phase();
  obs.subnet_vector.assign(layout.subnet_count(), 1);
  obs.host_malicious_process.assign(hosts.size(), 0);
  obs.host_malicious_network.assign(hosts.size(), 0);
  obs.active_host_count = layout.active_count();
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    if (!hosts[i].active) continue;
    HostActivity truth = activity_[s].hosts[i];
    truth.process = hosts[i].stage != CompromiseStage::Clean;
    truth.network = truth.network || hosts[i].stage == CompromiseStage::Privileged;
    truth.analysed = analyse_next_[s][i] != 0;
    analyse_next_[s][i] = 0;
    const EventFlags flags = ids_observe(truth, config_.fp_rate, config_.fn_rate, rng_);
    obs.host_malicious_process[i] = flags.process;
    obs.host_malicious_network[i] = flags.network;
  }
  return obs;
}

StepResult Simulator::make_result(StepInfo info) {
  StepResult r;
  r.time = t_;
  r.done = done();
  for (std::size_t d = 0; d < defended_.size(); ++d) {
    const std::size_t s = defended_[d];
    r.observations.push_back(observe(s));
    r.segment_health.push_back(segment_health(states_[s]));
    std::vector<CompromiseStage> truth;
    for (const auto& h : states_[s].hosts) truth.push_back(h.stage);
    info.true_compromise.push_back(std::move(truth));
  }
  r.info = std::move(info);
  return r;
}

TraceWriter::TraceWriter(std::ostream& out) : out_(out) {
  out_ << "step,segment,action_kind,valid,shared_reward,health\n";
}

void TraceWriter::write(const Simulator& sim, const StepResult& result) {
  for (std::size_t d = 0; d < sim.defended_count(); ++d) {
    const auto kind = d < result.info.executed.size() ? result.info.executed[d].kind : ActionKind::Sleep;
    const bool valid = d < result.info.valid.size() ? result.info.valid[d] != 0 : true;
    out_ << result.time << ',' << sim.defended_segment(d).id << ',' << to_string(kind) << ','
         << (valid ? 1 : 0) << ',' << result.shared_reward << ',' << result.segment_health[d] << '\n';
  }
}

}  // namespace terla::netsim
