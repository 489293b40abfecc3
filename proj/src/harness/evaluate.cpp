#include "terla/harness/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "terla/error.hpp"
#include "terla/wrapper/wrapper.hpp"

namespace terla::harness {

namespace {

constexpr std::array<netsim::ActionKind, 4> kActive{netsim::ActionKind::Analyse, netsim::ActionKind::Remove,
                                                    netsim::ActionKind::Restore, netsim::ActionKind::DeployDecoy};

const char* phase_name(std::size_t p) {
  static const char* names[] = {"1", "2A", "2B"};
  return names[p];
}

void finish_statistics(EvalReport& report) {
  const double n = static_cast<double>(report.episode_rewards.size());
  report.mean = 0.0;
  for (double r : report.episode_rewards) report.mean += r / n;
  double ss = 0.0;
  for (double r : report.episode_rewards) ss += (r - report.mean) * (r - report.mean);
  report.stddev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
}

}  // namespace

double EvalReport::action_rate() const {
  std::size_t n = 0;
  for (auto k : kActive) n += action_counts[static_cast<std::size_t>(k)];
  return agent_steps ? static_cast<double>(n) / static_cast<double>(agent_steps) : 0.0;
}

double EvalReport::action_type_rate(netsim::ActionKind kind) const {
  return agent_steps ? static_cast<double>(action_counts[static_cast<std::size_t>(kind)]) /
                           static_cast<double>(agent_steps)
                     : 0.0;
}

double EvalReport::phase_action_rate(std::size_t phase) const {
  std::size_t n = 0;
  for (auto k : kActive) n += phase_counts.at(phase)[static_cast<std::size_t>(k)];
  return phase_steps[phase] ? static_cast<double>(n) / static_cast<double>(phase_steps[phase]) : 0.0;
}

int relative_effectiveness(double r, double r_sleep) {
  if (!(r_sleep < 0.0)) {
    throw Error("relative effectiveness needs a negative sleep baseline, got " + std::to_string(r_sleep));
  }
  return static_cast<int>(std::lround(100.0 * (r - r_sleep) / std::abs(r_sleep)));
}

EvalReport evaluate(AgentKind kind, const std::vector<SegmentPolicy*>& policies,
                    const netsim::NetworkTopology& topology, netsim::SimConfig sim, const EvalSettings& settings) {
  sim.episode_length = static_cast<int>(settings.episode_length);
  netsim::Simulator env(topology, sim);
  const std::size_t nd = env.defended_count();
  if (policies.size() != nd) {
    throw Error("evaluation needs " + std::to_string(nd) + " segment policies, got " +
                std::to_string(policies.size()));
  }
  EvalReport report;
  report.kind = kind;
  report.settings = settings;

  for (std::size_t ep = 0; ep < settings.episodes; ++ep) {
    const std::uint64_t seed = settings.seed + ep;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto result = env.reset(seed);
    std::vector<wrapper::ActionWaiter> waiters(nd);
    std::vector<bool> deliver(nd, true);
    double total = 0.0;
    while (!result.done) {
      const auto phase = static_cast<std::size_t>(env.phase());
      std::vector<netsim::EnvAction> actions(nd);
      for (std::size_t d = 0; d < nd; ++d) {
        if (deliver[d]) actions[d] = policies[d]->act(result.observations[d], env.layout(d), rng);
      }
      result = env.step(actions);
      total += result.shared_reward;
      report.phase_steps[phase] += nd;
      for (std::size_t d = 0; d < nd; ++d) {
        const bool started = deliver[d] && result.info.accepted[d];
        if (started) {
          const auto k = static_cast<std::size_t>(result.info.executed[d].kind);
          ++report.action_counts[k];
          ++report.phase_counts[phase][k];
        }
        if (policies[d]->waits()) {
          if (result.info.accepted[d]) waiters[d].on_accepted(netsim::duration(result.info.executed[d].kind));
          deliver[d] = waiters[d].deliver();
        }
      }
    }
    report.episode_rewards.push_back(total);
    spdlog::debug("eval {} episode {} reward {:.2f}", to_string(kind), ep, total);
  }
  report.agent_steps = settings.episodes * settings.episode_length * nd;
  finish_statistics(report);
  return report;
}

EvalReport run_eval(const ExperimentConfig& config, AgentKind kind, const std::filesystem::path& checkpoint_dir) {
  const auto defended = config.topology.defended_indices();
  std::vector<std::unique_ptr<SegmentPolicy>> owned;
  for (std::size_t s : defended) {
    const auto& seg = config.topology.segments[s];
    switch (kind) {
      case AgentKind::Sleep: owned.push_back(make_sleep_policy()); break;
      case AgentKind::Random: owned.push_back(make_random_policy()); break;
      case AgentKind::TerlaSingle:
        owned.push_back(policy_from_checkpoint(load_checkpoint(checkpoint_path(checkpoint_dir, kind))));
        break;
      default:
        owned.push_back(policy_from_checkpoint(load_checkpoint(checkpoint_path(checkpoint_dir, kind, seg.id))));
    }
  }
  std::vector<SegmentPolicy*> policies;
  for (auto& p : owned) policies.push_back(p.get());
  return evaluate(kind, policies, config.topology, config.sim, config.eval);
}

EvalReport merge_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error("no reports to merge");
  EvalReport out;
  out.kind = reports.front().kind;
  out.settings = reports.front().settings;
  for (const auto& r : reports) {
    if (r.kind != out.kind || !(r.settings == out.settings)) {
      throw ConfigError("can only merge reports of one agent kind with identical evaluation settings");
    }
    out.episode_rewards.insert(out.episode_rewards.end(), r.episode_rewards.begin(), r.episode_rewards.end());
    out.agent_steps += r.agent_steps;
    for (std::size_t k = 0; k < netsim::kActionKindCount; ++k) {
      out.action_counts[k] += r.action_counts[k];
      for (std::size_t p = 0; p < kPhaseCount; ++p) out.phase_counts[p][k] += r.phase_counts[p][k];
    }
    for (std::size_t p = 0; p < kPhaseCount; ++p) out.phase_steps[p] += r.phase_steps[p];
  }
  finish_statistics(out);
  return out;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["agent"] = std::string(to_string(r.kind));
  j["episodes"] = r.settings.episodes;
  j["episode_length"] = r.settings.episode_length;
  j["seed"] = r.settings.seed;
  j["episode_rewards"] = r.episode_rewards;
  j["episode_mean_reward"] = r.mean;
  j["standard_deviation"] = r.stddev;
  j["relative_effectiveness"] = r.relative_effectiveness ? nlohmann::json(*r.relative_effectiveness) : nullptr;
  j["agent_steps"] = r.agent_steps;
  j["action_rate"] = r.action_rate();
  nlohmann::json counts, rates;
  for (std::size_t k = 0; k < netsim::kActionKindCount; ++k) {
    const auto kind = static_cast<netsim::ActionKind>(k);
    counts[std::string(netsim::to_string(kind))] = r.action_counts[k];
    rates[std::string(netsim::to_string(kind))] = r.action_type_rate(kind);
  }
  j["action_counts"] = counts;
  j["action_type_rates"] = rates;
  nlohmann::json phases = nlohmann::json::array();
  for (std::size_t p = 0; p < kPhaseCount; ++p) {
    nlohmann::json ph;
    ph["phase"] = phase_name(p);
    ph["agent_steps"] = r.phase_steps[p];
    ph["action_rate"] = r.phase_action_rate(p);
    nlohmann::json c;
    for (std::size_t k = 0; k < netsim::kActionKindCount; ++k)
      c[std::string(netsim::to_string(static_cast<netsim::ActionKind>(k)))] = r.phase_counts[p][k];
    ph["action_counts"] = c;
    phases.push_back(ph);
  }
  j["phases"] = phases;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.kind = parse_agent_kind(j.at("agent").get<std::string>());
    r.settings.episodes = j.at("episodes").get<std::size_t>();
    r.settings.episode_length = j.at("episode_length").get<std::size_t>();
    r.settings.seed = j.at("seed").get<std::uint64_t>();
    r.episode_rewards = j.at("episode_rewards").get<std::vector<double>>();
    r.mean = j.at("episode_mean_reward").get<double>();
    r.stddev = j.at("standard_deviation").get<double>();
    if (!j.at("relative_effectiveness").is_null()) r.relative_effectiveness = j.at("relative_effectiveness").get<int>();
    r.agent_steps = j.at("agent_steps").get<std::size_t>();
    for (std::size_t k = 0; k < netsim::kActionKindCount; ++k) {
      r.action_counts[k] =
          j.at("action_counts").at(std::string(netsim::to_string(static_cast<netsim::ActionKind>(k)))).get<std::size_t>();
    }
    const auto& phases = j.at("phases");
    if (phases.size() != kPhaseCount) throw ConfigError("report must list 3 phases");
    for (std::size_t p = 0; p < kPhaseCount; ++p) {
      r.phase_steps[p] = phases[p].at("agent_steps").get<std::size_t>();
      for (std::size_t k = 0; k < netsim::kActionKindCount; ++k) {
        r.phase_counts[p][k] = phases[p]
                                   .at("action_counts")
                                   .at(std::string(netsim::to_string(static_cast<netsim::ActionKind>(k))))
                                   .get<std::size_t>();
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::vector<ComparisonRow> compare(std::vector<EvalReport> reports) {
  if (reports.empty()) throw ConfigError("nothing to compare");
  for (const auto& r : reports) {
    if (!(r.settings == reports.front().settings)) {
      throw ConfigError("reports for " + std::string(to_string(reports.front().kind)) + " and " +
                        std::string(to_string(r.kind)) + " use different evaluation settings");
    }
  }
  std::optional<double> sleep;
  for (const auto& r : reports)
    if (r.kind == AgentKind::Sleep) sleep = r.mean;
  std::vector<ComparisonRow> rows;
  for (const auto& r : reports) {
    ComparisonRow row;
    row.kind = r.kind;
    row.mean = r.mean;
    row.stddev = r.stddev;
    row.action_rate = r.action_rate();
    row.relative_effectiveness = r.relative_effectiveness;
    if (sleep && *sleep < 0.0) row.relative_effectiveness = relative_effectiveness(r.mean, *sleep);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.mean > b.mean; });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "rank,agent,mean_reward,std,relative_effectiveness,action_rate\n";
  for (const auto& r : rows) {
    os << r.rank << ',' << to_string(r.kind) << ',' << r.mean << ',' << r.stddev << ',';
    if (r.relative_effectiveness) os << *r.relative_effectiveness;
    os << ',' << r.action_rate << '\n';
  }
  return os.str();
}

std::string comparison_text(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "rank" << std::setw(16) << "agent" << std::right << std::setw(12) << "mean"
     << std::setw(10) << "std" << std::setw(10) << "rel.eff" << std::setw(12) << "act.rate" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(6) << r.rank << std::setw(16) << to_string(r.kind) << std::right
       << std::setprecision(1) << std::setw(12) << r.mean << std::setw(10) << r.stddev << std::setw(10)
       << (r.relative_effectiveness ? std::to_string(*r.relative_effectiveness) + "%" : std::string("-"))
       << std::setprecision(3) << std::setw(12) << r.action_rate << '\n';
  }
  return os.str();
}

std::string action_histogram_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "agent,phase,action,count\n";
  for (const auto& r : reports) {
    for (std::size_t p = 0; p < kPhaseCount; ++p) {
      for (std::size_t k = 0; k < netsim::kActionKindCount; ++k) {
        const auto kind = static_cast<netsim::ActionKind>(k);
        if (kind == netsim::ActionKind::Sleep) continue;
        os << to_string(r.kind) << ',' << phase_name(p) << ',' << netsim::to_string(kind) << ','
           << r.phase_counts[p][k] << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace terla::harness
