#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "terla/harness/config.hpp"
#include "terla/harness/policies.hpp"
#include "terla/netsim/types.hpp"

namespace terla::harness {

inline constexpr std::size_t kPhaseCount = 3;

struct EvalReport {
  AgentKind kind = AgentKind::Sleep;
  EvalSettings settings;
  std::vector<double> episode_rewards;  // total shared reward per episode
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  std::optional<int> relative_effectiveness;
  std::size_t agent_steps = 0;  // episodes x length x defended segments
  // Actions the agents started, by kind; busy-converted steps are excluded.
  std::array<std::size_t, netsim::kActionKindCount> action_counts{};
  std::array<std::array<std::size_t, netsim::kActionKindCount>, kPhaseCount> phase_counts{};
  std::array<std::size_t, kPhaseCount> phase_steps{};

  // Analyse, Remove, Restore and DeployDecoy starts per agent-step.
  double action_rate() const;
  double action_type_rate(netsim::ActionKind kind) const;
  double phase_action_rate(std::size_t phase) const;
};

// 100 * (r - r_sleep) / |r_sleep| rounded to the nearest integer.
// Throws Error when r_sleep >= 0, where the ratio has no meaning.
int relative_effectiveness(double r, double r_sleep);

// Greedy rollouts of one policy per defended segment on the shared reward.
// Episode i is seeded with settings.seed + i.
EvalReport evaluate(AgentKind kind, const std::vector<SegmentPolicy*>& policies,
                    const netsim::NetworkTopology& topology, netsim::SimConfig sim, const EvalSettings& settings);

// Builds the policies for `kind` (loading checkpoints from checkpoint_dir for
// trained kinds) and evaluates them on the configured topology.
EvalReport run_eval(const ExperimentConfig& config, AgentKind kind, const std::filesystem::path& checkpoint_dir);

// Pools reports of one agent kind evaluated with the same settings, e.g. one
// per training seed. Episode rewards are concatenated and counts summed.
EvalReport merge_reports(const std::vector<EvalReport>& reports);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

struct ComparisonRow {
  std::size_t rank = 0;  // 1 = highest mean reward
  AgentKind kind = AgentKind::Sleep;
  double mean = 0.0;
  double stddev = 0.0;
  std::optional<int> relative_effectiveness;
  double action_rate = 0.0;
};

// Ranks reports by mean reward. Relative effectiveness is filled from the
// sleep report when one is present. Throws ConfigError when the reports were
// produced under different evaluation settings.
std::vector<ComparisonRow> compare(std::vector<EvalReport> reports);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_text(const std::vector<ComparisonRow>& rows);
// agent,phase,action,count over the non-sleep actions of every report.
std::string action_histogram_csv(const std::vector<EvalReport>& reports);

}  // namespace terla::harness
