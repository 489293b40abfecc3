#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "terla/harness/checkpoint.hpp"
#include "terla/harness/config.hpp"

namespace terla::harness {

struct TrainStats {
  std::size_t iteration = 0;
  std::size_t steps = 0;  // environment steps collected so far
  double mean_episode_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct LearnerResult {
  std::string segment_id;  // empty for a network shared by all segments
  Checkpoint checkpoint;
  std::vector<TrainStats> stats;  // mean_episode_reward is the learner's own training reward
};

struct TrainResult {
  std::vector<LearnerResult> learners;
  std::vector<TrainStats> stats;  // mean_episode_reward is the total shared reward per episode
  std::vector<std::filesystem::path> checkpoint_files;
};

struct TrainOptions {
  // When set, checkpoints and CSV stats are rewritten after every iteration.
  std::optional<std::filesystem::path> output_dir;
  std::function<void(const TrainStats&)> on_iteration;
};

// Trains the agents of a trainable kind on the configured topology. Throws
// ConfigError for Sleep and Random.
TrainResult run_train(const ExperimentConfig& config, AgentKind kind, std::uint64_t seed,
                      const TrainOptions& options = {});

std::string train_stats_csv(const std::vector<TrainStats>& stats);

}  // namespace terla::harness
