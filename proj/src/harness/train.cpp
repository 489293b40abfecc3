#include "terla/harness/train.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <spdlog/spdlog.h>

#include "terla/error.hpp"
#include "terla/harness/policies.hpp"
#include "terla/netsim/flat.hpp"
#include "terla/wrapper/wrapper.hpp"

namespace terla::harness {

namespace {

using policy::RolloutBuffer;
using policy::Sample;

template <typename Net>
struct Learner {
  using Input = typename Net::Input;
  std::string segment_id;
  std::unique_ptr<Net> net;
  std::unique_ptr<numeric::Adam> optimizer;
  std::vector<Sample<Input>> batch;
  nlohmann::json network_spec;
  std::vector<TrainStats> stats;
  std::vector<double> finished;  // training-reward totals of episodes finished this iteration
};

template <typename Net>
struct Stream {
  using Input = typename Net::Input;
  std::size_t learner = 0;
  RolloutBuffer<Input> buffer;
  std::optional<typename RolloutBuffer<Input>::Step> pending;
  wrapper::ActionWaiter waiter;
  wrapper::ShapedReward shaped;
  bool deliver = true;
  double episode_reward = 0.0;
};

// Adapts a network type to the environment: observation encoding and the
// mapping from network outputs to environment actions.
struct TerlaAdapter {
  using Net = TerlaNet;
  obsgraph::GraphSchema schema;
  Net::Input input(const netsim::SegmentObservation& obs, const netsim::SegmentLayout& layout) const {
    return obsgraph::observation_to_graph(obs, layout, schema);
  }
  netsim::EnvAction action(std::size_t a, const netsim::SegmentObservation& obs,
                           const netsim::SegmentLayout& layout) const {
    return wrapper::target_action(wrapper::terla_action(a), obs, layout);
  }
};

struct FlatAdapter {
  using Net = FlatNet;
  Net::Input input(const netsim::SegmentObservation& obs, const netsim::SegmentLayout&) const {
    return netsim::flat_observation(obs);
  }
  netsim::EnvAction action(std::size_t a, const netsim::SegmentObservation&,
                           const netsim::SegmentLayout& layout) const {
    return netsim::decode_flat_action(a, layout);
  }
};

std::uint64_t episode_seed(std::uint64_t seed, std::size_t episode) {
  return seed * 1000003ULL + 7919ULL * episode + 1;
}

double mean_or(const std::vector<double>& v, double fallback) {
  if (v.empty()) return fallback;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <typename Adapter>
TrainResult train_with(const ExperimentConfig& config, AgentKind kind, std::uint64_t seed,
                       const TrainOptions& options, const Adapter& adapter,
                       const std::function<std::unique_ptr<typename Adapter::Net>(
                           const netsim::SegmentLayout&, std::mt19937_64&, nlohmann::json&)>& make_net) {
  using Net = typename Adapter::Net;
  const auto& hp = config.hp;
  hp.validate();
  netsim::SimConfig sim = config.sim;
  sim.episode_length = static_cast<int>(hp.episode_length);
  netsim::Simulator env(config.topology, sim);
  const std::size_t nd = env.defended_count();
  const bool waiting = uses_action_waiting(kind);
  const bool shaped = uses_shaped_reward(kind);

  std::size_t episode = 0;
  auto result = env.reset(episode_seed(seed, episode));

  std::vector<Learner<Net>> learners(shares_network(kind) ? 1 : nd);
  for (std::size_t l = 0; l < learners.size(); ++l) {
    auto& learner = learners[l];
    std::mt19937_64 init(seed + 101 * (l + 1));
    learner.segment_id = shares_network(kind) ? "" : env.defended_segment(l).id;
    learner.net = make_net(env.layout(l), init, learner.network_spec);
    learner.optimizer = std::make_unique<numeric::Adam>(learner.net->parameters().list(),
                                                        numeric::AdamOptions{hp.learning_rate});
  }
  std::vector<Stream<Net>> streams(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    streams[d].learner = shares_network(kind) ? 0 : d;
    streams[d].shaped.reset(result.segment_health[d]);
  }

  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  TrainResult out;
  std::size_t total_steps = 0;
  double episode_shared = 0.0;
  double last_mean = 0.0;
  std::size_t partial_steps = 0;

  auto write_outputs = [&]() {
    if (!options.output_dir) return;
    std::filesystem::create_directories(*options.output_dir);
    out.checkpoint_files.clear();
    for (const auto& lr : out.learners) {
      const auto path = checkpoint_path(*options.output_dir, kind, lr.segment_id);
      save_checkpoint(path, lr.checkpoint);
      out.checkpoint_files.push_back(path);
    }
    // train_stats.csv belongs to the latest run in the directory; the
    // per-kind and per-segment files survive runs of other kinds.
    const std::string prefix = "train_stats_" + std::string(to_string(kind));
    std::ofstream(*options.output_dir / "train_stats.csv") << train_stats_csv(out.stats);
    std::ofstream(*options.output_dir / (prefix + ".csv")) << train_stats_csv(out.stats);
    for (const auto& lr : out.learners) {
      if (lr.segment_id.empty()) continue;
      std::ofstream(*options.output_dir / (prefix + "_" + lr.segment_id + ".csv")) << train_stats_csv(lr.stats);
    }
  };

  for (std::size_t it = 0; it < hp.iterations; ++it) {
    std::vector<double> finished_shared;
    std::size_t collected = 0;
    while (collected < hp.train_batch) {
      for (std::size_t f = 0; f < hp.rollout_fragment; ++f) {
        std::vector<netsim::EnvAction> actions(nd);
        for (std::size_t d = 0; d < nd; ++d) {
          auto& s = streams[d];
          if (!s.deliver) continue;
          const auto& layout = env.layout(d);
          auto input = adapter.input(result.observations[d], layout);
          numeric::Tape<float> tape(false);
          const auto mo = learners[s.learner].net->forward(tape, {&input});
          const auto [a, logp] = policy::sample_action(mo.logits.value(), 0, rng);
          actions[d] = adapter.action(a, result.observations[d], layout);
          if (s.pending) s.buffer.append(std::move(*s.pending));
          s.pending.emplace();
          s.pending->input = std::move(input);
          s.pending->action = a;
          s.pending->log_prob = logp;
          s.pending->value = mo.value.value()[0];
        }
        result = env.step(actions);
        ++total_steps;
        ++collected;
        episode_shared += result.shared_reward;
        ++partial_steps;
        for (std::size_t d = 0; d < nd; ++d) {
          auto& s = streams[d];
          const double r = shaped ? s.shaped(result.segment_health[d]) : result.shared_reward;
          s.episode_reward += r;
          if (s.pending) s.pending->reward += r * hp.reward_scale;
          if (waiting) {
            if (result.info.accepted[d]) s.waiter.on_accepted(netsim::duration(result.info.executed[d].kind));
            s.deliver = s.waiter.deliver();
          }
        }
        if (result.done) {
          finished_shared.push_back(episode_shared);
          episode_shared = 0.0;
          partial_steps = 0;
          result = env.reset(episode_seed(seed, ++episode));
          for (std::size_t d = 0; d < nd; ++d) {
            auto& s = streams[d];
            if (s.pending) {
              s.pending->done = true;
              s.buffer.append(std::move(*s.pending));
              s.pending.reset();
            }
            learners[s.learner].finished.push_back(s.episode_reward);
            s.episode_reward = 0.0;
            s.waiter.reset();
            s.deliver = true;
            s.shaped.reset(result.segment_health[d]);
          }
        }
      }
      for (auto& s : streams) {
        s.buffer.complete(s.pending ? s.pending->value : 0.0, hp.gamma, hp.gae_lambda);
        s.buffer.drain_into(learners[s.learner].batch);
      }
    }

    TrainStats total;
    total.iteration = it + 1;
    total.steps = total_steps;
    // Without a finished episode, extrapolate the running one.
    const double fallback =
        out.stats.empty() && partial_steps > 0
            ? episode_shared / static_cast<double>(partial_steps) * static_cast<double>(hp.episode_length)
            : last_mean;
    total.mean_episode_reward = mean_or(finished_shared, fallback);
    last_mean = total.mean_episode_reward;

    out.learners.resize(learners.size());
    for (std::size_t l = 0; l < learners.size(); ++l) {
      auto& learner = learners[l];
      Net& net = *learner.net;
      auto forward = [&net](numeric::Tape<float>& tape, const std::vector<const typename Net::Input*>& in) {
        return net.forward(tape, in);
      };
      const auto upd = policy::ppo_update(forward, *learner.optimizer, learner.net->parameters().list(),
                                          learner.batch, hp, rng);
      learner.batch.clear();
      TrainStats ls;
      ls.iteration = it + 1;
      ls.steps = total_steps;
      ls.mean_episode_reward =
          mean_or(learner.finished, learner.stats.empty() ? 0.0 : learner.stats.back().mean_episode_reward);
      learner.finished.clear();
      ls.policy_loss = upd.policy_loss;
      ls.value_loss = upd.value_loss;
      ls.entropy = upd.entropy;
      learner.stats.push_back(ls);
      total.policy_loss += upd.policy_loss / static_cast<double>(learners.size());
      total.value_loss += upd.value_loss / static_cast<double>(learners.size());
      total.entropy += upd.entropy / static_cast<double>(learners.size());

      auto& lr = out.learners[l];
      lr.segment_id = learner.segment_id;
      lr.stats = learner.stats;
      lr.checkpoint.metadata = {{"kind", std::string(to_string(kind))},
                                {"segment", learner.segment_id.empty() ? "*" : learner.segment_id},
                                {"schema", obsgraph::schema_to_json(config.schema)},
                                {"network", learner.network_spec},
                                {"hyperparameters", policy::hyperparameters_to_json(hp)},
                                {"seed", seed},
                                {"iteration", it + 1},
                                {"steps", total_steps}};
      lr.checkpoint.tensors = capture_parameters(learner.net->parameters());
    }
    out.stats.push_back(total);
    spdlog::info("{} iteration {}/{}: steps {} mean episode reward {:.2f} policy {:.4f} value {:.4f} entropy {:.4f}",
                 to_string(kind), it + 1, hp.iterations, total_steps, total.mean_episode_reward, total.policy_loss,
                 total.value_loss, total.entropy);
    write_outputs();
    if (options.on_iteration) options.on_iteration(total);
  }
  return out;
}

}  // namespace

TrainResult run_train(const ExperimentConfig& config, AgentKind kind, std::uint64_t seed,
                      const TrainOptions& options) {
  if (!is_trainable(kind)) throw ConfigError("agent kind '" + std::string(to_string(kind)) + "' is not trainable");
  if (uses_graph(kind)) {
    TerlaAdapter adapter{config.schema};
    return train_with<TerlaAdapter>(
        config, kind, seed, options, adapter,
        [&](const netsim::SegmentLayout&, std::mt19937_64& rng, nlohmann::json& spec) {
          spec = terla_network_spec(config.schema, config.hgt, wrapper::kTerlaActionCount);
          return std::make_unique<TerlaNet>(config.schema, wrapper::kTerlaActionCount, rng, config.hgt);
        });
  }
  return train_with<FlatAdapter>(
      config, kind, seed, options, FlatAdapter{},
      [&](const netsim::SegmentLayout& layout, std::mt19937_64& rng, nlohmann::json& spec) {
        const auto in = netsim::flat_observation_width(layout);
        const auto actions = netsim::flat_action_count(layout);
        spec = flat_network_spec(in, config.hp.ppo_hidden, actions);
        return std::make_unique<FlatNet>(in, config.hp.ppo_hidden, actions, rng);
      });
}

std::string train_stats_csv(const std::vector<TrainStats>& stats) {
  std::ostringstream os;
  os << "iteration,steps,mean_episode_reward,policy_loss,value_loss,entropy\n";
  os.precision(10);
  for (const auto& s : stats) {
    os << s.iteration << ',' << s.steps << ',' << s.mean_episode_reward << ',' << s.policy_loss << ','
       << s.value_loss << ',' << s.entropy << '\n';
  }
  return os.str();
}

}  // namespace terla::harness
