#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "terla/error.hpp"
#include "terla/numeric/parameters.hpp"
#include "terla/policy/model.hpp"

namespace terla::policy {

struct Hyperparameters {
  double gamma = 0.97;
  double learning_rate = 1e-4;
  double entropy_coeff = 0.01;
  std::size_t rollout_fragment = 128;
  std::size_t train_batch = 2048;
  std::size_t episode_length = 500;
  std::size_t iterations = 500;
  double clip = 0.2;
  double gae_lambda = 0.95;
  std::size_t epochs = 8;
  std::size_t minibatch = 256;
  double vf_coeff = 0.5;
  double grad_clip = 0.5;
  // Rewards are multiplied by this before entering the value targets.
  double reward_scale = 0.01;
  std::vector<std::size_t> ppo_hidden{256, 256};

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("hyperparameters: " + m); };
    if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0,1]");
    if (!(clip > 0.0)) fail("clip must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must be in [0,1]");
    if (entropy_coeff < 0.0 || vf_coeff < 0.0) fail("loss coefficients must be non-negative");
    if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
    if (!(reward_scale > 0.0)) fail("reward_scale must be positive");
    if (rollout_fragment == 0 || train_batch == 0 || episode_length == 0 || iterations == 0 || epochs == 0 ||
        minibatch == 0)
      fail("sizes must be positive");
    if (ppo_hidden.empty()) fail("ppo_hidden must list at least one layer");
    for (auto w : ppo_hidden)
      if (w == 0) fail("ppo_hidden widths must be positive");
  }

  bool operator==(const Hyperparameters&) const = default;
};

inline nlohmann::json hyperparameters_to_json(const Hyperparameters& hp) {
  return {{"gamma", hp.gamma},
          {"learning_rate", hp.learning_rate},
          {"entropy_coeff", hp.entropy_coeff},
          {"rollout_fragment", hp.rollout_fragment},
          {"train_batch", hp.train_batch},
          {"episode_length", hp.episode_length},
          {"iterations", hp.iterations},
          {"clip", hp.clip},
          {"gae_lambda", hp.gae_lambda},
          {"epochs", hp.epochs},
          {"minibatch", hp.minibatch},
          {"vf_coeff", hp.vf_coeff},
          {"grad_clip", hp.grad_clip},
          {"reward_scale", hp.reward_scale},
          {"ppo_hidden", hp.ppo_hidden}};
}

// Missing keys keep the values of `base`; unknown keys are rejected.
inline Hyperparameters hyperparameters_from_json(const nlohmann::json& j, Hyperparameters base = {}) {
  if (!j.is_object()) throw ConfigError("hyperparameters must be a JSON object");
  auto known = hyperparameters_to_json(base);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError("unknown training key '" + it.key() + "'");
  }
  try {
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("gamma", base.gamma);
    read("learning_rate", base.learning_rate);
    read("entropy_coeff", base.entropy_coeff);
    read("rollout_fragment", base.rollout_fragment);
    read("train_batch", base.train_batch);
    read("episode_length", base.episode_length);
    read("iterations", base.iterations);
    read("clip", base.clip);
    read("gae_lambda", base.gae_lambda);
    read("epochs", base.epochs);
    read("minibatch", base.minibatch);
    read("vf_coeff", base.vf_coeff);
    read("grad_clip", base.grad_clip);
    read("reward_scale", base.reward_scale);
    read("ppo_hidden", base.ppo_hidden);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training block: ") + e.what());
  }
  base.validate();
  return base;
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;
};

// Generalised advantage estimates for one stream of consecutive steps.
// done[t] ends the episode after step t; `bootstrap` is the value of the state
// following the last step when that step is not terminal.
inline GaeResult gae_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                const std::vector<bool>& done, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || done.size() != n) throw DimensionError("gae inputs differ in length");
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_value = bootstrap;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double nonterminal = done[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * nonterminal - values[i];
    running = delta + gamma * lambda * nonterminal * running;
    out.advantages[i] = running;
    out.targets[i] = running + values[i];
    next_value = values[i];
  }
  return out;
}

template <typename Input>
struct Sample {
  Input input;
  std::size_t action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double advantage = 0.0;
  double target = 0.0;
};

// Steps of one agent stream within a rollout fragment. Advantages exist only
// after complete() has been called with the bootstrap value.
template <typename Input>
class RolloutBuffer {
 public:
  struct Step {
    Input input;
    std::size_t action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
    bool done = false;
  };

  void append(Step step) {
    if (complete_) throw Error("rollout fragment already completed");
    steps_.push_back(std::move(step));
  }

  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  bool is_complete() const { return complete_; }
  const std::vector<Step>& steps() const { return steps_; }

  void complete(double bootstrap, double gamma, double lambda) {
    std::vector<double> r, v;
    std::vector<bool> d;
    for (const auto& s : steps_) {
      r.push_back(s.reward);
      v.push_back(s.value);
      d.push_back(s.done);
    }
    gae_ = gae_advantages(r, v, d, bootstrap, gamma, lambda);
    complete_ = true;
  }

  const std::vector<double>& advantages() const {
    if (!complete_) throw Error("advantages requested before the fragment is complete");
    return gae_.advantages;
  }
  const std::vector<double>& targets() const {
    if (!complete_) throw Error("targets requested before the fragment is complete");
    return gae_.targets;
  }

  // Moves the completed steps into `batch` and resets the buffer.
  void drain_into(std::vector<Sample<Input>>& batch) {
    if (!complete_) throw Error("cannot drain an incomplete fragment");
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      auto& s = steps_[i];
      batch.push_back({std::move(s.input), s.action, s.log_prob, s.value, gae_.advantages[i], gae_.targets[i]});
    }
    steps_.clear();
    gae_ = {};
    complete_ = false;
  }

 private:
  std::vector<Step> steps_;
  GaeResult gae_;
  bool complete_ = false;
};

// Mean 0, std 1 over the batch.
template <typename Input>
void normalise_advantages(std::vector<Sample<Input>>& batch, double eps = 1e-8) {
  if (batch.empty()) return;
  double mean = 0.0;
  for (const auto& s : batch) mean += s.advantage;
  mean /= static_cast<double>(batch.size());
  double var = 0.0;
  for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(batch.size()));
  for (auto& s : batch) s.advantage = (s.advantage - mean) / (sd + eps);
}

template <typename T>
struct LossTerms {
  Var<T> total;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped surrogate + value regression - entropy bonus, averaged over rows.
template <typename T>
LossTerms<T> ppo_loss(Tape<T>& tape, const ModelOutput<T>& out, const std::vector<std::size_t>& actions,
                      const std::vector<double>& old_log_prob, const std::vector<double>& advantage,
                      const std::vector<double>& target, const Hyperparameters& hp) {
  const std::size_t n = actions.size();
  if (out.logits.rows() != n || old_log_prob.size() != n || advantage.size() != n || target.size() != n) {
    throw DimensionError("ppo_loss inputs differ in length");
  }
  auto column = [&](const std::vector<double>& v) {
    BasicTensor<T> t(numeric::Shape{n, 1});
    for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<T>(v[i]);
    return tape.constant(std::move(t));
  };
  const Var<T> logp_all = numeric::log_softmax(out.logits);
  const Var<T> logp = numeric::pick(logp_all, actions);
  const Var<T> ratio = numeric::exp(numeric::sub(logp, column(old_log_prob)));
  const Var<T> adv = column(advantage);
  const Var<T> surr1 = numeric::mul(ratio, adv);
  const T lo = static_cast<T>(1.0 - hp.clip), hi = static_cast<T>(1.0 + hp.clip);
  const Var<T> surr2 = numeric::mul(numeric::clamp(ratio, lo, hi), adv);
  const Var<T> policy_loss = numeric::scale(numeric::mean(numeric::minimum(surr1, surr2)), T{-1});
  const Var<T> value_loss = numeric::mean(numeric::square(numeric::sub(out.value, column(target))));
  const Var<T> probs = numeric::exp(logp_all);
  const Var<T> entropy =
      numeric::scale(numeric::sum(numeric::mul(probs, logp_all)), static_cast<T>(-1.0 / static_cast<double>(n)));

  LossTerms<T> terms;
  terms.total = numeric::add(numeric::add(policy_loss, numeric::scale(value_loss, static_cast<T>(hp.vf_coeff))),
                             numeric::scale(entropy, static_cast<T>(-hp.entropy_coeff)));
  terms.policy = static_cast<double>(policy_loss.value().item());
  terms.value = static_cast<double>(value_loss.value().item());
  terms.entropy = static_cast<double>(entropy.value().item());
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T r = ratio.value()[i];
    if (r < lo || r > hi) ++clipped;
  }
  terms.clip_fraction = n ? static_cast<double>(clipped) / static_cast<double>(n) : 0.0;
  return terms;
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  std::size_t minibatches = 0;
};

// Epochs of shuffled minibatch updates over one training batch. `forward`
// maps (tape, inputs) to a ModelOutput for those inputs. Advantages in the
// batch are normalised in place.
template <typename T, typename Input, typename Forward>
UpdateStats ppo_update(Forward&& forward, numeric::BasicAdam<T>& optimizer,
                       const std::vector<numeric::BasicParameter<T>*>& params, std::vector<Sample<Input>>& batch,
                       const Hyperparameters& hp, std::mt19937_64& rng) {
  UpdateStats stats;
  if (batch.empty()) return stats;
  normalise_advantages(batch);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = std::min(hp.minibatch, batch.size());
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t begin = 0; begin < order.size(); begin += mb) {
      const std::size_t end = std::min(order.size(), begin + mb);
      std::vector<const Input*> inputs;
      std::vector<std::size_t> actions;
      std::vector<double> old_lp, adv, target;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& s = batch[order[k]];
        inputs.push_back(&s.input);
        actions.push_back(s.action);
        old_lp.push_back(s.log_prob);
        adv.push_back(s.advantage);
        target.push_back(s.target);
      }
      Tape<T> tape;
      const ModelOutput<T> out = forward(tape, inputs);
      const LossTerms<T> terms = ppo_loss(tape, out, actions, old_lp, adv, target, hp);
      const double total = static_cast<double>(terms.total.value().item());
      if (!std::isfinite(total)) {
        throw RuntimeFailure("non-finite PPO loss (policy " + std::to_string(terms.policy) + ", value " +
                             std::to_string(terms.value) + ", entropy " + std::to_string(terms.entropy) +
                             ") at epoch " + std::to_string(epoch));
      }
      optimizer.zero_grad();
      tape.backward(terms.total);
      stats.grad_norm += numeric::clip_grad_norm(params, hp.grad_clip);
      optimizer.step();
      stats.policy_loss += terms.policy;
      stats.value_loss += terms.value;
      stats.entropy += terms.entropy;
      ++stats.minibatches;
    }
  }
  const double k = static_cast<double>(stats.minibatches);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.grad_norm /= k;
  return stats;
}

}  // namespace terla::policy
