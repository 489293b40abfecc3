#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "terla/error.hpp"
#include "terla/numeric/parameters.hpp"
#include "terla/random.hpp"

namespace terla::policy {

using numeric::BasicTensor;
using numeric::Linear;
using numeric::ParameterStore;
using numeric::Tape;
using numeric::Var;

template <typename T>
struct ModelOutput {
  Var<T> logits;  // [batch, actions]
  Var<T> value;   // [batch, 1]
};

// Fully-connected ReLU torso with separate policy and value heads.
template <typename T>
class PpoModel {
 public:
  PpoModel(ParameterStore<T>& store, std::size_t input_width, std::vector<std::size_t> hidden,
           std::size_t action_count, std::mt19937_64& rng, const std::string& prefix = "model")
      : input_(input_width), hidden_widths_(hidden), actions_(action_count) {
    if (input_width == 0 || action_count == 0) throw DimensionError("model needs non-zero input and action widths");
    std::size_t in = input_width;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      torso_.emplace_back(store, prefix + ".fc" + std::to_string(i), in, hidden[i], rng);
      in = hidden[i];
    }
    // Small policy-head weights keep the initial action distribution near uniform.
    policy_head_ = Linear<T>(store, prefix + ".policy", in, action_count, rng, 0.01);
    value_head_ = Linear<T>(store, prefix + ".value", in, 1, rng);
  }

  std::size_t input_width() const { return input_; }
  std::size_t action_count() const { return actions_; }
  const std::vector<std::size_t>& hidden_widths() const { return hidden_widths_; }

  void zero_heads() {
    policy_head_.weight().value().fill(T{});
    policy_head_.bias().value().fill(T{});
    value_head_.weight().value().fill(T{});
    value_head_.bias().value().fill(T{});
  }

  ModelOutput<T> forward(Tape<T>& tape, const Var<T>& input) const {
    if (input.cols() != input_) {
      throw DimensionError("model input width " + std::to_string(input.cols()) + " does not match " +
                           std::to_string(input_));
    }
    Var<T> h = input;
    for (const auto& layer : torso_) h = numeric::relu(layer(tape, h));
    return {policy_head_(tape, h), value_head_(tape, h)};
  }

 private:
  std::size_t input_;
  std::vector<std::size_t> hidden_widths_;
  std::size_t actions_;
  std::vector<Linear<T>> torso_;
  Linear<T> policy_head_;
  Linear<T> value_head_;
};

// Index of the largest logit, first one on ties.
template <typename T>
std::size_t greedy_action(const BasicTensor<T>& logits, std::size_t row = 0) {
  const std::size_t n = logits.cols();
  std::size_t best = 0;
  for (std::size_t a = 1; a < n; ++a)
    if (logits(row, a) > logits(row, best)) best = a;
  return best;
}

// Samples from softmax(logits) and returns (action, log-probability).
template <typename T>
std::pair<std::size_t, double> sample_action(const BasicTensor<T>& logits, std::size_t row, std::mt19937_64& rng) {
  const std::size_t n = logits.cols();
  double hi = logits(row, 0);
  for (std::size_t a = 1; a < n; ++a) hi = std::max(hi, static_cast<double>(logits(row, a)));
  std::vector<double> p(n);
  double z = 0.0;
  for (std::size_t a = 0; a < n; ++a) z += p[a] = std::exp(static_cast<double>(logits(row, a)) - hi);
  double u = uniform01(rng) * z;
  std::size_t pick = n - 1;
  for (std::size_t a = 0; a < n; ++a) {
    if (u < p[a]) {
      pick = a;
      break;
    }
    u -= p[a];
  }
  return {pick, std::log(p[pick] / z)};
}

}  // namespace terla::policy
