#pragma once

#include <memory>
#include <random>
#include <vector>

#include "terla/encoder/encoder.hpp"
#include "terla/policy/model.hpp"

namespace terla::policy {

// Graph encoder and PPO model trained end to end. The model's hidden width
// is twice the encoder width.
template <typename T>
class TerlaNetwork {
 public:
  using Input = obsgraph::HeteroGraph;

  TerlaNetwork(const obsgraph::GraphSchema& schema, std::size_t action_count, std::mt19937_64& rng,
               encoder::HgtOptions hgt = {})
      : store_(std::make_unique<ParameterStore<T>>()),
        encoder_(*store_, schema, {encoder::encoder_hidden_size(schema, action_count), hgt}, rng),
        model_(*store_, encoder_.width(), {2 * encoder_.width(), 2 * encoder_.width()}, action_count, rng) {}

  ModelOutput<T> forward(Tape<T>& tape, const std::vector<const Input*>& inputs) const {
    return model_.forward(tape, encoder_.encode(tape, obsgraph::make_batch(inputs)));
  }

  ParameterStore<T>& parameters() { return *store_; }
  const ParameterStore<T>& parameters() const { return *store_; }
  const encoder::Encoder<T>& encoder() const { return encoder_; }
  const PpoModel<T>& model() const { return model_; }
  PpoModel<T>& model() { return model_; }
  std::size_t action_count() const { return model_.action_count(); }

 private:
  std::unique_ptr<ParameterStore<T>> store_;
  encoder::Encoder<T> encoder_;
  PpoModel<T> model_;
};

// Vanilla PPO over the flat observation vector.
template <typename T>
class FlatNetwork {
 public:
  using Input = std::vector<float>;

  FlatNetwork(std::size_t input_width, std::vector<std::size_t> hidden, std::size_t action_count,
              std::mt19937_64& rng)
      : store_(std::make_unique<ParameterStore<T>>()),
        model_(*store_, input_width, std::move(hidden), action_count, rng) {}

  ModelOutput<T> forward(Tape<T>& tape, const std::vector<const Input*>& inputs) const {
    const std::size_t w = model_.input_width();
    BasicTensor<T> x(numeric::Shape{inputs.size(), w});
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (inputs[i]->size() != w) {
        throw DimensionError("flat observation width " + std::to_string(inputs[i]->size()) + " does not match " +
                             std::to_string(w));
      }
      for (std::size_t c = 0; c < w; ++c) x(i, c) = static_cast<T>((*inputs[i])[c]);
    }
    return model_.forward(tape, tape.constant(std::move(x)));
  }

  ParameterStore<T>& parameters() { return *store_; }
  const ParameterStore<T>& parameters() const { return *store_; }
  const PpoModel<T>& model() const { return model_; }
  PpoModel<T>& model() { return model_; }
  std::size_t action_count() const { return model_.action_count(); }

 private:
  std::unique_ptr<ParameterStore<T>> store_;
  PpoModel<T> model_;
};

}  // namespace terla::policy
