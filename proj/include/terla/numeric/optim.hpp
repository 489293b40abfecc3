#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "terla/numeric/tape.hpp"

namespace terla::numeric {

struct AdamOptions {
  double learning_rate = 1.0e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1.0e-8;
};

// Adam with bias-corrected moments. Moment buffers follow the parameter list
// given at construction; the list must not change afterwards.
template <typename T>
class BasicAdam {
 public:
  BasicAdam(std::vector<BasicParameter<T>*> params, AdamOptions options = {})
      : params_(std::move(params)), options_(options) {
    for (auto* p : params_) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::int64_t step_count() const { return step_; }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++step_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& w = params_[k]->value();
      const auto& g = params_[k]->grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        const double mi = b1 * m[i] + (1.0 - b1) * gi;
        const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = options_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + options_.epsilon);
        w[i] = static_cast<T>(w[i] - update);
      }
    }
  }

 private:
  std::vector<BasicParameter<T>*> params_;
  AdamOptions options_;
  std::vector<BasicTensor<T>> m_, v_;
  std::int64_t step_ = 0;
};

using Adam = BasicAdam<float>;

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(const std::vector<BasicParameter<T>*>& params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params)
    for (T g : p->grad().data()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto* p : params)
      for (auto& g : p->grad().data()) g *= s;
  }
  return norm;
}

// Glorot-uniform fill for a [fan_in, fan_out] weight.
template <typename T>
BasicTensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng,
                              double gain = 1.0) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  BasicTensor<T> w(Shape{fan_in, fan_out});
  for (auto& v : w.data()) v = static_cast<T>(dist(rng));
  return w;
}

}  // namespace terla::numeric
