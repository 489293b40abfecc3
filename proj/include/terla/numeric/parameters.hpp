#pragma once

#include <deque>
#include <random>
#include <string>
#include <vector>

#include "terla/numeric/ops.hpp"
#include "terla/numeric/optim.hpp"

namespace terla::numeric {

// Owns named parameters at stable addresses, in registration order.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  BasicParameter<T>& add(std::string name, BasicTensor<T> value) {
    for (const auto& p : params_) {
      if (p.name() == name) throw Error("duplicate parameter name '" + name + "'");
    }
    params_.emplace_back(std::move(name), std::move(value));
    return params_.back();
  }

  std::vector<BasicParameter<T>*> list() {
    std::vector<BasicParameter<T>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

  std::vector<const BasicParameter<T>*> list() const {
    std::vector<const BasicParameter<T>*> out;
    for (const auto& p : params_) out.push_back(&p);
    return out;
  }

  BasicParameter<T>* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name() == name) return &p;
    return nullptr;
  }

  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value().size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::deque<BasicParameter<T>> params_;
};

// Dense layer y = x W + b with W stored [in, out].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng, double gain = 1.0)
      : weight_(&store.add(name + ".weight", xavier_uniform<T>(in, out, rng, gain))),
        bias_(&store.add(name + ".bias", BasicTensor<T>(Shape{out}))) {}

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const {
    return linear(x, tape.parameter(*weight_), tape.parameter(*bias_));
  }

  std::size_t in_features() const { return weight_->shape()[0]; }
  std::size_t out_features() const { return weight_->shape()[1]; }
  BasicParameter<T>& weight() { return *weight_; }
  BasicParameter<T>& bias() { return *bias_; }

 private:
  BasicParameter<T>* weight_ = nullptr;
  BasicParameter<T>* bias_ = nullptr;
};

}  // namespace terla::numeric
