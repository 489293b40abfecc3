#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "terla/numeric.hpp"

namespace terla::testing {

using DTensor = numeric::BasicTensor<double>;
using DVar = numeric::Var<double>;
using DTape = numeric::Tape<double>;

inline DTensor random_tensor(numeric::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DTensor t(std::move(shape));
  for (auto& x : t.storage()) x = u(rng);
  return t;
}

// Like random_tensor but keeps every entry at least `gap` away from zero, so
// kinked functions (relu, clamp at 0) stay differentiable under the probe.
inline DTensor random_away_from_zero(numeric::Shape shape, std::mt19937_64& rng, double gap = 0.1) {
  std::uniform_real_distribution<double> u(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  DTensor t(std::move(shape));
  for (auto& x : t.storage()) x = sign(rng) ? u(rng) : -u(rng);
  return t;
}

using ScalarFn = std::function<DVar(DTape&, const std::vector<DVar>&)>;

// Largest norm-relative error between taped gradients and central finite
// differences over all inputs.
inline double gradient_error(const ScalarFn& f, const std::vector<DTensor>& inputs, double h = 1e-4) {
  DTape tape;
  std::vector<DVar> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  DVar loss = f(tape, vars);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const DTensor analytic = tape.grad(vars[k].id());
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<DTensor> probe = inputs;
        probe[k][i] += delta;
        DTape t(false);
        std::vector<DVar> pv;
        for (const auto& x : probe) pv.push_back(t.constant(x));
        return f(t, pv).value().item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2 * h);
      diff += (numeric - analytic[i]) * (numeric - analytic[i]);
      scale += std::max(numeric * numeric, analytic[i] * analytic[i]);
    }
    if (scale > 1e-20) worst = std::max(worst, std::sqrt(diff / scale));
  }
  return worst;
}

}  // namespace terla::testing
