#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "terla/error.hpp"
#include "terla/policy/networks.hpp"
#include "terla/policy/ppo.hpp"
#include "test_util.hpp"

namespace terla::policy {
namespace {

using testing::DTensor;
using testing::DVar;
using testing::DTape;

TEST(PpoModel, ZeroHeadsGiveUniformPolicy) {
  std::mt19937_64 rng(1);
  ParameterStore<double> store;
  PpoModel<double> model(store, 7, {16, 16}, 5, rng);
  model.zero_heads();
  DTape tape(false);
  const auto out = model.forward(tape, tape.constant(testing::random_tensor({3, 7}, rng)));
  const auto p = numeric::softmax(out.logits).value();
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], 0.2, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out.value.value()[i], 0.0);
}

TEST(PpoModel, InitialPolicyIsNearUniform) {
  std::mt19937_64 rng(2);
  ParameterStore<float> store;
  PpoModel<float> model(store, 7, {256, 256}, 5, rng);
  Tape<float> tape(false);
  const auto p = numeric::softmax(model.forward(tape, tape.constant(numeric::Tensor({1, 7}, 1.0f))).logits).value();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(p[i], 0.2, 0.02);
}

TEST(PpoModel, RejectsWrongInputWidth) {
  std::mt19937_64 rng(3);
  ParameterStore<float> store;
  PpoModel<float> model(store, 7, {8}, 5, rng);
  Tape<float> tape(false);
  EXPECT_THROW(model.forward(tape, tape.constant(numeric::Tensor({1, 6}))), DimensionError);
}

TEST(PpoModel, InputGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  ParameterStore<double> store;
  PpoModel<double> model(store, 6, {12, 9}, 5, rng);
  const DTensor w = testing::random_tensor({4, 5}, rng);
  const double err = testing::gradient_error(
      [&](DTape& tape, const std::vector<DVar>& in) {
        const auto out = model.forward(tape, in[0]);
        return numeric::add(numeric::sum(numeric::mul(out.logits, tape.constant(w))), numeric::sum(out.value));
      },
      {testing::random_away_from_zero({4, 6}, rng)});
  EXPECT_LT(err, 1e-6);
}

TEST(PpoModel, SameSeedSameParameters) {
  std::mt19937_64 a(5), b(5);
  ParameterStore<float> sa, sb;
  PpoModel<float> ma(sa, 7, {32}, 5, a), mb(sb, 7, {32}, 5, b);
  const auto la = sa.list(), lb = sb.list();
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la[i]->value(), lb[i]->value());
}

TEST(ActionSelection, GreedyTakesFirstMaximum) {
  const auto logits = numeric::Tensor::matrix(2, 4, {0, 3, 3, 1, -1, -2, -1, -5});
  EXPECT_EQ(greedy_action(logits, 0), 1u);
  EXPECT_EQ(greedy_action(logits, 1), 0u);
}

TEST(ActionSelection, SamplingFollowsSoftmax) {
  const auto logits = numeric::Tensor::matrix(1, 3, {0.0f, 1.0f, 2.0f});
  const double z = 1 + std::exp(1.0) + std::exp(2.0);
  const double p[3] = {1 / z, std::exp(1.0) / z, std::exp(2.0) / z};
  std::mt19937_64 rng(6);
  const int n = 60000;
  int count[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const auto [a, lp] = sample_action(logits, 0, rng);
    ASSERT_LT(a, 3u);
    EXPECT_NEAR(lp, std::log(p[a]), 1e-6);
    ++count[a];
  }
  for (int a = 0; a < 3; ++a) {
    const double se = std::sqrt(p[a] * (1 - p[a]) / n);
    EXPECT_NEAR(count[a] / static_cast<double>(n), p[a], 5 * se);
  }
}

// Advantage as the discounted sum of TD errors, cut at episode ends.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<bool>& done, double bootstrap, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> delta(n), adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : bootstrap;
    delta[t] = r[t] + (done[t] ? 0.0 : g * next) - v[t];
  }
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += w * delta[k];
      if (done[k]) break;
      w *= g * l;
    }
  }
  return adv;
}

TEST(Gae, LambdaZeroIsOneStepTdError) {
  const std::vector<double> r{1, -2, 0.5}, v{0.3, 0.1, -0.4};
  const auto out = gae_advantages(r, v, {false, false, false}, 2.0, 0.9, 0.0);
  EXPECT_NEAR(out.advantages[0], 1 + 0.9 * 0.1 - 0.3, 1e-12);
  EXPECT_NEAR(out.advantages[1], -2 + 0.9 * -0.4 - 0.1, 1e-12);
  EXPECT_NEAR(out.advantages[2], 0.5 + 0.9 * 2.0 + 0.4, 1e-12);
}

TEST(Gae, GammaZeroIsRewardMinusValue) {
  const std::vector<double> r{1, -2, 0.5}, v{0.3, 0.1, -0.4};
  const auto out = gae_advantages(r, v, {false, true, false}, 7.0, 0.0, 0.95);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_NEAR(out.advantages[t], r[t] - v[t], 1e-12);
    EXPECT_NEAR(out.targets[t], r[t], 1e-12);
  }
}

TEST(Gae, MatchesDiscountedTdSumWithEpisodeEnds) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution end(0.15);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> r(n), v(n);
    std::vector<bool> d(n);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = nd(rng);
      v[t] = nd(rng);
      d[t] = end(rng);
    }
    const double boot = nd(rng);
    const auto out = gae_advantages(r, v, d, boot, 0.97, 0.95);
    const auto expect = gae_oracle(r, v, d, boot, 0.97, 0.95);
    for (std::size_t t = 0; t < n; ++t) {
      EXPECT_NEAR(out.advantages[t], expect[t], 1e-9);
      EXPECT_NEAR(out.targets[t], expect[t] + v[t], 1e-9);
    }
  }
}

TEST(Gae, TerminalStepIgnoresBootstrap) {
  const auto a = gae_advantages({1.0}, {0.5}, {true}, 100.0, 0.97, 0.95);
  EXPECT_NEAR(a.advantages[0], 0.5, 1e-12);
}

TEST(RolloutBuffer, AdvantagesOnlyAfterCompletion) {
  RolloutBuffer<int> buf;
  buf.append({1, 0, -1.0, 0.5, 1.0, false});
  buf.append({2, 1, -1.0, 0.2, 0.0, true});
  EXPECT_THROW(buf.advantages(), Error);
  std::vector<Sample<int>> batch;
  EXPECT_THROW(buf.drain_into(batch), Error);
  buf.complete(0.0, 0.97, 0.95);
  EXPECT_THROW(buf.append({3, 0, 0, 0, 0, false}), Error);
  buf.drain_into(batch);
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_TRUE(buf.empty());
  EXPECT_FALSE(buf.is_complete());
  EXPECT_EQ(batch[1].input, 2);
  EXPECT_NEAR(batch[1].advantage, -0.2, 1e-12);
  EXPECT_NEAR(batch[0].advantage, 1.0 + 0.97 * 0.2 - 0.5 + 0.97 * 0.95 * -0.2, 1e-12);
}

TEST(RolloutBuffer, NormalisedAdvantagesHaveUnitMoments) {
  std::vector<Sample<int>> batch;
  for (int i = 0; i < 10; ++i) batch.push_back({i, 0, 0, 0, static_cast<double>(i * i), 0});
  normalise_advantages(batch);
  double m = 0, s = 0;
  for (const auto& x : batch) m += x.advantage;
  for (const auto& x : batch) s += x.advantage * x.advantage;
  EXPECT_NEAR(m / 10, 0.0, 1e-12);
  EXPECT_NEAR(s / 10, 1.0, 1e-6);
}

struct LossFixture {
  DTape tape;
  ModelOutput<double> out;
  LossFixture(const DTensor& logits, const DTensor& value)
      : out{tape.variable(logits), tape.variable(value)} {}
};

TEST(PpoLoss, ZeroAdvantageLeavesOnlyEntropyGradient) {
  std::mt19937_64 rng(8);
  const DTensor logits = testing::random_tensor({6, 5}, rng);
  Hyperparameters hp;
  hp.entropy_coeff = 0.0;
  hp.vf_coeff = 0.0;
  LossFixture f(logits, DTensor({6, 1}));
  const std::vector<double> zero(6, 0.0), lp(6, -1.6);
  const auto terms = ppo_loss(f.tape, f.out, {0, 1, 2, 3, 4, 0}, lp, zero, zero, hp);
  f.tape.backward(terms.total);
  const auto& g = f.tape.grad(f.out.logits.id());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], 0.0);
}

TEST(PpoLoss, ClipsLargeRatioForPositiveAdvantage) {
  Hyperparameters hp;
  hp.entropy_coeff = 0.0;
  hp.vf_coeff = 0.0;
  // Uniform over 5 actions: log p = -log 5. Old log prob set so that ratio = 2.
  const double old_lp = -std::log(5.0) - std::log(2.0);
  {
    LossFixture f(DTensor({1, 5}), DTensor({1, 1}));
    const auto terms = ppo_loss(f.tape, f.out, {3}, {old_lp}, {1.5}, {0.0}, hp);
    EXPECT_NEAR(terms.policy, -1.2 * 1.5, 1e-9);
    EXPECT_EQ(terms.clip_fraction, 1.0);
    f.tape.backward(terms.total);
    const auto& g = f.tape.grad(f.out.logits.id());
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 0.0, 1e-12);
  }
  {
    // A negative advantage keeps the unclipped, more pessimistic term.
    LossFixture f(DTensor({1, 5}), DTensor({1, 1}));
    const auto terms = ppo_loss(f.tape, f.out, {3}, {old_lp}, {-1.5}, {0.0}, hp);
    EXPECT_NEAR(terms.policy, 2.0 * 1.5, 1e-9);
  }
}

TEST(PpoLoss, TermValuesAtUniformPolicy) {
  Hyperparameters hp;
  LossFixture f(DTensor({2, 5}), numeric::BasicTensor<double>::matrix(2, 1, {1.0, -1.0}));
  const double lp = -std::log(5.0);
  const auto terms = ppo_loss(f.tape, f.out, {0, 1}, {lp, lp}, {1.0, -0.5}, {0.0, 1.0}, hp);
  EXPECT_NEAR(terms.entropy, std::log(5.0), 1e-12);
  EXPECT_NEAR(terms.value, (1.0 + 4.0) / 2, 1e-12);
  EXPECT_NEAR(terms.policy, -(1.0 - 0.5) / 2, 1e-12);
  EXPECT_NEAR(terms.total.value().item(), terms.policy + 0.5 * terms.value - 0.01 * terms.entropy, 1e-12);
}

TEST(PpoLoss, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  Hyperparameters hp;
  hp.entropy_coeff = 0.3;
  const std::vector<std::size_t> actions{0, 4, 2, 2};
  std::vector<double> old_lp, adv, target;
  std::normal_distribution<double> nd;
  // Old log-probs far enough from current ones that some rows clip.
  for (int i = 0; i < 4; ++i) {
    old_lp.push_back(-1.6 + 0.6 * nd(rng));
    adv.push_back(nd(rng));
    target.push_back(nd(rng));
  }
  const double err = testing::gradient_error(
      [&](DTape& tape, const std::vector<DVar>& in) {
        return ppo_loss(tape, {in[0], in[1]}, actions, old_lp, adv, target, hp).total;
      },
      {testing::random_tensor({4, 5}, rng, -0.3, 0.3), testing::random_tensor({4, 1}, rng)}, 1e-6);
  EXPECT_LT(err, 1e-5);
  EXPECT_THROW(
      {
        DTape t;
        ppo_loss(t, {t.constant(DTensor({4, 5})), t.constant(DTensor({4, 1}))}, {0, 1}, old_lp, adv, target, hp);
      },
      DimensionError);
}

// A contextual bandit where action 2 always pays: updates must raise its
// probability and fit the value head toward the observed return.
TEST(PpoUpdate, ImprovesOnBandit) {
  std::mt19937_64 rng(10);
  FlatNetwork<float> net(3, {32}, 5, rng);
  Hyperparameters hp;
  hp.learning_rate = 3e-3;
  hp.epochs = 4;
  hp.minibatch = 64;
  numeric::BasicAdam<float> opt(net.parameters().list(), {hp.learning_rate});
  const std::vector<float> input{1.0f, 0.5f, -0.5f};
  auto prob2 = [&] {
    Tape<float> tape(false);
    const auto out = net.forward(tape, {&input});
    return numeric::softmax(out.logits).value()[2];
  };
  const double before = prob2();
  for (int iter = 0; iter < 10; ++iter) {
    std::vector<Sample<std::vector<float>>> batch;
    Tape<float> tape(false);
    const auto out = net.forward(tape, {&input});
    for (int i = 0; i < 256; ++i) {
      const auto [a, lp] = sample_action(out.logits.value(), 0, rng);
      const double r = a == 2 ? 1.0 : 0.0;
      batch.push_back({input, a, lp, out.value.value()[0], r - out.value.value()[0], r});
    }
    const auto stats = ppo_update(
        [&](Tape<float>& t, const std::vector<const std::vector<float>*>& in) { return net.forward(t, in); }, opt,
        net.parameters().list(), batch, hp, rng);
    EXPECT_EQ(stats.minibatches, 16u);
    EXPECT_TRUE(std::isfinite(stats.grad_norm));
  }
  EXPECT_GT(prob2(), before + 0.3);
}

TEST(PpoUpdate, RejectsNonFiniteLoss) {
  std::mt19937_64 rng(11);
  FlatNetwork<float> net(2, {4}, 5, rng);
  numeric::BasicAdam<float> opt(net.parameters().list());
  std::vector<Sample<std::vector<float>>> batch{{{1.0f, 0.0f}, 0, 0.0, 0.0, 1.0, std::nan("")}};
  EXPECT_THROW(ppo_update([&](Tape<float>& t, const std::vector<const std::vector<float>*>& in) {
                 return net.forward(t, in);
               },
                          opt, net.parameters().list(), batch, Hyperparameters{}, rng),
               RuntimeFailure);
}

TEST(Hyperparameters, DefaultsAndJson) {
  const Hyperparameters hp;
  EXPECT_DOUBLE_EQ(hp.gamma, 0.97);
  EXPECT_DOUBLE_EQ(hp.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(hp.entropy_coeff, 0.01);
  EXPECT_EQ(hp.rollout_fragment, 128u);
  EXPECT_EQ(hp.train_batch, 2048u);
  EXPECT_EQ(hp.episode_length, 500u);
  EXPECT_EQ(hp.iterations, 500u);
  EXPECT_NO_THROW(hp.validate());
  EXPECT_EQ(hyperparameters_from_json(hyperparameters_to_json(hp)), hp);

  const auto partial = hyperparameters_from_json({{"train_batch", 512}, {"ppo_hidden", {64}}});
  EXPECT_EQ(partial.train_batch, 512u);
  EXPECT_EQ(partial.ppo_hidden, std::vector<std::size_t>{64});
  EXPECT_DOUBLE_EQ(partial.gamma, 0.97);

  EXPECT_THROW(hyperparameters_from_json({{"gama", 0.9}}), ConfigError);
  EXPECT_THROW(hyperparameters_from_json({{"gamma", "high"}}), ConfigError);
  EXPECT_THROW(hyperparameters_from_json({{"gamma", 1.5}}), ConfigError);
  EXPECT_THROW(hyperparameters_from_json({{"minibatch", 0}}), ConfigError);
  EXPECT_THROW(hyperparameters_from_json(nlohmann::json::array()), ConfigError);
}

TEST(FlatNetwork, RejectsWrongObservationWidth) {
  std::mt19937_64 rng(12);
  FlatNetwork<float> net(4, {8}, 5, rng);
  const std::vector<float> bad(3, 0.0f);
  Tape<float> tape(false);
  EXPECT_THROW(net.forward(tape, {&bad}), DimensionError);
}

TEST(TerlaNetwork, HiddenWidthIsTwiceEncoderWidth) {
  std::mt19937_64 rng(13);
  TerlaNetwork<float> net(obsgraph::GraphSchema{}, 5, rng);
  EXPECT_EQ(net.encoder().width(), 70u);
  EXPECT_EQ(net.model().hidden_widths(), (std::vector<std::size_t>{140, 140}));
  EXPECT_EQ(net.action_count(), 5u);
}

}  // namespace
}  // namespace terla::policy
