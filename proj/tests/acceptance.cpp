// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "terla/encoder/encoder.hpp"
#include "terla/harness/checkpoint.hpp"
#include "terla/harness/config.hpp"
#include "terla/harness/evaluate.hpp"
#include "terla/harness/policies.hpp"
#include "terla/harness/train.hpp"
#include "terla/netsim/simulator.hpp"
#include "terla/policy/networks.hpp"
#include "terla/wrapper/wrapper.hpp"

namespace fs = std::filesystem;
using namespace terla;
using harness::AgentKind;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path work_dir() {
  const fs::path p = fs::temp_directory_path() / "terla_acceptance";
  fs::create_directories(p);
  return p;
}

netsim::SegmentObservation random_observation(const netsim::SegmentLayout& layout, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  netsim::SegmentObservation obs;
  obs.mission_phase = static_cast<netsim::MissionPhase>(rng() % 3);
  obs.subnet_vector.assign(layout.subnet_count(), 1);
  for (std::size_t i = 0; i < layout.slot_count(); ++i) {
    obs.host_malicious_process.push_back(coin(rng));
    obs.host_malicious_network.push_back(coin(rng));
  }
  obs.active_host_count = layout.active_count();
  return obs;
}

// Random layout with at most `max_hosts` slots over one to three subnets.
netsim::SegmentLayout random_layout(std::mt19937_64& rng, std::size_t max_hosts) {
  netsim::SegmentLayout layout;
  std::size_t left = max_hosts;
  const std::size_t subnets = 1 + rng() % 3;
  for (std::size_t s = 0; s < subnets && left > 0; ++s) {
    const std::size_t cap = 1 + rng() % left;
    layout.capacity.push_back(cap);
    layout.active.push_back(1 + rng() % cap);
    left -= cap;
  }
  return layout;
}

// ---------------------------------------------------------------------------

Outcome sizing() {
  const harness::ExperimentConfig config;
  std::mt19937_64 rng(1);
  policy::TerlaNetwork<float> net(config.schema, wrapper::kTerlaActionCount, rng, config.hgt);
  const std::size_t width = encoder::encoder_hidden_size(config.schema, wrapper::kTerlaActionCount);
  const auto hidden = net.model().hidden_widths();
  const bool ok = config.schema.host_feature_width() == 2 && width == 70 && net.encoder().width() == 70 &&
                  hidden == std::vector<std::size_t>{140, 140};
  return {ok, "encoder width " + std::to_string(width) + ", policy hidden " + std::to_string(hidden.at(0)) + "x" +
                  std::to_string(hidden.size())};
}

Outcome table_metrics() {
  const double sleep = -6650;
  const std::vector<double> means{-6650, -6300, -5150, -2825, -2773, -2048};
  const std::vector<int> expected{0, 5, 23, 58, 58, 69};
  std::string got;
  bool ok = true;
  for (std::size_t i = 0; i < means.size(); ++i) {
    const int p = harness::relative_effectiveness(means[i], sleep);
    ok = ok && p == expected[i];
    got += (i ? ", " : "") + std::to_string(p) + "%";
  }
  return {ok, got};
}

struct StubRuns {
  harness::TrainResult terla, ppo;
};

// One short iteration each; only parameter shapes matter here.
const StubRuns& stub_runs() {
  static const StubRuns runs = [] {
    harness::ExperimentConfig c;
    c.hp.iterations = 1;
    c.hp.train_batch = 64;
    c.hp.rollout_fragment = 16;
    c.hp.minibatch = 64;
    c.hp.epochs = 1;
    c.hp.episode_length = 50;
    return StubRuns{harness::run_train(c, AgentKind::TerlaSeparate, 7), harness::run_train(c, AgentKind::Ppo, 7)};
  }();
  return runs;
}

Outcome architecture_invariance() {
  const harness::ExperimentConfig config;
  const auto& runs = stub_runs();
  // Segments with 4, 6 and 8 host slots on the desk topology.
  std::map<std::size_t, std::string> terla, ppo;
  for (std::size_t i = 0; i < runs.terla.learners.size(); ++i) {
    const auto& id = runs.terla.learners[i].segment_id;
    for (const auto& seg : config.topology.segments) {
      if (seg.id != id || seg.subnets.size() != 1) continue;
      terla[seg.host_capacity()] = harness::shape_manifest(runs.terla.learners[i].checkpoint);
      ppo[seg.host_capacity()] = harness::shape_manifest(runs.ppo.learners[i].checkpoint);
    }
  }
  if (!terla.count(4) || !terla.count(6) || !terla.count(8)) return {false, "desk topology lacks 4/6/8-host segments"};
  const bool same = terla[4] == terla[6] && terla[6] == terla[8];
  const bool differ = ppo[4] != ppo[6] && ppo[6] != ppo[8] && ppo[4] != ppo[8];
  return {same && differ, std::string("TERLA manifests ") + (same ? "identical" : "differ") + ", PPO manifests " +
                              (differ ? "all differ" : "partly identical")};
}

Outcome generalisability() {
  const harness::ExperimentConfig config;
  const auto& learner = stub_runs().terla.learners.front();
  const fs::path file = work_dir() / "one_segment.ckpt";
  harness::save_checkpoint(file, learner.checkpoint);
  const auto net = harness::terla_network_from_checkpoint(harness::load_checkpoint(file));
  std::vector<std::unique_ptr<harness::SegmentPolicy>> owned;
  std::vector<harness::SegmentPolicy*> policies;
  std::vector<std::string> ids;
  for (std::size_t s : config.topology.defended_indices()) {
    owned.push_back(harness::make_terla_policy(net, config.schema));
    policies.push_back(owned.back().get());
    ids.push_back(config.topology.segments[s].id);
  }
  harness::EvalSettings settings{3, 100, 500};
  const auto report = harness::evaluate(AgentKind::TerlaSeparate, policies, config.topology, config.sim, settings);
  std::string list;
  for (const auto& id : ids) list += (list.empty() ? "" : ",") + id;
  return {report.episode_rewards.size() == 3,
          "checkpoint from " + learner.segment_id + " evaluated on " + list};
}

Outcome encoder_properties() {
  std::mt19937_64 rng(2024);
  const obsgraph::GraphSchema schema;

  // Double precision keeps summation-order noise far below the tolerance;
  // float lands within a factor of two of it.
  numeric::ParameterStore<double> store;
  encoder::Encoder<double> enc(store, schema, {}, rng);
  double worst_perm = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto layout = random_layout(rng, 12);
    const auto g = obsgraph::observation_to_graph(random_observation(layout, rng), layout, schema);
    const std::size_t n = g.node_count(obsgraph::NodeType::Host);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    obsgraph::HeteroGraph p = g;
    const std::size_t host = static_cast<std::size_t>(obsgraph::NodeType::Host);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < g.features[host].cols(); ++c) p.features[host](perm[i], c) = g.features[host](i, c);
      p.host_slot[perm[i]] = g.host_slot[i];
    }
    const auto rel = schema.relations();
    for (std::size_t r = 0; r < rel.size(); ++r) {
      for (auto& [s, d] : p.edges[r]) {
        if (rel[r].src == obsgraph::NodeType::Host) s = perm[s];
        if (rel[r].dst == obsgraph::NodeType::Host) d = perm[d];
      }
    }
    numeric::Tape<double> t1(false), t2(false);
    const auto a = enc.encode(t1, g).value(), b = enc.encode(t2, p).value();
    for (std::size_t i = 0; i < a.size(); ++i) worst_perm = std::max(worst_perm, double(std::abs(a[i] - b[i])));
  }

  // End-to-end parameter gradients in double precision.
  double worst_grad = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 init(rng());
    policy::TerlaNetwork<double> net(schema, wrapper::kTerlaActionCount, init);
    const auto layout = random_layout(rng, 6);
    const auto g = obsgraph::observation_to_graph(random_observation(layout, rng), layout, schema);
    numeric::BasicTensor<double> w(numeric::Shape{1, wrapper::kTerlaActionCount});
    for (auto& x : w.storage()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    auto loss = [&](numeric::Tape<double>& tape) {
      const auto out = net.forward(tape, {&g});
      return numeric::add(numeric::sum(numeric::mul(out.logits, tape.constant(w))), numeric::sum(out.value));
    };
    net.parameters().zero_grad();
    {
      numeric::Tape<double> tape;
      tape.backward(loss(tape));
    }
    double diff = 0.0, scale = 0.0;
    const double h = 1e-6;
    for (auto* p : net.parameters().list()) {
      auto& v = p->value();
      for (int k = 0; k < 2; ++k) {
        const std::size_t i = rng() % v.size();
        const double keep = v[i];
        v[i] = keep + h;
        numeric::Tape<double> up(false);
        const double fu = loss(up).value().item();
        v[i] = keep - h;
        numeric::Tape<double> down(false);
        const double fd = loss(down).value().item();
        v[i] = keep;
        const double num = (fu - fd) / (2 * h), ana = p->grad()[i];
        diff += (num - ana) * (num - ana);
        scale += std::max(num * num, ana * ana);
      }
    }
    worst_grad = std::max(worst_grad, scale > 0 ? std::sqrt(diff / scale) : 0.0);
  }
  return {worst_perm <= 1e-6 && worst_grad < 1e-3,
          fmt("max permutation deviation %.2e", worst_perm) + fmt(", max gradient error %.2e", worst_grad)};
}

Outcome targeting_oracle() {
  std::mt19937_64 rng(77);
  std::size_t mismatches = 0;
  for (int c = 0; c < 10000; ++c) {
    const auto layout = random_layout(rng, 8);
    const auto obs = random_observation(layout, rng);
    // Enumerate tiers from worst to cleanest, slots ascending within a tier.
    std::vector<std::size_t> expect;
    for (int tier = 0; tier < 4; ++tier) {
      for (std::size_t s = 0; s < layout.slot_count(); ++s) {
        if (!layout.is_active(s)) continue;
        const bool p = obs.host_malicious_process[s], n = obs.host_malicious_network[s];
        const int t = p && n ? 0 : p ? 1 : n ? 2 : 3;
        if (t == tier) expect.push_back(s);
      }
    }
    std::size_t least = expect.back();
    for (std::size_t s : expect) {
      const auto tier = [&](std::size_t x) {
        return wrapper::compromise_tier(obs.host_malicious_process[x], obs.host_malicious_network[x]);
      };
      if (tier(s) == tier(expect.back())) {
        least = s;
        break;
      }
    }
    bool ok = wrapper::rank_hosts(obs, layout).order == expect;
    const auto at = [&](netsim::ActionKind k, std::size_t slot) {
      return netsim::EnvAction::on(k, layout.subnet_of(slot), layout.host_in_subnet(slot));
    };
    using wrapper::TerlaAction;
    ok = ok && wrapper::target_action(TerlaAction::DoNothing, obs, layout) == netsim::EnvAction::sleep();
    ok = ok && wrapper::target_action(TerlaAction::CheckLeastCompromised, obs, layout) ==
                   at(netsim::ActionKind::Analyse, least);
    ok = ok && wrapper::target_action(TerlaAction::RemoveMostCompromised, obs, layout) ==
                   at(netsim::ActionKind::Remove, expect.front());
    ok = ok && wrapper::target_action(TerlaAction::RestoreMostCompromised, obs, layout) ==
                   at(netsim::ActionKind::Restore, expect.front());
    ok = ok && wrapper::target_action(TerlaAction::DecoyMostCompromised, obs, layout) ==
                   at(netsim::ActionKind::DeployDecoy, expect.front());
    if (!ok) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 10000 cases"};
}

// Random TERLA-level play through the targeting layer.
std::vector<netsim::EnvAction> random_terla_actions(const netsim::Simulator& sim, const netsim::StepResult& r,
                                                    std::mt19937_64& rng) {
  std::vector<netsim::EnvAction> actions;
  for (std::size_t d = 0; d < sim.defended_count(); ++d) {
    const auto a = wrapper::terla_action(rng() % wrapper::kTerlaActionCount);
    actions.push_back(wrapper::target_action(a, r.observations[d], sim.layout(d)));
  }
  return actions;
}

Outcome reward_shaping() {
  netsim::SimConfig cfg;
  cfg.episode_length = 200;
  netsim::Simulator sim(netsim::NetworkTopology::desk_default(), cfg);
  double worst = 0.0;
  std::size_t leaks = 0, perturbations = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 11);
    auto r = sim.reset(seed);
    const std::size_t nd = sim.defended_count();
    std::vector<wrapper::ShapedReward> shaped;
    std::vector<double> total(nd, 0.0), initial = r.segment_health;
    for (std::size_t d = 0; d < nd; ++d) shaped.emplace_back(r.segment_health[d]);
    while (!r.done) {
      r = sim.step(random_terla_actions(sim, r, rng));
      for (std::size_t d = 0; d < nd; ++d) total[d] += shaped[d](r.segment_health[d]);

      // Compromise every other segment in a copy: this segment's health, and
      // so its shaped reward, must not move.
      if (r.time % 40 == 0) {
        for (std::size_t d = 0; d < nd; ++d) {
          netsim::Simulator other = sim;
          for (std::size_t e = 0; e < nd; ++e) {
            if (e == d) continue;
            for (std::size_t slot : other.layout(e).active_slots())
              other.inject_compromise(e, slot, netsim::CompromiseStage::Privileged);
          }
          auto probe = shaped[d];
          auto base = shaped[d];
          if (probe(netsim::segment_health(other.state(d))) != base(netsim::segment_health(sim.state(d)))) ++leaks;
          for (std::size_t e = 0; e < nd; ++e)
            if (e != d && netsim::segment_health(other.state(e)) != netsim::segment_health(sim.state(e)))
              ++perturbations;
        }
      }
    }
    for (std::size_t d = 0; d < nd; ++d)
      worst = std::max(worst, std::abs(total[d] - (r.segment_health[d] - initial[d])));
  }
  return {worst <= 1e-6 && leaks == 0 && perturbations > 0,
          fmt("max telescoping error %.2e", worst) + ", " + std::to_string(leaks) + " cross-segment leaks over " +
              std::to_string(perturbations) + " effective perturbations"};
}

Outcome action_waiting() {
  const int length = 200;
  netsim::SimConfig cfg;
  cfg.episode_length = length;
  netsim::Simulator sim(netsim::NetworkTopology::desk_default(), cfg);
  long suppressed = 0, expected = 0, mid_action_observations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 5);
    auto r = sim.reset(seed);
    const std::size_t nd = sim.defended_count();
    std::vector<wrapper::ActionWaiter> waiters(nd);
    std::vector<bool> deliver(nd, true);
    while (!r.done) {
      const int step = r.time;
      auto proposed = random_terla_actions(sim, r, rng);
      std::vector<netsim::EnvAction> actions(nd);
      for (std::size_t d = 0; d < nd; ++d)
        if (deliver[d]) actions[d] = proposed[d];
      r = sim.step(actions);
      for (std::size_t d = 0; d < nd; ++d) {
        if (r.info.accepted[d]) {
          const int dur = netsim::duration(r.info.executed[d].kind);
          expected += std::min(dur - 1, length - 1 - step);
          waiters[d].on_accepted(dur);
        }
        deliver[d] = waiters[d].deliver();
        if (!r.done) {
          if (!deliver[d]) ++suppressed;
          if (deliver[d] && sim.busy_remaining(d) > 0) ++mid_action_observations;
        }
      }
    }
  }
  return {suppressed == expected && mid_action_observations == 0,
          std::to_string(suppressed) + " suppressed vs " + std::to_string(expected) + " expected, " +
              std::to_string(mid_action_observations) + " observations delivered mid-action"};
}

// ---------------------------------------------------------------------------

struct EndToEnd {
  std::map<AgentKind, harness::EvalReport> reports;
  double seconds = 0.0;
};

// Training budget for the desk-scale comparison.
constexpr std::size_t kIterations = 200;
constexpr std::size_t kBatch = 512;
constexpr std::size_t kTrainEpisodeLength = 200;

const EndToEnd& end_to_end() {
  static const EndToEnd result = [] {
    EndToEnd out;
    const auto start = std::chrono::steady_clock::now();
    harness::ExperimentConfig c;
    c.hp.train_batch = kBatch;
    c.hp.iterations = kIterations;
    c.hp.episode_length = kTrainEpisodeLength;
    c.eval = {30, 200, 1000};
    const fs::path dir = work_dir() / "desk";
    fs::create_directories(dir);
    for (AgentKind kind : harness::all_agent_kinds()) {
      if (harness::is_trainable(kind)) {
        harness::TrainOptions opt;
        opt.output_dir = dir;
        harness::run_train(c, kind, 1, opt);
      }
      out.reports[kind] = harness::run_eval(c, kind, dir);
      const auto& r = out.reports[kind];
      std::printf("  %-15s mean %9.1f  std %7.1f  action rate %.3f\n", std::string(to_string(kind)).c_str(), r.mean,
                  r.stddev, r.action_rate());
      std::fflush(stdout);
    }
    std::vector<harness::EvalReport> all;
    for (const auto& [k, r] : out.reports) all.push_back(r);
    std::ofstream(dir / "comparison.txt") << harness::comparison_text(harness::compare(all));
    std::ofstream(dir / "action_hist.csv") << harness::action_histogram_csv(all);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }();
  return result;
}

Outcome ordering() {
  const auto& e = end_to_end();
  const auto m = [&](AgentKind k) { return e.reports.at(k).mean; };
  const auto pooled = [&](AgentKind a, AgentKind b) {
    const double sa = e.reports.at(a).stddev, sb = e.reports.at(b).stddev;
    return std::sqrt((sa * sa + sb * sb) / 2.0);
  };
  std::vector<std::pair<std::string, bool>> checks{
      {"sleep<random", m(AgentKind::Sleep) < m(AgentKind::Random)},
      {"random<terla_separate", m(AgentKind::Random) < m(AgentKind::TerlaSeparate)},
      {"terla_separate>=ppo-0.5sd",
       m(AgentKind::TerlaSeparate) >= m(AgentKind::Ppo) - 0.5 * pooled(AgentKind::TerlaSeparate, AgentKind::Ppo)},
      {"terla_single>=terla_separate-0.5sd",
       m(AgentKind::TerlaSingle) >=
           m(AgentKind::TerlaSeparate) - 0.5 * pooled(AgentKind::TerlaSingle, AgentKind::TerlaSeparate)},
      {"ppo_aw_rs<ppo", m(AgentKind::PpoAwRs) < m(AgentKind::Ppo)},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [name, pass] : checks) {
    ok = ok && pass;
    detail += (detail.empty() ? "" : ", ") + name + (pass ? " ok" : " FAILED");
  }
  return {ok, detail + fmt(" (%.0f s)", e.seconds)};
}

Outcome efficiency() {
  const auto& e = end_to_end();
  const double ppo = e.reports.at(AgentKind::Ppo).action_rate();
  const double sep = e.reports.at(AgentKind::TerlaSeparate).action_rate();
  const double single = e.reports.at(AgentKind::TerlaSingle).action_rate();
  return {sep < 0.5 * ppo && single < 0.5 * ppo,
          fmt("ppo %.3f", ppo) + fmt(", terla_separate %.3f", sep) + fmt(", terla_single %.3f", single)};
}

}  // namespace

// Optional arguments select criteria by number; default runs all of them.
int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("TERLA_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"encoder and policy sizing", sizing},
      {"relative effectiveness on published rewards", table_metrics},
      {"architecture invariance across segment sizes", architecture_invariance},
      {"one checkpoint on every segment", generalisability},
      {"encoder permutation invariance and gradients", encoder_properties},
      {"targeting against enumeration oracle", targeting_oracle},
      {"shaped reward telescoping and locality", reward_shaping},
      {"action waiting suppression count", action_waiting},
      {"desk-scale agent ordering", ordering},
      {"TERLA action efficiency", efficiency},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::strtoul(argv[i], nullptr, 10));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu %s: %s - %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, selected.empty() ? criteria.size() : selected.size());
  return failed == 0 ? 0 : 1;
}
