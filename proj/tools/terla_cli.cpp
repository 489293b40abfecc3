// Command-line front end: train, eval, compare, validate-config.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "terla/error.hpp"
#include "terla/harness/config.hpp"
#include "terla/harness/evaluate.hpp"
#include "terla/harness/policies.hpp"
#include "terla/harness/train.hpp"

namespace fs = std::filesystem;
using namespace terla;
using namespace terla::harness;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> agent;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> episode_len;
};

void set_log_level() {
  spdlog::set_level(spdlog::level::info);
  const char* env = std::getenv("TERLA_LOG");
  if (!env) return;
  const std::string v = env;
  if (v == "error") spdlog::set_level(spdlog::level::err);
  else if (v == "info") spdlog::set_level(spdlog::level::info);
  else if (v == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::warn("TERLA_LOG={} not understood, expected error, info or debug", v);
}

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (o.out) c.output_dir = *o.out;
  if (o.agent) c.agent = parse_agent_kind(*o.agent);
  if (o.episodes) c.eval.episodes = *o.episodes;
  if (o.episode_len) c.eval.episode_length = *o.episode_len;
  if (c.eval.episodes == 0 || c.eval.episode_length == 0) throw ConfigError("episodes and episode length must be positive");
  return c;
}

fs::path seed_dir(const ExperimentConfig& c, std::uint64_t seed) {
  return c.output_dir / ("seed_" + std::to_string(seed));
}

int train(const Options& o) {
  const auto c = load(o);
  if (!c.agent) throw ConfigError("train needs --agent or an \"agent\" entry in the config");
  if (!is_trainable(*c.agent)) throw ConfigError(std::string(to_string(*c.agent)) + " agents are not trained");
  for (std::uint64_t seed : c.seeds) {
    TrainOptions opt;
    opt.output_dir = seed_dir(c, seed);
    const auto result = run_train(c, *c.agent, seed, opt);
    for (const auto& f : result.checkpoint_files) spdlog::info("wrote {}", f.string());
  }
  return 0;
}

std::vector<EvalReport> read_reports(const fs::path& path) {
  std::vector<EvalReport> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.contains("reports") || !j.at("reports").is_array()) throw ConfigError(path.string() + " has no reports list");
  for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
  return out;
}

bool has_checkpoints(const ExperimentConfig& c, AgentKind kind, const fs::path& dir) {
  if (shares_network(kind)) return fs::exists(checkpoint_path(dir, kind));
  for (std::size_t s : c.topology.defended_indices())
    if (!fs::exists(checkpoint_path(dir, kind, c.topology.segments[s].id))) return false;
  return true;
}

int eval(const Options& o) {
  const auto c = load(o);
  std::vector<AgentKind> kinds;
  if (c.agent) {
    kinds.push_back(*c.agent);
  } else {
    kinds = all_agent_kinds();
  }
  fs::create_directories(c.output_dir);
  const fs::path report_file = c.output_dir / "eval_report.json";
  auto reports = read_reports(report_file);
  for (AgentKind kind : kinds) {
    EvalReport report;
    if (is_trainable(kind)) {
      std::vector<EvalReport> per_seed;
      for (std::uint64_t seed : c.seeds) {
        const auto dir = seed_dir(c, seed);
        if (!c.agent && !has_checkpoints(c, kind, dir)) {
          spdlog::info("no {} checkpoints under {}, skipping", to_string(kind), dir.string());
          continue;
        }
        per_seed.push_back(run_eval(c, kind, dir));
      }
      if (per_seed.empty()) continue;
      report = merge_reports(per_seed);
    } else {
      report = run_eval(c, kind, c.output_dir);
    }
    spdlog::info("{}: mean {:.1f} std {:.1f} action rate {:.3f}", to_string(kind), report.mean, report.stddev,
                 report.action_rate());
    std::erase_if(reports, [&](const EvalReport& r) { return r.kind == kind; });
    reports.push_back(report);
  }
  // Relative effectiveness needs a sleep baseline under the same settings.
  for (const auto& base : reports) {
    if (base.kind != AgentKind::Sleep || !(base.mean < 0.0)) continue;
    for (auto& r : reports)
      if (r.settings == base.settings) r.relative_effectiveness = relative_effectiveness(r.mean, base.mean);
  }
  nlohmann::json j;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
  std::ofstream(report_file) << j.dump(2) << '\n';
  std::ofstream(c.output_dir / "action_hist.csv") << action_histogram_csv(reports);
  spdlog::info("wrote {}", report_file.string());
  return 0;
}

int compare_cmd(const Options& o) {
  const auto c = load(o);
  const auto reports = read_reports(c.output_dir / "eval_report.json");
  if (reports.empty()) throw ConfigError("no evaluation reports in " + c.output_dir.string() + "; run eval first");
  const auto rows = compare(reports);
  std::ofstream(c.output_dir / "comparison.csv") << comparison_csv(rows);
  std::ofstream(c.output_dir / "comparison.txt") << comparison_text(rows);
  std::ofstream(c.output_dir / "action_hist.csv") << action_histogram_csv(reports);
  std::cout << comparison_text(rows);
  return 0;
}

int validate(const Options& o) {
  if (o.config.empty()) throw ConfigError("validate-config needs --config");
  const auto c = load(o);
  c.topology.validate();
  std::cout << "config ok: " << c.topology.segments.size() << " segments ("
            << c.topology.defended_indices().size() << " defended), " << c.seeds.size() << " seed(s), "
            << c.hp.iterations << " iterations of " << c.hp.train_batch << " steps, eval " << c.eval.episodes << "x"
            << c.eval.episode_length << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  set_log_level();
  CLI::App app{"TERLA cyber-defence agents: training, evaluation and comparison"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)");
    sub->add_option("--seed", o.seed, "single training seed, overrides the config list");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--agent", o.agent, "sleep|random|ppo|ppo_aw_rs|terla_separate|terla_single");
    sub->add_option("--episodes", o.episodes, "evaluation episodes");
    sub->add_option("--episode-len", o.episode_len, "evaluation episode length");
  };
  auto* train_cmd = app.add_subcommand("train", "train an agent kind and write checkpoints");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate agents greedily against the shared reward");
  auto* compare_sub = app.add_subcommand("compare", "rank evaluated agents");
  auto* validate_cmd = app.add_subcommand("validate-config", "check a config file");
  for (auto* s : {train_cmd, eval_cmd, compare_sub, validate_cmd}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*train_cmd) return train(o);
    if (*eval_cmd) return eval(o);
    if (*compare_sub) return compare_cmd(o);
    return validate(o);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfigExit;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeExit;
  }
}
