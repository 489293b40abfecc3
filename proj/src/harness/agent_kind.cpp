#include "terla/harness/agent_kind.hpp"

#include <string>

#include "terla/error.hpp"

namespace terla::harness {

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::Sleep: return "sleep";
    case AgentKind::Random: return "random";
    case AgentKind::Ppo: return "ppo";
    case AgentKind::PpoAwRs: return "ppo_aw_rs";
    case AgentKind::TerlaSeparate: return "terla_separate";
    case AgentKind::TerlaSingle: return "terla_single";
  }
  return "?";
}

AgentKind parse_agent_kind(std::string_view name) {
  for (AgentKind k : all_agent_kinds())
    if (to_string(k) == name) return k;
  throw ConfigError("unknown agent kind '" + std::string(name) +
                    "' (expected sleep, random, ppo, ppo_aw_rs, terla_separate or terla_single)");
}

const std::vector<AgentKind>& all_agent_kinds() {
  static const std::vector<AgentKind> kinds{AgentKind::Sleep,  AgentKind::Random,        AgentKind::Ppo,
                                            AgentKind::PpoAwRs, AgentKind::TerlaSeparate, AgentKind::TerlaSingle};
  return kinds;
}

}  // namespace terla::harness
