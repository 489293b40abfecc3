#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace terla::harness {

enum class AgentKind : std::uint8_t { Sleep, Random, Ppo, PpoAwRs, TerlaSeparate, TerlaSingle };

std::string_view to_string(AgentKind kind);
// Accepts the lower-case names used in files and on the command line.
AgentKind parse_agent_kind(std::string_view name);
const std::vector<AgentKind>& all_agent_kinds();

constexpr bool is_trainable(AgentKind k) { return k != AgentKind::Sleep && k != AgentKind::Random; }
constexpr bool uses_graph(AgentKind k) { return k == AgentKind::TerlaSeparate || k == AgentKind::TerlaSingle; }
// Action waiting and reward shaping go together in every kind that uses them.
constexpr bool uses_action_waiting(AgentKind k) { return k == AgentKind::PpoAwRs || uses_graph(k); }
constexpr bool uses_shaped_reward(AgentKind k) { return uses_action_waiting(k); }
constexpr bool shares_network(AgentKind k) { return k == AgentKind::TerlaSingle; }

}  // namespace terla::harness
