#pragma once

// Options that move the system from one configuration space to a neighbour.
// The learned agent is a goal-conditioned SAC learner on [s | h_target] trained
// with hindsight relabelling; scripted agents replay environment experts.

#include <Eigen/Core>

#include <functional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "cgrl/config_graph.hpp"
#include "cgrl/environment.hpp"
#include "cgrl/replay_buffer.hpp"
#include "cgrl/sac.hpp"

namespace cgrl {

struct ExternalAgent {
  SacAgent sac;
  int identifier_dim = 0;
  ReplayBuffer<Transition> buffer{1};
};

ExternalAgent make_external_agent(int observation_dim, int action_dim, int identifier_dim,
                                  const SacConfig& config, std::mt19937_64& rng);

/// [s | h]
Eigen::VectorXd augment(const Eigen::VectorXd& s, const Eigen::VectorXd& h);

/// Throws InvalidInput when h does not have identifier_dim entries.
Eigen::VectorXd external_act(const ExternalAgent& agent, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& target_identifier, PolicyMode mode,
                             std::mt19937_64& rng);

struct OptionSpec {
  std::vector<int> starting_nodes;
  int target = 0;
  int t_max = 1;
};

enum class OptionEnd { kNodeChange, kTMax, kEpisodeEnd };

struct OptionOutcome {
  std::vector<Eigen::VectorXd> states;   // T + 1, first is the start state
  std::vector<Eigen::VectorXd> actions;  // T
  std::vector<double> rewards;           // T
  std::vector<int> labels;               // T + 1
  int start_node = 0;
  int reached_node = 0;
  int steps = 0;
  OptionEnd terminated_by = OptionEnd::kTMax;
  bool episode_done = false;  // the environment ended during the option
  bool terminal = false;      // ... for a reason other than the horizon
};

/// Graph id of an observation.
using NodeLabeler = std::function<int(const Eigen::VectorXd&)>;

struct LearnedOption {
  const ExternalAgent* agent = nullptr;
  Eigen::VectorXd target_identifier;
  PolicyMode mode = PolicyMode::kStochastic;
};
struct ScriptedOption {
  int script = 0;  // index into Environment::expert_names()
};
using OptionPolicy = std::variant<LearnedOption, ScriptedOption>;

/// Steps `env` until the node changes, T_max steps were taken or the episode
/// ends. Throws OptionUnavailable when the current node is outside the starting
/// set or the script cannot start here.
OptionOutcome run_option(Environment& env, const OptionPolicy& policy, const OptionSpec& spec,
                         const NodeLabeler& labeler, std::mt19937_64& rng);

/// Hindsight tracks over augmented inputs: a +1 track toward the node reached
/// and a -1 track toward every other neighbour of the start node, rewards only
/// on the final step, which is marked done. Empty unless the option ended on a
/// node change. Positive track first, then negatives in ascending node id.
std::vector<Transition> her_relabel(const OptionOutcome& outcome, const ConfigGraph& graph);

SacLossReport external_update(ExternalAgent& agent, std::span<const Transition> batch,
                              std::mt19937_64& rng);

}  // namespace cgrl
