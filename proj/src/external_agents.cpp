#include "cgrl/external_agents.hpp"

#include <algorithm>
#include <string>

#include "cgrl/errors.hpp"

namespace cgrl {

ExternalAgent make_external_agent(int observation_dim, int action_dim, int identifier_dim,
                                  const SacConfig& config, std::mt19937_64& rng) {
  if (identifier_dim <= 0) throw InvalidInput("identifier dimension must be positive");
  ExternalAgent a;
  a.sac = make_sac_agent(observation_dim + identifier_dim, action_dim, config, rng);
  a.identifier_dim = identifier_dim;
  a.buffer = ReplayBuffer<Transition>(config.buffer_capacity);
  return a;
}

Eigen::VectorXd augment(const Eigen::VectorXd& s, const Eigen::VectorXd& h) {
  Eigen::VectorXd out(s.size() + h.size());
  out << s, h;
  return out;
}

Eigen::VectorXd external_act(const ExternalAgent& agent, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& target_identifier, PolicyMode mode,
                             std::mt19937_64& rng) {
  if (target_identifier.size() != agent.identifier_dim)
    throw InvalidInput("target identifier has " + std::to_string(target_identifier.size()) +
                       " entries, expected " + std::to_string(agent.identifier_dim));
  return policy_sample(agent.sac, augment(s, target_identifier), mode, rng).action;
}

OptionOutcome run_option(Environment& env, const OptionPolicy& policy, const OptionSpec& spec,
                         const NodeLabeler& labeler, std::mt19937_64& rng) {
  if (spec.t_max < 1) throw InvalidInput("option T_max must be at least 1");
  OptionOutcome out;
  Eigen::VectorXd s = env.observation();
  out.start_node = labeler(s);
  if (std::find(spec.starting_nodes.begin(), spec.starting_nodes.end(), out.start_node) ==
      spec.starting_nodes.end())
    throw OptionUnavailable("option cannot start in node " + std::to_string(out.start_node));
  if (const auto* scripted = std::get_if<ScriptedOption>(&policy)) {
    if (!env.expert_available(scripted->script))
      throw OptionUnavailable("expert script " + std::to_string(scripted->script) +
                              " is unavailable in this state");
  }
  out.states.push_back(s);
  out.labels.push_back(out.start_node);
  out.reached_node = out.start_node;

  for (int t = 0; t < spec.t_max; ++t) {
    EnvStep step;
    Eigen::VectorXd a;
    if (const auto* learned = std::get_if<LearnedOption>(&policy)) {
      a = external_act(*learned->agent, s, learned->target_identifier, learned->mode, rng);
      step = env.step(a);
    } else {
      step = env.step_expert(std::get<ScriptedOption>(policy).script);  // a stays empty
    }
    s = step.observation;
    const int label = labeler(s);
    out.states.push_back(s);
    out.actions.push_back(a);
    out.rewards.push_back(step.reward);
    out.labels.push_back(label);
    ++out.steps;
    out.reached_node = label;
    out.episode_done = step.done;
    out.terminal = step.terminal;
    if (label != out.start_node) {
      out.terminated_by = OptionEnd::kNodeChange;
      return out;
    }
    if (step.done) {
      out.terminated_by = OptionEnd::kEpisodeEnd;
      return out;
    }
  }
  out.terminated_by = OptionEnd::kTMax;
  return out;
}

std::vector<Transition> her_relabel(const OptionOutcome& outcome, const ConfigGraph& graph) {
  std::vector<Transition> out;
  if (outcome.terminated_by != OptionEnd::kNodeChange) return out;
  const int reached = outcome.reached_node;
  std::vector<int> negatives;
  for (int j : graph.neighbors(outcome.start_node))
    if (j != reached) negatives.push_back(j);

  auto track = [&](int node, double final_reward) {
    const Eigen::VectorXd& h = graph.node(node).identifier;
    for (int t = 0; t < outcome.steps; ++t) {
      const bool last = t + 1 == outcome.steps;
      out.push_back(Transition{augment(outcome.states[t], h), outcome.actions[t],
                               last ? final_reward : 0.0, augment(outcome.states[t + 1], h), last});
    }
  };
  out.reserve(static_cast<std::size_t>(outcome.steps) * (1 + negatives.size()));
  track(reached, 1.0);
  for (int j : negatives) track(j, -1.0);
  return out;
}

SacLossReport external_update(ExternalAgent& agent, std::span<const Transition> batch,
                              std::mt19937_64& rng) {
  return sac_update(agent.sac, batch, rng);
}

}  // namespace cgrl
