#include "cgrl/internal_agents.hpp"

#include <algorithm>
#include <string>

#include "cgrl/errors.hpp"

namespace cgrl {

InternalAgent make_learned_internal(int node, int observation_dim, int action_dim,
                                    const SacConfig& config, std::mt19937_64& rng) {
  InternalAgent a;
  a.node = node;
  a.kind = InternalKind::kLearned;
  a.sac = make_sac_agent(observation_dim, action_dim, config, rng);
  a.buffer = ReplayBuffer<NodeTransition>(config.buffer_capacity);
  return a;
}

InternalAgent make_convex_internal(int node, const CartStemParams& params) {
  InternalAgent a;
  a.node = node;
  a.kind = InternalKind::kConvex;
  a.convex_params = params;
  return a;
}

double convex_cart_target(const CartStemState& s, CartStemNode node, const CartStemParams& params) {
  const FreeWindow w = free_window(s.x_left, s.x_right, s.l_x, s.l_z);
  const double k = params.lever_ratio();
  switch (node) {
    case CartStemNode::kFree:
      return std::clamp(s.x_goal, w.left_pivot, w.right_pivot);
    case CartStemNode::kLeft: {
      const double p = w.left_pivot;
      return std::clamp(p - (s.x_goal - p) / k, params.x_min, p);
    }
    case CartStemNode::kRight: {
      const double p = w.right_pivot;
      return std::clamp(p - (s.x_goal - p) / k, p, params.x_max);
    }
  }
  return s.x_cart;
}

double convex_internal_act(const CartStemState& state, CartStemNode node,
                           const CartStemParams& params) {
  return cartstem_target_to_action(convex_cart_target(state, node, params), params);
}

Eigen::VectorXd internal_act(const InternalAgent& agent, const Eigen::VectorXd& s,
                             int current_node, PolicyMode mode, std::mt19937_64& rng) {
  if (current_node != agent.node)
    throw InvalidInput("internal agent of node " + std::to_string(agent.node) +
                       " asked to act in node " + std::to_string(current_node));
  if (agent.kind == InternalKind::kConvex) {
    if (s.size() != kCartStemObservationDim)
      throw InvalidInput("convex internal agent expects a cartstem observation");
    const CartStemState state = CartStemState::from_observation(s);
    Eigen::VectorXd a(1);
    a[0] = convex_internal_act(state, static_cast<CartStemNode>(agent.node), agent.convex_params);
    return a;
  }
  return policy_sample(*agent.sac, s, mode, rng).action;
}

InternalUpdateReport internal_update(InternalAgent& agent, std::span<const NodeTransition> batch,
                                     const std::map<int, const SacAgent*>& neighbors,
                                     std::mt19937_64& rng) {
  if (agent.kind != InternalKind::kLearned || !agent.sac)
    throw InvalidInput("internal_update needs a learned agent");
  if (batch.empty()) throw InvalidInput("internal_update needs a nonempty batch");
  InternalUpdateReport report;
  SacAgent& sac = *agent.sac;

  std::vector<Transition> kept;
  std::vector<int> source;  // node whose value bootstraps each kept item
  kept.reserve(batch.size());
  for (const NodeTransition& nt : batch) {
    int src = agent.node;
    if (nt.is_boundary() && !nt.transition.done) {
      const auto it = neighbors.find(nt.to_node);
      if (it == neighbors.end() || it->second == nullptr) {
        ++report.boundary_skipped;
        continue;
      }
      src = nt.to_node;
      ++report.boundary_used;
    }
    kept.push_back(nt.transition);
    source.push_back(src);
  }
  if (kept.empty()) {
    report.loss.skipped = true;
    report.loss.reason = "every transition lacked a neighbour critic";
    return report;
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  // Own values over the whole batch first, in the same order sac_update uses,
  // so a batch without boundary items reproduces it exactly.
  Eigen::MatrixXd s_next(sac.observation_dim, n);
  for (Eigen::Index c = 0; c < n; ++c) s_next.col(c) = kept[c].s_next;
  Eigen::VectorXd v = soft_state_values(sac, s_next, rng);

  std::map<int, std::vector<Eigen::Index>> groups;
  for (Eigen::Index c = 0; c < n; ++c)
    if (source[c] != agent.node) groups[source[c]].push_back(c);
  for (const auto& [node, cols] : groups) {
    const SacAgent& other = *neighbors.at(node);
    Eigen::MatrixXd obs(other.observation_dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) obs.col(static_cast<Eigen::Index>(i)) = kept[cols[i]].s_next;
    const Eigen::VectorXd vo = soft_state_values(other, obs, rng);
    for (std::size_t i = 0; i < cols.size(); ++i) v[cols[i]] = vo[static_cast<Eigen::Index>(i)];
  }

  Eigen::VectorXd targets(n);
  for (Eigen::Index c = 0; c < n; ++c)
    targets[c] = kept[c].r + (kept[c].done ? 0.0 : sac.gamma * v[c]);
  report.loss = sac_update_with_targets(sac, kept, targets, rng);
  return report;
}

RoutedTransitions route_transitions(const std::vector<Transition>& trajectory,
                                    const std::vector<int>& labels, const ConfigGraph& graph) {
  if (labels.size() != trajectory.size() + 1)
    throw InvalidInput("route_transitions: need one label per visited state");
  for (int l : labels)
    if (!graph.contains(l)) throw InvalidInput("label " + std::to_string(l) + " is not a graph node");
  RoutedTransitions out;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const int from = labels[t];
    const int to = labels[t + 1];
    if (from != to) {
      const auto nb = graph.neighbors(from);
      if (!std::binary_search(nb.begin(), nb.end(), to))
        throw InvalidInput("transition jumps between non-adjacent nodes " + std::to_string(from) +
                           " and " + std::to_string(to));
      ++out.boundary_count;
    }
    out.per_node[from].push_back(NodeTransition{trajectory[t], from, to});
  }
  return out;
}

}  // namespace cgrl
