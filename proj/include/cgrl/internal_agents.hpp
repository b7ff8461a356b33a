#pragma once

// Per-node controllers issuing primitive actions. A learned agent is a SAC
// learner trained on the transitions that start in its node; transitions that
// leave the node bootstrap from the neighbouring agent's critics. The convex
// agent solves the CartStem surrogate in closed form inside one region.

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cgrl/cartstem.hpp"
#include "cgrl/config_graph.hpp"
#include "cgrl/replay_buffer.hpp"
#include "cgrl/sac.hpp"

namespace cgrl {

struct NodeTransition {
  Transition transition;
  int from_node = 0;
  int to_node = 0;

  bool is_boundary() const { return from_node != to_node; }
};

enum class InternalKind { kLearned, kConvex };

struct InternalAgent {
  int node = 0;
  InternalKind kind = InternalKind::kLearned;
  std::optional<SacAgent> sac;  // set iff learned
  CartStemParams convex_params;  // used iff convex
  ReplayBuffer<NodeTransition> buffer{1};
};

InternalAgent make_learned_internal(int node, int observation_dim, int action_dim,
                                    const SacConfig& config, std::mt19937_64& rng);
InternalAgent make_convex_internal(int node, const CartStemParams& params);

/// Cart position minimizing |x_tips - x_goal| within `node`'s region.
double convex_cart_target(const CartStemState& state, CartStemNode node,
                          const CartStemParams& params);
/// Action encoding convex_cart_target; the environment applies the speed limit.
double convex_internal_act(const CartStemState& state, CartStemNode node,
                           const CartStemParams& params);

/// Throws InvalidInput when `current_node` is not the agent's node.
Eigen::VectorXd internal_act(const InternalAgent& agent, const Eigen::VectorXd& s,
                             int current_node, PolicyMode mode, std::mt19937_64& rng);

struct InternalUpdateReport {
  SacLossReport loss;
  int boundary_used = 0;
  int boundary_skipped = 0;  // neighbour critic missing
};

/// sac_update, except that a non-terminal boundary transition i->j takes its
/// bootstrap value from agent j (policy and target critics). `neighbors` maps
/// node ids to read-only agents.
InternalUpdateReport internal_update(InternalAgent& agent, std::span<const NodeTransition> batch,
                                     const std::map<int, const SacAgent*>& neighbors,
                                     std::mt19937_64& rng);

struct RoutedTransitions {
  std::map<int, std::vector<NodeTransition>> per_node;
  int boundary_count = 0;
};

/// Assigns transition t to the node labels[t]; labels has one entry per
/// visited state, trajectory.size() + 1 in total. Rejects labels outside the
/// graph and jumps between non-adjacent nodes.
RoutedTransitions route_transitions(const std::vector<Transition>& trajectory,
                                    const std::vector<int>& labels, const ConfigGraph& graph);

}  // namespace cgrl
