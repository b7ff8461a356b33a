#pragma once

// The control loop: the selector labels the state, the evaluator picks a
// candidate node, then either the node's internal agent takes one primitive
// step or an option runs toward the chosen neighbour. Traces are routed back to
// every learner. Flat mode replaces all of it with one SAC agent.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cgrl/checkpoint.hpp"
#include "cgrl/config_graph.hpp"
#include "cgrl/environment.hpp"
#include "cgrl/evaluator.hpp"
#include "cgrl/external_agents.hpp"
#include "cgrl/internal_agents.hpp"
#include "cgrl/replay_buffer.hpp"
#include "cgrl/run_config.hpp"
#include "cgrl/sac.hpp"
#include "cgrl/selector.hpp"

namespace cgrl {

struct ExplorationSchedule {
  double std_floor_start = 0.5;
  double std_floor_end = 0.05;
  long iterations = 20000;

  double floor_at(long iteration) const;
};

struct ModeConfig {
  RunMode mode = RunMode::kGraph;
  SelectorSource selector_source = SelectorSource::kOracle;
  ExplorationSchedule exploration;
};

enum class AgentKind { kInternal, kExternalLearned, kExpert, kFlat };

struct StepRecord {
  Eigen::VectorXd observation;
  Eigen::VectorXd action;  // empty for expert steps
  Eigen::VectorXd next_observation;
  int node = 0;       // routing label of observation
  int next_node = 0;  // routing label of next_observation
  AgentKind agent = AgentKind::kInternal;
  int decision = -1;  // index into EpisodeTrace::decisions
  double reward = 0.0;
  double penalty = 0.0;
  bool terminal = false;
};

struct Decision {
  int first_step = 0;
  int steps = 0;
  int start_node = 0;
  int choice = 0;
  int end_node = 0;
  AgentKind agent = AgentKind::kInternal;
  int script = -1;  // expert script, if any
  OptionEnd end = OptionEnd::kTMax;
  double penalty = 0.0;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  std::vector<Decision> decisions;
  double reward_total = 0.0;
  double penalties_total = 0.0;
  double episode_return = 0.0;  // reward_total + penalties_total
  bool success = false;
  bool terminal = false;
  bool requires_contact = false;
  int selector_checks = 0;  // states scored by the learned selector
  int selector_correct = 0;
  int mislabels = 0;        // learned routing labels that disagreed with the oracle
};

/// Everything a run learns or consults.
struct Agents {
  RunMode mode = RunMode::kGraph;
  SelectorSource selector_source = SelectorSource::kOracle;
  ConfigGraph graph;
  std::vector<int> label_map;  // environment label -> graph id
  std::vector<InternalAgent> internal;  // by node id
  std::optional<ExternalAgent> external;
  std::map<int, int> expert_script;     // node -> script leaving it
  std::optional<EvaluatorModel> evaluator;
  ReplayBuffer<OptionTransition> evaluator_buffer{1};
  std::optional<SelectorModel> selector;  // learned selector, when trained
  std::optional<SacAgent> flat;
  ReplayBuffer<Transition> flat_buffer{1};
  int option_t_max = 15;
  double penalty_internal = -0.5;
  double penalty_external = 0.0;
};

/// The environment a run trains in. Flat rod agents get primitive grip control.
std::unique_ptr<Environment> make_environment(const RunConfig& config, bool for_evaluation = false);

Agents make_agents(const RunConfig& config, const Environment& env, std::mt19937_64& rng);

struct EpisodeOptions {
  bool explore = true;     // stochastic policies, exploring evaluator
  double std_floor = 0.0;  // evaluator exploration floor
};

/// Throws InvalidInput (with a diagnostic) on an agent/node mismatch.
EpisodeTrace run_episode(Environment& env, const Agents& agents, const EpisodeOptions& options,
                         std::uint64_t seed, std::mt19937_64& rng);

struct DispatchCounts {
  std::map<int, long> internal;  // transitions pushed, per node
  long external = 0;
  long evaluator = 0;
  long flat = 0;
  long boundary = 0;
};

/// Pushes a finished trace into every buffer. Rejects an inconsistent trace
/// before touching any buffer.
DispatchCounts dispatch_training(const EpisodeTrace& trace, Agents& agents);

struct UpdateSchedule {
  int batch_size = 256;
  int evaluator_batch_size = 128;
  long warmup_steps = 1000;
  int update_every = 1;
};

struct UpdateCounts {
  std::map<int, long> internal;
  long external = 0;
  long evaluator = 0;
  long flat = 0;
  long skipped = 0;
  long boundary_skipped = 0;
};

/// Runs the gradient updates owed for newly pushed data. `pending` carries
/// fractional credit between calls.
UpdateCounts run_updates(Agents& agents, const DispatchCounts& fresh, const UpdateSchedule& schedule,
                         std::map<std::string, long>& pending, long iteration, std::mt19937_64& rng);

struct EvalSummary {
  int episodes = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::vector<long> node_visits;       // primitive steps per node
  std::vector<long> choice_histogram;  // evaluator choices per node
  double mean_penalties = 0.0;
  double selector_accuracy = -1.0;     // -1 when no learned selector
  std::vector<EpisodeTrace> traces;    // kept when requested
};

/// Greedy evaluator, deterministic policies; episode i uses seed + i.
EvalSummary evaluate(Environment& env, const Agents& agents, int n_episodes, std::uint64_t seed,
                     bool keep_traces = false);

/// Swaps every internal agent of a CartStem run for its convex counterpart.
void use_convex_internals(Agents& agents, const CartStemParams& params);

Checkpoint make_checkpoint(const Agents& agents, const RunConfig& config, long iteration,
                           const std::map<std::string, std::string>& extra_metadata = {});
/// Loads tensors into freshly made agents. Internal agents that are convex in
/// `agents` ignore their stored tensors. Throws CheckpointError on a graph
/// fingerprint mismatch or missing tensors.
void restore_checkpoint(Agents& agents, const Checkpoint& checkpoint);

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // metrics, config snapshot, checkpoints
  std::optional<std::filesystem::path> selector_checkpoint;
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  Agents agents;
  long iterations = 0;
  long episodes = 0;
  std::vector<long> eval_iterations;
  std::vector<EvalSummary> evals;  // traces dropped
  std::optional<long> first_success_iteration;  // first eval meeting the threshold
  EvalSummary last_eval;
};

TrainResult train(const RunConfig& config, const TrainOptions& options = {});

}  // namespace cgrl
