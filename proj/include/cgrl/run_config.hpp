#pragma once

// Experiment configuration, read from an INI-style file with sections and
// key = value pairs. Unknown keys are rejected so typos do not pass silently.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgrl/cartstem.hpp"
#include "cgrl/config_graph.hpp"
#include "cgrl/evaluator.hpp"
#include "cgrl/rod.hpp"
#include "cgrl/sac.hpp"
#include "cgrl/selector.hpp"

namespace cgrl {

enum class RunMode { kGraph, kFlat, kGraphConvex };
enum class SelectorSource { kOracle, kLearned };
enum class ExternalKind { kLearned, kExpert };

std::string to_string(RunMode mode);
/// Accepts graph, flat, graph-convex (also graph_convex).
RunMode parse_run_mode(const std::string& text);

struct GraphSpec {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> gathered;
  std::map<std::string, std::vector<double>> identifiers;  // empty -> one-hot
};

struct TrainingConfig {
  long iterations = 60000;
  long eval_interval = 2000;
  int eval_episodes = 50;
  std::uint64_t eval_seed = 1000000;
  long checkpoint_interval = 0;  // 0: final checkpoint only
  long warmup_steps = 1000;
  int update_every = 1;          // primitive steps per gradient update, per learner
  double success_threshold = 0.8;
  double std_floor_start = 0.5;  // evaluator exploration
  double std_floor_end = 0.05;
  long std_floor_iterations = 20000;
  GoalMode eval_goal_mode = GoalMode::kContactOnly;  // cartstem only
  bool record_wall_time = false;
};

struct SelectorStage {
  int samples = 50000;
  std::vector<int> hidden{64, 64};
  double split_fraction = 0.2;
  SelectorTrainConfig train;
};

struct RunConfig {
  std::string env = "cartstem";
  RunMode mode = RunMode::kGraph;
  std::uint64_t seed = 1;
  SelectorSource selector_source = SelectorSource::kOracle;

  CartStemParams cartstem;
  RodParams rod;
  GraphSpec graph;
  SacConfig sac;
  ExternalKind external_kind = ExternalKind::kLearned;
  int option_t_max = 15;
  EvaluatorConfig evaluator;
  double penalty_internal = -0.5;
  double penalty_external = 0.0;
  TrainingConfig training;
  SelectorStage selector;
};

/// Built-in defaults for "cartstem" or "rod".
RunConfig default_run_config(const std::string& env);

/// Throws InvalidInput naming the first offending key or value.
RunConfig parse_run_config(const std::string& text);
/// Throws InvalidInput("config not found: ...") when the file is missing.
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

/// Every semantic problem: ranges, graph structure, env/graph node agreement.
std::vector<std::string> validate_run_config(const RunConfig& config);

ConfigGraph build_graph(const RunConfig& config);

}  // namespace cgrl
