#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace cgrl {

/// Result of a pure step function on a concrete state type.
template <class State>
struct StepResult {
  State next_state;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;  // done for a reason other than the horizon; cuts bootstrapping
  int config_label = 0;   // oracle contact configuration of next_state
};

/// Type-erased step, as seen by agents.
struct EnvStep {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;
  int config_label = 0;
};

/// Episodic environment with a deterministic contact oracle. Labels returned by
/// the oracle index node_names().
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::vector<std::string> node_names() const = 0;

  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  /// Throws InvalidInput on a wrong-sized or non-finite action.
  virtual EnvStep step(const Eigen::VectorXd& action) = 0;
  virtual Eigen::VectorXd observation() const = 0;
  virtual int step_index() const = 0;

  virtual int oracle_label() const = 0;
  /// Same oracle, evaluated from an observation vector alone.
  virtual int label_from_observation(const Eigen::VectorXd& observation) const = 0;

  /// Whether the current state meets the task's success criterion.
  virtual bool success() const = 0;
  /// Whether the current episode's goal can only be met through contact.
  virtual bool goal_requires_contact() const { return false; }

  /// Scripted expert trajectories, if the environment provides any.
  virtual std::vector<std::string> expert_names() const { return {}; }
  virtual bool expert_available(int script) const;
  /// One primitive step of the given script. Throws OptionUnavailable when the
  /// script cannot start from the current state.
  virtual EnvStep step_expert(int script);

  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace cgrl
