#pragma once

// Planar regrasp surrogate of the two-finger rod manipulator. While the fingers
// hold the rod, moving the articulation rotates the rod with it; once released
// the rod stays put and the articulation moves freely. The articulation range
// bounds the rotation of a single grasp, so large targets need regrasps.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <numbers>
#include <vector>

#include "cgrl/environment.hpp"

namespace cgrl {

enum class RodNode { kFree = 0, kHold = 1 };
enum class Grip { kReleased, kHolding };
enum class RodExpert { kRelease = 0, kGrasp = 1 };

constexpr double degrees(double deg) { return deg * std::numbers::pi / 180.0; }

struct RodParams {
  double step_max = degrees(9.0);          // largest articulation change per step
  double articulation_max = degrees(90.0);
  double goal_min = degrees(180.0);
  double goal_max = degrees(320.0);
  double goal_sign = 1.0;
  int horizon = 120;
  double success_tolerance = degrees(2.0);
  // Primitive grip commands (flat agents only) close only within this window of
  // the anchoring articulation.
  double grasp_window = degrees(4.5);
  // Added to the reward of the step that reaches the goal. 0 keeps the reward a
  // pure telescoping progress measure.
  double success_bonus = 0.0;
};

struct RodState {
  double theta = 0.0;  // cumulative rod rotation, unwrapped
  double u = 0.0;      // articulation angle
  Grip grip = Grip::kReleased;
  double theta_goal = 0.0;
  int step_index = 0;

  /// [u / articulation_max, grip as 0/1, (theta_goal - theta) / 2pi]
  Eigen::VectorXd observation(const RodParams& params) const;
};

inline constexpr int kRodObservationDim = 3;

struct RodCommand {
  enum class GripCommand { kNone, kClose, kOpen };
  double articulation = 0.0;  // in [-1, 1], scaled by step_max
  GripCommand grip = GripCommand::kNone;
};

RodNode rod_contact_oracle(const RodState& state);

/// Reward is the normalized reduction of the remaining angle to the goal.
StepResult<RodState> rod_step(const RodState& state, const RodCommand& command,
                              const RodParams& params);
StepResult<RodState> rod_step(const RodState& state, double action, const RodParams& params);

RodState rod_reset(std::uint64_t seed, const RodParams& params);

/// Next command of an expert script as a function of the state alone.
/// Throws OptionUnavailable when the script cannot start from this state.
RodCommand rod_expert_command(RodExpert kind, const RodState& state, const RodParams& params);

/// Whole open-loop script from `state`: release is one opening step; grasp
/// centres the articulation in ceil(|u| / step_max) moves, then closes at u = 0.
std::vector<RodCommand> rod_expert_option(RodExpert kind, const RodState& state,
                                          const RodParams& params);

bool rod_state_valid(const RodState& state, const RodParams& params);

class RodEnv final : public Environment {
 public:
  /// With `primitive_grip` the action gains a second entry commanding the grip
  /// (> 0.5 close, < -0.5 open); used by agents that have no expert options.
  explicit RodEnv(RodParams params = {}, bool primitive_grip = false);

  std::string name() const override { return "rod"; }
  int observation_dim() const override { return kRodObservationDim; }
  int action_dim() const override { return primitive_grip_ ? 2 : 1; }
  std::vector<std::string> node_names() const override { return {"FREE", "HOLD"}; }

  Eigen::VectorXd reset(std::uint64_t seed) override;
  EnvStep step(const Eigen::VectorXd& action) override;
  Eigen::VectorXd observation() const override { return state_.observation(params_); }
  int step_index() const override { return state_.step_index; }

  int oracle_label() const override;
  int label_from_observation(const Eigen::VectorXd& observation) const override;
  bool success() const override;

  std::vector<std::string> expert_names() const override { return {"release", "grasp"}; }
  bool expert_available(int script) const override;
  EnvStep step_expert(int script) override;

  std::unique_ptr<Environment> clone() const override;

  const RodState& state() const { return state_; }
  void set_state(const RodState& s) { state_ = s; }
  const RodParams& params() const { return params_; }

 private:
  EnvStep apply(const RodCommand& command);

  RodParams params_;
  bool primitive_grip_;
  RodState state_;
};

}  // namespace cgrl
