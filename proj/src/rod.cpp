#include "cgrl/rod.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cgrl/errors.hpp"

namespace cgrl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Moves needed to bring the articulation back to zero. The small slack keeps
// exact multiples of step_max (90 / 9 degrees) from rounding up.
int centring_moves(double u, const RodParams& params) {
  return static_cast<int>(std::ceil(std::abs(u) / params.step_max - 1e-9));
}

}  // namespace

Eigen::VectorXd RodState::observation(const RodParams& params) const {
  Eigen::VectorXd obs(kRodObservationDim);
  obs << u / params.articulation_max, grip == Grip::kHolding ? 1.0 : 0.0,
      (theta_goal - theta) / kTwoPi;
  return obs;
}

RodNode rod_contact_oracle(const RodState& state) {
  return state.grip == Grip::kHolding ? RodNode::kHold : RodNode::kFree;
}

StepResult<RodState> rod_step(const RodState& state, const RodCommand& command,
                              const RodParams& params) {
  if (!std::isfinite(command.articulation)) throw InvalidInput("rod: non-finite action");
  StepResult<RodState> out;
  RodState& next = out.next_state;
  next = state;
  next.step_index = state.step_index + 1;

  using GC = RodCommand::GripCommand;
  if (command.grip == GC::kClose && state.grip == Grip::kReleased) {
    if (std::abs(state.u) <= params.grasp_window) {
      next.grip = Grip::kHolding;
      next.u = 0.0;
    }
  } else if (command.grip == GC::kOpen && state.grip == Grip::kHolding) {
    next.grip = Grip::kReleased;
  } else {
    const double delta = std::clamp(command.articulation, -1.0, 1.0) * params.step_max;
    const double u_next =
        std::clamp(state.u + delta, -params.articulation_max, params.articulation_max);
    if (state.grip == Grip::kHolding) next.theta = state.theta + (u_next - state.u);
    next.u = u_next;
  }

  const double scale = std::abs(state.theta_goal);
  out.reward = scale > 0.0 ? (std::abs(state.theta_goal - state.theta) -
                              std::abs(next.theta_goal - next.theta)) /
                                 scale
                           : 0.0;
  out.terminal = std::abs(next.theta - next.theta_goal) <= params.success_tolerance;
  if (out.terminal) out.reward += params.success_bonus;
  out.done = out.terminal || next.step_index >= params.horizon;
  out.config_label = static_cast<int>(rod_contact_oracle(next));
  return out;
}

StepResult<RodState> rod_step(const RodState& state, double action, const RodParams& params) {
  return rod_step(state, RodCommand{action, RodCommand::GripCommand::kNone}, params);
}

RodState rod_reset(std::uint64_t seed, const RodParams& params) {
  std::mt19937_64 rng(seed);
  RodState s;
  s.theta = 0.0;
  s.grip = Grip::kReleased;
  s.u = std::uniform_real_distribution<double>(-params.articulation_max,
                                               params.articulation_max)(rng);
  const double magnitude =
      params.goal_max > params.goal_min
          ? std::uniform_real_distribution<double>(params.goal_min, params.goal_max)(rng)
          : params.goal_min;
  s.theta_goal = params.goal_sign < 0.0 ? -magnitude : magnitude;
  s.step_index = 0;
  return s;
}

RodCommand rod_expert_command(RodExpert kind, const RodState& state, const RodParams& params) {
  using GC = RodCommand::GripCommand;
  switch (kind) {
    case RodExpert::kRelease:
      if (state.grip != Grip::kHolding)
        throw OptionUnavailable("release expert requires the rod to be held");
      return {0.0, GC::kOpen};
    case RodExpert::kGrasp:
      if (state.grip != Grip::kReleased)
        throw OptionUnavailable("grasp expert requires released fingers");
      if (centring_moves(state.u, params) == 0) return {0.0, GC::kClose};
      return {std::clamp(-state.u / params.step_max, -1.0, 1.0), GC::kNone};
  }
  throw InvalidInput("unknown rod expert");
}

std::vector<RodCommand> rod_expert_option(RodExpert kind, const RodState& state,
                                          const RodParams& params) {
  std::vector<RodCommand> script;
  RodState s = state;
  for (;;) {
    const RodCommand cmd = rod_expert_command(kind, s, params);
    script.push_back(cmd);
    if (cmd.grip != RodCommand::GripCommand::kNone) break;
    // Centring moves never touch theta: the fingers are open.
    s.u = std::clamp(s.u + cmd.articulation * params.step_max, -params.articulation_max,
                     params.articulation_max);
    if (centring_moves(s.u, params) == 0) s.u = 0.0;
  }
  return script;
}

bool rod_state_valid(const RodState& s, const RodParams& params) {
  return std::abs(s.u) <= params.articulation_max + 1e-12 && std::isfinite(s.theta) &&
         std::isfinite(s.theta_goal);
}

RodEnv::RodEnv(RodParams params, bool primitive_grip)
    : params_(params), primitive_grip_(primitive_grip), state_(rod_reset(0, params_)) {}

Eigen::VectorXd RodEnv::reset(std::uint64_t seed) {
  state_ = rod_reset(seed, params_);
  return observation();
}

EnvStep RodEnv::apply(const RodCommand& command) {
  const auto r = rod_step(state_, command, params_);
  state_ = r.next_state;
  return {observation(), r.reward, r.done, r.terminal, r.config_label};
}

EnvStep RodEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != action_dim())
    throw InvalidInput("rod: action must have " + std::to_string(action_dim()) + " entries");
  if (!action.allFinite()) throw InvalidInput("rod: non-finite action");
  RodCommand cmd{action[0], RodCommand::GripCommand::kNone};
  if (primitive_grip_) {
    if (action[1] > 0.5) cmd.grip = RodCommand::GripCommand::kClose;
    if (action[1] < -0.5) cmd.grip = RodCommand::GripCommand::kOpen;
  }
  return apply(cmd);
}

int RodEnv::oracle_label() const { return static_cast<int>(rod_contact_oracle(state_)); }

int RodEnv::label_from_observation(const Eigen::VectorXd& observation) const {
  if (observation.size() != kRodObservationDim)
    throw InvalidInput("rod observation must have 3 entries");
  return observation[1] > 0.5 ? static_cast<int>(RodNode::kHold)
                              : static_cast<int>(RodNode::kFree);
}

bool RodEnv::success() const {
  return std::abs(state_.theta - state_.theta_goal) <= params_.success_tolerance;
}

bool RodEnv::expert_available(int script) const {
  switch (script) {
    case static_cast<int>(RodExpert::kRelease):
      return state_.grip == Grip::kHolding;
    case static_cast<int>(RodExpert::kGrasp):
      return state_.grip == Grip::kReleased;
    default:
      return false;
  }
}

EnvStep RodEnv::step_expert(int script) {
  if (script != static_cast<int>(RodExpert::kRelease) &&
      script != static_cast<int>(RodExpert::kGrasp))
    throw OptionUnavailable("rod has no expert script " + std::to_string(script));
  return apply(rod_expert_command(static_cast<RodExpert>(script), state_, params_));
}

std::unique_ptr<Environment> RodEnv::clone() const { return std::make_unique<RodEnv>(*this); }

}  // namespace cgrl
