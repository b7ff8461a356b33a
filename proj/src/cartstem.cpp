#include "cgrl/cartstem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cgrl/errors.hpp"

namespace cgrl {

Eigen::VectorXd CartStemState::observation() const {
  Eigen::VectorXd obs(kCartStemObservationDim);
  obs << x_cart, x_tips, x_left, x_right, l_x, l_z, x_goal;
  return obs;
}

CartStemState CartStemState::from_observation(const Eigen::VectorXd& obs) {
  if (obs.size() != kCartStemObservationDim)
    throw InvalidInput("cartstem observation must have 7 entries");
  CartStemState s;
  s.x_cart = obs[0];
  s.x_tips = obs[1];
  s.x_left = obs[2];
  s.x_right = obs[3];
  s.l_x = obs[4];
  s.l_z = obs[5];
  s.x_goal = obs[6];
  return s;
}

double contact_clearance(double l_x, double l_z) {
  return 0.5 * std::sqrt(l_x * l_x + l_z * l_z);
}

FreeWindow free_window(double x_left, double x_right, double l_x, double l_z) {
  const double d = contact_clearance(l_x, l_z);
  return {x_left + d, x_right - d};
}

CartStemNode cartstem_contact_oracle(double x_cart, double x_left, double x_right, double l_x,
                                     double l_z) {
  const FreeWindow w = free_window(x_left, x_right, l_x, l_z);
  // equality counts as contact
  if (!(x_cart > w.left_pivot)) return CartStemNode::kLeft;
  if (!(x_cart < w.right_pivot)) return CartStemNode::kRight;
  return CartStemNode::kFree;
}

CartStemNode cartstem_contact_oracle(const CartStemState& state) {
  return cartstem_contact_oracle(state.x_cart, state.x_left, state.x_right, state.l_x,
                                 state.l_z);
}

double cartstem_tip(double x_cart, double x_left, double x_right, double l_x, double l_z,
                    double lever_ratio) {
  const FreeWindow w = free_window(x_left, x_right, l_x, l_z);
  switch (cartstem_contact_oracle(x_cart, x_left, x_right, l_x, l_z)) {
    case CartStemNode::kLeft:
      return w.left_pivot + lever_ratio * (w.left_pivot - x_cart);
    case CartStemNode::kRight:
      return w.right_pivot + lever_ratio * (w.right_pivot - x_cart);
    case CartStemNode::kFree:
      break;
  }
  return x_cart;
}

TipRange cartstem_tip_range(const CartStemState& state, CartStemNode region,
                            const CartStemParams& params) {
  const FreeWindow w = free_window(state.x_left, state.x_right, state.l_x, state.l_z);
  const double k = params.lever_ratio();
  switch (region) {
    case CartStemNode::kLeft:
      return {w.left_pivot, w.left_pivot + k * (w.left_pivot - params.x_min)};
    case CartStemNode::kRight:
      return {w.right_pivot - k * (params.x_max - w.right_pivot), w.right_pivot};
    case CartStemNode::kFree:
      break;
  }
  return {std::max(w.left_pivot, params.x_min), std::min(w.right_pivot, params.x_max)};
}

bool cartstem_goal_requires_contact(const CartStemState& state) {
  const FreeWindow w = free_window(state.x_left, state.x_right, state.l_x, state.l_z);
  return !(state.x_goal > w.left_pivot && state.x_goal < w.right_pivot);
}

double cartstem_action_to_target(double action, const CartStemParams& params) {
  return params.x_min + 0.5 * (action + 1.0) * (params.x_max - params.x_min);
}

double cartstem_target_to_action(double target, const CartStemParams& params) {
  return 2.0 * (target - params.x_min) / (params.x_max - params.x_min) - 1.0;
}

StepResult<CartStemState> cartstem_step(const CartStemState& state, double action,
                                        const CartStemParams& params) {
  if (!std::isfinite(action)) throw InvalidInput("cartstem: non-finite action");
  const double target = cartstem_action_to_target(std::clamp(action, -1.0, 1.0), params);
  const double move = std::clamp(target - state.x_cart, -params.v_max, params.v_max);

  StepResult<CartStemState> out;
  CartStemState& next = out.next_state;
  next = state;
  next.x_cart = std::clamp(state.x_cart + move, params.x_min, params.x_max);
  next.x_tips = cartstem_tip(next.x_cart, next.x_left, next.x_right, next.l_x, next.l_z,
                             params.lever_ratio());
  next.step_index = state.step_index + 1;
  out.reward = -std::abs(next.x_tips - next.x_goal);
  out.done = next.step_index >= params.horizon;
  out.terminal = false;
  out.config_label = static_cast<int>(cartstem_contact_oracle(next));
  return out;
}

CartStemState cartstem_reset(std::uint64_t seed, const CartStemParams& params,
                             GoalMode goal_mode) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  CartStemState s;
  s.l_x = params.obstacle_lx;
  s.l_z = params.obstacle_lz;
  s.x_left = uniform(params.left_centre_min, params.left_centre_max);
  s.x_right = uniform(params.right_centre_min, params.right_centre_max);
  s.x_cart = uniform(params.x_min, params.x_max);
  s.x_tips = cartstem_tip(s.x_cart, s.x_left, s.x_right, s.l_x, s.l_z, params.lever_ratio());
  s.step_index = 0;

  const TipRange free_tips = cartstem_tip_range(s, CartStemNode::kFree, params);
  const TipRange left_tips = cartstem_tip_range(s, CartStemNode::kLeft, params);
  const TipRange right_tips = cartstem_tip_range(s, CartStemNode::kRight, params);
  // Goals beyond one obstacle, reachable only by pressing on the opposite one,
  // and far enough past the window edge that resting there is not a success.
  const double margin = params.success_tolerance;
  const TipRange behind_right{free_tips.hi + margin, left_tips.hi};
  const TipRange behind_left{right_tips.lo, free_tips.lo - margin};

  const double coin = uniform(0.0, 1.0);
  const double side = uniform(0.0, 1.0);
  const double where = uniform(0.0, 1.0);
  bool contact_goal = false;
  switch (goal_mode) {
    case GoalMode::kMixed:
      contact_goal = coin < params.contact_goal_probability;
      break;
    case GoalMode::kContactOnly:
      contact_goal = true;
      break;
    case GoalMode::kFreeOnly:
      contact_goal = false;
      break;
  }
  const bool right_ok = behind_right.hi > behind_right.lo;
  const bool left_ok = behind_left.hi > behind_left.lo;
  if (contact_goal && (right_ok || left_ok)) {
    const bool use_right = right_ok && (!left_ok || side < 0.5);
    const TipRange r = use_right ? behind_right : behind_left;
    // open at the free-window end so the goal is strictly outside it
    s.x_goal = use_right ? r.hi - where * (r.hi - r.lo) : r.lo + where * (r.hi - r.lo);
    if (use_right && s.x_goal <= r.lo) s.x_goal = std::nextafter(r.lo, r.hi);
    if (!use_right && s.x_goal >= r.hi) s.x_goal = std::nextafter(r.hi, r.lo);
  } else {
    s.x_goal = free_tips.lo + where * (free_tips.hi - free_tips.lo);
    if (s.x_goal <= free_tips.lo) s.x_goal = std::nextafter(free_tips.lo, free_tips.hi);
  }
  return s;
}

bool cartstem_state_valid(const CartStemState& s, const CartStemParams& params) {
  return s.x_cart >= params.x_min && s.x_cart <= params.x_max &&
         s.x_left + 0.5 * s.l_x < s.x_right - 0.5 * s.l_x &&
         s.observation().allFinite();
}

CartStemEnv::CartStemEnv(CartStemParams params, GoalMode goal_mode)
    : params_(params), goal_mode_(goal_mode), state_(cartstem_reset(0, params_, goal_mode)) {}

Eigen::VectorXd CartStemEnv::reset(std::uint64_t seed) {
  state_ = cartstem_reset(seed, params_, goal_mode_);
  return state_.observation();
}

EnvStep CartStemEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 1) throw InvalidInput("cartstem: action must have one entry");
  const auto r = cartstem_step(state_, action[0], params_);
  state_ = r.next_state;
  return {state_.observation(), r.reward, r.done, r.terminal, r.config_label};
}

int CartStemEnv::oracle_label() const {
  return static_cast<int>(cartstem_contact_oracle(state_));
}

int CartStemEnv::label_from_observation(const Eigen::VectorXd& observation) const {
  return static_cast<int>(cartstem_contact_oracle(CartStemState::from_observation(observation)));
}

bool CartStemEnv::success() const {
  return std::abs(state_.x_tips - state_.x_goal) <= params_.success_tolerance;
}

bool CartStemEnv::goal_requires_contact() const {
  return cartstem_goal_requires_contact(state_);
}

std::unique_ptr<Environment> CartStemEnv::clone() const {
  return std::make_unique<CartStemEnv>(*this);
}

}  // namespace cgrl
