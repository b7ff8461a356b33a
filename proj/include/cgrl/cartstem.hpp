#pragma once

// CartStemContact surrogate. A beam stands on a cart that moves horizontally
// between two obstacles. Out of contact the tip follows the cart; pressed
// against an obstacle the beam pivots on the obstacle corner and the tip moves
// opposite to the cart with lever ratio (H - z_c) / z_c.

#include <Eigen/Core>

#include <cstdint>
#include <memory>

#include "cgrl/environment.hpp"

namespace cgrl {

enum class CartStemNode { kLeft = 0, kFree = 1, kRight = 2 };

enum class GoalMode { kMixed, kContactOnly, kFreeOnly };

struct CartStemParams {
  double x_min = -6.0;
  double x_max = 6.0;
  double v_max = 1.0;
  double contact_height = 10.0;  // z_c
  double beam_height = 15.0;     // H
  double obstacle_lx = 2.0;
  double obstacle_lz = 2.0;
  double left_centre_min = -2.2;
  double left_centre_max = -2.05;
  double right_centre_min = 2.05;
  double right_centre_max = 2.2;
  double contact_goal_probability = 0.55;
  int horizon = 30;
  double success_tolerance = 0.5;

  double lever_ratio() const { return (beam_height - contact_height) / contact_height; }
};

struct CartStemState {
  double x_cart = 0.0;
  double x_tips = 0.0;
  double x_left = 0.0;
  double x_right = 0.0;
  double l_x = 0.0;
  double l_z = 0.0;
  double x_goal = 0.0;
  int step_index = 0;

  /// [x_cart, x_tips, x_left, x_right, l_x, l_z, x_goal]
  Eigen::VectorXd observation() const;
  static CartStemState from_observation(const Eigen::VectorXd& obs);
};

inline constexpr int kCartStemObservationDim = 7;

/// Half-diagonal of the obstacle cross-section, the contact clearance.
double contact_clearance(double l_x, double l_z);

struct FreeWindow {
  double left_pivot;   // x_left + d
  double right_pivot;  // x_right - d
};
FreeWindow free_window(double x_left, double x_right, double l_x, double l_z);

CartStemNode cartstem_contact_oracle(const CartStemState& state);
CartStemNode cartstem_contact_oracle(double x_cart, double x_left, double x_right, double l_x,
                                     double l_z);

double cartstem_tip(double x_cart, double x_left, double x_right, double l_x, double l_z,
                    double lever_ratio = 0.5);

/// Tip positions reachable from each region: [lo, hi].
struct TipRange {
  double lo;
  double hi;
};
TipRange cartstem_tip_range(const CartStemState& state, CartStemNode region,
                            const CartStemParams& params);

bool cartstem_goal_requires_contact(const CartStemState& state);

/// Maps an action in [-1, 1] to an absolute cart target, and back.
double cartstem_action_to_target(double action, const CartStemParams& params);
double cartstem_target_to_action(double target, const CartStemParams& params);

StepResult<CartStemState> cartstem_step(const CartStemState& state, double action,
                                        const CartStemParams& params);

CartStemState cartstem_reset(std::uint64_t seed, const CartStemParams& params,
                             GoalMode goal_mode = GoalMode::kMixed);

bool cartstem_state_valid(const CartStemState& state, const CartStemParams& params);

class CartStemEnv final : public Environment {
 public:
  explicit CartStemEnv(CartStemParams params = {}, GoalMode goal_mode = GoalMode::kMixed);

  std::string name() const override { return "cartstem"; }
  int observation_dim() const override { return kCartStemObservationDim; }
  int action_dim() const override { return 1; }
  std::vector<std::string> node_names() const override { return {"LEFT", "FREE", "RIGHT"}; }

  Eigen::VectorXd reset(std::uint64_t seed) override;
  EnvStep step(const Eigen::VectorXd& action) override;
  Eigen::VectorXd observation() const override { return state_.observation(); }
  int step_index() const override { return state_.step_index; }

  int oracle_label() const override;
  int label_from_observation(const Eigen::VectorXd& observation) const override;
  bool success() const override;
  bool goal_requires_contact() const override;

  std::unique_ptr<Environment> clone() const override;

  const CartStemState& state() const { return state_; }
  void set_state(const CartStemState& s) { state_ = s; }
  const CartStemParams& params() const { return params_; }
  void set_goal_mode(GoalMode mode) { goal_mode_ = mode; }

 private:
  CartStemParams params_;
  GoalMode goal_mode_;
  CartStemState state_;
};

}  // namespace cgrl
