#pragma once

// Soft Actor-Critic with a tanh-squashed Gaussian policy, clipped double-Q
// critics, Polyak-averaged targets and a fixed entropy coefficient.

#include <Eigen/Core>

#include <random>
#include <span>
#include <string>
#include <vector>

#include "cgrl/replay_buffer.hpp"
#include "cgrl/tensor_nn.hpp"

namespace cgrl {

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;  // episode terminated at s_next; horizon truncation is not termination
};

struct SacConfig {
  std::vector<int> hidden{64, 64};
  double gamma = 0.99;
  double polyak = 0.005;
  double alpha = 0.2;
  double learning_rate = 3e-4;
  int batch_size = 256;
  std::size_t buffer_capacity = 100000;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct SacAgent {
  int observation_dim = 0;
  int action_dim = 0;
  MlpParams policy;  // obs -> [mean; log_std]
  MlpParams q1;      // [obs; action] -> Q
  MlpParams q2;
  MlpParams q1_target;
  MlpParams q2_target;
  AdamState policy_opt;
  AdamState q1_opt;
  AdamState q2_opt;
  double alpha = 0.2;
  double gamma = 0.99;
  double polyak = 0.005;
};

SacAgent make_sac_agent(int observation_dim, int action_dim, const SacConfig& config,
                        std::mt19937_64& rng);

enum class PolicyMode { kStochastic, kDeterministic };

struct PolicySample {
  Eigen::VectorXd action;
  double log_prob = 0.0;  // only meaningful for stochastic samples
};

PolicySample policy_sample(const SacAgent& agent, const Eigen::VectorXd& s, PolicyMode mode,
                           std::mt19937_64& rng);

/// Batched reparameterized samples; noise is drawn column by column.
struct PolicyBatch {
  Eigen::MatrixXd mean;     // act x B
  Eigen::MatrixXd log_std;  // clamped
  Eigen::MatrixXd noise;
  Eigen::MatrixXd action;   // tanh(mean + exp(log_std) * noise)
  Eigen::VectorXd log_prob;
  MlpCache cache;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> log_std_active;  // inside the clamp
};
PolicyBatch policy_sample_batch(const MlpParams& policy, int action_dim,
                                const Eigen::MatrixXd& observations, std::mt19937_64& rng);

/// Log-density of a tanh-squashed Gaussian at pre-squash value u.
double squashed_gaussian_log_prob(double u, double mean, double log_std);

struct SacLossReport {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double mean_q = 0.0;
  bool skipped = false;
  std::string reason;
};

/// min(Q1', Q2')(s, a') - alpha log pi(a'|s) with a' ~ pi(.|s), per column.
Eigen::VectorXd soft_state_values(const SacAgent& agent, const Eigen::MatrixXd& observations,
                                  std::mt19937_64& rng);

/// One critic step, one policy step and a Polyak update, regressing the critics
/// onto the given targets. A non-finite loss skips the update and flags it.
SacLossReport sac_update_with_targets(SacAgent& agent, std::span<const Transition> batch,
                                      const Eigen::VectorXd& targets, std::mt19937_64& rng);

/// Bootstrapped targets r + gamma (1 - done) V(s_next) from the agent itself.
SacLossReport sac_update(SacAgent& agent, std::span<const Transition> batch,
                         std::mt19937_64& rng);

std::vector<NamedTensor> export_sac(const SacAgent& agent, const std::string& prefix);
/// Loads policy and critics; targets are reset to the loaded critics.
void import_sac(SacAgent& agent, const TensorMap& tensors, const std::string& prefix);

}  // namespace cgrl
