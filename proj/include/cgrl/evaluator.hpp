#pragma once

// Meta-controller over the candidate set V_i + {i}: an attention actor whose
// encoded state queries the candidate identifiers (two heads, mean and std of
// alpha), and a semi-Markov critic Q(s, h_j) trained on option transitions.

#include <Eigen/Core>

#include <random>
#include <span>
#include <string>
#include <vector>

#include "cgrl/config_graph.hpp"
#include "cgrl/tensor_nn.hpp"

namespace cgrl {

struct EvaluatorConfig {
  std::vector<int> hidden{64, 64};
  double gamma = 0.99;
  double polyak = 0.01;
  double learning_rate = 1e-3;
  double temperature = 0.1;  // of the softmax(Q / T) the mean head imitates
  int batch_size = 128;
  std::size_t buffer_capacity = 50000;
};

inline constexpr double kEvaluatorStdMin = 1e-3;

struct EvaluatorModel {
  AttentionParams attention;    // encoder: obs -> [q_mean; q_std], 2 d_s rows
  MlpParams critic;             // [obs | h_j] -> Q
  MlpParams critic_target;
  AdamState encoder_opt;
  AdamState critic_opt;
  Eigen::MatrixXd identifiers;  // N x d_s, row = node id
  double gamma = 0.99;
  double temperature = 0.1;
  double polyak = 0.01;

  int observation_dim() const { return attention.encoder.input_dim(); }
  int identifier_dim() const { return attention.identifier_dim; }
};

EvaluatorModel make_evaluator(const ConfigGraph& graph, int observation_dim,
                              const EvaluatorConfig& config, std::mt19937_64& rng);

struct EvaluatorScores {
  Eigen::VectorXd mean;  // softmax over candidates
  Eigen::VectorXd std;   // exp(raw), floored at kEvaluatorStdMin
};

/// Candidates must be graph ids; order is kept.
EvaluatorScores evaluator_scores(const EvaluatorModel& model, const Eigen::VectorXd& s,
                                 const std::vector<int>& candidates);

enum class ChoiceMode { kExplore, kGreedy };

/// Explore samples alpha_j ~ N(mean_j, max(std_j, std_floor)) and takes the
/// argmax; greedy takes the argmax of the mean. Ties go to the earliest
/// candidate, i.e. the lowest id for a candidate_set.
int choose_from_scores(const EvaluatorScores& scores, const std::vector<int>& candidates,
                       ChoiceMode mode, std::mt19937_64& rng, double std_floor = 0.0);
int evaluator_choose(const EvaluatorModel& model, const Eigen::VectorXd& s,
                     const std::vector<int>& candidates, ChoiceMode mode, std::mt19937_64& rng,
                     double std_floor = 0.0);

/// Critic values for each candidate.
Eigen::VectorXd evaluator_q(const EvaluatorModel& model, const Eigen::VectorXd& s,
                            const std::vector<int>& candidates);

struct OptionTransition {
  Eigen::VectorXd s_start;  // state at t + k
  int start_node = 0;
  int choice = 0;
  Eigen::VectorXd s_end;    // state at t + T
  int end_node = 0;
  double reward_sum = 0.0;  // sum of r_{t+k} .. r_{t+T-1}, plus penalty
  int t_remaining = 1;      // T - k
  bool terminal = false;
};

/// One transition per k in [0, T-1]. `states` holds s_t .. s_{t+T}; `penalty`
/// is added to every reward_sum.
std::vector<OptionTransition> build_option_transitions(const std::vector<Eigen::VectorXd>& states,
                                                       int start_node, int choice,
                                                       const std::vector<double>& rewards,
                                                       int end_node, bool terminal,
                                                       double penalty = 0.0);

struct EvaluatorLossReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double std_loss = 0.0;
  bool skipped = false;
  std::string reason;
};

/// gamma^T_remaining, the weight of the bootstrap term.
double bootstrap_weight(double gamma, int t_remaining);

/// reward_sum + gamma^T_remaining (1 - terminal) max_c Q_target(s_end, h_c)
/// over candidate_set(end_node), per transition.
Eigen::VectorXd evaluator_targets(const EvaluatorModel& model,
                                  std::span<const OptionTransition> batch,
                                  const ConfigGraph& graph);

/// Critic regression onto reward_sum + gamma^T_remaining (1 - terminal)
/// max_c Q_target(s_end, h_c) over candidate_set(end_node); cross-entropy of
/// the mean head toward softmax(Q / temperature) over candidate_set(start_node);
/// the std head regresses log std of the chosen candidate toward log |TD|
/// clipped to [1e-3, 1]. Then a Polyak update of the target critic.
EvaluatorLossReport evaluator_update(EvaluatorModel& model, std::span<const OptionTransition> batch,
                                     const ConfigGraph& graph);

std::vector<NamedTensor> export_evaluator(const EvaluatorModel& model, const std::string& prefix);
void import_evaluator(EvaluatorModel& model, const TensorMap& tensors, const std::string& prefix);

}  // namespace cgrl
