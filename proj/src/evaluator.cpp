#include "cgrl/evaluator.hpp"

#include <algorithm>
#include <cmath>

#include "cgrl/errors.hpp"

namespace cgrl {

namespace {

Eigen::MatrixXd candidate_keys(const EvaluatorModel& m, const std::vector<int>& candidates) {
  if (candidates.empty()) throw InvalidInput("evaluator: empty candidate set");
  Eigen::MatrixXd k(static_cast<Eigen::Index>(candidates.size()), m.identifiers.cols());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const int c = candidates[i];
    if (c < 0 || c >= m.identifiers.rows())
      throw InvalidInput("evaluator: unknown candidate " + std::to_string(c));
    k.row(static_cast<Eigen::Index>(i)) = m.identifiers.row(c);
  }
  return k;
}

// [s | h_c] for every candidate, one column each
Eigen::MatrixXd critic_inputs(const EvaluatorModel& m, const Eigen::VectorXd& s,
                              const std::vector<int>& candidates) {
  const auto od = s.size();
  Eigen::MatrixXd x(od + m.identifiers.cols(), static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    x.col(c).head(od) = s;
    x.col(c).tail(m.identifiers.cols()) = m.identifiers.row(candidates[i]).transpose();
  }
  return x;
}

void check_obs(const EvaluatorModel& m, const Eigen::VectorXd& s) {
  if (s.size() != m.observation_dim())
    throw InvalidInput("evaluator: observation has " + std::to_string(s.size()) +
                       " entries, expected " + std::to_string(m.observation_dim()));
}

}  // namespace

EvaluatorModel make_evaluator(const ConfigGraph& graph, int observation_dim,
                              const EvaluatorConfig& config, std::mt19937_64& rng) {
  if (observation_dim <= 0) throw InvalidInput("evaluator: observation size must be positive");
  if (!(config.gamma >= 0.0 && config.gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
  if (!(config.temperature > 0.0)) throw InvalidInput("evaluator temperature must be positive");
  EvaluatorModel m;
  const int ds = graph.identifier_dim();
  m.attention.identifier_dim = ds;
  m.attention.encoder = init_mlp(observation_dim, config.hidden, 2 * ds, Activation::kRelu, rng);
  m.critic = init_mlp(observation_dim + ds, config.hidden, 1, Activation::kRelu, rng);
  m.critic_target = m.critic;
  m.encoder_opt = make_adam(m.attention.encoder.values.size(), config.learning_rate);
  m.critic_opt = make_adam(m.critic.values.size(), config.learning_rate);
  m.identifiers = graph.identifier_matrix();
  m.gamma = config.gamma;
  m.temperature = config.temperature;
  m.polyak = config.polyak;
  return m;
}

EvaluatorScores evaluator_scores(const EvaluatorModel& model, const Eigen::VectorXd& s,
                                 const std::vector<int>& candidates) {
  check_obs(model, s);
  const Eigen::MatrixXd keys = candidate_keys(model, candidates);
  const int ds = model.identifier_dim();
  const Eigen::VectorXd q = mlp_forward(model.attention.encoder, s);
  EvaluatorScores out;
  out.mean = attention_scores(q.head(ds), keys, ds);
  const Eigen::VectorXd raw = keys * q.tail(ds) / std::sqrt(static_cast<double>(ds));
  out.std = raw.array().exp().max(kEvaluatorStdMin).matrix();
  return out;
}

int choose_from_scores(const EvaluatorScores& scores, const std::vector<int>& candidates,
                       ChoiceMode mode, std::mt19937_64& rng, double std_floor) {
  if (candidates.empty() || scores.mean.size() != static_cast<Eigen::Index>(candidates.size()))
    throw InvalidInput("evaluator: scores do not match the candidate set");
  Eigen::VectorXd alpha = scores.mean;
  if (mode == ChoiceMode::kExplore) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < alpha.size(); ++i)
      alpha[i] += std::max(scores.std[i], std_floor) * normal(rng);
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < alpha.size(); ++i)
    if (alpha[i] > alpha[best]) best = i;
  return candidates[static_cast<std::size_t>(best)];
}

int evaluator_choose(const EvaluatorModel& model, const Eigen::VectorXd& s,
                     const std::vector<int>& candidates, ChoiceMode mode, std::mt19937_64& rng,
                     double std_floor) {
  return choose_from_scores(evaluator_scores(model, s, candidates), candidates, mode, rng,
                            std_floor);
}

Eigen::VectorXd evaluator_q(const EvaluatorModel& model, const Eigen::VectorXd& s,
                            const std::vector<int>& candidates) {
  check_obs(model, s);
  candidate_keys(model, candidates);
  return mlp_forward_batch(model.critic, critic_inputs(model, s, candidates)).row(0).transpose();
}

std::vector<OptionTransition> build_option_transitions(const std::vector<Eigen::VectorXd>& states,
                                                       int start_node, int choice,
                                                       const std::vector<double>& rewards,
                                                       int end_node, bool terminal,
                                                       double penalty) {
  if (rewards.empty()) throw InvalidInput("option segment is empty");
  if (states.size() != rewards.size() + 1)
    throw InvalidInput("option segment needs one more state than rewards");
  const int t_len = static_cast<int>(rewards.size());
  std::vector<OptionTransition> out(rewards.size());
  double tail = 0.0;
  for (int k = t_len - 1; k >= 0; --k) {
    tail += rewards[k];
    OptionTransition& o = out[k];
    o.s_start = states[k];
    o.start_node = start_node;
    o.choice = choice;
    o.s_end = states.back();
    o.end_node = end_node;
    o.reward_sum = tail + penalty;
    o.t_remaining = t_len - k;
    o.terminal = terminal;
  }
  return out;
}

double bootstrap_weight(double gamma, int t_remaining) { return std::pow(gamma, t_remaining); }

Eigen::VectorXd evaluator_targets(const EvaluatorModel& model,
                                  std::span<const OptionTransition> batch,
                                  const ConfigGraph& graph) {
  const int od = model.observation_dim();
  const int ds = model.identifier_dim();
  std::vector<std::vector<int>> end_cands(batch.size());
  Eigen::Index n_end = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].s_end.size() != od)
      throw InvalidInput("evaluator update: observation size mismatch");
    end_cands[i] = graph.candidate_set(batch[i].end_node);
    n_end += static_cast<Eigen::Index>(end_cands[i].size());
  }
  Eigen::MatrixXd end_in(od + ds, n_end);
  for (std::size_t i = 0, ce = 0; i < batch.size(); ++i) {
    for (int c : end_cands[i]) {
      end_in.col(static_cast<Eigen::Index>(ce)).head(od) = batch[i].s_end;
      end_in.col(static_cast<Eigen::Index>(ce++)).tail(ds) = model.identifiers.row(c).transpose();
    }
  }
  const Eigen::MatrixXd q_end = mlp_forward_batch(model.critic_target, end_in);
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0, ce = 0; i < batch.size(); ++i) {
    const OptionTransition& o = batch[i];
    const auto m = static_cast<Eigen::Index>(end_cands[i].size());
    const double best = q_end.block(0, static_cast<Eigen::Index>(ce), 1, m).maxCoeff();
    ce += static_cast<std::size_t>(m);
    y[static_cast<Eigen::Index>(i)] =
        o.reward_sum + (o.terminal ? 0.0 : bootstrap_weight(model.gamma, o.t_remaining) * best);
  }
  return y;
}

EvaluatorLossReport evaluator_update(EvaluatorModel& model, std::span<const OptionTransition> batch,
                                     const ConfigGraph& graph) {
  EvaluatorLossReport report;
  if (batch.empty()) throw InvalidInput("evaluator update needs a nonempty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  const int od = model.observation_dim();
  const int ds = model.identifier_dim();
  const double inv_b = 1.0 / static_cast<double>(b);
  const double inv_sqrt_ds = 1.0 / std::sqrt(static_cast<double>(ds));

  std::vector<std::vector<int>> start_cands(batch.size());
  Eigen::Index n_start = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const OptionTransition& o = batch[i];
    if (o.s_start.size() != od || o.s_end.size() != od)
      throw InvalidInput("evaluator update: observation size mismatch");
    if (o.t_remaining < 1) throw InvalidInput("evaluator update: T_remaining must be at least 1");
    start_cands[i] = graph.candidate_set(o.start_node);
    if (std::find(start_cands[i].begin(), start_cands[i].end(), o.choice) == start_cands[i].end())
      throw InvalidInput("evaluator update: choice outside the start node's candidate set");
    n_start += static_cast<Eigen::Index>(start_cands[i].size());
  }
  Eigen::MatrixXd start_in(od + ds, n_start);
  Eigen::MatrixXd chosen_in(od + ds, b);
  Eigen::MatrixXd s_start(od, b);
  for (Eigen::Index i = 0, cs = 0; i < b; ++i) {
    const OptionTransition& o = batch[static_cast<std::size_t>(i)];
    for (int c : start_cands[i]) {
      start_in.col(cs).head(od) = o.s_start;
      start_in.col(cs++).tail(ds) = model.identifiers.row(c).transpose();
    }
    chosen_in.col(i).head(od) = o.s_start;
    chosen_in.col(i).tail(ds) = model.identifiers.row(o.choice).transpose();
    s_start.col(i) = o.s_start;
  }

  const Eigen::VectorXd y = evaluator_targets(model, batch, graph);
  if (!y.allFinite()) {
    report.skipped = true;
    report.reason = "non-finite evaluator target";
    return report;
  }

  MlpCache cc;
  const Eigen::MatrixXd q = mlp_forward_batch(model.critic, chosen_in, &cc);
  const Eigen::MatrixXd diff = q - y.transpose();
  report.critic_loss = 0.5 * diff.squaredNorm() * inv_b;
  const MlpGradient gc = mlp_backward_batch(model.critic, cc, diff * inv_b);
  if (!std::isfinite(report.critic_loss) || !gc.params.allFinite()) {
    report.skipped = true;
    report.reason = "non-finite evaluator critic loss";
    return report;
  }
  adam_step(model.critic.values, gc.params, model.critic_opt, "evaluator/critic");

  // actor heads against the updated critic
  const Eigen::MatrixXd q_start = mlp_forward_batch(model.critic, start_in);
  MlpCache ec;
  const Eigen::MatrixXd enc = mlp_forward_batch(model.attention.encoder, s_start, &ec);
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(2 * ds, b);
  for (Eigen::Index i = 0, cs = 0; i < b; ++i) {
    const OptionTransition& o = batch[static_cast<std::size_t>(i)];
    const auto m = static_cast<Eigen::Index>(start_cands[i].size());
    const Eigen::VectorXd qc = q_start.block(0, cs, 1, m).transpose();
    cs += m;
    const Eigen::VectorXd target = softmax(qc / model.temperature);
    const Eigen::MatrixXd keys = model.identifiers(start_cands[i], Eigen::all);
    const Eigen::VectorXd alpha = attention_scores(enc.col(i).head(ds), keys, ds);
    report.actor_loss -= (target.array() * alpha.array().max(1e-300).log()).sum() * inv_b;
    upstream.col(i).head(ds) = keys.transpose() * (alpha - target) * inv_sqrt_ds * inv_b;

    const Eigen::VectorXd h = model.identifiers.row(o.choice).transpose();
    const double raw = h.dot(enc.col(i).tail(ds)) * inv_sqrt_ds;
    const double td = std::clamp(std::abs(y[i] - q(0, i)), kEvaluatorStdMin, 1.0);
    const double err = raw - std::log(td);
    report.std_loss += 0.5 * err * err * inv_b;
    upstream.col(i).tail(ds) = h * err * inv_sqrt_ds * inv_b;
  }
  const MlpGradient ge = mlp_backward_batch(model.attention.encoder, ec, upstream);
  if (!std::isfinite(report.actor_loss) || !std::isfinite(report.std_loss) ||
      !ge.params.allFinite()) {
    report.skipped = true;
    report.reason = "non-finite evaluator actor loss";
  } else {
    adam_step(model.attention.encoder.values, ge.params, model.encoder_opt, "evaluator/encoder");
  }
  polyak_update(model.critic_target, model.critic, model.polyak);
  return report;
}

std::vector<NamedTensor> export_evaluator(const EvaluatorModel& model, const std::string& prefix) {
  std::vector<NamedTensor> out = export_mlp(model.attention.encoder, prefix + "/encoder");
  for (auto& t : export_mlp(model.critic, prefix + "/critic")) out.push_back(std::move(t));
  return out;
}

void import_evaluator(EvaluatorModel& model, const TensorMap& tensors, const std::string& prefix) {
  import_mlp(model.attention.encoder, tensors, prefix + "/encoder");
  import_mlp(model.critic, tensors, prefix + "/critic");
  model.critic_target = model.critic;
}

}  // namespace cgrl
