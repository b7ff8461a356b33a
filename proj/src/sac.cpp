#include "cgrl/sac.hpp"

#include <cmath>
#include <numbers>

#include "cgrl/errors.hpp"

namespace cgrl {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|
double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

SacAgent make_sac_agent(int observation_dim, int action_dim, const SacConfig& config,
                        std::mt19937_64& rng) {
  if (observation_dim <= 0 || action_dim <= 0)
    throw InvalidInput("sac agent needs positive observation and action sizes");
  if (!(config.gamma >= 0.0 && config.gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
  SacAgent a;
  a.observation_dim = observation_dim;
  a.action_dim = action_dim;
  a.policy = init_mlp(observation_dim, config.hidden, 2 * action_dim, Activation::kRelu, rng);
  a.q1 = init_mlp(observation_dim + action_dim, config.hidden, 1, Activation::kRelu, rng);
  a.q2 = init_mlp(observation_dim + action_dim, config.hidden, 1, Activation::kRelu, rng);
  a.q1_target = a.q1;
  a.q2_target = a.q2;
  a.policy_opt = make_adam(a.policy.values.size(), config.learning_rate);
  a.q1_opt = make_adam(a.q1.values.size(), config.learning_rate);
  a.q2_opt = make_adam(a.q2.values.size(), config.learning_rate);
  a.alpha = config.alpha;
  a.gamma = config.gamma;
  a.polyak = config.polyak;
  return a;
}

double squashed_gaussian_log_prob(double u, double mean, double log_std) {
  const double z = (u - mean) * std::exp(-log_std);
  return -0.5 * z * z - log_std - kHalfLog2Pi - log_one_minus_tanh_sq(u);
}

PolicyBatch policy_sample_batch(const MlpParams& policy, int action_dim,
                                const Eigen::MatrixXd& observations, std::mt19937_64& rng) {
  PolicyBatch pb;
  const Eigen::MatrixXd out = mlp_forward_batch(policy, observations, &pb.cache);
  const Eigen::Index b = observations.cols();
  pb.mean = out.topRows(action_dim);
  const Eigen::MatrixXd raw_log_std = out.bottomRows(action_dim);
  pb.log_std_active = raw_log_std.array() >= kLogStdMin && raw_log_std.array() <= kLogStdMax;
  pb.log_std = raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  pb.noise.resize(action_dim, b);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < b; ++c)
    for (Eigen::Index i = 0; i < action_dim; ++i) pb.noise(i, c) = normal(rng);
  const Eigen::MatrixXd u =
      pb.mean + (pb.log_std.array().exp() * pb.noise.array()).matrix();
  pb.action = u.array().tanh().matrix();
  pb.log_prob.resize(b);
  for (Eigen::Index c = 0; c < b; ++c) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < action_dim; ++i)
      lp += -0.5 * pb.noise(i, c) * pb.noise(i, c) - pb.log_std(i, c) - kHalfLog2Pi -
            log_one_minus_tanh_sq(u(i, c));
    pb.log_prob[c] = lp;
  }
  return pb;
}

PolicySample policy_sample(const SacAgent& agent, const Eigen::VectorXd& s, PolicyMode mode,
                           std::mt19937_64& rng) {
  if (s.size() != agent.observation_dim)
    throw InvalidInput("policy: observation has " + std::to_string(s.size()) +
                       " entries, expected " + std::to_string(agent.observation_dim));
  PolicySample out;
  if (mode == PolicyMode::kDeterministic) {
    const Eigen::VectorXd o = mlp_forward(agent.policy, s);
    const Eigen::VectorXd mean = o.head(agent.action_dim);
    const Eigen::VectorXd log_std =
        o.tail(agent.action_dim).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    out.action = mean.array().tanh().matrix();
    for (Eigen::Index i = 0; i < mean.size(); ++i)
      out.log_prob += squashed_gaussian_log_prob(mean[i], mean[i], log_std[i]);
    return out;
  }
  const PolicyBatch pb = policy_sample_batch(agent.policy, agent.action_dim, s, rng);
  out.action = pb.action.col(0);
  out.log_prob = pb.log_prob[0];
  return out;
}

Eigen::VectorXd soft_state_values(const SacAgent& agent, const Eigen::MatrixXd& observations,
                                  std::mt19937_64& rng) {
  if (observations.cols() == 0) return {};
  const PolicyBatch pb = policy_sample_batch(agent.policy, agent.action_dim, observations, rng);
  const Eigen::MatrixXd sa = stack(observations, pb.action);
  const Eigen::MatrixXd q1 = mlp_forward_batch(agent.q1_target, sa);
  const Eigen::MatrixXd q2 = mlp_forward_batch(agent.q2_target, sa);
  return (q1.cwiseMin(q2).transpose() - agent.alpha * pb.log_prob);
}

SacLossReport sac_update_with_targets(SacAgent& agent, std::span<const Transition> batch,
                                      const Eigen::VectorXd& targets, std::mt19937_64& rng) {
  SacLossReport report;
  if (batch.empty()) throw InvalidInput("sac update needs a nonempty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  if (targets.size() != b) throw InvalidInput("sac update: one target per transition required");
  const int od = agent.observation_dim;
  const int ad = agent.action_dim;

  Eigen::MatrixXd s(od, b);
  Eigen::MatrixXd a(ad, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Transition& t = batch[static_cast<std::size_t>(c)];
    if (t.s.size() != od || t.a.size() != ad)
      throw InvalidInput("sac update: transition shape does not match the agent");
    s.col(c) = t.s;
    a.col(c) = t.a;
  }
  if (!targets.allFinite()) {
    report.skipped = true;
    report.reason = "non-finite critic target";
    return report;
  }

  // critics
  const Eigen::MatrixXd sa = stack(s, a);
  MlpCache c1, c2;
  const Eigen::MatrixXd q1 = mlp_forward_batch(agent.q1, sa, &c1);
  const Eigen::MatrixXd q2 = mlp_forward_batch(agent.q2, sa, &c2);
  const Eigen::MatrixXd d1 = q1 - targets.transpose();
  const Eigen::MatrixXd d2 = q2 - targets.transpose();
  const double inv_b = 1.0 / static_cast<double>(b);
  const double loss1 = 0.5 * d1.squaredNorm() * inv_b;
  const double loss2 = 0.5 * d2.squaredNorm() * inv_b;
  const MlpGradient g1 = mlp_backward_batch(agent.q1, c1, d1 * inv_b);
  const MlpGradient g2 = mlp_backward_batch(agent.q2, c2, d2 * inv_b);
  report.critic_loss = loss1 + loss2;
  report.mean_q = 0.5 * (q1.mean() + q2.mean());
  if (!std::isfinite(report.critic_loss) || !g1.params.allFinite() || !g2.params.allFinite()) {
    report.skipped = true;
    report.reason = "non-finite critic loss";
    return report;
  }
  adam_step(agent.q1.values, g1.params, agent.q1_opt, "q1");
  adam_step(agent.q2.values, g2.params, agent.q2_opt, "q2");

  // policy, reparameterized through the updated critics
  PolicyBatch pb = policy_sample_batch(agent.policy, ad, s, rng);
  const Eigen::MatrixXd sa_pi = stack(s, pb.action);
  MlpCache p1, p2;
  const Eigen::MatrixXd qp1 = mlp_forward_batch(agent.q1, sa_pi, &p1);
  const Eigen::MatrixXd qp2 = mlp_forward_batch(agent.q2, sa_pi, &p2);
  Eigen::MatrixXd up1 = Eigen::MatrixXd::Zero(1, b);
  Eigen::MatrixXd up2 = Eigen::MatrixXd::Zero(1, b);
  double policy_loss = 0.0;
  for (Eigen::Index c = 0; c < b; ++c) {
    const bool first = qp1(0, c) <= qp2(0, c);
    const double qmin = first ? qp1(0, c) : qp2(0, c);
    (first ? up1 : up2)(0, c) = -inv_b;
    policy_loss += agent.alpha * pb.log_prob[c] - qmin;
  }
  report.policy_loss = policy_loss * inv_b;
  const MlpGradient gq1 = mlp_backward_batch(agent.q1, p1, up1);
  const MlpGradient gq2 = mlp_backward_batch(agent.q2, p2, up2);
  const Eigen::MatrixXd dl_da = gq1.input.bottomRows(ad) + gq2.input.bottomRows(ad);

  const Eigen::ArrayXXd act = pb.action.array();
  const Eigen::ArrayXXd sigma_eps = pb.log_std.array().exp() * pb.noise.array();
  const Eigen::ArrayXXd dl_du =
      dl_da.array() * (1.0 - act.square()) + agent.alpha * inv_b * 2.0 * act;
  Eigen::MatrixXd upstream(2 * ad, b);
  upstream.topRows(ad) = dl_du.matrix();
  upstream.bottomRows(ad) =
      pb.log_std_active.select(dl_du * sigma_eps - agent.alpha * inv_b, 0.0).matrix();
  const MlpGradient gp = mlp_backward_batch(agent.policy, pb.cache, upstream);
  if (!std::isfinite(report.policy_loss) || !gp.params.allFinite()) {
    report.skipped = true;
    report.reason = "non-finite policy loss";
  } else {
    adam_step(agent.policy.values, gp.params, agent.policy_opt, "policy");
  }

  polyak_update(agent.q1_target, agent.q1, agent.polyak);
  polyak_update(agent.q2_target, agent.q2, agent.polyak);
  return report;
}

SacLossReport sac_update(SacAgent& agent, std::span<const Transition> batch,
                         std::mt19937_64& rng) {
  if (batch.empty()) throw InvalidInput("sac update needs a nonempty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd s_next(agent.observation_dim, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Transition& t = batch[static_cast<std::size_t>(c)];
    if (t.s_next.size() != agent.observation_dim)
      throw InvalidInput("sac update: transition shape does not match the agent");
    s_next.col(c) = t.s_next;
  }
  const Eigen::VectorXd v = soft_state_values(agent, s_next, rng);
  Eigen::VectorXd targets(b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Transition& t = batch[static_cast<std::size_t>(c)];
    targets[c] = t.r + (t.done ? 0.0 : agent.gamma * v[c]);
  }
  return sac_update_with_targets(agent, batch, targets, rng);
}

std::vector<NamedTensor> export_sac(const SacAgent& agent, const std::string& prefix) {
  std::vector<NamedTensor> out = export_mlp(agent.policy, prefix + "/policy");
  for (auto& t : export_mlp(agent.q1, prefix + "/q1")) out.push_back(std::move(t));
  for (auto& t : export_mlp(agent.q2, prefix + "/q2")) out.push_back(std::move(t));
  return out;
}

void import_sac(SacAgent& agent, const TensorMap& tensors, const std::string& prefix) {
  import_mlp(agent.policy, tensors, prefix + "/policy");
  import_mlp(agent.q1, tensors, prefix + "/q1");
  import_mlp(agent.q2, tensors, prefix + "/q2");
  agent.q1_target = agent.q1;
  agent.q2_target = agent.q2;
}

}  // namespace cgrl
