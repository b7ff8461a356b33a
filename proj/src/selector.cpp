#include "cgrl/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cgrl/errors.hpp"

namespace cgrl {

namespace {

Eigen::MatrixXd stack_columns(const std::vector<Eigen::VectorXd>& states,
                              const std::vector<std::size_t>& idx, std::size_t begin,
                              std::size_t end) {
  Eigen::MatrixXd m(states[idx[begin]].size(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k)
    m.col(static_cast<Eigen::Index>(k - begin)) = states[idx[k]];
  return m;
}

Eigen::MatrixXd normalize(const SelectorModel& model, const Eigen::MatrixXd& x) {
  return ((x.colwise() - model.input_mean).array().colwise() * model.input_scale.array())
      .matrix();
}

// N x B attention logits for a batch of normalized observations.
Eigen::MatrixXd logits(const SelectorModel& model, const Eigen::MatrixXd& normalized,
                       MlpCache* cache) {
  const Eigen::MatrixXd keys = mlp_forward_batch(model.attention.encoder, normalized, cache);
  return model.identifiers * keys /
         std::sqrt(static_cast<double>(model.attention.identifier_dim));
}

int argmax_lowest(const Eigen::VectorXd& p) {
  int best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace

SelectorModel make_learned_selector(const ConfigGraph& graph, int observation_dim,
                                    const std::vector<int>& hidden, std::mt19937_64& rng) {
  SelectorModel m;
  m.mode = SelectorMode::kLearned;
  m.identifiers = graph.identifier_matrix();
  m.attention.identifier_dim = graph.identifier_dim();
  m.attention.encoder =
      init_mlp(observation_dim, hidden, graph.identifier_dim(), Activation::kRelu, rng);
  m.input_mean = Eigen::VectorXd::Zero(observation_dim);
  m.input_scale = Eigen::VectorXd::Ones(observation_dim);
  return m;
}

SelectorModel make_oracle_selector(const ConfigGraph& graph, ObservationOracle oracle) {
  SelectorModel m;
  m.mode = SelectorMode::kOracle;
  m.identifiers = graph.identifier_matrix();
  m.attention.identifier_dim = graph.identifier_dim();
  m.oracle = std::move(oracle);
  return m;
}

SelectorPrediction selector_predict(const SelectorModel& model, const Eigen::VectorXd& s) {
  SelectorPrediction out;
  if (model.mode == SelectorMode::kOracle) {
    if (!model.oracle) throw InvalidInput("oracle selector without an oracle");
    out.label = model.oracle(s);
    if (out.label < 0 || out.label >= model.num_nodes())
      throw InvalidInput("oracle returned unknown node " + std::to_string(out.label));
    out.probabilities = Eigen::VectorXd::Zero(model.num_nodes());
    out.probabilities[out.label] = 1.0;
    return out;
  }
  if (s.size() != model.attention.encoder.input_dim())
    throw InvalidInput("selector: observation has " + std::to_string(s.size()) +
                       " entries, encoder expects " +
                       std::to_string(model.attention.encoder.input_dim()));
  const Eigen::VectorXd key = mlp_forward(model.attention.encoder, normalize(model, s));
  out.probabilities = attention_scores(key, model.identifiers, model.attention.identifier_dim);
  out.label = argmax_lowest(out.probabilities);
  return out;
}

DatasetSplit split_dataset(std::size_t n, double split_fraction, std::uint64_t seed) {
  if (split_fraction < 0.0 || split_fraction >= 1.0)
    throw InvalidInput("split fraction must lie in [0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(split_fraction * n));
  DatasetSplit split;
  split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

double selector_accuracy(const SelectorModel& model, const std::vector<Eigen::VectorXd>& states,
                         const std::vector<int>& labels) {
  if (states.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < states.size(); ++i)
    if (selector_predict(model, states[i]).label == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(states.size());
}

SelectorTrainResult selector_train(SelectorModel model, const LabelledStateSet& data,
                                   const SelectorTrainConfig& config) {
  if (model.mode != SelectorMode::kLearned)
    throw InvalidInput("only a learned selector can be trained");
  if (data.states.size() != data.labels.size() || data.states.empty())
    throw InvalidInput("selector data needs one label per state");
  std::set<int> classes(data.labels.begin(), data.labels.end());
  for (int c : classes)
    if (c < 0 || c >= model.num_nodes())
      throw InvalidInput("selector label " + std::to_string(c) + " is not a graph node");
  if (classes.size() < 2)
    throw InvalidInput("selector training needs at least two classes, got " +
                       std::to_string(classes.size()));

  const DatasetSplit split = split_dataset(data.states.size(), data.split_fraction, config.seed);
  if (split.train.empty()) throw InvalidInput("selector training split is empty");

  // per-feature standardization from the training split
  const Eigen::Index dim = data.states.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  for (std::size_t i : split.train) {
    mean += data.states[i];
    sq += data.states[i].cwiseProduct(data.states[i]);
  }
  const double n_train = static_cast<double>(split.train.size());
  mean /= n_train;
  Eigen::VectorXd var = sq / n_train - mean.cwiseProduct(mean);
  model.input_mean = mean;
  model.input_scale = var.unaryExpr([](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; });

  std::mt19937_64 rng(config.seed ^ 0x5e1ec7027ull);
  AdamState opt = make_adam(model.attention.encoder.values.size(), config.learning_rate);
  std::vector<std::size_t> order = split.train;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch_size));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.attention.identifier_dim));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const Eigen::MatrixXd x = normalize(model, stack_columns(data.states, order, start, end));
      MlpCache cache;
      const Eigen::MatrixXd probs = softmax_columns(logits(model, x, &cache));
      Eigen::MatrixXd dlogits = probs;
      for (std::size_t k = start; k < end; ++k)
        dlogits(data.labels[order[k]], static_cast<Eigen::Index>(k - start)) -= 1.0;
      dlogits /= static_cast<double>(end - start);
      const Eigen::MatrixXd dkeys = model.identifiers.transpose() * dlogits * inv_sqrt_d;
      const MlpGradient g = mlp_backward_batch(model.attention.encoder, cache, dkeys);
      adam_step(model.attention.encoder.values, g.params, opt, "selector/encoder");
    }
  }

  SelectorTrainResult result;
  auto subset = [&data](const std::vector<std::size_t>& idx) {
    std::pair<std::vector<Eigen::VectorXd>, std::vector<int>> out;
    for (std::size_t i : idx) {
      out.first.push_back(data.states[i]);
      out.second.push_back(data.labels[i]);
    }
    return out;
  };
  const auto tr = subset(split.train);
  const auto va = subset(split.validation);
  result.train_accuracy = selector_accuracy(model, tr.first, tr.second);
  result.validation_accuracy = selector_accuracy(model, va.first, va.second);
  result.model = std::move(model);
  return result;
}

LabelledStateSet collect_labelled_states(Environment& env, int n, std::uint64_t seed,
                                         const std::vector<int>& label_map) {
  if (n < 1) throw InvalidInput("collect_labelled_states needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> action_dist(-1.0, 1.0);
  auto map_label = [&label_map](int l) {
    return label_map.empty() ? l : label_map.at(static_cast<std::size_t>(l));
  };
  LabelledStateSet out;
  out.states.reserve(static_cast<std::size_t>(n));
  out.labels.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(out.states.size()) < n) {
    out.states.push_back(env.reset(rng()));
    out.labels.push_back(map_label(env.oracle_label()));
    bool done = false;
    while (!done && static_cast<int>(out.states.size()) < n) {
      Eigen::VectorXd a(env.action_dim());
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = action_dist(rng);
      const EnvStep step = env.step(a);
      out.states.push_back(step.observation);
      out.labels.push_back(map_label(step.config_label));
      done = step.done;
    }
  }
  return out;
}

std::vector<NamedTensor> export_selector(const SelectorModel& model) {
  std::vector<NamedTensor> out = export_mlp(model.attention.encoder, "selector/encoder");
  const auto n = model.input_mean.size();
  out.push_back({"selector/input_mean", {n},
                 std::vector<double>(model.input_mean.data(), model.input_mean.data() + n)});
  out.push_back({"selector/input_scale", {n},
                 std::vector<double>(model.input_scale.data(), model.input_scale.data() + n)});
  return out;
}

void import_selector(SelectorModel& model, const TensorMap& tensors) {
  import_mlp(model.attention.encoder, tensors, "selector/encoder");
  for (auto [name, target] : {std::pair{"selector/input_mean", &model.input_mean},
                              std::pair{"selector/input_scale", &model.input_scale}}) {
    auto it = tensors.find(name);
    if (it == tensors.end() || it->second.values.size() != static_cast<std::size_t>(target->size()))
      throw InvalidInput(std::string("missing or mis-sized tensor ") + name);
    *target = Eigen::Map<const Eigen::VectorXd>(it->second.values.data(), target->size());
  }
}

void save_dataset(const std::filesystem::path& path, const LabelledStateSet& data,
                  std::uint64_t graph_fingerprint) {
  Checkpoint cp;
  cp.graph_fingerprint = graph_fingerprint;
  cp.metadata["kind"] = "labelled_states";
  cp.metadata["split_fraction"] = std::to_string(data.split_fraction);
  const std::int64_t n = static_cast<std::int64_t>(data.states.size());
  const std::int64_t dim = n ? data.states.front().size() : 0;
  NamedTensor states{"states", {n, dim}, {}};
  NamedTensor labels{"labels", {n}, {}};
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < dim; ++j) states.values.push_back(data.states[i][j]);
    labels.values.push_back(data.labels[i]);
  }
  cp.add(std::move(states));
  cp.add(std::move(labels));
  write_checkpoint(path, cp);
}

LabelledStateSet load_dataset(const std::filesystem::path& path,
                              std::optional<std::uint64_t> graph_fingerprint) {
  const Checkpoint cp = read_checkpoint(path, graph_fingerprint);
  const NamedTensor& states = cp.get("states");
  const NamedTensor& labels = cp.get("labels");
  if (states.shape.size() != 2 || labels.shape.size() != 1 || labels.shape[0] != states.shape[0])
    throw CheckpointError(CheckpointErrc::kShapeMismatch, "dataset tensors disagree in length");
  LabelledStateSet out;
  out.split_fraction = std::stod(cp.meta("split_fraction"));
  const auto n = states.shape[0];
  const auto dim = states.shape[1];
  for (std::int64_t i = 0; i < n; ++i) {
    out.states.emplace_back(
        Eigen::Map<const Eigen::VectorXd>(states.values.data() + i * dim, dim));
    out.labels.push_back(static_cast<int>(labels.values[i]));
  }
  return out;
}

}  // namespace cgrl
