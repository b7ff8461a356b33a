#include "cgrl/tensor_nn.hpp"

#include <cmath>
#include <limits>

#include "cgrl/errors.hpp"

namespace cgrl {

namespace {

void check_topology(const std::vector<int>& sizes, const std::vector<Activation>& acts) {
  if (sizes.size() < 2) throw InvalidInput("mlp needs at least two layer sizes");
  if (acts.size() + 1 != sizes.size())
    throw InvalidInput("mlp needs exactly one activation per affine layer");
  for (int s : sizes)
    if (s <= 0) throw InvalidInput("mlp layer sizes must be positive");
}

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::kLinear:
      break;
  }
}

// Scales `delta` in place by the activation derivative, expressed through the
// post-activation output.
void apply_activation_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& out,
                                 Activation act) {
  switch (act) {
    case Activation::kRelu:
      delta = (out.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::kTanh:
      delta.array() *= 1.0 - out.array().square();
      break;
    case Activation::kLinear:
      break;
  }
}

}  // namespace

Eigen::Index MlpParams::weight_offset(int layer) const {
  Eigen::Index offset = 0;
  for (int l = 0; l < layer; ++l)
    offset += static_cast<Eigen::Index>(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
  return offset;
}

Eigen::Index MlpParams::bias_offset(int layer) const {
  return weight_offset(layer) +
         static_cast<Eigen::Index>(layer_sizes[layer + 1]) * layer_sizes[layer];
}

Eigen::Map<const Eigen::MatrixXd> MlpParams::weight(int layer) const {
  return {values.data() + weight_offset(layer), layer_sizes[layer + 1], layer_sizes[layer]};
}

Eigen::Map<Eigen::MatrixXd> MlpParams::weight(int layer) {
  return {values.data() + weight_offset(layer), layer_sizes[layer + 1], layer_sizes[layer]};
}

Eigen::Map<const Eigen::VectorXd> MlpParams::bias(int layer) const {
  return {values.data() + bias_offset(layer), layer_sizes[layer + 1]};
}

Eigen::Map<Eigen::VectorXd> MlpParams::bias(int layer) {
  return {values.data() + bias_offset(layer), layer_sizes[layer + 1]};
}

Eigen::Index mlp_parameter_count(const std::vector<int>& layer_sizes) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += static_cast<Eigen::Index>(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
  return n;
}

MlpParams make_mlp(std::vector<int> layer_sizes, std::vector<Activation> activations) {
  check_topology(layer_sizes, activations);
  MlpParams p;
  p.values = Eigen::VectorXd::Zero(mlp_parameter_count(layer_sizes));
  p.layer_sizes = std::move(layer_sizes);
  p.activations = std::move(activations);
  return p;
}

MlpParams init_mlp(std::vector<int> layer_sizes, std::vector<Activation> activations,
                   std::mt19937_64& rng) {
  MlpParams p = make_mlp(std::move(layer_sizes), std::move(activations));
  for (int l = 0; l < p.num_layers(); ++l) {
    const double fan_in = p.layer_sizes[l];
    const double fan_out = p.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto w = p.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  }
  return p;
}

MlpParams init_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                   Activation hidden_activation, std::mt19937_64& rng) {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  std::vector<Activation> acts(hidden.size(), hidden_activation);
  acts.push_back(Activation::kLinear);
  return init_mlp(std::move(sizes), std::move(acts), rng);
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                                  MlpCache* cache) {
  if (inputs.rows() != params.input_dim())
    throw InvalidInput("mlp input has " + std::to_string(inputs.rows()) + " rows, expected " +
                       std::to_string(params.input_dim()));
  if (cache) {
    cache->layer_outputs.clear();
    cache->layer_outputs.reserve(params.num_layers() + 1);
    cache->layer_outputs.push_back(inputs);
  }
  Eigen::MatrixXd x = inputs;
  for (int l = 0; l < params.num_layers(); ++l) {
    Eigen::MatrixXd z = params.weight(l) * x;
    z.colwise() += params.bias(l);
    apply_activation(z, params.activations[l]);
    x = std::move(z);
    if (cache) cache->layer_outputs.push_back(x);
  }
  return x;
}

MlpGradient mlp_backward_batch(const MlpParams& params, const MlpCache& cache,
                               const Eigen::MatrixXd& upstream) {
  const int layers = params.num_layers();
  if (static_cast<int>(cache.layer_outputs.size()) != layers + 1)
    throw InvalidInput("mlp cache does not match network depth");
  if (upstream.rows() != params.output_dim() ||
      upstream.cols() != cache.layer_outputs.back().cols())
    throw InvalidInput("mlp upstream gradient has the wrong shape");

  MlpGradient grad;
  grad.params = Eigen::VectorXd::Zero(params.values.size());
  Eigen::MatrixXd delta = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    apply_activation_derivative(delta, cache.layer_outputs[l + 1], params.activations[l]);
    const Eigen::MatrixXd& prev = cache.layer_outputs[l];
    Eigen::Map<Eigen::MatrixXd> dw(grad.params.data() + params.weight_offset(l),
                                   params.layer_sizes[l + 1], params.layer_sizes[l]);
    dw.noalias() = delta * prev.transpose();
    Eigen::Map<Eigen::VectorXd> db(grad.params.data() + params.bias_offset(l),
                                   params.layer_sizes[l + 1]);
    db = delta.rowwise().sum();
    delta = params.weight(l).transpose() * delta;
  }
  grad.input = std::move(delta);
  return grad;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return mlp_forward_batch(params, input);
}

MlpGradient mlp_gradient(const MlpParams& params, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& upstream) {
  MlpCache cache;
  mlp_forward_batch(params, input, &cache);
  if (upstream.size() != params.output_dim())
    throw InvalidInput("upstream length " + std::to_string(upstream.size()) +
                       " does not match output dimension " +
                       std::to_string(params.output_dim()));
  return mlp_backward_batch(params, cache, upstream);
}

void polyak_update(MlpParams& target, const MlpParams& source, double tau) {
  if (target.values.size() != source.values.size())
    throw InvalidInput("polyak update between networks of different size");
  target.values = tau * source.values + (1.0 - tau) * target.values;
}

AdamState make_adam(Eigen::Index size, double learning_rate) {
  AdamState s;
  s.first_moment = Eigen::VectorXd::Zero(size);
  s.second_moment = Eigen::VectorXd::Zero(size);
  s.learning_rate = learning_rate;
  return s;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               std::string_view tensor_name) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw InvalidInput("adam: shape mismatch for tensor '" + std::string(tensor_name) + "'");
  if (!grads.allFinite())
    throw NonFiniteError("adam: non-finite gradient in tensor '" + std::string(tensor_name) +
                         "'");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  if (scores.size() == 0) throw InvalidInput("softmax of an empty vector");
  const double shift = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - shift).exp().matrix();
  return e / e.sum();
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& scores) {
  if (scores.rows() == 0) throw InvalidInput("softmax of an empty vector");
  Eigen::MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    const double shift = scores.col(c).maxCoeff();
    out.col(c) = (scores.col(c).array() - shift).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

Eigen::VectorXd attention_scores(const Eigen::VectorXd& query, const Eigen::MatrixXd& keys,
                                 int identifier_dim) {
  if (identifier_dim <= 0) throw InvalidInput("attention: identifier dimension must be > 0");
  if (keys.rows() == 0) throw InvalidInput("attention: at least one key is required");
  if (query.size() != identifier_dim || keys.cols() != identifier_dim)
    throw InvalidInput("attention: query/key length differs from identifier dimension");
  return softmax(keys * query / std::sqrt(static_cast<double>(identifier_dim)));
}

std::vector<NamedTensor> export_mlp(const MlpParams& params, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (int l = 0; l < params.num_layers(); ++l) {
    const auto w = params.weight(l);
    const auto b = params.bias(l);
    out.push_back({prefix + "/w" + std::to_string(l), {w.rows(), w.cols()},
                   std::vector<double>(w.data(), w.data() + w.size())});
    out.push_back({prefix + "/b" + std::to_string(l), {b.size()},
                   std::vector<double>(b.data(), b.data() + b.size())});
  }
  return out;
}

void import_mlp(MlpParams& params, const TensorMap& tensors, const std::string& prefix) {
  for (int l = 0; l < params.num_layers(); ++l) {
    auto w = params.weight(l);
    auto b = params.bias(l);
    const std::string wn = prefix + "/w" + std::to_string(l);
    const std::string bn = prefix + "/b" + std::to_string(l);
    auto wi = tensors.find(wn);
    auto bi = tensors.find(bn);
    if (wi == tensors.end() || bi == tensors.end())
      throw InvalidInput("missing tensor for '" + prefix + "' layer " + std::to_string(l));
    const std::vector<std::int64_t> wshape{w.rows(), w.cols()};
    const std::vector<std::int64_t> bshape{b.size()};
    if (wi->second.shape != wshape || bi->second.shape != bshape)
      throw InvalidInput("tensor shape mismatch for '" + prefix + "' layer " +
                         std::to_string(l));
    std::copy(wi->second.values.begin(), wi->second.values.end(), w.data());
    std::copy(bi->second.values.begin(), bi->second.values.end(), b.data());
  }
}

}  // namespace cgrl
