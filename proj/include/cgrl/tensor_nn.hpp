#pragma once

// Dense network kernels shared by every learned agent: MLP forward/backward,
// softmax, scaled dot-product attention and Adam.
//
// Batched routines use column-major batches: one sample per column.

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cgrl {

enum class Activation { kRelu, kTanh, kLinear };

/// Parameters of a fully connected network. All weights and biases live in a
/// single flat vector so optimizers and checkpoints treat every network alike.
/// Layer l stores W_l (out x in, column-major) followed by b_l.
struct MlpParams {
  std::vector<int> layer_sizes;         // num_layers() + 1 entries
  std::vector<Activation> activations;  // one per affine layer
  Eigen::VectorXd values;

  int num_layers() const { return static_cast<int>(activations.size()); }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }

  Eigen::Index weight_offset(int layer) const;
  Eigen::Index bias_offset(int layer) const;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
};

/// Counts parameters for the given topology.
Eigen::Index mlp_parameter_count(const std::vector<int>& layer_sizes);

/// Zero-filled network. Throws InvalidInput on a malformed topology.
MlpParams make_mlp(std::vector<int> layer_sizes, std::vector<Activation> activations);

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
MlpParams init_mlp(std::vector<int> layer_sizes, std::vector<Activation> activations,
                   std::mt19937_64& rng);

/// Hidden layers use `hidden`, the output layer is linear.
MlpParams init_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                   Activation hidden_activation, std::mt19937_64& rng);

struct MlpCache {
  // post-activation output of every layer; entry 0 is the input batch
  std::vector<Eigen::MatrixXd> layer_outputs;
};

struct MlpGradient {
  Eigen::VectorXd params;  // same layout as MlpParams::values
  Eigen::MatrixXd input;   // d(upstream . output)/d(input), one column per sample
};

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                                  MlpCache* cache = nullptr);

/// Gradient of sum_b upstream_b . output_b, accumulated over the batch.
MlpGradient mlp_backward_batch(const MlpParams& params, const MlpCache& cache,
                               const Eigen::MatrixXd& upstream);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);
MlpGradient mlp_gradient(const MlpParams& params, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& upstream);

/// Element-wise target <- tau * source + (1 - tau) * target.
void polyak_update(MlpParams& target, const MlpParams& source, double tau);

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(Eigen::Index size, double learning_rate);

/// One bias-corrected Adam step in place. A non-finite gradient leaves both
/// params and state untouched and throws NonFiniteError naming the tensor.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               std::string_view tensor_name = "params");

/// Shift-stable softmax. Throws InvalidInput on an empty vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

/// Column-wise softmax of a score matrix.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& scores);

/// Encoder mapping an observation to a query/key of dimension identifier_dim.
struct AttentionParams {
  MlpParams encoder;
  int identifier_dim = 0;
};

/// softmax(keys * query / sqrt(d_s)), one probability per key row.
Eigen::VectorXd attention_scores(const Eigen::VectorXd& query, const Eigen::MatrixXd& keys,
                                 int identifier_dim);

/// A named, shaped block of doubles, the unit of checkpoint storage.
struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> values;
};

using TensorMap = std::map<std::string, NamedTensor>;

/// Splits an MLP into per-layer tensors "<prefix>/w<l>" and "<prefix>/b<l>".
std::vector<NamedTensor> export_mlp(const MlpParams& params, const std::string& prefix);

/// Fills `params` (whose topology must already be set) from exported tensors.
/// Throws InvalidInput when a tensor is missing or has the wrong shape.
void import_mlp(MlpParams& params, const TensorMap& tensors, const std::string& prefix);

bool all_finite(const Eigen::VectorXd& v);

}  // namespace cgrl
