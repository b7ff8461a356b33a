#pragma once

// Selector: which configuration space does an observation belong to?
//
// Learned mode encodes the (normalized) observation with an MLP and scores it
// against every node identifier with scaled dot-product attention; the
// resulting softmax is p(s in S_i). Oracle mode wraps a deterministic contact
// oracle and returns one-hot probabilities.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "cgrl/checkpoint.hpp"
#include "cgrl/config_graph.hpp"
#include "cgrl/environment.hpp"
#include "cgrl/tensor_nn.hpp"

namespace cgrl {

enum class SelectorMode { kLearned, kOracle };

/// Maps an observation to a node id of the graph.
using ObservationOracle = std::function<int(const Eigen::VectorXd&)>;

struct SelectorModel {
  SelectorMode mode = SelectorMode::kLearned;
  AttentionParams attention;
  Eigen::MatrixXd identifiers;  // N x d_s, row i = h_i
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  ObservationOracle oracle;

  int num_nodes() const { return static_cast<int>(identifiers.rows()); }
};

SelectorModel make_learned_selector(const ConfigGraph& graph, int observation_dim,
                                    const std::vector<int>& hidden, std::mt19937_64& rng);
SelectorModel make_oracle_selector(const ConfigGraph& graph, ObservationOracle oracle);

struct SelectorPrediction {
  int label = 0;
  Eigen::VectorXd probabilities;
};

/// Throws InvalidInput when the observation size does not match the encoder.
SelectorPrediction selector_predict(const SelectorModel& model, const Eigen::VectorXd& s);

struct LabelledStateSet {
  std::vector<Eigen::VectorXd> states;
  std::vector<int> labels;
  double split_fraction = 0.2;  // held out for validation
};

struct SelectorTrainConfig {
  int epochs = 40;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct SelectorTrainResult {
  SelectorModel model;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

/// Cross-entropy training against one-hot targets with Adam mini-batches.
/// Refuses data with fewer than two classes.
SelectorTrainResult selector_train(SelectorModel model, const LabelledStateSet& data,
                                   const SelectorTrainConfig& config);

double selector_accuracy(const SelectorModel& model, const std::vector<Eigen::VectorXd>& states,
                         const std::vector<int>& labels);

/// Random resets followed by uniformly random actions, each observation
/// labelled by the environment's oracle. `label_map` translates environment
/// labels into graph ids when the two orders differ.
LabelledStateSet collect_labelled_states(Environment& env, int n, std::uint64_t seed,
                                         const std::vector<int>& label_map = {});

/// Training/validation split, reproducible from `seed`.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
DatasetSplit split_dataset(std::size_t n, double split_fraction, std::uint64_t seed);

std::vector<NamedTensor> export_selector(const SelectorModel& model);
void import_selector(SelectorModel& model, const TensorMap& tensors);

void save_dataset(const std::filesystem::path& path, const LabelledStateSet& data,
                  std::uint64_t graph_fingerprint);
LabelledStateSet load_dataset(const std::filesystem::path& path,
                              std::optional<std::uint64_t> graph_fingerprint = std::nullopt);

}  // namespace cgrl
