#pragma once

// Knowledge graph of configuration spaces. Each node is one contact
// configuration with a fixed identifier vector; edges join spaces that can be
// reached from each other without passing through a third.

#include <Eigen/Core>

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cgrl {

struct ConfigSpace {
  int id = 0;
  std::string name;
  Eigen::VectorXd identifier;
  bool is_gathered = false;  // catch-all node for configurations the task does not need
};

class ConfigGraph {
 public:
  ConfigGraph() = default;
  explicit ConfigGraph(std::vector<ConfigSpace> nodes);

  /// Nodes named in order (ids 0..N-1) with one-hot identifiers of length max(N, 4).
  static ConfigGraph with_one_hot_identifiers(const std::vector<std::string>& names,
                                              const std::vector<std::string>& gathered = {});

  /// Adds i-j and j-i.
  void add_edge(int a, int b);
  void add_edge(const std::string& a, const std::string& b);
  /// Adds only from->to. Exists so malformed graphs can be built and validated.
  void add_directed_edge(int from, int to);

  std::size_t size() const { return nodes_.size(); }
  int identifier_dim() const;
  const ConfigSpace& node(int id) const;
  const std::vector<ConfigSpace>& nodes() const { return nodes_; }
  bool contains(int id) const;
  /// Throws InvalidInput when no node has this name.
  int id_of(const std::string& name) const;

  /// V_i, ascending, without i. Throws InvalidInput for an unknown id.
  std::vector<int> neighbors(int id) const;
  /// V_i together with i, ascending.
  std::vector<int> candidate_set(int id) const;

  /// Every structural violation found; empty means the graph is usable.
  std::vector<std::string> validate() const;

  /// Rows are identifiers of the given nodes, in order.
  Eigen::MatrixXd identifier_rows(const std::vector<int>& ids) const;
  /// N x d_s matrix of all identifiers by id.
  Eigen::MatrixXd identifier_matrix() const;

  /// FNV-1a hash over names, identifiers and adjacency; used to pair
  /// checkpoints with the graph they were trained on.
  std::uint64_t fingerprint() const;

 private:
  void check_id(int id) const;

  std::vector<ConfigSpace> nodes_;
  std::vector<std::set<int>> adjacency_;
};

/// LEFT(0) - FREE(1) - RIGHT(2).
ConfigGraph cartstem_graph();
/// FREE(0) - HOLD(1); FREE gathers every non-grasping contact configuration.
ConfigGraph rod_graph();

}  // namespace cgrl
