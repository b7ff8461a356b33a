#include "cgrl/config_graph.hpp"

#include <algorithm>
#include <cstring>
#include <queue>

#include "cgrl/errors.hpp"

namespace cgrl {

ConfigGraph::ConfigGraph(std::vector<ConfigSpace> nodes)
    : nodes_(std::move(nodes)), adjacency_(nodes_.size()) {}

ConfigGraph ConfigGraph::with_one_hot_identifiers(const std::vector<std::string>& names,
                                                  const std::vector<std::string>& gathered) {
  const int n = static_cast<int>(names.size());
  const int dim = std::max(n, 4);
  std::vector<ConfigSpace> nodes;
  for (int i = 0; i < n; ++i) {
    ConfigSpace cs;
    cs.id = i;
    cs.name = names[i];
    cs.identifier = Eigen::VectorXd::Zero(dim);
    cs.identifier[i] = 1.0;
    cs.is_gathered = std::find(gathered.begin(), gathered.end(), names[i]) != gathered.end();
    nodes.push_back(std::move(cs));
  }
  return ConfigGraph(std::move(nodes));
}

void ConfigGraph::add_edge(int a, int b) {
  add_directed_edge(a, b);
  add_directed_edge(b, a);
}

void ConfigGraph::add_edge(const std::string& a, const std::string& b) {
  add_edge(id_of(a), id_of(b));
}

void ConfigGraph::add_directed_edge(int from, int to) {
  check_id(from);
  adjacency_[from].insert(to);
}

int ConfigGraph::identifier_dim() const {
  return nodes_.empty() ? 0 : static_cast<int>(nodes_.front().identifier.size());
}

bool ConfigGraph::contains(int id) const {
  return id >= 0 && id < static_cast<int>(nodes_.size());
}

void ConfigGraph::check_id(int id) const {
  if (!contains(id)) throw InvalidInput("unknown configuration space id " + std::to_string(id));
}

const ConfigSpace& ConfigGraph::node(int id) const {
  check_id(id);
  return nodes_[id];
}

int ConfigGraph::id_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return static_cast<int>(i);
  throw InvalidInput("unknown configuration space '" + name + "'");
}

std::vector<int> ConfigGraph::neighbors(int id) const {
  check_id(id);
  std::vector<int> out;
  for (int j : adjacency_[id])
    if (j != id) out.push_back(j);
  return out;
}

std::vector<int> ConfigGraph::candidate_set(int id) const {
  std::vector<int> out = neighbors(id);
  out.insert(std::lower_bound(out.begin(), out.end(), id), id);
  return out;
}

std::vector<std::string> ConfigGraph::validate() const {
  std::vector<std::string> violations;
  const int n = static_cast<int>(nodes_.size());
  if (n == 0) {
    violations.emplace_back("empty graph");
    return violations;
  }
  for (int i = 0; i < n; ++i) {
    if (nodes_[i].id != i)
      violations.push_back("non-contiguous id: position " + std::to_string(i) + " has id " +
                           std::to_string(nodes_[i].id));
    if (nodes_[i].identifier.size() != identifier_dim() || identifier_dim() == 0)
      violations.push_back("identifier length mismatch at node " + nodes_[i].name);
    else if (!nodes_[i].identifier.allFinite())
      violations.push_back("non-finite identifier at node " + nodes_[i].name);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (nodes_[i].name == nodes_[j].name)
        violations.push_back("duplicate name " + nodes_[i].name);
      if (nodes_[i].identifier.size() == nodes_[j].identifier.size() &&
          nodes_[i].identifier == nodes_[j].identifier)
        violations.push_back("duplicate identifier " + nodes_[i].name + "," + nodes_[j].name);
    }
  }
  bool edges_in_range = true;
  for (int i = 0; i < n; ++i) {
    for (int j : adjacency_[i]) {
      if (j == i) {
        violations.push_back("self-loop at " + nodes_[i].name);
      } else if (!contains(j)) {
        violations.push_back("edge to unknown node " + std::to_string(j));
        edges_in_range = false;
      } else if (!adjacency_[j].count(i)) {
        violations.push_back("asymmetric edge " + nodes_[i].name + "->" + nodes_[j].name);
      }
    }
  }
  if (edges_in_range) {
    // connectivity over the undirected closure
    std::vector<bool> seen(n, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
      const int i = frontier.front();
      frontier.pop();
      for (int j = 0; j < n; ++j) {
        if (!seen[j] && (adjacency_[i].count(j) || adjacency_[j].count(i))) {
          seen[j] = true;
          frontier.push(j);
        }
      }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[i]) violations.push_back("disconnected node " + nodes_[i].name);
  }
  return violations;
}

Eigen::MatrixXd ConfigGraph::identifier_rows(const std::vector<int>& ids) const {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(ids.size()), identifier_dim());
  for (std::size_t r = 0; r < ids.size(); ++r)
    rows.row(static_cast<Eigen::Index>(r)) = node(ids[r]).identifier.transpose();
  return rows;
}

Eigen::MatrixXd ConfigGraph::identifier_matrix() const {
  std::vector<int> ids(nodes_.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return identifier_rows(ids);
}

std::uint64_t ConfigGraph::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& node : nodes_) {
    mix(&node.id, sizeof(node.id));
    mix(node.name.data(), node.name.size());
    mix(node.identifier.data(), sizeof(double) * node.identifier.size());
    const unsigned char g = node.is_gathered ? 1 : 0;
    mix(&g, 1);
  }
  for (std::size_t i = 0; i < adjacency_.size(); ++i)
    for (int j : adjacency_[i]) {
      const std::int64_t e[2] = {static_cast<std::int64_t>(i), j};
      mix(e, sizeof(e));
    }
  return h;
}

ConfigGraph cartstem_graph() {
  ConfigGraph g = ConfigGraph::with_one_hot_identifiers({"LEFT", "FREE", "RIGHT"});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  return g;
}

ConfigGraph rod_graph() {
  ConfigGraph g = ConfigGraph::with_one_hot_identifiers({"FREE", "HOLD"}, {"FREE"});
  g.add_edge(0, 1);
  return g;
}

}  // namespace cgrl
