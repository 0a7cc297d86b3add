#ifndef PERCOLL_TOPOLOGY_HPP
#define PERCOLL_TOPOLOGY_HPP

namespace percoll {

/// Cluster shape: `num_nodes` nodes with `cores_per_node` ranks each.
///
/// Ranks are laid out node-major: rank r lives on node r / c as local core
/// r % c. Virtual nodes (several groups per physical machine) are just more
/// nodes here.
class Topology {
 public:
  Topology(int num_nodes, int cores_per_node);

  int num_nodes() const noexcept { return nodes_; }
  int cores_per_node() const noexcept { return cores_; }
  int total_ranks() const noexcept { return nodes_ * cores_; }

  int node_of(int rank) const;
  int core_of(int rank) const;
  int rank_of(int node, int core) const;

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  int nodes_;
  int cores_;
};

/// Throws InvalidArgument unless both arguments are >= 1.
Topology build_topology(int num_nodes, int cores_per_node);

}  // namespace percoll

#endif  // PERCOLL_TOPOLOGY_HPP
