#include "percoll/topology.hpp"

#include <limits>
#include <string>

#include "percoll/error.hpp"

namespace percoll {

Topology::Topology(int num_nodes, int cores_per_node)
    : nodes_(num_nodes), cores_(cores_per_node) {
  if (num_nodes < 1 || cores_per_node < 1) {
    throw InvalidArgument("topology needs >= 1 node and >= 1 core per node, got " +
                          std::to_string(num_nodes) + "x" + std::to_string(cores_per_node));
  }
  if (num_nodes > std::numeric_limits<int>::max() / cores_per_node) {
    throw InvalidArgument("topology rank count overflows int");
  }
}

int Topology::node_of(int rank) const {
  if (rank < 0 || rank >= total_ranks()) throw InvalidArgument("rank out of range");
  return rank / cores_;
}

int Topology::core_of(int rank) const {
  if (rank < 0 || rank >= total_ranks()) throw InvalidArgument("rank out of range");
  return rank % cores_;
}

int Topology::rank_of(int node, int core) const {
  if (node < 0 || node >= nodes_ || core < 0 || core >= cores_) {
    throw InvalidArgument("node/core out of range");
  }
  return node * cores_ + core;
}

Topology build_topology(int num_nodes, int cores_per_node) {
  return Topology(num_nodes, cores_per_node);
}

}  // namespace percoll
