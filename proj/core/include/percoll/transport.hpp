#ifndef PERCOLL_TRANSPORT_HPP
#define PERCOLL_TRANSPORT_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "percoll/bytecode.hpp"
#include "percoll/topology.hpp"

namespace percoll {

using Buffer = std::vector<std::byte>;

struct ClusterOptions {
  /// A run with no progress for this long is aborted with DeadlockError.
  std::chrono::milliseconds deadlock_timeout{10000};
  /// When set, every rank yields or sleeps briefly at pseudo-random
  /// instructions so that runs explore different interleavings.
  std::optional<std::uint64_t> schedule_seed;
};

/// In-process cluster: one thread per rank, tagged point-to-point mailboxes
/// and a shared segment plus staging buffers per node.
class Cluster {
 public:
  explicit Cluster(const Topology& topology, ClusterOptions options = {});

  const Topology& topology() const noexcept { return topology_; }
  const ClusterOptions& options() const noexcept { return options_; }
  void set_schedule_seed(std::optional<std::uint64_t> seed) { options_.schedule_seed = seed; }

  /// Executes `program` on every rank. `inputs[r]` must hold at least the
  /// program's input bytes for rank r. Returns one output buffer per rank.
  std::vector<Buffer> run(const Program& program, const std::vector<Buffer>& inputs);

  /// Payload bytes sent by each node during the last run.
  const std::vector<std::size_t>& last_bytes_sent() const noexcept { return bytes_sent_; }

 private:
  Topology topology_;
  ClusterOptions options_;
  std::uint64_t runs_ = 0;
  std::vector<std::size_t> bytes_sent_;
};

std::vector<Buffer> run_collective(Cluster& cluster, const Program& program,
                                   const std::vector<Buffer>& inputs);

}  // namespace percoll

#endif  // PERCOLL_TRANSPORT_HPP
