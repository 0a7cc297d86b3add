#ifndef PERCOLL_PLAN_HPP
#define PERCOLL_PLAN_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "percoll/collective.hpp"
#include "percoll/factorization.hpp"
#include "percoll/rank_order.hpp"

namespace percoll {

/// Memory a rank can address. Input/Output are private to the rank; the
/// segment and the per-port staging buffers are shared by the cores of a node.
enum class BufferKind : std::uint8_t { Input, Output, Segment, Staging };

std::string_view to_string(BufferKind k) noexcept;

struct BufferRef {
  BufferKind kind = BufferKind::Segment;
  int port = 0;  // staging buffer index; ignored otherwise
  std::size_t offset = 0;

  friend bool operator==(const BufferRef&, const BufferRef&) = default;
};

/// One inter-node message of phase II. Port k of a node is driven by its
/// core k. The payload is read from the sender's node segment.
struct Transfer {
  int src_node = 0;
  int dst_node = 0;
  int src_port = 0;
  int dst_port = 0;
  int tag = 0;
  std::size_t src_offset = 0;
  BufferRef dst;
  std::size_t length = 0;
  bool reduce = false;  // receiver combines the payload into its accumulator
};

enum class LocalKind : std::uint8_t { Copy, Reduce };

/// Node-local data movement executed by one core: dst = src (Copy) or
/// dst = dst (op) src elementwise (Reduce).
struct LocalOp {
  int node = 0;
  int core = 0;
  LocalKind kind = LocalKind::Copy;
  BufferRef dst;
  BufferRef src;
  std::size_t length = 0;
};

/// I: gather the cores' data into the node segment. II: inter-node
/// algorithm. III: scatter results back to the cores.
enum class Phase : std::uint8_t { Gather, Exchange, Scatter };

enum class StageKind : std::uint8_t { Local, Exchange, Barrier };

/// Plans are straight-line sequences of stages. Exchange stages post all
/// receives, then all sends, then wait; Barrier stages synchronise the cores
/// of every node.
struct Stage {
  StageKind kind = StageKind::Local;
  Phase phase = Phase::Gather;
  int step = -1;  // phase-II step index, -1 outside phase II
  int round = 0;  // substep within a step when ports < factor - 1
  std::vector<Transfer> transfers;
  std::vector<LocalOp> ops;
};

struct StepInfo {
  int factor = 2;
  int distance = 1;  // product of the preceding factors of the same pass
  int ports = 1;
  int rounds = 1;
  bool reduces = false;
};

struct Plan {
  Collective collective = Collective::Allgatherv;
  CollectiveSpec spec;
  /// Factors of phase II in execution order. For the long-message allreduce
  /// this is the reduce_scatter pass; the allgatherv pass is in
  /// `allgather_factor_plan`.
  FactorPlan factor_plan;
  std::optional<FactorPlan> allgather_factor_plan;
  RankOrder rank_order;
  std::vector<StepInfo> steps;
  std::vector<Stage> stages;

  std::size_t segment_bytes = 0;
  std::vector<std::size_t> staging_bytes;  // per port
  std::vector<std::size_t> input_bytes;    // per rank
  std::vector<std::size_t> output_bytes;   // per rank

  int num_steps() const noexcept { return static_cast<int>(steps.size()); }
  /// All phase-II transfers in execution order.
  std::vector<Transfer> transfers() const;
};

/// Human readable listing: one line per transfer with step, round, ports,
/// nodes, byte ranges and operation. Stable for golden tests.
void dump_plan(std::ostream& os, const Plan& plan);
std::string dump_plan(const Plan& plan);

}  // namespace percoll

#endif  // PERCOLL_PLAN_HPP
