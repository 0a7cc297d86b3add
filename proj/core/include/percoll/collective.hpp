#ifndef PERCOLL_COLLECTIVE_HPP
#define PERCOLL_COLLECTIVE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "percoll/topology.hpp"
#include "percoll/types.hpp"

namespace percoll {

enum class Collective : std::uint8_t { Allgatherv, ReduceScatter, Allreduce, Bcast, Reduce };

std::string_view to_string(Collective c) noexcept;
Collective parse_collective(std::string_view name);

/// What a collective call moves.
///
/// `counts` holds one byte count per rank: the send block for allgatherv and
/// bcast, the receive block for reduce_scatter and reduce, and the (equal)
/// vector length for allreduce. Every count is a multiple of the element
/// width. `reduce_op` is empty exactly for the non-reducing collectives.
struct CollectiveSpec {
  Topology topology{1, 1};
  std::vector<std::size_t> counts;
  DType dtype = DType::Byte;
  std::optional<ReduceOp> reduce_op;

  std::size_t element_width() const noexcept { return dtype_size(dtype); }
  std::size_t total_bytes() const noexcept;
  /// Bytes of all ranks on `node`.
  std::size_t node_bytes(int node) const;
  /// Per-node aggregate sizes in node order.
  std::vector<std::size_t> node_sizes() const;
  /// Byte offset of each rank's block in rank order.
  std::vector<std::size_t> displacements() const;
};

CollectiveSpec allgatherv_spec(const Topology& topo, std::vector<std::size_t> counts,
                               DType dtype = DType::Byte);
CollectiveSpec reduce_scatter_spec(const Topology& topo, std::vector<std::size_t> counts,
                                   DType dtype, ReduceOp op);
/// Every rank contributes `bytes` bytes.
CollectiveSpec allreduce_spec(const Topology& topo, std::size_t bytes, DType dtype,
                              ReduceOp op);

/// Throws InvalidArgument if `spec` is malformed for `kind`.
void check_spec(const CollectiveSpec& spec, Collective kind);

/// Input/output buffer size of `rank` for `kind`.
std::size_t input_bytes(const CollectiveSpec& spec, Collective kind, int rank);
std::size_t output_bytes(const CollectiveSpec& spec, Collective kind, int rank);

/// Index of the only rank with a nonzero count; InvalidArgument otherwise.
int root_of(const CollectiveSpec& spec);

}  // namespace percoll

#endif  // PERCOLL_COLLECTIVE_HPP
