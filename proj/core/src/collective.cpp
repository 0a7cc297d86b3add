#include "percoll/collective.hpp"

#include <numeric>
#include <string>

#include "percoll/error.hpp"

namespace percoll {

std::string_view to_string(DType t) noexcept {
  switch (t) {
    case DType::Int32: return "int32";
    case DType::Int64: return "int64";
    case DType::Float32: return "float32";
    case DType::Float64: return "float64";
    case DType::Byte: return "byte";
  }
  return "?";
}

std::string_view to_string(ReduceOp op) noexcept {
  switch (op) {
    case ReduceOp::Sum: return "sum";
    case ReduceOp::Min: return "min";
    case ReduceOp::Max: return "max";
  }
  return "?";
}

DType parse_dtype(std::string_view name) {
  for (DType t : {DType::Int32, DType::Int64, DType::Float32, DType::Float64, DType::Byte}) {
    if (to_string(t) == name) return t;
  }
  throw InvalidArgument("unknown dtype '" + std::string(name) + "'");
}

ReduceOp parse_reduce_op(std::string_view name) {
  for (ReduceOp op : {ReduceOp::Sum, ReduceOp::Min, ReduceOp::Max}) {
    if (to_string(op) == name) return op;
  }
  throw InvalidArgument("unknown reduction '" + std::string(name) + "'");
}

std::string_view to_string(Collective c) noexcept {
  switch (c) {
    case Collective::Allgatherv: return "allgatherv";
    case Collective::ReduceScatter: return "reduce-scatter";
    case Collective::Allreduce: return "allreduce";
    case Collective::Bcast: return "bcast";
    case Collective::Reduce: return "reduce";
  }
  return "?";
}

Collective parse_collective(std::string_view name) {
  for (Collective c : {Collective::Allgatherv, Collective::ReduceScatter, Collective::Allreduce,
                       Collective::Bcast, Collective::Reduce}) {
    if (to_string(c) == name) return c;
  }
  if (name == "reduce_scatter") return Collective::ReduceScatter;
  throw InvalidArgument("unknown collective '" + std::string(name) + "'");
}

std::size_t CollectiveSpec::total_bytes() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t CollectiveSpec::node_bytes(int node) const {
  const int c = topology.cores_per_node();
  std::size_t sum = 0;
  for (int k = 0; k < c; ++k) sum += counts.at(static_cast<std::size_t>(node * c + k));
  return sum;
}

std::vector<std::size_t> CollectiveSpec::node_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(topology.num_nodes()));
  for (int j = 0; j < topology.num_nodes(); ++j) sizes[static_cast<std::size_t>(j)] = node_bytes(j);
  return sizes;
}

std::vector<std::size_t> CollectiveSpec::displacements() const {
  std::vector<std::size_t> disp(counts.size(), 0);
  std::size_t off = 0;
  for (std::size_t r = 0; r < counts.size(); ++r) {
    disp[r] = off;
    off += counts[r];
  }
  return disp;
}

CollectiveSpec allgatherv_spec(const Topology& topo, std::vector<std::size_t> counts,
                               DType dtype) {
  CollectiveSpec spec{topo, std::move(counts), dtype, std::nullopt};
  check_spec(spec, Collective::Allgatherv);
  return spec;
}

CollectiveSpec reduce_scatter_spec(const Topology& topo, std::vector<std::size_t> counts,
                                   DType dtype, ReduceOp op) {
  CollectiveSpec spec{topo, std::move(counts), dtype, op};
  check_spec(spec, Collective::ReduceScatter);
  return spec;
}

CollectiveSpec allreduce_spec(const Topology& topo, std::size_t bytes, DType dtype,
                              ReduceOp op) {
  CollectiveSpec spec{topo,
                      std::vector<std::size_t>(static_cast<std::size_t>(topo.total_ranks()), bytes),
                      dtype, op};
  check_spec(spec, Collective::Allreduce);
  return spec;
}

void check_spec(const CollectiveSpec& spec, Collective kind) {
  if (spec.counts.size() != static_cast<std::size_t>(spec.topology.total_ranks())) {
    throw InvalidArgument("counts must have one entry per rank (" +
                          std::to_string(spec.topology.total_ranks()) + "), got " +
                          std::to_string(spec.counts.size()));
  }
  const std::size_t w = spec.element_width();
  for (std::size_t r = 0; r < spec.counts.size(); ++r) {
    if (spec.counts[r] % w != 0) {
      throw InvalidArgument("count of rank " + std::to_string(r) +
                            " is not a multiple of the element width");
    }
  }
  const bool reducing = kind == Collective::ReduceScatter || kind == Collective::Allreduce ||
                        kind == Collective::Reduce;
  if (reducing != spec.reduce_op.has_value()) {
    throw InvalidArgument(std::string(to_string(kind)) +
                          (reducing ? " needs a reduction op" : " takes no reduction op"));
  }
  if (kind == Collective::Allreduce) {
    for (std::size_t c : spec.counts) {
      if (c != spec.counts.front()) throw InvalidArgument("allreduce needs equal counts");
    }
  }
  if (kind == Collective::Bcast || kind == Collective::Reduce) root_of(spec);
}

std::size_t input_bytes(const CollectiveSpec& spec, Collective kind, int rank) {
  switch (kind) {
    case Collective::Allgatherv:
    case Collective::Bcast:
    case Collective::Allreduce:
      return spec.counts.at(static_cast<std::size_t>(rank));
    case Collective::ReduceScatter:
    case Collective::Reduce:
      return spec.total_bytes();
  }
  return 0;
}

std::size_t output_bytes(const CollectiveSpec& spec, Collective kind, int rank) {
  switch (kind) {
    case Collective::Allgatherv:
    case Collective::Bcast:
      return spec.total_bytes();
    case Collective::ReduceScatter:
    case Collective::Reduce:
    case Collective::Allreduce:
      return spec.counts.at(static_cast<std::size_t>(rank));
  }
  return 0;
}

int root_of(const CollectiveSpec& spec) {
  int root = -1;
  for (std::size_t r = 0; r < spec.counts.size(); ++r) {
    if (spec.counts[r] == 0) continue;
    if (root >= 0) throw InvalidArgument("bcast/reduce need exactly one nonzero count");
    root = static_cast<int>(r);
  }
  if (root < 0) throw InvalidArgument("bcast/reduce need exactly one nonzero count");
  return root;
}

}  // namespace percoll
