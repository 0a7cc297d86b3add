#ifndef PERCOLL_AUTOTUNE_HPP
#define PERCOLL_AUTOTUNE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "percoll/collective.hpp"
#include "percoll/costmodel.hpp"
#include "percoll/factorization.hpp"
#include "percoll/planner.hpp"

namespace percoll {

struct TuneOptions {
  /// Ports available per node. 0 lets every step use f - 1 ports.
  int cores_per_node = 0;
  bool use_reorder = false;
  /// Reduction cost per byte added to the table's transfer times.
  double gamma = 0.0;
  DType dtype = DType::Byte;
  ReduceOp reduce_op = ReduceOp::Sum;
  std::size_t allreduce_crossover = kDefaultAllreduceCrossover;
};

struct TuneCandidate {
  FactorPlan factors;
  double cost = 0.0;
};

struct TuneResult {
  FactorPlan factors;
  double cost = 0.0;
  /// "prefix-scan" for the pinned small-message allreduce, else "factored".
  std::string path;
  std::vector<TuneCandidate> candidates;
};

/// Models every ordered factorization with factors <= max_factor (recursive
/// multiplying and cyclic shift) and returns the cheapest. Costs within 1e-12
/// relative count as equal; ties go to fewer steps, then to the
/// lexicographically larger factor list, then to recursive multiplying.
/// Candidates using a port count missing from the table are skipped.
/// The small-message allreduce is not searched: its factors follow from
/// cores_per_node + 1.
TuneResult autotune(const CollectiveSpec& spec, Collective kind, const MeasurementTable& table,
                    int max_factor, const TuneOptions& options = {});

/// Equal `msg_size` bytes per rank on p nodes.
TuneResult autotune(int p, std::size_t msg_size, const MeasurementTable& table, int max_factor,
                    Collective kind, const TuneOptions& options = {});

/// Builds the plan a tuned (or user-given) factor list stands for.
Plan plan_for(Collective kind, const CollectiveSpec& spec, const FactorPlan& factors,
              bool use_reorder = false, std::size_t allreduce_crossover = kDefaultAllreduceCrossover);

/// Spec with `msg_size` bytes per rank, shaped for `kind` (bcast/reduce get a
/// single nonzero count on rank 0).
CollectiveSpec uniform_spec(Collective kind, const Topology& topo, std::size_t msg_size,
                            DType dtype = DType::Byte, ReduceOp op = ReduceOp::Sum);

}  // namespace percoll

#endif  // PERCOLL_AUTOTUNE_HPP
