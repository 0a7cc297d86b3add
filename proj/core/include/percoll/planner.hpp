#ifndef PERCOLL_PLANNER_HPP
#define PERCOLL_PLANNER_HPP

#include <cstddef>

#include "percoll/collective.hpp"
#include "percoll/factorization.hpp"
#include "percoll/plan.hpp"

namespace percoll {

/// Recursive multiplying or cyclic shift over the nodes, with optional
/// pairing-heuristic reordering of the node numbering.
Plan plan_allgatherv(const CollectiveSpec& spec, const FactorPlan& factors,
                     bool use_reorder = false);

/// Step reversal of plan_allgatherv: each receive lands in a per-port staging
/// buffer and is reduced into the accumulator in ascending port order.
Plan plan_reduce_scatter(const CollectiveSpec& spec, const FactorPlan& factors,
                         bool use_reorder = false);

/// Prefix-scan cyclic shift. The node count is split by
/// allreduce_factorization(p, target); only the scan lines needed for the
/// final result travel. target_factor <= 0 selects cores_per_node + 1.
Plan plan_allreduce_small(const CollectiveSpec& spec, int target_factor = 0);

/// reduce_scatter over floor(n/p)-element node blocks (remainder spread over
/// the first n mod p nodes) followed by allgatherv.
Plan plan_allreduce_large(const CollectiveSpec& spec, const FactorPlan& rs_factors,
                          const FactorPlan& ag_factors);

/// allgatherv with a single nonzero count.
Plan plan_bcast(const CollectiveSpec& spec, const FactorPlan& factors,
                bool use_reorder = false);
/// reduce_scatter with a single nonzero count.
Plan plan_reduce(const CollectiveSpec& spec, const FactorPlan& factors,
                 bool use_reorder = false);

inline constexpr std::size_t kDefaultAllreduceCrossover = 16 * 1024;

/// Per-rank bytes at or below `crossover` take the prefix-scan path,
/// everything else the reduce_scatter + allgatherv path with `factors`.
Plan plan_allreduce(const CollectiveSpec& spec, const FactorPlan& factors,
                    std::size_t crossover = kDefaultAllreduceCrossover);

/// Block sizes in elements for the long-message allreduce.
std::vector<std::size_t> allreduce_blocks(std::size_t elements, int num_nodes);

}  // namespace percoll

#endif  // PERCOLL_PLANNER_HPP
