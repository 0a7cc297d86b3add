#ifndef PERCOLL_ORACLE_HPP
#define PERCOLL_ORACLE_HPP

#include <optional>
#include <string>
#include <vector>

#include "percoll/collective.hpp"
#include "percoll/transport.hpp"

namespace percoll {

// Direct definitions of the collectives. Nothing here touches plans or
// bytecode; floats are reduced in ascending rank order.

std::vector<Buffer> naive_allgatherv(const CollectiveSpec& spec, const std::vector<Buffer>& inputs);
/// Every input holds spec.total_bytes(); rank r receives its reduced block.
std::vector<Buffer> naive_reduce_scatter(const CollectiveSpec& spec,
                                         const std::vector<Buffer>& inputs);
std::vector<Buffer> naive_allreduce(const CollectiveSpec& spec, const std::vector<Buffer>& inputs);
std::vector<Buffer> naive_collective(Collective kind, const CollectiveSpec& spec,
                                     const std::vector<Buffer>& inputs);

/// Relative tolerance used when comparing against the oracle.
double default_tolerance(DType dtype) noexcept;

/// Empty if `actual` matches `expected`: bitwise for exact dtypes, within
/// `rel_tol` (default_tolerance if negative) for floats. Otherwise a short
/// description of the first mismatch.
std::optional<std::string> compare_outputs(DType dtype, const std::vector<Buffer>& expected,
                                           const std::vector<Buffer>& actual,
                                           double rel_tol = -1.0);

}  // namespace percoll

#endif  // PERCOLL_ORACLE_HPP
