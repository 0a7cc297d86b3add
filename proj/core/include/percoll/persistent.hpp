#ifndef PERCOLL_PERSISTENT_HPP
#define PERCOLL_PERSISTENT_HPP

#include <vector>

#include "percoll/bytecode.hpp"
#include "percoll/collective.hpp"
#include "percoll/factorization.hpp"
#include "percoll/plan.hpp"
#include "percoll/planner.hpp"
#include "percoll/transport.hpp"

namespace percoll {

/// A collective planned and compiled once, executed any number of times.
class PersistentCollective {
 public:
  PersistentCollective(Collective kind, const CollectiveSpec& spec, const FactorPlan& factors,
                       bool use_reorder = false, ClusterOptions options = {},
                       std::size_t allreduce_crossover = kDefaultAllreduceCrossover);
  /// Wraps an existing plan.
  PersistentCollective(Plan plan, ClusterOptions options = {});

  std::vector<Buffer> execute(const std::vector<Buffer>& inputs);

  Collective kind() const noexcept { return plan_.collective; }
  const Plan& plan() const noexcept { return plan_; }
  const Program& program() const noexcept { return program_; }
  Cluster& cluster() noexcept { return cluster_; }
  /// Wall-clock seconds spent planning and compiling.
  double init_seconds() const noexcept { return init_seconds_; }

 private:
  Plan plan_;
  Program program_;
  Cluster cluster_;
  double init_seconds_ = 0.0;
};

}  // namespace percoll

#endif  // PERCOLL_PERSISTENT_HPP
