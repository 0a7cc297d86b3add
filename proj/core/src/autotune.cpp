#include "percoll/autotune.hpp"

#include <algorithm>
#include <cmath>

#include "percoll/error.hpp"

namespace percoll {

CollectiveSpec uniform_spec(Collective kind, const Topology& topo, std::size_t msg_size,
                            DType dtype, ReduceOp op) {
  const auto ranks = static_cast<std::size_t>(topo.total_ranks());
  switch (kind) {
    case Collective::Allgatherv:
      return allgatherv_spec(topo, std::vector<std::size_t>(ranks, msg_size), dtype);
    case Collective::ReduceScatter:
      return reduce_scatter_spec(topo, std::vector<std::size_t>(ranks, msg_size), dtype, op);
    case Collective::Allreduce:
      return allreduce_spec(topo, msg_size, dtype, op);
    case Collective::Bcast: {
      std::vector<std::size_t> counts(ranks, 0);
      counts[0] = msg_size;
      return allgatherv_spec(topo, std::move(counts), dtype);
    }
    case Collective::Reduce: {
      std::vector<std::size_t> counts(ranks, 0);
      counts[0] = msg_size;
      return reduce_scatter_spec(topo, std::move(counts), dtype, op);
    }
  }
  throw InvalidArgument("unknown collective");
}

Plan plan_for(Collective kind, const CollectiveSpec& spec, const FactorPlan& factors,
              bool use_reorder, std::size_t allreduce_crossover) {
  switch (kind) {
    case Collective::Allgatherv: return plan_allgatherv(spec, factors, use_reorder);
    case Collective::ReduceScatter: return plan_reduce_scatter(spec, factors, use_reorder);
    case Collective::Bcast: return plan_bcast(spec, factors, use_reorder);
    case Collective::Reduce: return plan_reduce(spec, factors, use_reorder);
    case Collective::Allreduce: return plan_allreduce(spec, factors, allreduce_crossover);
  }
  throw InvalidArgument("unknown collective");
}

namespace {

bool better(const TuneCandidate& a, const TuneCandidate& b) {
  const double scale = std::max({std::fabs(a.cost), std::fabs(b.cost), 1e-300});
  if (std::fabs(a.cost - b.cost) > 1e-12 * scale) return a.cost < b.cost;
  if (a.factors.steps() != b.factors.steps()) return a.factors.steps() < b.factors.steps();
  if (a.factors.factors != b.factors.factors) return a.factors.factors > b.factors.factors;
  return a.factors.variant == Variant::RecursiveMultiply &&
         b.factors.variant != Variant::RecursiveMultiply;
}

}  // namespace

TuneResult autotune(const CollectiveSpec& spec, Collective kind, const MeasurementTable& table,
                    int max_factor, const TuneOptions& options) {
  if (max_factor < 2) throw InvalidArgument("max_factor must be >= 2");
  check_spec(spec, kind);
  table.check();
  const int p = spec.topology.num_nodes();
  const int max_ports = options.cores_per_node > 0 ? options.cores_per_node : max_factor;

  TuneResult result;
  if (kind == Collective::Allreduce && spec.counts.front() <= options.allreduce_crossover) {
    Plan plan = plan_allreduce_small(spec, spec.topology.cores_per_node() + 1);
    result.factors = plan.factor_plan;
    result.cost = simulate_timeline(plan, table, options.gamma).total;
    result.path = "prefix-scan";
    result.candidates.push_back({result.factors, result.cost});
    return result;
  }

  std::vector<FactorPlan> plans;
  for (auto& f : enumerate_factorizations(p, max_factor)) {
    plans.push_back(make_factor_plan(f, p, max_ports, Variant::RecursiveMultiply));
  }
  if (p > 1) {
    for (auto& f : enumerate_cyclic_factorizations(p, max_factor)) {
      plans.push_back(make_factor_plan(f, p, max_ports, Variant::CyclicShift));
    }
  }

  for (const FactorPlan& fp : plans) {
    // A candidate needing a port count the table never measured cannot be
    // estimated.
    if (!std::all_of(fp.ports_per_step.begin(), fp.ports_per_step.end(),
                     [&](int k) { return table.has_ports(k); })) {
      continue;
    }
    const Plan plan = plan_for(kind, spec, fp, options.use_reorder, options.allreduce_crossover);
    result.candidates.push_back({fp, simulate_timeline(plan, table, options.gamma).total});
  }
  if (result.candidates.empty()) {
    throw PlanError("no factorization of " + std::to_string(p) + " with factors <= " +
                    std::to_string(max_factor) + " fits the measured port counts");
  }
  const TuneCandidate* best = &result.candidates.front();
  for (const TuneCandidate& c : result.candidates) {
    if (better(c, *best)) best = &c;
  }
  result.factors = best->factors;
  result.cost = best->cost;
  result.path = "factored";
  return result;
}

TuneResult autotune(int p, std::size_t msg_size, const MeasurementTable& table, int max_factor,
                    Collective kind, const TuneOptions& options) {
  const Topology topo(p, std::max(1, options.cores_per_node));
  return autotune(uniform_spec(kind, topo, msg_size, options.dtype, options.reduce_op), kind,
                  table, max_factor, options);
}

}  // namespace percoll
