#include "percoll/persistent.hpp"

#include <chrono>

#include "percoll/autotune.hpp"
#include "percoll/error.hpp"

namespace percoll {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Program compile_checked(const Plan& plan) {
  Program prog = compile(plan);
  const auto diags = validate(prog);
  if (!diags.empty()) {
    throw CompileError("generated program is invalid: rank " + std::to_string(diags[0].rank) +
                       " instruction " + std::to_string(diags[0].instruction) + ": " +
                       diags[0].message);
  }
  return prog;
}

}  // namespace

PersistentCollective::PersistentCollective(Collective kind, const CollectiveSpec& spec,
                                           const FactorPlan& factors, bool use_reorder,
                                           ClusterOptions options,
                                           std::size_t allreduce_crossover)
    : cluster_(spec.topology, options) {
  const auto t0 = Clock::now();
  plan_ = plan_for(kind, spec, factors, use_reorder, allreduce_crossover);
  program_ = compile_checked(plan_);
  init_seconds_ = seconds_since(t0);
}

PersistentCollective::PersistentCollective(Plan plan, ClusterOptions options)
    : plan_(std::move(plan)), cluster_(plan_.spec.topology, options) {
  const auto t0 = Clock::now();
  program_ = compile_checked(plan_);
  init_seconds_ = seconds_since(t0);
}

std::vector<Buffer> PersistentCollective::execute(const std::vector<Buffer>& inputs) {
  return cluster_.run(program_, inputs);
}

}  // namespace percoll
