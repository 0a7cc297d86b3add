#include <gtest/gtest.h>

#include <random>

#include "percoll/oracle.hpp"
#include "percoll/persistent.hpp"
#include "support/harness.hpp"

using namespace percoll;

TEST(PersistentCollective, RunsManyTimes) {
  std::mt19937_64 rng(3);
  const auto spec = allgatherv_spec(Topology(6, 2), harness::random_counts(12, 8, rng),
                                    DType::Int64);
  PersistentCollective coll(Collective::Allgatherv, spec, make_factor_plan({3, 2}, 6, 2), true);
  EXPECT_GE(coll.init_seconds(), 0.0);
  for (int i = 0; i < 5; ++i) {
    const auto inputs = harness::random_inputs(Collective::Allgatherv, spec, rng);
    EXPECT_EQ(coll.execute(inputs), naive_allgatherv(spec, inputs));
  }
}

TEST(PersistentCollective, WrapsPlan) {
  std::mt19937_64 rng(4);
  const auto spec = allreduce_spec(Topology(7, 1), 24, DType::Int32, ReduceOp::Min);
  PersistentCollective coll(plan_allreduce_small(spec, 3));
  EXPECT_EQ(coll.kind(), Collective::Allreduce);
  const auto inputs = harness::random_inputs(Collective::Allreduce, spec, rng);
  EXPECT_EQ(coll.execute(inputs), naive_allreduce(spec, inputs));
}
