#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "percoll/error.hpp"
#include "percoll/factorization.hpp"

using namespace percoll;

namespace {

// Brute force: every sequence of factors in [2, max] whose product is p.
void brute(int p, int max, std::vector<int>& cur, std::set<std::vector<int>>& out) {
  const long long prod =
      std::accumulate(cur.begin(), cur.end(), 1LL, [](long long a, int b) { return a * b; });
  if (prod == p) {
    out.insert(cur);
    return;
  }
  if (prod > p) return;
  for (int f = 2; f <= max; ++f) {
    cur.push_back(f);
    brute(p, max, cur, out);
    cur.pop_back();
  }
}

}  // namespace

TEST(PrimeFactorize, Examples) {
  EXPECT_EQ(prime_factorize(12), (std::vector<int>{2, 2, 3}));
  EXPECT_EQ(prime_factorize(167), (std::vector<int>{167}));
  EXPECT_TRUE(prime_factorize(1).empty());
  EXPECT_EQ(prime_factorize(9600), (std::vector<int>{2, 2, 2, 2, 2, 2, 2, 3, 5, 5}));
}

TEST(GreedyCombine, Examples) {
  EXPECT_EQ(greedy_combine({2, 2, 3}, 13), (std::vector<int>{12}));
  EXPECT_EQ(greedy_combine({2, 2, 3, 5}, 13), (std::vector<int>{10, 6}));
  EXPECT_EQ(greedy_combine({7}, 13), (std::vector<int>{7}));
}

TEST(GreedyCombine, PrimeAboveTargetRejected) {
  EXPECT_THROW(greedy_combine({2, 17}, 13), InvalidArgument);
}

TEST(GreedyCombine, ProductPreservedAndBounded) {
  for (int p = 2; p <= 400; ++p) {
    const auto primes = prime_factorize(p);
    if (primes.back() > 13) continue;
    const auto f = greedy_combine(primes, 13);
    const long long prod =
        std::accumulate(f.begin(), f.end(), 1LL, [](long long a, int b) { return a * b; });
    EXPECT_EQ(prod, p);
    for (int x : f) EXPECT_LE(x, 13);
  }
}

TEST(StepsForLargePrime, Examples) {
  EXPECT_EQ(steps_for_large_prime(167, 13), (std::vector<int>{13, 13}));
  EXPECT_EQ(steps_for_large_prime(17, 4), (std::vector<int>{4, 4, 4}));
  EXPECT_EQ(steps_for_large_prime(5, 2), (std::vector<int>{2, 2, 2}));
  EXPECT_THROW(steps_for_large_prime(13, 13), InvalidArgument);
  EXPECT_THROW(steps_for_large_prime(7, 13), InvalidArgument);
}

TEST(EnumerateFactorizations, Examples) {
  const auto f8 = enumerate_factorizations(8, 8);
  const std::set<std::vector<int>> got(f8.begin(), f8.end());
  const std::set<std::vector<int>> want{{8}, {2, 4}, {4, 2}, {2, 2, 2}};
  EXPECT_EQ(got, want);
  EXPECT_EQ(f8.size(), 4u);
  EXPECT_EQ(enumerate_factorizations(1, 8), (std::vector<std::vector<int>>{{}}));
  EXPECT_EQ(enumerate_factorizations(16, 16).size(), 8u);
}

TEST(EnumerateFactorizations, MatchesBruteForce) {
  for (int p = 1; p <= 64; ++p) {
    for (int max : {2, 3, 5, 8, 16}) {
      std::set<std::vector<int>> want;
      std::vector<int> cur;
      brute(p, max, cur, want);
      const auto got = enumerate_factorizations(p, max);
      EXPECT_EQ(std::set<std::vector<int>>(got.begin(), got.end()), want) << p << " " << max;
      EXPECT_EQ(got.size(), want.size());
    }
  }
}

TEST(EnumerateCyclic, EveryListIsValidCyclicShift) {
  for (int p = 2; p <= 40; ++p) {
    for (const auto& f : enumerate_cyclic_factorizations(p, 6)) {
      FactorPlan fp{f, Variant::CyclicShift, std::vector<int>(f.size(), 1)};
      EXPECT_NO_THROW(check_factor_plan(fp, p)) << p;
    }
  }
  // 5 nodes with radix at most 2: the three-step cyclic shift only.
  EXPECT_EQ(enumerate_cyclic_factorizations(5, 2), (std::vector<std::vector<int>>{{2, 2, 2}}));
}

TEST(FactorPlan, Validation) {
  EXPECT_NO_THROW(check_factor_plan({{5, 3}, Variant::RecursiveMultiply, {4, 2}}, 15));
  EXPECT_THROW(check_factor_plan({{2, 2}, Variant::RecursiveMultiply, {1, 1}}, 5),
               InvalidArgument);
  EXPECT_NO_THROW(check_factor_plan({{2, 2, 2}, Variant::CyclicShift, {1, 1, 1}}, 5));
  // The third step would be redundant: 2*2 already covers 4 nodes.
  EXPECT_THROW(check_factor_plan({{2, 2, 2}, Variant::CyclicShift, {1, 1, 1}}, 4),
               InvalidArgument);
  EXPECT_THROW(check_factor_plan({{4}, Variant::RecursiveMultiply, {4}}, 4), InvalidArgument);
  EXPECT_THROW(check_factor_plan({{4}, Variant::RecursiveMultiply, {0}}, 4), InvalidArgument);
}

TEST(FactorPlan, MakeChoosesVariantAndPorts) {
  const auto a = make_factor_plan({5, 3}, 15, 3);
  EXPECT_EQ(a.variant, Variant::RecursiveMultiply);
  EXPECT_EQ(a.ports_per_step, (std::vector<int>{3, 2}));
  const auto b = make_factor_plan({2, 2, 2}, 5, 8);
  EXPECT_EQ(b.variant, Variant::CyclicShift);
  EXPECT_EQ(uniform_factor_plan(27, 3, 8).factors, (std::vector<int>{3, 3, 3}));
  EXPECT_EQ(uniform_factor_plan(11, 2, 1).factors.size(), 4u);
}

TEST(AllreduceFactorization, PrimePipeline) {
  const auto a = allreduce_factorization(167, 13);
  EXPECT_EQ(a.flat(), (std::vector<int>{13, 13}));
  EXPECT_EQ(a.groups, (std::vector<int>{167}));
  EXPECT_EQ(allreduce_factorization(11, 2).flat(), (std::vector<int>{2, 2, 2, 2}));
  EXPECT_EQ(allreduce_factorization(8, 2).flat(), (std::vector<int>{2, 2, 2}));
  EXPECT_TRUE(allreduce_factorization(1, 4).flat().empty());
}

TEST(AllreduceFactorization, GroupsMultiplyToP) {
  for (int p = 1; p <= 300; ++p) {
    for (int target : {2, 3, 4, 13}) {
      const auto a = allreduce_factorization(p, target);
      long long prod = 1;
      for (int g : a.groups) prod *= g;
      EXPECT_EQ(prod, p);
      ASSERT_EQ(a.groups.size(), a.group_steps.size());
      for (std::size_t i = 0; i < a.groups.size(); ++i) {
        long long reach = 1;
        for (int f : a.group_steps[i]) {
          EXPECT_LE(f, std::max(target, 2));
          reach *= f;
        }
        EXPECT_GE(reach, a.groups[i]);
      }
    }
  }
}
