#ifndef PERCOLL_FACTORIZATION_HPP
#define PERCOLL_FACTORIZATION_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace percoll {

enum class Variant : std::uint8_t { RecursiveMultiply, CyclicShift };

std::string to_string(Variant v);

/// Per-step factors f_1..f_s of a node-level algorithm.
///
/// RecursiveMultiply needs prod(f) == p. CyclicShift allows an incomplete
/// last step: prod(f) >= p and prod(f) / f_s < p. Step i uses
/// ports_per_step[i] in [1, f_i - 1] concurrent channels.
struct FactorPlan {
  std::vector<int> factors;
  Variant variant = Variant::RecursiveMultiply;
  std::vector<int> ports_per_step;

  std::size_t steps() const noexcept { return factors.size(); }

  friend bool operator==(const FactorPlan&, const FactorPlan&) = default;
};

/// Throws InvalidArgument if `plan` violates the invariants for `num_nodes`.
void check_factor_plan(const FactorPlan& plan, int num_nodes);

/// Builds a plan with ports = min(f - 1, max_ports) per step. The variant is
/// RecursiveMultiply when the factors multiply to exactly `num_nodes`,
/// CyclicShift otherwise.
FactorPlan make_factor_plan(std::vector<int> factors, int num_nodes, int max_ports);
FactorPlan make_factor_plan(std::vector<int> factors, int num_nodes, int max_ports,
                            Variant variant);

/// Uniform radix plan for any node count: ceil(log_r p) steps, recursive
/// multiplying if p is a power of r, cyclic shift otherwise.
FactorPlan uniform_factor_plan(int num_nodes, int radix, int max_ports);

/// Ascending prime factors; empty for p = 1.
std::vector<int> prime_factorize(int p);

/// Greedy combination of small primes into factors <= target. Repeatedly
/// seeds a new factor with the largest remaining prime and multiplies in the
/// largest remaining primes that keep it <= target.
std::vector<int> greedy_combine(const std::vector<int>& primes, int target);

/// Minimal s with target^s >= prime, returned as s copies of `target`.
/// Requires prime > target.
std::vector<int> steps_for_large_prime(int prime, int target);

/// All ordered factorizations of p into factors in [2, max_factor]. p = 1
/// yields a single empty list.
std::vector<std::vector<int>> enumerate_factorizations(int p, int max_factor);

/// Factor lists valid for cyclic shift: every prefix product stays below p
/// and the last factor is the smallest one that reaches p.
std::vector<std::vector<int>> enumerate_cyclic_factorizations(int p, int max_factor);

/// Step factors for the small-message allreduce: small primes combined
/// greedily, each prime above target expanded into cyclic-shift substeps.
/// Also returns the group sizes the steps belong to.
struct AllreduceFactorization {
  std::vector<int> groups;                   // group size per level, product = p
  std::vector<std::vector<int>> group_steps; // step factors per level
  std::vector<int> flat() const;
};
AllreduceFactorization allreduce_factorization(int p, int target);

}  // namespace percoll

#endif  // PERCOLL_FACTORIZATION_HPP
