#include "percoll/factorization.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "percoll/error.hpp"

namespace percoll {

std::string to_string(Variant v) {
  return v == Variant::RecursiveMultiply ? "RecursiveMultiply" : "CyclicShift";
}

namespace {

std::int64_t product(const std::vector<int>& factors) {
  std::int64_t prod = 1;
  for (int f : factors) {
    prod *= f;
    if (prod > (std::int64_t{1} << 40)) return prod;  // saturate; callers only compare with p
  }
  return prod;
}

}  // namespace

void check_factor_plan(const FactorPlan& plan, int num_nodes) {
  if (num_nodes < 1) throw InvalidArgument("node count must be >= 1");
  if (plan.ports_per_step.size() != plan.factors.size()) {
    throw InvalidArgument("ports_per_step must have one entry per factor");
  }
  for (std::size_t i = 0; i < plan.factors.size(); ++i) {
    const int f = plan.factors[i];
    if (f < 2) throw InvalidArgument("factors must be >= 2");
    const int ports = plan.ports_per_step[i];
    if (ports < 1 || ports > f - 1) {
      throw InvalidArgument("step " + std::to_string(i) + ": ports must lie in [1, " +
                            std::to_string(f - 1) + "]");
    }
  }
  const std::int64_t prod = product(plan.factors);
  if (plan.variant == Variant::RecursiveMultiply) {
    if (prod != num_nodes) {
      throw InvalidArgument("recursive multiplying needs factors whose product is " +
                            std::to_string(num_nodes));
    }
    return;
  }
  if (plan.factors.empty()) {
    if (num_nodes != 1) throw InvalidArgument("empty cyclic shift plan needs one node");
    return;
  }
  const std::int64_t before_last = prod / plan.factors.back();
  if (prod < num_nodes || before_last >= num_nodes) {
    throw InvalidArgument("cyclic shift factors must reach " + std::to_string(num_nodes) +
                          " nodes exactly in the last step");
  }
}

FactorPlan make_factor_plan(std::vector<int> factors, int num_nodes, int max_ports) {
  const Variant v = product(factors) == num_nodes ? Variant::RecursiveMultiply
                                                   : Variant::CyclicShift;
  return make_factor_plan(std::move(factors), num_nodes, max_ports, v);
}

FactorPlan make_factor_plan(std::vector<int> factors, int num_nodes, int max_ports,
                            Variant variant) {
  if (max_ports < 1) throw InvalidArgument("max_ports must be >= 1");
  FactorPlan plan;
  plan.variant = variant;
  plan.ports_per_step.reserve(factors.size());
  for (int f : factors) plan.ports_per_step.push_back(std::max(1, std::min(f - 1, max_ports)));
  plan.factors = std::move(factors);
  check_factor_plan(plan, num_nodes);
  return plan;
}

FactorPlan uniform_factor_plan(int num_nodes, int radix, int max_ports) {
  if (num_nodes < 1) throw InvalidArgument("node count must be >= 1");
  if (radix < 2) throw InvalidArgument("radix must be >= 2");
  std::vector<int> factors;
  std::int64_t reach = 1;
  while (reach < num_nodes) {
    factors.push_back(radix);
    reach *= radix;
  }
  return make_factor_plan(std::move(factors), num_nodes, max_ports);
}

std::vector<int> prime_factorize(int p) {
  if (p < 1) throw InvalidArgument("prime_factorize needs p >= 1");
  std::vector<int> primes;
  for (int d = 2; static_cast<std::int64_t>(d) * d <= p; ++d) {
    while (p % d == 0) {
      primes.push_back(d);
      p /= d;
    }
  }
  if (p > 1) primes.push_back(p);
  return primes;
}

std::vector<int> greedy_combine(const std::vector<int>& primes, int target) {
  if (target < 2) throw InvalidArgument("target factor must be >= 2");
  std::vector<int> remaining = primes;
  for (int q : remaining) {
    if (q < 2) throw InvalidArgument("greedy_combine expects primes >= 2");
    if (q > target) {
      throw InvalidArgument("prime " + std::to_string(q) + " exceeds target " +
                            std::to_string(target) + "; route it to steps_for_large_prime");
    }
  }
  std::sort(remaining.begin(), remaining.end(), std::greater<>());

  std::vector<int> out;
  while (!remaining.empty()) {
    int factor = remaining.front();
    remaining.erase(remaining.begin());
    for (auto it = remaining.begin(); it != remaining.end();) {
      if (static_cast<std::int64_t>(factor) * *it <= target) {
        factor *= *it;
        it = remaining.erase(it);
      } else {
        ++it;
      }
    }
    out.push_back(factor);
  }
  return out;
}

std::vector<int> steps_for_large_prime(int prime, int target) {
  if (target < 2) throw InvalidArgument("target factor must be >= 2");
  if (prime <= target) {
    throw InvalidArgument("steps_for_large_prime needs prime > target; use greedy_combine");
  }
  std::vector<int> steps;
  std::int64_t reach = 1;
  while (reach < prime) {
    steps.push_back(target);
    reach *= target;
  }
  return steps;
}

std::vector<std::vector<int>> enumerate_factorizations(int p, int max_factor) {
  if (p < 1) throw InvalidArgument("enumerate_factorizations needs p >= 1");
  if (max_factor < 2) throw InvalidArgument("max_factor must be >= 2");
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  std::function<void(int)> rec = [&](int rest) {
    if (rest == 1) {
      out.push_back(prefix);
      return;
    }
    for (int f = 2; f <= std::min(rest, max_factor); ++f) {
      if (rest % f != 0) continue;
      prefix.push_back(f);
      rec(rest / f);
      prefix.pop_back();
    }
  };
  rec(p);
  return out;
}

std::vector<std::vector<int>> enumerate_cyclic_factorizations(int p, int max_factor) {
  if (p < 1) throw InvalidArgument("enumerate_cyclic_factorizations needs p >= 1");
  if (max_factor < 2) throw InvalidArgument("max_factor must be >= 2");
  std::vector<std::vector<int>> out;
  if (p == 1) {
    out.emplace_back();
    return out;
  }
  std::vector<int> prefix;
  std::function<void(long long)> rec = [&](long long reach) {
    // Closing step: the smallest factor that covers p.
    const long long last = (p + reach - 1) / reach;
    if (last >= 2 && last <= max_factor) {
      prefix.push_back(static_cast<int>(last));
      out.push_back(prefix);
      prefix.pop_back();
    }
    for (int f = 2; f <= max_factor && reach * f < p; ++f) {
      prefix.push_back(f);
      rec(reach * f);
      prefix.pop_back();
    }
  };
  rec(1);
  return out;
}

std::vector<int> AllreduceFactorization::flat() const {
  std::vector<int> all;
  for (const auto& s : group_steps) all.insert(all.end(), s.begin(), s.end());
  return all;
}

AllreduceFactorization allreduce_factorization(int p, int target) {
  if (target < 2) throw InvalidArgument("target factor must be >= 2");
  const auto primes = prime_factorize(p);
  std::vector<int> small;
  std::vector<int> large;
  for (int q : primes) (q <= target ? small : large).push_back(q);

  AllreduceFactorization out;
  for (int f : greedy_combine(small, target)) {
    out.groups.push_back(f);
    out.group_steps.push_back({f});
  }
  for (int q : large) {
    out.groups.push_back(q);
    out.group_steps.push_back(steps_for_large_prime(q, target));
  }
  return out;
}

}  // namespace percoll
