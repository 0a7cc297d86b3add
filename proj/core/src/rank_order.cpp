#include "percoll/rank_order.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <utility>

#include "percoll/error.hpp"

namespace percoll {

RankOrder RankOrder::identity(int num_nodes) {
  RankOrder order;
  order.node_permutation.resize(static_cast<std::size_t>(num_nodes));
  std::iota(order.node_permutation.begin(), order.node_permutation.end(), 0);
  return order;
}

std::vector<int> RankOrder::positions() const {
  std::vector<int> pos(node_permutation.size());
  for (std::size_t a = 0; a < node_permutation.size(); ++a) {
    pos[static_cast<std::size_t>(node_permutation[a])] = static_cast<int>(a);
  }
  return pos;
}

RankOrder RankOrder::inverse() const { return RankOrder{positions()}; }

bool RankOrder::is_identity() const noexcept {
  for (std::size_t a = 0; a < node_permutation.size(); ++a) {
    if (node_permutation[a] != static_cast<int>(a)) return false;
  }
  return true;
}

bool is_permutation_of_iota(std::span<const int> perm) noexcept {
  std::vector<bool> seen(perm.size(), false);
  for (int v : perm) {
    if (v < 0 || static_cast<std::size_t>(v) >= perm.size() || seen[static_cast<std::size_t>(v)]) {
      return false;
    }
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

namespace {

struct Group {
  std::size_t size = 0;
  int min_index = 0;
  std::vector<int> members;
};

// Strict order "a is smaller than b": by size, then by lowest node index.
bool smaller(const Group& a, const Group& b) {
  return a.size != b.size ? a.size < b.size : a.min_index < b.min_index;
}

// Strict order "a is the better pick for 'largest'": bigger size, then the
// lowest node index.
bool larger_pick(const Group& a, const Group& b) {
  return a.size != b.size ? a.size > b.size : a.min_index < b.min_index;
}

Group merge(Group lo, Group hi) {
  Group g;
  g.size = lo.size + hi.size;
  g.min_index = std::min(lo.min_index, hi.min_index);
  g.members = std::move(lo.members);
  g.members.insert(g.members.end(), hi.members.begin(), hi.members.end());
  return g;
}

}  // namespace

RankOrder reorder_ranks(std::span<const std::size_t> node_sizes) {
  if (node_sizes.empty()) throw InvalidArgument("reorder_ranks needs at least one node");
  const int p = static_cast<int>(node_sizes.size());
  if (std::all_of(node_sizes.begin(), node_sizes.end(),
                  [&](std::size_t s) { return s == node_sizes.front(); })) {
    return RankOrder::identity(p);
  }

  std::vector<Group> level;
  level.reserve(node_sizes.size());
  for (int j = 0; j < p; ++j) level.push_back({node_sizes[static_cast<std::size_t>(j)], j, {j}});

  while (level.size() > 1) {
    std::optional<Group> leftover;
    if (level.size() % 2 == 1) {
      auto it = std::min_element(level.begin(), level.end(), larger_pick);
      leftover = std::move(*it);
      level.erase(it);
    }
    // Keyed by (size, lowest index): the low end is begin(), the high end is
    // the lowest index among the largest size.
    std::map<std::pair<std::size_t, int>, Group> pool;
    for (Group& g : level) pool.emplace(std::pair{g.size, g.min_index}, std::move(g));
    std::vector<Group> pairs;
    pairs.reserve(pool.size() / 2);
    while (!pool.empty()) {
      Group lo = std::move(pool.extract(pool.begin()).mapped());
      const std::size_t top = std::prev(pool.end())->first.first;
      Group hi = std::move(pool.extract(pool.lower_bound({top, -1})).mapped());
      if (smaller(hi, lo)) std::swap(lo, hi);
      pairs.push_back(merge(std::move(lo), std::move(hi)));
    }
    std::stable_sort(pairs.begin(), pairs.end(), smaller);
    if (leftover) pairs.push_back(std::move(*leftover));
    level = std::move(pairs);
  }
  return RankOrder{std::move(level.front().members)};
}

}  // namespace percoll
