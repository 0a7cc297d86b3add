#ifndef PERCOLL_RANK_ORDER_HPP
#define PERCOLL_RANK_ORDER_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace percoll {

/// Node numbering used by the algorithm: position a of the algorithm is
/// played by physical node `node_permutation[a]`.
struct RankOrder {
  std::vector<int> node_permutation;

  static RankOrder identity(int num_nodes);

  std::size_t size() const noexcept { return node_permutation.size(); }
  int node_at(int position) const { return node_permutation.at(static_cast<std::size_t>(position)); }
  /// position_of[node] = algorithm position of that node.
  std::vector<int> positions() const;
  RankOrder inverse() const;
  bool is_identity() const noexcept;

  friend bool operator==(const RankOrder&, const RankOrder&) = default;
};

/// True iff `perm` is a bijection on [0, perm.size()).
bool is_permutation_of_iota(std::span<const int> perm) noexcept;

/// Pairing heuristic for non-equal node sizes.
///
/// Builds a binary tree bottom-up. At each level an odd group count first
/// withdraws the largest group, which is appended after the pairs of the
/// next level. The rest are paired smallest with largest, second smallest
/// with second largest, and so on; each pair is ordered ascending by size and
/// the pairs ascending by their sum. Ties go to the smallest original node
/// index. The leaf order of the final tree is the permutation; equal sizes
/// keep the identity.
RankOrder reorder_ranks(std::span<const std::size_t> node_sizes);

}  // namespace percoll

#endif  // PERCOLL_RANK_ORDER_HPP
