#ifndef PERCOLL_DFTFILTER_HPP
#define PERCOLL_DFTFILTER_HPP

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "percoll/factorization.hpp"
#include "percoll/persistent.hpp"

namespace percoll {

using Complex = std::complex<double>;

/// Rows [first, last] of the N-point DFT matrix, entries w^(k j) with
/// w = exp(-2 pi i / N); every other row is zero.
class BandDftMatrix {
 public:
  BandDftMatrix(int n, int first, int last);

  int n() const noexcept { return n_; }
  int first() const noexcept { return first_; }
  int last() const noexcept { return last_; }
  int kept() const noexcept { return last_ - first_ + 1; }
  bool keeps(int mode) const noexcept { return mode >= first_ && mode <= last_; }
  /// Row `mode` (any value in [0, N)), column `j`.
  Complex entry(int mode, int j) const;

 private:
  int n_;
  int first_;
  int last_;
};

/// Sizes of `parts` contiguous slices of `total` items, differing by at most
/// one, larger slices first.
std::vector<std::size_t> balanced_counts(std::size_t total, int parts);

/// A vector split into contiguous per-node slices.
struct DistributedField {
  std::size_t length = 0;
  std::vector<std::vector<Complex>> slices;

  static DistributedField distribute(const std::vector<Complex>& values, int nodes);
  std::vector<Complex> gather() const;
  int nodes() const noexcept { return static_cast<int>(slices.size()); }
};

struct FilterTraffic {
  std::size_t forward_bytes = 0;   // network bytes of the last forward
  std::size_t backward_bytes = 0;  // network bytes of the last backward
  std::size_t forward_message_bytes = 0;   // per-node block bytes handed to the engine
  std::size_t backward_message_bytes = 0;
};

/// Line transform between a real-space field distributed over `nodes` and
/// the kept band distributed as evenly as possible. Forward: every node
/// computes its partial band sums, combined by reduce_scatter. Backward:
/// allgatherv of the band, then each node evaluates its slice of the inverse
/// (scaled by 1/N). Both collectives are planned once with reordering.
class DftFilter {
 public:
  DftFilter(const BandDftMatrix& matrix, int nodes, int radix = 2, ClusterOptions options = {});

  DistributedField forward(const DistributedField& field);
  DistributedField backward(const DistributedField& spectral);

  const BandDftMatrix& matrix() const noexcept { return matrix_; }
  const FilterTraffic& traffic() const noexcept { return traffic_; }
  const PersistentCollective& forward_collective() const noexcept { return *forward_; }
  const PersistentCollective& backward_collective() const noexcept { return *backward_; }

 private:
  BandDftMatrix matrix_;
  int nodes_;
  std::vector<std::size_t> real_counts_;
  std::vector<std::size_t> band_counts_;
  std::unique_ptr<PersistentCollective> forward_;
  std::unique_ptr<PersistentCollective> backward_;
  FilterTraffic traffic_;
};

DistributedField forward_filter(const DistributedField& field, const BandDftMatrix& matrix,
                                DftFilter& engine);
DistributedField backward_filter(const DistributedField& spectral, const BandDftMatrix& matrix,
                                 DftFilter& engine);

}  // namespace percoll

#endif  // PERCOLL_DFTFILTER_HPP
