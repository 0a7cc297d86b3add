#include "percoll/dftfilter.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

#include "percoll/autotune.hpp"
#include "percoll/error.hpp"

namespace percoll {

BandDftMatrix::BandDftMatrix(int n, int first, int last) : n_(n), first_(first), last_(last) {
  if (n < 1) throw InvalidArgument("transform length must be >= 1");
  if (first < 0 || last >= n || first > last) {
    throw InvalidArgument("kept modes must satisfy 0 <= first <= last < N");
  }
}

Complex BandDftMatrix::entry(int mode, int j) const {
  if (mode < 0 || mode >= n_ || j < 0 || j >= n_) throw InvalidArgument("index out of range");
  if (!keeps(mode)) return {0.0, 0.0};
  // Reduce the exponent first so large N keeps full precision.
  const long long e = (static_cast<long long>(mode) * j) % n_;
  return std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(e) / n_);
}

std::vector<std::size_t> balanced_counts(std::size_t total, int parts) {
  if (parts < 1) throw InvalidArgument("need at least one part");
  const auto p = static_cast<std::size_t>(parts);
  std::vector<std::size_t> out(p, total / p);
  for (std::size_t i = 0; i < total % p; ++i) ++out[i];
  return out;
}

DistributedField DistributedField::distribute(const std::vector<Complex>& values, int nodes) {
  DistributedField f;
  f.length = values.size();
  std::size_t pos = 0;
  for (std::size_t cnt : balanced_counts(values.size(), nodes)) {
    f.slices.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(pos),
                          values.begin() + static_cast<std::ptrdiff_t>(pos + cnt));
    pos += cnt;
  }
  return f;
}

std::vector<Complex> DistributedField::gather() const {
  std::vector<Complex> all;
  all.reserve(length);
  for (const auto& s : slices) all.insert(all.end(), s.begin(), s.end());
  return all;
}

namespace {

constexpr std::size_t kComplexBytes = sizeof(Complex);

std::vector<std::size_t> to_bytes(const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> b(counts);
  for (auto& v : b) v *= kComplexBytes;
  return b;
}

Buffer pack(const std::vector<Complex>& v) {
  Buffer b(v.size() * kComplexBytes);
  if (!v.empty()) std::memcpy(b.data(), v.data(), b.size());
  return b;
}

std::vector<Complex> unpack(const Buffer& b) {
  std::vector<Complex> v(b.size() / kComplexBytes);
  if (!v.empty()) std::memcpy(v.data(), b.data(), v.size() * kComplexBytes);
  return v;
}

void check_layout(const DistributedField& f, const std::vector<std::size_t>& counts,
                  const char* what) {
  if (f.slices.size() != counts.size()) {
    throw InvalidArgument(std::string(what) + ": node count mismatch");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (f.slices[i].size() != counts[i]) {
      throw InvalidArgument(std::string(what) + ": slice " + std::to_string(i) + " has " +
                            std::to_string(f.slices[i].size()) + " values, expected " +
                            std::to_string(counts[i]));
    }
  }
}

std::size_t sum(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{0});
}

}  // namespace

DftFilter::DftFilter(const BandDftMatrix& matrix, int nodes, int radix, ClusterOptions options)
    : matrix_(matrix), nodes_(nodes) {
  if (nodes < 1) throw InvalidArgument("need at least one node");
  const Topology topo(nodes, 1);
  real_counts_ = balanced_counts(static_cast<std::size_t>(matrix.n()), nodes);
  band_counts_ = balanced_counts(static_cast<std::size_t>(matrix.kept()), nodes);
  const FactorPlan fp = uniform_factor_plan(nodes, radix, 1);

  forward_ = std::make_unique<PersistentCollective>(
      Collective::ReduceScatter,
      reduce_scatter_spec(topo, to_bytes(band_counts_), DType::Float64, ReduceOp::Sum), fp, true,
      options);
  backward_ = std::make_unique<PersistentCollective>(
      Collective::Allgatherv, allgatherv_spec(topo, to_bytes(band_counts_), DType::Float64), fp,
      true, options);
}

DistributedField DftFilter::forward(const DistributedField& field) {
  if (field.length != static_cast<std::size_t>(matrix_.n())) {
    throw InvalidArgument("field length does not match the transform length");
  }
  check_layout(field, real_counts_, "forward");

  const int kept = matrix_.kept();
  std::vector<Buffer> inputs;
  std::size_t offset = 0;
  for (int node = 0; node < nodes_; ++node) {
    const auto& slice = field.slices[static_cast<std::size_t>(node)];
    std::vector<Complex> partial(static_cast<std::size_t>(kept));
    for (int k = 0; k < kept; ++k) {
      Complex acc{0.0, 0.0};
      for (std::size_t x = 0; x < slice.size(); ++x) {
        acc += matrix_.entry(matrix_.first() + k, static_cast<int>(offset + x)) * slice[x];
      }
      partial[static_cast<std::size_t>(k)] = acc;
    }
    offset += slice.size();
    inputs.push_back(pack(partial));
  }

  const auto outputs = forward_->execute(inputs);
  DistributedField spectral;
  spectral.length = static_cast<std::size_t>(kept);
  for (const auto& out : outputs) spectral.slices.push_back(unpack(out));

  traffic_.forward_bytes = sum(forward_->cluster().last_bytes_sent());
  traffic_.forward_message_bytes = static_cast<std::size_t>(kept) * kComplexBytes;
  return spectral;
}

DistributedField DftFilter::backward(const DistributedField& spectral) {
  if (spectral.length != static_cast<std::size_t>(matrix_.kept())) {
    throw InvalidArgument("spectral length does not match the kept band");
  }
  check_layout(spectral, band_counts_, "backward");

  std::vector<Buffer> inputs;
  for (const auto& s : spectral.slices) inputs.push_back(pack(s));
  const auto outputs = backward_->execute(inputs);

  const double scale = 1.0 / matrix_.n();
  DistributedField field;
  field.length = static_cast<std::size_t>(matrix_.n());
  std::size_t offset = 0;
  for (int node = 0; node < nodes_; ++node) {
    const std::vector<Complex> band = unpack(outputs[static_cast<std::size_t>(node)]);
    std::vector<Complex> slice(real_counts_[static_cast<std::size_t>(node)]);
    for (std::size_t x = 0; x < slice.size(); ++x) {
      Complex acc{0.0, 0.0};
      for (std::size_t k = 0; k < band.size(); ++k) {
        acc += std::conj(matrix_.entry(matrix_.first() + static_cast<int>(k),
                                       static_cast<int>(offset + x))) *
               band[k];
      }
      slice[x] = acc * scale;
    }
    offset += slice.size();
    field.slices.push_back(std::move(slice));
  }

  traffic_.backward_bytes = sum(backward_->cluster().last_bytes_sent());
  traffic_.backward_message_bytes = static_cast<std::size_t>(matrix_.kept()) * kComplexBytes;
  return field;
}

DistributedField forward_filter(const DistributedField& field, const BandDftMatrix& matrix,
                                DftFilter& engine) {
  if (matrix.n() != engine.matrix().n() || matrix.first() != engine.matrix().first() ||
      matrix.last() != engine.matrix().last()) {
    throw InvalidArgument("engine was built for a different matrix");
  }
  return engine.forward(field);
}

DistributedField backward_filter(const DistributedField& spectral, const BandDftMatrix& matrix,
                                 DftFilter& engine) {
  if (matrix.n() != engine.matrix().n() || matrix.first() != engine.matrix().first() ||
      matrix.last() != engine.matrix().last()) {
    throw InvalidArgument("engine was built for a different matrix");
  }
  return engine.backward(spectral);
}

}  // namespace percoll
