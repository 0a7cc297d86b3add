#include "percoll/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <type_traits>

#include "percoll/error.hpp"

namespace percoll {

namespace {

void check_inputs(const CollectiveSpec& spec, Collective kind, const std::vector<Buffer>& inputs) {
  check_spec(spec, kind);
  const int ranks = spec.topology.total_ranks();
  if (inputs.size() != static_cast<std::size_t>(ranks)) {
    throw InvalidArgument("oracle needs one input per rank");
  }
  for (int r = 0; r < ranks; ++r) {
    if (inputs[static_cast<std::size_t>(r)].size() < input_bytes(spec, kind, r)) {
      throw InvalidArgument("oracle input too small");
    }
  }
}

template <typename T>
T load(const Buffer& b, std::size_t i) {
  T v;
  std::memcpy(&v, b.data() + i * sizeof(T), sizeof(T));
  return v;
}

template <typename T>
void store(Buffer& b, std::size_t i, T v) {
  std::memcpy(b.data() + i * sizeof(T), &v, sizeof(T));
}

template <typename T>
T apply(ReduceOp op, T a, T b) {
  if (op == ReduceOp::Min) return b < a ? b : a;
  if (op == ReduceOp::Max) return a < b ? b : a;
  if constexpr (std::is_integral_v<T>) {
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(a) + static_cast<U>(b));
  } else {
    return a + b;
  }
}

// Reduction of all inputs over the whole vector, rank 0 first.
template <typename T>
Buffer reduce_all(const std::vector<Buffer>& inputs, std::size_t bytes, ReduceOp op) {
  Buffer out(bytes);
  const std::size_t n = bytes / sizeof(T);
  for (std::size_t i = 0; i < n; ++i) {
    T acc = load<T>(inputs[0], i);
    for (std::size_t r = 1; r < inputs.size(); ++r) acc = apply(op, acc, load<T>(inputs[r], i));
    store(out, i, acc);
  }
  return out;
}

Buffer reduce_all(DType t, const std::vector<Buffer>& inputs, std::size_t bytes, ReduceOp op) {
  switch (t) {
    case DType::Int32: return reduce_all<std::int32_t>(inputs, bytes, op);
    case DType::Int64: return reduce_all<std::int64_t>(inputs, bytes, op);
    case DType::Float32: return reduce_all<float>(inputs, bytes, op);
    case DType::Float64: return reduce_all<double>(inputs, bytes, op);
    case DType::Byte: return reduce_all<std::uint8_t>(inputs, bytes, op);
  }
  return {};
}

}  // namespace

std::vector<Buffer> naive_allgatherv(const CollectiveSpec& spec, const std::vector<Buffer>& inputs) {
  check_inputs(spec, Collective::Allgatherv, inputs);
  Buffer all;
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    all.insert(all.end(), inputs[r].begin(),
               inputs[r].begin() + static_cast<std::ptrdiff_t>(spec.counts[r]));
  }
  return std::vector<Buffer>(inputs.size(), all);
}

std::vector<Buffer> naive_reduce_scatter(const CollectiveSpec& spec,
                                         const std::vector<Buffer>& inputs) {
  check_inputs(spec, Collective::ReduceScatter, inputs);
  const Buffer sum = reduce_all(spec.dtype, inputs, spec.total_bytes(), *spec.reduce_op);
  std::vector<Buffer> out(inputs.size());
  std::size_t pos = 0;
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    out[r].assign(sum.begin() + static_cast<std::ptrdiff_t>(pos),
                  sum.begin() + static_cast<std::ptrdiff_t>(pos + spec.counts[r]));
    pos += spec.counts[r];
  }
  return out;
}

std::vector<Buffer> naive_allreduce(const CollectiveSpec& spec, const std::vector<Buffer>& inputs) {
  check_inputs(spec, Collective::Allreduce, inputs);
  const std::size_t bytes = spec.counts.empty() ? 0 : spec.counts[0];
  return std::vector<Buffer>(inputs.size(),
                             reduce_all(spec.dtype, inputs, bytes, *spec.reduce_op));
}

std::vector<Buffer> naive_collective(Collective kind, const CollectiveSpec& spec,
                                     const std::vector<Buffer>& inputs) {
  switch (kind) {
    case Collective::Allgatherv:
    case Collective::Bcast:
      return naive_allgatherv(spec, inputs);
    case Collective::ReduceScatter:
    case Collective::Reduce:
      return naive_reduce_scatter(spec, inputs);
    case Collective::Allreduce:
      return naive_allreduce(spec, inputs);
  }
  return {};
}

double default_tolerance(DType dtype) noexcept {
  switch (dtype) {
    case DType::Float64: return 1e-12;
    case DType::Float32: return 1e-5;
    default: return 0.0;
  }
}

namespace {

template <typename T>
std::optional<std::string> compare_float(const Buffer& e, const Buffer& a, double tol) {
  for (std::size_t i = 0; i < e.size() / sizeof(T); ++i) {
    const double x = load<T>(e, i);
    const double y = load<T>(a, i);
    if (x == y) continue;
    const double scale = std::max(std::fabs(x), std::fabs(y));
    if (!(std::fabs(x - y) <= tol * scale)) {
      return "element " + std::to_string(i) + ": expected " + std::to_string(x) + ", got " +
             std::to_string(y);
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> compare_outputs(DType dtype, const std::vector<Buffer>& expected,
                                           const std::vector<Buffer>& actual, double rel_tol) {
  if (expected.size() != actual.size()) {
    return "rank count differs: " + std::to_string(expected.size()) + " vs " +
           std::to_string(actual.size());
  }
  const double tol = rel_tol < 0 ? default_tolerance(dtype) : rel_tol;
  for (std::size_t r = 0; r < expected.size(); ++r) {
    const Buffer& e = expected[r];
    const Buffer& a = actual[r];
    if (e.size() != a.size()) {
      return "rank " + std::to_string(r) + ": size " + std::to_string(a.size()) +
             ", expected " + std::to_string(e.size());
    }
    std::optional<std::string> bad;
    if (dtype == DType::Float64) {
      bad = compare_float<double>(e, a, tol);
    } else if (dtype == DType::Float32) {
      bad = compare_float<float>(e, a, tol);
    } else if (e != a) {
      std::size_t i = 0;
      while (e[i] == a[i]) ++i;
      bad = "byte " + std::to_string(i) + " differs";
    }
    if (bad) return "rank " + std::to_string(r) + ": " + *bad;
  }
  return std::nullopt;
}

}  // namespace percoll
