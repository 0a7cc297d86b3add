#include <algorithm>
#include <cstdint>
#include <cstring>
#include <type_traits>

#include "percoll/bytecode.hpp"
#include "percoll/error.hpp"

namespace percoll {

namespace {

template <typename T>
T combine(T a, T b, ReduceOp op) noexcept {
  switch (op) {
    case ReduceOp::Sum:
      if constexpr (std::is_integral_v<T>) {
        // wrap instead of overflowing
        using U = std::make_unsigned_t<T>;
        return static_cast<T>(static_cast<U>(static_cast<U>(a) + static_cast<U>(b)));
      } else {
        return a + b;
      }
    case ReduceOp::Min: return std::min(a, b);
    case ReduceOp::Max: return std::max(a, b);
  }
  return a;
}

template <typename T>
void reduce_typed(std::byte* dst, const std::byte* src, std::size_t n, ReduceOp op) noexcept {
  for (std::size_t k = 0; k < n; ++k) {
    T a;
    T b;
    std::memcpy(&a, dst + k * sizeof(T), sizeof(T));
    std::memcpy(&b, src + k * sizeof(T), sizeof(T));
    a = combine(a, b, op);
    std::memcpy(dst + k * sizeof(T), &a, sizeof(T));
  }
}

}  // namespace

void reduce_into(std::span<std::byte> dst, std::span<const std::byte> src, ReduceOp op,
                 DType dtype) {
  if (dst.size() != src.size()) throw InvalidArgument("reduce operands differ in length");
  const std::size_t w = dtype_size(dtype);
  if (dst.size() % w != 0) throw InvalidArgument("reduce length not a multiple of the element width");
  const std::size_t n = dst.size() / w;
  switch (dtype) {
    case DType::Int32: reduce_typed<std::int32_t>(dst.data(), src.data(), n, op); break;
    case DType::Int64: reduce_typed<std::int64_t>(dst.data(), src.data(), n, op); break;
    case DType::Float32: reduce_typed<float>(dst.data(), src.data(), n, op); break;
    case DType::Float64: reduce_typed<double>(dst.data(), src.data(), n, op); break;
    case DType::Byte: reduce_typed<std::uint8_t>(dst.data(), src.data(), n, op); break;
  }
}

}  // namespace percoll
