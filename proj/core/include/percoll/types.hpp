#ifndef PERCOLL_TYPES_HPP
#define PERCOLL_TYPES_HPP

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace percoll {

enum class DType : std::uint8_t { Int32, Int64, Float32, Float64, Byte };

/// Commutative reductions only.
enum class ReduceOp : std::uint8_t { Sum, Min, Max };

constexpr std::size_t dtype_size(DType t) noexcept {
  switch (t) {
    case DType::Int32:
    case DType::Float32:
      return 4;
    case DType::Int64:
    case DType::Float64:
      return 8;
    case DType::Byte:
      return 1;
  }
  return 1;
}

constexpr bool is_exact(DType t) noexcept {
  return t != DType::Float32 && t != DType::Float64;
}

std::string_view to_string(DType t) noexcept;
std::string_view to_string(ReduceOp op) noexcept;

DType parse_dtype(std::string_view name);
ReduceOp parse_reduce_op(std::string_view name);

}  // namespace percoll

#endif  // PERCOLL_TYPES_HPP
