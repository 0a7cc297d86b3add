#include <gtest/gtest.h>

#include <cstdint>
#include <cstring>

#include "percoll/oracle.hpp"

using namespace percoll;

namespace {

template <typename T>
Buffer pack(std::initializer_list<T> v) {
  Buffer b(v.size() * sizeof(T));
  std::memcpy(b.data(), std::data(v), b.size());
  return b;
}

}  // namespace

TEST(Oracle, AllgathervConcatenates) {
  const auto spec = allgatherv_spec(Topology(2, 1), {1, 2});
  const Buffer a{std::byte{1}};
  const Buffer b{std::byte{2}, std::byte{3}};
  const auto out = naive_allgatherv(spec, {a, b});
  const Buffer want{std::byte{1}, std::byte{2}, std::byte{3}};
  EXPECT_EQ(out, (std::vector<Buffer>{want, want}));
}

TEST(Oracle, ZeroCountsTakeNoSpace) {
  const auto spec = allgatherv_spec(Topology(3, 1), {0, 2, 0});
  const auto out = naive_allgatherv(spec, {Buffer{}, Buffer{std::byte{7}, std::byte{8}}, Buffer{}});
  EXPECT_EQ(out[2], (Buffer{std::byte{7}, std::byte{8}}));
}

TEST(Oracle, AllreduceSum) {
  const auto spec = allreduce_spec(Topology(3, 1), 12, DType::Int32, ReduceOp::Sum);
  const Buffer in = pack<std::int32_t>({1, 2, 3});
  const auto out = naive_allreduce(spec, {in, in, in});
  for (const auto& o : out) EXPECT_EQ(o, pack<std::int32_t>({3, 6, 9}));
}

TEST(Oracle, AllreduceMaxInt64) {
  const auto spec = allreduce_spec(Topology(2, 1), 16, DType::Int64, ReduceOp::Max);
  const auto out =
      naive_allreduce(spec, {pack<std::int64_t>({5, -9}), pack<std::int64_t>({-1, 4})});
  EXPECT_EQ(out[1], pack<std::int64_t>({5, 4}));
}

TEST(Oracle, ReduceScatterBlocks) {
  const auto spec = reduce_scatter_spec(Topology(3, 1), {8, 4, 4}, DType::Int32, ReduceOp::Sum);
  const Buffer in = pack<std::int32_t>({1, 2, 3, 4});
  const auto out = naive_reduce_scatter(spec, {in, in, in});
  EXPECT_EQ(out[0], pack<std::int32_t>({3, 6}));
  EXPECT_EQ(out[1], pack<std::int32_t>({9}));
  EXPECT_EQ(out[2], pack<std::int32_t>({12}));
}

TEST(CompareOutputs, ExactAndTolerant) {
  const std::vector<Buffer> a{pack<double>({1.0, 2.0})};
  const std::vector<Buffer> b{pack<double>({1.0 + 1e-15, 2.0})};
  const std::vector<Buffer> c{pack<double>({1.0 + 1e-9, 2.0})};
  EXPECT_EQ(compare_outputs(DType::Float64, a, b), std::nullopt);
  EXPECT_NE(compare_outputs(DType::Float64, a, c), std::nullopt);
  EXPECT_NE(compare_outputs(DType::Int64, a, b), std::nullopt);
  EXPECT_EQ(compare_outputs(DType::Float32, {pack<float>({1.0f})}, {pack<float>({1.000001f})}),
            std::nullopt);
  EXPECT_DOUBLE_EQ(default_tolerance(DType::Float64), 1e-12);
  EXPECT_DOUBLE_EQ(default_tolerance(DType::Float32), 1e-5);
}
