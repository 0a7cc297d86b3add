#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "percoll/dftfilter.hpp"
#include "percoll/error.hpp"

using namespace percoll;

namespace {

std::vector<Complex> random_field(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<Complex> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = {g(rng), g(rng)};
  return v;
}

// Dense reference: full DFT with the same sign convention, written directly.
std::vector<Complex> dense_dft(const std::vector<Complex>& x) {
  const auto n = x.size();
  std::vector<Complex> s(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / n;
      s[k] += x[j] * Complex(std::cos(angle), std::sin(angle));
    }
  }
  return s;
}

std::vector<Complex> dense_projection(const std::vector<Complex>& x, int first, int last) {
  const auto n = x.size();
  const auto s = dense_dft(x);
  std::vector<Complex> y(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (int k = first; k <= last; ++k) {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>((static_cast<std::size_t>(k) * j) % n) / n;
      y[j] += s[static_cast<std::size_t>(k)] * Complex(std::cos(angle), std::sin(angle));
    }
    y[j] /= static_cast<double>(n);
  }
  return y;
}

double rel_error(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double num = 0;
  double den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den == 0 ? num : num / den;
}

}  // namespace

TEST(BandDftMatrix, Structure) {
  const BandDftMatrix m(8, 2, 3);
  EXPECT_EQ(m.kept(), 2);
  EXPECT_EQ(m.entry(0, 5), Complex(0, 0));
  EXPECT_EQ(m.entry(7, 1), Complex(0, 0));
  EXPECT_NEAR(std::abs(m.entry(3, 5)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(m.entry(2, 1) - std::polar(1.0, -std::numbers::pi / 2)), 0.0, 1e-15);
  EXPECT_THROW(BandDftMatrix(8, 3, 2), InvalidArgument);
  EXPECT_THROW(BandDftMatrix(8, 0, 8), InvalidArgument);
}

TEST(BalancedCounts, EvenAsPossible) {
  EXPECT_EQ(balanced_counts(10, 4), (std::vector<std::size_t>{3, 3, 2, 2}));
  EXPECT_EQ(balanced_counts(2, 3), (std::vector<std::size_t>{1, 1, 0}));
  const auto f = DistributedField::distribute(std::vector<Complex>(7), 3);
  EXPECT_EQ(f.slices[0].size(), 3u);
  EXPECT_EQ(f.slices[2].size(), 2u);
}

TEST(DftFilter, ConstantInputDcMode) {
  const BandDftMatrix m(8, 0, 0);
  DftFilter filter(m, 3);
  const auto field = DistributedField::distribute(std::vector<Complex>(8, {2.5, 0}), 3);
  const auto s = forward_filter(field, m, filter).gather();
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(std::abs(s[0] - Complex(20.0, 0)), 0.0, 1e-12);
  EXPECT_EQ(filter.traffic().forward_message_bytes, sizeof(Complex));
}

TEST(DftFilter, ForwardMatchesDenseRows) {
  std::mt19937_64 rng(8);
  const BandDftMatrix m(8, 1, 2);
  DftFilter filter(m, 3);
  const auto x = random_field(8, rng);
  const auto s = filter.forward(DistributedField::distribute(x, 3));
  // kept band spread as [1,1,0]: the third node idles
  EXPECT_EQ(s.slices[0].size(), 1u);
  EXPECT_EQ(s.slices[2].size(), 0u);
  const auto dense = dense_dft(x);
  const auto got = s.gather();
  EXPECT_LE(rel_error(got, {dense[1], dense[2]}), 1e-12);
}

TEST(DftFilter, AllModesRoundTrip) {
  std::mt19937_64 rng(9);
  const BandDftMatrix m(16, 0, 15);
  DftFilter filter(m, 4);
  const auto x = random_field(16, rng);
  const auto y = filter.backward(filter.forward(DistributedField::distribute(x, 4))).gather();
  EXPECT_LE(rel_error(y, x), 1e-12);
}

TEST(DftFilter, DcOnlyOnZeroMeanIsZero) {
  std::mt19937_64 rng(10);
  auto x = random_field(12, rng);
  Complex mean{};
  for (const auto& v : x) mean += v;
  mean /= 12.0;
  for (auto& v : x) v -= mean;
  const BandDftMatrix m(12, 0, 0);
  DftFilter filter(m, 5);
  const auto y = filter.backward(filter.forward(DistributedField::distribute(x, 5))).gather();
  for (const auto& v : y) EXPECT_LE(std::abs(v), 1e-14);
}

TEST(DftFilter, BandProjectionMatchesDense) {
  std::mt19937_64 rng(11);
  const BandDftMatrix m(16, 2, 5);
  DftFilter filter(m, 3);
  const auto x = random_field(16, rng);
  const auto y = filter.backward(filter.forward(DistributedField::distribute(x, 3))).gather();
  EXPECT_LE(rel_error(y, dense_projection(x, 2, 5)), 1e-12);
}

TEST(DftFilter, ProjectionIsIdempotent) {
  std::mt19937_64 rng(12);
  const BandDftMatrix m(32, 3, 6);
  DftFilter filter(m, 5);
  const auto x = DistributedField::distribute(random_field(32, rng), 5);
  const auto once = filter.backward(filter.forward(x));
  const auto twice = filter.backward(filter.forward(once));
  EXPECT_LE(rel_error(twice.gather(), once.gather()), 1e-12);
}

TEST(DftFilter, TrafficScalesWithKeptModes) {
  std::mt19937_64 rng(13);
  std::vector<std::size_t> fwd;
  for (int n : {16, 64}) {
    const BandDftMatrix m(n, 1, 3);
    DftFilter filter(m, 4);
    filter.backward(filter.forward(DistributedField::distribute(random_field(n, rng), 4)));
    fwd.push_back(filter.traffic().forward_bytes + filter.traffic().backward_bytes);
  }
  EXPECT_EQ(fwd[0], fwd[1]);
  EXPECT_GT(fwd[0], 0u);
}

TEST(DftFilter, DimensionMismatch) {
  const BandDftMatrix m(8, 1, 2);
  DftFilter filter(m, 2);
  EXPECT_THROW(filter.forward(DistributedField::distribute(std::vector<Complex>(9), 2)),
               InvalidArgument);
  EXPECT_THROW(filter.forward(DistributedField::distribute(std::vector<Complex>(8), 3)),
               InvalidArgument);
  EXPECT_THROW(filter.backward(DistributedField::distribute(std::vector<Complex>(3), 2)),
               InvalidArgument);
  EXPECT_THROW(forward_filter(DistributedField::distribute(std::vector<Complex>(8), 2),
                              BandDftMatrix(8, 0, 2), filter),
               InvalidArgument);
}
