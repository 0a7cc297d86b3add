#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "percoll/costmodel.hpp"
#include "percoll/error.hpp"
#include "percoll/planner.hpp"

using namespace percoll;

namespace {

Plan uniform_allgatherv(int p, int r, std::size_t per_node, Variant v) {
  const auto spec =
      allgatherv_spec(Topology(p, 1), std::vector<std::size_t>(static_cast<std::size_t>(p), per_node));
  const auto fp = make_factor_plan(std::vector<int>(static_cast<std::size_t>(std::lround(
                                                        std::log(p) / std::log(r))),
                                                    r),
                                   p, r - 1, v);
  return plan_allgatherv(spec, fp);
}

}  // namespace

TEST(ClosedForm, Examples) {
  EXPECT_DOUBLE_EQ(closed_form_cost(8, 2, 8, {1, 1, 0, 0}), 10.0);
  EXPECT_DOUBLE_EQ(closed_form_cost(8, 8, 0, {1, 0, 0, 0}), 1.0);
  const double without = closed_form_cost(16, 4, 64, {0, 2, 2, 0});
  EXPECT_DOUBLE_EQ(closed_form_cost(16, 4, 64, {0, 2, 2, 0}, true), 2 * without);
  EXPECT_DOUBLE_EQ(closed_form_cost(1, 2, 100, {1, 1, 1, 0}), 0.0);
}

TEST(ClosedForm, RequiresPowerOfRadix) {
  EXPECT_THROW(closed_form_cost(12, 2, 8, {1, 1, 0, 0}), InvalidArgument);
  EXPECT_THROW(closed_form_cost(8, 1, 8, {1, 1, 0, 0}), InvalidArgument);
  EXPECT_THROW(closed_form_cost(8, 2, 8, {-1, 1, 0, 0}), InvalidArgument);
}

TEST(ReorderCost, Examples) {
  EXPECT_DOUBLE_EQ(reorder_cost(1, {0, 0, 0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(reorder_cost(4, {0, 0, 0, 1}), 16.0);
  EXPECT_DOUBLE_EQ(reorder_cost(1024, {0, 0, 0, 1}), 102400.0);
}

TEST(Timeline, UnevenFourNodeExample) {
  const auto spec = allgatherv_spec(Topology(4, 1), {1, 1, 0, 2});
  const ModelParams m{0, 1, 0, 0};
  const auto rm = simulate_timeline(
      plan_allgatherv(spec, make_factor_plan({2, 2}, 4, 1, Variant::RecursiveMultiply)), m);
  const auto cs = simulate_timeline(
      plan_allgatherv(spec, make_factor_plan({2, 2}, 4, 1, Variant::CyclicShift)), m);
  EXPECT_EQ(rm.total, 4.0);
  EXPECT_EQ(rm.step_times, (std::vector<double>{2.0, 2.0}));
  EXPECT_EQ(cs.total, 5.0);
  EXPECT_EQ(cs.step_times, (std::vector<double>{2.0, 3.0}));
}

TEST(Timeline, MatchesClosedFormForUniformRadix) {
  const ModelParams m{3e-6, 2e-9, 5e-10, 0};
  for (auto [p, r] : {std::pair{4, 2}, {8, 2}, {16, 4}, {27, 3}, {16, 2}, {9, 3}}) {
    const std::size_t per_node = 24;
    const double n = static_cast<double>(per_node) * p;
    const auto ag = simulate_timeline(uniform_allgatherv(p, r, per_node, Variant::RecursiveMultiply), m);
    const double want = closed_form_cost(p, r, n, m);
    EXPECT_NEAR(ag.total, want, 1e-12 * want) << p << "," << r;

    const auto spec = reduce_scatter_spec(
        Topology(p, 1), std::vector<std::size_t>(static_cast<std::size_t>(p), per_node),
        DType::Float64, ReduceOp::Sum);
    const auto rs = simulate_timeline(
        plan_reduce_scatter(spec, make_factor_plan(std::vector<int>(ag.step_times.size(), r), p,
                                                   r - 1)),
        m);
    const double want_rs = closed_form_cost(p, r, n, m, true);
    EXPECT_NEAR(rs.total, want_rs, 1e-12 * want_rs) << p << "," << r;
  }
}

TEST(Timeline, EqualSizesVariantsAgree) {
  const ModelParams m{1e-6, 1e-9, 0, 0};
  for (auto [p, r] : {std::pair{8, 2}, {9, 3}, {16, 4}, {64, 4}}) {
    const double a = simulate_timeline(uniform_allgatherv(p, r, 40, Variant::RecursiveMultiply), m).total;
    const double b = simulate_timeline(uniform_allgatherv(p, r, 40, Variant::CyclicShift), m).total;
    EXPECT_NEAR(a, b, 1e-15) << p;
  }
}

TEST(Timeline, SingleNodeReduceScatterIsLocalOnly) {
  const auto spec = reduce_scatter_spec(Topology(1, 4), {16, 16, 16, 16}, DType::Float64,
                                        ReduceOp::Sum);
  const auto plan = plan_reduce_scatter(spec, make_factor_plan({}, 1, 1));
  const ModelParams m{1.0, 1.0, 0.5, 0};
  const auto tl = simulate_timeline(plan, m);
  // each core reduces three quarters of the 64-byte vector
  EXPECT_DOUBLE_EQ(tl.total, 0.5 * 3 * 16);
  EXPECT_DOUBLE_EQ(tl.local, tl.total);
  EXPECT_TRUE(tl.intervals.empty());
}

TEST(Timeline, CsvExport) {
  const auto spec = allgatherv_spec(Topology(2, 1), {3, 5});
  const auto tl = simulate_timeline(plan_allgatherv(spec, make_factor_plan({2}, 2, 1)),
                                    ModelParams{0, 1, 0, 0});
  std::ostringstream os;
  tl.write_csv(os);
  EXPECT_EQ(os.str(), "step,node,port,start,duration,bytes\n0,0,0,0,5,5\n0,1,0,0,5,5\n");
}

TEST(Interpolate, ExactAtSamplesAndLogMidpoint) {
  MeasurementTable t;
  t.add(1, 64, 1.0);
  t.add(1, 256, 3.0);
  t.add(1, 1024, 11.0);
  t.check();
  EXPECT_DOUBLE_EQ(interpolate(t, 1, 64), 1.0);
  EXPECT_DOUBLE_EQ(interpolate(t, 1, 1024), 11.0);
  EXPECT_DOUBLE_EQ(interpolate(t, 1, 128), 2.0);
  EXPECT_DOUBLE_EQ(interpolate(t, 1, 512), 7.0);
  EXPECT_DOUBLE_EQ(interpolate(t, 1, 4096), 19.0);  // extrapolated from the last segment
  EXPECT_DOUBLE_EQ(interpolate(t, 1, 0), 0.0);
  EXPECT_DOUBLE_EQ(interpolate(t, 1, 1), 0.0);  // clamped
  EXPECT_THROW(interpolate(t, 2, 64), InvalidArgument);
}

TEST(Interpolate, SyntheticTableWithinOnePercent) {
  const ModelParams m{1e-6, 1e-9, 0, 0};
  const auto sizes = geometric_sizes(8, 1 << 24, 4);
  const auto t = synthesize_table(m, {1, 3}, sizes);
  for (std::size_t s = 8; s <= (1u << 24); s = s * 9 / 8 + 1) {
    const double exact = m.alpha + m.beta * static_cast<double>(s);
    EXPECT_LE(std::fabs(interpolate(t, 3, s) - exact), 0.01 * exact) << s;
  }
}

TEST(SynthesizeTable, Arithmetic) {
  const ModelParams m{1e-6, 1e-9, 0, 0};
  const auto t = synthesize_table(m, {1}, {1000, 2000});
  EXPECT_NEAR(interpolate(t, 1, 1000), 2e-6, 1e-18);
  const std::size_t mib = 1 << 20;
  const auto sat = synthesize_table(m, {1}, {mib, 2 * mib}, long_message_saturation(m, mib, 2.0));
  EXPECT_NEAR(interpolate(sat, 1, 2 * mib), m.alpha + m.beta * mib + 2 * m.beta * mib, 1e-15);
  const auto con = synthesize_table(m, {1, 4}, {1000, 2000}, port_contention(m, 2.0));
  EXPECT_NEAR(interpolate(con, 4, 1000), m.alpha + 16 * m.beta * 1000, 1e-15);
  EXPECT_NEAR(interpolate(con, 1, 1000), 2e-6, 1e-18);
}

TEST(MeasurementTable, CsvRoundTrip) {
  const auto t = synthesize_table({1e-6, 1e-9, 0, 0}, {1, 2}, geometric_sizes(1, 1 << 10, 1));
  std::stringstream ss;
  t.write_csv(ss);
  const auto back = MeasurementTable::read_csv(ss);
  EXPECT_EQ(back.series(), t.series());
}

TEST(MeasurementTable, Rejections) {
  std::stringstream bad_header("p,s,t\n1,2,3\n");
  EXPECT_THROW(MeasurementTable::read_csv(bad_header), InvalidArgument);
  std::stringstream one_sample("ports,size_bytes,time_seconds\n1,8,1e-6\n");
  EXPECT_THROW(MeasurementTable::read_csv(one_sample), InvalidArgument);
  std::stringstream garbage("ports,size_bytes,time_seconds\n1,eight,1e-6\n");
  EXPECT_THROW(MeasurementTable::read_csv(garbage), InvalidArgument);
  MeasurementTable t;
  t.add(1, 8, 1.0);
  EXPECT_THROW(t.add(1, 8, 2.0), InvalidArgument);
  EXPECT_THROW(MeasurementTable{}.check(), InvalidArgument);
}

TEST(GeometricSizes, Endpoints) {
  EXPECT_EQ(geometric_sizes(8, 64), (std::vector<std::size_t>{8, 16, 32, 64}));
  EXPECT_EQ(geometric_sizes(8, 100).back(), 100u);
  EXPECT_EQ(geometric_sizes(5, 5), (std::vector<std::size_t>{5}));
  EXPECT_THROW(geometric_sizes(0, 5), InvalidArgument);
}
