#include "percoll/planner.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>

#include "percoll/error.hpp"

namespace percoll {

namespace {

constexpr int kTagStride = 4096;

int make_tag(int step, int t) { return step * kTagStride + t; }

/// Where each algorithm block sits inside a node's block buffer.
///
/// Recursive multiplying keeps one global order. Cyclic shift stores the
/// blocks rotated so that the holder's own block comes first, which keeps
/// every message contiguous; phase III undoes the rotation.
class Frame {
 public:
  Frame(Variant variant, std::vector<std::size_t> sizes)
      : variant_(variant), sizes_(std::move(sizes)), prefix_(sizes_.size() + 1, 0) {
    for (std::size_t a = 0; a < sizes_.size(); ++a) prefix_[a + 1] = prefix_[a] + sizes_[a];
  }

  std::size_t total() const noexcept { return prefix_.back(); }
  std::size_t size(int block) const { return sizes_[static_cast<std::size_t>(block)]; }
  int blocks() const noexcept { return static_cast<int>(sizes_.size()); }

  std::size_t offset(int holder, int block) const {
    const auto a = static_cast<std::size_t>(block);
    if (variant_ == Variant::RecursiveMultiply) return prefix_[a];
    const auto h = static_cast<std::size_t>(holder);
    return a >= h ? prefix_[a] - prefix_[h] : total() - prefix_[h] + prefix_[a];
  }

  /// Bytes of `n` consecutive blocks (cyclically) starting at `first`.
  std::size_t span(int first, int n) const {
    const auto p = sizes_.size();
    const auto f = static_cast<std::size_t>(first);
    const auto end = f + static_cast<std::size_t>(n);
    if (end <= p) return prefix_[end] - prefix_[f];
    return total() - prefix_[f] + prefix_[end - p];
  }

 private:
  Variant variant_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> prefix_;
};

/// One block-range message of the allgather data flow, in algorithm
/// positions. `t` is the sender-relative peer index in [1, factor).
struct Move {
  int t = 1;
  int src = 0;
  int dst = 0;
  int first_block = 0;
  int nblocks = 0;
};

struct GatherStep {
  int factor = 2;
  int distance = 1;
  int ports = 1;
  std::vector<Move> moves;
};

std::vector<GatherStep> gather_schedule(const FactorPlan& fp, int p) {
  std::vector<GatherStep> steps;
  int distance = 1;
  for (std::size_t s = 0; s < fp.factors.size(); ++s) {
    const int f = fp.factors[s];
    GatherStep step{f, distance, fp.ports_per_step[s], {}};
    for (int i = 0; i < p; ++i) {
      if (fp.variant == Variant::RecursiveMultiply) {
        const int digit = (i / distance) % f;
        const int group_start = i - i % distance;
        for (int t = 1; t < f; ++t) {
          const int peer_digit = (digit + t) % f;
          const int peer = i + (peer_digit - digit) * distance;
          step.moves.push_back({t, i, peer, group_start, distance});
        }
      } else {
        for (int t = 1; t < f; ++t) {
          const long long reach = static_cast<long long>(t) * distance;
          if (reach >= p) break;
          const int n = static_cast<int>(std::min<long long>(distance, p - reach));
          const int dst = static_cast<int>((i - reach % p + p) % p);
          step.moves.push_back({t, i, dst, i, n});
        }
      }
    }
    steps.push_back(std::move(step));
    distance = static_cast<int>(std::min<long long>(static_cast<long long>(distance) * f, p));
  }
  return steps;
}

int rounds_for(int messages, int ports) { return messages == 0 ? 1 : (messages + ports - 1) / ports; }

/// Element-aligned split of `bytes` into one slice per core.
std::vector<std::size_t> slice_bounds(std::size_t bytes, int cores, std::size_t width) {
  const std::size_t elements = bytes / width;
  std::vector<std::size_t> b(static_cast<std::size_t>(cores) + 1);
  for (int k = 0; k <= cores; ++k) {
    b[static_cast<std::size_t>(k)] = elements * static_cast<std::size_t>(k) /
                                     static_cast<std::size_t>(cores) * width;
  }
  return b;
}

class Builder {
 public:
  explicit Builder(Plan& plan) : plan_(plan) {}

  Stage& local(Phase phase, int step = -1, int round = 0) {
    plan_.stages.push_back(Stage{StageKind::Local, phase, step, round, {}, {}});
    return plan_.stages.back();
  }

  Stage& exchange(int step, int round) {
    plan_.stages.push_back(Stage{StageKind::Exchange, Phase::Exchange, step, round, {}, {}});
    return plan_.stages.back();
  }

  void barrier(Phase phase, int step = -1) {
    plan_.stages.push_back(Stage{StageKind::Barrier, phase, step, 0, {}, {}});
  }

  void add(Stage& stage, const LocalOp& op) {
    if (op.length > 0) stage.ops.push_back(op);
  }

  void add(Stage& stage, const Transfer& tr) {
    stage.transfers.push_back(tr);
    if (tr.dst.kind == BufferKind::Staging) {
      auto& sb = plan_.staging_bytes;
      const auto port = static_cast<std::size_t>(tr.dst.port);
      if (sb.size() <= port) sb.resize(port + 1, 0);
      sb[port] = std::max(sb[port], tr.dst.offset + tr.length);
    }
  }

  /// Splits an op on [dst.offset, +length) among cores by their ownership
  /// of the region starting at `region_base` (bounds relative to it).
  void add_sliced(Stage& stage, int node, LocalKind kind, BufferRef dst, BufferRef src,
                  std::size_t length, std::size_t region_base,
                  const std::vector<std::size_t>& bounds) {
    const std::size_t rel = dst.offset - region_base;
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
      const std::size_t lo = std::max(rel, bounds[k]);
      const std::size_t hi = std::min(rel + length, bounds[k + 1]);
      if (lo >= hi) continue;
      BufferRef d = dst;
      BufferRef s = src;
      d.offset += lo - rel;
      s.offset += lo - rel;
      add(stage, LocalOp{node, static_cast<int>(k), kind, d, s, hi - lo});
    }
  }

 private:
  Plan& plan_;
};

BufferRef seg(std::size_t off) { return {BufferKind::Segment, 0, off}; }
BufferRef staging(int port, std::size_t off = 0) { return {BufferKind::Staging, port, off}; }
BufferRef input(std::size_t off = 0) { return {BufferKind::Input, 0, off}; }
BufferRef output(std::size_t off = 0) { return {BufferKind::Output, 0, off}; }

void init_plan(Plan& plan, Collective kind, const CollectiveSpec& spec) {
  plan.collective = kind;
  plan.spec = spec;
  const int n = spec.topology.total_ranks();
  plan.input_bytes.resize(static_cast<std::size_t>(n));
  plan.output_bytes.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    plan.input_bytes[static_cast<std::size_t>(r)] = input_bytes(spec, kind, r);
    plan.output_bytes[static_cast<std::size_t>(r)] = output_bytes(spec, kind, r);
  }
}

void check_factors_for(const FactorPlan& fp, int p) {
  try {
    check_factor_plan(fp, p);
  } catch (const InvalidArgument& e) {
    throw PlanError(e.what());
  }
}

/// Byte offset of a core's block inside its node's block.
std::size_t core_prefix(const CollectiveSpec& spec, int node, int core) {
  const int c = spec.topology.cores_per_node();
  std::size_t off = 0;
  for (int k = 0; k < core; ++k) off += spec.counts[static_cast<std::size_t>(node * c + k)];
  return off;
}

/// A piece of the accumulator that maps to a contiguous range of the
/// rank-order (linear) vector.
struct Piece {
  std::size_t frame_offset;  // absolute segment offset
  std::size_t linear_offset;
  std::size_t length;
};

/// Phase I for reducing collectives: combine the c input vectors of a node
/// into the accumulator pieces, each core owning a slice of the accumulator.
/// `linear_bytes` is the input vector length.
void gather_reduce(Builder& b, const Plan& plan, const std::vector<std::vector<Piece>>& pieces,
                   std::size_t copies_base, std::size_t linear_bytes, std::size_t acc_base,
                   std::size_t acc_bytes) {
  const auto& spec = plan.spec;
  const int p = spec.topology.num_nodes();
  const int c = spec.topology.cores_per_node();
  const auto bounds = slice_bounds(acc_bytes, c, spec.element_width());

  if (c == 1) {
    Stage& st = b.local(Phase::Gather);
    for (int j = 0; j < p; ++j) {
      for (const Piece& pc : pieces[static_cast<std::size_t>(j)]) {
        b.add(st, LocalOp{j, 0, LocalKind::Copy, seg(pc.frame_offset), input(pc.linear_offset),
                          pc.length});
      }
    }
    b.barrier(Phase::Gather);
    return;
  }

  Stage& copy_in = b.local(Phase::Gather);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < c; ++k) {
      b.add(copy_in, LocalOp{j, k, LocalKind::Copy,
                             seg(copies_base + static_cast<std::size_t>(k) * linear_bytes),
                             input(0), linear_bytes});
    }
  }
  b.barrier(Phase::Gather);

  Stage& combine = b.local(Phase::Gather);
  for (int j = 0; j < p; ++j) {
    for (const Piece& pc : pieces[static_cast<std::size_t>(j)]) {
      b.add_sliced(combine, j, LocalKind::Copy, seg(pc.frame_offset),
                   seg(copies_base + pc.linear_offset), pc.length, acc_base, bounds);
      for (int k = 1; k < c; ++k) {
        b.add_sliced(combine, j, LocalKind::Reduce, seg(pc.frame_offset),
                     seg(copies_base + static_cast<std::size_t>(k) * linear_bytes +
                         pc.linear_offset),
                     pc.length, acc_base, bounds);
      }
    }
  }
  b.barrier(Phase::Gather);
}

/// Allgather passes over an existing frame at `base`. Receives land in place.
void emit_gather_steps(Builder& b, Plan& plan, const FactorPlan& fp, const Frame& frame,
                       std::size_t base, const std::vector<int>& order, int first_step) {
  const int p = frame.blocks();
  const auto schedule = gather_schedule(fp, p);
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const GatherStep& gs = schedule[s];
    const int step = first_step + static_cast<int>(s);
    int max_t = 0;
    for (const Move& m : gs.moves) max_t = std::max(max_t, m.t);
    const int rounds = rounds_for(max_t, gs.ports);
    plan.steps.push_back({gs.factor, gs.distance, gs.ports, rounds, false});
    for (int r = 0; r < rounds; ++r) {
      if (step > 0 || r > 0) b.barrier(Phase::Exchange, step);
      Stage& ex = b.exchange(step, r);
      for (const Move& m : gs.moves) {
        if ((m.t - 1) / gs.ports != r) continue;
        const int port = (m.t - 1) % gs.ports;
        Transfer tr;
        tr.src_node = order[static_cast<std::size_t>(m.src)];
        tr.dst_node = order[static_cast<std::size_t>(m.dst)];
        tr.src_port = port;
        tr.dst_port = port;
        tr.tag = make_tag(step, m.t);
        tr.src_offset = base + frame.offset(m.src, m.first_block);
        tr.dst = seg(base + frame.offset(m.dst, m.first_block));
        tr.length = frame.span(m.first_block, m.nblocks);
        b.add(ex, tr);
      }
    }
  }
}

/// Reduce_scatter passes: the allgather schedule of `fp` run backwards.
void emit_scatter_reduce_steps(Builder& b, Plan& plan, const FactorPlan& fp, const Frame& frame,
                               std::size_t base, const std::vector<int>& order, int first_step) {
  const auto& spec = plan.spec;
  const int p = frame.blocks();
  const int c = spec.topology.cores_per_node();
  const auto bounds = slice_bounds(frame.total(), c, spec.element_width());
  const auto schedule = gather_schedule(fp, p);

  for (std::size_t e = 0; e < schedule.size(); ++e) {
    const GatherStep& gs = schedule[schedule.size() - 1 - e];
    const int step = first_step + static_cast<int>(e);
    int max_t = 0;
    for (const Move& m : gs.moves) max_t = std::max(max_t, m.t);
    const int rounds = rounds_for(max_t, gs.ports);
    plan.steps.push_back({gs.factor, gs.distance, gs.ports, rounds, true});
    for (int r = 0; r < rounds; ++r) {
      if (step > 0 || r > 0) b.barrier(Phase::Exchange, step);
      Stage& ex = b.exchange(step, r);
      // receiving node -> (port, accumulator offset, length)
      std::map<int, std::vector<std::tuple<int, std::size_t, std::size_t>>> reductions;
      for (const Move& m : gs.moves) {
        if ((m.t - 1) / gs.ports != r) continue;
        const int port = (m.t - 1) % gs.ports;
        Transfer tr;
        tr.src_node = order[static_cast<std::size_t>(m.dst)];
        tr.dst_node = order[static_cast<std::size_t>(m.src)];
        tr.src_port = port;
        tr.dst_port = port;
        tr.tag = make_tag(step, m.t);
        tr.src_offset = base + frame.offset(m.dst, m.first_block);
        tr.dst = staging(port);
        tr.length = frame.span(m.first_block, m.nblocks);
        tr.reduce = true;
        b.add(ex, tr);
        reductions[tr.dst_node].emplace_back(port, base + frame.offset(m.src, m.first_block),
                                             tr.length);
      }
      b.barrier(Phase::Exchange, step);
      Stage& red = b.local(Phase::Exchange, step, r);
      for (auto& [node, list] : reductions) {
        std::sort(list.begin(), list.end());
        for (const auto& [port, acc_off, len] : list) {
          b.add_sliced(red, node, LocalKind::Reduce, seg(acc_off), staging(port), len, base,
                       bounds);
        }
      }
    }
  }
}

/// Phase III for the gathering collectives: every core copies all blocks,
/// undoing the frame order, into rank order.
void scatter_all_blocks(Builder& b, const Plan& plan, const Frame& frame, std::size_t base,
                        const std::vector<int>& positions,
                        const std::vector<std::size_t>& linear_offsets) {
  const int p = plan.spec.topology.num_nodes();
  const int c = plan.spec.topology.cores_per_node();
  b.barrier(Phase::Scatter);
  Stage& st = b.local(Phase::Scatter);
  for (int j = 0; j < p; ++j) {
    const int holder = positions[static_cast<std::size_t>(j)];
    std::vector<LocalOp> merged;
    for (int m = 0; m < p; ++m) {
      const int block = positions[static_cast<std::size_t>(m)];
      const std::size_t len = frame.size(block);
      if (len == 0) continue;
      const std::size_t src = base + frame.offset(holder, block);
      const std::size_t dst = linear_offsets[static_cast<std::size_t>(m)];
      if (!merged.empty()) {
        LocalOp& last = merged.back();
        if (last.src.offset + last.length == src && last.dst.offset + last.length == dst) {
          last.length += len;
          continue;
        }
      }
      merged.push_back(LocalOp{j, 0, LocalKind::Copy, output(dst), seg(src), len});
    }
    for (int k = 0; k < c; ++k) {
      for (LocalOp op : merged) {
        op.core = k;
        b.add(st, op);
      }
    }
  }
}

std::vector<std::size_t> node_linear_offsets(const CollectiveSpec& spec) {
  const int p = spec.topology.num_nodes();
  std::vector<std::size_t> off(static_cast<std::size_t>(p));
  std::size_t acc = 0;
  for (int j = 0; j < p; ++j) {
    off[static_cast<std::size_t>(j)] = acc;
    acc += spec.node_bytes(j);
  }
  return off;
}

RankOrder choose_order(const CollectiveSpec& spec, bool use_reorder) {
  if (!use_reorder) return RankOrder::identity(spec.topology.num_nodes());
  const auto sizes = spec.node_sizes();
  return reorder_ranks(sizes);
}

std::vector<std::size_t> sizes_in_order(const CollectiveSpec& spec, const RankOrder& order) {
  std::vector<std::size_t> s(order.size());
  for (std::size_t a = 0; a < order.size(); ++a) s[a] = spec.node_bytes(order.node_permutation[a]);
  return s;
}

Plan build_allgatherv(Collective kind, const CollectiveSpec& spec, const FactorPlan& fp,
                      bool use_reorder) {
  check_spec(spec, kind);
  const int p = spec.topology.num_nodes();
  const int c = spec.topology.cores_per_node();
  check_factors_for(fp, p);

  Plan plan;
  init_plan(plan, kind, spec);
  plan.factor_plan = fp;
  plan.rank_order = choose_order(spec, use_reorder);
  const auto& order = plan.rank_order.node_permutation;
  const auto positions = plan.rank_order.positions();
  const Frame frame(fp.variant, sizes_in_order(spec, plan.rank_order));
  plan.segment_bytes = frame.total();

  Builder b(plan);
  Stage& in = b.local(Phase::Gather);
  for (int j = 0; j < p; ++j) {
    const int pos = positions[static_cast<std::size_t>(j)];
    for (int k = 0; k < c; ++k) {
      const std::size_t len = spec.counts[static_cast<std::size_t>(j * c + k)];
      b.add(in, LocalOp{j, k, LocalKind::Copy,
                        seg(frame.offset(pos, pos) + core_prefix(spec, j, k)), input(0), len});
    }
  }
  b.barrier(Phase::Gather);
  emit_gather_steps(b, plan, fp, frame, 0, order, 0);
  scatter_all_blocks(b, plan, frame, 0, positions, node_linear_offsets(spec));
  return plan;
}

Plan build_reduce_scatter(Collective kind, const CollectiveSpec& spec, const FactorPlan& fp,
                          bool use_reorder) {
  check_spec(spec, kind);
  const int p = spec.topology.num_nodes();
  const int c = spec.topology.cores_per_node();
  check_factors_for(fp, p);

  Plan plan;
  init_plan(plan, kind, spec);
  plan.factor_plan = fp;
  plan.rank_order = choose_order(spec, use_reorder);
  const auto& order = plan.rank_order.node_permutation;
  const auto positions = plan.rank_order.positions();
  const Frame frame(fp.variant, sizes_in_order(spec, plan.rank_order));
  const std::size_t total = frame.total();
  const std::size_t copies_base = 0;
  const std::size_t acc_base = c > 1 ? static_cast<std::size_t>(c) * total : 0;
  plan.segment_bytes = acc_base + total;

  const auto linear = node_linear_offsets(spec);
  std::vector<std::vector<Piece>> pieces(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const int holder = positions[static_cast<std::size_t>(j)];
    for (int m = 0; m < p; ++m) {
      const int block = positions[static_cast<std::size_t>(m)];
      const std::size_t len = frame.size(block);
      if (len == 0) continue;
      pieces[static_cast<std::size_t>(j)].push_back(
          {acc_base + frame.offset(holder, block), linear[static_cast<std::size_t>(m)], len});
    }
  }

  Builder b(plan);
  gather_reduce(b, plan, pieces, copies_base, total, acc_base, total);
  emit_scatter_reduce_steps(b, plan, fp, frame, acc_base, order, 0);

  b.barrier(Phase::Scatter);
  Stage& out = b.local(Phase::Scatter);
  for (int j = 0; j < p; ++j) {
    const int pos = positions[static_cast<std::size_t>(j)];
    for (int k = 0; k < c; ++k) {
      const std::size_t len = spec.counts[static_cast<std::size_t>(j * c + k)];
      b.add(out, LocalOp{j, k, LocalKind::Copy, output(0),
                         seg(acc_base + frame.offset(pos, pos) + core_prefix(spec, j, k)), len});
    }
  }
  return plan;
}

}  // namespace

std::vector<std::size_t> allreduce_blocks(std::size_t elements, int num_nodes) {
  if (num_nodes < 1) throw InvalidArgument("node count must be >= 1");
  const auto p = static_cast<std::size_t>(num_nodes);
  std::vector<std::size_t> blocks(p, elements / p);
  for (std::size_t j = 0; j < elements % p; ++j) ++blocks[j];
  return blocks;
}

Plan plan_allgatherv(const CollectiveSpec& spec, const FactorPlan& factors, bool use_reorder) {
  return build_allgatherv(Collective::Allgatherv, spec, factors, use_reorder);
}

Plan plan_reduce_scatter(const CollectiveSpec& spec, const FactorPlan& factors,
                         bool use_reorder) {
  return build_reduce_scatter(Collective::ReduceScatter, spec, factors, use_reorder);
}

Plan plan_bcast(const CollectiveSpec& spec, const FactorPlan& factors, bool use_reorder) {
  return build_allgatherv(Collective::Bcast, spec, factors, use_reorder);
}

Plan plan_reduce(const CollectiveSpec& spec, const FactorPlan& factors, bool use_reorder) {
  return build_reduce_scatter(Collective::Reduce, spec, factors, use_reorder);
}

Plan plan_allreduce_large(const CollectiveSpec& spec, const FactorPlan& rs_factors,
                          const FactorPlan& ag_factors) {
  check_spec(spec, Collective::Allreduce);
  const int p = spec.topology.num_nodes();
  const int c = spec.topology.cores_per_node();
  check_factors_for(rs_factors, p);
  check_factors_for(ag_factors, p);

  Plan plan;
  init_plan(plan, Collective::Allreduce, spec);
  plan.factor_plan = rs_factors;
  plan.allgather_factor_plan = ag_factors;
  plan.rank_order = RankOrder::identity(p);
  const auto& order = plan.rank_order.node_permutation;
  const auto& positions = order;

  const std::size_t n = spec.counts.front();
  const std::size_t w = spec.element_width();
  std::vector<std::size_t> sizes = allreduce_blocks(n / w, p);
  for (auto& s : sizes) s *= w;
  std::vector<std::size_t> linear(static_cast<std::size_t>(p), 0);
  for (int j = 1; j < p; ++j) {
    linear[static_cast<std::size_t>(j)] =
        linear[static_cast<std::size_t>(j - 1)] + sizes[static_cast<std::size_t>(j - 1)];
  }

  const Frame rs_frame(rs_factors.variant, sizes);
  const Frame ag_frame(ag_factors.variant, sizes);
  const bool shared = rs_factors.variant == ag_factors.variant;
  const std::size_t copies_base = 0;
  const std::size_t rs_base = c > 1 ? static_cast<std::size_t>(c) * n : 0;
  const std::size_t ag_base = shared ? rs_base : rs_base + n;
  plan.segment_bytes = ag_base + n;

  std::vector<std::vector<Piece>> pieces(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    for (int m = 0; m < p; ++m) {
      const std::size_t len = sizes[static_cast<std::size_t>(m)];
      if (len == 0) continue;
      pieces[static_cast<std::size_t>(j)].push_back(
          {rs_base + rs_frame.offset(j, m), linear[static_cast<std::size_t>(m)], len});
    }
  }

  Builder b(plan);
  gather_reduce(b, plan, pieces, copies_base, n, rs_base, n);
  emit_scatter_reduce_steps(b, plan, rs_factors, rs_frame, rs_base, order, 0);
  const int rs_steps = static_cast<int>(plan.steps.size());

  if (!shared) {
    // The two passes use different frames: move each node's reduced block.
    if (rs_steps > 0) b.barrier(Phase::Exchange, rs_steps - 1);
    Stage& mv = b.local(Phase::Exchange, rs_steps - 1);
    const auto bounds = slice_bounds(n, c, w);
    for (int j = 0; j < p; ++j) {
      b.add_sliced(mv, j, LocalKind::Copy, seg(ag_base + ag_frame.offset(j, j)),
                   seg(rs_base + rs_frame.offset(j, j)), sizes[static_cast<std::size_t>(j)],
                   ag_base, bounds);
    }
  }
  emit_gather_steps(b, plan, ag_factors, ag_frame, ag_base, order, rs_steps);
  scatter_all_blocks(b, plan, ag_frame, ag_base, positions, linear);
  return plan;
}

namespace {

/// Offsets of scan lines per required index.
using SlotMap = std::map<int, std::size_t>;

}  // namespace

Plan plan_allreduce_small(const CollectiveSpec& spec, int target_factor) {
  check_spec(spec, Collective::Allreduce);
  const int p = spec.topology.num_nodes();
  const int c = spec.topology.cores_per_node();
  const int target = target_factor > 0 ? target_factor : c + 1;
  if (target < 2) throw InvalidArgument("target factor must be >= 2");

  const auto decomposition = allreduce_factorization(p, target);

  Plan plan;
  init_plan(plan, Collective::Allreduce, spec);
  plan.rank_order = RankOrder::identity(p);
  plan.factor_plan.variant = Variant::CyclicShift;
  for (int f : decomposition.flat()) {
    plan.factor_plan.factors.push_back(f);
    plan.factor_plan.ports_per_step.push_back(std::min(f - 1, c));
  }

  const std::size_t n = spec.counts.front();
  const std::size_t w = spec.element_width();
  const auto bounds = slice_bounds(n, c, w);
  std::size_t next_free = c > 1 ? static_cast<std::size_t>(c) * n : 0;
  auto alloc = [&](std::size_t lines) {
    const std::size_t off = next_free;
    next_free += lines * n;
    return off;
  };

  Builder b(plan);
  const std::size_t value0 = alloc(1);
  std::vector<std::vector<Piece>> pieces(static_cast<std::size_t>(p),
                                         std::vector<Piece>{{value0, 0, n}});
  if (n == 0) pieces.assign(static_cast<std::size_t>(p), {});
  gather_reduce(b, plan, pieces, 0, n, value0, n);

  // All nodes run the same schedule, so slots are shared offsets.
  std::size_t value = value0;
  int step = 0;
  int stride = 1;
  for (std::size_t level = 0; level < decomposition.groups.size(); ++level) {
    const int g = decomposition.groups[level];
    const auto& factors = decomposition.group_steps[level];
    const std::size_t s = factors.size();

    std::vector<int> distance(s);
    {
      long long d = 1;
      for (std::size_t k = 0; k < s; ++k) {
        distance[k] = static_cast<int>(d);
        d = std::min<long long>(d * factors[k], g);
      }
    }
    // required[k]: scan indices a node must hold after step k (k = 0: before
    // the first step). Only line g-1, the full reduction, is needed at the end.
    std::vector<std::set<int>> required(s + 1);
    required[s] = {g - 1};
    for (std::size_t k = s; k-- > 0;) {
      const int d = distance[k];
      std::set<int> prev;
      for (int q : required[k + 1]) {
        prev.insert(q % d);
        if (q >= d) prev.insert(d - 1);
      }
      required[k] = std::move(prev);
    }

    SlotMap held{{0, value}};
    for (std::size_t k = 0; k < s; ++k) {
      const int f = factors[k];
      const int d = distance[k];
      const int ports = std::min(f - 1, c);
      const auto& want = required[k + 1];
      int max_t = 0;
      for (int q : want) max_t = std::max(max_t, q / d);

      // Lines sent for each peer offset t, in ascending scan index.
      std::vector<std::vector<int>> lines(static_cast<std::size_t>(f));
      for (int t = 1; t <= max_t; ++t) {
        std::set<int> ls;
        for (int q : want) {
          if (q / d == t) ls.insert(q % d);
          if (q / d > t) ls.insert(d - 1);
        }
        lines[static_cast<std::size_t>(t)].assign(ls.begin(), ls.end());
      }

      // Multi-line messages are packed contiguously first.
      std::vector<std::size_t> send_offset(static_cast<std::size_t>(f), 0);
      bool packs = false;
      for (int t = 1; t <= max_t; ++t) {
        const auto& ls = lines[static_cast<std::size_t>(t)];
        if (ls.size() == 1) {
          send_offset[static_cast<std::size_t>(t)] = held.at(ls.front());
        } else {
          send_offset[static_cast<std::size_t>(t)] = alloc(ls.size());
          packs = true;
        }
      }
      if (packs) {
        if (step > 0) b.barrier(Phase::Exchange, step);
        Stage& pk = b.local(Phase::Exchange, step);
        for (int node = 0; node < p; ++node) {
          for (int t = 1; t <= max_t; ++t) {
            const auto& ls = lines[static_cast<std::size_t>(t)];
            if (ls.size() < 2) continue;
            for (std::size_t li = 0; li < ls.size(); ++li) {
              const std::size_t dst = send_offset[static_cast<std::size_t>(t)] + li * n;
              b.add_sliced(pk, node, LocalKind::Copy, seg(dst), seg(held.at(ls[li])), n, dst,
                           bounds);
            }
          }
        }
      }

      SlotMap next;
      for (int q : want) next[q] = q < d ? held.at(q) : alloc(1);
      const bool need_running = max_t >= 1;
      const std::size_t running = need_running ? alloc(1) : 0;

      const int rounds = rounds_for(max_t, ports);
      plan.steps.push_back({f, d, ports, rounds, true});
      for (int r = 0; r < rounds; ++r) {
        if (step > 0 || r > 0 || packs) b.barrier(Phase::Exchange, step);
        Stage& ex = b.exchange(step, r);
        for (int node = 0; node < p; ++node) {
          const int x = (node / stride) % g;
          const int group_base = node - x * stride;
          for (int t = r * ports + 1; t <= std::min(max_t, (r + 1) * ports); ++t) {
            const int port = (t - 1) % ports;
            const int sender = group_base + ((x + t * d) % g) * stride;
            Transfer tr;
            tr.src_node = sender;
            tr.dst_node = node;
            tr.src_port = port;
            tr.dst_port = port;
            tr.tag = make_tag(step, t);
            tr.src_offset = send_offset[static_cast<std::size_t>(t)];
            tr.dst = staging(port);
            tr.length = lines[static_cast<std::size_t>(t)].size() * n;
            tr.reduce = true;
            b.add(ex, tr);
          }
        }
        b.barrier(Phase::Exchange, step);

        Stage& comp = b.local(Phase::Exchange, step, r);
        for (int node = 0; node < p; ++node) {
          auto line_in = [&](int t, int idx) {
            const auto& ls = lines[static_cast<std::size_t>(t)];
            const auto pos = static_cast<std::size_t>(
                std::lower_bound(ls.begin(), ls.end(), idx) - ls.begin());
            return staging((t - 1) % ports, pos * n);
          };
          if (r == 0 && need_running) {
            b.add_sliced(comp, node, LocalKind::Copy, seg(running), seg(held.at(d - 1)), n,
                         running, bounds);
          }
          for (int t = r * ports + 1; t <= std::min(max_t, (r + 1) * ports); ++t) {
            bool more = false;
            for (int q : want) {
              if (q / d > t) more = true;
              if (q / d != t) continue;
              const std::size_t dst = next.at(q);
              b.add_sliced(comp, node, LocalKind::Copy, seg(dst), seg(running), n, dst, bounds);
              b.add_sliced(comp, node, LocalKind::Reduce, seg(dst), line_in(t, q % d), n, dst,
                           bounds);
            }
            if (more) {
              b.add_sliced(comp, node, LocalKind::Reduce, seg(running), line_in(t, d - 1), n,
                           running, bounds);
            }
          }
        }
      }
      held = std::move(next);
      ++step;
    }
    value = held.at(g - 1);
    stride *= g;
  }
  plan.segment_bytes = next_free;

  b.barrier(Phase::Scatter);
  Stage& out = b.local(Phase::Scatter);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < c; ++k) b.add(out, LocalOp{j, k, LocalKind::Copy, output(0), seg(value), n});
  }
  return plan;
}

Plan plan_allreduce(const CollectiveSpec& spec, const FactorPlan& factors,
                    std::size_t crossover) {
  check_spec(spec, Collective::Allreduce);
  if (spec.counts.front() <= crossover) return plan_allreduce_small(spec);
  return plan_allreduce_large(spec, factors, factors);
}

std::vector<Transfer> Plan::transfers() const {
  std::vector<Transfer> all;
  for (const Stage& st : stages) all.insert(all.end(), st.transfers.begin(), st.transfers.end());
  return all;
}

}  // namespace percoll
