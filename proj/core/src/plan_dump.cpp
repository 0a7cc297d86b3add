#include <ostream>
#include <sstream>

#include "percoll/plan.hpp"

namespace percoll {

std::string_view to_string(BufferKind k) noexcept {
  switch (k) {
    case BufferKind::Input: return "in";
    case BufferKind::Output: return "out";
    case BufferKind::Segment: return "seg";
    case BufferKind::Staging: return "stg";
  }
  return "?";
}

namespace {

template <class T>
void join(std::ostream& os, const std::vector<T>& v) {
  if (v.empty()) {
    os << '-';
    return;
  }
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
}

void range(std::ostream& os, const BufferRef& ref, std::size_t len) {
  os << to_string(ref.kind);
  if (ref.kind == BufferKind::Staging) os << ref.port;
  os << '[' << ref.offset << ',' << ref.offset + len << ')';
}

}  // namespace

void dump_plan(std::ostream& os, const Plan& plan) {
  const auto& topo = plan.spec.topology;
  os << "plan " << to_string(plan.collective) << " nodes=" << topo.num_nodes()
     << " cores=" << topo.cores_per_node() << " dtype=" << to_string(plan.spec.dtype);
  if (plan.spec.reduce_op) os << " op=" << to_string(*plan.spec.reduce_op);
  os << '\n';
  os << "factors " << to_string(plan.factor_plan.variant) << ' ';
  join(os, plan.factor_plan.factors);
  os << " ports ";
  join(os, plan.factor_plan.ports_per_step);
  os << '\n';
  if (plan.allgather_factor_plan) {
    os << "allgather-factors " << to_string(plan.allgather_factor_plan->variant) << ' ';
    join(os, plan.allgather_factor_plan->factors);
    os << '\n';
  }
  os << "order ";
  join(os, plan.rank_order.node_permutation);
  os << "\ncounts ";
  join(os, plan.spec.counts);
  os << "\nsegment " << plan.segment_bytes << " staging ";
  join(os, plan.staging_bytes);
  os << '\n';

  int current = -1;
  for (const Stage& st : plan.stages) {
    if (st.kind != StageKind::Exchange) continue;
    if (st.step != current) {
      current = st.step;
      const StepInfo& info = plan.steps.at(static_cast<std::size_t>(st.step));
      os << "step " << st.step << " factor " << info.factor << " distance " << info.distance
         << " ports " << info.ports << " rounds " << info.rounds << '\n';
    }
    for (const Transfer& tr : st.transfers) {
      os << "  round " << st.round << " port " << tr.src_port << " n" << tr.src_node << " -> n"
         << tr.dst_node << ' ';
      range(os, BufferRef{BufferKind::Segment, 0, tr.src_offset}, tr.length);
      os << " -> ";
      range(os, tr.dst, tr.length);
      os << " tag " << tr.tag << (tr.reduce ? " reduce" : " copy") << '\n';
    }
  }
}

std::string dump_plan(const Plan& plan) {
  std::ostringstream os;
  dump_plan(os, plan);
  return os.str();
}

}  // namespace percoll
