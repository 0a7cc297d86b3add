#include "percoll/bytecode.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "percoll/error.hpp"

namespace percoll {

std::string_view to_string(Opcode op) noexcept {
  switch (op) {
    case Opcode::Send: return "SEND";
    case Opcode::Recv: return "RECV";
    case Opcode::WaitAll: return "WAITALL";
    case Opcode::Copy: return "COPY";
    case Opcode::Reduce: return "REDUCE";
    case Opcode::NodeBarrier: return "NODE_BARRIER";
  }
  return "?";
}

std::size_t Program::instruction_count() const noexcept {
  std::size_t n = 0;
  for (const auto& c : code) n += c.size();
  return n;
}

std::size_t NetworkVolume::max_node() const noexcept {
  return per_node.empty() ? 0 : *std::max_element(per_node.begin(), per_node.end());
}

Program compile(const Plan& plan) {
  const Topology& topo = plan.spec.topology;
  const int c = topo.cores_per_node();

  Program prog;
  prog.collective = plan.collective;
  prog.topology = topo;
  prog.dtype = plan.spec.dtype;
  prog.reduce_op = plan.spec.reduce_op;
  prog.code.resize(static_cast<std::size_t>(topo.total_ranks()));
  prog.input_bytes = plan.input_bytes;
  prog.output_bytes = plan.output_bytes;
  prog.segment_bytes = plan.segment_bytes;
  prog.staging_bytes = plan.staging_bytes;

  const ReduceOp rop = plan.spec.reduce_op.value_or(ReduceOp::Sum);
  auto check_port = [&](int port, int step) {
    if (port < 0 || port >= c) {
      throw CompileError("step " + std::to_string(step) + " uses port " + std::to_string(port) +
                         " but nodes have only " + std::to_string(c) + " cores");
    }
  };
  auto code_of = [&](int node, int core) -> std::vector<Instruction>& {
    return prog.code[static_cast<std::size_t>(topo.rank_of(node, core))];
  };

  for (const Stage& st : plan.stages) {
    switch (st.kind) {
      case StageKind::Barrier:
        for (auto& code : prog.code) {
          Instruction in;
          in.op = Opcode::NodeBarrier;
          in.step = st.step;
          code.push_back(in);
        }
        break;

      case StageKind::Local:
        for (const LocalOp& op : st.ops) {
          if (op.length == 0) continue;
          if (op.core < 0 || op.core >= c) throw CompileError("local op on missing core");
          Instruction in;
          in.op = op.kind == LocalKind::Copy ? Opcode::Copy : Opcode::Reduce;
          in.step = st.step;
          in.dst = op.dst;
          in.src = op.src;
          in.length = op.length;
          in.reduce_op = rop;
          in.dtype = plan.spec.dtype;
          code_of(op.node, op.core).push_back(in);
        }
        break;

      case StageKind::Exchange: {
        // rank -> (recvs, sends)
        std::map<int, std::pair<std::vector<Instruction>, std::vector<Instruction>>> per_rank;
        for (const Transfer& tr : st.transfers) {
          check_port(tr.src_port, st.step);
          check_port(tr.dst_port, st.step);
          if (tr.length == 0) continue;
          const int src_rank = topo.rank_of(tr.src_node, tr.src_port);
          const int dst_rank = topo.rank_of(tr.dst_node, tr.dst_port);

          Instruction recv;
          recv.op = Opcode::Recv;
          recv.step = st.step;
          recv.peer = src_rank;
          recv.port = tr.dst_port;
          recv.tag = tr.tag;
          recv.dst = tr.dst;
          recv.length = tr.length;
          per_rank[dst_rank].first.push_back(recv);

          Instruction send;
          send.op = Opcode::Send;
          send.step = st.step;
          send.peer = dst_rank;
          send.port = tr.src_port;
          send.tag = tr.tag;
          send.src = BufferRef{BufferKind::Segment, 0, tr.src_offset};
          send.length = tr.length;
          per_rank[src_rank].second.push_back(send);
        }
        for (auto& [rank, io] : per_rank) {
          auto& code = prog.code[static_cast<std::size_t>(rank)];
          code.insert(code.end(), io.first.begin(), io.first.end());
          code.insert(code.end(), io.second.begin(), io.second.end());
          Instruction wait;
          wait.op = Opcode::WaitAll;
          wait.step = st.step;
          code.push_back(wait);
        }
        break;
      }
    }
  }
  return prog;
}

namespace {

struct Access {
  BufferKind kind;
  int port;
  std::size_t lo;
  std::size_t hi;
};

bool overlaps(const Access& a, const Access& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == BufferKind::Staging && a.port != b.port) return false;
  return a.lo < b.hi && b.lo < a.hi;
}

Access access_of(const BufferRef& ref, std::size_t len) {
  return {ref.kind, ref.port, ref.offset, ref.offset + len};
}

std::size_t extent(const Program& prog, int rank, const BufferRef& ref, bool& known) {
  known = true;
  switch (ref.kind) {
    case BufferKind::Input: return prog.input_bytes.at(static_cast<std::size_t>(rank));
    case BufferKind::Output: return prog.output_bytes.at(static_cast<std::size_t>(rank));
    case BufferKind::Segment: return prog.segment_bytes;
    case BufferKind::Staging:
      if (ref.port < 0 || static_cast<std::size_t>(ref.port) >= prog.staging_bytes.size()) {
        known = false;
        return 0;
      }
      return prog.staging_bytes[static_cast<std::size_t>(ref.port)];
  }
  known = false;
  return 0;
}

struct PendingRecv {
  int rank;
  std::ptrdiff_t posted;
  std::ptrdiff_t waited = -1;
  int epoch_posted;
  int epoch_waited = -1;
  Access where;
};

struct Read {
  int rank;
  std::ptrdiff_t index;
  int epoch;
  Access where;
};

}  // namespace

std::vector<Diagnostic> validate(const Program& prog) {
  std::vector<Diagnostic> diags;
  const Topology& topo = prog.topology;
  const int ranks = topo.total_ranks();
  if (prog.code.size() != static_cast<std::size_t>(ranks)) {
    diags.push_back({-1, -1, "program has " + std::to_string(prog.code.size()) +
                                 " instruction lists for " + std::to_string(ranks) + " ranks"});
    return diags;
  }

  auto check_bounds = [&](int rank, std::ptrdiff_t idx, const BufferRef& ref, std::size_t len) {
    bool known = false;
    const std::size_t ext = extent(prog, rank, ref, known);
    if (!known) {
      diags.push_back({rank, idx, "unknown staging buffer " + std::to_string(ref.port)});
    } else if (ref.offset + len > ext) {
      diags.push_back({rank, idx, "out of bounds: " + std::string(to_string(ref.kind)) + "[" +
                                      std::to_string(ref.offset) + "," +
                                      std::to_string(ref.offset + len) + ") exceeds " +
                                      std::to_string(ext)});
    }
  };

  // (src, dst, tag) -> lengths
  std::map<std::tuple<int, int, int>, std::vector<std::pair<std::size_t, std::ptrdiff_t>>> sends;
  std::map<std::tuple<int, int, int>, std::vector<std::pair<std::size_t, std::ptrdiff_t>>> recvs;

  for (int node = 0; node < topo.num_nodes(); ++node) {
    std::vector<PendingRecv> recv_log;
    std::vector<Read> reads;
    std::vector<int> barriers;
    for (int core = 0; core < topo.cores_per_node(); ++core) {
      const int rank = topo.rank_of(node, core);
      const auto& code = prog.rank_code(rank);
      int epoch = 0;
      std::vector<std::size_t> open;  // indices into recv_log awaiting WaitAll
      for (std::size_t i = 0; i < code.size(); ++i) {
        const Instruction& in = code[i];
        const auto idx = static_cast<std::ptrdiff_t>(i);
        switch (in.op) {
          case Opcode::Send:
            check_bounds(rank, idx, in.src, in.length);
            if (in.peer < 0 || in.peer >= ranks) {
              diags.push_back({rank, idx, "send to invalid rank"});
              break;
            }
            sends[{rank, in.peer, in.tag}].emplace_back(in.length, idx);
            reads.push_back({rank, idx, epoch, access_of(in.src, in.length)});
            break;
          case Opcode::Recv:
            check_bounds(rank, idx, in.dst, in.length);
            if (in.peer < 0 || in.peer >= ranks) {
              diags.push_back({rank, idx, "recv from invalid rank"});
              break;
            }
            recvs[{in.peer, rank, in.tag}].emplace_back(in.length, idx);
            open.push_back(recv_log.size());
            recv_log.push_back({rank, idx, -1, epoch, -1, access_of(in.dst, in.length)});
            break;
          case Opcode::WaitAll:
            for (std::size_t k : open) {
              recv_log[k].waited = idx;
              recv_log[k].epoch_waited = epoch;
            }
            open.clear();
            break;
          case Opcode::Copy:
            check_bounds(rank, idx, in.src, in.length);
            check_bounds(rank, idx, in.dst, in.length);
            reads.push_back({rank, idx, epoch, access_of(in.src, in.length)});
            break;
          case Opcode::Reduce:
            check_bounds(rank, idx, in.src, in.length);
            check_bounds(rank, idx, in.dst, in.length);
            if (in.length % dtype_size(in.dtype) != 0) {
              diags.push_back({rank, idx, "reduce length not a multiple of the element width"});
            }
            reads.push_back({rank, idx, epoch, access_of(in.src, in.length)});
            reads.push_back({rank, idx, epoch, access_of(in.dst, in.length)});
            break;
          case Opcode::NodeBarrier:
            ++epoch;
            break;
        }
      }
      for (std::size_t k : open) {
        diags.push_back({rank, recv_log[k].posted, "recv without a following WAITALL"});
      }
      barriers.push_back(epoch);
    }
    if (std::adjacent_find(barriers.begin(), barriers.end(), std::not_equal_to<>()) !=
        barriers.end()) {
      diags.push_back({topo.rank_of(node, 0), -1,
                       "cores of node " + std::to_string(node) + " disagree on barrier count"});
    }

    for (const Read& rd : reads) {
      for (const PendingRecv& rv : recv_log) {
        if (!overlaps(rd.where, rv.where)) continue;
        bool racing = false;
        if (rd.rank == rv.rank) {
          racing = rd.index > rv.posted && (rv.waited < 0 || rd.index < rv.waited);
        } else if (rd.where.kind == BufferKind::Segment || rd.where.kind == BufferKind::Staging) {
          racing = rd.epoch >= rv.epoch_posted && (rv.waited < 0 || rd.epoch <= rv.epoch_waited);
        }
        if (racing) {
          diags.push_back({rd.rank, rd.index,
                           "read before wait: overlaps RECV at rank " + std::to_string(rv.rank) +
                               " instruction " + std::to_string(rv.posted)});
          break;
        }
      }
    }
  }

  for (auto& [key, list] : sends) {
    auto it = recvs.find(key);
    std::vector<std::pair<std::size_t, std::ptrdiff_t>> empty;
    auto& rlist = it == recvs.end() ? empty : it->second;
    const auto [src, dst, tag] = key;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i >= rlist.size()) {
        diags.push_back({src, list[i].second,
                         "unmatched send to rank " + std::to_string(dst) + " tag " +
                             std::to_string(tag)});
      } else if (rlist[i].first != list[i].first) {
        diags.push_back({src, list[i].second,
                         "length mismatch with recv on rank " + std::to_string(dst) + " tag " +
                             std::to_string(tag)});
      }
    }
  }
  for (auto& [key, list] : recvs) {
    auto it = sends.find(key);
    const std::size_t matched = it == sends.end() ? 0 : it->second.size();
    const auto [src, dst, tag] = key;
    for (std::size_t i = matched; i < list.size(); ++i) {
      diags.push_back({dst, list[i].second,
                       "unmatched recv from rank " + std::to_string(src) + " tag " +
                           std::to_string(tag)});
    }
  }
  return diags;
}

namespace {

void print_buffer(std::ostream& os, const BufferRef& ref) {
  os << to_string(ref.kind);
  if (ref.kind == BufferKind::Staging) os << ref.port;
}

}  // namespace

void disassemble(std::ostream& os, const Program& prog) {
  for (std::size_t r = 0; r < prog.code.size(); ++r) {
    for (const Instruction& in : prog.code[r]) {
      os << r << ' ' << in.step << ' ' << to_string(in.op) << ' ';
      if (in.peer >= 0) os << in.peer; else os << '-';
      os << ' ';
      if (in.tag >= 0) os << in.tag; else os << '-';
      os << ' ';
      switch (in.op) {
        case Opcode::Send:
          print_buffer(os, in.src);
          os << ' ' << in.src.offset << ' ' << in.length;
          break;
        case Opcode::Recv:
          print_buffer(os, in.dst);
          os << ' ' << in.dst.offset << ' ' << in.length;
          break;
        case Opcode::Copy:
        case Opcode::Reduce:
          print_buffer(os, in.dst);
          os << '<';
          print_buffer(os, in.src);
          os << ' ' << in.dst.offset << '<' << in.src.offset << ' ' << in.length;
          if (in.op == Opcode::Reduce) {
            os << ' ' << to_string(in.reduce_op) << ' ' << to_string(in.dtype);
          }
          break;
        case Opcode::WaitAll:
        case Opcode::NodeBarrier:
          os << "- - 0";
          break;
      }
      os << '\n';
    }
  }
}

std::string disassemble(const Program& prog) {
  std::ostringstream os;
  disassemble(os, prog);
  return os.str();
}

NetworkVolume network_volume(const Program& prog) {
  const Topology& topo = prog.topology;
  NetworkVolume vol;
  vol.per_node.assign(static_cast<std::size_t>(topo.num_nodes()), 0);
  vol.per_node_port.assign(static_cast<std::size_t>(topo.num_nodes()),
                           std::vector<std::size_t>(static_cast<std::size_t>(topo.cores_per_node()), 0));
  for (int r = 0; r < topo.total_ranks(); ++r) {
    const auto node = static_cast<std::size_t>(topo.node_of(r));
    for (const Instruction& in : prog.rank_code(r)) {
      if (in.op != Opcode::Send || in.length == 0) continue;
      vol.per_node[node] += in.length;
      vol.per_node_port[node][static_cast<std::size_t>(in.port)] += in.length;
      ++vol.messages;
    }
  }
  return vol;
}

}  // namespace percoll
