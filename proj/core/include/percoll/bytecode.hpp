#ifndef PERCOLL_BYTECODE_HPP
#define PERCOLL_BYTECODE_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "percoll/collective.hpp"
#include "percoll/plan.hpp"

namespace percoll {

/// The instruction set has no control flow: a rank's program is a straight
/// line executed top to bottom.
enum class Opcode : std::uint8_t { Send, Recv, WaitAll, Copy, Reduce, NodeBarrier };

std::string_view to_string(Opcode op) noexcept;

/// Operands by opcode:
///   Send    peer, tag, src, length
///   Recv    peer, tag, dst, length
///   Copy    dst <- src, length
///   Reduce  dst <- dst (reduce_op) src, length, dtype
/// `port` is the node port driven by the issuing core for Send/Recv.
struct Instruction {
  Opcode op = Opcode::NodeBarrier;
  int step = -1;
  int peer = -1;
  int port = -1;
  int tag = -1;
  BufferRef dst;
  BufferRef src;
  std::size_t length = 0;
  ReduceOp reduce_op = ReduceOp::Sum;
  DType dtype = DType::Byte;
};

struct Program {
  Collective collective = Collective::Allgatherv;
  Topology topology{1, 1};
  DType dtype = DType::Byte;
  std::optional<ReduceOp> reduce_op;

  std::vector<std::vector<Instruction>> code;  // per rank
  std::vector<std::size_t> input_bytes;        // per rank
  std::vector<std::size_t> output_bytes;       // per rank
  std::size_t segment_bytes = 0;               // per node
  std::vector<std::size_t> staging_bytes;      // per node, per port

  const std::vector<Instruction>& rank_code(int rank) const {
    return code.at(static_cast<std::size_t>(rank));
  }
  std::size_t instruction_count() const noexcept;
};

/// Lowers a plan to per-rank bytecode. Port k of a node is driven by its
/// core k; a plan using more ports than cores is rejected with CompileError.
/// Zero-length transfers and local ops are dropped.
Program compile(const Plan& plan);

struct Diagnostic {
  int rank = -1;
  std::ptrdiff_t instruction = -1;
  std::string message;
};

/// Static checks: buffer bounds, one matching Recv for every Send (peer,
/// tag, length), every Recv completed by a WaitAll before its buffer is read
/// (by its own core, or by another core of the node after a barrier), equal
/// barrier counts per node. Empty result iff the program is well formed.
std::vector<Diagnostic> validate(const Program& program);

/// One line per instruction:
/// `rank step opcode peer tag buffer offset length [op dtype]`.
/// Copy/Reduce print their buffers and offsets as `dst<src`.
void disassemble(std::ostream& os, const Program& program);
std::string disassemble(const Program& program);

/// Interface the interpreter talks to; the transport implements it per rank.
class RankChannel {
 public:
  virtual ~RankChannel() = default;

  /// Nonblocking. Completion is observed through wait_all().
  virtual void post_recv(int src_rank, int tag, std::span<std::byte> dst) = 0;
  virtual void post_send(int dst_rank, int tag, std::span<const std::byte> src) = 0;
  virtual void wait_all() = 0;
  virtual void node_barrier() = 0;
  virtual std::span<std::byte> segment() = 0;
  virtual std::span<std::byte> staging(int port) = 0;
  /// Called before every instruction; the transport uses it for progress
  /// tracking and scheduling perturbation.
  virtual void on_instruction(std::size_t /*index*/) {}
};

/// Interprets `rank`'s instruction list. Throws ExecutionError (with rank and
/// instruction index) on bounds or transport failures.
void execute(const Program& program, int rank, std::span<const std::byte> input,
             std::span<std::byte> output, RankChannel& channel);

/// Elementwise dst = dst (op) src for `dtype`; lengths must match and be a
/// multiple of the element width.
void reduce_into(std::span<std::byte> dst, std::span<const std::byte> src, ReduceOp op,
                 DType dtype);

/// Bytes injected into the network, from the compiled Send instructions.
struct NetworkVolume {
  std::vector<std::size_t> per_node;                     // total sent per node
  std::vector<std::vector<std::size_t>> per_node_port;   // [node][port]
  std::size_t messages = 0;                              // nonzero Sends
  std::size_t max_node() const noexcept;
};
NetworkVolume network_volume(const Program& program);

}  // namespace percoll

#endif  // PERCOLL_BYTECODE_HPP
