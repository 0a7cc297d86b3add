#include <cstring>
#include <exception>

#include "percoll/bytecode.hpp"
#include "percoll/error.hpp"

namespace percoll {

namespace {

struct Buffers {
  std::span<const std::byte> input;
  std::span<std::byte> output;
  RankChannel* channel;

  std::span<std::byte> writable(const BufferRef& ref, std::size_t len) const {
    std::span<std::byte> base;
    switch (ref.kind) {
      case BufferKind::Input: throw PlanError("write to input buffer");
      case BufferKind::Output: base = output; break;
      case BufferKind::Segment: base = channel->segment(); break;
      case BufferKind::Staging: base = channel->staging(ref.port); break;
    }
    if (ref.offset + len > base.size()) throw PlanError("buffer reference out of bounds");
    return base.subspan(ref.offset, len);
  }

  std::span<const std::byte> readable(const BufferRef& ref, std::size_t len) const {
    if (ref.kind == BufferKind::Input) {
      if (ref.offset + len > input.size()) throw PlanError("input reference out of bounds");
      return input.subspan(ref.offset, len);
    }
    return writable(ref, len);
  }
};

}  // namespace

void execute(const Program& program, int rank, std::span<const std::byte> input,
             std::span<std::byte> output, RankChannel& channel) {
  const auto& code = program.rank_code(rank);
  const Buffers buf{input, output, &channel};
  std::size_t i = 0;
  try {
    if (input.size() < program.input_bytes.at(static_cast<std::size_t>(rank)) ||
        output.size() < program.output_bytes.at(static_cast<std::size_t>(rank))) {
      throw PlanError("user buffer smaller than the program expects");
    }
    for (; i < code.size(); ++i) {
      const Instruction& in = code[i];
      channel.on_instruction(i);
      switch (in.op) {
        case Opcode::Send:
          channel.post_send(in.peer, in.tag, buf.readable(in.src, in.length));
          break;
        case Opcode::Recv:
          channel.post_recv(in.peer, in.tag, buf.writable(in.dst, in.length));
          break;
        case Opcode::WaitAll:
          channel.wait_all();
          break;
        case Opcode::Copy: {
          auto src = buf.readable(in.src, in.length);
          auto dst = buf.writable(in.dst, in.length);
          std::memmove(dst.data(), src.data(), in.length);
          break;
        }
        case Opcode::Reduce:
          reduce_into(buf.writable(in.dst, in.length), buf.readable(in.src, in.length),
                      in.reduce_op, in.dtype);
          break;
        case Opcode::NodeBarrier:
          channel.node_barrier();
          break;
      }
    }
  } catch (const ExecutionError&) {
    throw;
  } catch (const DeadlockError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExecutionError(rank, static_cast<std::ptrdiff_t>(i), e.what());
  }
}

}  // namespace percoll
