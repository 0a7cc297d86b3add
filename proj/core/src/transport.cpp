#include "percoll/transport.hpp"

#include <condition_variable>
#include <cstring>
#include <deque>
#include <exception>
#include <list>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "percoll/error.hpp"

namespace percoll {

namespace {

// Thrown into ranks when another rank has already failed; deliberately not a
// std::exception so the interpreter does not rewrap it.
struct Aborted {};

struct PostedRecv {
  int src;
  int tag;
  std::span<std::byte> dst;
};

struct Unexpected {
  int src;
  int tag;
  Buffer payload;
};

struct Mailbox {
  std::list<PostedRecv> posted;
  std::deque<Unexpected> unexpected;
  std::size_t outstanding = 0;
};

struct NodeState {
  Buffer segment;
  std::vector<Buffer> staging;
  int arrived = 0;
  std::uint64_t generation = 0;
};

enum class Blocked { No, Wait, Barrier };

struct RankState {
  std::size_t instruction = 0;
  Blocked blocked = Blocked::No;
  bool finished = false;
};

class Shared {
 public:
  Shared(const Topology& topo, const Program& prog, const ClusterOptions& opts)
      : topo_(topo), prog_(prog), opts_(opts) {
    mail_.resize(static_cast<std::size_t>(topo.total_ranks()));
    ranks_.resize(mail_.size());
    nodes_.resize(static_cast<std::size_t>(topo.num_nodes()));
    bytes_sent_.assign(nodes_.size(), 0);
    for (auto& n : nodes_) {
      n.segment.assign(prog.segment_bytes, std::byte{0});
      for (std::size_t s : prog.staging_bytes) n.staging.emplace_back(s, std::byte{0});
    }
    last_progress_ = std::chrono::steady_clock::now();
  }

  void send(int from, int to, int tag, std::span<const std::byte> src) {
    std::unique_lock lk(mu_);
    check_abort();
    if (to < 0 || to >= topo_.total_ranks()) throw PlanError("send to invalid rank");
    bytes_sent_[static_cast<std::size_t>(topo_.node_of(from))] += src.size();
    Mailbox& mb = mail_[static_cast<std::size_t>(to)];
    for (auto it = mb.posted.begin(); it != mb.posted.end(); ++it) {
      if (it->src == from && it->tag == tag) {
        if (it->dst.size() != src.size()) {
          throw PlanError("message length " + std::to_string(src.size()) + " to rank " +
                          std::to_string(to) + " does not match posted receive of " +
                          std::to_string(it->dst.size()));
        }
        if (!src.empty()) std::memcpy(it->dst.data(), src.data(), src.size());
        mb.posted.erase(it);
        --mb.outstanding;
        progress();
        return;
      }
    }
    mb.unexpected.push_back({from, tag, Buffer(src.begin(), src.end())});
    progress();
  }

  void recv(int self, int from, int tag, std::span<std::byte> dst) {
    std::unique_lock lk(mu_);
    check_abort();
    Mailbox& mb = mail_[static_cast<std::size_t>(self)];
    for (auto it = mb.unexpected.begin(); it != mb.unexpected.end(); ++it) {
      if (it->src == from && it->tag == tag) {
        if (it->payload.size() != dst.size()) {
          throw PlanError("message length " + std::to_string(it->payload.size()) +
                          " from rank " + std::to_string(from) +
                          " does not match posted receive of " + std::to_string(dst.size()));
        }
        if (!dst.empty()) std::memcpy(dst.data(), it->payload.data(), dst.size());
        mb.unexpected.erase(it);
        progress();
        return;
      }
    }
    mb.posted.push_back({from, tag, dst});
    ++mb.outstanding;
    progress();
  }

  void wait_all(int self) {
    std::unique_lock lk(mu_);
    Mailbox& mb = mail_[static_cast<std::size_t>(self)];
    block(lk, self, Blocked::Wait, [&] { return mb.outstanding == 0; });
  }

  void barrier(int self) {
    std::unique_lock lk(mu_);
    check_abort();
    NodeState& n = nodes_[static_cast<std::size_t>(topo_.node_of(self))];
    const std::uint64_t gen = n.generation;
    if (++n.arrived == topo_.cores_per_node()) {
      n.arrived = 0;
      ++n.generation;
      progress();
      return;
    }
    progress();
    block(lk, self, Blocked::Barrier, [&] { return n.generation != gen; });
  }

  std::span<std::byte> segment(int self) {
    return nodes_[static_cast<std::size_t>(topo_.node_of(self))].segment;
  }

  std::span<std::byte> staging(int self, int port) {
    auto& st = nodes_[static_cast<std::size_t>(topo_.node_of(self))].staging;
    if (port < 0 || static_cast<std::size_t>(port) >= st.size()) {
      throw PlanError("no staging buffer for port " + std::to_string(port));
    }
    return st[static_cast<std::size_t>(port)];
  }

  void at_instruction(int self, std::size_t index) {
    std::lock_guard lk(mu_);
    ranks_[static_cast<std::size_t>(self)].instruction = index;
    if (aborted_) throw Aborted{};
  }

  void finished(int self) {
    std::lock_guard lk(mu_);
    ranks_[static_cast<std::size_t>(self)].finished = true;
    progress();
  }

  void fail(std::exception_ptr e) {
    std::lock_guard lk(mu_);
    if (!error_) error_ = std::move(e);
    aborted_ = true;
    cv_.notify_all();
  }

  std::exception_ptr error() const { return error_; }
  const std::vector<std::size_t>& bytes_sent() const { return bytes_sent_; }

 private:
  void progress() {
    last_progress_ = std::chrono::steady_clock::now();
    cv_.notify_all();
  }

  void check_abort() const {
    if (aborted_) throw Aborted{};
  }

  template <typename Pred>
  void block(std::unique_lock<std::mutex>& lk, int self, Blocked why, Pred ready) {
    RankState& rs = ranks_[static_cast<std::size_t>(self)];
    rs.blocked = why;
    const auto poll = std::min<std::chrono::milliseconds>(opts_.deadlock_timeout,
                                                          std::chrono::milliseconds(50));
    while (!ready()) {
      if (aborted_) {
        rs.blocked = Blocked::No;
        throw Aborted{};
      }
      cv_.wait_for(lk, poll);
      if (!ready() && !aborted_ &&
          std::chrono::steady_clock::now() - last_progress_ >= opts_.deadlock_timeout) {
        error_ = std::make_exception_ptr(DeadlockError(describe_blocked()));
        aborted_ = true;
        cv_.notify_all();
      }
    }
    rs.blocked = Blocked::No;
  }

  std::string describe_blocked() const {
    std::ostringstream os;
    os << "no progress for " << opts_.deadlock_timeout.count() << " ms; blocked:";
    for (std::size_t r = 0; r < ranks_.size(); ++r) {
      const RankState& rs = ranks_[r];
      if (rs.finished || rs.blocked == Blocked::No) continue;
      const auto& code = prog_.rank_code(static_cast<int>(r));
      os << " rank " << r << " at instruction " << rs.instruction;
      if (rs.instruction < code.size()) os << " (" << to_string(code[rs.instruction].op) << ')';
      if (rs.blocked == Blocked::Wait) {
        os << " waiting on";
        for (const auto& pr : mail_[r].posted) os << " recv(src=" << pr.src << ",tag=" << pr.tag << ')';
      }
      os << ';';
    }
    return os.str();
  }

  const Topology& topo_;
  const Program& prog_;
  const ClusterOptions& opts_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Mailbox> mail_;
  std::vector<RankState> ranks_;
  std::vector<NodeState> nodes_;
  std::vector<std::size_t> bytes_sent_;
  std::chrono::steady_clock::time_point last_progress_;
  bool aborted_ = false;
  std::exception_ptr error_;
};

class Channel final : public RankChannel {
 public:
  Channel(Shared& shared, int rank, std::optional<std::uint64_t> seed)
      : shared_(shared), rank_(rank) {
    if (seed) {
      rng_.emplace(*seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(rank + 1)));
    }
  }

  void post_recv(int src_rank, int tag, std::span<std::byte> dst) override {
    shared_.recv(rank_, src_rank, tag, dst);
  }
  void post_send(int dst_rank, int tag, std::span<const std::byte> src) override {
    shared_.send(rank_, dst_rank, tag, src);
  }
  void wait_all() override { shared_.wait_all(rank_); }
  void node_barrier() override { shared_.barrier(rank_); }
  std::span<std::byte> segment() override { return shared_.segment(rank_); }
  std::span<std::byte> staging(int port) override { return shared_.staging(rank_, port); }

  void on_instruction(std::size_t index) override {
    shared_.at_instruction(rank_, index);
    if (!rng_) return;
    const auto roll = (*rng_)() % 8;
    if (roll == 0) {
      std::this_thread::sleep_for(std::chrono::microseconds((*rng_)() % 50));
    } else if (roll < 3) {
      std::this_thread::yield();
    }
  }

 private:
  Shared& shared_;
  int rank_;
  std::optional<std::mt19937_64> rng_;
};

}  // namespace

Cluster::Cluster(const Topology& topology, ClusterOptions options)
    : topology_(topology), options_(options) {
  if (options_.deadlock_timeout <= std::chrono::milliseconds(0)) {
    throw InvalidArgument("deadlock timeout must be positive");
  }
}

std::vector<Buffer> Cluster::run(const Program& program, const std::vector<Buffer>& inputs) {
  if (!(program.topology == topology_)) {
    throw InvalidArgument("program was compiled for a different topology");
  }
  const auto ranks = static_cast<std::size_t>(topology_.total_ranks());
  if (inputs.size() != ranks) {
    throw InvalidArgument("expected " + std::to_string(ranks) + " input buffers, got " +
                          std::to_string(inputs.size()));
  }
  for (std::size_t r = 0; r < ranks; ++r) {
    if (inputs[r].size() < program.input_bytes[r]) {
      throw InvalidArgument("input of rank " + std::to_string(r) + " is too small");
    }
  }

  std::vector<Buffer> outputs(ranks);
  for (std::size_t r = 0; r < ranks; ++r) outputs[r].assign(program.output_bytes[r], std::byte{0});

  std::optional<std::uint64_t> seed;
  if (options_.schedule_seed) seed = *options_.schedule_seed + 0x632be59bd9b4e019ULL * runs_;
  ++runs_;

  Shared shared(topology_, program, options_);
  {
    std::vector<std::jthread> threads;
    threads.reserve(ranks);
    for (std::size_t r = 0; r < ranks; ++r) {
      threads.emplace_back([&, r] {
        const int rank = static_cast<int>(r);
        Channel ch(shared, rank, seed);
        try {
          execute(program, rank, inputs[r], outputs[r], ch);
          shared.finished(rank);
        } catch (const Aborted&) {
        } catch (...) {
          shared.fail(std::current_exception());
        }
      });
    }
  }
  bytes_sent_ = shared.bytes_sent();
  if (auto e = shared.error()) std::rethrow_exception(e);
  return outputs;
}

std::vector<Buffer> run_collective(Cluster& cluster, const Program& program,
                                   const std::vector<Buffer>& inputs) {
  return cluster.run(program, inputs);
}

}  // namespace percoll
