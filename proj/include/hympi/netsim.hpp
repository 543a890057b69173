#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hympi/cluster.hpp"

namespace hympi {

class SharedWindow;

// Alpha-beta-gamma cost parameters in dimensionless time units.
struct CostModel {
  double alpha = 1000.0;          // per inter-node message
  double beta = 0.5;              // per inter-node byte
  double gamma = 0.05;            // per intra-node copied byte
  double barrier_base = 300.0;    // per intra-node barrier
  double barrier_per_rank = 15.0; // per participating rank

  void validate() const;

  double inter_node(std::size_t bytes) const { return alpha + beta * static_cast<double>(bytes); }
  double intra_node(std::size_t bytes) const { return gamma * static_cast<double>(bytes); }
  // A single-member barrier has nobody to wait for and is free.
  double barrier(int members) const {
    return members <= 1 ? 0.0 : barrier_base + barrier_per_rank * members;
  }

  bool operator==(const CostModel&) const = default;
};

struct Counters {
  std::uint64_t intra_copy_bytes = 0;
  std::uint64_t inter_msgs = 0;
  std::uint64_t inter_bytes = 0;
  std::uint64_t barrier_count = 0;

  Counters& operator+=(const Counters& o);
  friend Counters operator+(Counters a, const Counters& b) { return a += b; }
  friend Counters operator-(const Counters& a, const Counters& b);
  bool operator==(const Counters&) const = default;
};

// Identifies one collective invocation: operation name plus the per-rank
// call index of that name (identical on every participant).
struct CollectiveKey {
  std::string name;
  int index = 0;
  auto operator<=>(const CollectiveKey&) const = default;
};

struct CollectiveStats {
  Counters counters;
  double modeled_time = 0.0;  // longest per-rank residence in the call
};

struct Metrics {
  Counters totals;
  double modeled_time = 0.0;  // makespan over all ranks
  std::map<NodeId, std::uint64_t> per_node_alloc_bytes;
  std::map<CollectiveKey, CollectiveStats> per_collective;

  std::uint64_t max_node_alloc_bytes() const;
  Counters breakdown_sum() const;
};

// Bucket for traffic issued outside any collective scope.
inline const CollectiveKey kUnscoped{"(none)", 0};

enum class EventKind { Send, Recv, Copy, BarrierEnter, BarrierExit, WindowAccess };
std::string_view to_string(EventKind k);

struct Event {
  double time = 0.0;
  Rank rank = 0;
  EventKind kind = EventKind::Send;
  std::size_t bytes = 0;
  Rank peer = -1;
  int context = -1;
  int trace = -1;  // index into RunResult::traces, -1 when unscoped

  bool operator==(const Event&) const = default;
};

struct CollectiveTrace {
  CollectiveKey key;
  std::vector<Event> events;
};

struct RunResult {
  Metrics metrics;
  std::vector<Event> events;  // time-ordered, ties by issue order
  std::vector<CollectiveTrace> traces;
  std::vector<std::shared_ptr<SharedWindow>> windows;  // creation order

  const CollectiveTrace* trace(std::string_view name, int index) const;
  std::vector<const CollectiveTrace*> traces_named(std::string_view name) const;
};

// Point-to-point matching key: communicator context plus tag.
struct MatchKey {
  int context = 0;
  int tag = 0;
};

namespace detail {
class Engine;
struct RequestState;
}  // namespace detail

class Request {
 public:
  Request() = default;
  bool valid() const { return state_ != nullptr; }
  bool done() const;
  // Payload of a completed receive.
  const std::vector<std::byte>& data() const;

 private:
  friend class detail::Engine;
  friend class RankContext;
  explicit Request(std::shared_ptr<detail::RequestState> s) : state_(std::move(s)) {}
  std::shared_ptr<detail::RequestState> state_;
};

// Snapshot of a rank's happens-before clock used to stamp window accesses.
struct AccessStamp {
  Rank rank = 0;
  int local_index = 0;
  std::vector<std::uint64_t> clock;  // indexed by node-local rank
};

// Handle through which a rank program talks to the simulator. Only valid
// inside Simulator::run on the rank it was handed to.
class RankContext {
 public:
  Rank rank() const { return rank_; }
  int size() const;
  NodeId node() const;
  const ClusterLayout& layout() const;
  const RankMap& map() const;
  const CostModel& cost() const;
  double now() const;

  Request isend(Rank dst, std::span<const std::byte> bytes, MatchKey key = {});
  Request irecv(Rank src, MatchKey key = {});
  void wait(Request& req);
  void wait_all(std::span<Request> reqs);

  void send(Rank dst, std::span<const std::byte> bytes, MatchKey key = {});
  std::vector<std::byte> recv(Rank src, MatchKey key = {});
  std::vector<std::byte> sendrecv(Rank dst, std::span<const std::byte> bytes, Rank src,
                                  MatchKey key = {});

  // Staging copy of n bytes inside this rank's memory.
  void local_copy(std::size_t n);

  void barrier(const Communicator& comm);

  // Zero-byte same-node rendezvous that orders everything either rank did
  // before it ahead of everything either rank does after it.
  void pairwise_sync(Rank peer);

  // Collective over comm (all members on one node). Each member requests
  // its own share; the window is laid out by comm rank.
  std::shared_ptr<SharedWindow> allocate_shared(const Communicator& comm, std::size_t my_size);

  // Private allocation charged to this rank's node.
  void track_alloc(std::size_t bytes);

  // Per-(rank, communicator) call counter; used as the collective tag.
  int next_sequence(const Communicator& comm);

  class Scope {
   public:
    Scope(Scope&& o) noexcept : ctx_(o.ctx_) { o.ctx_ = nullptr; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    Scope& operator=(Scope&&) = delete;
    ~Scope();

   private:
    friend class RankContext;
    explicit Scope(RankContext* c) : ctx_(c) {}
    RankContext* ctx_;
  };
  // Attributes counters and events to a named collective call until the
  // returned guard dies. Nested scopes fold into the outermost one.
  [[nodiscard]] Scope collective_scope(std::string_view name);

  // Harness-only: aligns all rank clocks to the latest one. No cost, no
  // counters, no events, no ordering for the race detector.
  void align();

  AccessStamp access_stamp() const;
  void note_window_access(std::size_t bytes);

 private:
  friend class detail::Engine;
  RankContext(detail::Engine* e, Rank r) : engine_(e), rank_(r) {}
  detail::Engine* engine_;
  Rank rank_;
};

class Simulator {
 public:
  using Program = std::function<void(RankContext&)>;

  // The layout must outlive the simulator.
  explicit Simulator(const ClusterLayout& layout, CostModel cost = {});

  const ClusterLayout& layout() const { return *layout_; }
  const CostModel& cost() const { return cost_; }

  // Runs program on every rank to completion under the (virtual time, rank)
  // scheduler. Throws DeadlockError if ranks remain blocked with nothing
  // runnable; an exception escaping any rank aborts the run and is rethrown.
  RunResult run(const Program& program) const;

 private:
  const ClusterLayout* layout_;
  CostModel cost_;
};

RunResult spawn_ranks(const ClusterSpec& spec, const Simulator::Program& program,
                      CostModel cost = {});

}  // namespace hympi
