#include "hympi/netsim.hpp"

#include <algorithm>
#include <boost/context/fiber.hpp>
#include <boost/context/fixedsize_stack.hpp>
#include <deque>
#include <exception>
#include <set>
#include <sstream>
#include <tuple>

#include "hympi/errors.hpp"
#include "hympi/shm_window.hpp"

namespace hympi {

namespace bctx = boost::context;

void CostModel::validate() const {
  for (double v : {alpha, beta, gamma, barrier_base, barrier_per_rank}) {
    if (!(v >= 0.0)) throw ConfigError("cost model parameters must be non-negative");
  }
}

Counters& Counters::operator+=(const Counters& o) {
  intra_copy_bytes += o.intra_copy_bytes;
  inter_msgs += o.inter_msgs;
  inter_bytes += o.inter_bytes;
  barrier_count += o.barrier_count;
  return *this;
}

Counters operator-(const Counters& a, const Counters& b) {
  return Counters{a.intra_copy_bytes - b.intra_copy_bytes, a.inter_msgs - b.inter_msgs,
                  a.inter_bytes - b.inter_bytes, a.barrier_count - b.barrier_count};
}

std::uint64_t Metrics::max_node_alloc_bytes() const {
  std::uint64_t m = 0;
  for (const auto& [node, bytes] : per_node_alloc_bytes) m = std::max(m, bytes);
  return m;
}

Counters Metrics::breakdown_sum() const {
  Counters c;
  for (const auto& [key, stats] : per_collective) c += stats.counters;
  return c;
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Send: return "send";
    case EventKind::Recv: return "recv";
    case EventKind::Copy: return "copy";
    case EventKind::BarrierEnter: return "barrier_enter";
    case EventKind::BarrierExit: return "barrier_exit";
    case EventKind::WindowAccess: return "window_access";
  }
  return "?";
}

const CollectiveTrace* RunResult::trace(std::string_view name, int index) const {
  for (const auto& t : traces) {
    if (t.key.name == name && t.key.index == index) return &t;
  }
  return nullptr;
}

std::vector<const CollectiveTrace*> RunResult::traces_named(std::string_view name) const {
  std::vector<const CollectiveTrace*> out;
  for (const auto& t : traces) {
    if (t.key.name == name) out.push_back(&t);
  }
  return out;
}

namespace detail {

struct RequestState {
  Rank owner = 0;
  bool done = false;
  double completion = 0.0;
  std::vector<std::byte> data;
  std::string what;
};

namespace {

constexpr std::size_t kStackBytes = 512 * 1024;

enum class TaskState { Ready, Running, Blocked, Done };

struct ScopeFrame {
  int trace = -1;
  double entered = 0.0;
};

struct Task {
  bctx::fiber fiber;
  bctx::fiber sink;
  double clock = 0.0;
  TaskState state = TaskState::Ready;
  std::string waiting_in;
  std::exception_ptr error;
  std::vector<ScopeFrame> scopes;
  std::map<std::string, int, std::less<>> scope_calls;
  std::map<int, int> sequence;      // context id -> next call number
  std::map<Rank, int> pair_sequence;
};

struct PendingSend {
  double posted = 0.0;
  std::shared_ptr<RequestState> req;
  std::vector<std::byte> payload;
  int trace = -1;
};

struct PendingRecv {
  double posted = 0.0;
  std::shared_ptr<RequestState> req;
  int trace = -1;
};

struct Mailbox {
  std::deque<PendingSend> sends;
  std::deque<PendingRecv> recvs;
};

enum class RendezvousKind { Barrier, PairSync, Allocate, Align };

struct Rendezvous {
  int expected = 0;
  int arrived = 0;
  int departed = 0;
  double latest = 0.0;
  bool done = false;
  double completion = 0.0;
  std::vector<Rank> ranks;
  std::vector<std::size_t> sizes;  // allocation requests, by comm rank
  std::shared_ptr<SharedWindow> window;
};

using RendezvousKey = std::tuple<RendezvousKind, int, int, int>;
using MailKey = std::tuple<int, Rank, Rank, int>;

}  // namespace

class Engine {
 public:
  Engine(const ClusterLayout& layout, const CostModel& cost)
      : layout_(layout), map_(layout.map), cost_(cost) {
    const int p = map_.size();
    contexts_.reserve(static_cast<std::size_t>(p));
    for (Rank r = 0; r < p; ++r) contexts_.push_back(RankContext(this, r));
    node_clocks_.resize(static_cast<std::size_t>(map_.node_count()));
    for (NodeId n = 0; n < map_.node_count(); ++n) {
      const auto k = static_cast<std::size_t>(map_.ranks_on_node(n));
      auto& clocks = node_clocks_[static_cast<std::size_t>(n)];
      clocks.assign(k, std::vector<std::uint64_t>(k, 0));
      for (std::size_t i = 0; i < k; ++i) clocks[i][i] = 1;
    }
    tasks_.resize(static_cast<std::size_t>(p));
  }

  ~Engine() {
    // Unfinished fibers unwind their stacks here, before the state they
    // reference goes away.
    for (auto& t : tasks_) t.fiber = {};
  }

  RunResult run(const Simulator::Program& program) {
    const int p = map_.size();
    for (Rank r = 0; r < p; ++r) {
      auto& t = task(r);
      t.fiber = bctx::fiber(std::allocator_arg, bctx::fixedsize_stack(kStackBytes),
                            [this, r, &program](bctx::fiber&& sink) {
                              auto& self = task(r);
                              self.sink = std::move(sink);
                              try {
                                program(contexts_[static_cast<std::size_t>(r)]);
                              } catch (const bctx::detail::forced_unwind&) {
                                throw;
                              } catch (...) {
                                self.error = std::current_exception();
                              }
                              self.state = TaskState::Done;
                              return std::move(self.sink);
                            });
      ready_.insert({0.0, r});
    }

    while (!ready_.empty()) {
      const Rank r = ready_.begin()->second;
      ready_.erase(ready_.begin());
      auto& t = task(r);
      t.state = TaskState::Running;
      t.fiber = std::move(t.fiber).resume();
      if (t.error) std::rethrow_exception(t.error);
    }

    std::ostringstream blocked;
    for (Rank r = 0; r < p; ++r) {
      const auto& t = task(r);
      if (t.state != TaskState::Done) {
        blocked << (blocked.tellp() > 0 ? "; " : "") << "rank " << r << " waits in "
                << t.waiting_in;
      }
    }
    if (blocked.tellp() > 0) throw DeadlockError("deadlock: " + blocked.str());

    return finish();
  }

  // --- rank-side API -------------------------------------------------------

  Task& task(Rank r) { return tasks_[static_cast<std::size_t>(r)]; }
  const Task& task(Rank r) const { return tasks_[static_cast<std::size_t>(r)]; }
  const ClusterLayout& layout() const { return layout_; }
  const CostModel& cost() const { return cost_; }

  void check_peer(Rank me, Rank peer, const char* what) const {
    if (peer < 0 || peer >= map_.size()) {
      throw UsageError(std::string(what) + ": rank " + std::to_string(peer) + " out of range");
    }
    if (peer == me) throw UsageError(std::string(what) + ": source equals destination");
  }

  Request isend(Rank me, Rank dst, std::span<const std::byte> bytes, MatchKey key) {
    check_peer(me, dst, "send");
    auto req = std::make_shared<RequestState>();
    req->owner = me;
    req->what = "send to " + std::to_string(dst) + describe_key(key);
    auto& box = mail_[MailKey{key.context, me, dst, key.tag}];
    PendingSend s{task(me).clock, req, {bytes.begin(), bytes.end()}, current_trace(me)};
    if (!box.recvs.empty()) {
      PendingRecv rv = std::move(box.recvs.front());
      box.recvs.pop_front();
      deliver(me, dst, key, s, rv);
    } else {
      box.sends.push_back(std::move(s));
    }
    return Request(req);
  }

  Request irecv(Rank me, Rank src, MatchKey key) {
    check_peer(me, src, "recv");
    auto req = std::make_shared<RequestState>();
    req->owner = me;
    req->what = "recv from " + std::to_string(src) + describe_key(key);
    auto& box = mail_[MailKey{key.context, src, me, key.tag}];
    PendingRecv rv{task(me).clock, req, current_trace(me)};
    if (!box.sends.empty()) {
      PendingSend s = std::move(box.sends.front());
      box.sends.pop_front();
      deliver(src, me, key, s, rv);
    } else {
      box.recvs.push_back(std::move(rv));
    }
    return Request(req);
  }

  void wait(Rank me, RequestState& req) {
    while (!req.done) block(me, req.what);
    auto& t = task(me);
    t.clock = std::max(t.clock, req.completion);
  }

  void local_copy(Rank me, std::size_t n) {
    if (n == 0) return;
    auto& t = task(me);
    t.clock += cost_.intra_node(n);
    Counters c;
    c.intra_copy_bytes = n;
    charge(current_trace(me), c);
    record(Event{t.clock, me, EventKind::Copy, n, -1, -1, current_trace(me)});
  }

  void barrier(Rank me, const Communicator& comm) {
    if (!comm.contains(me)) throw UsageError("barrier by non-member " + std::to_string(me));
    const int seq = next_sequence(me, comm.context_id());
    auto& t = task(me);
    record(Event{t.clock, me, EventKind::BarrierEnter, 0, -1, comm.context_id(), current_trace(me)});
    const RendezvousKey key{RendezvousKind::Barrier, comm.context_id(), seq, 0};
    auto& rv = arrive(me, key, comm.size());
    if (rv.arrived == rv.expected) {
      rv.completion = rv.latest + cost_.barrier(comm.size());
      Counters c;
      c.barrier_count = 1;
      charge(current_trace(me), c);
      join_clocks(rv.ranks);
      if (comm.kind() == CommKind::SharedMem) {
        for (auto& w : windows_) {
          if (w->comm().context_id() == comm.context_id()) w->advance_epoch();
        }
      }
      release(rv);
    }
    depart(me, key, "barrier on context " + std::to_string(comm.context_id()));
    record(Event{t.clock, me, EventKind::BarrierExit, 0, -1, comm.context_id(), current_trace(me)});
  }

  void pairwise_sync(Rank me, Rank peer) {
    check_peer(me, peer, "pairwise_sync");
    if (map_.node_of(me) != map_.node_of(peer)) {
      throw UsageError("pairwise_sync needs both ranks on one node");
    }
    const int seq = task(me).pair_sequence[peer]++;
    const Rank lo = std::min(me, peer);
    const Rank hi = std::max(me, peer);
    const RendezvousKey key{RendezvousKind::PairSync, lo, hi, seq};
    auto& rv = arrive(me, key, 2);
    if (rv.arrived == rv.expected) {
      rv.completion = rv.latest + cost_.intra_node(0);
      join_clocks(rv.ranks);
      release(rv);
    }
    depart(me, key, "pairwise_sync with " + std::to_string(peer));
    const double now = task(me).clock;
    record(Event{now, me, me == lo ? EventKind::Send : EventKind::Recv, 0, peer, -1,
                 current_trace(me)});
  }

  std::shared_ptr<SharedWindow> allocate_shared(Rank me, const Communicator& comm,
                                                std::size_t my_size) {
    const auto my_index = comm.rank_of(me);
    if (!my_index) throw UsageError("allocate_shared by non-member " + std::to_string(me));
    const NodeId node = map_.node_of(comm.at(0));
    for (Rank r : comm.members()) {
      if (map_.node_of(r) != node) throw UsageError("shared window communicator spans nodes");
    }
    const int seq = next_sequence(me, comm.context_id());
    const RendezvousKey key{RendezvousKind::Allocate, comm.context_id(), seq, 0};
    auto& rv = arrive(me, key, comm.size());
    if (rv.sizes.empty()) rv.sizes.assign(static_cast<std::size_t>(comm.size()), 0);
    rv.sizes[static_cast<std::size_t>(*my_index)] = my_size;
    if (rv.arrived == rv.expected) {
      rv.completion = rv.latest;
      rv.window = std::make_shared<SharedWindow>(comm, node, rv.sizes);
      windows_.push_back(rv.window);
      alloc_[node] += rv.window->size();
      release(rv);
    }
    return depart(me, key, "allocate_shared on context " + std::to_string(comm.context_id()));
  }

  void align(Rank me) {
    const RendezvousKey key{RendezvousKind::Align, 0, align_seq(me), 0};
    auto& rv = arrive(me, key, map_.size());
    if (rv.arrived == rv.expected) {
      rv.completion = rv.latest;
      release(rv);
    }
    depart(me, key, "align");
  }

  void track_alloc(Rank me, std::size_t bytes) { alloc_[map_.node_of(me)] += bytes; }

  int next_sequence(Rank me, int context) { return task(me).sequence[context]++; }

  void enter_scope(Rank me, std::string_view name) {
    auto& t = task(me);
    if (!t.scopes.empty()) {
      t.scopes.push_back(t.scopes.back());
      return;
    }
    auto it = t.scope_calls.find(name);
    if (it == t.scope_calls.end()) it = t.scope_calls.emplace(std::string(name), 0).first;
    CollectiveKey key{std::string(name), it->second++};
    auto found = trace_ids_.find(key);
    int id;
    if (found == trace_ids_.end()) {
      id = static_cast<int>(trace_keys_.size());
      trace_ids_.emplace(key, id);
      trace_keys_.push_back(key);
      stats_[key];
    } else {
      id = found->second;
    }
    t.scopes.push_back(ScopeFrame{id, t.clock});
  }

  void exit_scope(Rank me) {
    auto& t = task(me);
    if (t.scopes.empty()) return;
    const ScopeFrame f = t.scopes.back();
    t.scopes.pop_back();
    if (!t.scopes.empty()) return;
    auto& s = stats_[trace_keys_[static_cast<std::size_t>(f.trace)]];
    s.modeled_time = std::max(s.modeled_time, t.clock - f.entered);
  }

  AccessStamp access_stamp(Rank me) const {
    const NodeId n = map_.node_of(me);
    const int local = map_.local_rank_of(me);
    return AccessStamp{me, local,
                       node_clocks_[static_cast<std::size_t>(n)][static_cast<std::size_t>(local)]};
  }

  void note_window_access(Rank me, std::size_t bytes) {
    record(Event{task(me).clock, me, EventKind::WindowAccess, bytes, -1, -1, current_trace(me)});
  }

 private:
  static std::string describe_key(MatchKey key) {
    return " (context " + std::to_string(key.context) + ", tag " + std::to_string(key.tag) + ")";
  }

  int current_trace(Rank me) const {
    const auto& t = task(me);
    return t.scopes.empty() ? -1 : t.scopes.front().trace;
  }

  int align_seq(Rank me) { return task(me).sequence[-1]++; }

  void charge(int trace, const Counters& c) {
    totals_ += c;
    if (trace < 0) {
      stats_[kUnscoped].counters += c;
    } else {
      stats_[trace_keys_[static_cast<std::size_t>(trace)]].counters += c;
    }
  }

  void record(Event e) { events_.push_back(e); }

  void deliver(Rank src, Rank dst, MatchKey key, PendingSend& s, PendingRecv& rv) {
    const std::size_t n = s.payload.size();
    const bool cross = map_.node_of(src) != map_.node_of(dst);
    const double done = std::max(s.posted, rv.posted) + (cross ? cost_.inter_node(n) : cost_.intra_node(n));
    Counters c;
    if (cross) {
      c.inter_msgs = 1;
      c.inter_bytes = n;
    } else {
      c.intra_copy_bytes = n;
    }
    charge(s.trace, c);
    record(Event{done, src, EventKind::Send, n, dst, key.context, s.trace});
    record(Event{done, dst, EventKind::Recv, n, src, key.context, rv.trace});
    s.req->done = true;
    s.req->completion = done;
    rv.req->done = true;
    rv.req->completion = done;
    rv.req->data = std::move(s.payload);
    wake(src);
    wake(dst);
  }

  Rendezvous& arrive(Rank me, const RendezvousKey& key, int expected) {
    auto& rv = rendezvous_[key];
    if (rv.expected == 0) rv.expected = expected;
    if (rv.expected != expected) throw UsageError("collective participants disagree on size");
    rv.latest = std::max(rv.latest, task(me).clock);
    rv.ranks.push_back(me);
    ++rv.arrived;
    return rv;
  }

  void release(Rendezvous& rv) {
    rv.done = true;
    for (Rank r : rv.ranks) wake(r);
  }

  // Blocks until the rendezvous completes; returns its window, if any.
  std::shared_ptr<SharedWindow> depart(Rank me, const RendezvousKey& key,
                                       const std::string& what) {
    while (!rendezvous_.at(key).done) block(me, what);
    auto it = rendezvous_.find(key);
    task(me).clock = std::max(task(me).clock, it->second.completion);
    auto window = it->second.window;
    if (++it->second.departed == it->second.expected) rendezvous_.erase(it);
    return window;
  }

  // Joins the happens-before clocks of the participants, node by node, then
  // ticks each participant's own entry.
  void join_clocks(const std::vector<Rank>& ranks) {
    std::map<NodeId, std::vector<int>> by_node;
    for (Rank r : ranks) by_node[map_.node_of(r)].push_back(map_.local_rank_of(r));
    for (auto& [node, locals] : by_node) {
      auto& clocks = node_clocks_[static_cast<std::size_t>(node)];
      std::vector<std::uint64_t> joined(clocks.front().size(), 0);
      for (int l : locals) {
        const auto& c = clocks[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < joined.size(); ++i) joined[i] = std::max(joined[i], c[i]);
      }
      for (int l : locals) {
        auto& c = clocks[static_cast<std::size_t>(l)];
        c = joined;
        ++c[static_cast<std::size_t>(l)];
      }
    }
  }

  void block(Rank me, const std::string& what) {
    auto& t = task(me);
    t.state = TaskState::Blocked;
    t.waiting_in = what;
    t.sink = std::move(t.sink).resume();
  }

  void wake(Rank r) {
    auto& t = task(r);
    if (t.state == TaskState::Blocked) {
      t.state = TaskState::Ready;
      ready_.insert({t.clock, r});
    }
  }

  RunResult finish() {
    RunResult out;
    out.metrics.totals = totals_;
    for (const auto& t : tasks_) out.metrics.modeled_time = std::max(out.metrics.modeled_time, t.clock);
    out.metrics.per_node_alloc_bytes = alloc_;
    out.metrics.per_collective = stats_;

    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    out.traces.reserve(trace_keys_.size());
    for (const auto& k : trace_keys_) out.traces.push_back(CollectiveTrace{k, {}});
    for (const auto& e : events_) {
      if (e.trace >= 0) out.traces[static_cast<std::size_t>(e.trace)].events.push_back(e);
    }
    out.events = std::move(events_);
    out.windows = std::move(windows_);
    return out;
  }

  const ClusterLayout& layout_;
  const RankMap& map_;
  CostModel cost_;
  std::vector<RankContext> contexts_;
  std::set<std::pair<double, Rank>> ready_;
  std::map<MailKey, Mailbox> mail_;
  std::map<RendezvousKey, Rendezvous> rendezvous_;
  std::vector<std::vector<std::vector<std::uint64_t>>> node_clocks_;
  std::vector<std::shared_ptr<SharedWindow>> windows_;
  std::map<NodeId, std::uint64_t> alloc_;
  Counters totals_;
  std::map<CollectiveKey, CollectiveStats> stats_;
  std::map<CollectiveKey, int> trace_ids_;
  std::vector<CollectiveKey> trace_keys_;
  std::vector<Event> events_;
  std::vector<Task> tasks_;  // last: destroyed first
};

}  // namespace detail

bool Request::done() const { return state_ && state_->done; }

const std::vector<std::byte>& Request::data() const {
  if (!state_ || !state_->done) throw UsageError("request not complete");
  return state_->data;
}

int RankContext::size() const { return engine_->layout().map.size(); }
NodeId RankContext::node() const { return engine_->layout().map.node_of(rank_); }
const ClusterLayout& RankContext::layout() const { return engine_->layout(); }
const RankMap& RankContext::map() const { return engine_->layout().map; }
const CostModel& RankContext::cost() const { return engine_->cost(); }
double RankContext::now() const { return engine_->task(rank_).clock; }

Request RankContext::isend(Rank dst, std::span<const std::byte> bytes, MatchKey key) {
  return engine_->isend(rank_, dst, bytes, key);
}

Request RankContext::irecv(Rank src, MatchKey key) { return engine_->irecv(rank_, src, key); }

void RankContext::wait(Request& req) {
  if (!req.valid()) throw UsageError("wait on an empty request");
  engine_->wait(rank_, *req.state_);
}

void RankContext::wait_all(std::span<Request> reqs) {
  for (auto& r : reqs) wait(r);
}

void RankContext::send(Rank dst, std::span<const std::byte> bytes, MatchKey key) {
  auto r = isend(dst, bytes, key);
  wait(r);
}

std::vector<std::byte> RankContext::recv(Rank src, MatchKey key) {
  auto r = irecv(src, key);
  wait(r);
  return std::move(r.state_->data);
}

std::vector<std::byte> RankContext::sendrecv(Rank dst, std::span<const std::byte> bytes,
                                             Rank src, MatchKey key) {
  auto s = isend(dst, bytes, key);
  auto r = irecv(src, key);
  wait(s);
  wait(r);
  return std::move(r.state_->data);
}

void RankContext::local_copy(std::size_t n) { engine_->local_copy(rank_, n); }
void RankContext::barrier(const Communicator& comm) { engine_->barrier(rank_, comm); }
void RankContext::pairwise_sync(Rank peer) { engine_->pairwise_sync(rank_, peer); }

std::shared_ptr<SharedWindow> RankContext::allocate_shared(const Communicator& comm,
                                                           std::size_t my_size) {
  return engine_->allocate_shared(rank_, comm, my_size);
}

void RankContext::track_alloc(std::size_t bytes) { engine_->track_alloc(rank_, bytes); }

int RankContext::next_sequence(const Communicator& comm) {
  return engine_->next_sequence(rank_, comm.context_id());
}

RankContext::Scope::~Scope() {
  if (ctx_) ctx_->engine_->exit_scope(ctx_->rank_);
}

RankContext::Scope RankContext::collective_scope(std::string_view name) {
  engine_->enter_scope(rank_, name);
  return Scope(this);
}

void RankContext::align() { engine_->align(rank_); }

AccessStamp RankContext::access_stamp() const { return engine_->access_stamp(rank_); }

void RankContext::note_window_access(std::size_t bytes) {
  engine_->note_window_access(rank_, bytes);
}

Simulator::Simulator(const ClusterLayout& layout, CostModel cost)
    : layout_(&layout), cost_(cost) {
  cost_.validate();
}

RunResult Simulator::run(const Program& program) const {
  detail::Engine engine(*layout_, cost_);
  return engine.run(program);
}

RunResult spawn_ranks(const ClusterSpec& spec, const Simulator::Program& program,
                      CostModel cost) {
  ClusterLayout layout(spec);
  return Simulator(layout, cost).run(program);
}

}  // namespace hympi
