#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hympi/cluster.hpp"
#include "hympi/netsim.hpp"

namespace hympi {

enum class AccessKind { Read, Write };

struct AccessRecord {
  Rank rank = 0;
  int local_index = 0;
  std::size_t lo = 0;  // [lo, hi) in window bytes
  std::size_t hi = 0;
  AccessKind kind = AccessKind::Read;
  std::uint64_t epoch = 0;
  std::vector<std::uint64_t> clock;
};

struct RaceReport {
  std::uint64_t epoch = 0;
  Rank first = 0;
  Rank second = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  bool both_writes = false;

  // RACE epoch=<e> ranks=<a>,<b> range=[lo,hi) kinds=<w/w|w/r>
  std::string to_string() const;
  bool operator==(const RaceReport&) const = default;
};

// One node-scoped buffer shared by the members of a SharedMem communicator.
// Member i's allocation starts at the prefix sum of the requested sizes.
class SharedWindow {
 public:
  SharedWindow(Communicator owner_comm, NodeId node, std::vector<std::size_t> sizes);

  NodeId node() const { return node_; }
  Rank owner() const { return comm_.at(0); }
  const Communicator& comm() const { return comm_; }
  std::size_t size() const { return buffer_.size(); }
  std::uint64_t epoch() const { return epoch_; }

  std::size_t offset_of(Rank member) const;
  std::size_t size_of(Rank member) const;

  void advance_epoch() { ++epoch_; }

  // Unlogged inspection, for oracles and reporting.
  std::span<const std::byte> contents() const { return buffer_; }
  const std::vector<AccessRecord>& access_log() const { return log_; }

  // Logged access; ranges are absolute window offsets.
  void write(const AccessStamp& who, std::size_t offset, std::span<const std::byte> bytes);
  void read(const AccessStamp& who, std::size_t offset, std::span<std::byte> out);

 private:
  void check_range(std::size_t offset, std::size_t len) const;
  void record(const AccessStamp& who, std::size_t lo, std::size_t hi, AccessKind kind);

  Communicator comm_;
  NodeId node_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> sizes_;
  std::vector<std::byte> buffer_;
  std::uint64_t epoch_ = 0;
  std::vector<AccessRecord> log_;
};

// A rank's window into part of a SharedWindow.
class WindowView {
 public:
  WindowView() = default;
  WindowView(std::shared_ptr<SharedWindow> w, std::size_t base_offset, std::size_t extent);

  const std::shared_ptr<SharedWindow>& window() const { return window_; }
  std::size_t base_offset() const { return base_; }
  std::size_t extent() const { return extent_; }
  bool empty() const { return extent_ == 0; }

  WindowView subview(std::size_t offset, std::size_t extent) const;

  void write(RankContext& ctx, std::size_t offset, std::span<const std::byte> bytes) const;
  void read_into(RankContext& ctx, std::size_t offset, std::span<std::byte> out) const;
  std::vector<std::byte> read(RankContext& ctx, std::size_t offset, std::size_t length) const;

 private:
  void check(std::size_t offset, std::size_t len) const;

  std::shared_ptr<SharedWindow> window_;
  std::size_t base_ = 0;
  std::size_t extent_ = 0;
};

// Collective over comm; see RankContext::allocate_shared.
std::shared_ptr<SharedWindow> allocate_shared(RankContext& ctx, const Communicator& comm,
                                              std::size_t my_size);

// View of target's allocation. The caller must be a member of the window's
// communicator.
WindowView shared_query(RankContext& ctx, const std::shared_ptr<SharedWindow>& window,
                        Rank target);

std::vector<RaceReport> check_races(const SharedWindow& window);

// Byte region a collective reads and writes: either rank-private memory or
// a shared window view. Only window traffic is logged for race detection.
class BufferRef {
 public:
  BufferRef(std::span<std::byte> private_bytes) : private_(private_bytes), shared_(false) {}
  BufferRef(WindowView view) : view_(std::move(view)), shared_(true) {}

  std::size_t size() const { return shared_ ? view_.extent() : private_.size(); }
  bool is_shared() const { return shared_; }

  void read_into(RankContext& ctx, std::size_t offset, std::span<std::byte> out) const;
  std::vector<std::byte> read(RankContext& ctx, std::size_t offset, std::size_t length) const;
  void write(RankContext& ctx, std::size_t offset, std::span<const std::byte> bytes) const;

 private:
  std::span<std::byte> private_;
  WindowView view_;
  bool shared_;
};

}  // namespace hympi
