#include "hympi/shm_window.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>

#include "hympi/errors.hpp"

namespace hympi {

std::string RaceReport::to_string() const {
  std::ostringstream os;
  os << "RACE epoch=" << epoch << " ranks=" << std::min(first, second) << ',' << std::max(first, second) << " range=[" << lo
     << ',' << hi << ") kinds=" << (both_writes ? "w/w" : "w/r");
  return os.str();
}

SharedWindow::SharedWindow(Communicator owner_comm, NodeId node, std::vector<std::size_t> sizes)
    : comm_(std::move(owner_comm)), node_(node), sizes_(std::move(sizes)) {
  if (static_cast<int>(sizes_.size()) != comm_.size()) {
    throw UsageError("one window size per communicator member required");
  }
  offsets_.reserve(sizes_.size());
  std::size_t total = 0;
  for (std::size_t s : sizes_) {
    offsets_.push_back(total);
    total += s;
  }
  buffer_.assign(total, std::byte{0});
}

std::size_t SharedWindow::offset_of(Rank member) const {
  auto i = comm_.rank_of(member);
  if (!i) throw UsageError("rank " + std::to_string(member) + " does not share this window");
  return offsets_[static_cast<std::size_t>(*i)];
}

std::size_t SharedWindow::size_of(Rank member) const {
  auto i = comm_.rank_of(member);
  if (!i) throw UsageError("rank " + std::to_string(member) + " does not share this window");
  return sizes_[static_cast<std::size_t>(*i)];
}

void SharedWindow::check_range(std::size_t offset, std::size_t len) const {
  if (offset > buffer_.size() || len > buffer_.size() - offset) {
    throw BoundsError("window access [" + std::to_string(offset) + "," +
                      std::to_string(offset + len) + ") beyond " + std::to_string(buffer_.size()) +
                      " bytes");
  }
}

void SharedWindow::record(const AccessStamp& who, std::size_t lo, std::size_t hi,
                          AccessKind kind) {
  if (!comm_.contains(who.rank)) {
    throw UsageError("rank " + std::to_string(who.rank) + " is not on the window's node");
  }
  if (lo == hi) return;
  log_.push_back(AccessRecord{who.rank, who.local_index, lo, hi, kind, epoch_, who.clock});
}

void SharedWindow::write(const AccessStamp& who, std::size_t offset,
                         std::span<const std::byte> bytes) {
  check_range(offset, bytes.size());
  record(who, offset, offset + bytes.size(), AccessKind::Write);
  if (!bytes.empty()) std::memcpy(buffer_.data() + offset, bytes.data(), bytes.size());
}

void SharedWindow::read(const AccessStamp& who, std::size_t offset, std::span<std::byte> out) {
  check_range(offset, out.size());
  record(who, offset, offset + out.size(), AccessKind::Read);
  if (!out.empty()) std::memcpy(out.data(), buffer_.data() + offset, out.size());
}

WindowView::WindowView(std::shared_ptr<SharedWindow> w, std::size_t base_offset,
                       std::size_t extent)
    : window_(std::move(w)), base_(base_offset), extent_(extent) {
  if (!window_) throw UsageError("view of a null window");
  if (base_ > window_->size() || extent_ > window_->size() - base_) {
    throw BoundsError("view exceeds window");
  }
}

WindowView WindowView::subview(std::size_t offset, std::size_t extent) const {
  check(offset, extent);
  return WindowView(window_, base_ + offset, extent);
}

void WindowView::check(std::size_t offset, std::size_t len) const {
  if (offset > extent_ || len > extent_ - offset) {
    throw BoundsError("view access [" + std::to_string(offset) + "," +
                      std::to_string(offset + len) + ") beyond extent " + std::to_string(extent_));
  }
}

void WindowView::write(RankContext& ctx, std::size_t offset,
                       std::span<const std::byte> bytes) const {
  check(offset, bytes.size());
  window_->write(ctx.access_stamp(), base_ + offset, bytes);
  ctx.note_window_access(bytes.size());
}

void WindowView::read_into(RankContext& ctx, std::size_t offset, std::span<std::byte> out) const {
  check(offset, out.size());
  window_->read(ctx.access_stamp(), base_ + offset, out);
  ctx.note_window_access(out.size());
}

std::vector<std::byte> WindowView::read(RankContext& ctx, std::size_t offset,
                                        std::size_t length) const {
  std::vector<std::byte> out(length);
  read_into(ctx, offset, out);
  return out;
}

std::shared_ptr<SharedWindow> allocate_shared(RankContext& ctx, const Communicator& comm,
                                              std::size_t my_size) {
  return ctx.allocate_shared(comm, my_size);
}

WindowView shared_query(RankContext& ctx, const std::shared_ptr<SharedWindow>& window,
                        Rank target) {
  if (!window->comm().contains(ctx.rank())) {
    throw UsageError("rank " + std::to_string(ctx.rank()) + " queried a window on node " +
                     std::to_string(window->node()));
  }
  return WindowView(window, window->offset_of(target), window->size_of(target));
}

namespace {

bool happens_before(const AccessRecord& a, const AccessRecord& b) {
  const auto i = static_cast<std::size_t>(a.local_index);
  return a.clock[i] <= b.clock[i];
}

}  // namespace

std::vector<RaceReport> check_races(const SharedWindow& window) {
  // Accesses in different epochs are separated by a barrier over every
  // member, so only same-epoch pairs need the vector-clock test.
  std::map<std::uint64_t, std::vector<std::size_t>> by_epoch;
  const auto& log = window.access_log();
  for (std::size_t i = 0; i < log.size(); ++i) by_epoch[log[i].epoch].push_back(i);

  std::vector<RaceReport> out;
  for (const auto& [epoch, idx] : by_epoch) {
    for (std::size_t x = 0; x < idx.size(); ++x) {
      const auto& a = log[idx[x]];
      for (std::size_t y = x + 1; y < idx.size(); ++y) {
        const auto& b = log[idx[y]];
        if (a.rank == b.rank) continue;
        if (a.kind == AccessKind::Read && b.kind == AccessKind::Read) continue;
        const std::size_t lo = std::max(a.lo, b.lo);
        const std::size_t hi = std::min(a.hi, b.hi);
        if (lo >= hi) continue;
        if (happens_before(a, b) || happens_before(b, a)) continue;
        out.push_back(RaceReport{epoch, a.rank, b.rank, lo, hi,
                                 a.kind == AccessKind::Write && b.kind == AccessKind::Write});
      }
    }
  }
  return out;
}

void BufferRef::read_into(RankContext& ctx, std::size_t offset, std::span<std::byte> out) const {
  if (shared_) {
    view_.read_into(ctx, offset, out);
    return;
  }
  if (offset > private_.size() || out.size() > private_.size() - offset) {
    throw BoundsError("private buffer read out of range");
  }
  if (!out.empty()) std::memcpy(out.data(), private_.data() + offset, out.size());
}

std::vector<std::byte> BufferRef::read(RankContext& ctx, std::size_t offset,
                                       std::size_t length) const {
  std::vector<std::byte> out(length);
  read_into(ctx, offset, out);
  return out;
}

void BufferRef::write(RankContext& ctx, std::size_t offset,
                      std::span<const std::byte> bytes) const {
  if (shared_) {
    view_.write(ctx, offset, bytes);
    return;
  }
  if (offset > private_.size() || bytes.size() > private_.size() - offset) {
    throw BoundsError("private buffer write out of range");
  }
  if (!bytes.empty()) std::memcpy(private_.data() + offset, bytes.data(), bytes.size());
}

}  // namespace hympi
