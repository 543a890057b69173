#include "hympi/coll_baseline.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "hympi/errors.hpp"

namespace hympi::coll {

namespace {

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

int my_comm_rank(const RankContext& ctx, const Communicator& comm) {
  auto me = comm.rank_of(ctx.rank());
  if (!me) throw UsageError("rank " + std::to_string(ctx.rank()) + " is not in the communicator");
  return *me;
}

void expect_size(const std::vector<std::byte>& got, std::size_t want, const char* what) {
  if (got.size() != want) {
    throw UsageError(std::string(what) + ": received " + std::to_string(got.size()) +
                     " bytes, expected " + std::to_string(want) + " (count mismatch)");
  }
}

// Blocks held by the aligned group of `span` virtual ranks starting at
// `first`, in the order they are packed on the wire.
std::vector<int> group_blocks(int first, int span, int pof2, int rem) {
  std::vector<int> out;
  for (int v = first; v < first + span; ++v) {
    out.push_back(v);
    if (v < rem) out.push_back(v + pof2);
  }
  return out;
}

}  // namespace

std::string_view to_string(BaselineAlgo a) {
  switch (a) {
    case BaselineAlgo::Ring: return "ring";
    case BaselineAlgo::RecursiveDoubling: return "recdbl";
    case BaselineAlgo::SmpAware: return "smp";
  }
  return "?";
}

BaselineAlgo parse_baseline_algo(std::string_view name) {
  if (name == "ring") return BaselineAlgo::Ring;
  if (name == "recdbl") return BaselineAlgo::RecursiveDoubling;
  if (name == "smp") return BaselineAlgo::SmpAware;
  throw ConfigError("unknown baseline algorithm '" + std::string(name) + "'");
}

void allgather_ring(RankContext& ctx, const Communicator& comm, const BufferRef& recv,
                    std::size_t block_bytes) {
  auto scope = ctx.collective_scope("allgather_ring");
  const int p = comm.size();
  const int me = my_comm_rank(ctx, comm);
  if (recv.size() < idx(p) * block_bytes) throw UsageError("allgather receive region too small");
  const MatchKey key{comm.context_id(), ctx.next_sequence(comm)};
  const Rank right = comm.at((me + 1) % p);
  const Rank left = comm.at((me - 1 + p) % p);
  for (int step = 0; step + 1 < p; ++step) {
    const int send_block = (me - step + p) % p;
    const int recv_block = (me - step - 1 + 2 * p) % p;
    auto out = recv.read(ctx, idx(send_block) * block_bytes, block_bytes);
    auto in = ctx.sendrecv(right, out, left, key);
    expect_size(in, block_bytes, "allgather_ring");
    recv.write(ctx, idx(recv_block) * block_bytes, in);
  }
}

void allgather_recdbl(RankContext& ctx, const Communicator& comm, const BufferRef& recv,
                      std::size_t block_bytes) {
  auto scope = ctx.collective_scope("allgather_recdbl");
  const int p = comm.size();
  const int me = my_comm_rank(ctx, comm);
  if (recv.size() < idx(p) * block_bytes) throw UsageError("allgather receive region too small");
  const MatchKey key{comm.context_id(), ctx.next_sequence(comm)};
  const int pof2 = static_cast<int>(std::bit_floor(static_cast<unsigned>(p)));
  const int rem = p - pof2;

  auto pack = [&](const std::vector<int>& blocks) {
    std::vector<std::byte> out;
    out.reserve(blocks.size() * block_bytes);
    for (int b : blocks) {
      auto part = recv.read(ctx, idx(b) * block_bytes, block_bytes);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  };
  auto unpack = [&](const std::vector<int>& blocks, const std::vector<std::byte>& in) {
    expect_size(in, blocks.size() * block_bytes, "allgather_recdbl");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      recv.write(ctx, idx(blocks[i]) * block_bytes,
                 std::span(in).subspan(i * block_bytes, block_bytes));
    }
  };

  if (me >= pof2) {
    // Fold into the partner below the power of two, then take the result back.
    const Rank partner = comm.at(me - pof2);
    ctx.send(partner, recv.read(ctx, idx(me) * block_bytes, block_bytes), key);
    auto all = ctx.recv(partner, key);
    expect_size(all, idx(p) * block_bytes, "allgather_recdbl");
    recv.write(ctx, 0, all);
    return;
  }
  if (me < rem) {
    unpack({me + pof2}, ctx.recv(comm.at(me + pof2), key));
  }
  for (int mask = 1; mask < pof2; mask <<= 1) {
    const int partner = me ^ mask;
    const auto mine = group_blocks(me & ~(mask - 1), mask, pof2, rem);
    const auto theirs = group_blocks(partner & ~(mask - 1), mask, pof2, rem);
    unpack(theirs, ctx.sendrecv(comm.at(partner), pack(mine), comm.at(partner), key));
  }
  if (me < rem) {
    ctx.send(comm.at(me + pof2), recv.read(ctx, 0, idx(p) * block_bytes), key);
  }
}

void validate_placement(std::span<const std::size_t> counts, std::span<const std::size_t> displs,
                        std::size_t capacity_elems) {
  if (counts.size() != displs.size()) throw UsageError("counts and displs differ in length");
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (displs[i] > capacity_elems || counts[i] > capacity_elems - displs[i]) {
      throw UsageError("allgatherv block " + std::to_string(i) + " exceeds the receive region");
    }
    if (counts[i] > 0) spans.emplace_back(displs[i], displs[i] + counts[i]);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) throw UsageError("allgatherv displacements overlap");
  }
}

void allgatherv(RankContext& ctx, const Communicator& comm, const BufferRef& recv,
                std::span<const std::size_t> counts, std::span<const std::size_t> displs,
                std::size_t elem_bytes) {
  auto scope = ctx.collective_scope("allgatherv");
  const int p = comm.size();
  const int me = my_comm_rank(ctx, comm);
  if (static_cast<int>(counts.size()) != p) throw UsageError("allgatherv needs one count per member");
  validate_placement(counts, displs, elem_bytes == 0 ? 0 : recv.size() / elem_bytes);
  const MatchKey key{comm.context_id(), ctx.next_sequence(comm)};
  const Rank right = comm.at((me + 1) % p);
  const Rank left = comm.at((me - 1 + p) % p);
  for (int step = 0; step + 1 < p; ++step) {
    const auto sb = idx((me - step + p) % p);
    const auto rb = idx((me - step - 1 + 2 * p) % p);
    auto out = recv.read(ctx, displs[sb] * elem_bytes, counts[sb] * elem_bytes);
    auto in = ctx.sendrecv(right, out, left, key);
    expect_size(in, counts[rb] * elem_bytes, "allgatherv");
    recv.write(ctx, displs[rb] * elem_bytes, in);
  }
}

void bcast_binomial(RankContext& ctx, const Communicator& comm, Rank root,
                    const BufferRef& buffer) {
  auto scope = ctx.collective_scope("bcast_binomial");
  const auto root_index = comm.rank_of(root);
  if (!root_index) throw UsageError("broadcast root " + std::to_string(root) + " not in communicator");
  const int p = comm.size();
  const int me = my_comm_rank(ctx, comm);
  const MatchKey key{comm.context_id(), ctx.next_sequence(comm)};
  const int vr = (me - *root_index + p) % p;

  std::vector<std::byte> data;
  int mask = 1;
  if (vr == 0) {
    data = buffer.read(ctx, 0, buffer.size());
    while (mask < p) mask <<= 1;
  } else {
    while (mask < p) {
      if (vr & mask) {
        data = ctx.recv(comm.at((vr - mask + *root_index) % p), key);
        expect_size(data, buffer.size(), "bcast_binomial");
        buffer.write(ctx, 0, data);
        break;
      }
      mask <<= 1;
    }
  }
  for (mask >>= 1; mask > 0; mask >>= 1) {
    if (vr + mask < p) ctx.send(comm.at((vr + mask + *root_index) % p), data, key);
  }
}

void smp_allgather(RankContext& ctx, const ClusterLayout& layout, std::span<std::byte> recv,
                   std::size_t block_bytes) {
  auto scope = ctx.collective_scope("smp_allgather");
  const RankMap& map = layout.map;
  const int p = map.size();
  const std::size_t total = idx(p) * block_bytes;
  if (recv.size() < total) throw UsageError("allgather receive region too small");
  const Rank me = ctx.rank();
  const NodeId node = map.node_of(me);
  const Communicator& shared = layout.shared_of(me);
  const Rank leader = map.leader_of(node);
  const MatchKey key{shared.context_id(), ctx.next_sequence(shared)};

  // Leaders exchange contiguous node blocks, so the working layout is the
  // node-sorted order; it coincides with rank order under SMP placement.
  const bool reorder = !map.is_identity_order();
  std::vector<std::byte> staging;
  std::span<std::byte> work = recv.first(total);
  if (reorder) {
    staging.resize(total);
    work = staging;
    ctx.local_copy(block_bytes);
    std::copy_n(recv.begin() + static_cast<std::ptrdiff_t>(idx(me) * block_bytes), block_bytes,
                work.begin() + static_cast<std::ptrdiff_t>(idx(map.node_sorted_position(me)) * block_bytes));
  }
  const BufferRef work_ref(work);
  auto slot = [&](Rank r) { return idx(map.node_sorted_position(r)) * block_bytes; };

  // Phase 1: the leader copies in each child's block, one at a time.
  if (me == leader) {
    for (Rank child : map.node_members(node)) {
      if (child == leader) continue;
      auto in = ctx.recv(child, key);
      expect_size(in, block_bytes, "smp_allgather");
      work_ref.write(ctx, slot(child), in);
    }
  } else {
    ctx.send(leader, work_ref.read(ctx, slot(me), block_bytes), key);
  }

  // Phase 2: node blocks across the bridge.
  if (me == leader && map.node_count() > 1) {
    std::vector<std::size_t> counts, displs;
    for (NodeId n = 0; n < map.node_count(); ++n) {
      counts.push_back(idx(map.ranks_on_node(n)) * block_bytes);
      displs.push_back(idx(map.node_offset(n)) * block_bytes);
    }
    allgatherv(ctx, layout.bridge, work_ref, counts, displs, 1);
  }

  // Phase 3: full result back to every child.
  bcast_binomial(ctx, shared, leader, work_ref);

  if (reorder) {
    ctx.local_copy(total);
    for (Rank r = 0; r < p; ++r) {
      std::copy_n(work.begin() + static_cast<std::ptrdiff_t>(slot(r)), block_bytes,
                  recv.begin() + static_cast<std::ptrdiff_t>(idx(r) * block_bytes));
    }
  }
}

void allgather(RankContext& ctx, const ClusterLayout& layout, BaselineAlgo algo,
               std::span<std::byte> recv, std::size_t block_bytes) {
  switch (algo) {
    case BaselineAlgo::Ring: allgather_ring(ctx, layout.world, BufferRef(recv), block_bytes); return;
    case BaselineAlgo::RecursiveDoubling:
      allgather_recdbl(ctx, layout.world, BufferRef(recv), block_bytes);
      return;
    case BaselineAlgo::SmpAware: smp_allgather(ctx, layout, recv, block_bytes); return;
  }
}

}  // namespace hympi::coll
