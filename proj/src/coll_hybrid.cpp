#include "hympi/coll_hybrid.hpp"

#include <algorithm>

#include "hympi/coll_baseline.hpp"
#include "hympi/errors.hpp"

namespace hympi::hybrid {

HybridAllgatherContext hybrid_allgather_setup(RankContext& ctx, const ClusterLayout& layout,
                                              std::size_t msg_elems, std::size_t elem_bytes) {
  auto scope = ctx.collective_scope("hybrid_allgather_setup");
  const RankMap& map = layout.map;
  const Rank me = ctx.rank();
  const Rank leader = map.leader_of(map.node_of(me));
  const auto p = static_cast<std::size_t>(map.size());

  HybridAllgatherContext h;
  h.shared_comm = layout.shared_of(me);
  h.bridge_comm = bridge_membership(layout.bridge, me);
  h.node_count = map.node_count();
  h.msg_elems = msg_elems;
  h.elem_bytes = elem_bytes;

  h.window = allocate_shared(ctx, h.shared_comm, me == leader ? msg_elems * p * elem_bytes : 0);
  h.node_view = shared_query(ctx, h.window, leader);

  std::size_t displ = 0;
  for (NodeId n = 0; n < map.node_count(); ++n) {
    const std::size_t count = msg_elems * static_cast<std::size_t>(map.ranks_on_node(n));
    h.node_counts.push_back(count);
    h.node_displs.push_back(displ);
    displ += count;
  }
  h.slot_of_rank.resize(p);
  for (Rank r = 0; r < map.size(); ++r) {
    h.slot_of_rank[static_cast<std::size_t>(r)] = map.node_sorted_position(r);
  }
  h.my_view = h.node_view.subview(h.block_offset(me), h.block_bytes());
  return h;
}

void hybrid_allgather(RankContext& ctx, const HybridAllgatherContext& h,
                      const HybridAllgatherOptions& opts) {
  auto scope = ctx.collective_scope("hybrid_allgather");
  if (h.node_count <= 1) {
    ctx.barrier(h.shared_comm);
    return;
  }
  if (opts.pre_exchange_barrier) ctx.barrier(h.shared_comm);
  if (h.bridge_comm) {
    const Communicator& bridge = *h.bridge_comm;
    switch (opts.strategy) {
      case InterNodeStrategy::Allgatherv:
        coll::allgatherv(ctx, bridge, BufferRef(h.node_view), h.node_counts, h.node_displs,
                         h.elem_bytes);
        break;
      case InterNodeStrategy::LeaderBcasts:
        for (int i = 0; i < bridge.size(); ++i) {
          const auto n = static_cast<std::size_t>(i);
          auto block = h.node_view.subview(h.node_displs[n] * h.elem_bytes,
                                           h.node_counts[n] * h.elem_bytes);
          coll::bcast_binomial(ctx, bridge, bridge.at(i), BufferRef(block));
        }
        break;
    }
  }
  if (opts.post_exchange_barrier) ctx.barrier(h.shared_comm);
}

HybridBcastContext make_bcast_context(RankContext& ctx, const RankMap& map,
                                      const Communicator& group, const Communicator& bridge,
                                      std::shared_ptr<SharedWindow> window) {
  HybridBcastContext b;
  b.shared_comm = group;
  b.bridge_comm = bridge_membership(bridge, ctx.rank());
  b.group_count = bridge.size();
  for (Rank r : bridge.members()) b.bridge_nodes.push_back(map.node_of(r));
  b.window = std::move(window);
  b.view = shared_query(ctx, b.window, group.at(0));
  return b;
}

HybridBcastContext hybrid_bcast_setup(RankContext& ctx, const ClusterLayout& layout,
                                      std::size_t count_bytes) {
  auto scope = ctx.collective_scope("hybrid_bcast_setup");
  const Communicator& shared = layout.shared_of(ctx.rank());
  const bool leader = shared.at(0) == ctx.rank();
  auto window = allocate_shared(ctx, shared, leader ? count_bytes : 0);
  return make_bcast_context(ctx, layout.map, shared, layout.bridge, std::move(window));
}

void hybrid_bcast(RankContext& ctx, const HybridBcastContext& b, Rank root,
                  const HybridBcastOptions& opts) {
  hybrid_bcast(ctx, b, root, b.view, opts);
}

void hybrid_bcast(RankContext& ctx, const HybridBcastContext& b, Rank root,
                  const WindowView& data, const HybridBcastOptions& opts) {
  auto scope = ctx.collective_scope("hybrid_bcast");
  const Rank me = ctx.rank();
  const Rank my_leader = b.shared_comm.at(0);
  const NodeId root_node = ctx.map().node_of(root);
  const auto root_group =
      std::find(b.bridge_nodes.begin(), b.bridge_nodes.end(), root_node);
  if (root_group == b.bridge_nodes.end()) {
    throw UsageError("broadcast root " + std::to_string(root) + " has no group leader");
  }
  const bool root_on_my_node = root_node == ctx.node();
  const bool multi = b.group_count > 1;
  const bool pairwise_release = opts.release == ReleaseMode::PairwiseSync;

  // A child root hands its writes over to the leader that reads them.
  if (root_on_my_node && root != my_leader && (multi || pairwise_release)) {
    if (me == root) ctx.pairwise_sync(my_leader);
    if (me == my_leader) ctx.pairwise_sync(root);
  }

  if (multi && b.bridge_comm) {
    const Communicator& bridge = *b.bridge_comm;
    const Rank root_leader = bridge.at(static_cast<int>(root_group - b.bridge_nodes.begin()));
    coll::bcast_binomial(ctx, bridge, root_leader, BufferRef(data));
  }

  if (!pairwise_release) {
    ctx.barrier(b.shared_comm);
  } else if (me == my_leader) {
    for (Rank child : b.shared_comm.members()) {
      if (child != my_leader) ctx.pairwise_sync(child);
    }
  } else {
    ctx.pairwise_sync(my_leader);
  }
}

void pairwise_sync(RankContext& ctx, Rank a, Rank b) {
  if (ctx.rank() == a) {
    ctx.pairwise_sync(b);
  } else if (ctx.rank() == b) {
    ctx.pairwise_sync(a);
  } else {
    throw UsageError("pairwise_sync called by a rank that is neither endpoint");
  }
}

}  // namespace hympi::hybrid
