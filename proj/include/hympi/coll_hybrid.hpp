#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "hympi/cluster.hpp"
#include "hympi/netsim.hpp"
#include "hympi/shm_window.hpp"

// Hybrid collectives: one shared copy of the data per node, inter-node
// traffic only between node leaders, node-local barriers delimiting the
// epochs in which ranks may touch the shared buffer.
namespace hympi::hybrid {

enum class InterNodeStrategy {
  Allgatherv,   // one irregular allgather among leaders
  LeaderBcasts  // every leader broadcasts its node block in turn
};

struct HybridAllgatherOptions {
  InterNodeStrategy strategy = InterNodeStrategy::Allgatherv;
  // Both barriers are required for race freedom; switching one off is only
  // useful to demonstrate what the race detector catches.
  bool pre_exchange_barrier = true;
  bool post_exchange_barrier = true;
};

// One-off state: communicators, the node window and this rank's slot.
// Blocks are laid out in node-sorted rank order (the identity under SMP
// placement); block_offset() translates a global rank to its slot.
struct HybridAllgatherContext {
  Communicator shared_comm;
  std::optional<Communicator> bridge_comm;  // leaders only
  int node_count = 1;
  std::shared_ptr<SharedWindow> window;
  WindowView node_view;  // whole window
  WindowView my_view;    // this rank's msg-element partition
  std::size_t msg_elems = 0;
  std::size_t elem_bytes = 8;
  std::vector<std::size_t> node_counts;  // elements per node
  std::vector<std::size_t> node_displs;  // element prefix sums
  std::vector<int> slot_of_rank;         // global rank -> block index

  std::size_t block_bytes() const { return msg_elems * elem_bytes; }
  std::size_t block_offset(Rank r) const {
    return static_cast<std::size_t>(slot_of_rank.at(static_cast<std::size_t>(r))) * block_bytes();
  }
};

// Collective over the world. Leaders request msg * P * elem_bytes, children 0.
HybridAllgatherContext hybrid_allgather_setup(RankContext& ctx, const ClusterLayout& layout,
                                              std::size_t msg_elems, std::size_t elem_bytes = 8);

// Precondition: each rank has written only its own partition since the last
// call completed. On return every node window holds all blocks.
void hybrid_allgather(RankContext& ctx, const HybridAllgatherContext& hctx,
                      const HybridAllgatherOptions& opts = {});

enum class ReleaseMode {
  Barrier,      // one barrier on the node communicator
  PairwiseSync  // leader releases each child with a pairwise sync
};

struct HybridBcastOptions {
  ReleaseMode release = ReleaseMode::Barrier;
};

struct HybridBcastContext {
  Communicator shared_comm;
  std::optional<Communicator> bridge_comm;  // group leaders only
  int group_count = 1;                      // members of the full bridge
  std::vector<NodeId> bridge_nodes;         // node of each bridge member
  std::shared_ptr<SharedWindow> window;
  WindowView view;  // whole window, offset 0 for every member
};

// Collective over the world. The node leader allocates count_bytes.
HybridBcastContext hybrid_bcast_setup(RankContext& ctx, const ClusterLayout& layout,
                                      std::size_t count_bytes);

// Builds a context over caller-supplied communicators and window. `group`
// must be the caller's node-local group and `bridge` the leaders of all
// groups of the same parent communicator.
HybridBcastContext make_bcast_context(RankContext& ctx, const RankMap& map,
                                      const Communicator& group, const Communicator& bridge,
                                      std::shared_ptr<SharedWindow> window);

// Broadcasts the data the root has stored in its node's region. `data` is
// the region on the caller's node (the same for all members of the node);
// by default it is the whole context window.
void hybrid_bcast(RankContext& ctx, const HybridBcastContext& bctx, Rank root,
                  const HybridBcastOptions& opts = {});
void hybrid_bcast(RankContext& ctx, const HybridBcastContext& bctx, Rank root,
                  const WindowView& data, const HybridBcastOptions& opts = {});

// Zero-byte same-node rendezvous giving a happens-before edge.
void pairwise_sync(RankContext& ctx, Rank a, Rank b);

}  // namespace hympi::hybrid
