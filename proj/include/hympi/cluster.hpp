#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace hympi {

using Rank = int;
using NodeId = int;

enum class PlacementKind { SmpStyle, ExplicitMap };

// Shape of the simulated cluster. ranks_per_node has one entry per node;
// for ExplicitMap placement, node_assignment[r] is the node hosting global
// rank r.
struct ClusterSpec {
  int node_count = 1;
  std::vector<int> ranks_per_node{1};
  PlacementKind placement = PlacementKind::SmpStyle;
  std::vector<NodeId> node_assignment;

  static ClusterSpec uniform(int nodes, int ppn);
  static ClusterSpec irregular(std::vector<int> ranks_per_node);
  static ClusterSpec explicit_map(std::vector<int> ranks_per_node,
                                  std::vector<NodeId> node_assignment);

  int total_ranks() const;

  // Throws ConfigError when the invariants do not hold.
  void validate() const;
};

class RankMap {
 public:
  RankMap() = default;

  int size() const { return static_cast<int>(node_of_.size()); }
  int node_count() const { return static_cast<int>(leaders_.size()); }

  NodeId node_of(Rank r) const { return node_of_.at(static_cast<std::size_t>(r)); }
  int local_rank_of(Rank r) const { return local_rank_of_.at(static_cast<std::size_t>(r)); }
  Rank leader_of(NodeId n) const { return leaders_.at(static_cast<std::size_t>(n)); }
  bool is_leader(Rank r) const { return local_rank_of(r) == 0; }
  int ranks_on_node(NodeId n) const {
    return static_cast<int>(node_members_.at(static_cast<std::size_t>(n)).size());
  }
  // Members of node n in ascending global-rank order.
  const std::vector<Rank>& node_members(NodeId n) const {
    return node_members_.at(static_cast<std::size_t>(n));
  }
  const std::vector<Rank>& leaders() const { return leaders_; }

  // Global ranks ordered by (node, local rank).
  const std::vector<Rank>& node_sorted_ranks() const { return node_sorted_; }
  // Inverse of node_sorted_ranks: position of rank r in that ordering.
  int node_sorted_position(Rank r) const {
    return node_sorted_pos_.at(static_cast<std::size_t>(r));
  }
  // Position in node-sorted order of the first rank of node n.
  int node_offset(NodeId n) const { return node_offset_.at(static_cast<std::size_t>(n)); }

  bool is_identity_order() const;

 private:
  friend RankMap build_rank_map(const ClusterSpec& spec);

  std::vector<NodeId> node_of_;
  std::vector<int> local_rank_of_;
  std::vector<Rank> leaders_;
  std::vector<std::vector<Rank>> node_members_;
  std::vector<Rank> node_sorted_;
  std::vector<int> node_sorted_pos_;
  std::vector<int> node_offset_;
};

RankMap build_rank_map(const ClusterSpec& spec);

enum class CommKind { World, SharedMem, Bridge, Group };

class Communicator {
 public:
  Communicator() = default;
  Communicator(std::vector<Rank> members, int context_id, CommKind kind,
               NodeId node = -1);

  int size() const { return static_cast<int>(members_.size()); }
  int context_id() const { return context_id_; }
  CommKind kind() const { return kind_; }
  // Node of a SharedMem communicator; -1 for the other kinds.
  NodeId node() const { return node_; }

  const std::vector<Rank>& members() const { return members_; }
  Rank at(int comm_rank) const { return members_.at(static_cast<std::size_t>(comm_rank)); }
  std::optional<int> rank_of(Rank global) const;
  bool contains(Rank global) const { return rank_of(global).has_value(); }

 private:
  std::vector<Rank> members_;
  std::vector<int> index_;  // global rank -> comm rank, -1 if absent
  int context_id_ = -1;
  CommKind kind_ = CommKind::World;
  NodeId node_ = -1;
};

// Monotonic source of communicator context ids.
class ContextAllocator {
 public:
  int next() { return next_++; }
  int peek() const { return next_; }

 private:
  int next_ = 0;
};

Communicator make_world(const RankMap& map, ContextAllocator& ids);

// One SharedMem communicator per node, indexed by node id.
std::vector<Communicator> split_shared(const Communicator& world, const RankMap& map,
                                       ContextAllocator& ids);

// Leaders ordered by node id. Ranks that are not leaders should treat the
// result as "not a member": see BridgeMembership.
Communicator split_bridge(const Communicator& world, const RankMap& map,
                          ContextAllocator& ids);

// Bridge view seen by one rank; empty for children (MPI_COMM_NULL analog).
std::optional<Communicator> bridge_membership(const Communicator& bridge, Rank r);

// Splits an arbitrary communicator into per-node groups and a leader bridge,
// the same way split_shared/split_bridge treat the world. Used for
// sub-communicators such as SUMMA rows and columns.
struct HierarchicalSplit {
  std::vector<Communicator> groups;  // ordered by node id, only non-empty nodes
  Communicator bridge;
};
HierarchicalSplit split_hierarchical(const Communicator& comm, const RankMap& map,
                                     ContextAllocator& ids);

// Everything a rank needs to address the three communicator layers.
struct ClusterLayout {
  ClusterSpec spec;
  RankMap map;
  Communicator world;
  std::vector<Communicator> shared;  // indexed by node id
  Communicator bridge;
  ContextAllocator ids;

  explicit ClusterLayout(ClusterSpec cluster);

  const Communicator& shared_of(Rank r) const {
    return shared.at(static_cast<std::size_t>(map.node_of(r)));
  }
};

std::string describe(const ClusterSpec& spec);

}  // namespace hympi
