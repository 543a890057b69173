#include "hympi/cluster.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "hympi/errors.hpp"

namespace hympi {

ClusterSpec ClusterSpec::uniform(int nodes, int ppn) {
  ClusterSpec s;
  s.node_count = nodes;
  s.ranks_per_node.assign(static_cast<std::size_t>(std::max(nodes, 0)), ppn);
  return s;
}

ClusterSpec ClusterSpec::irregular(std::vector<int> ranks_per_node) {
  ClusterSpec s;
  s.node_count = static_cast<int>(ranks_per_node.size());
  s.ranks_per_node = std::move(ranks_per_node);
  return s;
}

ClusterSpec ClusterSpec::explicit_map(std::vector<int> ranks_per_node,
                                      std::vector<NodeId> node_assignment) {
  ClusterSpec s = irregular(std::move(ranks_per_node));
  s.placement = PlacementKind::ExplicitMap;
  s.node_assignment = std::move(node_assignment);
  return s;
}

int ClusterSpec::total_ranks() const {
  return std::accumulate(ranks_per_node.begin(), ranks_per_node.end(), 0);
}

void ClusterSpec::validate() const {
  if (node_count < 1) throw ConfigError("cluster needs at least one node");
  if (static_cast<int>(ranks_per_node.size()) != node_count) {
    throw ConfigError("ranks_per_node has " + std::to_string(ranks_per_node.size()) +
                      " entries for " + std::to_string(node_count) + " nodes");
  }
  for (std::size_t n = 0; n < ranks_per_node.size(); ++n) {
    if (ranks_per_node[n] < 1) {
      throw ConfigError("node " + std::to_string(n) + " has no ranks");
    }
  }
  if (placement == PlacementKind::SmpStyle) return;

  const int total = total_ranks();
  if (static_cast<int>(node_assignment.size()) != total) {
    throw ConfigError("explicit map assigns " + std::to_string(node_assignment.size()) +
                      " ranks, expected " + std::to_string(total));
  }
  std::vector<int> counts(static_cast<std::size_t>(node_count), 0);
  for (NodeId n : node_assignment) {
    if (n < 0 || n >= node_count) {
      throw ConfigError("explicit map names unknown node " + std::to_string(n));
    }
    ++counts[static_cast<std::size_t>(n)];
  }
  if (counts != ranks_per_node) {
    throw ConfigError("explicit map per-node counts do not match ranks_per_node");
  }
}

bool RankMap::is_identity_order() const {
  for (std::size_t i = 0; i < node_sorted_.size(); ++i) {
    if (node_sorted_[i] != static_cast<Rank>(i)) return false;
  }
  return true;
}

RankMap build_rank_map(const ClusterSpec& spec) {
  spec.validate();
  const int total = spec.total_ranks();
  RankMap m;
  m.node_of_.resize(static_cast<std::size_t>(total));
  if (spec.placement == PlacementKind::SmpStyle) {
    Rank r = 0;
    for (int n = 0; n < spec.node_count; ++n) {
      for (int i = 0; i < spec.ranks_per_node[static_cast<std::size_t>(n)]; ++i) {
        m.node_of_[static_cast<std::size_t>(r++)] = n;
      }
    }
  } else {
    m.node_of_ = spec.node_assignment;
  }

  m.node_members_.assign(static_cast<std::size_t>(spec.node_count), {});
  m.local_rank_of_.resize(static_cast<std::size_t>(total));
  for (Rank r = 0; r < total; ++r) {
    auto& members = m.node_members_[static_cast<std::size_t>(m.node_of_[static_cast<std::size_t>(r)])];
    m.local_rank_of_[static_cast<std::size_t>(r)] = static_cast<int>(members.size());
    members.push_back(r);
  }

  m.leaders_.reserve(static_cast<std::size_t>(spec.node_count));
  m.node_offset_.reserve(static_cast<std::size_t>(spec.node_count));
  m.node_sorted_.reserve(static_cast<std::size_t>(total));
  for (const auto& members : m.node_members_) {
    m.leaders_.push_back(members.front());
    m.node_offset_.push_back(static_cast<int>(m.node_sorted_.size()));
    m.node_sorted_.insert(m.node_sorted_.end(), members.begin(), members.end());
  }
  m.node_sorted_pos_.resize(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < m.node_sorted_.size(); ++i) {
    m.node_sorted_pos_[static_cast<std::size_t>(m.node_sorted_[i])] = static_cast<int>(i);
  }
  return m;
}

Communicator::Communicator(std::vector<Rank> members, int context_id, CommKind kind,
                           NodeId node)
    : members_(std::move(members)), context_id_(context_id), kind_(kind), node_(node) {
  Rank max_rank = -1;
  for (Rank r : members_) {
    if (r < 0) throw UsageError("negative rank in communicator");
    max_rank = std::max(max_rank, r);
  }
  index_.assign(static_cast<std::size_t>(max_rank + 1), -1);
  for (std::size_t i = 0; i < members_.size(); ++i) {
    auto& slot = index_[static_cast<std::size_t>(members_[i])];
    if (slot != -1) throw UsageError("duplicate rank in communicator");
    slot = static_cast<int>(i);
  }
}

std::optional<int> Communicator::rank_of(Rank global) const {
  if (global < 0 || global >= static_cast<Rank>(index_.size())) return std::nullopt;
  const int i = index_[static_cast<std::size_t>(global)];
  if (i < 0) return std::nullopt;
  return i;
}

Communicator make_world(const RankMap& map, ContextAllocator& ids) {
  std::vector<Rank> members(static_cast<std::size_t>(map.size()));
  std::iota(members.begin(), members.end(), 0);
  return Communicator(std::move(members), ids.next(), CommKind::World);
}

std::vector<Communicator> split_shared(const Communicator& world, const RankMap& map,
                                       ContextAllocator& ids) {
  if (world.kind() != CommKind::World) throw UsageError("split_shared needs the world communicator");
  std::vector<Communicator> out;
  out.reserve(static_cast<std::size_t>(map.node_count()));
  for (NodeId n = 0; n < map.node_count(); ++n) {
    out.emplace_back(map.node_members(n), ids.next(), CommKind::SharedMem, n);
  }
  return out;
}

Communicator split_bridge(const Communicator& world, const RankMap& map,
                          ContextAllocator& ids) {
  if (world.kind() != CommKind::World) throw UsageError("split_bridge needs the world communicator");
  return Communicator(map.leaders(), ids.next(), CommKind::Bridge);
}

std::optional<Communicator> bridge_membership(const Communicator& bridge, Rank r) {
  if (!bridge.contains(r)) return std::nullopt;
  return bridge;
}

HierarchicalSplit split_hierarchical(const Communicator& comm, const RankMap& map,
                                     ContextAllocator& ids) {
  std::vector<std::vector<Rank>> by_node(static_cast<std::size_t>(map.node_count()));
  for (Rank r : comm.members()) by_node[static_cast<std::size_t>(map.node_of(r))].push_back(r);

  HierarchicalSplit out;
  std::vector<Rank> leaders;
  for (NodeId n = 0; n < map.node_count(); ++n) {
    auto& members = by_node[static_cast<std::size_t>(n)];
    if (members.empty()) continue;
    std::sort(members.begin(), members.end());
    leaders.push_back(members.front());
    out.groups.emplace_back(std::move(members), ids.next(), CommKind::SharedMem, n);
  }
  out.bridge = Communicator(std::move(leaders), ids.next(), CommKind::Bridge);
  return out;
}

ClusterLayout::ClusterLayout(ClusterSpec cluster)
    : spec(std::move(cluster)), map(build_rank_map(spec)) {
  world = make_world(map, ids);
  shared = split_shared(world, map, ids);
  bridge = split_bridge(world, map, ids);
}

std::string describe(const ClusterSpec& spec) {
  std::ostringstream os;
  for (std::size_t i = 0; i < spec.ranks_per_node.size(); ++i) {
    if (i) os << ';';
    os << spec.ranks_per_node[i];
  }
  return os.str();
}

}  // namespace hympi
