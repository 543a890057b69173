#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library beyond its plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "hympi/cluster.hpp"

namespace oracle {

using Bytes = std::vector<std::byte>;

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::byte>(rng() & 0xff);
  return out;
}

// Blocks concatenated in the given order.
inline Bytes concat(const std::vector<Bytes>& blocks, const std::vector<int>& order) {
  Bytes out;
  for (int i : order) {
    const auto& b = blocks[static_cast<std::size_t>(i)];
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

inline Bytes concat(const std::vector<Bytes>& blocks) {
  std::vector<int> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  return concat(blocks, order);
}

// Node hosting each rank, read directly off the ClusterSpec fields.
inline std::vector<int> nodes_of(const hympi::ClusterSpec& spec) {
  if (spec.placement == hympi::PlacementKind::ExplicitMap) return spec.node_assignment;
  std::vector<int> out;
  for (int n = 0; n < static_cast<int>(spec.ranks_per_node.size()); ++n) {
    for (int i = 0; i < spec.ranks_per_node[static_cast<std::size_t>(n)]; ++i) out.push_back(n);
  }
  return out;
}

// Brute force: try every rank against every node in order.
inline std::vector<int> node_sorted(const hympi::ClusterSpec& spec) {
  const auto node = nodes_of(spec);
  std::vector<int> out;
  for (int n = 0; n < spec.node_count; ++n) {
    for (int r = 0; r < static_cast<int>(node.size()); ++r) {
      if (node[static_cast<std::size_t>(r)] == n) out.push_back(r);
    }
  }
  return out;
}

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  int n) {
  std::vector<double> c(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        s += a[static_cast<std::size_t>(i * n + k)] * b[static_cast<std::size_t>(k * n + j)];
      }
      c[static_cast<std::size_t>(i * n + j)] = s;
    }
  }
  return c;
}

inline double max_rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double scale = std::max(1.0, std::abs(want[i]));
    worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
  }
  return worst;
}

// Random cluster: SMP-style, irregular, or an explicit shuffle.
inline hympi::ClusterSpec random_spec(std::mt19937_64& rng, int max_nodes, int max_ppn,
                                      bool allow_explicit = true) {
  std::uniform_int_distribution<int> nd(1, max_nodes);
  std::uniform_int_distribution<int> pd(1, max_ppn);
  const int nodes = nd(rng);
  std::vector<int> ppn(static_cast<std::size_t>(nodes));
  const bool regular = rng() % 2 == 0;
  const int common = pd(rng);
  for (auto& p : ppn) p = regular ? common : pd(rng);
  if (allow_explicit && rng() % 3 == 0) {
    std::vector<int> assign;
    for (int n = 0; n < nodes; ++n) assign.insert(assign.end(), static_cast<std::size_t>(ppn[static_cast<std::size_t>(n)]), n);
    std::shuffle(assign.begin(), assign.end(), rng);
    return hympi::ClusterSpec::explicit_map(ppn, assign);
  }
  return hympi::ClusterSpec::irregular(ppn);
}

}  // namespace oracle
