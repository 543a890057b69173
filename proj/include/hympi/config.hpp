#pragma once

#include <filesystem>
#include <istream>
#include <string_view>
#include <vector>

#include "hympi/cluster.hpp"
#include "hympi/netsim.hpp"

namespace hympi::config {

// "6,6,4" -> {6, 6, 4}. Throws ConfigError on anything but positive or zero
// integers.
std::vector<int> parse_int_list(std::string_view text);

// "alpha=10,beta=0.1" applied on top of base. Keys: alpha, beta, gamma,
// barrier_base, barrier_per_rank.
CostModel parse_cost_overrides(std::string_view text, CostModel base = {});

struct RunConfig {
  ClusterSpec cluster;
  CostModel cost;
};

// Plain "key = value" lines; '#' starts a comment. Keys:
//   nodes            = 3
//   ranks_per_node   = 6,6,4      (a single value repeats for every node)
//   placement        = smp | explicit
//   node_assignment  = 0,1,0,1    (explicit placement only)
//   alpha, beta, gamma, barrier_base, barrier_per_rank
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace hympi::config
