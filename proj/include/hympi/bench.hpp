#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hympi/cluster.hpp"
#include "hympi/coll_baseline.hpp"
#include "hympi/coll_hybrid.hpp"
#include "hympi/netsim.hpp"

namespace hympi::bench {

enum class Experiment { SingleNode, OneRankPerNode, FixedNodesVaryPPN, Irregular, Summa };

// CLI spellings: single-node, one-per-node, vary-ppn, irregular, summa.
std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view name);

// lo, 2lo, 4lo, ... hi. Both ends must be powers of two with lo <= hi.
std::vector<std::size_t> power_sweep(std::size_t lo, std::size_t hi);

struct BenchPlan {
  Experiment experiment = Experiment::SingleNode;
  int nodes = 1;
  // SingleNode: ppn[0] ranks on one node. FixedNodesVaryPPN: one uniform
  // cluster per entry. Irregular: per-node counts. Summa: one entry is
  // repeated over `nodes`, a longer list is per-node counts.
  std::vector<int> ppn{24};
  // Elements per rank for allgathers; block edges b for Summa.
  std::vector<std::size_t> msg_sweep{1};
  std::vector<coll::BaselineAlgo> algos{coll::BaselineAlgo::SmpAware};
  CostModel cost;
  int reps = 1;
  std::size_t elem_bytes = 8;
  std::uint64_t seed = 1;
  int grid = 4;
  // Replaces the cluster derived from nodes/ppn (config files, explicit maps).
  std::optional<ClusterSpec> cluster;

  // Throws ConfigError. Runs no simulation.
  void validate() const;
  std::vector<ClusterSpec> configurations() const;
  // Beyond 8 nodes or 24 ranks per node.
  bool long_running() const;
};

struct Row {
  std::string experiment;
  std::string scheme;
  int nodes = 0;
  std::string ppn_list;  // "6;6;4"
  std::size_t msg_elems = 0;
  std::size_t elem_bytes = 0;
  Counters counters;  // per call
  double modeled_time = 0.0;  // per call
  std::uint64_t max_node_mem_bytes = 0;
  double ratio_vs_baseline = 1.0;
  int reps = 1;
  double setup_modeled_time = 0.0;
  std::uint64_t setup_barriers = 0;
};

// One measured allgather configuration.
struct Measurement {
  Counters per_call;
  double time_per_call = 0.0;
  Counters setup;
  Counters totals;  // whole simulation
  double setup_time = 0.0;
  std::uint64_t max_node_mem_bytes = 0;
  bool correct = false;
  std::size_t races = 0;
};

Measurement measure_hybrid_allgather(const ClusterSpec& spec, std::size_t msg_elems,
                                     std::size_t elem_bytes, int reps, const CostModel& cost,
                                     std::uint64_t seed,
                                     const hybrid::HybridAllgatherOptions& opts = {});
Measurement measure_baseline_allgather(const ClusterSpec& spec, coll::BaselineAlgo algo,
                                       std::size_t msg_elems, std::size_t elem_bytes, int reps,
                                       const CostModel& cost, std::uint64_t seed);

// Rows ordered by configuration, then msg, then hybrid before baselines.
// Throws ConfigError (plan invalid) before simulating anything.
std::vector<Row> run_plan(const BenchPlan& plan);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  // Throws UsageError for an unknown column.
  std::size_t column(std::string_view name) const;
};

const std::vector<std::string>& csv_columns();
Table to_table(const std::vector<Row>& rows);
void write_csv(const Table& table, std::ostream& out);

}  // namespace hympi::bench
