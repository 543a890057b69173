#include "hympi/bench.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hympi/errors.hpp"
#include "hympi/shm_window.hpp"
#include "hympi/summa.hpp"

namespace hympi::bench {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Block contributed by `rank` in repetition `rep`.
std::vector<std::byte> payload(std::uint64_t seed, Rank rank, int rep, std::size_t bytes) {
  std::uint64_t state = seed * 0x100000001b3ULL + static_cast<std::uint64_t>(rank) * 7919ULL +
                        static_cast<std::uint64_t>(rep) * 104729ULL;
  std::vector<std::byte> out(bytes);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < bytes; ++i) {
    if (i % 8 == 0) word = splitmix(state);
    out[i] = static_cast<std::byte>(word >> (8 * (i % 8)));
  }
  return out;
}

// Every rank's final-repetition block, concatenated in rank order.
std::vector<std::byte> final_blocks(std::uint64_t seed, int ranks, int reps, std::size_t bytes) {
  std::vector<std::byte> out;
  out.reserve(bytes * static_cast<std::size_t>(ranks));
  for (Rank r = 0; r < ranks; ++r) {
    const auto b = payload(seed, r, reps - 1, bytes);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

Counters divide(const Counters& c, int reps) {
  const auto r = static_cast<std::uint64_t>(reps);
  return {c.intra_copy_bytes / r, c.inter_msgs / r, c.inter_bytes / r, c.barrier_count / r};
}

Counters scope_total(const RunResult& run, std::string_view name) {
  Counters out;
  for (const auto& [key, stats] : run.metrics.per_collective) {
    if (key.name == name) out += stats.counters;
  }
  return out;
}

std::string describe_list(const std::vector<int>& v) {
  return fmt::format("{}", fmt::join(v, ";"));
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

double ratio(double baseline, double hybrid) {
  if (hybrid > 0.0) return baseline / hybrid;
  return baseline > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

std::string scheme_name(coll::BaselineAlgo a) {
  return fmt::format("Allgather_{}", coll::to_string(a));
}

Row base_row(const BenchPlan& plan, const ClusterSpec& spec, std::string scheme,
             std::size_t msg) {
  Row r;
  r.experiment = std::string(to_string(plan.experiment));
  r.scheme = std::move(scheme);
  r.nodes = spec.node_count;
  r.ppn_list = describe_list(spec.ranks_per_node);
  r.msg_elems = msg;
  r.elem_bytes = plan.elem_bytes;
  r.reps = plan.reps;
  return r;
}

Row from_measurement(Row r, const Measurement& m) {
  r.counters = m.per_call;
  r.modeled_time = m.time_per_call;
  r.max_node_mem_bytes = m.max_node_mem_bytes;
  r.setup_modeled_time = m.setup_time;
  r.setup_barriers = m.setup.barrier_count;
  return r;
}

}  // namespace

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::SingleNode: return "single-node";
    case Experiment::OneRankPerNode: return "one-per-node";
    case Experiment::FixedNodesVaryPPN: return "vary-ppn";
    case Experiment::Irregular: return "irregular";
    case Experiment::Summa: return "summa";
  }
  return "?";
}

Experiment parse_experiment(std::string_view name) {
  for (auto e : {Experiment::SingleNode, Experiment::OneRankPerNode, Experiment::FixedNodesVaryPPN,
                 Experiment::Irregular, Experiment::Summa}) {
    if (name == to_string(e)) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::vector<std::size_t> power_sweep(std::size_t lo, std::size_t hi) {
  if (!std::has_single_bit(lo) || !std::has_single_bit(hi)) {
    throw ConfigError("message sweep bounds must be positive powers of two");
  }
  if (lo > hi) throw ConfigError("message sweep minimum exceeds maximum");
  std::vector<std::size_t> out;
  for (std::size_t v = lo; v <= hi; v *= 2) out.push_back(v);
  return out;
}

void BenchPlan::validate() const {
  if (reps < 1) throw ConfigError("repetitions must be at least 1");
  if (elem_bytes == 0) throw ConfigError("element size must be positive");
  if (msg_sweep.empty()) throw ConfigError("message sweep is empty");
  for (std::size_t i = 0; i < msg_sweep.size(); ++i) {
    if (msg_sweep[i] == 0) throw ConfigError("message sweep values must be positive");
    if (i > 0 && msg_sweep[i] <= msg_sweep[i - 1]) {
      throw ConfigError("message sweep must be strictly ascending");
    }
  }
  if (experiment != Experiment::Summa && algos.empty()) {
    throw ConfigError("no baseline algorithm selected");
  }
  cost.validate();
  if (!cluster) {
    if (nodes < 1) throw ConfigError("node count must be positive");
    if (ppn.empty()) throw ConfigError("ranks-per-node list is empty");
    for (int p : ppn) {
      if (p < 1) throw ConfigError("ranks per node must be positive, got " + std::to_string(p));
    }
  }
  for (const auto& spec : configurations()) spec.validate();
  if (experiment == Experiment::Summa) {
    summa::SummaConfig{grid, 1}.validate();
    for (const auto& spec : configurations()) {
      if (spec.total_ranks() != grid * grid) {
        throw ConfigError(fmt::format("SUMMA grid {0}x{0} needs {1} ranks, cluster has {2}", grid,
                                      grid * grid, spec.total_ranks()));
      }
    }
    for (std::size_t b : msg_sweep) {
      if (b > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
        throw ConfigError("SUMMA block edge too large");
      }
    }
  }
}

std::vector<ClusterSpec> BenchPlan::configurations() const {
  if (cluster) return {*cluster};
  switch (experiment) {
    case Experiment::SingleNode: return {ClusterSpec::uniform(1, ppn.front())};
    case Experiment::OneRankPerNode: return {ClusterSpec::uniform(nodes, 1)};
    case Experiment::FixedNodesVaryPPN: {
      std::vector<ClusterSpec> out;
      for (int p : ppn) out.push_back(ClusterSpec::uniform(nodes, p));
      return out;
    }
    case Experiment::Irregular: return {ClusterSpec::irregular(ppn)};
    case Experiment::Summa:
      if (ppn.size() == 1) return {ClusterSpec::uniform(nodes, ppn.front())};
      return {ClusterSpec::irregular(ppn)};
  }
  return {};
}

bool BenchPlan::long_running() const {
  for (const auto& spec : configurations()) {
    if (spec.node_count > 8) return true;
    for (int p : spec.ranks_per_node) {
      if (p > 24) return true;
    }
  }
  return false;
}

Measurement measure_hybrid_allgather(const ClusterSpec& spec, std::size_t msg_elems,
                                     std::size_t elem_bytes, int reps, const CostModel& cost,
                                     std::uint64_t seed,
                                     const hybrid::HybridAllgatherOptions& opts) {
  const ClusterLayout layout(spec);
  const std::size_t block = msg_elems * elem_bytes;
  const auto expected = final_blocks(seed, layout.map.size(), reps, block);
  std::vector<char> ok(sz(layout.map.size()), 0);
  double start = 0.0;

  RunResult run = Simulator(layout, cost).run([&](RankContext& ctx) {
    const auto h = hybrid::hybrid_allgather_setup(ctx, layout, msg_elems, elem_bytes);
    ctx.align();
    if (ctx.rank() == 0) start = ctx.now();
    for (int rep = 0; rep < reps; ++rep) {
      h.my_view.write(ctx, 0, payload(seed, ctx.rank(), rep, block));
      hybrid::hybrid_allgather(ctx, h, opts);
    }
    // The window is shared, so one reader per node is enough.
    if (ctx.rank() != layout.map.leader_of(ctx.node())) {
      ok[sz(ctx.rank())] = 1;
      return;
    }
    const auto got = h.node_view.read(ctx, 0, h.node_view.extent());
    bool good = got.size() == block * sz(layout.map.size());
    for (Rank r = 0; good && r < layout.map.size(); ++r) {
      const auto want = expected.begin() + static_cast<std::ptrdiff_t>(sz(r) * block);
      good = std::equal(want, want + static_cast<std::ptrdiff_t>(block),
                        got.begin() + static_cast<std::ptrdiff_t>(h.block_offset(r)));
    }
    ok[sz(ctx.rank())] = good ? 1 : 0;
  });

  Measurement m;
  m.totals = run.metrics.totals;
  m.setup = scope_total(run, "hybrid_allgather_setup");
  m.per_call = divide(m.totals - m.setup, reps);
  m.setup_time = start;
  m.time_per_call = (run.metrics.modeled_time - start) / reps;
  m.max_node_mem_bytes = run.metrics.max_node_alloc_bytes();
  m.correct = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
  for (const auto& w : run.windows) m.races += check_races(*w).size();
  return m;
}

Measurement measure_baseline_allgather(const ClusterSpec& spec, coll::BaselineAlgo algo,
                                       std::size_t msg_elems, std::size_t elem_bytes, int reps,
                                       const CostModel& cost, std::uint64_t seed) {
  const ClusterLayout layout(spec);
  const std::size_t block = msg_elems * elem_bytes;
  const std::size_t total = block * sz(layout.map.size());
  const auto expected = final_blocks(seed, layout.map.size(), reps, block);
  std::vector<char> ok(sz(layout.map.size()), 0);
  double start = 0.0;

  RunResult run = Simulator(layout, cost).run([&](RankContext& ctx) {
    std::vector<std::byte> recv;
    {
      auto scope = ctx.collective_scope("allgather_setup");
      recv.resize(total);
      ctx.track_alloc(total);
    }
    ctx.align();
    if (ctx.rank() == 0) start = ctx.now();
    const std::size_t mine = sz(ctx.rank()) * block;
    for (int rep = 0; rep < reps; ++rep) {
      const auto own = payload(seed, ctx.rank(), rep, block);
      std::copy(own.begin(), own.end(), recv.begin() + static_cast<std::ptrdiff_t>(mine));
      coll::allgather(ctx, layout, algo, recv, block);
    }
    ok[sz(ctx.rank())] = recv == expected ? 1 : 0;
  });

  Measurement m;
  m.totals = run.metrics.totals;
  m.setup = scope_total(run, "allgather_setup");
  m.per_call = divide(m.totals - m.setup, reps);
  m.setup_time = start;
  m.time_per_call = (run.metrics.modeled_time - start) / reps;
  m.max_node_mem_bytes = run.metrics.max_node_alloc_bytes();
  m.correct = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
  return m;
}

std::vector<Row> run_plan(const BenchPlan& plan) {
  plan.validate();
  std::vector<Row> rows;
  for (const auto& spec : plan.configurations()) {
    for (std::size_t msg : plan.msg_sweep) {
      if (plan.experiment == Experiment::Summa) {
        const summa::SummaConfig cfg{plan.grid, static_cast<int>(msg)};
        const auto cmp = summa::summa_compare(cfg, spec, plan.seed, plan.cost);
        auto fill = [&](std::string scheme, const summa::SummaResult& res, double ratio_value) {
          Row r = base_row(plan, spec, std::move(scheme), msg * msg);
          r.elem_bytes = sizeof(double);
          r.reps = 1;
          r.counters = res.counters;
          r.modeled_time = res.modeled_time;
          r.max_node_mem_bytes = res.max_node_mem_bytes;
          r.ratio_vs_baseline = ratio_value;
          r.setup_modeled_time = res.setup_time;
          r.setup_barriers = res.setup_counters.barrier_count;
          rows.push_back(std::move(r));
        };
        fill("Hy_SUMMA", cmp.hybrid, 1.0);
        fill("Ori_SUMMA", cmp.baseline, ratio(cmp.baseline.modeled_time, cmp.hybrid.modeled_time));
        continue;
      }
      const auto hy = measure_hybrid_allgather(spec, msg, plan.elem_bytes, plan.reps, plan.cost,
                                               plan.seed);
      if (!hy.correct) throw std::logic_error("hybrid allgather produced a wrong result");
      rows.push_back(from_measurement(base_row(plan, spec, "Hy_Allgather", msg), hy));
      for (auto algo : plan.algos) {
        const auto m = measure_baseline_allgather(spec, algo, msg, plan.elem_bytes, plan.reps,
                                                  plan.cost, plan.seed);
        if (!m.correct) throw std::logic_error(scheme_name(algo) + " produced a wrong result");
        Row r = from_measurement(base_row(plan, spec, scheme_name(algo), msg), m);
        r.ratio_vs_baseline = ratio(m.time_per_call, hy.time_per_call);
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw UsageError("unknown column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "experiment", "scheme", "nodes", "ppn_list", "msg_elems", "elem_bytes",
      "intra_copy_bytes", "inter_msgs", "inter_bytes", "barriers", "modeled_time",
      "max_node_mem_bytes", "ratio_vs_baseline", "reps", "setup_modeled_time", "setup_barriers"};
  return cols;
}

Table to_table(const std::vector<Row>& rows) {
  Table t;
  t.columns = csv_columns();
  for (const auto& r : rows) {
    t.rows.push_back({r.experiment, r.scheme, fmt::format("{}", r.nodes), r.ppn_list,
                      fmt::format("{}", r.msg_elems), fmt::format("{}", r.elem_bytes),
                      fmt::format("{}", r.counters.intra_copy_bytes),
                      fmt::format("{}", r.counters.inter_msgs),
                      fmt::format("{}", r.counters.inter_bytes),
                      fmt::format("{}", r.counters.barrier_count), format_double(r.modeled_time),
                      fmt::format("{}", r.max_node_mem_bytes), format_double(r.ratio_vs_baseline),
                      fmt::format("{}", r.reps), format_double(r.setup_modeled_time),
                      fmt::format("{}", r.setup_barriers)});
  }
  return t;
}

void write_csv(const Table& table, std::ostream& out) {
  out << fmt::format("{}\n", fmt::join(table.columns, ","));
  for (const auto& row : table.rows) out << fmt::format("{}\n", fmt::join(row, ","));
}

}  // namespace hympi::bench
