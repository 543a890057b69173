// Acceptance checks, one line per criterion: "criterion N: PASS|FAIL - detail".
// With an argument only that criterion runs; the exit code is nonzero if any
// criterion that ran failed.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hympi/bench.hpp"
#include "hympi/chart.hpp"
#include "hympi/coll_baseline.hpp"
#include "hympi/coll_hybrid.hpp"
#include "hympi/summa.hpp"
#include "oracles.hpp"

using namespace hympi;
using oracle::Bytes;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t idx(int v) { return static_cast<std::size_t>(v); }

// The shared randomized configuration set of criteria 1 and 7.
struct Case {
  ClusterSpec spec;
  std::vector<Bytes> blocks;
};

std::vector<Case> random_cases(int count) {
  std::mt19937_64 rng(20240611);
  std::vector<Case> out;
  for (int i = 0; i < count; ++i) {
    Case c{oracle::random_spec(rng, 4, 6), {}};
    const std::size_t msg = 1 + rng() % 64;
    for (int r = 0; r < c.spec.total_ranks(); ++r) c.blocks.push_back(oracle::random_bytes(rng, msg * 8));
    out.push_back(std::move(c));
  }
  return out;
}

bool multi_ppn(const ClusterSpec& s) {
  return std::any_of(s.ranks_per_node.begin(), s.ranks_per_node.end(), [](int n) { return n >= 2; });
}

std::size_t race_count(const RunResult& run) {
  std::size_t n = 0;
  for (const auto& w : run.windows) n += check_races(*w).size();
  return n;
}

// Final node windows of one hybrid allgather call.
struct HybridRun {
  std::vector<Bytes> windows;
  RunResult run;
};

HybridRun hybrid_once(const Case& c, const hybrid::HybridAllgatherOptions& opts = {}) {
  ClusterLayout layout(c.spec);
  const std::size_t bb = c.blocks[0].size();
  HybridRun out;
  out.run = Simulator(layout).run([&](RankContext& ctx) {
    const auto h = hybrid::hybrid_allgather_setup(ctx, layout, bb / 8, 8);
    h.my_view.write(ctx, 0, c.blocks[idx(ctx.rank())]);
    hybrid::hybrid_allgather(ctx, h, opts);
  });
  for (const auto& w : out.run.windows) out.windows.emplace_back(w->contents().begin(), w->contents().end());
  return out;
}

enum class Base { Ring, RecDbl, Smp, Allgatherv };

std::vector<Bytes> baseline_once(const Case& c, Base b) {
  ClusterLayout layout(c.spec);
  const std::size_t bb = c.blocks[0].size();
  const int p = c.spec.total_ranks();
  std::vector<Bytes> recv(idx(p));
  Simulator(layout).run([&](RankContext& ctx) {
    Bytes buf(bb * idx(p));
    const auto& own = c.blocks[idx(ctx.rank())];
    std::copy(own.begin(), own.end(), buf.begin() + static_cast<std::ptrdiff_t>(bb * idx(ctx.rank())));
    const BufferRef ref{std::span(buf)};
    switch (b) {
      case Base::Ring: coll::allgather_ring(ctx, layout.world, ref, bb); break;
      case Base::RecDbl: coll::allgather_recdbl(ctx, layout.world, ref, bb); break;
      case Base::Smp: coll::smp_allgather(ctx, layout, buf, bb); break;
      case Base::Allgatherv: {
        std::vector<std::size_t> counts(idx(p), bb), displs;
        for (int i = 0; i < p; ++i) displs.push_back(bb * idx(i));
        coll::allgatherv(ctx, layout.world, ref, counts, displs, 1);
        break;
      }
    }
    recv[idx(ctx.rank())] = std::move(buf);
  });
  return recv;
}

Verdict criterion1() {
  const auto t0 = Clock::now();
  const auto cases = random_cases(240);
  int bad = 0, irregular = 0;
  for (const auto& c : cases) {
    irregular += !std::all_of(c.spec.ranks_per_node.begin(), c.spec.ranks_per_node.end(),
                              [&](int n) { return n == c.spec.ranks_per_node[0]; });
    const auto rank_order = oracle::concat(c.blocks);
    const auto node_order = oracle::concat(c.blocks, oracle::node_sorted(c.spec));
    bool ok = true;
    for (const auto& w : hybrid_once(c).windows) ok = ok && w == node_order;
    for (Base b : {Base::Ring, Base::RecDbl, Base::Smp, Base::Allgatherv}) {
      for (const auto& r : baseline_once(c, b)) ok = ok && r == rank_order;
    }
    bad += !ok;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 60.0,
          fmt::format("{} configs ({} irregular), {} mismatches, {:.1f}s", cases.size(), irregular, bad, secs)};
}

std::vector<bench::Row> of_scheme(const std::vector<bench::Row>& rows, std::string_view scheme) {
  std::vector<bench::Row> out;
  for (const auto& r : rows) {
    if (r.scheme == scheme) out.push_back(r);
  }
  return out;
}

Verdict criterion2() {
  bench::BenchPlan p;
  p.experiment = bench::Experiment::SingleNode;
  p.ppn = {24};
  p.msg_sweep = bench::power_sweep(1, 32768);
  const auto rows = bench::run_plan(p);
  const auto hy = of_scheme(rows, "Hy_Allgather");
  const auto base = of_scheme(rows, "Allgather_smp");
  bool constant = hy.size() == 16, shape = true, rising = base.size() == 16;
  for (std::size_t i = 0; i < hy.size(); ++i) {
    constant = constant && hy[i].modeled_time == hy[0].modeled_time;
    shape = shape && hy[i].counters.barrier_count == 1 && hy[i].counters.inter_msgs == 0 &&
            hy[i].counters.intra_copy_bytes == 0;
  }
  for (std::size_t i = 1; i < base.size(); ++i) rising = rising && base[i].modeled_time > base[i - 1].modeled_time;
  return {constant && shape && rising,
          fmt::format("hybrid time {} at every size (constant={}, 1 barrier/0 msgs/0 copies={}); "
                      "smp {} -> {} strictly increasing={}",
                      hy.empty() ? 0.0 : hy[0].modeled_time, constant, shape,
                      base.empty() ? 0.0 : base.front().modeled_time,
                      base.empty() ? 0.0 : base.back().modeled_time, rising)};
}

Verdict criterion3() {
  Verdict v;
  for (int nodes : {4, 16}) {
    for (std::size_t msg : {1u, 64u, 1024u}) {
      const auto spec = ClusterSpec::uniform(nodes, 1);
      const auto h = bench::measure_hybrid_allgather(spec, msg, 8, 1, {}, 1);
      const auto b = bench::measure_baseline_allgather(spec, coll::BaselineAlgo::SmpAware, msg, 8, 1, {}, 1);
      const bool ok = h.per_call.inter_msgs == b.per_call.inter_msgs &&
                      h.per_call.inter_bytes == b.per_call.inter_bytes &&
                      h.per_call.intra_copy_bytes == 0 && b.per_call.intra_copy_bytes == 0 && h.correct &&
                      b.correct;
      v.pass = v.pass && ok;
      if (msg == 1) {
        v.detail += fmt::format("{} nodes msg=1: {} msgs/{} B both; ", nodes,
                                h.per_call.inter_msgs, h.per_call.inter_bytes);
      }
    }
  }
  v.detail += "intra copies 0";
  return v;
}

Verdict criterion4() {
  bench::BenchPlan p;
  p.experiment = bench::Experiment::FixedNodesVaryPPN;
  p.nodes = 4;
  p.ppn = {3, 6, 9, 12, 15, 18, 21, 24};
  p.msg_sweep = {512, 16384};
  const auto table = bench::to_table(bench::run_plan(p));
  const auto scheme = table.column("scheme"), msg = table.column("msg_elems"),
             ratio = table.column("ratio_vs_baseline");
  Verdict v;
  for (const char* m : {"512", "16384"}) {
    std::vector<double> seq;
    for (const auto& row : table.rows) {
      if (row[scheme] == "Allgather_smp" && row[msg] == m) seq.push_back(std::stod(row[ratio]));
    }
    const bool mono = seq.size() == p.ppn.size() && std::is_sorted(seq.begin(), seq.end());
    v.pass = v.pass && mono;
    v.detail += fmt::format("msg={}: {:.3f} ", m, fmt::join(seq, " "));
  }
  v.detail += "for ppn 3..24 step 3";
  return v;
}

Verdict criterion5() {
  Verdict v;
  int checked = 0;
  for (int ppn : {1, 2, 3, 6, 12, 24}) {
    for (std::size_t msg : {1u, 100u}) {
      const auto spec = ClusterSpec::uniform(2, ppn);
      const std::uint64_t p = idx(spec.total_ranks());
      const auto h = bench::measure_hybrid_allgather(spec, msg, 8, 1, {}, 1);
      const auto b = bench::measure_baseline_allgather(spec, coll::BaselineAlgo::SmpAware, msg, 8, 1, {}, 1);
      v.pass = v.pass && h.max_node_mem_bytes == p * msg * 8 &&
               b.max_node_mem_bytes == static_cast<std::uint64_t>(ppn) * p * msg * 8;
      ++checked;
    }
  }
  // Per-node windows on an uneven cluster: every node holds the full P blocks.
  ClusterLayout layout(ClusterSpec::irregular({6, 6, 4}));
  auto run = Simulator(layout).run([&](RankContext& ctx) { hybrid::hybrid_allgather_setup(ctx, layout, 10); });
  for (const auto& [node, bytes] : run.metrics.per_node_alloc_bytes) v.pass = v.pass && bytes == 16 * 10 * 8;
  v.detail = fmt::format("{} uniform configs and [6,6,4]: hybrid P*msg*8 per node, smp ppn*P*msg*8", checked);
  return v;
}

int barrier_exits(const CollectiveTrace& t, Rank r) {
  int n = 0;
  for (const auto& e : t.events) n += e.kind == EventKind::BarrierExit && e.rank == r;
  return n;
}

Verdict criterion6() {
  std::mt19937_64 rng(6);
  int configs = 0, bad = 0;
  for (int i = 0; i < 60; ++i) {
    const auto spec = oracle::random_spec(rng, 4, 6);
    ClusterLayout layout(spec);
    const Rank root = static_cast<Rank>(rng() % idx(spec.total_ranks()));
    auto run = Simulator(layout).run([&](RankContext& ctx) {
      const auto h = hybrid::hybrid_allgather_setup(ctx, layout, 2);
      const auto b = hybrid::hybrid_bcast_setup(ctx, layout, 16);
      for (int call = 0; call < 2; ++call) {
        hybrid::hybrid_allgather(ctx, h);
        hybrid::hybrid_bcast(ctx, b, root);
      }
    });
    const int want = spec.node_count > 1 ? 2 : 1;
    for (int call = 0; call < 2; ++call) {
      const auto* ag = run.trace("hybrid_allgather", call);
      const auto* bc = run.trace("hybrid_bcast", call);
      for (Rank r = 0; r < spec.total_ranks(); ++r) {
        bad += ag == nullptr || bc == nullptr || barrier_exits(*ag, r) != want || barrier_exits(*bc, r) != 1;
      }
    }
    ++configs;
  }
  return {bad == 0, fmt::format("{} configs x 2 calls: per-rank barrier exits 2/1 (allgather multi/single node), "
                                "1 (bcast); {} deviations",
                                configs, bad)};
}

Verdict criterion7() {
  const auto cases = random_cases(240);
  std::size_t clean_races = 0, eligible = 0, caught = 0;
  std::mt19937_64 rng(7);
  hybrid::HybridAllgatherOptions no_pre;
  no_pre.pre_exchange_barrier = false;
  for (const auto& c : cases) {
    clean_races += race_count(hybrid_once(c).run);
    ClusterLayout layout(c.spec);
    const Rank root = static_cast<Rank>(rng() % idx(c.spec.total_ranks()));
    auto bc = Simulator(layout).run([&](RankContext& ctx) {
      const auto b = hybrid::hybrid_bcast_setup(ctx, layout, c.blocks[0].size());
      if (ctx.rank() == root) b.view.write(ctx, 0, c.blocks[idx(root)]);
      hybrid::hybrid_bcast(ctx, b, root);
      b.view.read(ctx, 0, c.blocks[0].size());
    });
    clean_races += race_count(bc);
    if (c.spec.node_count > 1 && multi_ppn(c.spec)) {
      ++eligible;
      caught += race_count(hybrid_once(c, no_pre).run) >= 1;
    }
  }
  return {clean_races == 0 && caught == eligible,
          fmt::format("{} races in {} unmodified configs; pre-barrier removed: {}/{} multi-node multi-ppn configs "
                      "reported",
                      clean_races, cases.size(), caught, eligible)};
}

Verdict criterion8() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::uint64_t hybrid_copies = 0;
  int runs = 0;
  bool races = false;
  for (int grid : {2, 3, 4}) {
    const int p = grid * grid;
    for (int block : {2, 4, 8}) {
      const summa::SummaConfig cfg{grid, block};
      const auto a = summa::Matrix::random(cfg.edge(), 100 + idx(grid * block));
      const auto b = summa::Matrix::random(cfg.edge(), 200 + idx(grid * block));
      const auto want = oracle::matmul(a.data, b.data, cfg.edge());
      for (const auto& spec : {ClusterSpec::uniform(1, p), ClusterSpec::uniform(grid, grid), ClusterSpec::uniform(p, 1)}) {
        for (auto mode : {summa::Mode::Baseline, summa::Mode::Hybrid}) {
          const auto r = summa::summa_run(cfg, spec, mode, a, b);
          worst = std::max(worst, oracle::max_rel_error(r.c.data, want));
          if (mode == summa::Mode::Hybrid) hybrid_copies += r.broadcast_counters.intra_copy_bytes;
          races = races || !r.races.empty();
          ++runs;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && hybrid_copies == 0 && !races && secs < 60.0,
          fmt::format("{} runs, max rel error {:.2e}, hybrid broadcast copy bytes {}, {:.1f}s", runs, worst,
                      hybrid_copies, secs)};
}

Verdict criterion9() {
  struct Shape {
    std::string name;
    ClusterSpec spec;
  };
  std::vector<int> pairs(15, 1);
  pairs[0] = 2;
  const std::vector<Shape> shapes{{"1x16", ClusterSpec::uniform(1, 16)},
                                  {"2x8", ClusterSpec::uniform(2, 8)},
                                  {"4x4", ClusterSpec::uniform(4, 4)},
                                  {"8x2", ClusterSpec::uniform(8, 2)},
                                  {"2+1x14", ClusterSpec::irregular(pairs)},
                                  {"16x1", ClusterSpec::uniform(16, 1)}};
  Verdict v;
  std::vector<std::string> violations;
  for (int block : {8, 64}) {
    std::string line = fmt::format("b={}:", block);
    double best_ratio = 0.0;
    std::string best;
    for (const auto& s : shapes) {
      const double r = summa::summa_compare({4, block}, s.spec).ratio;
      line += fmt::format(" {}={:.3f}", s.name, r);
      if (multi_ppn(s.spec) && !(r > 1.0)) violations.push_back(fmt::format("{} b={}", s.name, block));
      if (r > best_ratio) best_ratio = r, best = s.name;
    }
    if (best != "1x16") violations.push_back(fmt::format("max at {} b={}", best, block));
    v.detail += line + "; ";
  }
  v.pass = violations.empty();
  v.detail += violations.empty() ? "all shared-node shapes above 1"
                                 : fmt::format("violations: {}", fmt::join(violations, ", "));
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Verdict criterion10() {
  const auto dir = std::filesystem::temp_directory_path() / "hympi_acceptance";
  std::filesystem::create_directories(dir);
  std::vector<bench::BenchPlan> plans(3);
  plans[0].experiment = bench::Experiment::FixedNodesVaryPPN;
  plans[0].nodes = 2;
  plans[0].ppn = {2, 5};
  plans[0].msg_sweep = bench::power_sweep(1, 64);
  plans[0].algos = {coll::BaselineAlgo::SmpAware, coll::BaselineAlgo::Ring, coll::BaselineAlgo::RecursiveDoubling};
  plans[1].experiment = bench::Experiment::Irregular;
  plans[1].ppn = {6, 6, 4};
  plans[1].msg_sweep = {1, 32};
  plans[1].reps = 3;
  plans[2].experiment = bench::Experiment::Summa;
  plans[2].grid = 3;
  plans[2].nodes = 3;
  plans[2].ppn = {3};
  plans[2].msg_sweep = {2, 4};
  int identical = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    std::string outputs[2][2];
    for (int round = 0; round < 2; ++round) {
      const auto csv = dir / fmt::format("plan{}_{}.csv", i, round);
      const auto svg = dir / fmt::format("plan{}_{}.svg", i, round);
      const auto table = bench::to_table(bench::run_plan(plans[i]));
      {
        std::ofstream out(csv, std::ios::binary);
        bench::write_csv(table, out);
      }
      chart::emit_chart(table, "msg_elems", "modeled_time", "scheme+ppn_list", svg);
      outputs[round][0] = slurp(csv);
      outputs[round][1] = slurp(svg);
    }
    identical += outputs[0][0] == outputs[1][0] && outputs[0][1] == outputs[1][1] && !outputs[0][0].empty();
  }
  std::filesystem::remove_all(dir);
  return {identical == static_cast<int>(plans.size()),
          fmt::format("{}/{} plans byte-identical CSV and SVG across two runs", identical, plans.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> which;
  if (argc > 1) {
    const int n = std::atoi(argv[1]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [1-" << criteria.size() << "]\n";
      return 2;
    }
    which.push_back(n);
  } else {
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) which.push_back(n);
  }
  int failed = 0;
  for (int n : which) {
    Verdict v;
    try {
      v = criteria[idx(n - 1)]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << fmt::format("criterion {}: {} - {}", n, v.pass ? "PASS" : "FAIL", v.detail) << std::endl;
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
