#include "hympi/summa.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <random>

#include "hympi/coll_baseline.hpp"
#include "hympi/coll_hybrid.hpp"
#include "hympi/errors.hpp"

namespace hympi::summa {

namespace {

using Block = std::vector<double>;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

std::span<const std::byte> as_bytes(const Block& b) { return std::as_bytes(std::span(b)); }
std::span<std::byte> as_writable(Block& b) { return std::as_writable_bytes(std::span(b)); }

Block to_block(const std::vector<std::byte>& raw) {
  Block out(raw.size() / sizeof(double));
  std::memcpy(out.data(), raw.data(), out.size() * sizeof(double));
  return out;
}

Block extract(const Matrix& m, int row0, int col0, int b) {
  Block out(sz(b) * sz(b));
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) out[sz(i) * sz(b) + sz(j)] = m.at(row0 + i, col0 + j);
  }
  return out;
}

// c += a * b, inner index ascending so results are reproducible bit for bit.
void multiply_accumulate(Block& c, const Block& a, const Block& b, int n) {
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < n; ++l) {
      const double av = a[sz(i) * sz(n) + sz(l)];
      for (int j = 0; j < n; ++j) c[sz(i) * sz(n) + sz(j)] += av * b[sz(l) * sz(n) + sz(j)];
    }
  }
}

struct GridComms {
  std::vector<Communicator> rows;
  std::vector<Communicator> cols;
  std::vector<HierarchicalSplit> row_split;
  std::vector<HierarchicalSplit> col_split;
};

GridComms build_grid(ClusterLayout& layout, int g) {
  GridComms out;
  for (int i = 0; i < g; ++i) {
    std::vector<Rank> members;
    for (int j = 0; j < g; ++j) members.push_back(i * g + j);
    out.rows.emplace_back(std::move(members), layout.ids.next(), CommKind::Group);
  }
  for (int j = 0; j < g; ++j) {
    std::vector<Rank> members;
    for (int i = 0; i < g; ++i) members.push_back(i * g + j);
    out.cols.emplace_back(std::move(members), layout.ids.next(), CommKind::Group);
  }
  for (const auto& c : out.rows) out.row_split.push_back(split_hierarchical(c, layout.map, layout.ids));
  for (const auto& c : out.cols) out.col_split.push_back(split_hierarchical(c, layout.map, layout.ids));
  return out;
}

const Communicator& group_of(const HierarchicalSplit& split, Rank r) {
  for (const auto& g : split.groups) {
    if (g.contains(r)) return g;
  }
  throw UsageError("rank " + std::to_string(r) + " has no node group");
}

// Panel store for one node group of a row or column: every member's own
// block followed by two alternating landing slots for remote panels.
struct PanelStore {
  hybrid::HybridBcastContext ctx;
  std::size_t block_bytes = 0;
  int members = 0;

  WindowView own_slot(Rank member) const {
    return ctx.view.subview(sz(*ctx.shared_comm.rank_of(member)) * block_bytes, block_bytes);
  }
  WindowView landing_slot(int iteration) const {
    return ctx.view.subview(sz(members + iteration % 2) * block_bytes, block_bytes);
  }
  // Where the root's panel is found on this rank's node.
  WindowView panel_for(Rank root, int iteration) const {
    return ctx.shared_comm.contains(root) ? own_slot(root) : landing_slot(iteration);
  }
};

PanelStore make_store(RankContext& ctx, const RankMap& map, const HierarchicalSplit& split,
                      std::size_t block_bytes) {
  const Communicator& group = group_of(split, ctx.rank());
  const bool leader = group.at(0) == ctx.rank();
  auto window = allocate_shared(ctx, group, leader ? sz(group.size() + 2) * block_bytes : 0);
  PanelStore s;
  s.ctx = hybrid::make_bcast_context(ctx, map, group, split.bridge, std::move(window));
  s.block_bytes = block_bytes;
  s.members = group.size();
  return s;
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::Baseline ? "Ori_SUMMA" : "Hy_SUMMA"; }

void SummaConfig::validate() const {
  if (grid < 1) throw ConfigError("SUMMA grid must be positive");
  if (block < 1) throw ConfigError("SUMMA block edge must be positive");
}

Matrix Matrix::identity(int edge) {
  Matrix m(edge);
  for (int i = 0; i < edge; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::random(int edge, std::uint64_t seed) {
  Matrix m(edge);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

SummaResult summa_run(const SummaConfig& config, const ClusterSpec& spec, Mode mode,
                      const Matrix& a, const Matrix& b, const CostModel& cost) {
  config.validate();
  if (spec.total_ranks() != config.ranks()) {
    throw ConfigError("SUMMA grid " + std::to_string(config.grid) + "x" +
                      std::to_string(config.grid) + " needs " + std::to_string(config.ranks()) +
                      " ranks, cluster has " + std::to_string(spec.total_ranks()));
  }
  const int g = config.grid;
  const int bs = config.block;
  const int n = config.edge();
  if (a.n != n || b.n != n) throw ConfigError("SUMMA operands must be N x N with N = block * grid");

  ClusterLayout layout(spec);
  const GridComms grid = build_grid(layout, g);
  const std::size_t block_elems = sz(bs) * sz(bs);
  const std::size_t block_bytes = block_elems * sizeof(double);

  std::vector<Block> c_blocks(sz(config.ranks()));
  double start = 0.0;

  auto program = [&](RankContext& ctx) {
    const Rank me = ctx.rank();
    const int row = me / g;
    const int col = me % g;
    const Block my_a = extract(a, row * bs, col * bs, bs);
    const Block my_b = extract(b, row * bs, col * bs, bs);
    Block c(block_elems, 0.0);

    if (mode == Mode::Baseline) {
      Block a_own, b_own, a_panel(block_elems), b_panel(block_elems);
      {
        auto scope = ctx.collective_scope("summa_setup");
        a_own = my_a;
        b_own = my_b;
        ctx.track_alloc(5 * block_bytes);  // A, B, C and two panels
      }
      ctx.align();
      if (me == 0) start = ctx.now();
      for (int k = 0; k < g; ++k) {
        const Rank a_root = row * g + k;
        const Rank b_root = k * g + col;
        if (g > 1) {
          coll::bcast_binomial(ctx, grid.rows[sz(row)], a_root,
                               me == a_root ? BufferRef(as_writable(a_own)) : BufferRef(as_writable(a_panel)));
          coll::bcast_binomial(ctx, grid.cols[sz(col)], b_root,
                               me == b_root ? BufferRef(as_writable(b_own)) : BufferRef(as_writable(b_panel)));
        }
        const Block& ap = me == a_root ? a_own : a_panel;
        const Block& bp = me == b_root ? b_own : b_panel;
        multiply_accumulate(c, ap, bp, bs);
      }
    } else {
      PanelStore rows, cols;
      {
        auto scope = ctx.collective_scope("summa_setup");
        rows = make_store(ctx, layout.map, grid.row_split[sz(row)], block_bytes);
        cols = make_store(ctx, layout.map, grid.col_split[sz(col)], block_bytes);
        rows.own_slot(me).write(ctx, 0, as_bytes(my_a));
        cols.own_slot(me).write(ctx, 0, as_bytes(my_b));
        ctx.barrier(rows.ctx.shared_comm);
        ctx.barrier(cols.ctx.shared_comm);
        ctx.track_alloc(block_bytes);  // C
      }
      ctx.align();
      if (me == 0) start = ctx.now();
      for (int k = 0; k < g; ++k) {
        const Rank a_root = row * g + k;
        const Rank b_root = k * g + col;
        const WindowView a_view = rows.panel_for(a_root, k);
        const WindowView b_view = cols.panel_for(b_root, k);
        if (g > 1) {
          hybrid::hybrid_bcast(ctx, rows.ctx, a_root, a_view);
          hybrid::hybrid_bcast(ctx, cols.ctx, b_root, b_view);
        }
        multiply_accumulate(c, to_block(a_view.read(ctx, 0, block_bytes)),
                            to_block(b_view.read(ctx, 0, block_bytes)), bs);
      }
    }
    c_blocks[sz(me)] = std::move(c);
  };

  RunResult run = Simulator(layout, cost).run(program);

  SummaResult out;
  out.c = Matrix(n);
  for (Rank r = 0; r < config.ranks(); ++r) {
    const int row = r / g;
    const int col = r % g;
    const Block& blk = c_blocks[sz(r)];
    for (int i = 0; i < bs; ++i) {
      for (int j = 0; j < bs; ++j) out.c.at(row * bs + i, col * bs + j) = blk[sz(i) * sz(bs) + sz(j)];
    }
  }
  Counters setup;
  for (const auto& [key, stats] : run.metrics.per_collective) {
    if (key.name == "summa_setup") setup += stats.counters;
    if (key.name == "bcast_binomial" || key.name == "hybrid_bcast") {
      out.broadcast_counters += stats.counters;
    }
  }
  out.counters = run.metrics.totals - setup;
  out.modeled_time = run.metrics.modeled_time - start;
  out.setup_time = start;
  out.setup_counters = setup;
  out.max_node_mem_bytes = run.metrics.max_node_alloc_bytes();
  for (const auto& w : run.windows) {
    auto r = check_races(*w);
    out.races.insert(out.races.end(), r.begin(), r.end());
  }
  return out;
}

SummaComparison summa_compare(const SummaConfig& config, const ClusterSpec& spec,
                              std::uint64_t seed, const CostModel& cost) {
  const Matrix a = Matrix::random(config.edge(), seed);
  const Matrix b = Matrix::random(config.edge(), seed + 1);
  SummaComparison cmp;
  cmp.baseline = summa_run(config, spec, Mode::Baseline, a, b, cost);
  cmp.hybrid = summa_run(config, spec, Mode::Hybrid, a, b, cost);
  if (cmp.hybrid.modeled_time > 0.0) {
    cmp.ratio = cmp.baseline.modeled_time / cmp.hybrid.modeled_time;
  } else if (cmp.baseline.modeled_time > 0.0) {
    cmp.ratio = std::numeric_limits<double>::infinity();
  }
  return cmp;
}

}  // namespace hympi::summa
