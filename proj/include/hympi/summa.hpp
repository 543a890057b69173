#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "hympi/cluster.hpp"
#include "hympi/netsim.hpp"
#include "hympi/shm_window.hpp"

// SUMMA C = A x B on a grid x grid process grid, with panel broadcasts done
// either by the binomial baseline into private buffers or by the hybrid
// broadcast over node-shared windows.
namespace hympi::summa {

enum class Mode { Baseline, Hybrid };
std::string_view to_string(Mode m);

struct SummaConfig {
  int grid = 2;   // sqrt(P)
  int block = 2;  // per-rank block edge b; N = b * grid

  int ranks() const { return grid * grid; }
  int edge() const { return block * grid; }
  void validate() const;
};

// Dense row-major square matrix.
struct Matrix {
  int n = 0;
  std::vector<double> data;

  Matrix() = default;
  explicit Matrix(int edge) : n(edge), data(static_cast<std::size_t>(edge) * static_cast<std::size_t>(edge), 0.0) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }

  static Matrix identity(int edge);
  static Matrix random(int edge, std::uint64_t seed);
};

struct SummaResult {
  Matrix c;                      // assembled N x N product
  Counters counters;             // multiplication phase only
  Counters broadcast_counters;   // attributed to the panel broadcasts
  double modeled_time = 0.0;     // multiplication phase only
  double setup_time = 0.0;
  Counters setup_counters;
  std::uint64_t max_node_mem_bytes = 0;
  std::vector<RaceReport> races;
};

// Ranks map to the grid row-major: rank r sits at (r / grid, r % grid).
// Throws ConfigError unless spec has exactly grid^2 ranks.
SummaResult summa_run(const SummaConfig& config, const ClusterSpec& spec, Mode mode,
                      const Matrix& a, const Matrix& b, const CostModel& cost = {});

struct SummaComparison {
  SummaResult baseline;
  SummaResult hybrid;
  double ratio = 1.0;  // modeled_time(baseline) / modeled_time(hybrid)
};

SummaComparison summa_compare(const SummaConfig& config, const ClusterSpec& spec,
                              std::uint64_t seed = 1, const CostModel& cost = {});

}  // namespace hympi::summa
