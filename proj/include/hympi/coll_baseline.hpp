#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "hympi/cluster.hpp"
#include "hympi/netsim.hpp"
#include "hympi/shm_window.hpp"

// Conventional pure message-passing collectives. All allgather variants work
// in place: `recv` spans every member's block and the caller has already
// stored its own block at its slot before the call.
namespace hympi::coll {

enum class BaselineAlgo { Ring, RecursiveDoubling, SmpAware };

std::string_view to_string(BaselineAlgo a);
BaselineAlgo parse_baseline_algo(std::string_view name);

// P-1 rounds; block i sits at i * block_bytes for comm rank i.
void allgather_ring(RankContext& ctx, const Communicator& comm, const BufferRef& recv,
                    std::size_t block_bytes);

// ceil(log2 P) exchange rounds, plus a fold-in and a final hand-back for the
// ranks beyond the largest power of two when P is not one.
void allgather_recdbl(RankContext& ctx, const Communicator& comm, const BufferRef& recv,
                      std::size_t block_bytes);

// Ring over variable-size blocks. counts and displs are in elements of
// elem_bytes; member i's block lives at displs[i].
void allgatherv(RankContext& ctx, const Communicator& comm, const BufferRef& recv,
                std::span<const std::size_t> counts, std::span<const std::size_t> displs,
                std::size_t elem_bytes);

// Binomial tree rooted at global rank `root`. Non-root buffers are only
// written, never read.
void bcast_binomial(RankContext& ctx, const Communicator& comm, Rank root,
                    const BufferRef& buffer);

// SMP-aware three-phase allgather over the world: gather at each leader,
// allgatherv among leaders, broadcast back to the children. Blocks are in
// global-rank order in `recv` (a private buffer).
void smp_allgather(RankContext& ctx, const ClusterLayout& layout, std::span<std::byte> recv,
                   std::size_t block_bytes);

// Dispatches to one of the world-level allgathers above.
void allgather(RankContext& ctx, const ClusterLayout& layout, BaselineAlgo algo,
               std::span<std::byte> recv, std::size_t block_bytes);

// Throws UsageError on overlapping or out-of-range placements.
void validate_placement(std::span<const std::size_t> counts, std::span<const std::size_t> displs,
                        std::size_t capacity_elems);

}  // namespace hympi::coll
