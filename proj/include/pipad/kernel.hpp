#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pipad/dense.hpp"
#include "pipad/overlap.hpp"
#include "pipad/sliced_csr.hpp"

namespace pipad {

/// Parameters of the modeled GPU. Warps, thread groups, staged memory and
/// global-memory transactions are counted by a deterministic execution
/// model that runs on the CPU.
struct ExecConfig {
    std::uint32_t warp_width = 32;
    std::uint32_t transaction_bytes = 32;
    std::uint32_t max_request_bytes = 128;
    std::vector<std::uint32_t> vector_widths{32, 64, 128};  // floats per request
    std::uint32_t coalesce_num = 0;  // slices per warp; 0 picks per dimension
    std::uint32_t slice_cap = 32;
    std::uint32_t warps_per_block = 4;
    std::uint32_t max_active_blocks = 160;
    std::uint32_t tile = 32;  // update GEMM weight tile edge

    // Work-unit weights of the cost model.
    double issue_cost = 1.0;
    double request_cost = 4.0;
    double transaction_cost = 2.0;

    void validate() const;
};

inline constexpr std::uint32_t kMaxCoalesceNum = 4;

/// Largest value in {1, 2, 4} with value * dim <= warp_width, unless the
/// config pins one.
std::uint32_t select_coalesce_num(std::uint32_t dim, const ExecConfig& cfg);

/// Smallest configured vector width holding `dim` floats, else the widest.
std::uint32_t select_vector_width(std::uint32_t dim, const ExecConfig& cfg);

struct AccessStats {
    std::uint64_t global_requests = 0;      // dense feature operand loads
    std::uint64_t global_transactions = 0;
    std::uint64_t adjacency_requests = 0;   // staging of slice / row data
    std::uint64_t adjacency_transactions = 0;
    std::uint64_t warp_iterations = 0;
    std::uint64_t active_lane_slots = 0;
    std::uint64_t total_lane_slots = 0;
    std::uint64_t kernels = 0;
    double work_units = 0.0;

    std::vector<std::uint64_t> per_block_work;  // nnz MACs per block
    double balanced_time = 0.0;
    double actual_time = 0.0;

    double active_thread_ratio() const noexcept
    {
        return total_lane_slots == 0
                   ? 1.0
                   : static_cast<double>(active_lane_slots) / static_cast<double>(total_lane_slots);
    }

    AccessStats& operator+=(const AccessStats& other);
};

/// Feature matrices of a partition laid side by side: snapshot i owns
/// columns [i*F, (i+1)*F).
class CoalescentFeatures {
public:
    static CoalescentFeatures coalesce(std::span<const DenseMatrix> per_snapshot);

    std::uint32_t per_snapshot_dim() const noexcept { return dim_; }
    std::uint32_t s_per() const noexcept { return s_per_; }
    std::uint32_t total_dim() const noexcept { return dim_ * s_per_; }
    std::size_t node_count() const noexcept { return data_.rows(); }
    const DenseMatrix& data() const noexcept { return data_; }
    DenseMatrix snapshot(std::size_t i) const;

private:
    std::uint32_t dim_ = 0;
    std::uint32_t s_per_ = 0;
    DenseMatrix data_;
};

struct GcnWeights {
    DenseMatrix w;         // F_in x F_out
    std::vector<float> b;  // F_out

    std::size_t in_dim() const noexcept { return w.rows(); }
    std::size_t out_dim() const noexcept { return w.cols(); }
    void validate() const;
};

/// Mean over N(v) and v itself: (sum_u w_vu * x_u + x_v) / (deg(v) + 1).
/// Accumulates in column order; the oracle for every parallel variant.
DenseMatrix aggregate_reference(const Csr& adj, const DenseMatrix& features);

/// Un-normalized sums of the two passes plus the per-snapshot degrees.
struct PartialSums {
    std::uint32_t node_count = 0;
    std::uint32_t dim = 0;
    std::uint32_t s_per = 0;
    std::vector<double> overlap;                 // node_count x (dim * s_per)
    std::vector<std::vector<double>> exclusive;  // per snapshot, node_count x dim
    std::vector<std::vector<std::uint32_t>> degree;
};

struct ParallelAggregation {
    std::vector<DenseMatrix> outputs;  // one per snapshot, timeline order
    AccessStats stats;
};

/// One pass over the shared adjacency with the coalescent features, one
/// pass per exclusive part with that snapshot's features, then a
/// normalization epilogue.
ParallelAggregation aggregate_parallel(const OverlapDecomposition& decomp,
                                       const CoalescentFeatures& feats, const ExecConfig& cfg);

PartialSums aggregate_partials(const OverlapDecomposition& decomp,
                               const CoalescentFeatures& feats, const ExecConfig& cfg);

/// Access statistics of aggregate_parallel without touching feature data.
AccessStats model_aggregation(const OverlapDecomposition& decomp, std::uint32_t per_snapshot_dim,
                              const ExecConfig& cfg);

/// Baseline one-row-per-warp aggregation over CSR with scalar lanes.
AccessStats transaction_trend(std::uint32_t dim, const ExecConfig& cfg, const Csr& adj,
                              const DenseMatrix& features);

/// Count-only form of transaction_trend.
AccessStats model_row_per_warp(const Csr& adj, std::uint32_t dim, const ExecConfig& cfg);

struct UpdateCost {
    std::uint64_t weight_tile_loads = 0;
    double work_units = 0.0;
};

/// Tile schedule accounting of update_parallel without the arithmetic.
UpdateCost model_update(std::size_t node_count, std::size_t s_per, std::size_t in_dim,
                        std::size_t out_dim, const ExecConfig& cfg, bool reuse_weights);

struct UpdateResult {
    std::vector<DenseMatrix> outputs;
    std::uint64_t weight_tile_loads = 0;
    double work_units = 0.0;
};

/// out_i = agg_i * w + b. With `reuse_weights` one weight tile is staged
/// and applied to every snapshot before the next tile is loaded; without
/// it each snapshot streams all tiles and may carry its own weights.
UpdateResult update_parallel(std::span<const DenseMatrix> agg, std::span<const GcnWeights> weights,
                             const ExecConfig& cfg, bool reuse_weights);

struct GcnLayerResult {
    std::vector<DenseMatrix> hidden;
    std::vector<DenseMatrix> aggregated;
    AccessStats aggregation_stats;
    std::uint64_t weight_tile_loads = 0;
    double work_units = 0.0;
};

GcnLayerResult gcn_layer(const OverlapDecomposition& decomp, const CoalescentFeatures& feats,
                         std::span<const GcnWeights> weights, const ExecConfig& cfg,
                         bool reuse_weights = true);

/// Row-per-warp blocks over CSR (empty rows still occupy warps).
AccessStats load_balance_report(const Csr& adj, const ExecConfig& cfg);
/// Slice groups per warp over sliced CSR.
AccessStats load_balance_report(const SlicedCsr& adj, const ExecConfig& cfg);

/// Fills balanced_time and actual_time from per_block_work. Blocks run in
/// waves of max_active_blocks; a wave lasts as long as its heaviest block,
/// while its balanced length is its mean block work rounded up.
void schedule_blocks(AccessStats& stats, std::uint32_t max_active_blocks);

}  // namespace pipad
