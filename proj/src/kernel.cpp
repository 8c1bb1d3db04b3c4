#include "pipad/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pipad/errors.hpp"

namespace pipad {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint32_t max_vector_width(const ExecConfig& cfg)
{
    return *std::max_element(cfg.vector_widths.begin(), cfg.vector_widths.end());
}

// Load instructions one warp issues to fetch `dim` consecutive floats, and
// the lanes doing useful work across those instructions.
struct RowLoad {
    std::uint32_t requests = 1;
    std::uint64_t active_lanes = 0;
};

RowLoad row_load(std::uint32_t dim, const ExecConfig& cfg)
{
    if (dim <= cfg.warp_width) {
        // scalar lanes, one float each
        return {static_cast<std::uint32_t>(ceil_div(4ull * dim, cfg.max_request_bytes)), dim};
    }
    const std::uint32_t w = select_vector_width(dim, cfg);
    const std::uint32_t per_lane = w / cfg.warp_width;
    const std::uint32_t full = dim / w;
    const std::uint32_t rem = dim % w;
    RowLoad load;
    load.requests = full + (rem > 0 ? 1 : 0);
    load.active_lanes = static_cast<std::uint64_t>(full) * cfg.warp_width + ceil_div(rem, per_lane);
    return load;
}

// 32-byte sectors touched by floats [first, first + count).
void touch_sectors(std::uint64_t first_float, std::uint32_t count, std::uint32_t sector_bytes,
                   std::vector<std::uint64_t>& out)
{
    const std::uint64_t lo = first_float * 4 / sector_bytes;
    const std::uint64_t hi = ((first_float + count) * 4 - 1) / sector_bytes;
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
}

std::uint64_t distinct_count(std::vector<std::uint64_t>& v)
{
    std::sort(v.begin(), v.end());
    return static_cast<std::uint64_t>(std::unique(v.begin(), v.end()) - v.begin());
}

struct Staged {
    std::uint32_t col = 0;
    float value = 0.0f;
};

// One gather pass over a sliced matrix. Slices are taken `cn` at a time by
// one warp; lanes split into thread groups of `dim` lanes, group g owning
// slice first+g. The group's nonzeros are staged interleaved
// (element j of group g at j*cn + g), so the j-th step of all groups reads
// one contiguous run. Features are gathered from rows of `row_stride`
// floats starting at column `col_offset`.
//
// `mac(row, col, value)` is invoked per nonzero in slice order, which keeps
// the summation order of every output element fixed.
template <class Mac>
void gather_pass(const SlicedCsr& m, std::uint32_t dim, std::uint32_t row_stride,
                 std::uint32_t col_offset, std::uint32_t cn, const ExecConfig& cfg,
                 AccessStats& st, Mac&& mac)
{
    const RowLoad load = row_load(dim, cfg);
    std::vector<Staged> staged;
    std::vector<std::uint64_t> sectors;
    std::vector<std::uint64_t> warp_work;

    for (std::size_t first = 0; first < m.n_slices(); first += cn) {
        const std::size_t groups = std::min<std::size_t>(cn, m.n_slices() - first);
        std::uint32_t iters = 0;
        for (std::size_t g = 0; g < groups; ++g) iters = std::max(iters, m.slice_nnz(first + g));

        // stage column indices and values, both contiguous in global memory
        const std::uint32_t base = m.slice_offsets[first];
        const std::uint32_t group_nnz = m.slice_offsets[first + groups] - base;
        staged.assign(static_cast<std::size_t>(iters) * cn, Staged{});
        for (std::size_t g = 0; g < groups; ++g) {
            const auto s = first + g;
            for (std::uint32_t j = 0; j < m.slice_nnz(s); ++j) {
                const auto e = m.slice_offsets[s] + j;
                staged[j * cn + g] = {m.col_indices[e], m.values[e]};
            }
        }
        const std::uint64_t idx_bytes = 4ull * group_nnz;
        st.adjacency_requests += 2 * ceil_div(idx_bytes, cfg.max_request_bytes);
        st.adjacency_transactions +=
            2 * (ceil_div((base * 4ull + idx_bytes), cfg.transaction_bytes) -
                 base * 4ull / cfg.transaction_bytes);

        for (std::uint32_t j = 0; j < iters; ++j) {
            sectors.clear();
            std::uint32_t active = 0;
            for (std::size_t g = 0; g < groups; ++g) {
                if (m.slice_nnz(first + g) <= j) continue;
                ++active;
                const auto col = staged[j * cn + g].col;
                touch_sectors(static_cast<std::uint64_t>(col) * row_stride + col_offset, dim,
                              cfg.transaction_bytes, sectors);
            }
            st.warp_iterations += 1;
            st.global_requests += load.requests;
            st.global_transactions += distinct_count(sectors);
            st.total_lane_slots += static_cast<std::uint64_t>(load.requests) * cfg.warp_width;
            st.active_lane_slots += load.active_lanes * active;
        }

        for (std::size_t g = 0; g < groups; ++g) {
            const auto s = first + g;
            const auto row = m.row_indices[s];
            for (std::uint32_t j = 0; j < m.slice_nnz(s); ++j) {
                const auto& e = staged[j * cn + g];
                mac(row, e.col, e.value);
            }
        }
        warp_work.push_back(group_nnz);
    }

    for (std::size_t w = 0; w < warp_work.size(); w += cfg.warps_per_block) {
        std::uint64_t sum = 0;
        for (std::size_t k = w; k < std::min(warp_work.size(), w + cfg.warps_per_block); ++k) {
            sum += warp_work[k];
        }
        st.per_block_work.push_back(sum);
    }
}

std::uint32_t effective_coalesce(std::uint32_t dim, const ExecConfig& cfg)
{
    const std::uint32_t cn = select_coalesce_num(dim, cfg);
    const std::uint32_t fit = dim == 0 ? 1 : std::max<std::uint32_t>(1, cfg.warp_width / dim);
    return std::min(cn, fit);
}

void check_dims(std::uint32_t total_dim, const ExecConfig& cfg)
{
    const std::uint64_t limit = static_cast<std::uint64_t>(max_vector_width(cfg)) * cfg.warp_width;
    if (total_dim > limit) {
        throw ConfigurationError("coalescent dimension " + std::to_string(total_dim) +
                                 " exceeds " + std::to_string(limit) + " floats; lower s_per");
    }
}

double cost_of(const AccessStats& st, const ExecConfig& cfg)
{
    return static_cast<double>(st.warp_iterations) * cfg.issue_cost +
           static_cast<double>(st.global_requests + st.adjacency_requests) * cfg.request_cost +
           static_cast<double>(st.global_transactions + st.adjacency_transactions) *
               cfg.transaction_cost;
}

// Epilogue: stream partial sums and self features once, write outputs.
double epilogue_cost(std::size_t node_count, std::uint32_t total_dim, const ExecConfig& cfg)
{
    const double per_row =
        3.0 * static_cast<double>(ceil_div(4ull * total_dim, cfg.transaction_bytes));
    return static_cast<double>(node_count) * per_row * cfg.transaction_cost;
}

std::vector<std::vector<std::uint32_t>> degrees_of(const OverlapDecomposition& d)
{
    std::vector<std::uint32_t> over(d.node_count, 0);
    for (std::size_t s = 0; s < d.a_over.n_slices(); ++s) {
        over[d.a_over.row_indices[s]] += d.a_over.slice_nnz(s);
    }
    std::vector<std::vector<std::uint32_t>> deg(d.s_per(), over);
    for (std::size_t i = 0; i < d.s_per(); ++i) {
        const auto& e = d.exclusives[i];
        for (std::size_t s = 0; s < e.n_slices(); ++s) deg[i][e.row_indices[s]] += e.slice_nnz(s);
    }
    return deg;
}

// Runs both passes; partial sums are produced only when `sums` is given.
AccessStats run_aggregation(const OverlapDecomposition& decomp, std::uint32_t dim,
                            const ExecConfig& cfg, const CoalescentFeatures* feats,
                            PartialSums* sums)
{
    cfg.validate();
    if (decomp.s_per() == 0) throw ArgumentError("decomposition holds no snapshots");
    if (dim == 0) throw ArgumentError("feature dimension must be positive");
    const auto s_per = static_cast<std::uint32_t>(decomp.s_per());
    const std::uint32_t total = dim * s_per;
    check_dims(total, cfg);

    const std::size_t n = decomp.node_count;
    AccessStats st;
    st.kernels = 1;

    if (sums) {
        sums->node_count = decomp.node_count;
        sums->dim = dim;
        sums->s_per = s_per;
        sums->overlap.assign(n * total, 0.0);
        sums->exclusive.assign(s_per, std::vector<double>(n * dim, 0.0));
        sums->degree = degrees_of(decomp);
    }
    const float* x = feats ? feats->data().data().data() : nullptr;

    const std::uint32_t cn_over = effective_coalesce(total, cfg);
    if (sums) {
        double* acc = sums->overlap.data();
        gather_pass(decomp.a_over, total, total, 0, cn_over, cfg, st,
                    [&](std::uint32_t row, std::uint32_t col, float v) {
                        double* out = acc + static_cast<std::size_t>(row) * total;
                        const float* in = x + static_cast<std::size_t>(col) * total;
                        for (std::uint32_t c = 0; c < total; ++c) {
                            out[c] += static_cast<double>(v) * static_cast<double>(in[c]);
                        }
                    });
    } else {
        gather_pass(decomp.a_over, total, total, 0, cn_over, cfg, st,
                    [](std::uint32_t, std::uint32_t, float) {});
    }

    const std::uint32_t cn_excl = effective_coalesce(dim, cfg);
    for (std::uint32_t i = 0; i < s_per; ++i) {
        const auto& m = decomp.exclusives[i];
        const std::uint32_t off = i * dim;
        if (sums) {
            double* acc = sums->exclusive[i].data();
            gather_pass(m, dim, total, off, cn_excl, cfg, st,
                        [&](std::uint32_t row, std::uint32_t col, float v) {
                            double* out = acc + static_cast<std::size_t>(row) * dim;
                            const float* in = x + static_cast<std::size_t>(col) * total + off;
                            for (std::uint32_t c = 0; c < dim; ++c) {
                                out[c] += static_cast<double>(v) * static_cast<double>(in[c]);
                            }
                        });
        } else {
            gather_pass(m, dim, total, off, cn_excl, cfg, st,
                        [](std::uint32_t, std::uint32_t, float) {});
        }
    }

    schedule_blocks(st, cfg.max_active_blocks);
    st.work_units = cost_of(st, cfg) + epilogue_cost(n, total, cfg);
    return st;
}

void check_features(const OverlapDecomposition& decomp, const CoalescentFeatures& feats)
{
    if (feats.s_per() != decomp.s_per()) {
        throw ArgumentError("coalescent features hold " + std::to_string(feats.s_per()) +
                            " snapshots, decomposition " + std::to_string(decomp.s_per()));
    }
    if (feats.node_count() != decomp.node_count) {
        throw ArgumentError("feature rows do not match node_count");
    }
}

}  // namespace

void ExecConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigurationError("exec config: " + what); };
    if (warp_width == 0) fail("warp_width must be positive");
    if (transaction_bytes == 0) fail("transaction_bytes must be positive");
    if (max_request_bytes < transaction_bytes) fail("max_request_bytes below transaction_bytes");
    if (vector_widths.empty()) fail("vector_widths is empty");
    for (auto w : vector_widths) {
        if (w == 0 || w % warp_width != 0) fail("vector widths must be multiples of warp_width");
    }
    if (coalesce_num > kMaxCoalesceNum) fail("coalesce_num must be at most 4");
    if (slice_cap == 0) fail("slice_cap must be positive");
    if (warps_per_block == 0) fail("warps_per_block must be positive");
    if (max_active_blocks == 0) fail("max_active_blocks must be positive");
    if (tile == 0) fail("tile must be positive");
    for (double c : {issue_cost, request_cost, transaction_cost}) {
        if (!std::isfinite(c) || c < 0) fail("cost weights must be finite and non-negative");
    }
}

std::uint32_t select_coalesce_num(std::uint32_t dim, const ExecConfig& cfg)
{
    if (cfg.coalesce_num != 0) return cfg.coalesce_num;
    for (std::uint32_t cn : {4u, 2u}) {
        if (static_cast<std::uint64_t>(cn) * dim <= cfg.warp_width) return cn;
    }
    return 1;
}

std::uint32_t select_vector_width(std::uint32_t dim, const ExecConfig& cfg)
{
    std::uint32_t best = 0;
    for (auto w : cfg.vector_widths) {
        if (dim <= w && (best == 0 || w < best)) best = w;
    }
    return best == 0 ? max_vector_width(cfg) : best;
}

AccessStats& AccessStats::operator+=(const AccessStats& o)
{
    global_requests += o.global_requests;
    global_transactions += o.global_transactions;
    adjacency_requests += o.adjacency_requests;
    adjacency_transactions += o.adjacency_transactions;
    warp_iterations += o.warp_iterations;
    active_lane_slots += o.active_lane_slots;
    total_lane_slots += o.total_lane_slots;
    kernels += o.kernels;
    work_units += o.work_units;
    per_block_work.insert(per_block_work.end(), o.per_block_work.begin(), o.per_block_work.end());
    balanced_time += o.balanced_time;
    actual_time += o.actual_time;
    return *this;
}

CoalescentFeatures CoalescentFeatures::coalesce(std::span<const DenseMatrix> per_snapshot)
{
    if (per_snapshot.empty()) throw ArgumentError("no feature matrices to coalesce");
    const auto n = per_snapshot.front().rows();
    const auto f = per_snapshot.front().cols();
    if (f == 0) throw ArgumentError("feature dimension must be positive");
    for (const auto& m : per_snapshot) {
        if (m.rows() != n || m.cols() != f) {
            throw ArgumentError("feature matrices in a partition must share their shape");
        }
    }
    CoalescentFeatures out;
    out.dim_ = static_cast<std::uint32_t>(f);
    out.s_per_ = static_cast<std::uint32_t>(per_snapshot.size());
    out.data_ = DenseMatrix(n, f * per_snapshot.size());
    for (std::size_t r = 0; r < n; ++r) {
        auto dst = out.data_.row(r);
        for (std::size_t i = 0; i < per_snapshot.size(); ++i) {
            auto src = per_snapshot[i].row(r);
            std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(i * f));
        }
    }
    return out;
}

DenseMatrix CoalescentFeatures::snapshot(std::size_t i) const
{
    if (i >= s_per_) throw ArgumentError("snapshot index out of range");
    DenseMatrix m(data_.rows(), dim_);
    for (std::size_t r = 0; r < data_.rows(); ++r) {
        auto src = data_.row(r).subspan(i * dim_, dim_);
        std::copy(src.begin(), src.end(), m.row(r).begin());
    }
    return m;
}

void GcnWeights::validate() const
{
    if (b.size() != w.cols()) throw ArgumentError("bias length must equal weight columns");
    for (float v : w.data()) {
        if (!std::isfinite(v)) throw ValidationError("weights must be finite");
    }
    for (float v : b) {
        if (!std::isfinite(v)) throw ValidationError("bias must be finite");
    }
}

DenseMatrix aggregate_reference(const Csr& adj, const DenseMatrix& features)
{
    if (features.rows() != adj.node_count) {
        throw ArgumentError("feature rows do not match node_count");
    }
    const auto f = features.cols();
    DenseMatrix out(features.rows(), f);
    std::vector<double> acc(f);
    for (std::uint32_t v = 0; v < adj.node_count; ++v) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (auto e = adj.row_offsets[v]; e < adj.row_offsets[v + 1]; ++e) {
            const double w = adj.values[e];
            auto x = features.row(adj.col_indices[e]);
            for (std::size_t c = 0; c < f; ++c) acc[c] += w * static_cast<double>(x[c]);
        }
        const double denom = static_cast<double>(adj.row_nnz(v)) + 1.0;
        auto self = features.row(v);
        auto dst = out.row(v);
        for (std::size_t c = 0; c < f; ++c) {
            dst[c] = static_cast<float>((acc[c] + static_cast<double>(self[c])) / denom);
        }
    }
    return out;
}

PartialSums aggregate_partials(const OverlapDecomposition& decomp,
                               const CoalescentFeatures& feats, const ExecConfig& cfg)
{
    check_features(decomp, feats);
    PartialSums sums;
    run_aggregation(decomp, feats.per_snapshot_dim(), cfg, &feats, &sums);
    return sums;
}

ParallelAggregation aggregate_parallel(const OverlapDecomposition& decomp,
                                       const CoalescentFeatures& feats, const ExecConfig& cfg)
{
    check_features(decomp, feats);
    PartialSums sums;
    ParallelAggregation result;
    result.stats = run_aggregation(decomp, feats.per_snapshot_dim(), cfg, &feats, &sums);

    const std::size_t n = decomp.node_count;
    const std::uint32_t f = sums.dim;
    const std::uint32_t total = f * sums.s_per;
    const auto& x = feats.data();
    result.outputs.reserve(sums.s_per);
    for (std::uint32_t i = 0; i < sums.s_per; ++i) {
        DenseMatrix out(n, f);
        const auto& excl = sums.exclusive[i];
        for (std::size_t v = 0; v < n; ++v) {
            const double denom = static_cast<double>(sums.degree[i][v]) + 1.0;
            const double* over = sums.overlap.data() + v * total + i * f;
            const double* ex = excl.data() + v * f;
            auto self = x.row(v).subspan(i * f, f);
            auto dst = out.row(v);
            for (std::uint32_t c = 0; c < f; ++c) {
                const double sum = (over[c] + ex[c]) + static_cast<double>(self[c]);
                dst[c] = static_cast<float>(sum / denom);
            }
        }
        result.outputs.push_back(std::move(out));
    }
    return result;
}

AccessStats model_aggregation(const OverlapDecomposition& decomp, std::uint32_t per_snapshot_dim,
                              const ExecConfig& cfg)
{
    return run_aggregation(decomp, per_snapshot_dim, cfg, nullptr, nullptr);
}

AccessStats transaction_trend(std::uint32_t dim, const ExecConfig& cfg, const Csr& adj,
                              const DenseMatrix& features)
{
    if (features.rows() != adj.node_count || features.cols() != dim) {
        throw ArgumentError("features must be node_count x F");
    }
    return model_row_per_warp(adj, dim, cfg);
}

AccessStats model_row_per_warp(const Csr& adj, std::uint32_t dim, const ExecConfig& cfg)
{
    cfg.validate();
    if (dim == 0) throw ArgumentError("feature dimension must be positive");
    AccessStats st;
    st.kernels = 1;
    // scalar lanes, one row per warp
    const std::uint64_t per_nz_requests = ceil_div(4ull * dim, cfg.max_request_bytes);
    const std::uint64_t lanes_per_request = cfg.max_request_bytes / 4;
    std::vector<std::uint64_t> sectors;
    std::vector<std::uint64_t> warp_work;
    for (std::uint32_t v = 0; v < adj.node_count; ++v) {
        // row bounds, then the row's indices and values
        st.adjacency_requests += 1;
        st.adjacency_transactions += 1;
        const auto nnz = adj.row_nnz(v);
        if (nnz > 0) {
            const std::uint64_t bytes = 4ull * nnz;
            st.adjacency_requests += 2 * ceil_div(bytes, cfg.max_request_bytes);
            st.adjacency_transactions += 2 * ceil_div(bytes, cfg.transaction_bytes);
        }
        for (auto e = adj.row_offsets[v]; e < adj.row_offsets[v + 1]; ++e) {
            sectors.clear();
            touch_sectors(static_cast<std::uint64_t>(adj.col_indices[e]) * dim, dim,
                          cfg.transaction_bytes, sectors);
            st.warp_iterations += per_nz_requests;
            st.global_requests += per_nz_requests;
            st.global_transactions += distinct_count(sectors);
            st.total_lane_slots += per_nz_requests * cfg.warp_width;
            st.active_lane_slots += std::min<std::uint64_t>(dim, per_nz_requests * lanes_per_request);
        }
        warp_work.push_back(nnz);
    }
    for (std::size_t w = 0; w < warp_work.size(); w += cfg.warps_per_block) {
        std::uint64_t sum = 0;
        for (std::size_t k = w; k < std::min(warp_work.size(), w + cfg.warps_per_block); ++k) {
            sum += warp_work[k];
        }
        st.per_block_work.push_back(sum);
    }
    schedule_blocks(st, cfg.max_active_blocks);
    st.work_units = cost_of(st, cfg) + epilogue_cost(adj.node_count, dim, cfg);
    return st;
}

UpdateCost model_update(std::size_t node_count, std::size_t s_per, std::size_t in_dim,
                        std::size_t out_dim, const ExecConfig& cfg, bool reuse_weights)
{
    cfg.validate();
    const std::uint64_t tiles = ceil_div(in_dim, cfg.tile) * ceil_div(out_dim, cfg.tile);
    UpdateCost cost;
    cost.weight_tile_loads = reuse_weights ? tiles : tiles * s_per;

    const std::uint64_t tile_txn = ceil_div(4ull * cfg.tile * cfg.tile, cfg.transaction_bytes);
    const std::uint64_t tile_req = ceil_div(4ull * cfg.tile * cfg.tile, cfg.max_request_bytes);
    const std::uint64_t macs = static_cast<std::uint64_t>(node_count) * s_per * in_dim * out_dim;
    // every column tile re-reads the input rows; outputs are written once
    const std::uint64_t row_txn =
        node_count * s_per *
        (ceil_div(4ull * in_dim, cfg.transaction_bytes) * ceil_div(out_dim, cfg.tile) +
         ceil_div(4ull * out_dim, cfg.transaction_bytes));
    cost.work_units = static_cast<double>(ceil_div(macs, cfg.warp_width)) * cfg.issue_cost +
                      static_cast<double>(cost.weight_tile_loads) *
                          (static_cast<double>(tile_req) * cfg.request_cost +
                           static_cast<double>(tile_txn) * cfg.transaction_cost) +
                      static_cast<double>(row_txn) * cfg.transaction_cost;
    return cost;
}

UpdateResult update_parallel(std::span<const DenseMatrix> agg, std::span<const GcnWeights> weights,
                             const ExecConfig& cfg, bool reuse_weights)
{
    cfg.validate();
    if (agg.empty()) throw ArgumentError("no aggregation results to update");
    if (weights.empty()) throw ArgumentError("no weights given");
    if (reuse_weights && weights.size() != 1) {
        throw ArgumentError("weight reuse needs one weight set shared by all snapshots");
    }
    if (!reuse_weights && weights.size() != 1 && weights.size() != agg.size()) {
        throw ArgumentError("per-snapshot weights must match the snapshot count");
    }
    const auto f_in = weights.front().in_dim();
    const auto f_out = weights.front().out_dim();
    for (const auto& w : weights) {
        w.validate();
        if (w.in_dim() != f_in || w.out_dim() != f_out) {
            throw ArgumentError("weight shapes differ across snapshots");
        }
    }
    const auto n = agg.front().rows();
    for (const auto& a : agg) {
        if (a.cols() != f_in) throw ArgumentError("aggregation width does not match weight rows");
        if (a.rows() != n) throw ArgumentError("aggregation results differ in row count");
    }

    const std::size_t s_per = agg.size();
    const std::size_t tile = cfg.tile;
    std::vector<std::vector<double>> acc(s_per, std::vector<double>(n * f_out, 0.0));

    auto apply_tile = [&](std::size_t i, std::size_t k0, std::size_t c0) {
        const auto& w = weights[weights.size() == 1 ? 0 : i].w;
        const auto k1 = std::min(f_in, k0 + tile);
        const auto c1 = std::min(f_out, c0 + tile);
        for (std::size_t r = 0; r < n; ++r) {
            auto a = agg[i].row(r);
            double* out = acc[i].data() + r * f_out;
            for (std::size_t k = k0; k < k1; ++k) {
                const double av = a[k];
                auto wr = w.row(k);
                for (std::size_t c = c0; c < c1; ++c) out[c] += av * static_cast<double>(wr[c]);
            }
        }
    };

    // Per output element the k order is ascending in both schedules, so
    // results do not depend on the reuse flag.
    if (reuse_weights) {
        for (std::size_t k0 = 0; k0 < f_in; k0 += tile) {
            for (std::size_t c0 = 0; c0 < f_out; c0 += tile) {
                for (std::size_t i = 0; i < s_per; ++i) apply_tile(i, k0, c0);
            }
        }
    } else {
        for (std::size_t i = 0; i < s_per; ++i) {
            for (std::size_t k0 = 0; k0 < f_in; k0 += tile) {
                for (std::size_t c0 = 0; c0 < f_out; c0 += tile) apply_tile(i, k0, c0);
            }
        }
    }

    UpdateResult result;
    const auto cost = model_update(n, s_per, f_in, f_out, cfg, reuse_weights);
    result.weight_tile_loads = cost.weight_tile_loads;
    result.work_units = cost.work_units;
    for (std::size_t i = 0; i < s_per; ++i) {
        const auto& b = weights[weights.size() == 1 ? 0 : i].b;
        DenseMatrix out(n, f_out);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < f_out; ++c) {
                out(r, c) = static_cast<float>(acc[i][r * f_out + c] + static_cast<double>(b[c]));
            }
        }
        result.outputs.push_back(std::move(out));
    }
    return result;
}

GcnLayerResult gcn_layer(const OverlapDecomposition& decomp, const CoalescentFeatures& feats,
                         std::span<const GcnWeights> weights, const ExecConfig& cfg,
                         bool reuse_weights)
{
    auto agg = aggregate_parallel(decomp, feats, cfg);
    auto upd = update_parallel(agg.outputs, weights, cfg, reuse_weights);
    GcnLayerResult layer;
    layer.hidden = std::move(upd.outputs);
    layer.aggregated = std::move(agg.outputs);
    layer.aggregation_stats = std::move(agg.stats);
    layer.weight_tile_loads = upd.weight_tile_loads;
    layer.work_units = layer.aggregation_stats.work_units + upd.work_units;
    return layer;
}

void schedule_blocks(AccessStats& st, std::uint32_t max_active_blocks)
{
    double balanced = 0.0;
    double actual = 0.0;
    const auto& work = st.per_block_work;
    for (std::size_t w = 0; w < work.size(); w += max_active_blocks) {
        const auto end = std::min(work.size(), w + max_active_blocks);
        std::uint64_t sum = 0;
        std::uint64_t peak = 0;
        for (std::size_t b = w; b < end; ++b) {
            sum += work[b];
            peak = std::max(peak, work[b]);
        }
        balanced += static_cast<double>(ceil_div(sum, end - w));
        actual += static_cast<double>(peak);
    }
    st.balanced_time = balanced;
    st.actual_time = actual;
}

AccessStats load_balance_report(const Csr& adj, const ExecConfig& cfg)
{
    cfg.validate();
    AccessStats st;
    for (std::uint32_t v = 0; v < adj.node_count; v += cfg.warps_per_block) {
        std::uint64_t sum = 0;
        const auto end = std::min<std::uint64_t>(adj.node_count, std::uint64_t{v} + cfg.warps_per_block);
        for (auto r = v; r < end; ++r) sum += adj.row_nnz(r);
        st.per_block_work.push_back(sum);
    }
    schedule_blocks(st, cfg.max_active_blocks);
    return st;
}

AccessStats load_balance_report(const SlicedCsr& adj, const ExecConfig& cfg)
{
    cfg.validate();
    AccessStats st;
    const std::size_t cn = cfg.coalesce_num == 0 ? 1 : cfg.coalesce_num;
    const std::size_t per_block = cn * cfg.warps_per_block;
    for (std::size_t s = 0; s < adj.n_slices(); s += per_block) {
        const auto end = std::min(adj.n_slices(), s + per_block);
        st.per_block_work.push_back(adj.slice_offsets[end] - adj.slice_offsets[s]);
    }
    schedule_blocks(st, cfg.max_active_blocks);
    return st;
}

}  // namespace pipad
