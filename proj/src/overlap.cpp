#include "pipad/overlap.hpp"

#include <algorithm>
#include <string>

#include "pipad/errors.hpp"

namespace pipad {

namespace {

void check_same_node_count(std::span<const Csr> snapshots)
{
    if (snapshots.empty()) throw ArgumentError("decompose needs at least one snapshot");
    for (const auto& s : snapshots) {
        if (s.node_count != snapshots.front().node_count) {
            throw ArgumentError("snapshots in a group must share node_count");
        }
    }
}

// Row-wise builder appending (col, value) in column order.
struct CsrBuilder {
    Csr csr;

    explicit CsrBuilder(std::uint32_t n) : csr(Csr::empty(n)) {}
    void push(std::uint32_t col, float value)
    {
        csr.col_indices.push_back(col);
        csr.values.push_back(value);
    }
    void end_row(std::uint32_t row)
    {
        csr.row_offsets[row + 1] = static_cast<std::uint32_t>(csr.col_indices.size());
    }
};

}  // namespace

std::size_t OverlapDecomposition::shipped_bytes() const
{
    std::size_t entries = a_over.nnz() > 0 ? storage_cost(a_over) : 0;
    for (const auto& e : exclusives) {
        if (e.nnz() > 0) entries += storage_cost(e);
    }
    return entries * sizeof(float);
}

OverlapDecomposition decompose(std::span<const Csr> snapshots, std::uint32_t slice_cap,
                               std::size_t first_snapshot)
{
    check_same_node_count(snapshots);
    const auto n = snapshots.front().node_count;
    const auto k = snapshots.size();

    CsrBuilder over(n);
    std::vector<CsrBuilder> excl(k, CsrBuilder(n));
    std::vector<std::uint32_t> head(k);
    std::vector<std::uint32_t> shared_cols;

    for (std::uint32_t r = 0; r < n; ++r) {
        // k-way sorted intersection of the row's column streams
        shared_cols.clear();
        for (std::size_t i = 0; i < k; ++i) head[i] = snapshots[i].row_offsets[r];
        for (;;) {
            bool exhausted = false;
            std::uint32_t target = 0;
            for (std::size_t i = 0; i < k; ++i) {
                if (head[i] == snapshots[i].row_offsets[r + 1]) {
                    exhausted = true;
                    break;
                }
                target = std::max(target, snapshots[i].col_indices[head[i]]);
            }
            if (exhausted) break;
            bool all_match = true;
            for (std::size_t i = 0; i < k; ++i) {
                const auto end = snapshots[i].row_offsets[r + 1];
                while (head[i] < end && snapshots[i].col_indices[head[i]] < target) ++head[i];
                if (head[i] == end || snapshots[i].col_indices[head[i]] != target) {
                    all_match = false;
                }
            }
            if (!all_match) continue;
            const float w = snapshots[0].values[head[0]];
            bool same_weight = true;
            for (std::size_t i = 1; i < k; ++i) {
                same_weight = same_weight && snapshots[i].values[head[i]] == w;
            }
            if (same_weight) {
                over.push(target, w);
                shared_cols.push_back(target);
            }
            for (auto& h : head) ++h;
        }
        over.end_row(r);

        for (std::size_t i = 0; i < k; ++i) {
            const auto& s = snapshots[i];
            auto shared = shared_cols.begin();
            for (auto p = s.row_offsets[r]; p < s.row_offsets[r + 1]; ++p) {
                const auto c = s.col_indices[p];
                while (shared != shared_cols.end() && *shared < c) ++shared;
                if (shared != shared_cols.end() && *shared == c) continue;
                excl[i].push(c, s.values[p]);
            }
            excl[i].end_row(r);
        }
    }

    OverlapDecomposition d;
    d.node_count = n;
    d.first_snapshot = first_snapshot;
    d.a_over = slice_from_csr(over.csr, slice_cap);
    d.exclusives.reserve(k);
    for (auto& b : excl) d.exclusives.push_back(slice_from_csr(b.csr, slice_cap));
    return d;
}

OverlapDecomposition decompose(std::span<const SlicedCsr> snapshots, std::uint32_t node_count,
                               std::uint32_t slice_cap, std::size_t first_snapshot)
{
    std::vector<Csr> csr;
    csr.reserve(snapshots.size());
    for (const auto& s : snapshots) csr.push_back(to_csr(s, node_count));
    return decompose(csr, slice_cap, first_snapshot);
}

OverlapDecomposition undecomposed(std::span<const Csr> snapshots, std::uint32_t slice_cap,
                                  std::size_t first_snapshot)
{
    check_same_node_count(snapshots);
    OverlapDecomposition d;
    d.node_count = snapshots.front().node_count;
    d.first_snapshot = first_snapshot;
    d.a_over = slice_from_csr(Csr::empty(d.node_count), slice_cap);
    for (const auto& s : snapshots) d.exclusives.push_back(slice_from_csr(s, slice_cap));
    return d;
}

std::size_t plain_shipped_bytes(std::span<const Csr> snapshots, std::uint32_t slice_cap)
{
    std::size_t entries = 0;
    for (const auto& s : snapshots) {
        if (s.nnz() > 0) {
            entries += storage_cost(StorageFormat::sliced, s.nnz(), s.node_count,
                                    count_slices(s, slice_cap));
        }
    }
    return entries * sizeof(float);
}

namespace {

struct SetCounts {
    std::size_t intersection = 0;
    std::size_t unite = 0;
};

SetCounts count_sets(std::span<const Csr* const> snapshots)
{
    SetCounts counts;
    const auto k = snapshots.size();
    std::vector<std::uint32_t> cols;
    for (std::uint32_t r = 0; r < snapshots.front()->node_count; ++r) {
        cols.clear();
        for (const auto* s : snapshots) {
            cols.insert(cols.end(), s->col_indices.begin() + s->row_offsets[r],
                        s->col_indices.begin() + s->row_offsets[r + 1]);
        }
        std::sort(cols.begin(), cols.end());
        for (std::size_t i = 0; i < cols.size();) {
            std::size_t j = i;
            while (j < cols.size() && cols[j] == cols[i]) ++j;
            ++counts.unite;
            if (j - i == k) ++counts.intersection;
            i = j;
        }
    }
    return counts;
}

}  // namespace

double topology_overlap(const Csr& a, const Csr& b)
{
    if (a.node_count != b.node_count) throw ArgumentError("node_count mismatch");
    const Csr* pair[] = {&a, &b};
    const auto c = count_sets(pair);
    return c.unite == 0 ? 1.0 : static_cast<double>(c.intersection) / static_cast<double>(c.unite);
}

double shared_fraction(const Csr& a, const Csr& b)
{
    if (a.node_count != b.node_count) throw ArgumentError("node_count mismatch");
    const Csr* pair[] = {&a, &b};
    const auto c = count_sets(pair);
    return a.nnz() == 0 ? 1.0 : static_cast<double>(c.intersection) / static_cast<double>(a.nnz());
}

OverlapStats overlap_rate(std::span<const Csr> snapshots, std::uint32_t slice_cap)
{
    if (snapshots.size() < 2) throw ArgumentError("overlap_rate needs at least two snapshots");
    check_same_node_count(snapshots);
    OverlapStats stats;
    for (std::size_t i = 0; i + 1 < snapshots.size(); ++i) {
        stats.pairwise_rates.push_back(topology_overlap(snapshots[i], snapshots[i + 1]));
    }
    std::vector<const Csr*> group;
    for (const auto& s : snapshots) group.push_back(&s);
    const auto all = count_sets(group);
    stats.partition_rate =
        all.unite == 0 ? 1.0 : static_cast<double>(all.intersection) / static_cast<double>(all.unite);
    const auto d = decompose(snapshots, slice_cap);
    if (d.a_over.nnz() > 0) {
        stats.bytes_saved = (snapshots.size() - 1) * storage_cost(d.a_over) * sizeof(float);
    }
    return stats;
}

DecompositionMemo::Value DecompositionMemo::find(const Key& key) const
{
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : it->second;
}

DecompositionMemo::Value DecompositionMemo::insert(Key key, OverlapDecomposition decomposition)
{
    if (frozen_) throw ArgumentError("decomposition memo is frozen");
    auto value = std::make_shared<const OverlapDecomposition>(std::move(decomposition));
    entries_.insert_or_assign(std::move(key), value);
    return value;
}

DecompositionMemo::Value DecompositionMemo::get_or_compute(
    const Key& key, const std::function<OverlapDecomposition()>& make)
{
    if (auto hit = find(key)) return hit;
    return insert(key, make());
}

}  // namespace pipad
