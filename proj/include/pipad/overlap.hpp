#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "pipad/sliced_csr.hpp"

namespace pipad {

/// Shared adjacency plus per-snapshot remainders for one snapshot group.
/// For every member i, edges(a_over) and edges(exclusives[i]) are disjoint
/// and their union is exactly the edge set of snapshot i.
struct OverlapDecomposition {
    std::uint32_t node_count = 0;
    std::size_t first_snapshot = 0;  // timeline index of exclusives[0]
    SlicedCsr a_over;
    std::vector<SlicedCsr> exclusives;

    std::size_t s_per() const noexcept { return exclusives.size(); }

    /// Bytes shipped host-to-device: every non-empty matrix in sliced form
    /// at four bytes per array entry.
    std::size_t shipped_bytes() const;
};

/// Edges present in every snapshot with identical weight go to `a_over`;
/// everything else stays in the owning snapshot's exclusive part.
OverlapDecomposition decompose(std::span<const Csr> snapshots, std::uint32_t slice_cap,
                               std::size_t first_snapshot = 0);
OverlapDecomposition decompose(std::span<const SlicedCsr> snapshots, std::uint32_t node_count,
                               std::uint32_t slice_cap, std::size_t first_snapshot = 0);

/// Decomposition with an empty shared part: each snapshot ships whole.
OverlapDecomposition undecomposed(std::span<const Csr> snapshots, std::uint32_t slice_cap,
                                  std::size_t first_snapshot = 0);

/// Bytes of shipping each snapshot whole in sliced form.
std::size_t plain_shipped_bytes(std::span<const Csr> snapshots, std::uint32_t slice_cap);

struct OverlapStats {
    std::vector<double> pairwise_rates;  // IoU of (i, i+1)
    double partition_rate = 1.0;         // |intersection| / |union| over all
    std::uint64_t bytes_saved = 0;
};

/// Topology intersection-over-union of two edge sets (weights ignored).
/// Two empty sets count as identical.
double topology_overlap(const Csr& a, const Csr& b);

/// |E_a and E_b| / |E_a|: the share of `a`'s edges that survive into `b`.
double shared_fraction(const Csr& a, const Csr& b);

/// Group overlap statistics; needs at least two snapshots.
OverlapStats overlap_rate(std::span<const Csr> snapshots, std::uint32_t slice_cap = 32);

/// Decompositions keyed by snapshot-index set. Filled once by the
/// preparation stage, then frozen and shared read-only.
class DecompositionMemo {
public:
    using Key = std::vector<std::size_t>;
    using Value = std::shared_ptr<const OverlapDecomposition>;

    Value find(const Key& key) const;
    Value insert(Key key, OverlapDecomposition decomposition);
    Value get_or_compute(const Key& key, const std::function<OverlapDecomposition()>& make);

    void freeze() noexcept { frozen_ = true; }
    bool frozen() const noexcept { return frozen_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<Key, Value> entries_;
    bool frozen_ = false;
};

}  // namespace pipad
