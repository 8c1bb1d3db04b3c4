#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pipad {

using node_id = std::uint32_t;

struct Edge {
    node_id src = 0;
    node_id dst = 0;
    float weight = 1.0f;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Square adjacency in compressed sparse row form. Row `v` lists the
/// neighbours `v` aggregates from, columns strictly increasing.
struct Csr {
    std::uint32_t node_count = 0;
    std::vector<std::uint32_t> row_offsets{0};
    std::vector<node_id> col_indices;
    std::vector<float> values;

    std::size_t nnz() const noexcept { return col_indices.size(); }
    std::uint32_t row_nnz(std::uint32_t row) const
    {
        return row_offsets[row + 1] - row_offsets[row];
    }

    /// Throws ValidationError naming the first violated condition.
    void validate() const;

    std::vector<Edge> edges() const;

    /// Empty matrix over `node_count` vertices.
    static Csr empty(std::uint32_t node_count);

    /// Builds from an edge list in any order; duplicate (src, dst) pairs
    /// are rejected.
    static Csr from_edges(std::uint32_t node_count, std::vector<Edge> edges);

    friend bool operator==(const Csr&, const Csr&) = default;
};

/// Slice-partitioned CSR. Each row is cut into runs of at most `slice_cap`
/// nonzeros; `row_indices[s]` names the row of slice `s` and
/// `slice_offsets[s]` its first element in `col_indices` / `values`.
struct SlicedCsr {
    std::uint32_t slice_cap = 32;
    std::vector<std::uint32_t> row_indices;
    std::vector<std::uint32_t> slice_offsets{0};
    std::vector<node_id> col_indices;
    std::vector<float> values;

    std::size_t n_slices() const noexcept { return row_indices.size(); }
    std::size_t nnz() const noexcept { return col_indices.size(); }
    std::uint32_t slice_nnz(std::size_t s) const
    {
        return slice_offsets[s + 1] - slice_offsets[s];
    }

    /// Checks every structural invariant; `node_count`, when nonzero, also
    /// bounds row and column ids.
    void validate(std::uint32_t node_count = 0) const;

    friend bool operator==(const SlicedCsr&, const SlicedCsr&) = default;
};

/// Greedy packing: every slice of a row is full except possibly the last,
/// empty rows produce no slices.
SlicedCsr slice_from_csr(const Csr& csr, std::uint32_t slice_cap);

Csr to_csr(const SlicedCsr& sliced, std::uint32_t node_count);

/// Number of slices `slice_from_csr` would produce, without building them.
std::size_t count_slices(const Csr& csr, std::uint32_t slice_cap);

enum class StorageFormat { csr, sliced, coo };

/// Array entries needed to store a matrix in `format`:
///   sliced: 2*nnz + 2*slices + 1, csr: 2*nnz + vertices + 1, coo: 3*nnz.
std::size_t storage_cost(StorageFormat format, std::size_t nnz,
                         std::size_t node_count, std::size_t n_slices);

inline std::size_t storage_cost(const SlicedCsr& s)
{
    return storage_cost(StorageFormat::sliced, s.nnz(), 0, s.n_slices());
}

inline constexpr std::uint32_t kScsrVersion = 1;

/// `SCSR` container: magic, version u32, slice_cap u32, n_slices u64,
/// nnz u64, then RI, SO, column indices and values, all little endian.
std::vector<char> serialize(const SlicedCsr& sliced);
SlicedCsr deserialize_sliced(std::span<const char> bytes);

}  // namespace pipad
