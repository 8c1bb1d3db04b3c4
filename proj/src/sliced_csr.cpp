#include "pipad/sliced_csr.hpp"

#include <algorithm>
#include <string>

#include "pipad/binary_io.hpp"
#include "pipad/errors.hpp"

namespace pipad {

namespace {

[[noreturn]] void invalid(const std::string& what)
{
    throw ValidationError(what);
}

}  // namespace

void Csr::validate() const
{
    if (row_offsets.size() != static_cast<std::size_t>(node_count) + 1) {
        invalid("csr: row_offsets length must be node_count + 1");
    }
    if (row_offsets.front() != 0) invalid("csr: row_offsets[0] must be 0");
    if (row_offsets.back() != col_indices.size()) {
        invalid("csr: row_offsets[last] must equal nnz");
    }
    if (values.size() != col_indices.size()) {
        invalid("csr: values and col_indices differ in length");
    }
    for (std::uint32_t r = 0; r < node_count; ++r) {
        if (row_offsets[r] > row_offsets[r + 1]) {
            invalid("csr: row_offsets decreases at row " + std::to_string(r));
        }
        for (auto k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            if (col_indices[k] >= node_count) {
                invalid("csr: column index out of range in row " + std::to_string(r));
            }
            if (k > row_offsets[r] && col_indices[k] <= col_indices[k - 1]) {
                invalid("csr: column indices not strictly increasing in row " +
                        std::to_string(r));
            }
        }
    }
}

std::vector<Edge> Csr::edges() const
{
    std::vector<Edge> out;
    out.reserve(nnz());
    for (std::uint32_t r = 0; r < node_count; ++r) {
        for (auto k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            out.push_back({r, col_indices[k], values[k]});
        }
    }
    return out;
}

Csr Csr::empty(std::uint32_t node_count)
{
    Csr c;
    c.node_count = node_count;
    c.row_offsets.assign(static_cast<std::size_t>(node_count) + 1, 0);
    return c;
}

Csr Csr::from_edges(std::uint32_t node_count, std::vector<Edge> edges)
{
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    Csr c = empty(node_count);
    c.col_indices.reserve(edges.size());
    c.values.reserve(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (e.src >= node_count || e.dst >= node_count) {
            throw BoundsError("edge (" + std::to_string(e.src) + ", " +
                              std::to_string(e.dst) + ") outside node_count " +
                              std::to_string(node_count));
        }
        if (i > 0 && edges[i - 1].src == e.src && edges[i - 1].dst == e.dst) {
            invalid("duplicate edge (" + std::to_string(e.src) + ", " +
                    std::to_string(e.dst) + ")");
        }
        ++c.row_offsets[e.src + 1];
        c.col_indices.push_back(e.dst);
        c.values.push_back(e.weight);
    }
    for (std::uint32_t r = 0; r < node_count; ++r) {
        c.row_offsets[r + 1] += c.row_offsets[r];
    }
    return c;
}

void SlicedCsr::validate(std::uint32_t node_count) const
{
    if (slice_cap == 0) invalid("sliced: slice_cap must be >= 1");
    if (slice_offsets.size() != row_indices.size() + 1) {
        invalid("sliced: slice_offsets length must be n_slices + 1");
    }
    if (slice_offsets.front() != 0) invalid("sliced: slice_offsets[0] must be 0");
    if (slice_offsets.back() != col_indices.size()) {
        invalid("sliced: slice_offsets[last] must equal nnz");
    }
    if (values.size() != col_indices.size()) {
        invalid("sliced: values and col_indices differ in length");
    }
    for (std::size_t s = 0; s < n_slices(); ++s) {
        const auto begin = slice_offsets[s];
        const auto end = slice_offsets[s + 1];
        if (end <= begin) invalid("sliced: empty slice " + std::to_string(s));
        if (end - begin > slice_cap) {
            invalid("sliced: slice " + std::to_string(s) + " exceeds slice_cap");
        }
        if (node_count != 0 && row_indices[s] >= node_count) {
            throw BoundsError("sliced: row index out of range in slice " + std::to_string(s));
        }
        const bool continues_row = s > 0 && row_indices[s - 1] == row_indices[s];
        if (s > 0 && row_indices[s - 1] > row_indices[s]) {
            invalid("sliced: row_indices decreases at slice " + std::to_string(s));
        }
        if (continues_row) {
            if (slice_nnz(s - 1) != slice_cap) {
                invalid("sliced: non-final slice of row " + std::to_string(row_indices[s]) +
                        " is not full");
            }
            if (col_indices[begin] <= col_indices[begin - 1]) {
                invalid("sliced: column order broken across slices of row " +
                        std::to_string(row_indices[s]));
            }
        }
        for (auto k = begin; k < end; ++k) {
            if (node_count != 0 && col_indices[k] >= node_count) {
                throw BoundsError("sliced: column index out of range in slice " +
                                  std::to_string(s));
            }
            if (k > begin && col_indices[k] <= col_indices[k - 1]) {
                invalid("sliced: column indices not strictly increasing in slice " +
                        std::to_string(s));
            }
        }
    }
}

std::size_t count_slices(const Csr& csr, std::uint32_t slice_cap)
{
    if (slice_cap == 0) throw ArgumentError("slice_cap must be >= 1");
    std::size_t n = 0;
    for (std::uint32_t r = 0; r < csr.node_count; ++r) {
        n += (csr.row_nnz(r) + slice_cap - 1) / slice_cap;
    }
    return n;
}

SlicedCsr slice_from_csr(const Csr& csr, std::uint32_t slice_cap)
{
    if (slice_cap == 0) throw ArgumentError("slice_cap must be >= 1");
    csr.validate();
    SlicedCsr s;
    s.slice_cap = slice_cap;
    s.col_indices = csr.col_indices;
    s.values = csr.values;
    const auto n_slices = count_slices(csr, slice_cap);
    s.row_indices.reserve(n_slices);
    s.slice_offsets.reserve(n_slices + 1);
    for (std::uint32_t r = 0; r < csr.node_count; ++r) {
        for (auto k = csr.row_offsets[r]; k < csr.row_offsets[r + 1]; k += slice_cap) {
            s.row_indices.push_back(r);
            s.slice_offsets.push_back(std::min(k + slice_cap, csr.row_offsets[r + 1]));
        }
    }
    return s;
}

Csr to_csr(const SlicedCsr& sliced, std::uint32_t node_count)
{
    sliced.validate(node_count);
    Csr c = Csr::empty(node_count);
    c.col_indices = sliced.col_indices;
    c.values = sliced.values;
    for (std::size_t s = 0; s < sliced.n_slices(); ++s) {
        c.row_offsets[sliced.row_indices[s] + 1] += sliced.slice_nnz(s);
    }
    for (std::uint32_t r = 0; r < node_count; ++r) {
        c.row_offsets[r + 1] += c.row_offsets[r];
    }
    return c;
}

std::size_t storage_cost(StorageFormat format, std::size_t nnz, std::size_t node_count,
                         std::size_t n_slices)
{
    switch (format) {
    case StorageFormat::csr:
        return 2 * nnz + node_count + 1;
    case StorageFormat::sliced:
        return 2 * nnz + 2 * n_slices + 1;
    case StorageFormat::coo:
        return 3 * nnz;
    }
    return 0;
}

std::vector<char> serialize(const SlicedCsr& sliced)
{
    io::ByteWriter w;
    w.raw("SCSR");
    w.u32(kScsrVersion);
    w.u32(sliced.slice_cap);
    w.u64(sliced.n_slices());
    w.u64(sliced.nnz());
    w.u32s(sliced.row_indices);
    w.u32s(sliced.slice_offsets);
    w.u32s(sliced.col_indices);
    w.f32s(sliced.values);
    return w.bytes();
}

SlicedCsr deserialize_sliced(std::span<const char> bytes)
{
    io::ByteReader r(bytes);
    if (r.raw(4) != "SCSR") invalid("not an SCSR container (bad magic)");
    if (const auto version = r.u32(); version != kScsrVersion) {
        invalid("unsupported SCSR version " + std::to_string(version));
    }
    SlicedCsr s;
    s.slice_cap = r.u32();
    const auto n_slices = r.u64();
    const auto nnz = r.u64();
    if (n_slices > r.remaining() / 4 || nnz > r.remaining() / 8) {
        invalid("SCSR header sizes exceed payload");
    }
    s.row_indices = r.u32s(n_slices);
    s.slice_offsets = r.u32s(n_slices + 1);
    s.col_indices = r.u32s(nnz);
    s.values = r.f32s(nnz);
    if (!r.at_end()) invalid("trailing bytes after SCSR payload");
    s.validate();
    return s;
}

}  // namespace pipad
