#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pipad/dense.hpp"
#include "pipad/sliced_csr.hpp"

namespace pipad {

/// Feature dimensions used for small- and large-scale graphs.
inline constexpr std::uint32_t kSmallGraphFeatureDim = 16;
inline constexpr std::uint32_t kLargeGraphFeatureDim = 2;

struct Snapshot {
    std::uint32_t timestep = 0;
    Csr adjacency;
    DenseMatrix features;

    std::uint32_t node_count() const noexcept { return adjacency.node_count; }
    std::uint32_t feature_dim() const noexcept
    {
        return static_cast<std::uint32_t>(features.cols());
    }
};

/// Discrete-time dynamic graph: snapshots at timesteps 0, 1, 2, ... over a
/// fixed vertex set and feature width.
struct SnapshotSequence {
    std::vector<Snapshot> snapshots;
    std::string interval_meta;

    std::size_t length() const noexcept { return snapshots.size(); }
    bool empty() const noexcept { return snapshots.empty(); }
    std::uint32_t node_count() const;
    std::uint32_t feature_dim() const;
    const Snapshot& operator[](std::size_t t) const { return snapshots[t]; }

    void validate() const;

    friend bool operator==(const SnapshotSequence& a, const SnapshotSequence& b);
};

/// Sliding window of `size` consecutive snapshots starting at `start`.
struct Frame {
    std::size_t start = 0;
    std::size_t size = 0;
    std::size_t stride = 1;

    std::size_t end() const noexcept { return start + size; }
    bool contains(std::size_t t) const noexcept { return t >= start && t < end(); }

    friend bool operator==(const Frame&, const Frame&) = default;
};

/// Contiguous group of snapshots inside a frame processed together.
struct Partition {
    Frame frame;
    std::size_t first = 0;
    std::size_t count = 0;

    std::size_t s_per() const noexcept { return count; }
    std::size_t end() const noexcept { return first + count; }
    std::vector<std::size_t> snapshot_indices() const;

    friend bool operator==(const Partition&, const Partition&) = default;
};

/// Frames at starts 0, stride, 2*stride, ... while start + size <= length.
std::vector<Frame> frames(std::size_t length, std::size_t size, std::size_t stride = 1);

/// Splits a frame into consecutive partitions of `s_per` snapshots; the
/// last one is shorter when `s_per` does not divide the frame.
std::vector<Partition> partitions(const Frame& frame, std::size_t s_per);

enum class FeatureSource { file, constant, random_seeded };

struct FeatureSpec {
    FeatureSource source = FeatureSource::random_seeded;
    std::uint32_t dim = kSmallGraphFeatureDim;
    std::uint64_t seed = 0;
    std::filesystem::path path;  // only for FeatureSource::file
};

struct IngestOptions {
    std::uint32_t node_count = 0;
    std::uint64_t interval = 1;
    std::uint32_t edge_life = 1;
    // Sequence length; defaults to one past the last populated bucket.
    // Events in buckets at or beyond an explicit count are dropped.
    std::optional<std::size_t> bucket_count;
    FeatureSpec features;
};

/// Reads `src dst timestamp [weight]` lines. Lines that are blank or start
/// with '#' or '%' are skipped.
SnapshotSequence ingest_temporal_edges(const std::filesystem::path& path,
                                       const IngestOptions& options);
SnapshotSequence ingest_temporal_edges(std::istream& in, const IngestOptions& options);

struct SyntheticParams {
    std::uint32_t node_count = 1000;
    std::size_t base_edges = 5000;
    std::size_t steps = 16;
    double churn_rate = 0.1;
    std::uint64_t seed = 0;
    std::uint32_t feature_dim = kSmallGraphFeatureDim;
};

/// Seeded evolving graph: snapshot 0 holds `base_edges` random edges, each
/// later snapshot swaps floor(churn_rate * base_edges) of them for fresh
/// ones.
SnapshotSequence generate_synthetic(const SyntheticParams& params);

/// Seeded static graph with about `edges` distinct unit-weight edges. With
/// skew > 0 row degrees follow (rank + 1)^-skew over a shuffled row order,
/// which gives a power-law degree profile; skew 0 spreads edges uniformly.
Csr random_graph(std::uint32_t node_count, std::size_t edges, double skew, std::uint64_t seed);

/// Seeded features in [0, 1) for one timestep.
DenseMatrix random_features(std::uint32_t node_count, std::uint32_t dim,
                            std::uint64_t seed, std::uint32_t timestep);

/// Dense feature file: node_count and F as u64 little endian, then
/// row-major f32 values.
DenseMatrix read_feature_file(const std::filesystem::path& path);
std::vector<char> encode_feature_file(const DenseMatrix& features);

/// Writes `snap_<t>.bin` per snapshot plus `manifest.json`.
void write_sequence(const SnapshotSequence& seq, const std::filesystem::path& dir);
SnapshotSequence read_sequence(const std::filesystem::path& dir);

std::vector<char> encode_snapshot(const Snapshot& snapshot);
Snapshot decode_snapshot(std::span<const char> bytes, std::uint32_t timestep);

}  // namespace pipad
