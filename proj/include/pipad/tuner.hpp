#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pipad/dtdg.hpp"
#include "pipad/kernel.hpp"
#include "pipad/overlap.hpp"

namespace pipad {

inline const std::vector<std::uint32_t> kDefaultCandidates{1, 2, 4, 8};
inline constexpr double kReservedOverhead = 0.05;

struct MachineConstants {
    double transfer_bandwidth = 1.0;  // bytes per time unit
    double transfer_latency = 0.0;    // time units per transfer
};

/// Offline speedup table. OR targets are bucket centres; a value belongs to
/// the bucket of the nearest target (ties to the lower one), so the buckets
/// partition [0, 1]. Dimensions use the same nearest rule.
struct TunerProfile {
    struct Key {
        std::size_t or_index = 0;
        std::uint32_t dim = 0;
        std::uint32_t s_per = 0;
        friend auto operator<=>(const Key&, const Key&) = default;
    };
    struct Entry {
        double speedup = 1.0;
        std::uint32_t samples = 0;
    };

    std::vector<double> or_targets;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint32_t> candidates;
    std::map<Key, Entry> table;
    MachineConstants machine;

    bool empty() const noexcept { return table.empty(); }
    /// Lower and upper edges of each OR bucket.
    std::vector<std::pair<double, double>> or_buckets() const;
    std::size_t or_bucket(double or_value) const;
    std::uint32_t dim_bucket(std::uint32_t dim) const;
    void validate() const;
};

std::string to_json(const TunerProfile& profile);
TunerProfile profile_from_json(const std::string& text);
void save_profile(const TunerProfile& profile, const std::filesystem::path& path);
TunerProfile load_profile(const std::filesystem::path& path);

/// Statistics of one frame gathered during the preparing epochs.
struct FrameObservation {
    std::vector<std::uint64_t> per_snapshot_bytes;
    std::vector<double> per_snapshot_compute;
    std::uint64_t peak_mem_one_snapshot = 0;
    std::uint64_t aggregation_bytes_per_snapshot = 0;  // one cacheable result
    std::uint32_t feature_dim = 0;
    OverlapStats frame_or_stats;

    // Measured per candidate, one value per partition in frame order.
    std::map<std::uint32_t, std::vector<std::uint64_t>> partition_bytes;
    std::map<std::uint32_t, std::vector<double>> partition_compute;

    double frame_or() const noexcept { return frame_or_stats.partition_rate; }
};

/// Largest candidate N with N * peak <= device_total * (1 - reserved).
std::uint32_t memory_upper_bound(const FrameObservation& obs, std::uint64_t device_total,
                                 std::span<const std::uint32_t> candidates = kDefaultCandidates,
                                 double reserved_overhead = kReservedOverhead);

/// Nearest-bucket lookup; s_per 1 is 1.0 by construction. A bucket without
/// an entry falls back to the nearest populated OR bucket of the same
/// (dim, s_per), then to the nearest populated dimension.
double estimate_speedup(const TunerProfile& profile, double or_value, std::uint32_t dim,
                        std::uint32_t s_per);

enum class RejectReason { oom, pipeline_stall };
const char* to_string(RejectReason reason) noexcept;

struct CandidateEval {
    std::uint32_t s_per = 0;
    double speedup = 1.0;
    double estimated_latency = 0.0;
    double worst_transfer = 0.0;     // slowest partition transfer
    double tightest_window = 0.0;    // compute it has to hide behind
    bool stall_free = true;
    bool fits = true;
};

struct TunerDecision {
    std::uint32_t s_per = 1;
    std::uint64_t device_reuse_bytes = 0;
    std::uint32_t upper_bound = 1;
    std::vector<std::pair<std::uint32_t, RejectReason>> rejected;
    std::vector<CandidateEval> evaluated;
};

struct DecideOptions {
    double reserved_overhead = kReservedOverhead;
    bool reuse = true;
};

TunerDecision decide(const Frame& frame, const FrameObservation& obs, const TunerProfile& profile,
                     std::uint64_t device_total,
                     std::span<const std::uint32_t> candidates = kDefaultCandidates,
                     const DecideOptions& options = {});

/// Human-readable rationale of a decision.
std::string explain(const Frame& frame, const TunerDecision& decision);

struct ProfileOptions {
    std::vector<std::uint32_t> candidates = kDefaultCandidates;
    std::vector<std::uint32_t> dims{kLargeGraphFeatureDim, kSmallGraphFeatureDim};
    std::vector<double> or_targets{0.0, 0.5, 0.8, 0.9, 0.95, 1.0};
    double or_tolerance = 0.05;
    std::uint32_t samples = 5;
    std::uint64_t seed = 0;
    ExecConfig exec;
    MachineConstants machine;
};

/// Measures work-unit speedups of N-snapshot aggregation over N separate
/// single-snapshot runs on groups of contiguous snapshots whose OR lies
/// within the tolerance of each target.
TunerProfile build_profile(std::span<const SnapshotSequence> datasets, const ProfileOptions& options);

}  // namespace pipad
