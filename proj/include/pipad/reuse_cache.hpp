#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "pipad/dense.hpp"
#include "pipad/dtdg.hpp"

namespace pipad {

/// Cached first-layer aggregation result of one snapshot.
struct AggCacheKey {
    std::size_t snapshot_index = 0;
    std::uint32_t layer = 0;  // only layer 0 is parameter independent
    std::uint64_t feature_epoch = 0;

    friend auto operator<=>(const AggCacheKey&, const AggCacheKey&) = default;
};

enum class Tier { host, device };
enum class CacheHit { device, host, miss };

const char* to_string(CacheHit hit) noexcept;

struct RecordAck {
    bool spilled = false;  // device record that did not fit; kept on host
};

struct FetchResult {
    std::shared_ptr<const DenseMatrix> matrix;  // null on miss
    CacheHit hit = CacheHit::miss;
    std::uint64_t transfer_bytes = 0;
};

struct CacheCounters {
    std::uint64_t device_hits = 0;
    std::uint64_t host_hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t spills = 0;
    std::uint64_t records = 0;
    std::uint64_t reallocations = 0;
};

/// Two-tier store. The host tier keeps everything recorded; the device
/// tier holds a bounded, ordered subset.
class AggCache {
public:
    explicit AggCache(std::uint64_t device_capacity = 0) : device_capacity_(device_capacity) {}

    RecordAck record(const AggCacheKey& key, std::shared_ptr<const DenseMatrix> matrix, Tier tier);
    RecordAck record(const AggCacheKey& key, DenseMatrix matrix, Tier tier)
    {
        return record(key, std::make_shared<const DenseMatrix>(std::move(matrix)), tier);
    }

    /// Device hit charges nothing, host hit charges the matrix size.
    FetchResult fetch(const AggCacheKey& key);

    bool on_host(const AggCacheKey& key) const { return host_.contains(key); }
    bool on_device(const AggCacheKey& key) const { return device_.contains(key); }

    /// Drops every entry recorded under an older feature epoch.
    void invalidate_before(std::uint64_t feature_epoch);
    void evict_device(const AggCacheKey& key);

    /// Rebuilds the device tier as `order` (host entries only), stopping at
    /// the first entry that does not fit. Returns the resident count.
    std::size_t retain(std::span<const AggCacheKey> order, std::uint64_t capacity);

    std::uint64_t device_capacity() const noexcept { return device_capacity_; }
    std::uint64_t device_allocated() const noexcept { return device_allocated_; }
    const std::vector<AggCacheKey>& device_order() const noexcept { return device_order_; }
    std::size_t host_size() const noexcept { return host_.size(); }
    const CacheCounters& counters() const noexcept { return counters_; }

private:
    using Entry = std::shared_ptr<const DenseMatrix>;

    bool try_device(const AggCacheKey& key, const Entry& matrix);

    std::map<AggCacheKey, Entry> host_;
    std::map<AggCacheKey, Entry> device_;
    std::vector<AggCacheKey> device_order_;
    std::uint64_t device_capacity_ = 0;
    std::uint64_t device_allocated_ = 0;
    CacheCounters counters_;
};

/// Peak modeled device memory of one frame at its chosen parallelism.
struct FrameMemStats {
    std::size_t frame_start = 0;
    std::uint64_t peak_bytes = 0;
};

struct BufferPlan {
    std::uint64_t capacity_bytes = 0;   // device_total - peak(next frame)
    std::uint64_t required_bytes = 0;   // what the retention list occupies
    std::uint64_t buffer_bytes = 0;     // allocation after this plan
    bool reallocated = false;
    std::vector<AggCacheKey> retention; // first-use order, truncated
};

/// Sizes the device buffer frame by frame. Only results already on the
/// device (`resident`, the current frame's working set) can stay there.
/// The buffer grows only when a frame needs more than it holds, and
/// shrinks only when the next frame's own peak leaves less room.
class ReusePlanner {
public:
    BufferPlan plan_next_frame(const Frame& next, std::span<const FrameMemStats> stats,
                               std::uint64_t device_total, std::span<const std::size_t> resident,
                               std::uint64_t entry_bytes, std::uint64_t feature_epoch = 0);

    std::uint64_t buffer_bytes() const noexcept { return buffer_bytes_; }
    std::uint64_t reallocations() const noexcept { return reallocations_; }
    std::uint64_t releases() const noexcept { return releases_; }

private:
    std::uint64_t buffer_bytes_ = 0;
    std::uint64_t reallocations_ = 0;
    std::uint64_t releases_ = 0;
};

}  // namespace pipad
