#include "pipad/reuse_cache.hpp"

#include <algorithm>
#include <string>

#include "pipad/errors.hpp"

namespace pipad {

const char* to_string(CacheHit hit) noexcept
{
    switch (hit) {
    case CacheHit::device: return "device";
    case CacheHit::host: return "host";
    case CacheHit::miss: return "miss";
    }
    return "miss";
}

bool AggCache::try_device(const AggCacheKey& key, const Entry& matrix)
{
    const auto bytes = matrix->bytes();
    if (device_allocated_ + bytes > device_capacity_) return false;
    device_.emplace(key, matrix);
    device_order_.push_back(key);
    device_allocated_ += bytes;
    return true;
}

RecordAck AggCache::record(const AggCacheKey& key, std::shared_ptr<const DenseMatrix> matrix,
                           Tier tier)
{
    if (key.layer != 0) throw ArgumentError("only layer-0 aggregation results are cacheable");
    if (!matrix) throw ArgumentError("cannot record a null matrix");
    const auto describe = [&] {
        return "snapshot " + std::to_string(key.snapshot_index) + " epoch " +
               std::to_string(key.feature_epoch);
    };

    RecordAck ack;
    if (tier == Tier::host) {
        if (host_.contains(key)) throw IdempotencyError("host tier already holds " + describe());
        host_.emplace(key, std::move(matrix));
    } else {
        if (device_.contains(key)) throw IdempotencyError("device tier already holds " + describe());
        auto [it, inserted] = host_.emplace(key, matrix);
        if (!inserted) matrix = it->second;
        if (!try_device(key, matrix)) {
            ack.spilled = true;
            ++counters_.spills;
        }
    }
    ++counters_.records;
    return ack;
}

FetchResult AggCache::fetch(const AggCacheKey& key)
{
    if (auto it = device_.find(key); it != device_.end()) {
        ++counters_.device_hits;
        return {it->second, CacheHit::device, 0};
    }
    if (auto it = host_.find(key); it != host_.end()) {
        ++counters_.host_hits;
        return {it->second, CacheHit::host, it->second->bytes()};
    }
    ++counters_.misses;
    return {};
}

void AggCache::invalidate_before(std::uint64_t feature_epoch)
{
    std::erase_if(host_, [&](const auto& kv) { return kv.first.feature_epoch < feature_epoch; });
    for (const auto& key : std::vector<AggCacheKey>(device_order_)) {
        if (key.feature_epoch < feature_epoch) evict_device(key);
    }
}

void AggCache::evict_device(const AggCacheKey& key)
{
    auto it = device_.find(key);
    if (it == device_.end()) return;
    device_allocated_ -= it->second->bytes();
    device_.erase(it);
    std::erase(device_order_, key);
}

std::size_t AggCache::retain(std::span<const AggCacheKey> order, std::uint64_t capacity)
{
    device_.clear();
    device_order_.clear();
    device_allocated_ = 0;
    device_capacity_ = capacity;
    std::size_t resident = 0;
    for (const auto& key : order) {
        auto it = host_.find(key);
        if (it == host_.end()) continue;
        if (!try_device(key, it->second)) break;
        ++resident;
    }
    return resident;
}

BufferPlan ReusePlanner::plan_next_frame(const Frame& next, std::span<const FrameMemStats> stats,
                                         std::uint64_t device_total,
                                         std::span<const std::size_t> resident,
                                         std::uint64_t entry_bytes, std::uint64_t feature_epoch)
{
    auto it = std::find_if(stats.begin(), stats.end(),
                           [&](const FrameMemStats& s) { return s.frame_start == next.start; });
    if (it == stats.end()) {
        throw PlanningError("no memory statistics for the frame at " + std::to_string(next.start) +
                            "; fall back to host-only reuse");
    }

    BufferPlan plan;
    plan.capacity_bytes = it->peak_bytes >= device_total ? 0 : device_total - it->peak_bytes;
    for (std::size_t t = next.start; t < next.end(); ++t) {
        const AggCacheKey key{t, 0, feature_epoch};
        if (std::find(resident.begin(), resident.end(), t) == resident.end()) continue;
        if (plan.required_bytes + entry_bytes > plan.capacity_bytes) break;
        plan.retention.push_back(key);
        plan.required_bytes += entry_bytes;
    }
    if (buffer_bytes_ > plan.capacity_bytes) {
        // release the surplus; the frame's own peak needs it
        buffer_bytes_ = plan.capacity_bytes;
        ++releases_;
    }
    if (plan.required_bytes > buffer_bytes_) {
        buffer_bytes_ = plan.required_bytes;
        plan.reallocated = true;
        ++reallocations_;
    }
    plan.buffer_bytes = buffer_bytes_;
    return plan;
}

}  // namespace pipad
