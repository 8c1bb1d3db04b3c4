#include <gtest/gtest.h>

#include "pipad/errors.hpp"
#include "pipad/reuse_cache.hpp"

using namespace pipad;

namespace {

DenseMatrix block(float v) { return DenseMatrix(4, 4, v); }  // 64 bytes

}  // namespace

TEST(AggCache, HostRecordAndFetch)
{
    AggCache cache;
    cache.record({3, 0, 0}, block(1.0f), Tier::host);
    const auto hit = cache.fetch({3, 0, 0});
    ASSERT_TRUE(hit.matrix);
    EXPECT_EQ(hit.hit, CacheHit::host);
    EXPECT_EQ(hit.transfer_bytes, 64u);
    EXPECT_EQ((*hit.matrix)(0, 0), 1.0f);
    const auto miss = cache.fetch({4, 0, 0});
    EXPECT_EQ(miss.hit, CacheHit::miss);
    EXPECT_FALSE(miss.matrix);
    EXPECT_EQ(cache.counters().host_hits, 1u);
    EXPECT_EQ(cache.counters().misses, 1u);
    EXPECT_STREQ(to_string(CacheHit::device), "device");
}

TEST(AggCache, DeviceHitsAreFreeAndSpillsFallBackToHost)
{
    AggCache cache(128);
    EXPECT_FALSE(cache.record({0, 0, 0}, block(1), Tier::device).spilled);
    EXPECT_FALSE(cache.record({1, 0, 0}, block(2), Tier::device).spilled);
    EXPECT_TRUE(cache.record({2, 0, 0}, block(3), Tier::device).spilled);
    EXPECT_EQ(cache.counters().spills, 1u);
    EXPECT_EQ(cache.device_allocated(), 128u);
    EXPECT_EQ(cache.fetch({0, 0, 0}).transfer_bytes, 0u);
    EXPECT_EQ(cache.fetch({2, 0, 0}).hit, CacheHit::host);
    EXPECT_EQ(cache.host_size(), 3u);
    EXPECT_LE(cache.device_allocated(), cache.device_capacity());
}

TEST(AggCache, RecordingTwiceIsAnError)
{
    AggCache cache(1024);
    cache.record({0, 0, 0}, block(1), Tier::host);
    EXPECT_THROW(cache.record({0, 0, 0}, block(1), Tier::host), IdempotencyError);
    // promoting a host entry to the device is allowed once
    EXPECT_NO_THROW(cache.record({0, 0, 0}, block(1), Tier::device));
    EXPECT_THROW(cache.record({0, 0, 0}, block(1), Tier::device), IdempotencyError);
    EXPECT_THROW(cache.record({1, 1, 0}, block(1), Tier::host), ArgumentError);
    EXPECT_THROW(cache.record({1, 0, 0}, std::shared_ptr<const DenseMatrix>{}, Tier::host), ArgumentError);
}

TEST(AggCache, InvalidateOlderEpochs)
{
    AggCache cache(1024);
    cache.record({0, 0, 0}, block(1), Tier::device);
    cache.record({0, 0, 1}, block(2), Tier::device);
    cache.invalidate_before(1);
    EXPECT_FALSE(cache.on_host({0, 0, 0}));
    EXPECT_FALSE(cache.on_device({0, 0, 0}));
    EXPECT_TRUE(cache.on_device({0, 0, 1}));
    EXPECT_EQ(cache.device_allocated(), 64u);
}

TEST(AggCache, RetainRebuildsDeviceInOrder)
{
    AggCache cache;
    for (std::size_t t = 0; t < 5; ++t) cache.record({t, 0, 0}, block(static_cast<float>(t)), Tier::host);
    const std::vector<AggCacheKey> order{{4, 0, 0}, {9, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    EXPECT_EQ(cache.retain(order, 64 * 3), 3u);
    const std::vector<AggCacheKey> expect{{4, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    EXPECT_EQ(cache.device_order(), expect);
    EXPECT_FALSE(cache.on_device({3, 0, 0}));
    cache.evict_device({1, 0, 0});
    EXPECT_EQ(cache.device_allocated(), 128u);
    EXPECT_TRUE(cache.on_host({1, 0, 0}));
}

TEST(Planner, RetainsResidentSnapshotsInFirstUseOrder)
{
    ReusePlanner planner;
    const Frame next{1, 4, 1};
    const std::vector<FrameMemStats> stats{{0, 500}, {1, 600}};
    const std::vector<std::size_t> resident{0, 1, 2, 3};
    const auto plan = planner.plan_next_frame(next, stats, 1000, resident, 100);
    EXPECT_EQ(plan.capacity_bytes, 400u);
    const std::vector<AggCacheKey> expect{{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    EXPECT_EQ(plan.retention, expect);
    EXPECT_EQ(plan.required_bytes, 300u);
    EXPECT_TRUE(plan.reallocated);
    EXPECT_EQ(planner.buffer_bytes(), 300u);
}

TEST(Planner, TruncatesGrowsOnlyWhenNeededAndReleasesOnShrink)
{
    ReusePlanner planner;
    const std::vector<FrameMemStats> stats{{0, 700}, {1, 850}, {2, 700}};
    const std::vector<std::size_t> resident{0, 1, 2, 3, 4, 5};
    auto plan = planner.plan_next_frame({0, 4, 1}, stats, 1000, resident, 100);
    EXPECT_EQ(plan.retention.size(), 3u);
    EXPECT_EQ(planner.reallocations(), 1u);
    plan = planner.plan_next_frame({1, 4, 1}, stats, 1000, resident, 100);
    EXPECT_EQ(plan.retention.size(), 1u);
    EXPECT_EQ(plan.buffer_bytes, 150u);
    EXPECT_EQ(planner.releases(), 1u);
    plan = planner.plan_next_frame({2, 4, 1}, stats, 1000, resident, 100);
    EXPECT_EQ(plan.retention.size(), 3u);
    EXPECT_EQ(planner.reallocations(), 2u);
    plan = planner.plan_next_frame({2, 4, 1}, stats, 1000, resident, 100);
    EXPECT_FALSE(plan.reallocated);
}

TEST(Planner, PeakAboveDeviceLeavesNoRoom)
{
    ReusePlanner planner;
    const std::vector<FrameMemStats> stats{{0, 2000}};
    const std::vector<std::size_t> resident{0};
    const auto plan = planner.plan_next_frame({0, 2, 1}, stats, 1000, resident, 10);
    EXPECT_EQ(plan.capacity_bytes, 0u);
    EXPECT_TRUE(plan.retention.empty());
}

TEST(Planner, MissingStatisticsIsPlanningError)
{
    ReusePlanner planner;
    const std::vector<FrameMemStats> stats{{0, 10}};
    EXPECT_THROW(planner.plan_next_frame({5, 2, 1}, stats, 1000, {}, 10), PlanningError);
}
