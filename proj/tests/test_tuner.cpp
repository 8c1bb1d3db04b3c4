#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "pipad/dtdg.hpp"
#include "pipad/errors.hpp"
#include "pipad/tuner.hpp"

using namespace pipad;

namespace {

FrameObservation flat_observation(std::size_t size, std::uint64_t bytes, double compute, std::uint64_t peak,
                                  double frame_or = 0.9)
{
    FrameObservation obs;
    obs.per_snapshot_bytes.assign(size, bytes);
    obs.per_snapshot_compute.assign(size, compute);
    obs.peak_mem_one_snapshot = peak;
    obs.aggregation_bytes_per_snapshot = 100;
    obs.feature_dim = 16;
    obs.frame_or_stats.partition_rate = frame_or;
    return obs;
}

// speedup grows with s_per above OR 0.5 and shrinks below it
TunerProfile monotone_profile()
{
    TunerProfile p;
    p.or_targets = {0.0, 0.25, 0.5, 0.75, 1.0};
    p.dims = {16};
    p.candidates = kDefaultCandidates;
    p.machine = {1e12, 0.0};
    for (std::size_t o = 0; o < p.or_targets.size(); ++o) {
        for (std::uint32_t n : {2u, 4u, 8u}) {
            p.table[{o, 16, n}] = {1.0 + (p.or_targets[o] - 0.5) * std::log2(n) / 2, 1};
        }
    }
    return p;
}

}  // namespace

TEST(Tuner, MemoryUpperBound)
{
    const auto obs = flat_observation(8, 10, 1, 100);
    EXPECT_EQ(memory_upper_bound(obs, 1000), 8u);
    EXPECT_EQ(memory_upper_bound(obs, 500), 4u);
    EXPECT_EQ(memory_upper_bound(obs, 200), 1u);
    EXPECT_THROW(memory_upper_bound(obs, 100), CapacityError);
}

TEST(Tuner, ProfileBuckets)
{
    const auto p = monotone_profile();
    const auto b = p.or_buckets();
    ASSERT_EQ(b.size(), 5u);
    EXPECT_EQ(b.front().first, 0.0);
    EXPECT_EQ(b.back().second, 1.0);
    for (std::size_t i = 0; i + 1 < b.size(); ++i) EXPECT_EQ(b[i].second, b[i + 1].first);
    EXPECT_EQ(p.or_bucket(0.125), 0u);  // tie goes low
    EXPECT_EQ(p.or_bucket(0.13), 1u);
    EXPECT_EQ(p.dim_bucket(100), 16u);
}

TEST(Tuner, SpeedupLookupAndFallback)
{
    auto p = monotone_profile();
    EXPECT_EQ(estimate_speedup(p, 0.9, 16, 1), 1.0);
    EXPECT_DOUBLE_EQ(estimate_speedup(p, 1.0, 16, 4), 1.5);
    p.table.erase({4, 16, 4});
    EXPECT_DOUBLE_EQ(estimate_speedup(p, 1.0, 16, 4), 1.25);
    EXPECT_EQ(estimate_speedup(p, 1.0, 16, 16), 1.0);
    EXPECT_THROW(estimate_speedup(TunerProfile{}, 0.5, 16, 2), ConfigurationError);
}

TEST(Tuner, PicksFastestStallFreeCandidate)
{
    const Frame frame{0, 8, 1};
    const auto obs = flat_observation(8, 100, 50, 10, 1.0);
    const auto d = decide(frame, obs, monotone_profile(), 1000);
    EXPECT_EQ(d.s_per, 8u);
    EXPECT_TRUE(d.rejected.empty());
    EXPECT_NE(explain(frame, d).find("selected"), std::string::npos);
}

TEST(Tuner, LowOverlapKeepsOneSnapshot)
{
    const auto d = decide({0, 8, 1}, flat_observation(8, 100, 50, 10, 0.0), monotone_profile(), 1000);
    EXPECT_EQ(d.s_per, 1u);
}

TEST(Tuner, RejectsOutOfMemoryCandidates)
{
    const auto d = decide({0, 8, 1}, flat_observation(8, 100, 50, 300, 1.0), monotone_profile(), 1000);
    EXPECT_EQ(d.upper_bound, 2u);
    EXPECT_EQ(d.s_per, 2u);
    std::size_t oom = 0;
    for (auto [n, why] : d.rejected) oom += why == RejectReason::oom;
    EXPECT_EQ(oom, 2u);
    EXPECT_STREQ(to_string(RejectReason::oom), "oom");
}

TEST(Tuner, RejectsCandidatesThatStall)
{
    auto p = monotone_profile();
    p.machine = {1.0, 0.0};
    // transfers of n * 100 time units against compute of about n * 50 / speedup
    const auto d = decide({0, 8, 1}, flat_observation(8, 100, 50, 10, 1.0), p, 1000);
    EXPECT_EQ(d.s_per, 1u);
    std::size_t stalls = 0;
    for (auto [n, why] : d.rejected) stalls += why == RejectReason::pipeline_stall;
    EXPECT_EQ(stalls, 3u);
    EXPECT_NE(explain({0, 8, 1}, d).find("pipeline_stall"), std::string::npos);
}

TEST(Tuner, MeasuredPartitionCostsTakePrecedence)
{
    auto p = monotone_profile();
    p.machine = {1.0, 0.0};
    auto obs = flat_observation(8, 100, 50, 10, 1.0);
    obs.partition_bytes[2] = {10, 10, 10, 10};
    obs.partition_compute[2] = {20, 20, 20, 20};
    const auto d = decide({0, 8, 1}, obs, p, 1000);
    EXPECT_EQ(d.s_per, 2u);
}

TEST(Tuner, TiesGoToTheSmallerParallelism)
{
    auto p = monotone_profile();
    for (auto& [k, e] : p.table) e.speedup = 2.0;
    const auto d = decide({0, 8, 1}, flat_observation(8, 1, 50, 10, 0.9), p, 1000);
    EXPECT_EQ(d.s_per, 2u);
}

TEST(Tuner, SkipsCandidatesLargerThanTheFrame)
{
    const auto d = decide({0, 3, 1}, flat_observation(3, 1, 50, 10, 1.0), monotone_profile(), 1000);
    EXPECT_EQ(d.s_per, 2u);
    for (const auto& ev : d.evaluated) EXPECT_LE(ev.s_per, 3u);
}

TEST(Tuner, ReuseBudget)
{
    const auto obs = flat_observation(8, 1, 50, 100, 1.0);
    const auto d = decide({0, 8, 1}, obs, monotone_profile(), 1000);
    EXPECT_EQ(d.device_reuse_bytes, 200u);  // 1000 - 8 * 100 free, 800 wanted
    DecideOptions off;
    off.reuse = false;
    EXPECT_EQ(decide({0, 8, 1}, obs, monotone_profile(), 1000, kDefaultCandidates, off).device_reuse_bytes, 0u);
}

TEST(Tuner, ObservationMustCoverFrame)
{
    EXPECT_THROW(decide({0, 8, 1}, flat_observation(7, 1, 1, 1), monotone_profile(), 1000), ArgumentError);
}

TEST(Tuner, ChoiceIsMonotoneInOverlap)
{
    const auto p = monotone_profile();
    std::uint32_t last = 0;
    for (int i = 0; i <= 100; ++i) {
        const double rate = i / 100.0;
        const auto d = decide({0, 16, 1}, flat_observation(16, 1, 10, 10, rate), p, 1 << 20);
        EXPECT_GE(d.s_per, last) << rate;
        last = d.s_per;
    }
    EXPECT_EQ(last, 8u);
}

TEST(Profile, JsonRoundTripIncludingInfiniteBandwidth)
{
    auto p = monotone_profile();
    p.machine.transfer_bandwidth = std::numeric_limits<double>::infinity();
    const auto text = to_json(p);
    EXPECT_NE(text.find("\"inf\""), std::string::npos);
    const auto q = profile_from_json(text);
    EXPECT_EQ(q.or_targets, p.or_targets);
    EXPECT_EQ(q.dims, p.dims);
    EXPECT_TRUE(std::isinf(q.machine.transfer_bandwidth));
    ASSERT_EQ(q.table.size(), p.table.size());
    for (const auto& [k, e] : p.table) EXPECT_EQ(q.table.at(k).speedup, e.speedup);

    const auto dir = std::filesystem::temp_directory_path() / "pipad_profile_test";
    std::filesystem::create_directories(dir);
    save_profile(p, dir / "p.json");
    EXPECT_EQ(load_profile(dir / "p.json").table.size(), p.table.size());
    std::filesystem::remove_all(dir);
}

TEST(Profile, MalformedInputRejected)
{
    EXPECT_THROW(profile_from_json("{"), ValidationError);
    EXPECT_THROW(profile_from_json("{\"or_targets\": [0.5, 0.2], \"dims\": [], \"entries\": [],"
                                   "\"machine\": {\"transfer_bandwidth\": 1, \"transfer_latency\": 0}}"),
                 ValidationError);
    EXPECT_THROW(profile_from_json("{\"or_targets\": [0.5], \"dims\": [2], \"entries\": "
                                   "[{\"or_target\": 0.7, \"dim\": 2, \"s_per\": 2, \"speedup\": 1}],"
                                   "\"machine\": {\"transfer_bandwidth\": 1, \"transfer_latency\": 0}}"),
                 ValidationError);
}

TEST(Profile, BuildIsDeterministicAndCoversSeenOverlap)
{
    SyntheticParams sp;
    sp.node_count = 200;
    sp.base_edges = 1000;
    sp.steps = 10;
    sp.churn_rate = 0.05;
    sp.seed = 4;
    const std::vector<SnapshotSequence> data{generate_synthetic(sp)};
    ProfileOptions opt;
    opt.samples = 3;
    opt.seed = 7;
    const auto a = build_profile(data, opt);
    const auto b = build_profile(data, opt);
    EXPECT_EQ(to_json(a), to_json(b));
    EXPECT_FALSE(a.empty());
    // churn 0.05 gives pairwise OR of about 0.9
    EXPECT_TRUE(a.table.contains({3, 2, 2}));
    for (const auto& [k, e] : a.table) {
        EXPECT_GT(e.speedup, 0.0);
        EXPECT_EQ(e.samples, 3u);
    }
    EXPECT_NO_THROW(a.validate());
}
