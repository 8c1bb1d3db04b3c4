#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "pipad/binary_io.hpp"
#include "pipad/dtdg.hpp"
#include "pipad/errors.hpp"
#include "pipad/overlap.hpp"

using namespace pipad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("pipad-test-" + name);
    fs::remove_all(p);
    return p;
}

IngestOptions opts(std::uint32_t nodes, std::uint64_t interval = 1, std::uint32_t life = 1)
{
    IngestOptions o;
    o.node_count = nodes;
    o.interval = interval;
    o.edge_life = life;
    o.features.dim = 2;
    return o;
}

}  // namespace

TEST(Ingest, BucketsByInterval)
{
    std::istringstream in("0 1 0\n1 2 9\n2 0 10\n# comment\n\n% other\n");
    const auto seq = ingest_temporal_edges(in, opts(3, 10));
    ASSERT_EQ(seq.length(), 2u);
    EXPECT_EQ(seq[0].adjacency.nnz(), 2u);
    EXPECT_EQ(seq[1].adjacency.nnz(), 1u);
    EXPECT_EQ(seq[1].timestep, 1u);
    seq.validate();
}

TEST(Ingest, EdgeLifeKeepsEdgesAlive)
{
    std::istringstream in("0 1 0\n1 2 2\n2 0 4\n");
    const auto seq = ingest_temporal_edges(in, opts(3, 1, 3));
    ASSERT_EQ(seq.length(), 5u);
    const std::vector<std::size_t> expect{1, 1, 2, 1, 2};
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(seq[t].adjacency.nnz(), expect[t]) << t;
}

TEST(Ingest, LaterWeightWins)
{
    std::istringstream in("0 1 2 5.0\n0 1 1 3.0\n");
    const auto seq = ingest_temporal_edges(in, opts(2, 10));
    ASSERT_EQ(seq[0].adjacency.nnz(), 1u);
    EXPECT_EQ(seq[0].adjacency.values[0], 5.0f);
}

TEST(Ingest, ExplicitBucketCountDropsLaterEvents)
{
    std::istringstream in("0 1 0\n1 0 50\n");
    auto o = opts(2, 10);
    o.bucket_count = 2;
    const auto seq = ingest_temporal_edges(in, o);
    ASSERT_EQ(seq.length(), 2u);
    EXPECT_EQ(seq[1].adjacency.nnz(), 0u);
}

TEST(Ingest, Errors)
{
    {
        std::istringstream in("0 1\n");
        EXPECT_THROW(ingest_temporal_edges(in, opts(2)), ParseError);
    }
    {
        std::istringstream in("0 x 1\n");
        EXPECT_THROW(ingest_temporal_edges(in, opts(2)), ParseError);
    }
    {
        std::istringstream in("0 1 -4\n");
        EXPECT_THROW(ingest_temporal_edges(in, opts(2)), ParseError);
    }
    {
        std::istringstream in("0 1 1 nan\n");
        EXPECT_THROW(ingest_temporal_edges(in, opts(2)), ParseError);
    }
    {
        std::istringstream in("0 7 1\n");
        EXPECT_THROW(ingest_temporal_edges(in, opts(2)), BoundsError);
    }
    std::istringstream in("0 1 1\n");
    EXPECT_THROW(ingest_temporal_edges(in, opts(0)), ArgumentError);
    EXPECT_THROW(ingest_temporal_edges(in, opts(2, 0)), ArgumentError);
    EXPECT_THROW(ingest_temporal_edges(in, opts(2, 1, 0)), ArgumentError);
}

TEST(Ingest, ErrorsNameTheLine)
{
    std::istringstream in("0 1 0\n\n0 1 x\n");
    try {
        ingest_temporal_edges(in, opts(2));
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Ingest, EmptyInputGivesEmptySequence)
{
    std::istringstream in("# nothing\n");
    EXPECT_TRUE(ingest_temporal_edges(in, opts(2)).empty());
}

TEST(Frames, SlidingWindows)
{
    const auto f = frames(20, 16, 1);
    ASSERT_EQ(f.size(), 5u);
    EXPECT_EQ(f[4].start, 4u);
    EXPECT_EQ(f[4].end(), 20u);
    EXPECT_EQ(frames(20, 16, 4).size(), 2u);
    EXPECT_THROW(frames(10, 16), ArgumentError);
    EXPECT_THROW(frames(10, 0), ArgumentError);
    EXPECT_THROW(frames(10, 2, 0), ArgumentError);
}

TEST(Frames, PartitionsCoverWithShortTail)
{
    const Frame fr{3, 10, 1};
    for (std::size_t n = 1; n <= 12; ++n) {
        const auto parts = partitions(fr, n);
        std::size_t next = fr.start;
        for (const auto& p : parts) {
            EXPECT_EQ(p.first, next);
            EXPECT_GE(p.count, 1u);
            EXPECT_LE(p.count, n);
            next = p.end();
        }
        EXPECT_EQ(next, fr.end());
        EXPECT_EQ(parts.size(), (fr.size + n - 1) / n);
    }
    EXPECT_THROW(partitions(fr, 0), ArgumentError);
}

TEST(Synthetic, ChurnReplacesTheStatedShare)
{
    for (double churn : {0.0, 0.1, 0.5, 1.0}) {
        SyntheticParams p;
        p.node_count = 300;
        p.base_edges = 2000;
        p.steps = 5;
        p.churn_rate = churn;
        p.seed = 9;
        const auto seq = generate_synthetic(p);
        seq.validate();
        for (std::size_t t = 0; t + 1 < seq.length(); ++t) {
            EXPECT_EQ(seq[t].adjacency.nnz(), 2000u);
            const double kept = shared_fraction(seq[t].adjacency, seq[t + 1].adjacency);
            EXPECT_NEAR(kept, 1.0 - churn, 1e-12) << churn;
        }
    }
}

TEST(Synthetic, SeededAndDeterministic)
{
    SyntheticParams p;
    p.node_count = 100;
    p.base_edges = 400;
    p.steps = 4;
    EXPECT_EQ(generate_synthetic(p), generate_synthetic(p));
    auto q = p;
    q.seed = 1;
    EXPECT_FALSE(generate_synthetic(p) == generate_synthetic(q));
}

TEST(Synthetic, Errors)
{
    SyntheticParams p;
    p.churn_rate = 1.5;
    EXPECT_THROW(generate_synthetic(p), ArgumentError);
    p.churn_rate = 0.1;
    p.node_count = 10;
    p.base_edges = 101;
    EXPECT_THROW(generate_synthetic(p), CapacityError);
    // fresh edges must differ from the ones they replace
    p.base_edges = 95;
    EXPECT_THROW(generate_synthetic(p), CapacityError);
    p.steps = 1;
    EXPECT_NO_THROW(generate_synthetic(p));
}

TEST(Features, OnTheFloatGrid)
{
    const auto m = random_features(50, 8, 3, 2);
    for (float v : m.data()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LT(v, 1.0f);
        EXPECT_EQ(v * 16777216.0f, std::floor(v * 16777216.0f));
    }
    EXPECT_TRUE(bitwise_equal(m, random_features(50, 8, 3, 2)));
    EXPECT_FALSE(bitwise_equal(m, random_features(50, 8, 3, 3)));
}

TEST(Features, FileRoundTrip)
{
    const auto dir = scratch("features");
    fs::create_directories(dir);
    const auto m = random_features(7, 3, 1, 0);
    io::write_file(dir / "f.bin", encode_feature_file(m));
    EXPECT_TRUE(bitwise_equal(read_feature_file(dir / "f.bin"), m));
    auto bytes = encode_feature_file(m);
    bytes.pop_back();
    io::write_file(dir / "bad.bin", bytes);
    EXPECT_THROW(read_feature_file(dir / "bad.bin"), ValidationError);

    std::istringstream in("0 1 0\n");
    auto o = opts(7);
    o.features.source = FeatureSource::file;
    o.features.path = dir / "f.bin";
    const auto seq = ingest_temporal_edges(in, o);
    EXPECT_TRUE(bitwise_equal(seq[0].features, m));
    o.node_count = 8;
    std::istringstream in2("0 1 0\n");
    EXPECT_THROW(ingest_temporal_edges(in2, o), ValidationError);
}

TEST(Sequence, DirectoryRoundTrip)
{
    SyntheticParams p;
    p.node_count = 60;
    p.base_edges = 200;
    p.steps = 3;
    const auto seq = generate_synthetic(p);
    const auto dir = scratch("seq");
    write_sequence(seq, dir);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_EQ(read_sequence(dir), seq);
}

TEST(Sequence, SnapshotCodecRejectsTruncation)
{
    SyntheticParams p;
    p.node_count = 20;
    p.base_edges = 30;
    p.steps = 1;
    const auto seq = generate_synthetic(p);
    auto bytes = encode_snapshot(seq[0]);
    const auto back = decode_snapshot(bytes, 0);
    EXPECT_EQ(back.adjacency, seq[0].adjacency);
    bytes.resize(bytes.size() - 5);
    EXPECT_THROW(decode_snapshot(bytes, 0), ValidationError);
}

TEST(Sequence, ValidateCatchesMismatches)
{
    SyntheticParams p;
    p.node_count = 20;
    p.base_edges = 30;
    p.steps = 2;
    auto seq = generate_synthetic(p);
    seq.snapshots[1].timestep = 5;
    EXPECT_THROW(seq.validate(), ValidationError);
    seq = generate_synthetic(p);
    seq.snapshots[1].features = DenseMatrix(20, 3);
    EXPECT_THROW(seq.validate(), ValidationError);
}

TEST(RandomGraph, SkewGivesHeavyRows)
{
    const auto g = random_graph(5000, 25000, 1.0, 2);
    g.validate();
    std::vector<std::uint32_t> deg;
    for (std::uint32_t r = 0; r < g.node_count; ++r) deg.push_back(g.row_nnz(r));
    std::sort(deg.begin(), deg.end());
    const auto median = std::max<std::uint32_t>(1, deg[deg.size() / 2]);
    EXPECT_GE(deg.back(), 100u * median);

    const auto u = random_graph(1000, 10000, 0.0, 2);
    EXPECT_EQ(u.nnz(), 10000u);
    EXPECT_EQ(random_graph(1000, 10000, 0.0, 2), u);
    EXPECT_THROW(random_graph(10, 101, 0.0, 1), CapacityError);
}
