#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pipad/dtdg.hpp"
#include "pipad/errors.hpp"
#include "pipad/overlap.hpp"

using namespace pipad;

namespace {

std::vector<Csr> churned_group(Rng& rng, std::uint32_t n, std::size_t nnz, std::size_t k, double churn)
{
    std::vector<Csr> out{oracle::random_csr(rng, n, nnz, true)};
    for (std::size_t i = 1; i < k; ++i) {
        auto m = oracle::edges_of(out.back());
        std::vector<std::pair<std::uint32_t, std::uint32_t>> keys;
        for (const auto& [key, w] : m) keys.push_back(key);
        const auto drop = static_cast<std::size_t>(churn * static_cast<double>(keys.size()));
        for (std::size_t d = 0; d < drop && !keys.empty(); ++d) {
            const auto j = uniform_below(rng, keys.size());
            m.erase(keys[j]);
            keys.erase(keys.begin() + static_cast<std::ptrdiff_t>(j));
        }
        while (m.size() < nnz) {
            m[{static_cast<std::uint32_t>(uniform_below(rng, n)), static_cast<std::uint32_t>(uniform_below(rng, n))}] =
                static_cast<float>(1 + uniform_below(rng, 4));
        }
        out.push_back(oracle::from_map(n, m));
    }
    return out;
}

}  // namespace

TEST(Decompose, MatchesSetOracle)
{
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const auto k = 1 + uniform_below(rng, 6);
        const auto group = churned_group(rng, 50, 300, k, 0.2);
        const auto d = decompose(group, 8, 10);
        const auto split = oracle::split(group);
        EXPECT_EQ(oracle::edges_of(d.a_over), split.shared);
        ASSERT_EQ(d.s_per(), k);
        EXPECT_EQ(d.first_snapshot, 10u);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_EQ(oracle::edges_of(d.exclusives[i]), split.own[i]);
            d.exclusives[i].validate(50);
        }
    }
}

TEST(Decompose, DifferingWeightsStayExclusive)
{
    const auto a = Csr::from_edges(3, {{0, 1, 1.0f}, {1, 2, 2.0f}});
    const auto b = Csr::from_edges(3, {{0, 1, 1.0f}, {1, 2, 3.0f}});
    const std::vector<Csr> g{a, b};
    const auto d = decompose(g, 4);
    EXPECT_EQ(d.a_over.nnz(), 1u);
    EXPECT_EQ(d.exclusives[0].nnz(), 1u);
    EXPECT_EQ(d.exclusives[1].nnz(), 1u);
}

TEST(Decompose, IdenticalSnapshotsShipOnce)
{
    Rng rng(1);
    const auto c = oracle::random_csr(rng, 40, 200);
    const std::vector<Csr> g(4, c);
    const auto d = decompose(g, 32);
    for (const auto& e : d.exclusives) EXPECT_EQ(e.nnz(), 0u);
    EXPECT_EQ(d.shipped_bytes(), storage_cost(d.a_over) * 4);
    EXPECT_EQ(plain_shipped_bytes(g, 32), 4 * d.shipped_bytes());
    const auto st = overlap_rate(g, 32);
    EXPECT_EQ(st.partition_rate, 1.0);
    EXPECT_EQ(st.bytes_saved, 3 * storage_cost(d.a_over) * 4);
}

TEST(Decompose, SlicedInputAgrees)
{
    Rng rng(8);
    const auto g = churned_group(rng, 30, 100, 3, 0.3);
    std::vector<SlicedCsr> s;
    for (const auto& c : g) s.push_back(slice_from_csr(c, 5));
    const auto a = decompose(g, 5);
    const auto b = decompose(s, 30, 5);
    EXPECT_EQ(a.a_over, b.a_over);
    EXPECT_EQ(a.exclusives, b.exclusives);
}

TEST(Decompose, Errors)
{
    EXPECT_THROW(decompose(std::vector<Csr>{}, 4), ArgumentError);
    const std::vector<Csr> g{Csr::empty(3), Csr::empty(4)};
    EXPECT_THROW(decompose(g, 4), ArgumentError);
    EXPECT_THROW(overlap_rate(std::vector<Csr>{Csr::empty(3)}), ArgumentError);
}

TEST(Undecomposed, ShipsEverySnapshotWhole)
{
    Rng rng(2);
    const auto g = churned_group(rng, 30, 100, 3, 0.1);
    const auto u = undecomposed(g, 6);
    EXPECT_EQ(u.a_over.nnz(), 0u);
    EXPECT_EQ(u.shipped_bytes(), plain_shipped_bytes(g, 6));
}

TEST(Overlap, RatesMatchOracle)
{
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto k = 2 + uniform_below(rng, 5);
        const auto g = churned_group(rng, 40, 150, k, 0.25);
        const auto st = overlap_rate(g, 8);
        EXPECT_NEAR(st.partition_rate, oracle::iou(g), 1e-15);
        for (std::size_t i = 0; i + 1 < k; ++i) {
            EXPECT_NEAR(st.pairwise_rates[i], oracle::iou({g[i], g[i + 1]}), 1e-15);
            EXPECT_LE(st.partition_rate, st.pairwise_rates[i] + 1e-15);
        }
    }
}

TEST(Overlap, EmptySetsCountAsIdentical)
{
    EXPECT_EQ(topology_overlap(Csr::empty(4), Csr::empty(4)), 1.0);
    EXPECT_EQ(shared_fraction(Csr::empty(4), Csr::empty(4)), 1.0);
    EXPECT_THROW(topology_overlap(Csr::empty(4), Csr::empty(5)), ArgumentError);
}

TEST(Overlap, IouVersusSharedFractionUnderChurn)
{
    // replacing a share c of the edges keeps 1 - c of them but the union
    // grows, so IoU is (1 - c) / (1 + c)
    SyntheticParams p;
    p.node_count = 400;
    p.base_edges = 4000;
    p.steps = 2;
    p.churn_rate = 0.2;
    const auto seq = generate_synthetic(p);
    EXPECT_NEAR(topology_overlap(seq[0].adjacency, seq[1].adjacency), 0.8 / 1.2, 1e-12);
}

TEST(Memo, ComputesOnceAndFreezes)
{
    DecompositionMemo memo;
    int calls = 0;
    const auto make = [&] {
        ++calls;
        return undecomposed(std::vector<Csr>{Csr::empty(2)}, 4);
    };
    const auto a = memo.get_or_compute({1, 2}, make);
    const auto b = memo.get_or_compute({1, 2}, make);
    EXPECT_EQ(a, b);
    EXPECT_EQ(calls, 1);
    memo.freeze();
    EXPECT_EQ(memo.get_or_compute({1, 2}, make), a);
    EXPECT_THROW(memo.get_or_compute({3}, make), ArgumentError);
    EXPECT_EQ(memo.find({3}), nullptr);
    EXPECT_EQ(memo.size(), 1u);
}
