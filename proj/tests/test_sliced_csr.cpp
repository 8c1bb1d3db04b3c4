#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "pipad/binary_io.hpp"
#include "pipad/errors.hpp"
#include "pipad/sliced_csr.hpp"

using namespace pipad;

namespace {

Csr row_of(std::uint32_t n, std::uint32_t row, std::uint32_t count)
{
    std::vector<Edge> e;
    for (std::uint32_t c = 0; c < count; ++c) e.push_back({row, c, 1.0f});
    return Csr::from_edges(n, e);
}

}  // namespace

TEST(SlicedCsr, RowOfSeventyCapThirtyTwo)
{
    const auto s = slice_from_csr(row_of(80, 5, 70), 32);
    ASSERT_EQ(s.n_slices(), 3u);
    EXPECT_EQ(s.slice_nnz(0), 32u);
    EXPECT_EQ(s.slice_nnz(1), 32u);
    EXPECT_EQ(s.slice_nnz(2), 6u);
    for (auto r : s.row_indices) EXPECT_EQ(r, 5u);
    EXPECT_EQ(storage_cost(s), 2u * 70 + 2 * 3 + 1);
}

TEST(SlicedCsr, EmptyRowsProduceNoSlices)
{
    const auto s = slice_from_csr(Csr::empty(10), 4);
    EXPECT_EQ(s.n_slices(), 0u);
    EXPECT_EQ(s.slice_offsets, std::vector<std::uint32_t>{0});
    EXPECT_EQ(to_csr(s, 10), Csr::empty(10));
}

TEST(SlicedCsr, ZeroCapRejected)
{
    EXPECT_THROW(slice_from_csr(Csr::empty(3), 0), ArgumentError);
    EXPECT_THROW(count_slices(Csr::empty(3), 0), ArgumentError);
}

TEST(SlicedCsr, MatchesNaiveSlicerAndCount)
{
    Rng rng(11);
    for (int k = 0; k < 50; ++k) {
        const auto n = static_cast<std::uint32_t>(1 + uniform_below(rng, 60));
        const auto c = oracle::random_csr(rng, n, uniform_below(rng, n * n / 2 + 1), true);
        const auto cap = static_cast<std::uint32_t>(1 + uniform_below(rng, 40));
        const auto s = slice_from_csr(c, cap);
        EXPECT_EQ(s, oracle::slice(c, cap));
        EXPECT_EQ(count_slices(c, cap), s.n_slices());
        EXPECT_EQ(storage_cost(s), oracle::entries(s));
    }
}

TEST(SlicedCsr, StorageFormulas)
{
    EXPECT_EQ(storage_cost(StorageFormat::sliced, 10, 99, 4), 29u);
    EXPECT_EQ(storage_cost(StorageFormat::csr, 10, 5, 0), 26u);
    EXPECT_EQ(storage_cost(StorageFormat::coo, 10, 5, 0), 30u);
    const auto c = row_of(6, 2, 4);
    EXPECT_EQ(storage_cost(StorageFormat::csr, c.nnz(), c.node_count, 0), oracle::entries(c));
}

TEST(SlicedCsr, ValidateRejectsBrokenStructures)
{
    auto s = slice_from_csr(row_of(8, 1, 5), 2);
    s.validate(8);
    auto bad = s;
    bad.slice_cap = 0;
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = s;
    bad.row_indices[0] = 20;
    EXPECT_THROW(bad.validate(8), BoundsError);
    bad = s;
    bad.col_indices[1] = bad.col_indices[0];
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = s;
    bad.slice_offsets[1] = 1;  // first slice of a row below the cap
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(SlicedCsr, SerializeRoundTrip)
{
    Rng rng(3);
    const auto c = oracle::random_csr(rng, 40, 300, true);
    const auto s = slice_from_csr(c, 7);
    const auto bytes = serialize(s);
    EXPECT_EQ(deserialize_sliced(bytes), s);
    EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 8 + 8 + 4 * oracle::entries(s));
}

TEST(SlicedCsr, DeserializeRejectsCorruption)
{
    const auto bytes = serialize(slice_from_csr(row_of(4, 0, 3), 2));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_sliced(bad), ValidationError);
    bad = bytes;
    bad[4] = 9;  // version
    EXPECT_THROW(deserialize_sliced(bad), ValidationError);
    bad = bytes;
    bad.push_back(0);
    EXPECT_THROW(deserialize_sliced(bad), ValidationError);
    bad.assign(bytes.begin(), bytes.end() - 3);
    EXPECT_THROW(deserialize_sliced(bad), ValidationError);
}

TEST(SlicedCsr, GoldenBytesDecode)
{
    const std::filesystem::path dir = PIPAD_TEST_DATA "/golden";
    const auto s = deserialize_sliced(io::read_file(dir / "snap_000001.scsr"));
    EXPECT_EQ(s.slice_cap, 2u);
    EXPECT_EQ(s.nnz(), 9u);
    EXPECT_EQ(serialize(s), io::read_file(dir / "snap_000001.scsr"));
}

TEST(Csr, FromEdgesRejectsDuplicatesAndBounds)
{
    EXPECT_THROW(Csr::from_edges(3, {{0, 1, 1.0f}, {0, 1, 2.0f}}), ValidationError);
    EXPECT_THROW(Csr::from_edges(3, {{0, 3, 1.0f}}), BoundsError);
    const auto c = Csr::from_edges(3, {{2, 0, 1.0f}, {0, 2, 1.0f}, {0, 1, 1.0f}});
    EXPECT_EQ(c.col_indices, (std::vector<std::uint32_t>{1, 2, 0}));
    EXPECT_EQ(c.edges().size(), 3u);
}
