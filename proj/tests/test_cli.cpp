#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "pipad/binary_io.hpp"
#include "pipad/cli.hpp"
#include "pipad/dtdg.hpp"

namespace fs = std::filesystem;
using namespace pipad;

namespace {

const fs::path kData = PIPAD_TEST_DATA;

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p)
{
    const auto bytes = io::read_file(p);
    return {bytes.begin(), bytes.end()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("pipad_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& extra = "")
    {
        const auto path = dir_ / "config.json";
        io::write_text(path, R"({
  "dataset": {"synthetic": {"node_count": 150, "base_edges": 900, "steps": 12, "churn_rate": 0.05,
                            "feature_dim": 8}},
  "model": "tgcn", "hidden_dim": 8, "frame_size": 8, "seed": 3,
  "profile_samples": 2)" + extra + "\n}\n");
        return path;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, ConvertMatchesGoldenFiles)
{
    const auto out = dir_ / "conv";
    const auto r = invoke({"convert", "--input", (kData / "tiny_edges.txt").string(), "--nodes", "6", "--interval",
                           "10", "--edge-life", "2", "--slice-cap", "2", "--feature-dim", "4", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* name : {"snap_000000.scsr", "snap_000001.scsr", "snap_000002.scsr"}) {
        EXPECT_EQ(slurp(out / "scsr" / name), slurp(kData / "golden" / name)) << name;
    }
    EXPECT_TRUE(fs::exists(out / "storage.csv"));
    EXPECT_NE(r.out.find("sliced"), std::string::npos);
    const auto seq = read_sequence(out);
    EXPECT_EQ(seq.length(), 3u);
    EXPECT_EQ(seq[1].adjacency.nnz(), 9u);

    // rerunning into the same directory reproduces the files
    const auto first = slurp(out / "storage.csv");
    ASSERT_EQ(invoke({"convert", "--input", (kData / "tiny_edges.txt").string(), "--nodes", "6", "--interval",
                      "10", "--edge-life", "2", "--slice-cap", "2", "--feature-dim", "4", "--out", out.string()})
                  .code,
              0);
    EXPECT_EQ(slurp(out / "storage.csv"), first);
}

TEST_F(Cli, ConvertRejectsBadArguments)
{
    const auto input = (kData / "tiny_edges.txt").string();
    EXPECT_EQ(invoke({"convert", "--input", input, "--nodes", "6", "--slice-cap", "0", "--out", dir_.string()}).code, 2);
    EXPECT_EQ(invoke({"convert", "--input", input, "--out", dir_.string()}).code, 2);
    // node ids beyond --nodes are a data error
    EXPECT_EQ(invoke({"convert", "--input", input, "--nodes", "3", "--out", dir_.string()}).code, 3);
    EXPECT_NE(invoke({"convert", "--input", (dir_ / "missing.txt").string(), "--nodes", "6", "--out",
                      dir_.string()})
                  .code,
              0);
}

TEST_F(Cli, UnknownSubcommandIsUsageError)
{
    const auto r = invoke({"frobnicate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(Cli, GenerateAndAnalyzeOverlap)
{
    const auto data = dir_ / "seq";
    ASSERT_EQ(invoke({"generate", "--nodes", "100", "--edges", "400", "--steps", "6", "--churn", "0.1", "--out",
                      data.string()})
                  .code,
              0);
    const auto out = dir_ / "ov";
    const auto r = invoke({"analyze", "overlap", "--data", data.string(), "--frame-size", "4", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"pairwise.csv", "overlap.csv", "overlap.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST_F(Cli, KernelSweepHasTheExpectedShape)
{
    const auto out = dir_ / "k";
    const auto r = invoke({"analyze", "kernel", "--nodes", "2000", "--density", "0.01", "--dims", "2,4,8,16,32,64,128",
                           "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(slurp(out / "kernel.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<std::pair<unsigned long long, unsigned long long>> rows;  // requests, transactions
    while (std::getline(csv, line)) {
        std::istringstream f(line);
        std::string dim, req, txn;
        std::getline(f, dim, ',');
        std::getline(f, req, ',');
        std::getline(f, txn, ',');
        rows.emplace_back(std::stoull(req), std::stoull(txn));
    }
    ASSERT_EQ(rows.size(), 7u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rows[i].first, rows[i].second);
    for (std::size_t i = 3; i < 7; ++i) EXPECT_GT(rows[i].second, rows[i - 1].second);
}

TEST_F(Cli, BalanceReportsSmallerGapForSlices)
{
    const auto out = dir_ / "b";
    ASSERT_EQ(invoke({"analyze", "balance", "--nodes", "3000", "--edges", "15000", "--skew", "1", "--out",
                      out.string()})
                  .code,
              0);
    std::istringstream csv(slurp(out / "balance.csv"));
    std::string line;
    std::vector<double> gaps;
    std::getline(csv, line);
    while (std::getline(csv, line)) gaps.push_back(std::stod(line.substr(line.rfind(',') + 1)));
    ASSERT_EQ(gaps.size(), 2u);
    EXPECT_LT(gaps[1], gaps[0]);
}

TEST_F(Cli, SimulateNeedsAProfile)
{
    const auto cfg = write_config();
    const auto r = invoke({"simulate", "--config", cfg.string(), "--out", (dir_ / "run").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("build-profile"), std::string::npos);
}

TEST_F(Cli, SimulateIsDeterministic)
{
    const auto cfg = write_config();
    const auto a = dir_ / "a";
    const auto b = dir_ / "b";
    ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--build-profile", "--out", a.string()}).code, 0);
    ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--build-profile", "--out", b.string()}).code, 0);
    for (const char* f : {"summary.csv", "report.json", "timeline.json", "decisions.log", "config.json"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
    }
    EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
    EXPECT_EQ(slurp(a / "timeline.json"), slurp(b / "timeline.json"));
}

TEST_F(Cli, TuneBuildProfileThenExplain)
{
    const auto cfg = write_config();
    const auto profile = dir_ / "profile.json";
    ASSERT_EQ(invoke({"tune", "build-profile", "--config", cfg.string(), "--samples", "2", "--dims", "8",
                      "--out", profile.string()})
                  .code,
              0);
    ASSERT_TRUE(fs::exists(profile));
    const auto r = invoke({"tune", "explain", "--config", cfg.string(), "--profile", profile.string(), "--frame", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("selected"), std::string::npos);
    EXPECT_EQ(invoke({"simulate", "--config", cfg.string(), "--profile", profile.string(), "--out",
                      (dir_ / "run").string()})
                  .code,
              0);
}

TEST_F(Cli, AbRunFavoursPipelinedMode)
{
    const auto cfg = write_config(R"(, "resources": {"transfer_bandwidth": 512})");
    const auto out = dir_ / "ab";
    const auto r = invoke({"simulate", "--config", cfg.string(), "--build-profile", "--ab", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(out / "baseline" / "summary.csv"));
    EXPECT_TRUE(fs::exists(out / "pipad" / "summary.csv"));
    const auto csv = slurp(out / "ab.csv");
    const auto pos = csv.find("epoch_time_ratio,");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_GT(std::stod(csv.substr(pos + 17)), 1.0);
}

TEST_F(Cli, SimulateRejectsBadOverrides)
{
    const auto cfg = write_config();
    EXPECT_EQ(invoke({"simulate", "--config", cfg.string(), "--baseline", "two-snapshot"}).code, 2);
    EXPECT_EQ(invoke({"simulate", "--config", cfg.string(), "--model", "gcn", "--out", dir_.string()}).code, 2);
    EXPECT_NE(invoke({"simulate", "--config", (dir_ / "none.json").string()}).code, 0);
}
