#include <array>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <sys/wait.h>
#include <gtest/gtest.h>
#include <gesso/io.hpp>

using namespace gesso;
namespace fs = std::filesystem;

namespace {

struct RunResult
{
    int code = -1;
    std::string out;
};

RunResult run(const std::string& args)
{
    const std::string cmd = std::string(GESSO_CLI_PATH) + " " + args + " 2>/dev/null";
    RunResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

class Cli : public ::testing::Test
{
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() / ("gesso_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string file(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, SimulateWritesDataAndTruth)
{
    const RunResult r = run("simulate --n 50 --p 30 --p-g 4 --p-gxe 2 --seed 5 --data-out " + file("d.csv") +
                            " --truth-out " + file("t.json"));
    ASSERT_EQ(r.code, 0);
    const RawData d = io::read_csv(file("d.csv"));
    EXPECT_EQ(d.n(), 50);
    EXPECT_EQ(d.p(), 30);
    const auto [truth, p] = io::truth_from_json(io::json::parse(io::read_text(file("t.json"))));
    EXPECT_EQ(p, 30);
    EXPECT_EQ(truth.interaction_support.size(), 2u);
    ASSERT_EQ(run("simulate --n 50 --p 30 --seed 5 --format bin --data-out " + file("d.bin")).code, 0);
    EXPECT_EQ(io::read_binary(file("d.bin")).n(), 50);
}

TEST_F(Cli, FitMatchesLibraryAndIsReproducible)
{
    ASSERT_EQ(run("simulate --n 40 --p 20 --p-g 3 --p-gxe 1 --seed 2 --data-out " + file("d.csv")).code, 0);
    const RunResult a = run("fit --data " + file("d.csv") + " --lambda1 0.2 --lambda2 0.1 --no-timing");
    const RunResult b = run("fit --data " + file("d.csv") + " --lambda1 0.2 --lambda2 0.1 --no-timing");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const io::ResultDocument doc = io::parse_document(a.out);
    ASSERT_EQ(doc.fits.size(), 1u);
    const Dataset ds = io::load_dataset(file("d.csv"), io::Format::csv);
    const FitResult lib = fit(ds, PenaltyPair{0.2, 0.1}, SolverConfig{});
    EXPECT_DOUBLE_EQ(doc.fits[0].meta.primal, lib.meta.primal);
    EXPECT_TRUE(doc.fits[0].meta.converged);

    const RunResult grid = run("fit --data " + file("d.csv") + " --grid 3 --no-timing --out " + file("g.json"));
    ASSERT_EQ(grid.code, 0);
    const io::ResultDocument g = io::parse_document(io::read_text(file("g.json")));
    EXPECT_EQ(g.fits.size(), 9u);
    ASSERT_TRUE(g.grid.has_value());
    EXPECT_EQ(g.grid->lambda1.size(), 3u);
}

TEST_F(Cli, CvAndMetrics)
{
    ASSERT_EQ(run("simulate --n 60 --p 25 --p-g 3 --p-gxe 2 --seed 8 --data-out " + file("d.csv") + " --truth-out " +
                  file("t.json"))
                  .code,
              0);
    const RunResult cv = run("cv --data " + file("d.csv") + " --grid 4 --folds 3 --runs 2 --seed 1 --no-timing --out " +
                             file("cv.json"));
    ASSERT_EQ(cv.code, 0);
    const io::ResultDocument doc = io::parse_document(io::read_text(file("cv.json")));
    ASSERT_TRUE(doc.cv.has_value());
    ASSERT_TRUE(doc.selection.has_value());
    EXPECT_EQ(doc.cv->folds, 3);
    EXPECT_EQ(doc.cv->mean_loss.size(), 16u);
    EXPECT_EQ(doc.selection->runs, 2);
    const RunResult m = run("metrics --truth " + file("t.json") + " --result " + file("cv.json"));
    ASSERT_EQ(m.code, 0);
    const io::json mj = io::json::parse(m.out);
    EXPECT_GE(mj.at("auc_gxe").get<double>(), 0.0);
    EXPECT_LE(mj.at("auc_gxe").get<double>(), 1.0);
}

TEST_F(Cli, BenchOnSmallData)
{
    ASSERT_EQ(run("simulate --n 40 --p 60 --p-g 3 --p-gxe 2 --seed 4 --data-out " + file("d.csv")).code, 0);
    const RunResult r = run("bench --data " + file("d.csv") + " --reps 1");
    ASSERT_EQ(r.code, 0);
    const io::json j = io::json::parse(r.out);
    ASSERT_EQ(j.at("rows").size(), 4u);
    for (const auto& row : j.at("rows")) EXPECT_TRUE(row.at("converged").get<bool>());
}

TEST_F(Cli, ExitCodes)
{
    EXPECT_EQ(run("fit --data " + file("missing.csv") + " --grid 2").code, 4);
    EXPECT_EQ(run("fit").code, 2);
    EXPECT_EQ(run("fit --data x.csv").code, 2);
    EXPECT_EQ(run("fit --data x.csv --lambda1 0.1").code, 2);
    EXPECT_EQ(run("nonsense").code, 2);
    ASSERT_EQ(run("simulate --n 40 --p 20 --seed 1 --data-out " + file("d.csv")).code, 0);
    const RunResult starved =
        run("fit --data " + file("d.csv") + " --lambda1 0.01 --lambda2 0.01 --tol 1e-14 --max-iter 1 --no-timing");
    EXPECT_EQ(starved.code, 3);
    const io::ResultDocument doc = io::parse_document(starved.out);
    EXPECT_FALSE(doc.fits.at(0).meta.converged);
    EXPECT_EQ(run("simulate --n 10 --p 5 --p-g 1 --p-gxe 3 --data-out " + file("bad.csv")).code, 2);
}
