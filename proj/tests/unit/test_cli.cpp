#include "pondstat/cli.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <sstream>

using namespace pondstat;
using testsupport::TempDir;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args, const std::string& input = {}) {
    args.insert(args.begin(), "pondstat");
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

struct CliFixture : ::testing::Test {
    TempDir dir;
    std::string data;

    void SetUp() override {
        data = (dir / "d.csv").string();
        testsupport::write_csv(dir / "d.csv", "x,z,g,y", 1000, [](std::size_t i) {
            const double x = static_cast<double>((i * 37) % 101) / 10.0;
            const double z = static_cast<double>((i * 11) % 17);
            return testsupport::fmt(x) + "," + testsupport::fmt(z) + "," + (i % 3 ? "u" : "w") + "," +
                   testsupport::fmt(1.5 * x - 0.5 * z + static_cast<double>(i % 7) / 10.0);
        });
    }
};

} // namespace

TEST_F(CliFixture, SizeExactAndEstimate) {
    EXPECT_EQ(cli({"size", data, "--exact"}).out, "1000\n");
    const auto r = cli({"size", data});
    EXPECT_EQ(r.code, 0);
    EXPECT_NEAR(std::stod(r.out), 1000.0, 100.0);
}

TEST_F(CliFixture, SeedIsEchoed) {
    const auto r = cli({"stats", data, "--qlist", "x", "-n", "50", "-k", "2", "--seed", "77"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("seed: 77"), std::string::npos);
    const auto random_seed = cli({"stats", data, "--qlist", "x", "-n", "50", "-k", "1"});
    EXPECT_NE(random_seed.err.find("seed: "), std::string::npos);
}

TEST_F(CliFixture, ThreadCountDoesNotChangeOutput) {
    for (const char* cmd : {"stats", "ols", "corr"}) {
        std::vector<std::string> base = {cmd, data, "--qlist", "x,z,y", "-n", "200", "-k", "16", "--seed", "5", "--json"};
        if (std::string(cmd) == "ols") base.insert(base.end(), {"--y", "y", "--x", "x,z"});
        auto serial = base;
        serial.insert(serial.end(), {"--threads", "1"});
        auto parallel = base;
        parallel.insert(parallel.end(), {"--threads", "4"});
        const auto a = cli(serial);
        const auto b = cli(parallel);
        ASSERT_EQ(a.code, 0) << a.err;
        EXPECT_EQ(a.out, b.out) << cmd;
    }
}

TEST_F(CliFixture, JsonLinesEndWithTerminalEvent) {
    const auto r = cli({"stats", data, "--qlist", "x", "-n", "100", "-k", "3", "--seed", "1", "--json"});
    std::istringstream lines(r.out);
    std::vector<nlohmann::json> docs;
    for (std::string l; std::getline(lines, l);) docs.push_back(nlohmann::json::parse(l));
    ASSERT_EQ(docs.size(), 4u);
    EXPECT_EQ(docs[2]["k"], 3);
    EXPECT_EQ(docs[3]["state"], "stopped_by_k");
    EXPECT_FALSE(docs[3].contains("x"));
}

TEST_F(CliFixture, ExitCodes) {
    EXPECT_EQ(cli({"stats", data, "--no-such-flag"}).code, 1);
    EXPECT_EQ(cli({"stats", (dir / "missing.csv").string()}).code, 2);
    EXPECT_EQ(cli({"stats", data, "--qlist", "x", "--col", "nope"}).code, 1);
    EXPECT_EQ(cli({"stats", data, "-n", "0"}).code, 1);
    EXPECT_EQ(cli({"logit", data, "--qlist", "x,y", "--y", "y", "--x", "x", "-k", "2"}).code, 2);
    EXPECT_EQ(cli({}).code, 1);
}

TEST_F(CliFixture, PlotsWrittenToOutdir) {
    const auto out = dir / "plots";
    std::filesystem::create_directories(out);
    const auto r = cli({"gbox", data, "--qlist", "x,y", "--y", "y", "--x", "x", "--groups", "4", "-n", "300", "-k", "2",
                        "--seed", "2", "--outdir", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(out / "gbox-1_1.svg"));
    EXPECT_TRUE(std::filesystem::exists(out / "gbox-1_2.svg"));
    EXPECT_NE(r.out.find("svg: "), std::string::npos);
}

TEST_F(CliFixture, ShuffleCommand) {
    const auto out = (dir / "shuffled.csv").string();
    const auto r = cli({"shuffle", data, out, "--mem", "4096", "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(cli({"size", out, "--exact"}).out, "1000\n");
}

TEST_F(CliFixture, ReplTranscriptMatchesGolden) {
    const std::string script =
        "help\n"
        "qlist x,z,y\n"
        "set niter 3\n"
        "set subsize 200\n"
        "set seed 9\n"
        "stats x,y\n"
        "table g\n"
        "app x sign(x)*log1p(abs(x))\n"
        "program\n"
        "stats nope\n"
        "ols y ~ x,z\n"
        "tasks\n"
        "quit\n";
    const auto r = cli({"repl", data, "--seed", "9"}, script);
    EXPECT_EQ(r.code, 0) << r.err;
    const std::string golden_path = std::string(PONDSTAT_GOLDEN_DIR) + "/repl_transcript.txt";
    if (std::getenv("PONDSTAT_UPDATE_GOLDEN") != nullptr) testsupport::write_file(golden_path, r.out);
    EXPECT_EQ(r.out, testsupport::read_file(golden_path));
}
