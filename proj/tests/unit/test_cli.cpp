#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = WAVEFARM_CLI_PATH;
const std::string kSamples = std::string(WAVEFARM_SOURCE_DIR) + "/data/synthetic_waves.csv";

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("wavefarm_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

/// Runs the CLI and returns its exit status; output goes to <out>/log.txt.
int run(const fs::path& out, const std::string& args) {
    const std::string cmd = "'" + kCli + "' --out '" + out.string() + "' --set climate.samples=" + kSamples + " " +
                            args + " >> '" + (out / "log.txt").string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const char* kFast = "--set data.n_s1=16 --set data.n_s2=16 --set grid.n_w=6";

}  // namespace

TEST(Cli, UsageErrorsAreConfigErrors) {
    const auto d = fresh_dir("usage");
    EXPECT_EQ(run(d, "frobnicate"), 2);
    EXPECT_EQ(run(d, "--preset huge gen-data"), 2);
    EXPECT_EQ(run(d, "--set optimize.nonexistent=3 gen-data"), 2);
    EXPECT_EQ(run(d, "--set grid.n_w=\\\"many\\\" gen-data"), 2);
    std::ofstream(d / "bad.json") << "{\"grid\": {\"colour\": 1}}";
    EXPECT_EQ(run(d, "--config " + (d / "bad.json").string() + " gen-data"), 2);
}

TEST(Cli, MissingInputsAreDataErrors) {
    const auto d = fresh_dir("missing");
    EXPECT_EQ(run(d, "train"), 3);
    EXPECT_EQ(run(d, "optimize"), 3);
    EXPECT_EQ(run(d, "report " + (d / "nothing.json").string()), 3);
}

TEST(Cli, BypassPipelineAndReport) {
    const auto d = fresh_dir("bypass");
    ASSERT_EQ(run(d, std::string(kFast) + " gen-data"), 0);
    EXPECT_TRUE(fs::exists(d / "hydro_one.dat"));
    EXPECT_EQ(slurp(d / "hydro_one.dat").rfind("# wavefarm-hydro", 0), 0u);
    ASSERT_EQ(run(d, std::string(kFast) + " --set train.bypass=true train"), 0);
    ASSERT_EQ(run(d, std::string(kFast) + " validate"), 0);
    const auto summary = nlohmann::json::parse(slurp(d / "validate_summary.json"));
    EXPECT_EQ(summary["version"], 1);
    ASSERT_EQ(run(d, std::string(kFast) + " --set optimize.budget=40 optimize"), 0);
    const auto rep = nlohmann::json::parse(slurp(d / "report.json"));
    EXPECT_EQ(rep["format"], "wavefarm-optimize-report");
    EXPECT_EQ(rep["version"], 1);
    EXPECT_TRUE(rep["feasible"].get<bool>());
    EXPECT_TRUE(fs::exists(d / "trace.csv"));
    EXPECT_TRUE(fs::exists(d / "layout.csv"));

    ASSERT_EQ(run(d, "report " + d.string()), 0);
    EXPECT_TRUE(fs::exists(d / "summary.csv"));

    auto bad = rep;
    bad["version"] = 99;
    const auto other = fresh_dir("bypass_badver");
    std::ofstream(other / "report.json") << bad.dump();
    EXPECT_EQ(run(d, "report " + (other / "report.json").string()), 3);

    EXPECT_EQ(run(d, std::string(kFast) + " --set validate.radius=40 validate"), 2);
}

TEST(Cli, InfeasibleExitCode) {
    const auto d = fresh_dir("infeasible");
    ASSERT_EQ(run(d, std::string(kFast) + " gen-data"), 0);
    ASSERT_EQ(run(d, std::string(kFast) + " --set train.bypass=true train"), 0);
    // A box far too small for four bodies of the smallest radius.
    EXPECT_EQ(run(d, std::string(kFast) +
                         " --set optimize.n_wec=4 --set optimize.budget=40 --set optimize.bounds.box_half_width=2 "
                         "optimize"),
              4);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    for (const auto& d : {a, b}) {
        ASSERT_EQ(run(d, std::string(kFast) + " --seed 7 gen-data"), 0);
        ASSERT_EQ(run(d, std::string(kFast) + " --seed 7 --set train.max_epochs=20 --set train.aux_max_epochs=20 "
                                              "--set train.patience=5 --set train.aux_patience=5 train"),
                  0);
        ASSERT_EQ(run(d, std::string(kFast) + " --seed 7 --set optimize.budget=30 optimize"), 0);
    }
    for (const char* f : {"hydro_one.dat", "hydro_two.dat", "bundle.json", "train_metrics.json", "report.json",
                          "trace.csv", "layout.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}
