#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "egoseg/png_io.hpp"
#include "test_util.hpp"

#ifndef EGOSEG_CLI_PATH
#error "EGOSEG_CLI_PATH must point at the egoseg executable"
#endif

namespace fs = std::filesystem;
using namespace egoseg;

namespace {

struct RunResult {
    int code = 0;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

RunResult run(const fs::path& dir, const std::string& args) {
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = "cd \"" + dir.string() + "\" && \"" EGOSEG_CLI_PATH "\" " + args + " > \"" + o.string() +
                            "\" 2> \"" + e.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

std::vector<double> weights_line(const std::string& out) {
    std::istringstream in(out.substr(out.find("weights:") + 8));
    std::vector<double> w;
    for (double v; in >> v;) w.push_back(v);
    return w;
}

} // namespace

TEST(Cli, Version) {
    testutil::TempDir dir("cli_ver");
    RunResult r = run(dir.path, "--version");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("egoseg 1.0.0"), std::string::npos);
    EXPECT_NE(r.out.find("weight format"), std::string::npos);
}

TEST(Cli, WeightsFromFrequenciesAndOverride) {
    testutil::TempDir dir("cli_w");
    RunResult r = run(dir.path, "weights --frequencies 0.8929,0.1529");
    ASSERT_EQ(r.code, 0) << r.err;
    auto w = weights_line(r.out);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_NEAR(w[0], 0.56, 0.005);
    EXPECT_NEAR(w[1], 3.27, 0.005);
    EXPECT_TRUE(fs::exists(dir.path / "egoseg-weights.run.json"));

    r = run(dir.path, "weights --override 1.5,2.5");
    ASSERT_EQ(r.code, 0) << r.err;
    w = weights_line(r.out);
    EXPECT_EQ(w, (std::vector<double>{1.5, 2.5}));

    r = run(dir.path, "weights --override 1,2,3");
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, WeightsFromManifest) {
    testutil::TempDir dir("cli_wm");
    LabelMask m(10, 10);
    for (int i = 0; i < 10; ++i) m.data[i] = 1;
    write_label_mask(dir.path / "m.png", m);
    write_rgb(dir.path / "i.png", testutil::solid(10, 10, 1, 2, 3));
    std::ofstream(dir.path / "man.json")
        << R"({"format_version":1,"seed":0,"records":[{"image_path":"i.png","mask_path":"m.png","source":"synthetic","video_id":"v","frame_index":0,"split":"train"}]})";
    RunResult r = run(dir.path, "weights --manifest man.json");
    ASSERT_EQ(r.code, 0) << r.err;
    auto w = weights_line(r.out);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_NEAR(w[0], 1.0 / (2 * 0.9), 1e-4);
    EXPECT_NEAR(w[1], 5.0, 1e-4);
}

TEST(Cli, EvalIdenticalDirectoriesIsPerfect) {
    testutil::TempDir dir("cli_eval");
    fs::create_directories(dir.path / "a");
    fs::create_directories(dir.path / "b");
    for (int i = 0; i < 3; ++i) {
        LabelMask m(12, 9);
        m.data = testutil::random_mask(12, 9, i).data;
        const std::string name = "f" + std::to_string(i) + ".png";
        write_label_mask(dir.path / "a" / name, m);
        write_label_mask(dir.path / "b" / name, m);
    }
    RunResult r = run(dir.path, "eval --pred a --gt b --out report.json");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("Test Dataset"), std::string::npos);
    auto j = nlohmann::json::parse(slurp(dir.path / "report.json"));
    EXPECT_EQ(j["miou"].get<double>(), 1.0);
    EXPECT_EQ(j["images"].get<int>(), 3);
    EXPECT_TRUE(fs::exists(dir.path / "report.json.run.json"));
}

TEST(Cli, SynthIsByteReproducible) {
    testutil::TempDir dir("cli_synth");
    std::ofstream(dir.path / "cfg.json") << R"({"trimap":{"radius":2}})";
    ASSERT_EQ(run(dir.path, "--config cfg.json gen-toy --out toy --n-fg 3 --n-bg 2 --width 48 --height 48 --seed 5").code, 0);
    for (const char* out : {"s1", "s2"}) {
        RunResult r = run(dir.path, std::string("--config cfg.json synth --fg toy/fg --bg toy/bg --n 4 --seed 3 --out ") + out);
        ASSERT_EQ(r.code, 0) << r.err;
    }
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir.path / "s1")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), dir.path / "s1");
        EXPECT_EQ(slurp(e.path()), slurp(dir.path / "s2" / rel)) << rel;
        ++files;
    }
    EXPECT_EQ(files, 4u * 2 + 2);
    auto rec = nlohmann::json::parse(slurp(dir.path / "s1" / "run_record.json"));
    EXPECT_EQ(rec["command"], "synth");
    EXPECT_EQ(rec["seeds"]["synth"], 3);
    EXPECT_EQ(rec["config_hash"].get<std::string>().size(), 16u);
}

TEST(Cli, ErrorsAreStructured) {
    testutil::TempDir dir("cli_err");
    RunResult r = run(dir.path, "trimap --mask missing.png --out t.png");
    EXPECT_EQ(r.code, 2);
    const auto pos = r.err.find("egoseg: error ");
    ASSERT_NE(pos, std::string::npos) << r.err;
    auto j = nlohmann::json::parse(r.err.substr(pos + 14));
    EXPECT_EQ(j["command"], "trimap");
    EXPECT_EQ(j["error"], "io");

    std::ofstream(dir.path / "cfg.json") << R"({"net":{"bogus":1}})";
    r = run(dir.path, "--config cfg.json weights --override 1,1");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("net.bogus"), std::string::npos);

    EXPECT_NE(run(dir.path, "no-such-command").code, 0);
}
