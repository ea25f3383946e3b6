// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fvsrn/cli.hpp"
#include "test_util.hpp"

namespace fvsrn {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "fvsrn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = test::temp_dir("cli");
    vol = (dir / "g.vraw").string();
    ASSERT_EQ(run({"-q", "make-synthetic", "--kind", "gaussians", "--res", "16", "--out", vol}).code, 0);
  }
  fs::path dir;
  std::string vol;
};

TEST_F(Cli, MakeSyntheticAndMetrics) {
  const auto r = run({"metrics", vol, vol});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("psnr=99"), std::string::npos);
  EXPECT_EQ(volume_read(vol).dims, (std::array<int, 3>{16, 16, 16}));
}

TEST_F(Cli, TrainWorldWritesCheckpointAndManifest) {
  const auto out = (dir / "m.fvsrn").string();
  const auto r = run({"-q", "train-world", "--volume", vol, "--layers", "2", "--channels", "16", "--grid-res", "4",
                      "--grid-features", "4", "--epochs", "2", "--samples", "2048", "--batch", "512", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = checkpoint_load(out);
  EXPECT_EQ(m.config.layers, 2);
  EXPECT_EQ(m.config.volume_resolution, 16);
  ASSERT_TRUE(fs::exists(out + ".manifest.json"));
  const auto man = nlohmann::json::parse(slurp(out + ".manifest.json"));
  EXPECT_EQ(man["command"], "train-world");
  EXPECT_TRUE(man["resolved"].contains("model"));
  const std::string loss = slurp(out + ".loss.csv");
  EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 3);
}

TEST_F(Cli, RenderIsBitIdenticalAcrossRuns) {
  const auto model = (dir / "m.fvsrn").string();
  ASSERT_EQ(run({"-q", "train-world", "--volume", vol, "--layers", "2", "--channels", "16", "--grid-res", "4",
                 "--grid-features", "4", "--epochs", "1", "--samples", "1024", "--batch", "512", "--out", model})
                .code,
            0);
  for (const char* name : {"a.png", "b.png"})
    ASSERT_EQ(run({"-q", "render", "--model", model, "--width", "24", "--height", "16", "--out", (dir / name).string()})
                  .code,
              0);
  const std::string a = slurp(dir / "a.png");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b.png"));
  EXPECT_EQ(run({"-q", "--threads", "3", "render", "--model", model, "--width", "24", "--height", "16", "--out",
                 (dir / "c.png").string()})
                .code,
            0);
  EXPECT_EQ(a, slurp(dir / "c.png"));
}

TEST_F(Cli, AblateCsvShape) {
  const auto out = (dir / "ab.csv").string();
  const auto r = run({"-q", "ablate", "--volume", vol, "--grid", "R=0,4", "--features", "F=4", "--layers", "l=2",
                      "--channels", "c=16", "--epochs", "1", "--samples", "1024", "--batch", "512", "--views", "1",
                      "--eval-res", "16", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(out));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "grid_R,grid_F,layers,channels,fourier_m,grid_bytes,network_bytes,final_loss,psnr,ssim");
  std::vector<std::string> rows;
  while (std::getline(csv, line))
    if (!line.empty()) rows.push_back(line);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& row : rows) EXPECT_EQ(std::count(row.begin(), row.end(), ','), 9);
  EXPECT_EQ(rows[0].rfind("0,", 0), 0u);
}

TEST_F(Cli, QuantizeShrinksCheckpoint) {
  const auto model = (dir / "m.fvsrn").string(), packed = (dir / "q.fvsrn").string();
  ASSERT_EQ(run({"-q", "train-world", "--volume", vol, "--layers", "2", "--channels", "16", "--grid-res", "8",
                 "--grid-features", "4", "--epochs", "1", "--samples", "1024", "--batch", "512", "--out", model})
                .code,
            0);
  ASSERT_EQ(run({"-q", "quantize", "--model", model, "--weights", "f16", "--grid", "u8", "--out", packed}).code, 0);
  EXPECT_LT(fs::file_size(packed), fs::file_size(model));
  EXPECT_NO_THROW(checkpoint_load(packed));
}

TEST(CliErrors, ExitCodes) {
  EXPECT_EQ(run({"no-such-command"}).code, 1);
  EXPECT_EQ(run({"metrics", "only_one.vraw"}).code, 1);
  const auto missing = run({"metrics", "/nonexistent/a.vraw", "/nonexistent/b.vraw"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(missing.err.rfind("error: ", 0), 0u);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
}

}  // namespace
}  // namespace fvsrn
