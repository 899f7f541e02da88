// Copyright 2026 The Super Token Transformer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stt/binary_io.hpp"
#include "stt/checkpoint.hpp"
#include "stt/dataset.hpp"
#include "stt/flops.hpp"
#include "stt/tools/app.hpp"
#include "stt/tools/config_file.hpp"
#include "stt/tools/image_io.hpp"
#include "stt/tools/verify.hpp"
#include "stt/tools/viz.hpp"

namespace stt {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("stt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image solid(int size, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image im{size, size, 3, {}};
  for (int i = 0; i < size * size; ++i) im.pixels.insert(im.pixels.end(), {r, g, b});
  return im;
}

Image dataset_image(const Dataset& d, std::size_t i) {
  // Both layouts are row-major and channel-last.
  const auto* px = d.pixels.data() + i * d.sample_bytes();
  return Image{d.width, d.height, 3, {px, px + d.sample_bytes()}};
}

// ---------------------------------------------------------------- image io

TEST(Pnm, RoundTripsColourAndGray) {
  Image rgb{3, 2, 3, {}};
  for (int i = 0; i < 18; ++i) rgb.pixels.push_back(static_cast<std::uint8_t>(i * 13));
  const auto back = decode_pnm(encode_pnm(rgb), "rgb");
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.pixels, rgb.pixels);

  Image gray{2, 2, 1, {0, 64, 128, 255}};
  const auto bytes = encode_pnm(gray);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 2), "P5");
  EXPECT_EQ(decode_pnm(bytes, "gray").pixels, gray.pixels);
}

TEST(Pnm, AcceptsCommentsAndSmallMaxval) {
  const std::string text = "P6\n# made by hand\n1 1 # trailing\n15\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.insert(bytes.end(), {15, 0, 5});
  const auto im = decode_pnm(bytes, "hand");
  // Samples rescale to the 0..255 range.
  EXPECT_EQ(im.pixels, (std::vector<std::uint8_t>{255, 0, 85}));
}

TEST(Pnm, ErrorsCarryOffsets) {
  const std::string bad = "P3\n1 1\n255\n0 0 0\n";
  try {
    decode_pnm({bad.begin(), bad.end()}, "ascii");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.offset(), 0);
  }
  const std::string header = "P6\n4 4\n255\n";
  std::vector<std::uint8_t> truncated(header.begin(), header.end());
  truncated.resize(truncated.size() + 10, 7);
  try {
    decode_pnm(truncated, "short");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.offset(), static_cast<std::int64_t>(truncated.size()));
  }
  const std::string wide = "P6\n1 1\n65535\n";
  EXPECT_THROW(decode_pnm({wide.begin(), wide.end()}, "wide"), DataError);
}

TEST(ImageToInput, BoxAveragesAndReplicatesIntegerFactors) {
  Image im{4, 4, 3, {}};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) im.pixels.insert(im.pixels.end(), {static_cast<std::uint8_t>(y * 4 + x), 0, 255});
  const auto down = image_to_input(im, 2);
  ASSERT_EQ(down.shape(), (Shape{1, 3, 2, 2}));
  // Top-left 2x2 block holds 0, 1, 4, 5.
  EXPECT_FLOAT_EQ(down.data()[0], 2.5f / 255.0f);
  EXPECT_FLOAT_EQ(down.data()[8], 1.0f);

  const auto up = image_to_input(im, 8);
  ASSERT_EQ(up.shape(), (Shape{1, 3, 8, 8}));
  EXPECT_FLOAT_EQ(up.data()[0 * 8 + 7], 3.0f / 255.0f);
  EXPECT_FLOAT_EQ(up.data()[7 * 8 + 0], 12.0f / 255.0f);

  EXPECT_THROW(image_to_input(im, 3), DataError);
  EXPECT_THROW(image_to_input(Image{4, 2, 3, std::vector<std::uint8_t>(24)}, 4), DataError);
}

// ------------------------------------------------------------- run config

TEST(RunConfigFile, ParsesEveryKey) {
  const auto run = parse_run_config(R"(# tiny variant
arch = tiny
res = 64
grids = 4, 2, 1, 1
blocks = 1,1,2,1
channels = 16,32,64,128
heads = 1,2,4,8
n_iter = 2
phantom_mode = literal
pos = rpe
drop_path = 0.1
n_classes = 3
optimizer = sgd
lr = 0.05
wd = 0.001
steps = 20
batch = 8
seed = 11
clip_norm = 0
eval_every = 5
)");
  EXPECT_EQ(run.arch.resolution, 64);
  EXPECT_EQ(run.arch.grids, (std::array<int, 4>{4, 2, 1, 1}));
  EXPECT_EQ(run.arch.blocks, (std::array<int, 4>{1, 1, 2, 1}));
  EXPECT_EQ(run.arch.channels[0], 16);
  EXPECT_EQ(run.arch.stem[0], ArchConfig::stem_for(16)[0]);
  EXPECT_EQ(run.arch.heads[3], 8);
  EXPECT_EQ(run.arch.n_iter, 2);
  EXPECT_EQ(run.arch.phantom, PhantomMode::kLiteral);
  EXPECT_EQ(run.arch.pos, PosEncoding::kRpe);
  EXPECT_DOUBLE_EQ(run.arch.drop_path, 0.1);
  ASSERT_TRUE(run.n_classes.has_value());
  EXPECT_EQ(run.arch.n_classes, 3);
  EXPECT_EQ(run.opt.kind, OptimizerKind::kSgdMomentum);
  EXPECT_DOUBLE_EQ(run.opt.lr, 0.05);
  EXPECT_DOUBLE_EQ(run.opt.weight_decay, 0.001);
  EXPECT_EQ(run.opt.steps, 20);
  EXPECT_EQ(run.opt.batch, 8);
  EXPECT_EQ(run.opt.seed, 11u);
  EXPECT_DOUBLE_EQ(run.opt.clip_norm, 0.0);
  EXPECT_EQ(run.eval_every, 5);
}

TEST(RunConfigFile, DefaultsToTiny) {
  const auto run = parse_run_config("");
  EXPECT_EQ(run.arch.name, "tiny");
  EXPECT_FALSE(run.n_classes.has_value());
  EXPECT_EQ(run.opt.steps, OptimizerConfig{}.steps);
}

TEST(RunConfigFile, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      parse_run_config(text, "run.cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("steps = 3\nbogus = 1\n").find("run.cfg:2"), std::string::npos);
  EXPECT_NE(message("lr = 0.1\nlr = 0.2\n").find("run.cfg:2"), std::string::npos);
  EXPECT_NE(message("steps = many\n").find("run.cfg:1"), std::string::npos);
  EXPECT_NE(message("grids = 1,2\n").find("run.cfg:1"), std::string::npos);
  EXPECT_NE(message("no equals sign\n").find("run.cfg:1"), std::string::npos);
  EXPECT_NE(message("arch = huge\n").find("run.cfg:1"), std::string::npos);
  EXPECT_THROW(load_run_config("/nonexistent/run.cfg"), DataError);
}

// ------------------------------------------------------------ visualization

TEST(Segmentation, UniformAssociationsGiveTheRegularGrid) {
  // p = q = 3 cells of 2 x 2 tokens, every in-bounds slot equally weighted.
  const auto valid = slot_validity(3, 3);
  std::vector<float> w(9 * 4 * kSlots);
  for (int cell = 0; cell < 9; ++cell) {
    int count = 0;
    for (int k = 0; k < kSlots; ++k) count += valid[cell * kSlots + k];
    for (int t = 0; t < 4; ++t)
      for (int k = 0; k < kSlots; ++k)
        w[(cell * 4 + t) * kSlots + k] = valid[cell * kSlots + k] ? 1.0f / count : 0.0f;
  }
  const auto q = AssociationMap<float>::from_weights(Tensor(Shape{1, 9, 4, kSlots}, w), 3, 3, 2, 2);
  const auto seg = segment_tokens(q);
  EXPECT_EQ(seg, regular_grid(6, 6, 2, 2));
  EXPECT_EQ(count_regions(seg), 9);
}

TEST(Segmentation, ArgmaxMovesTokensAndIgnoresPhantomSlots) {
  // 2 x 2 cells of 1 token each. Cell 0's token prefers its right neighbour;
  // cell 3's token puts its largest weight on an out-of-bounds slot.
  std::vector<float> w(4 * kSlots, 0.0f);
  auto set = [&](int cell, int slot, float v) { w[cell * kSlots + slot] = v; };
  set(0, 4, 0.3f), set(0, 5, 0.7f);
  set(1, 4, 1.0f);
  set(2, 4, 1.0f);
  set(3, 8, 0.9f), set(3, 0, 0.06f), set(3, 4, 0.04f);
  const auto q = AssociationMap<float>::from_weights(Tensor(Shape{1, 4, 1, kSlots}, w), 2, 2, 1, 1);
  EXPECT_EQ(segment_tokens(q), (std::vector<int>{1, 1, 2, 0}));
}

TEST(Segmentation, RegularGridLayout) {
  EXPECT_EQ(regular_grid(2, 4, 1, 2), (std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3}));
  EXPECT_EQ(count_regions({5, 5, 1, 9}), 3);
}

TEST(Segmentation, ConstantTokensGiveTheRegularGrid) {
  // Every super token of a constant map is the same vector, so each token's
  // in-bounds slots tie and the centre slot wins.
  for (auto mode : {PhantomMode::kLiteral, PhantomMode::kMasked})
    for (int n_iter : {0, 1, 3})
      for (auto [p, q, h, w] : {std::array{1, 1, 4, 4}, {2, 2, 4, 4}, {3, 2, 2, 4}, {4, 4, 2, 2}, {2, 3, 1, 3}})
        for (float level : {0.0f, 0.37f, -2.5f}) {
          StaConfig cfg;
          cfg.grid_h = h;
          cfg.grid_w = w;
          cfg.n_iter = n_iter;
          cfg.phantom = mode;
          const Tensor x(Shape{1, 8, p * h, q * w}, std::vector<float>(static_cast<std::size_t>(8 * p * h * q * w), level));
          EXPECT_EQ(segment_tokens(sts(x, cfg).q), regular_grid(p * h, q * w, h, w))
              << to_string(mode) << " n_iter " << n_iter << " grid " << p << "x" << q << " level " << level;
        }
}

TEST(Visualize, ConstantStageFeaturesGiveTheRegularGrid) {
  // Zeroing the last convolution before a stage and that stage's CPE kernel
  // makes the stage input constant for any image; zero padding elsewhere
  // otherwise leaves border effects in the features of a constant image.
  for (auto mode : {PhantomMode::kLiteral, PhantomMode::kMasked})
    for (int stage : {0, 1}) {
      auto cfg = ArchConfig::preset("tiny");
      cfg.phantom = mode;
      auto model = SvitModel::build(cfg, 3);
      const std::string before = stage == 0 ? "stem.3.kernel" : "merge1.kernel";
      const std::string cpe = "stage" + std::to_string(stage + 1) + ".block0.cpe.kernel";
      model.visit([&](const std::string& name, Tensor& t, TensorRole) {
        if (name == before || name == cpe) t = Tensor::zeros(t.shape());
      });
      for (std::uint8_t level : {0, 97, 255}) {
        const auto v = visualize(model, image_to_input(solid(32, level, level / 2, 3), 32), stage);
        const int cell = cfg.sta_config(stage).grid_h;
        EXPECT_EQ(v.assignment, regular_grid(v.token_h, v.token_w, cell, cell))
            << to_string(mode) << " stage " << stage << " level " << int(level);
        EXPECT_EQ(count_regions(v.assignment), v.grid_p * v.grid_q);
      }
    }
}

TEST(Visualize, RegionCountAndHeatmapContract) {
  SyntheticDatasetSpec spec;
  spec.samples_per_class = 2;
  const auto data = gen_dataset(spec);
  for (auto mode : {PhantomMode::kLiteral, PhantomMode::kMasked}) {
    auto cfg = ArchConfig::preset("tiny");
    cfg.phantom = mode;
    auto model = SvitModel::build(cfg, 5);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(data.size()); ++i) {
      const std::vector<std::int64_t> one{i};
      const auto input = data.images(one);
      for (int stage : {0, 1}) {
        const auto v = visualize(model, input, stage);
        EXPECT_LE(count_regions(v.assignment), v.grid_p * v.grid_q);
        EXPECT_GE(count_regions(v.assignment), 1);
        EXPECT_EQ(v.anchor, (std::pair{v.token_h / 2, v.token_w / 2}));
        // Masked mode: the effective attention row is a distribution over
        // tokens. Literal mode loses the mass given to phantom super tokens.
        const double total = std::accumulate(v.attention_row.begin(), v.attention_row.end(), 0.0);
        if (mode == PhantomMode::kMasked) {
          EXPECT_NEAR(total, 1.0, 1e-4);
        } else {
          EXPECT_GT(total, 0.0);
          EXPECT_LE(total, 1.0 + 1e-6);
        }
        for (double a : v.attention_row) EXPECT_GE(a, 0.0);
        ASSERT_EQ(v.heatmap.channels, 1);
        ASSERT_EQ(v.heatmap.width, 32);
        ASSERT_EQ(v.heatmap.height, 32);
        EXPECT_EQ(*std::max_element(v.heatmap.pixels.begin(), v.heatmap.pixels.end()), 255);
        ASSERT_EQ(v.segmentation.channels, 3);
        EXPECT_EQ(v.segmentation.pixels.size(), 32u * 32u * 3u);
      }
    }
  }
}

TEST(Visualize, RejectsGlobalStagesAndBadAnchors) {
  auto model = SvitModel::build(ArchConfig::preset("tiny"), 1);
  const auto input = image_to_input(solid(32, 10, 20, 30), 32);
  EXPECT_THROW(visualize(model, input, 3), ConfigError);
  EXPECT_THROW(visualize(model, input, 4), UsageError);
  EXPECT_THROW(visualize(model, input, 0, std::pair{8, 0}), UsageError);
  EXPECT_THROW(visualize(model, input, 0, std::pair{0, -1}), UsageError);
  const auto v = visualize(model, input, 0, std::pair{0, 7});
  EXPECT_EQ(v.anchor, (std::pair{0, 7}));
}

// ------------------------------------------------------------------ verify

TEST(Verify, SuitesPassAndAreNamed) {
  for (const char* suite : {"oracle", "invariants"}) {
    const auto checks = run_suite(suite);
    EXPECT_FALSE(checks.empty());
    for (const auto& c : checks) EXPECT_TRUE(c.passed) << format_check(c);
  }
  EXPECT_GE(oracle_suite().size(), 2u * 27u);
  EXPECT_THROW(run_suite(""), UsageError);
  EXPECT_THROW(run_suite("fast"), UsageError);
}

TEST(Verify, FormatsOneLinePerCheck) {
  EXPECT_EQ(format_check({"a.b", 1.5e-7, 1e-6, true, "x"}), "PASS a.b  1.500e-07 <= 1.0e-06  (x)");
  EXPECT_EQ(format_check({"c", 2.0, 1.0, false, ""}).substr(0, 7), "FAIL c ");
}

// --------------------------------------------------------------------- cli

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({"train", "--help"}).code, kExitOk);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"verify"}).code, kExitUsage);
  EXPECT_EQ(cli({"verify", "--suite", ""}).code, kExitUsage);
  EXPECT_EQ(cli({"flops", "--res", "abc"}).code, kExitUsage);
}

TEST(Cli, FlopsMatchesTheAccountant) {
  TempDir dir;
  const auto r = cli({"flops", "--arch", "tiny", "--csv", dir / "tiny.csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = count_model(ArchConfig::preset("tiny"), 32);
  EXPECT_EQ(r.out.substr(0, report.table().size()), report.table());
  EXPECT_EQ(read_text(dir / "tiny.csv"), report.csv());

  const auto unknown = cli({"flops", "--arch", "svit-xl"});
  EXPECT_EQ(unknown.code, kExitUsage);
  EXPECT_NE(unknown.err.find("svit-s"), std::string::npos);

  write_text(dir / "run.cfg", "arch = svit-s\n");
  const auto via_config = cli({"flops", "--config", dir / "run.cfg", "--res", "224"});
  ASSERT_EQ(via_config.code, kExitOk);
  EXPECT_EQ(via_config.out, count_model(ArchConfig::preset("svit-s"), 224).table());
  EXPECT_EQ(cli({"flops", "--arch", "tiny", "--res", "30"}).code, kExitUsage);
}

TEST(Cli, VerifyInvariantsExitsZero) {
  const auto r = cli({"verify", "--suite", "invariants"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("checks passed"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, GenDataTrainInferViz) {
  TempDir dir;
  ASSERT_EQ(cli({"gen-data", "--out", dir / "train.stds", "--per-class", "32"}).code, kExitOk);
  ASSERT_EQ(cli({"gen-data", "--out", dir / "held.stds", "--per-class", "8", "--first-index", "64"}).code, kExitOk);
  const auto train_set = read_dataset(dir / "train.stds");
  EXPECT_EQ(train_set.size(), 64u);

  write_text(dir / "run.cfg", "steps = 60\nbatch = 16\neval_every = 20\n");
  const auto t = cli({"train", "--config", dir / "run.cfg", "--data", dir / "train.stds", "--heldout",
                      dir / "held.stds", "--out", dir / "model.ckpt"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_NE(t.out.find("clipped to norm 5"), std::string::npos);
  const auto log = read_text(dir / "model.ckpt.log");
  EXPECT_NE(log.find("\n1 "), std::string::npos);
  EXPECT_NE(log.find("\n60 "), std::string::npos);
  EXPECT_NE(log.find("# final train_acc"), std::string::npos);
  EXPECT_EQ(load_model(dir / "model.ckpt").cfg.n_classes, 2);

  // A training image is classified as its label with probability > 0.5.
  for (std::size_t i : {0u, 1u}) {
    write_pnm(dir / "sample.ppm", dataset_image(train_set, i));
    const auto r = cli({"infer", "--ckpt", dir / "model.ckpt", "--image", dir / "sample.ppm"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const int label = train_set.labels[i];
    EXPECT_NE(r.out.find("label " + std::to_string(label)), std::string::npos) << r.out;
    const auto at = r.out.find("p[" + std::to_string(label) + "] ");
    ASSERT_NE(at, std::string::npos);
    EXPECT_GT(std::stod(r.out.substr(at + 5)), 0.5);
  }

  const auto v = cli({"viz", "--ckpt", dir / "model.ckpt", "--image", dir / "sample.ppm", "--stage", "2", "--out",
                      dir / "v", "--anchor", "1,3"});
  ASSERT_EQ(v.code, kExitOk) << v.err;
  const auto seg = read_pnm(dir / "v_segmentation.ppm");
  const auto heat = read_pnm(dir / "v_heatmap.pgm");
  EXPECT_EQ(seg.channels, 3);
  EXPECT_EQ(heat.channels, 1);
  EXPECT_EQ(seg.width, 32);
  EXPECT_EQ(*std::max_element(heat.pixels.begin(), heat.pixels.end()), 255);

  EXPECT_EQ(cli({"viz", "--ckpt", dir / "model.ckpt", "--image", dir / "sample.ppm", "--out", dir / "v", "--anchor",
                 "1;3"}).code,
            kExitUsage);
  EXPECT_EQ(cli({"viz", "--ckpt", dir / "model.ckpt", "--image", dir / "sample.ppm", "--out", dir / "v", "--stage",
                 "3"}).code,
            kExitUsage);
}

TEST(Cli, DataErrorsExitThreeWithOffsets) {
  TempDir dir;
  auto model = SvitModel::build(ArchConfig::preset("tiny"), 1);
  save_model(dir / "m.ckpt", model);
  const std::string header = "P6\n32 32\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.resize(bytes.size() + 100, 9);
  write_file(dir / "short.ppm", bytes);
  const auto r = cli({"infer", "--ckpt", dir / "m.ckpt", "--image", dir / "short.ppm"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("byte offset " + std::to_string(bytes.size())), std::string::npos) << r.err;

  write_pnm(dir / "odd.ppm", solid(24, 1, 2, 3));
  EXPECT_EQ(cli({"infer", "--ckpt", dir / "m.ckpt", "--image", dir / "odd.ppm"}).code, kExitData);
  EXPECT_EQ(cli({"infer", "--ckpt", dir / "missing.ckpt", "--image", dir / "odd.ppm"}).code, kExitData);
  EXPECT_EQ(cli({"train", "--data", dir / "missing.stds", "--out", dir / "x.ckpt"}).code, kExitData);

  write_text(dir / "bad.cfg", "steps = 1\nwat = 2\n");
  const auto c = cli({"train", "--config", dir / "bad.cfg", "--data", dir / "missing.stds", "--out", dir / "x.ckpt"});
  EXPECT_EQ(c.code, kExitUsage);
  EXPECT_NE(c.err.find("bad.cfg:2"), std::string::npos) << c.err;
}

}  // namespace
}  // namespace stt
