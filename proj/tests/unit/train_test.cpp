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

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "stt/binary_io.hpp"
#include "stt/checkpoint.hpp"
#include "stt/gradcheck.hpp"
#include "stt/ops.hpp"
#include "stt/random.hpp"
#include "stt/train.hpp"

using namespace stt;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("stt_train_test_" + name);
}

SyntheticDatasetSpec small_spec(int per_class = 8) {
  SyntheticDatasetSpec s;
  s.samples_per_class = per_class;
  return s;
}

// Mean over the designated quadrant, all channels, unit-scaled.
double quadrant_mean(const Dataset& d, std::int64_t i, int quadrant) {
  const int y0 = quadrant / 2 * d.height / 2, x0 = quadrant % 2 * d.width / 2;
  double sum = 0.0;
  int n = 0;
  for (int y = y0; y < y0 + d.height / 2; ++y) {
    for (int x = x0; x < x0 + d.width / 2; ++x) {
      for (int c = 0; c < d.channels; ++c, ++n) {
        sum += d.pixels[static_cast<std::size_t>(i * d.sample_bytes() + (y * d.width + x) * d.channels + c)] / 255.0;
      }
    }
  }
  return sum / n;
}

}  // namespace

TEST(GenDataset, BalancedCountsAndHeader) {
  const auto d = gen_dataset(small_spec(256));
  EXPECT_EQ(d.size(), 512);
  int ones = 0;
  for (auto l : d.labels) ones += l;
  EXPECT_EQ(ones, 256);
  const auto path = temp_path("header.stds");
  write_dataset(path, d);
  const auto bytes = read_file(path);
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "STDS");
  EXPECT_EQ(bytes[4] | bytes[5] << 8, 1);
  EXPECT_EQ(bytes[6] | bytes[7] << 8 | bytes[8] << 16 | bytes[9] << 24, 512);
  EXPECT_EQ(bytes[10] | bytes[11] << 8, 32);
  EXPECT_EQ(bytes[12] | bytes[13] << 8, 32);
  EXPECT_EQ(bytes[14], 3);
  EXPECT_EQ(bytes[15], 2);
  EXPECT_EQ(bytes.size(), 16u + 512u * (1 + 32 * 32 * 3));
  std::filesystem::remove(path);
}

TEST(GenDataset, SameSeedIsByteIdentical) {
  for (auto kind : {DatasetKind::kQuadrantBlobs, DatasetKind::kStripedTextures}) {
    auto spec = small_spec();
    spec.kind = kind;
    spec.n_classes = 3;
    const auto a = temp_path("a.stds"), b = temp_path("b.stds");
    write_dataset(a, gen_dataset(spec));
    write_dataset(b, gen_dataset(spec));
    EXPECT_EQ(read_file(a), read_file(b));
    spec.seed = 8;
    write_dataset(b, gen_dataset(spec));
    EXPECT_NE(read_file(a), read_file(b));
    std::filesystem::remove(a);
    std::filesystem::remove(b);
  }
}

TEST(GenDataset, OffsetSplitsAreDisjointDrawsOfTheSameStream) {
  auto spec = small_spec(4);
  const auto whole = gen_dataset(spec);
  spec.samples_per_class = 2;
  spec.first_index = 4;
  const auto tail = gen_dataset(spec);
  const auto bytes = static_cast<std::size_t>(whole.sample_bytes());
  EXPECT_TRUE(std::equal(tail.pixels.begin(), tail.pixels.end(), whole.pixels.begin() + 4 * bytes));
}

TEST(GenDataset, QuadrantBlobsSeparateByDesignatedQuadrant) {
  const auto d = gen_dataset(small_spec(128));
  for (int q = 0; q < 2; ++q) {
    double mean[2] = {0, 0};
    for (std::int64_t i = 0; i < d.size(); ++i) mean[d.labels[i]] += quadrant_mean(d, i, q) / 128;
    const double own = mean[q], other = mean[1 - q];
    EXPECT_GE(own - other, 0.3) << "quadrant " << q << ": " << own << " vs " << other;
  }
}

TEST(GenDataset, InvalidSpecIsConfigError) {
  auto spec = small_spec();
  spec.n_classes = 11;
  EXPECT_THROW(gen_dataset(spec), ConfigError);
  spec.n_classes = 1;
  EXPECT_THROW(gen_dataset(spec), ConfigError);
  EXPECT_THROW(parse_dataset_kind("plaid"), ConfigError);
}

TEST(ReadDataset, RoundTripAndMalformedInput) {
  const auto d = gen_dataset(small_spec(3));
  const auto path = temp_path("rt.stds");
  write_dataset(path, d);
  const auto back = read_dataset(path);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.pixels, d.pixels);

  auto bytes = read_file(path);
  bytes.pop_back();
  write_file(path, bytes);
  try {
    read_dataset(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.offset(), static_cast<std::int64_t>(bytes.size()));
  }

  bytes = read_file(temp_path("rt.stds"));
  write_dataset(path, d);
  bytes = read_file(path);
  bytes[16] = 7;  // first label
  write_file(path, bytes);
  try {
    read_dataset(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.offset(), 16);
  }
  bytes[0] = 'X';
  write_file(path, bytes);
  EXPECT_THROW(read_dataset(path), DataError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_dataset(path), DataError);
}

TEST(Dataset, ImagesAreChannelFirstUnitScaled) {
  Dataset d;
  d.height = 1;
  d.width = 2;
  d.channels = 3;
  d.n_classes = 2;
  d.labels = {1};
  d.pixels = {255, 0, 51, 0, 255, 102};
  const std::vector<std::int64_t> idx{0};
  const auto t = d.images(idx);
  ASSERT_EQ(t.shape(), (Shape{1, 3, 1, 2}));
  const std::vector<float> expected{1.0f, 0.0f, 0.0f, 1.0f, 0.2f, 0.4f};
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_FLOAT_EQ(t.data()[i], expected[i]);
  EXPECT_EQ(d.labels_of(idx), std::vector<int>{1});
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  for (int k : {2, 3, 10}) {
    const std::vector<int> labels{0, k - 1};
    EXPECT_NEAR(cross_entropy(TensorD::zeros(Shape{2, k}), labels).item(), std::log(k), 1e-12);
  }
}

TEST(CrossEntropy, ConfidentCorrectLogitsGiveZero) {
  const TensorD logits(Shape{2, 3}, {100, 0, 0, 0, 0, 100});
  const std::vector<int> labels{0, 2};
  EXPECT_LT(cross_entropy(logits, labels).item(), 1e-12);
  const std::vector<int> wrong{1, 0};
  EXPECT_NEAR(cross_entropy(logits, wrong).item(), 100.0, 1e-9);
}

TEST(CrossEntropy, LabelOutOfRangeIsDataError) {
  const std::vector<int> labels{0, 3};
  EXPECT_THROW(cross_entropy(Tensor::zeros(Shape{2, 3}), labels), DataError);
  const std::vector<int> negative{-1, 0};
  EXPECT_THROW(cross_entropy(Tensor::zeros(Shape{2, 3}), negative), DataError);
  const std::vector<int> one{0};
  EXPECT_THROW(cross_entropy(Tensor::zeros(Shape{2, 3}), one), DimensionError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const std::vector<int> labels{2, 0, 1, 2};
  auto r = check_gradients([&](std::span<const TensorD> in) { return cross_entropy(in[0], labels); },
                           {rng.normal_tensor<double>(Shape{4, 3}, 2.0)});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(CrossEntropy, ProbabilitiesAndArgmax) {
  const Tensor logits(Shape{2, 2}, {0.0f, std::log(3.0f), 5.0f, 1.0f});
  const auto p = class_probabilities(logits);
  EXPECT_NEAR(p[0][1], 0.75, 1e-6);
  EXPECT_NEAR(p[1][0] + p[1][1], 1.0, 1e-12);
  EXPECT_EQ(argmax_rows(logits), (std::vector<int>{1, 0}));
}

TEST(OptimizerConfig, ConstantThenLinearDecay) {
  OptimizerConfig o;
  o.lr = 1.0;
  o.steps = 100;
  o.constant_fraction = 0.5;
  EXPECT_EQ(o.lr_at(0), 1.0);
  EXPECT_EQ(o.lr_at(49), 1.0);
  EXPECT_DOUBLE_EQ(o.lr_at(50), 1.0);
  EXPECT_DOUBLE_EQ(o.lr_at(75), 0.5);
  EXPECT_DOUBLE_EQ(o.lr_at(99), 0.02);
  o.batch = 0;
  EXPECT_THROW(o.validate(), ConfigError);
  EXPECT_THROW(parse_optimizer_kind("lion"), ConfigError);
}

TEST(Optimizer, SgdStepAndDecayExclusion) {
  OptimizerConfig o;
  o.kind = OptimizerKind::kSgdMomentum;
  o.momentum = 0.0;
  o.weight_decay = 0.5;
  o.clip_norm = 0.0;
  Tensor matrix(Shape{1, 2}, {1.0f, 2.0f});
  Tensor vec(Shape{2}, {1.0f, 2.0f});
  Optimizer opt({matrix, vec}, o);
  backward(sum(mul(matrix, Tensor(Shape{1, 2}, {3.0f, 4.0f}))));
  backward(sum(vec));
  EXPECT_DOUBLE_EQ(opt.step(0.1), std::sqrt(9.0 + 16.0 + 1.0 + 1.0));
  // w - lr * (g + wd * w) for matrices; no decay for rank-1 tensors.
  EXPECT_FLOAT_EQ(matrix.data()[0], 1.0f - 0.1f * (3.0f + 0.5f));
  EXPECT_FLOAT_EQ(matrix.data()[1], 2.0f - 0.1f * (4.0f + 1.0f));
  EXPECT_FLOAT_EQ(vec.data()[0], 0.9f);
  EXPECT_FALSE(matrix.has_grad());
}

TEST(Optimizer, ClipsToGlobalNorm) {
  OptimizerConfig o;
  o.kind = OptimizerKind::kSgdMomentum;
  o.momentum = 0.0;
  o.weight_decay = 0.0;
  o.clip_norm = 5.0;
  Tensor w(Shape{2}, {0.0f, 0.0f});
  Optimizer opt({w}, o);
  backward(sum(mul(w, Tensor(Shape{2}, {30.0f, 40.0f}))));
  EXPECT_DOUBLE_EQ(opt.step(1.0), 50.0);
  EXPECT_FLOAT_EQ(w.data()[0], -3.0f);
  EXPECT_FLOAT_EQ(w.data()[1], -4.0f);
}

TEST(Optimizer, AdamWFirstStepHasUnitMagnitude) {
  OptimizerConfig o;
  o.weight_decay = 0.0;
  Tensor w(Shape{1, 3}, {0.0f, 0.0f, 0.0f});
  Optimizer opt({w}, o);
  backward(sum(mul(w, Tensor(Shape{1, 3}, {0.5f, -2.0f, 0.01f}))));
  opt.step(0.1);
  EXPECT_NEAR(w.data()[0], -0.1f, 1e-6f);
  EXPECT_NEAR(w.data()[1], 0.1f, 1e-6f);
  EXPECT_NEAR(w.data()[2], -0.1f, 1e-5f);
}

// A small step along the negative gradient lowers the loss of the sample it
// was computed on, at three random samples.
TEST(Optimizer, SmallStepDecreasesSampleLoss) {
  const auto data = gen_dataset(small_spec(4));
  auto model = SvitModel::build(ArchConfig::preset("tiny"), 11);
  OptimizerConfig o;
  o.kind = OptimizerKind::kSgdMomentum;
  o.momentum = 0.0;
  o.weight_decay = 0.0;
  o.clip_norm = 0.0;
  Optimizer opt(model.parameters(), o);
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const std::vector<std::int64_t> idx{static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(data.size())))};
    const auto labels = data.labels_of(idx);
    auto loss_now = [&] { return cross_entropy(model.forward(data.images(idx), ForwardContext{}), labels); };
    const auto before = loss_now();
    backward(before);
    opt.step(1e-3);
    double after = 0.0;
    {
      NoGradGuard no_grad;
      after = loss_now().item();
    }
    EXPECT_LT(after, before.item()) << "trial " << trial;
  }
}

class TrainLoopTest : public ::testing::Test {
 protected:
  static ArchConfig tiny() { return ArchConfig::preset("tiny"); }
};

TEST_F(TrainLoopTest, ZeroLearningRateKeepsLossConstant) {
  const auto data = gen_dataset(small_spec(8));
  auto model = SvitModel::build(tiny(), 1);
  OptimizerConfig o;
  o.lr = 0.0;
  o.steps = 4;
  o.batch = 16;  // the whole set every step
  const auto report = train_loop(model, data, o);
  const auto losses = report.losses();
  ASSERT_EQ(losses.size(), 4u);
  for (double l : losses) EXPECT_NEAR(l, losses[0], 1e-7);
}

TEST_F(TrainLoopTest, SameSeedGivesIdenticalTrajectory) {
  const auto data = gen_dataset(small_spec(16));
  OptimizerConfig o;
  o.steps = 6;
  o.batch = 8;
  auto cfg = tiny();
  cfg.drop_path = 0.2;  // exercises the stochastic-depth stream too
  auto a = SvitModel::build(cfg, 3);
  auto b = SvitModel::build(cfg, 3);
  const auto ra = train_loop(a, data, o).losses();
  const auto rb = train_loop(b, data, o).losses();
  EXPECT_EQ(ra, rb);
  o.seed = 8;
  auto c = SvitModel::build(cfg, 3);
  EXPECT_NE(train_loop(c, data, o).losses(), ra);
}

TEST_F(TrainLoopTest, LearnsQuadrantBlobsAndKeepsBestCheckpoint) {
  auto spec = small_spec(32);
  const auto train = gen_dataset(spec);
  spec.first_index = 64;
  spec.samples_per_class = 16;
  const auto heldout = gen_dataset(spec);
  auto model = SvitModel::build(tiny(), 7);
  OptimizerConfig o;
  o.steps = 60;  // leaves BN running statistics time to settle
  o.batch = 16;
  TrainOptions opts;
  opts.heldout = &heldout;
  opts.eval_every = 20;
  opts.best_checkpoint = temp_path("best.stwt");
  int logged = 0;
  opts.on_step = [&](const StepRecord&) { ++logged; };
  const auto report = train_loop(model, train, o, opts);
  EXPECT_EQ(logged, 60);
  ASSERT_EQ(report.evals.size(), 3u);
  EXPECT_GE(report.train_accuracy, 0.9);
  EXPECT_GE(report.heldout_accuracy, 0.85);
  EXPECT_LT(report.losses().back(), report.losses().front());
  auto best = load_model(opts.best_checkpoint);
  EXPECT_NEAR(evaluate(best, heldout), report.best_accuracy, 1e-12);
  std::filesystem::remove(opts.best_checkpoint);
}

TEST_F(TrainLoopTest, IncompatibleDataIsConfigError) {
  auto spec = small_spec();
  spec.n_classes = 3;
  const auto three = gen_dataset(spec);
  auto model = SvitModel::build(tiny(), 1);
  OptimizerConfig o;
  o.steps = 1;
  o.batch = 4;
  EXPECT_THROW(train_loop(model, three, o), ConfigError);
  spec = small_spec(1);
  o.batch = 4;
  EXPECT_THROW(train_loop(model, gen_dataset(spec), o), ConfigError);
}

TEST_F(TrainLoopTest, DivergenceNamesStepAndLearningRate) {
  const auto data = gen_dataset(small_spec(4));
  auto model = SvitModel::build(tiny(), 1);
  model.fc_weight.mutable_data()[0] = std::numeric_limits<float>::infinity();
  OptimizerConfig o;
  o.steps = 2;
  o.batch = 4;
  try {
    train_loop(model, data, o);
    FAIL();
  } catch (const NumericError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("step 0"), std::string::npos) << what;
    EXPECT_NE(what.find("lr 0.002"), std::string::npos) << what;
  }
}
