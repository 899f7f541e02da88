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

#include "stt/checkpoint.hpp"
#include "stt/flops.hpp"

using namespace stt;

TEST(Formulas, ReferenceValuesAtStageOneGeometry) {
  EXPECT_EQ(flops_sts_dense(3136, 64, 49, 1), 19'668'992);
  EXPECT_EQ(flops_sts_sparse(3136, 64), 3'813'376);
  EXPECT_EQ(flops_gsa(3136, 64), 1'310'195'712);
  EXPECT_EQ(flops_sta(3136, 64, 49), 6'729'856);
  const double ratio = static_cast<double>(flops_gsa(3136, 64)) / static_cast<double>(flops_sta(3136, 64, 49));
  EXPECT_NEAR(ratio, 195.0, 0.5);
}

TEST(Formulas, TrivialCases) {
  EXPECT_EQ(flops_sts_dense(3136, 64, 49, 0), 0);
  EXPECT_EQ(flops_sts_dense(100, 8, 4, 2), 2 * flops_sts_dense(100, 8, 4, 1));
  EXPECT_EQ(flops_sts_sparse(1, 7), 19 * 7);
  EXPECT_EQ(flops_gsa(1, 1), 6);
  // m = N gives GSA plus the linear sampling/upsampling overhead.
  for (Count n : {1, 16, 3136}) EXPECT_EQ(flops_sta(n, 32, n), flops_gsa(n, 32) + 28 * n * 32);
  const double q = static_cast<double>(flops_gsa(1 << 20, 8)) / static_cast<double>(flops_gsa(1 << 19, 8));
  EXPECT_NEAR(q, 4.0, 1e-3);
}

TEST(Formulas, IteratedStaAgreesWithSingleIteration) {
  EXPECT_EQ(flops_sta_iterated(3136, 64, 49, 1), flops_sta(3136, 64, 49));
  // n_iter = 0: pooling, one association and upsampling only.
  EXPECT_EQ(flops_sta_iterated(3136, 64, 49, 0), flops_sta(3136, 64, 49) - 9 * 3136 * 64);
  EXPECT_EQ(flops_sta_iterated(3136, 64, 49, 3) - flops_sta_iterated(3136, 64, 49, 2), 18 * 3136 * 64);
}

TEST(Formulas, StaCheaperThanGsaOnEveryPresetStage) {
  for (const auto& name : ArchConfig::preset_names()) {
    const auto cfg = ArchConfig::preset(name);
    for (int s = 0; s < kStages; ++s) {
      const Count e = cfg.stage_extent(s), n = e * e, a = e / cfg.grids[s], m = a * a;
      if (m >= n) continue;
      EXPECT_LT(flops_sta(n, cfg.channels[s], m), flops_gsa(n, cfg.channels[s])) << name << " stage " << s + 1;
    }
  }
}

TEST(CountModel, PaperScaleTotals) {
  const struct {
    const char* name;
    double params, macs;
  } table[] = {{"svit-s", 25e6, 4.4e9}, {"svit-b", 52e6, 9.9e9}, {"svit-l", 95e6, 15.6e9}};
  for (const auto& row : table) {
    const auto r = count_model(ArchConfig::preset(row.name), 224);
    const double p = static_cast<double>(r.total_params()), f = static_cast<double>(r.total_macs());
    EXPECT_LT(std::abs(p - row.params) / row.params, 0.03) << row.name << " params " << p;
    EXPECT_LT(std::abs(f - row.macs) / row.macs, 0.10) << row.name << " MACs " << f;
  }
}

TEST(CountModel, TotalsAreSumOfParts) {
  const auto r = count_model(ArchConfig::preset("svit-b"), 224);
  Count p = 0, b = 0, f = 0;
  for (const auto& c : r.components) {
    p += c.params;
    b += c.buffers;
    f += c.macs;
  }
  EXPECT_EQ(p, r.total_params());
  EXPECT_EQ(b, r.total_buffers());
  EXPECT_EQ(f, r.total_macs());
}

// Structural oracle: executed MACs of a batch-1 forward and element counts of
// the built tensors, for every position-encoding and iteration variant.
TEST(CountModel, TinyMatchesExecutedModel) {
  for (auto pos : {PosEncoding::kCpe, PosEncoding::kApe, PosEncoding::kRpe}) {
    for (int n_iter : {0, 1, 2}) {
      auto cfg = ArchConfig::preset("tiny");
      cfg.pos = pos;
      cfg.n_iter = n_iter;
      const auto r = count_model(cfg, 32);
      auto model = SvitModel::build(cfg, 1);
      Count params = 0, buffers = 0;
      model.visit([&](const std::string&, Tensor& t, TensorRole role) {
        (role == TensorRole::kParameter ? params : buffers) += t.numel();
      });
      EXPECT_EQ(r.total_params(), params) << to_string(pos) << " n_iter=" << n_iter;
      EXPECT_EQ(r.total_params(), model.parameter_count());
      EXPECT_EQ(r.total_buffers(), buffers);
      std::uint64_t executed = 0;
      {
        NoGradGuard no_grad;
        MacCountScope scope;
        model.forward(Tensor::zeros(Shape{1, 3, 32, 32}), ForwardContext{});
        executed = scope.count();
      }
      EXPECT_EQ(static_cast<std::uint64_t>(r.total_macs()), executed) << to_string(pos) << " n_iter=" << n_iter;
    }
  }
}

TEST(CountModel, ResolutionOverridesConfig) {
  auto cfg = ArchConfig::preset("tiny");
  const auto r = count_model(cfg, 64);
  EXPECT_EQ(r.resolution, 64);
  cfg.resolution = 64;
  auto model = SvitModel::build(cfg, 0);
  NoGradGuard no_grad;
  MacCountScope scope;
  model.forward(Tensor::zeros(Shape{1, 3, 64, 64}), ForwardContext{});
  EXPECT_EQ(static_cast<std::uint64_t>(r.total_macs()), scope.count());
}

TEST(CountModel, CheckpointElementSum) {
  const auto cfg = ArchConfig::preset("tiny");
  auto model = SvitModel::build(cfg, 3);
  const auto path = std::filesystem::temp_directory_path() / "stt_flops_test.stwt";
  save_model(path, model);
  Count elements = 0;
  for (const auto& nt : read_tensors(path)) {
    if (nt.name != kArchMetaName) elements += nt.tensor.numel();
  }
  std::filesystem::remove(path);
  const auto r = count_model(cfg, 32);
  EXPECT_EQ(r.total_params() + r.total_buffers(), elements);
}

TEST(CountModel, InvalidGeometryThrows) {
  EXPECT_THROW(count_model(ArchConfig::preset("svit-s"), 200), ConfigError);
  auto cfg = ArchConfig::preset("tiny");
  cfg.grids[0] = 3;
  EXPECT_THROW(count_model(cfg, 32), ConfigError);
}

TEST(Report, TableAndCsv) {
  const auto r = count_model(ArchConfig::preset("tiny"), 32);
  const auto csv = r.csv();
  EXPECT_EQ(csv.rfind("component,params,macs,formula\n", 0), 0u);
  EXPECT_NE(csv.find("\ntotal," + std::to_string(r.total_params()) + "," + std::to_string(r.total_macs()) + ","),
            std::string::npos);
  std::size_t rows = 0;
  for (char ch : csv) rows += ch == '\n';
  EXPECT_EQ(rows, r.components.size() + 2);
  const auto table = r.table();
  EXPECT_NE(table.find("stage1.sta"), std::string::npos);
  EXPECT_NE(table.find(kUnmodeledNote), std::string::npos);
}
