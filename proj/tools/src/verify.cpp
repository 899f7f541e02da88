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

#include "stt/tools/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "stt/blocks.hpp"
#include "stt/flops.hpp"
#include "stt/gradcheck.hpp"
#include "stt/ops.hpp"
#include "stt/random.hpp"
#include "stt/sta.hpp"
#include "stt/sta_oracle.hpp"
#include "stt/train.hpp"

namespace stt {

namespace {

CheckResult bounded(std::string id, double measured, double tolerance, std::string detail = "") {
  return {std::move(id), measured, tolerance, std::isfinite(measured) && measured <= tolerance, std::move(detail)};
}

std::string geometry_id(int p, int h, int c) {
  return "p" + std::to_string(p) + ".h" + std::to_string(h) + ".c" + std::to_string(c);
}

template <typename T>
double max_abs_diff(std::span<const T> a, const std::vector<double>& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(static_cast<double>(a[i]) - b[i]));
  return e;
}

template <typename T>
double oracle_error(int p, int h, int c, PhantomMode mode, int n_iter, std::uint64_t seed) {
  Rng rng(seed);
  StaConfig cfg;
  cfg.grid_h = cfg.grid_w = h;
  cfg.heads = c % 2 == 0 ? 2 : 1;
  cfg.n_iter = n_iter;
  cfg.phantom = mode;
  const auto x = rng.normal_tensor<T>(Shape{2, c, p * h, p * h});
  const auto w = StaWeights<T>::init(c, rng, 0.5);
  const auto sparse = sta_forward(x, cfg, w);
  return max_abs_diff(sparse.data(), sta_dense_oracle(x, cfg, w).output);
}

}  // namespace

std::vector<CheckResult> oracle_suite() {
  std::vector<CheckResult> out;
  std::uint64_t seed = 1;
  for (auto mode : {PhantomMode::kLiteral, PhantomMode::kMasked}) {
    for (int p : {1, 2, 3}) {
      for (int h : {1, 2, 4}) {
        for (int c : {1, 4, 8}) {
          const int n_iter = static_cast<int>(seed % 3);
          const std::string suffix = to_string(mode) + "." + geometry_id(p, h, c);
          const std::string it = "n_iter=" + std::to_string(n_iter);
          out.push_back(bounded("oracle.f64." + suffix, oracle_error<double>(p, h, c, mode, n_iter, seed), 1e-10, it));
          out.push_back(bounded("oracle.f32." + suffix, oracle_error<float>(p, h, c, mode, n_iter, seed), 1e-5, it));
          ++seed;
        }
      }
    }
  }
  return out;
}

std::vector<CheckResult> global_suite() {
  std::vector<CheckResult> out;
  std::uint64_t seed = 100;
  for (auto [hw, c, heads] : {std::tuple{3, 4, 1}, {4, 8, 2}, {5, 8, 4}, {6, 16, 4}}) {
    Rng rng(seed++);
    StaConfig cfg;
    cfg.grid_h = cfg.grid_w = 1;
    cfg.heads = heads;
    const auto x = rng.normal_tensor<double>(Shape{2, c, hw, hw});
    const auto w = StaWeights<double>::init(c, rng, 0.5);
    // Grid 1x1 through sta_forward vs global attention evaluated densely, f64
    // so that the bound measures the algebra rather than f32 rounding.
    const double e = max_abs_diff(sta_forward(x, cfg, w).data(), sta_dense_oracle(x, cfg, w).output);
    out.push_back(bounded("global.grid1x1.n" + std::to_string(hw * hw) + ".c" + std::to_string(c), e, 1e-6,
                          "f64, heads=" + std::to_string(heads)));
  }
  return out;
}

std::vector<CheckResult> gradcheck_suite() {
  constexpr double kTol = 1e-4;
  std::vector<CheckResult> out;
  auto add = [&](const std::string& id, const GradCheckResult& r) {
    out.push_back(bounded("gradcheck." + id, r.max_relative_error, kTol,
                          std::to_string(r.per_input.size()) + " inputs, central differences h=1e-5, f64"));
  };

  for (auto mode : {PhantomMode::kLiteral, PhantomMode::kMasked}) {
    Rng rng(7);
    StaConfig cfg;
    cfg.grid_h = cfg.grid_w = 2;
    cfg.heads = 2;
    cfg.phantom = mode;
    const auto w = StaWeights<double>::init(4, rng, 0.5);
    add("sta_forward." + to_string(mode),
        check_gradients(
            [&](std::span<const TensorD> in) {
              const StaWeights<double> wi{in[1], in[2], in[3], in[4]};
              const auto y = sta_forward(in[0], cfg, wi);
              return sum(mul(y, y));
            },
            {rng.normal_tensor<double>(Shape{1, 4, 4, 6}), w.wq, w.wk, w.wv, w.wo}));
  }

  {
    Rng rng(8);
    auto w = init_block<double>(8, 1, 4, PosEncoding::kCpe, 2, 2, rng);
    for (auto* t : {&w.ffn_expand, &w.ffn_expand_bias, &w.ffn_dw_bias, &w.ffn_reduce, &w.ffn_reduce_bias}) {
      *t = rng.normal_tensor<double>(t->shape(), 0.3);
    }
    add("conv_ffn_forward", check_gradients(
                                [&](std::span<const TensorD> in) {
                                  auto wi = w;
                                  wi.ffn_expand = in[1];
                                  wi.ffn_dw = in[2];
                                  wi.ffn_reduce = in[3];
                                  return sum(conv_ffn_forward(in[0], wi));
                                },
                                {rng.normal_tensor<double>(Shape{1, 8, 4, 4}), w.ffn_expand, w.ffn_dw, w.ffn_reduce}));
  }

  {
    Rng rng(9);
    auto w = init_block<double>(8, 2, 4, PosEncoding::kCpe, 2, 2, rng);
    w.sta = StaWeights<double>::init(8, rng, 0.3);
    w.ffn_expand = rng.normal_tensor<double>(w.ffn_expand.shape(), 0.2);
    w.ffn_reduce = rng.normal_tensor<double>(w.ffn_reduce.shape(), 0.2);
    BlockConfig bc;
    bc.sta.grid_h = bc.sta.grid_w = 2;
    bc.sta.heads = 2;
    const auto probe = Rng(10).normal_tensor<double>(Shape{2, 8, 4, 4});
    add("stt_block_forward", check_gradients(
                                 [&](std::span<const TensorD> in) {
                                   auto wi = w;
                                   wi.cpe_kernel = in[1];
                                   wi.sta = {in[2], in[3], in[4], in[5]};
                                   wi.ffn_expand = in[6];
                                   ForwardContext ctx;
                                   ctx.training = true;
                                   const auto y = stt_block_forward(in[0], wi, bc, ctx);
                                   return sum(mul(y, mul(y, probe)));
                                 },
                                 {rng.normal_tensor<double>(Shape{2, 8, 4, 4}), w.cpe_kernel, w.sta.wq, w.sta.wk,
                                  w.sta.wv, w.sta.wo, w.ffn_expand}));
  }

  {
    Rng rng(11);
    const std::vector<int> labels{0, 3, 1, 2, 3};
    add("cross_entropy", check_gradients([&](std::span<const TensorD> in) { return cross_entropy(in[0], labels); },
                                         {rng.normal_tensor<double>(Shape{5, 4}, 2.0)}));
  }
  return out;
}

std::vector<CheckResult> association_suite() {
  std::vector<CheckResult> out;
  std::uint64_t seed = 200;
  for (auto mode : {PhantomMode::kLiteral, PhantomMode::kMasked}) {
    double row_err = 0.0, phantom_mass = 0.0;
    for (int p : {1, 2, 3, 5}) {
      for (int h : {1, 2, 3}) {
        Rng rng(seed++);
        StaConfig cfg;
        cfg.grid_h = cfg.grid_w = h;
        cfg.phantom = mode;
        cfg.n_iter = 2;
        const auto x = rng.normal_tensor<float>(Shape{2, 4, p * h, (p + 1) * h}, 2.0);
        const auto q = sts(x, cfg).q;
        const auto valid = slot_validity(p, p + 1);
        const auto v = q.q.data();
        const std::int64_t cells = static_cast<std::int64_t>(p) * (p + 1), per_cell = static_cast<std::int64_t>(h) * h;
        for (std::int64_t b = 0; b < 2; ++b)
          for (std::int64_t cell = 0; cell < cells; ++cell)
            for (std::int64_t t = 0; t < per_cell; ++t) {
              double row = 0.0;
              for (int k = 0; k < kSlots; ++k) {
                const double a = v[static_cast<std::size_t>(((b * cells + cell) * per_cell + t) * kSlots + k)];
                row += a;
                if (!valid[static_cast<std::size_t>(cell * kSlots + k)]) phantom_mass = std::max(phantom_mass, std::abs(a));
              }
              row_err = std::max(row_err, std::abs(row - 1.0));
            }
      }
    }
    out.push_back(bounded("association.row_sum." + to_string(mode), row_err, 1e-6));
    if (mode == PhantomMode::kMasked) {
      out.push_back(bounded("association.masked_phantom_zero", phantom_mass, 0.0, "exact zero required"));
    }
  }

  // <unfold(x), y> == <x, fold(y)>
  double adjoint = 0.0;
  for (auto [p, q, c] : {std::tuple{1, 1, 1}, {2, 3, 2}, {4, 4, 3}, {5, 2, 4}}) {
    Rng rng(seed++);
    const auto x = rng.normal_tensor<double>(Shape{2, c, p, q});
    const auto y = rng.normal_tensor<double>(Shape{2, c * 9, p * q});
    const double lhs = sum(mul(unfold3x3(x), y)).item(), rhs = sum(mul(x, fold3x3(y, p, q))).item();
    adjoint = std::max(adjoint, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  out.push_back(bounded("association.fold_adjoint_unfold", adjoint, 1e-6));
  return out;
}

std::vector<CheckResult> flops_suite() {
  std::vector<CheckResult> out;
  auto exact = [&](const std::string& id, Count got, Count want) {
    out.push_back(bounded("flops.reference." + id, static_cast<double>(std::llabs(got - want)), 0.0,
                          std::to_string(got) + " vs " + std::to_string(want)));
  };
  exact("sts_dense", flops_sts_dense(3136, 64, 49, 1), 19'668'992);
  exact("sts_sparse", flops_sts_sparse(3136, 64), 3'813'376);
  exact("gsa", flops_gsa(3136, 64), 1'310'195'712);
  exact("sta", flops_sta(3136, 64, 49), 6'729'856);

  int stages = 0, violations = 0;
  for (const auto& name : ArchConfig::preset_names()) {
    const auto cfg = ArchConfig::preset(name);
    for (int s = 0; s < kStages; ++s) {
      const Count e = cfg.stage_extent(s), n = e * e, a = e / cfg.grids[s], m = a * a;
      if (m >= n) continue;
      ++stages;
      violations += flops_sta(n, cfg.channels[s], m) >= flops_gsa(n, cfg.channels[s]);
    }
  }
  out.push_back(bounded("flops.sta_below_gsa", violations, 0.0, std::to_string(stages) + " preset stages with m < N"));

  const struct {
    const char* name;
    double params, macs;
  } table[] = {{"svit-s", 25e6, 4.4e9}, {"svit-b", 52e6, 9.9e9}, {"svit-l", 95e6, 15.6e9}};
  for (const auto& row : table) {
    const auto r = count_model(ArchConfig::preset(row.name), 224);
    const double p = static_cast<double>(r.total_params()), f = static_cast<double>(r.total_macs());
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.2fM params", p / 1e6);
    out.push_back(bounded("flops.paper." + std::string(row.name) + ".params", std::abs(p - row.params) / row.params, 0.03, buf));
    std::snprintf(buf, sizeof buf, "%.2fG MACs", f / 1e9);
    out.push_back(bounded("flops.paper." + std::string(row.name) + ".macs", std::abs(f - row.macs) / row.macs, 0.10, buf));
  }
  return out;
}

std::vector<CheckResult> run_suite(const std::string& name) {
  std::vector<CheckResult> out;
  auto append = [&](std::vector<CheckResult> more) { out.insert(out.end(), more.begin(), more.end()); };
  const bool all = name == "all";
  if (!all && name != "oracle" && name != "gradcheck" && name != "invariants") {
    throw UsageError("unknown suite '" + name + "' (expected " + kSuiteNames + ")");
  }
  if (all || name == "oracle") {
    append(oracle_suite());
    append(global_suite());
  }
  if (all || name == "gradcheck") append(gradcheck_suite());
  if (all || name == "invariants") {
    append(association_suite());
    append(flops_suite());
  }
  std::sort(out.begin(), out.end(), [](const CheckResult& a, const CheckResult& b) { return a.id < b.id; });
  return out;
}

std::string format_check(const CheckResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e <= %.1e", r.measured, r.tolerance);
  std::string line = std::string(r.passed ? "PASS " : "FAIL ") + r.id + "  " + buf;
  if (!r.detail.empty()) line += "  (" + r.detail + ")";
  return line;
}

}  // namespace stt
