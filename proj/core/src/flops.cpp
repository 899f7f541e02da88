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

#include "stt/flops.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "stt/error.hpp"

namespace stt {

Count flops_sts_dense(Count n, Count c, Count m, Count n_iter) { return 2 * n_iter * m * n * c; }

Count flops_sts_sparse(Count n, Count c) { return n * c + 9 * n * c + 9 * n * c; }

Count flops_gsa(Count n, Count c) { return 2 * n * n * c + 4 * n * c * c; }

Count flops_sta(Count n, Count c, Count m) { return 2 * m * m * c + 4 * m * c * c + 28 * n * c; }

Count flops_sta_iterated(Count n, Count c, Count m, int n_iter) {
  const Count associations = std::max(n_iter, 1);
  return 2 * m * m * c + 4 * m * c * c + n * c + 9 * n * c * (associations + n_iter + 1);
}

Count FlopsReport::total_params() const {
  Count t = 0;
  for (const auto& c : components) t += c.params;
  return t;
}

Count FlopsReport::total_buffers() const {
  Count t = 0;
  for (const auto& c : components) t += c.buffers;
  return t;
}

Count FlopsReport::total_macs() const {
  Count t = 0;
  for (const auto& c : components) t += c.macs;
  return t;
}

namespace {

std::string grouped(Count v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > (v < 0 ? 1 : 0); i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Conv with a k x k kernel producing `extent` x `extent` outputs, plus BN.
FlopsComponent conv_bn(std::string name, Count cin, Count cout, Count k, Count extent) {
  FlopsComponent f;
  f.name = std::move(name);
  f.params = cout * cin * k * k + 2 * cout;
  f.buffers = 2 * cout;
  f.macs = cout * cin * k * k * extent * extent;
  f.formula = "conv" + std::to_string(k) + "x" + std::to_string(k) + " " + std::to_string(cin) + "->" +
              std::to_string(cout) + " @" + std::to_string(extent) + "x" + std::to_string(extent);
  return f;
}

}  // namespace

std::string FlopsReport::table() const {
  std::size_t width = 9;
  for (const auto& c : components) width = std::max(width, c.name.size());
  std::ostringstream os;
  os << arch << " @ " << resolution << "x" << resolution << " (MACs per image)\n";
  auto row = [&](const std::string& name, const std::string& params, const std::string& macs,
                 const std::string& formula) {
    os << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right << std::setw(12) << params
       << "  " << std::setw(15) << macs << "  " << formula << "\n";
  };
  row("component", "params", "macs", "formula");
  for (const auto& c : components) row(c.name, grouped(c.params), grouped(c.macs), c.formula);
  row("total", grouped(total_params()), grouped(total_macs()), "");
  std::ostringstream summary;
  const double macs = static_cast<double>(total_macs());
  summary << std::fixed << std::setprecision(2) << static_cast<double>(total_params()) / 1e6 << "M params, "
          << (macs >= 1e9 ? macs / 1e9 : macs / 1e6) << (macs >= 1e9 ? "G" : "M") << " MACs; "
          << grouped(total_buffers())
          << " BN statistics not counted as parameters\n";
  os << summary.str() << kUnmodeledNote << "\n";
  return os.str();
}

std::string FlopsReport::csv() const {
  std::ostringstream os;
  os << "component,params,macs,formula\n";
  for (const auto& c : components) {
    os << csv_field(c.name) << "," << c.params << "," << c.macs << "," << csv_field(c.formula) << "\n";
  }
  os << "total," << total_params() << "," << total_macs() << ",sum\n";
  return os.str();
}

FlopsReport count_model(const ArchConfig& arch, int resolution) {
  ArchConfig cfg = arch;
  cfg.resolution = resolution;
  cfg.validate();
  FlopsReport r;
  r.arch = cfg.name;
  r.resolution = resolution;

  FlopsComponent stem;
  stem.name = "stem";
  stem.formula = "4 x conv3x3 (strides 2,1,2,1) + BN";
  static constexpr int kStride[kStemConvs] = {2, 1, 2, 1};
  Count cin = 3, extent = resolution;
  for (int i = 0; i < kStemConvs; ++i) {
    extent /= kStride[i];
    const auto layer = conv_bn("", cin, cfg.stem[i], 3, extent);
    stem.params += layer.params;
    stem.buffers += layer.buffers;
    stem.macs += layer.macs;
    cin = cfg.stem[i];
  }
  r.components.push_back(stem);

  for (int s = 0; s < kStages; ++s) {
    const std::string stage = "stage" + std::to_string(s + 1);
    const Count c = cfg.channels[s], e = cfg.stage_extent(s), n = e * e, blocks = cfg.blocks[s];
    const Count hidden = cfg.mlp_ratio * c;
    const Count attn = e / cfg.grids[s], m = attn * attn;
    const std::string xb = " x" + std::to_string(blocks);
    if (s > 0) {
      r.components.push_back(conv_bn("merge" + std::to_string(s), cfg.channels[s - 1], c, 3, e));
      r.components.back().formula += " stride 2";
    }
    if (cfg.pos == PosEncoding::kApe) r.components.push_back({stage + ".ape", c * n, 0, 0, "table C*H*W"});
    if (cfg.pos == PosEncoding::kCpe) {
      r.components.push_back({stage + ".cpe", blocks * 10 * c, 0, blocks * 9 * n * c, "dwconv3x3 9NC" + xb});
    }
    r.components.push_back({stage + ".norm", blocks * 4 * c, blocks * 2 * c, 0, "LN + BN" + xb});

    FlopsComponent sta;
    sta.name = stage + ".sta";
    sta.params = blocks * 4 * c * c;
    const std::string dims = "(N=" + std::to_string(n) + ",C=" + std::to_string(c);
    if (cfg.grids[s] == 1) {
      sta.macs = blocks * flops_gsa(n, c);
      sta.formula = "gsa 2N^2C+4NC^2 " + dims + ")" + xb;
    } else {
      sta.macs = blocks * flops_sta_iterated(n, c, m, cfg.n_iter);
      sta.formula = (cfg.n_iter == 1 ? "sta 2m^2C+4mC^2+28NC " : "sta iterated n_iter=" + std::to_string(cfg.n_iter) + " ") +
                    dims + ",m=" + std::to_string(m) + ")" + xb;
    }
    if (cfg.pos == PosEncoding::kRpe) sta.params += blocks * cfg.heads[s] * (2 * attn - 1) * (2 * attn - 1);
    r.components.push_back(sta);

    FlopsComponent ffn;
    ffn.name = stage + ".ffn";
    ffn.params = blocks * (hidden * c + hidden + 10 * hidden + c * hidden + c);
    ffn.macs = blocks * (2 * n * c * hidden + 9 * n * hidden);
    ffn.formula = "conv1x1 + dwconv3x3 + conv1x1, hidden " + std::to_string(hidden) + xb;
    r.components.push_back(ffn);
  }

  const Count last_c = cfg.channels[kStages - 1], last_e = cfg.stage_extent(kStages - 1);
  FlopsComponent head = conv_bn("head", last_c, cfg.projection, 1, last_e);
  head.params += cfg.projection * cfg.n_classes + cfg.n_classes;
  head.macs += cfg.projection * last_e * last_e + cfg.projection * cfg.n_classes;
  head.formula = "conv1x1 " + std::to_string(last_c) + "->" + std::to_string(cfg.projection) +
                 " + BN + pool + fc " + std::to_string(cfg.projection) + "->" + std::to_string(cfg.n_classes);
  r.components.push_back(head);
  return r;
}

}  // namespace stt
