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

#include "stt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stt/checkpoint.hpp"
#include "stt/ops.hpp"
#include "stt/random.hpp"

namespace stt {

template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [b, k], got " + logits.shape().str());
  const std::int64_t b = logits.dim(0), k = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != b) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(b));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw DataError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) + " is outside [0, " +
                      std::to_string(k) + ")");
    }
  }
  const auto x = logits.data();
  auto probs = std::make_shared<std::vector<T>>(x.size());
  double loss = 0.0;
  for (std::int64_t i = 0; i < b; ++i) {
    const T* row = x.data() + i * k;
    const T top = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::int64_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - top));
    for (std::int64_t j = 0; j < k; ++j) {
      (*probs)[static_cast<std::size_t>(i * k + j)] = static_cast<T>(std::exp(static_cast<double>(row[j] - top)) / z);
    }
    loss += std::log(z) + static_cast<double>(top - row[labels[static_cast<std::size_t>(i)]]);
  }
  std::vector<int> target(labels.begin(), labels.end());
  return record_op<T>("cross_entropy", Shape{}, {static_cast<T>(loss / static_cast<double>(b))}, {logits},
                      [logits, probs, target, b, k](std::span<const T> g) {
                        auto gx = logits.grad_buffer();
                        const T scale = g[0] / static_cast<T>(b);
                        for (std::int64_t i = 0; i < b; ++i) {
                          for (std::int64_t j = 0; j < k; ++j) {
                            const auto at = static_cast<std::size_t>(i * k + j);
                            gx[at] += scale * ((*probs)[at] - (j == target[static_cast<std::size_t>(i)] ? T{1} : T{0}));
                          }
                        }
                      });
}

template Tensor cross_entropy(const Tensor&, std::span<const int>);
template TensorD cross_entropy(const TensorD&, std::span<const int>);

std::vector<std::vector<double>> class_probabilities(const Tensor& logits) {
  const std::int64_t b = logits.dim(0), k = logits.dim(1);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) {
    const float* row = logits.data().data() + i * k;
    const double top = *std::max_element(row, row + k);
    auto& p = out[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < k; ++j) p.push_back(std::exp(row[j] - top));
    const double z = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= z;
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::int64_t b = logits.dim(0), k = logits.dim(1);
  std::vector<int> out;
  for (std::int64_t i = 0; i < b; ++i) {
    const float* row = logits.data().data() + i * k;
    out.push_back(static_cast<int>(std::max_element(row, row + k) - row));
  }
  return out;
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdamW ? "adamw" : "sgd"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "adamw") return OptimizerKind::kAdamW;
  if (text == "sgd") return OptimizerKind::kSgdMomentum;
  throw ConfigError("unknown optimizer '" + text + "' (expected adamw or sgd)");
}

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite value >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("wd must be >= 0");
  if (steps < 1) throw ConfigError("steps must be positive");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("betas must be in [0, 1)");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  if (constant_fraction < 0.0 || constant_fraction > 1.0) throw ConfigError("constant_fraction must be in [0, 1]");
}

double OptimizerConfig::lr_at(int step) const {
  const double hold = constant_fraction * steps;
  if (step < hold || steps - hold < 1.0) return lr;
  return lr * std::max(0.0, (steps - step) / (steps - hold));
}

Optimizer::Optimizer(std::vector<Tensor> params, const OptimizerConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (auto& p : params_) {
    p.set_requires_grad(true);
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    if (cfg_.kind == OptimizerKind::kAdamW) v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Optimizer::step(double lr) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (!p.has_grad()) continue;
    for (float g : p.grad_buffer()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) return norm;
  const double scale = cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_), bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    const auto g = p.grad_buffer();
    auto w = p.mutable_data();
    const double wd = p.rank() > 1 ? cfg_.weight_decay : 0.0;
    auto& m = m_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * scale;
      if (cfg_.kind == OptimizerKind::kSgdMomentum) {
        m[j] = static_cast<float>(cfg_.momentum * m[j] + gj + wd * w[j]);
        w[j] = static_cast<float>(w[j] - lr * m[j]);
      } else {
        auto& v = v_[i];
        m[j] = static_cast<float>(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj);
        v[j] = static_cast<float>(cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj);
        const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.adam_eps);
        w[j] = static_cast<float>(w[j] - lr * (update + wd * w[j]));
      }
    }
  }
  zero_grad();
  return norm;
}

std::vector<double> TrainReport::losses() const {
  std::vector<double> out;
  for (const auto& s : steps) out.push_back(s.loss);
  return out;
}

double evaluate(SvitModel& model, const Dataset& data, int batch) {
  NoGradGuard no_grad;
  std::int64_t correct = 0;
  std::vector<std::int64_t> idx;
  for (std::int64_t start = 0; start < data.size(); start += batch) {
    idx.clear();
    for (std::int64_t i = start; i < std::min<std::int64_t>(start + batch, data.size()); ++i) idx.push_back(i);
    const auto pred = argmax_rows(model.forward(data.images(idx), ForwardContext{}));
    const auto labels = data.labels_of(idx);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  }
  return data.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

void check_compatible(const SvitModel& model, const Dataset& data, const char* which) {
  const auto& cfg = model.cfg;
  if (data.channels != 3 || data.height != cfg.resolution || data.width != cfg.resolution) {
    throw ConfigError(std::string(which) + " images are " + std::to_string(data.height) + "x" +
                      std::to_string(data.width) + "x" + std::to_string(data.channels) + " but the model expects " +
                      std::to_string(cfg.resolution) + "x" + std::to_string(cfg.resolution) + "x3");
  }
  if (data.n_classes != cfg.n_classes) {
    throw ConfigError(std::string(which) + " has " + std::to_string(data.n_classes) + " classes but the model has " +
                      std::to_string(cfg.n_classes));
  }
}

[[noreturn]] void numeric_failure(int step, double lr, const std::string& what) {
  std::ostringstream os;
  os << "training diverged at step " << step << " (lr " << lr << "): " << what;
  throw NumericError(os.str());
}

}  // namespace

TrainReport train_loop(SvitModel& model, const Dataset& train, const OptimizerConfig& opt, const TrainOptions& options) {
  opt.validate();
  check_compatible(model, train, "training set");
  if (options.heldout) check_compatible(model, *options.heldout, "held-out set");
  if (opt.batch > train.size()) {
    throw ConfigError("batch " + std::to_string(opt.batch) + " exceeds the " + std::to_string(train.size()) +
                      " training samples");
  }
  Optimizer optimizer(model.parameters(), opt);
  Rng order_rng = Rng::derive(opt.seed, 0);
  Rng drop_rng = Rng::derive(opt.seed, 1);
  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  TrainReport report;
  report.clip_norm = opt.clip_norm;
  double best = -1.0;
  std::vector<std::int64_t> idx;
  ForwardContext ctx;
  ctx.training = true;
  ctx.rng = &drop_rng;
  for (int step = 0; step < opt.steps; ++step) {
    if (cursor + static_cast<std::size_t>(opt.batch) > order.size()) {
      std::shuffle(order.begin(), order.end(), order_rng.engine());
      cursor = 0;
    }
    idx.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
               order.begin() + static_cast<std::ptrdiff_t>(cursor + opt.batch));
    cursor += static_cast<std::size_t>(opt.batch);
    std::sort(idx.begin(), idx.end());
    const auto labels = train.labels_of(idx);

    StepRecord rec;
    rec.step = step;
    rec.lr = opt.lr_at(step);
    try {
      const Tensor logits = model.forward(train.images(idx), ctx);
      const Tensor loss = cross_entropy(logits, labels);
      rec.loss = loss.item();
      const auto pred = argmax_rows(logits);
      int correct = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
      rec.batch_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
      backward(loss);
    } catch (const NumericError& e) {
      optimizer.zero_grad();
      numeric_failure(step, rec.lr, e.what());
    }
    rec.grad_norm = optimizer.step(rec.lr);
    if (!std::isfinite(rec.grad_norm)) numeric_failure(step, rec.lr, "non-finite gradient norm");
    if (opt.clip_norm > 0.0 && rec.grad_norm > opt.clip_norm) ++report.clipped_steps;
    report.steps.push_back(rec);
    if (options.on_step) options.on_step(rec);

    const bool last = step + 1 == opt.steps;
    if (last || (options.eval_every > 0 && (step + 1) % options.eval_every == 0)) {
      EvalRecord ev;
      ev.step = step + 1;
      ev.train_accuracy = evaluate(model, train);
      if (options.heldout) ev.heldout_accuracy = evaluate(model, *options.heldout);
      report.evals.push_back(ev);
      if (options.on_eval) options.on_eval(ev);
      const double score = options.heldout ? ev.heldout_accuracy : ev.train_accuracy;
      if (score > best) {
        best = score;
        report.best_step = ev.step;
        report.best_accuracy = score;
        if (!options.best_checkpoint.empty()) save_model(options.best_checkpoint, model);
      }
      if (last) {
        report.train_accuracy = ev.train_accuracy;
        report.heldout_accuracy = ev.heldout_accuracy;
      }
    }
  }
  return report;
}

}  // namespace stt
