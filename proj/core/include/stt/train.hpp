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

// Supervised training: loss, optimizers and the training loop.

#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stt/blocks.hpp"
#include "stt/dataset.hpp"

namespace stt {

// Mean softmax cross-entropy of logits [b, k] against integer labels.
// Throws DataError for a label outside [0, k).
template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels);

// Row-wise softmax probabilities of logits [b, k], without recording.
std::vector<std::vector<double>> class_probabilities(const Tensor& logits);
std::vector<int> argmax_rows(const Tensor& logits);

enum class OptimizerKind { kSgdMomentum, kAdamW };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double lr = 2e-3;
  double weight_decay = 0.05;  // not applied to gains and biases (rank <= 1)
  int steps = 500;
  int batch = 32;
  std::uint64_t seed = 7;
  double momentum = 0.9;                  // SGD
  double beta1 = 0.9, beta2 = 0.999;      // AdamW
  double adam_eps = 1e-8;
  double clip_norm = 5.0;                 // global gradient norm; 0 disables
  double constant_fraction = 0.5;         // lr is constant for this share of steps, then decays linearly to 0

  void validate() const;
  double lr_at(int step) const;
};

class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, const OptimizerConfig& cfg);

  // Clips the accumulated gradients to cfg.clip_norm, applies one update
  // with learning rate `lr` and clears the gradients. Returns the global
  // gradient norm before clipping.
  double step(double lr);
  void zero_grad();
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  OptimizerConfig cfg_;
  std::vector<std::vector<float>> m_, v_;
  int t_ = 0;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // before clipping
  double batch_accuracy = 0.0;
};

struct EvalRecord {
  int step = 0;
  double train_accuracy = 0.0;
  double heldout_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  double train_accuracy = 0.0;  // final weights, inference mode
  double heldout_accuracy = std::numeric_limits<double>::quiet_NaN();
  int best_step = -1;           // evaluation selected for the best checkpoint
  double best_accuracy = 0.0;   // held-out accuracy if available, else train
  int clipped_steps = 0;
  double clip_norm = 0.0;

  std::vector<double> losses() const;
};

struct TrainOptions {
  const Dataset* heldout = nullptr;
  std::filesystem::path best_checkpoint;  // written whenever the selection accuracy improves
  int eval_every = 100;                   // the final step is always evaluated
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EvalRecord&)> on_eval;
};

// Fraction of samples whose argmax logit equals the label, in inference mode.
double evaluate(SvitModel& model, const Dataset& data, int batch = 64);

// Mini-batches come from per-epoch shuffles of the training set. Throws
// NumericError naming the step and learning rate when the loss or the
// gradients stop being finite.
TrainReport train_loop(SvitModel& model, const Dataset& train, const OptimizerConfig& opt,
                       const TrainOptions& options = {});

}  // namespace stt
