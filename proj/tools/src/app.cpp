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

#include "stt/tools/app.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>

#include "stt/checkpoint.hpp"
#include "stt/dataset.hpp"
#include "stt/flops.hpp"
#include "stt/tools/config_file.hpp"
#include "stt/tools/image_io.hpp"
#include "stt/tools/verify.hpp"
#include "stt/tools/viz.hpp"
#include "stt/train.hpp"

namespace stt {

namespace {

struct FlopsArgs {
  std::string arch = "svit-s";
  std::string config;
  int res = 0;
  std::string csv;
};

struct GenArgs {
  std::string out, kind = "quadrant-blobs";
  int classes = 2, per_class = 256, size = 32;
  std::uint64_t seed = 7, first_index = 0;
};

struct TrainArgs {
  std::string config, data, heldout, out, log;
};

struct ImageArgs {
  std::string ckpt, image, out, anchor;
  int stage = 1;
};

int cmd_flops(const FlopsArgs& a, std::ostream& out) {
  ArchConfig cfg = a.config.empty() ? ArchConfig::preset(a.arch) : load_run_config(a.config).arch;
  const auto report = count_model(cfg, a.res > 0 ? a.res : cfg.resolution);
  out << report.table();
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!(f << report.csv())) throw DataError("cannot write '" + a.csv + "'");
    out << "wrote " << a.csv << "\n";
  }
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto checks = run_suite(suite);
  int failed = 0;
  for (const auto& c : checks) {
    out << format_check(c) << "\n";
    failed += !c.passed;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << (checks.size() - failed) << "/" << checks.size() << " checks passed in " << std::fixed
      << std::setprecision(1) << seconds << " s\n";
  return failed == 0 ? kExitOk : kExitVerify;
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  SyntheticDatasetSpec spec;
  spec.kind = parse_dataset_kind(a.kind);
  spec.n_classes = a.classes;
  spec.samples_per_class = a.per_class;
  spec.height = spec.width = a.size;
  spec.seed = a.seed;
  spec.first_index = a.first_index;
  const auto data = gen_dataset(spec);
  write_dataset(a.out, data);
  out << "wrote " << data.size() << " " << to_string(spec.kind) << " samples (" << spec.n_classes << " classes, "
      << a.size << "x" << a.size << ") to " << a.out << "\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig run = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  const auto train = read_dataset(a.data);
  std::optional<Dataset> heldout;
  if (!a.heldout.empty()) heldout = read_dataset(a.heldout);
  if (!run.n_classes) run.arch.n_classes = train.n_classes;
  run.arch.validate();
  auto model = SvitModel::build(run.arch, run.opt.seed);

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ofstream log(log_path);
  if (!log) throw DataError("cannot write '" + log_path + "'");
  log << std::setprecision(8);
  log << "# arch " << run.arch.name << " res " << run.arch.resolution << " params " << model.parameter_count()
      << " optimizer " << to_string(run.opt.kind) << " lr " << run.opt.lr << " wd " << run.opt.weight_decay
      << " steps " << run.opt.steps << " batch " << run.opt.batch << " seed " << run.opt.seed << " clip_norm "
      << run.opt.clip_norm << "\n";
  log << "# step loss acc lr grad_norm\n";

  TrainOptions opts;
  opts.heldout = heldout ? &*heldout : nullptr;
  opts.best_checkpoint = a.out;
  opts.eval_every = run.eval_every;
  opts.on_step = [&](const StepRecord& r) {
    log << r.step + 1 << " " << r.loss << " " << r.batch_accuracy << " " << r.lr << " " << r.grad_norm << "\n";
  };
  opts.on_eval = [&](const EvalRecord& e) {
    log << "# eval step " << e.step << " train_acc " << e.train_accuracy;
    if (opts.heldout) log << " heldout_acc " << e.heldout_accuracy;
    log << "\n";
    out << "step " << e.step << ": train acc " << e.train_accuracy;
    if (opts.heldout) out << ", held-out acc " << e.heldout_accuracy;
    out << std::endl;
  };
  const auto report = train_loop(model, train, run.opt, opts);
  log << "# final train_acc " << report.train_accuracy;
  if (opts.heldout) log << " heldout_acc " << report.heldout_accuracy;
  log << " best_step " << report.best_step << " clipped_steps " << report.clipped_steps << "\n";
  out << "final train acc " << report.train_accuracy;
  if (opts.heldout) out << ", held-out acc " << report.heldout_accuracy;
  out << "\nbest checkpoint (step " << report.best_step << ") written to " << a.out << "; log " << log_path << "\n"
      << "gradients clipped to norm " << report.clip_norm << " on " << report.clipped_steps << " of "
      << report.steps.size() << " steps\n";
  return kExitOk;
}

int cmd_infer(const ImageArgs& a, std::ostream& out) {
  auto model = load_model(a.ckpt);
  const auto input = image_to_input(read_pnm(a.image), model.cfg.resolution);
  NoGradGuard no_grad;
  const auto logits = model.forward(input, ForwardContext{});
  const auto probs = class_probabilities(logits)[0];
  out << "label " << argmax_rows(logits)[0] << "\n" << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < probs.size(); ++k) out << "p[" << k << "] " << probs[k] << "\n";
  return kExitOk;
}

std::pair<int, int> parse_anchor(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const int y = std::stoi(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument(text);
    const std::string rest = text.substr(comma + 1);
    const int x = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return {y, x};
  } catch (const std::logic_error&) {
    throw UsageError("--anchor expects 'y,x', got '" + text + "'");
  }
}

int cmd_viz(const ImageArgs& a, std::ostream& out) {
  std::optional<std::pair<int, int>> anchor;
  if (!a.anchor.empty()) anchor = parse_anchor(a.anchor);
  auto model = load_model(a.ckpt);
  const auto input = image_to_input(read_pnm(a.image), model.cfg.resolution);
  const auto v = visualize(model, input, a.stage - 1, anchor);
  const std::string seg = a.out + "_segmentation.ppm", heat = a.out + "_heatmap.pgm";
  write_pnm(seg, v.segmentation);
  write_pnm(heat, v.heatmap);
  out << "stage " << a.stage << ": " << v.token_h << "x" << v.token_w << " tokens, " << v.grid_p * v.grid_q
      << " super tokens, " << count_regions(v.assignment) << " regions\n"
      << "wrote " << seg << "\nwrote " << heat << " (anchor " << v.anchor.first << "," << v.anchor.second << ")\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Super Token Transformer: attention verification, complexity, training and visualization", "stt"};
  app.require_subcommand(1);
  int code = kExitOk;

  FlopsArgs flops;
  auto* c_flops = app.add_subcommand("flops", "Parameter and MAC counts per component");
  c_flops->add_option("--arch", flops.arch, "Preset: svit-s, svit-b, svit-l or tiny");
  c_flops->add_option("--config", flops.config, "Run config file (its architecture is used instead of --arch)");
  c_flops->add_option("--res", flops.res, "Input resolution (default: the architecture's)");
  c_flops->add_option("--csv", flops.csv, "Also write component,params,macs,formula rows here");

  std::string suite;
  auto* c_verify = app.add_subcommand("verify", "Run self-verification suites");
  c_verify->add_option("--suite", suite, kSuiteNames)->required();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Write a synthetic classification dataset");
  c_gen->add_option("--out", gen.out, "Output .stds file")->required();
  c_gen->add_option("--kind", gen.kind, "quadrant-blobs or striped-textures");
  c_gen->add_option("--classes", gen.classes, "Number of classes (2-10)");
  c_gen->add_option("--per-class", gen.per_class, "Samples per class");
  c_gen->add_option("--size", gen.size, "Image height and width");
  c_gen->add_option("--seed", gen.seed, "Generator seed");
  c_gen->add_option("--first-index", gen.first_index, "Index of the first sample in the seed's stream");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model on a dataset file");
  c_train->add_option("--config", train.config, "Run config file (default: tiny preset, default optimizer)");
  c_train->add_option("--data", train.data, "Training .stds file")->required();
  c_train->add_option("--heldout", train.heldout, "Held-out .stds file for evaluation and checkpoint selection");
  c_train->add_option("--out", train.out, "Best checkpoint path")->required();
  c_train->add_option("--log", train.log, "Metrics log (default: <out>.log)");

  ImageArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Classify a PPM image");
  c_infer->add_option("--ckpt", infer.ckpt, "Checkpoint")->required();
  c_infer->add_option("--image", infer.image, "Binary PPM (P6) image")->required();

  ImageArgs viz;
  auto* c_viz = app.add_subcommand("viz", "Super-token segmentation and anchor attention heatmap");
  c_viz->add_option("--ckpt", viz.ckpt, "Checkpoint")->required();
  c_viz->add_option("--image", viz.image, "Binary PPM (P6) image")->required();
  c_viz->add_option("--stage", viz.stage, "Stage, 1-based")->capture_default_str();
  c_viz->add_option("--out", viz.out, "Output prefix")->required();
  c_viz->add_option("--anchor", viz.anchor, "Anchor token 'y,x' in stage coordinates (default: centre)");

  c_flops->callback([&] { code = cmd_flops(flops, out); });
  c_verify->callback([&] { code = cmd_verify(suite, out); });
  c_gen->callback([&] { code = cmd_gen(gen, out); });
  c_train->callback([&] { code = cmd_train(train, out); });
  c_infer->callback([&] { code = cmd_infer(infer, out); });
  c_viz->callback([&] { code = cmd_viz(viz, out); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what();
    if (e.offset() >= 0) err << " (byte offset " << e.offset() << ")";
    err << "\n";
    return kExitData;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return code;
}

}  // namespace stt
