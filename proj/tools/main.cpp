// Copyright (c) 2026 proso authors
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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "proso/cli/cli.hpp"
#include "proso/core/error.hpp"
#include "proso/core/text.hpp"
#include "proso/corpus/corpus.hpp"
#include "proso/synth/synthgen.hpp"

namespace {

std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("PROSO_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  std::string text(env);
  try {
    size_t used = 0;
    unsigned long long value = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw proso::UsageError(proso::cat("PROSO_SEED must be a nonnegative integer, got '",
                                       text, "'"));
  }
}

struct GenArgs {
  std::string out_dir;
  std::string law = "word_dependent";
  proso::GeneratorSpec spec;
};

int cmd_gen(GenArgs& args) {
  try {
    args.spec.target_law = proso::target_law_from_name(args.law);
  } catch (const proso::ValidationError& e) {
    throw proso::UsageError(e.what());
  }
  if (auto seed = seed_override()) args.spec.seed = *seed;
  proso::GenerateResult res = proso::generate(args.spec, args.out_dir);
  std::cout << "generated " << res.num_utterances << " utterances in " << res.num_discourses
            << " discourses under " << args.out_dir << "\n";
  if (res.offset_mse_gap > 0.0)
    std::cout << "offset_mse_gap " << proso::fmt_double(res.offset_mse_gap) << "\n";
  return 0;
}

struct PrepareArgs {
  std::string manifest, frames_dir, align_dir, lpe_dir, out_dir;
};

int cmd_prepare(const PrepareArgs& args) {
  proso::PrepareReport report = proso::prepare_corpus(args.manifest, args.frames_dir,
                                                      args.align_dir, args.lpe_dir, args.out_dir);
  std::cout << "prepared " << report.n_prepared << " utterances, rejected "
            << report.rejected.size() << "\n";
  for (const auto& [id, reason] : report.rejected)
    std::cerr << "rejected " << id << ": " << reason << "\n";
  return report.rejected.empty() ? 0 : 1;
}

struct SplitArgs {
  std::string manifest, train_out, test_out;
  double test_fraction = 0.3;
  std::uint64_t seed = 1;
};

int cmd_split(SplitArgs& args) {
  if (auto seed = seed_override()) args.seed = *seed;
  std::vector<proso::Discourse> discourses = proso::load_manifest(args.manifest);
  auto [train, test] = proso::split_by_discourse(discourses, args.test_fraction, args.seed);
  proso::save_manifest(train, args.train_out);
  proso::save_manifest(test, args.test_out);
  std::cout << "split " << discourses.size() << " discourses into " << train.size()
            << " train / " << test.size() << " test\n";
  return 0;
}

struct TrainArgs {
  int stage = 0;
  std::string config_path, corpus_dir, out_path, init_from;
  std::vector<std::string> ablation;
};

int cmd_train(const TrainArgs& args) {
  if (args.stage != 1 && args.stage != 2)
    throw proso::UsageError("--stage must be 1 or 2");
  if (args.stage == 2 && args.init_from.empty())
    throw proso::UsageError("--stage 2 requires --init-from <stage-1 checkpoint>");
  if (args.stage == 1 && !args.init_from.empty())
    throw proso::UsageError("--init-from is only valid with --stage 2");

  proso::TrainConfig config;
  if (!args.config_path.empty()) config = proso::load_train_config(args.config_path);
  for (const std::string& flag : args.ablation) config.ablation.push_back(flag);
  if (auto seed = seed_override()) {
    config.stage1.seed = *seed;
    config.stage2.seed = *seed;
  }

  proso::TrainData data = proso::load_train_data(args.corpus_dir);
  proso::TrainOutput out;
  if (args.stage == 1) {
    out = proso::train_stage1(data, config);
  } else {
    proso::Checkpoint init = proso::load_checkpoint(args.init_from);
    out = proso::train_stage2(data, init, config);
  }
  proso::save_checkpoint(out.checkpoint, args.out_path);
  proso::write_file(args.out_path + ".history.csv", proso::loss_history_csv(out.history));

  std::cout << "stage " << args.stage << " done: " << out.history.size() << " epochs, "
            << out.steps << " steps";
  if (!out.history.empty())
    std::cout << ", final total " << proso::fmt_double(out.history.back().total);
  std::cout << "\ncheckpoint written to " << args.out_path << "\n";
  return 0;
}

struct InferArgs {
  std::string ckpt_path, manifest, out_dir;
  int speaker = -1;
};

int cmd_infer(const InferArgs& args) {
  proso::Checkpoint ckpt = proso::load_checkpoint(args.ckpt_path);
  int n = proso::run_inference(ckpt, args.manifest, args.out_dir, args.speaker);
  std::cout << "wrote " << n << " prediction files to " << args.out_dir << "\n";
  return 0;
}

struct EvalArgs {
  std::string predictions_dir, targets_dir, out_dir;
};

int cmd_eval(const EvalArgs& args) {
  proso::EvalReport report = proso::evaluate_dirs(args.predictions_dir, args.targets_dir);
  std::string out_dir = args.out_dir.empty() ? args.predictions_dir : args.out_dir;
  proso::write_eval_report(report, out_dir);
  std::cout << "lpe_mse " << proso::fmt_double(report.lpe_mse) << "\n"
            << "pitch_mse " << proso::fmt_double(report.pitch_mse) << "\n"
            << "energy_mse " << proso::fmt_double(report.energy_mse) << "\n"
            << "utterance_style_accuracy " << proso::fmt_double(report.utterance_style_accuracy)
            << "\n"
            << "discourse_style_accuracy " << proso::fmt_double(report.discourse_style_accuracy)
            << "\n"
            << "report written to " << out_dir << "\n";
  return 0;
}

struct PlotArgs {
  std::string feature_file, out_csv, manifest;
};

int cmd_plot_pitch(const PlotArgs& args) {
  proso::PhonemeTargets targets = proso::load_feature_file(args.feature_file);
  std::vector<proso::Discourse> discourses = proso::load_manifest(args.manifest);
  for (const proso::Discourse& disc : discourses) {
    for (const proso::Utterance& utt : disc.utterances) {
      if (utt.id != targets.utterance_id) continue;
      proso::write_file(args.out_csv, proso::pitch_contour_csv(targets, utt));
      std::cout << "wrote " << targets.pitch.size() << " contour rows to " << args.out_csv
                << "\n";
      return 0;
    }
  }
  throw proso::ValidationError(proso::cat("utterance '", targets.utterance_id,
                                          "' not found in ", args.manifest));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discourse-level prosody model pipeline"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen->add_option("out_dir", gen_args.out_dir, "Output directory (must be empty)")->required();
  gen->add_option("--law", gen_args.law,
                  "Target law: word_dependent, phoneme_dependent, context_offset, mixed");
  gen->add_option("--discourses", gen_args.spec.num_discourses, "Number of discourses");
  gen->add_option("--utterances", gen_args.spec.utterances_per_discourse,
                  "Utterances per discourse");
  gen->add_option("--vocab", gen_args.spec.vocab_size, "Body vocabulary size");
  gen->add_option("--alphabet", gen_args.spec.phoneme_alphabet_size, "Phoneme alphabet size");
  gen->add_option("--speakers", gen_args.spec.num_speakers, "Number of speakers");
  gen->add_option("--styles", gen_args.spec.num_styles, "Number of styles");
  gen->add_option("--seed", gen_args.spec.seed, "Generation seed");

  PrepareArgs prepare_args;
  CLI::App* prepare = app.add_subcommand("prepare", "Assemble per-utterance feature files");
  prepare->add_option("manifest", prepare_args.manifest, "Manifest path")->required();
  prepare->add_option("frames_dir", prepare_args.frames_dir, "Frame track directory")->required();
  prepare->add_option("align_dir", prepare_args.align_dir, "Alignment directory")->required();
  prepare->add_option("lpe_dir", prepare_args.lpe_dir, "LPE target directory")->required();
  prepare->add_option("out_dir", prepare_args.out_dir, "Prepared corpus directory")->required();

  SplitArgs split_args;
  CLI::App* split = app.add_subcommand("split", "Split a manifest by discourse");
  split->add_option("manifest", split_args.manifest, "Manifest path")->required();
  split->add_option("--test-fraction", split_args.test_fraction, "Test fraction in (0,1)");
  split->add_option("--train", split_args.train_out, "Train manifest output")->required();
  split->add_option("--test", split_args.test_out, "Test manifest output")->required();
  split->add_option("--seed", split_args.seed, "Split seed");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train stage 1 (U-MPM) or stage 2 (D-MPM)");
  train->add_option("--stage", train_args.stage, "Training stage, 1 or 2")->required();
  train->add_option("--config", train_args.config_path, "INI config path");
  train->add_option("--corpus", train_args.corpus_dir, "Prepared corpus directory")->required();
  train->add_option("--out", train_args.out_path, "Checkpoint output path")->required();
  train->add_option("--init-from", train_args.init_from, "Stage-1 checkpoint (stage 2 only)");
  train->add_option("--ablation", train_args.ablation,
                    "Ablation flag (repeatable): no_word, no_phn, no_pe");

  InferArgs infer_args;
  CLI::App* infer = app.add_subcommand("infer", "Predict feature files from a checkpoint");
  infer->add_option("ckpt", infer_args.ckpt_path, "Checkpoint path")->required();
  infer->add_option("manifest", infer_args.manifest, "Manifest path")->required();
  infer->add_option("out_dir", infer_args.out_dir, "Prediction output directory")->required();
  infer->add_option("--speaker", infer_args.speaker, "Speaker id override");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score predictions against targets");
  eval->add_option("predictions_dir", eval_args.predictions_dir, "Prediction directory")
      ->required();
  eval->add_option("targets_dir", eval_args.targets_dir, "Target directory")->required();
  eval->add_option("--out", eval_args.out_dir, "Report directory (default: predictions_dir)");

  PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand("plot-pitch", "Export a per-phoneme contour CSV");
  plot->add_option("feature_file", plot_args.feature_file, "Feature or prediction file")
      ->required();
  plot->add_option("out_csv", plot_args.out_csv, "Output CSV path")->required();
  plot->add_option("--manifest", plot_args.manifest, "Manifest with the utterance's words")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen(gen_args);
    if (*prepare) return cmd_prepare(prepare_args);
    if (*split) return cmd_split(split_args);
    if (*train) return cmd_train(train_args);
    if (*infer) return cmd_infer(infer_args);
    if (*eval) return cmd_eval(eval_args);
    if (*plot) return cmd_plot_pitch(plot_args);
  } catch (const proso::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
