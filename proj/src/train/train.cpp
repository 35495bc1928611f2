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

#include "proso/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "proso/core/error.hpp"
#include "proso/core/rng.hpp"
#include "proso/core/text.hpp"

namespace proso {

namespace {

bool parse_bool(const std::string& v, const std::string& what) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(cat(what, ": expected a boolean, got '", v, "'"));
}

std::uint64_t parse_seed(const std::string& v, const std::string& what) {
  long long s = parse_int(v, what);
  if (s < 0) throw ParseError(cat(what, ": seed must be nonnegative"));
  return static_cast<std::uint64_t>(s);
}

void parse_optimizer_key(OptimizerConfig& opt, const std::string& key, const std::string& value,
                         const std::string& where, bool& handled) {
  handled = true;
  if (key == "beta1")
    opt.beta1 = parse_double(value, where);
  else if (key == "beta2")
    opt.beta2 = parse_double(value, where);
  else if (key == "epsilon")
    opt.epsilon = parse_double(value, where);
  else if (key == "clip_norm")
    opt.clip_norm = parse_double(value, where);
  else
    handled = false;
}

void validate_train_config(const TrainConfig& c) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw ValidationError(cat("train config: ", what, " must be positive"));
  };
  positive(c.stage1.lr_encoder, "stage1 lr_encoder");
  positive(c.stage1.lr_rest, "stage1 lr_rest");
  positive(c.stage2.lr, "stage2 lr");
  positive(c.stage1.batch_size, "stage1 batch_size");
  positive(c.stage2.batch_size, "stage2 batch_size");
  if (c.stage1.epochs < 0 || c.stage2.epochs < 0)
    throw ValidationError("train config: epochs must be nonnegative");
  for (const OptimizerConfig* opt : {&c.stage1.opt, &c.stage2.opt}) {
    if (!(opt->beta1 >= 0 && opt->beta1 < 1) || !(opt->beta2 >= 0 && opt->beta2 < 1))
      throw ValidationError("train config: betas must lie in [0, 1)");
    positive(opt->epsilon, "epsilon");
    if (opt->clip_norm < 0) throw ValidationError("train config: clip_norm must be >= 0");
  }
}

}  // namespace

TrainConfig parse_train_config(std::istream& in) {
  TrainConfig c;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(cat("config line ", lineno, ": unterminated section"));
      section = std::string(t.substr(1, t.size() - 2));
      if (section != "model" && section != "train.stage1" && section != "train.stage2" &&
          section != "ablation")
        throw ParseError(cat("config line ", lineno, ": unknown section [", section, "]"));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(cat("config line ", lineno, ": expected key = value"));
    std::string key(trim(t.substr(0, eq)));
    std::string value(trim(t.substr(eq + 1)));
    std::string where = cat("config line ", lineno, " (", key, ")");
    if (section == "model") {
      if (key == "d")
        c.model.encoder.d = static_cast<int>(parse_int(value, where));
      else if (key == "r")
        c.model.encoder.r = static_cast<int>(parse_int(value, where));
      else if (key == "context")
        c.model.encoder.context = encoder_context_from_name(value);
      else if (key == "mlp_hidden")
        c.model.mlp_hidden = static_cast<int>(parse_int(value, where));
      else if (key == "att_hidden")
        c.model.att_hidden = static_cast<int>(parse_int(value, where));
      else if (key == "lambda_pitch")
        c.model.lambdas.pitch = parse_double(value, where);
      else if (key == "lambda_energy")
        c.model.lambdas.energy = parse_double(value, where);
      else if (key == "lambda_lpe")
        c.model.lambdas.lpe = parse_double(value, where);
      else if (key == "lambda_style")
        c.model.lambdas.style = parse_double(value, where);
      else if (key == "normalize_pitch_energy")
        c.model.normalize_pitch_energy = parse_bool(value, where);
      else
        throw ParseError(cat(where, ": unknown key in [model]"));
    } else if (section == "train.stage1") {
      bool handled = false;
      parse_optimizer_key(c.stage1.opt, key, value, where, handled);
      if (handled) continue;
      if (key == "lr_encoder")
        c.stage1.lr_encoder = parse_double(value, where);
      else if (key == "lr_rest")
        c.stage1.lr_rest = parse_double(value, where);
      else if (key == "batch_size")
        c.stage1.batch_size = static_cast<int>(parse_int(value, where));
      else if (key == "epochs")
        c.stage1.epochs = static_cast<int>(parse_int(value, where));
      else if (key == "seed")
        c.stage1.seed = parse_seed(value, where);
      else
        throw ParseError(cat(where, ": unknown key in [train.stage1]"));
    } else if (section == "train.stage2") {
      bool handled = false;
      parse_optimizer_key(c.stage2.opt, key, value, where, handled);
      if (handled) continue;
      if (key == "lr")
        c.stage2.lr = parse_double(value, where);
      else if (key == "batch_size")
        c.stage2.batch_size = static_cast<int>(parse_int(value, where));
      else if (key == "epochs")
        c.stage2.epochs = static_cast<int>(parse_int(value, where));
      else if (key == "cache_stage1")
        c.stage2.cache_stage1 = parse_bool(value, where);
      else if (key == "seed")
        c.stage2.seed = parse_seed(value, where);
      else
        throw ParseError(cat(where, ": unknown key in [train.stage2]"));
    } else if (section == "ablation") {
      if (key != "no_word" && key != "no_phn" && key != "no_pe")
        throw ParseError(cat(where, ": unknown ablation flag '", key,
                             "', valid flags: no_word, no_phn, no_pe"));
      if (parse_bool(value, where)) c.ablation.push_back(key);
    } else {
      throw ParseError(cat("config line ", lineno, ": key outside any section"));
    }
  }
  validate_train_config(c);
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::istringstream is(read_file(path));
  return parse_train_config(is);
}

void apply_ablation(const std::vector<std::string>& flags, UmpmConfig& config) {
  for (const std::string& f : flags) {
    if (f == "no_word")
      config.ablate_word = true;
    else if (f == "no_phn")
      config.ablate_phn = true;
    else if (f == "no_pe")
      config.ablate_pe = true;
    else
      throw ValidationError(
          cat("unknown ablation flag '", f, "', valid flags: no_word, no_phn, no_pe"));
  }
}

double clip_gradients(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (int i = 0; i < store.size(); ++i) {
    const Param& p = store.at(i);
    if (p.frozen) continue;
    for (double g : p.grad.data) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    double s = max_norm / norm;
    for (int i = 0; i < store.size(); ++i) {
      Param& p = store.at(i);
      if (p.frozen) continue;
      for (double& g : p.grad.data) g *= s;
    }
  }
  return norm;
}

Adam::Adam(ParamStore& store, const OptimizerConfig& opt) : store_(store), opt_(opt) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (int i = 0; i < store.size(); ++i) {
    const Matrix& w = store.at(i).value;
    m_.emplace_back(w.rows, w.cols);
    v_.emplace_back(w.rows, w.cols);
  }
}

void Adam::set_lr(ParamGroup group, double lr) {
  if (lr < 0) throw ValidationError("learning rate must be nonnegative");
  lr_[static_cast<int>(group)] = lr;
}

void Adam::step() {
  if (store_.size() != static_cast<int>(m_.size()))
    throw ValidationError("optimizer state does not match the parameter store");
  for (int i = 0; i < store_.size(); ++i) {
    const Param& p = store_.at(i);
    if (!p.frozen) continue;
    for (double g : p.grad.data)
      if (g != 0.0)
        throw ValidationError(cat("optimizer step would update frozen tensor '", p.name, "'"));
  }
  if (opt_.clip_norm > 0) clip_gradients(store_, opt_.clip_norm);
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (int i = 0; i < store_.size(); ++i) {
    Param& p = store_.at(i);
    if (p.frozen) continue;
    const double lr = lr_[static_cast<int>(p.group)];
    if (lr == 0.0) continue;
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (size_t e = 0; e < p.value.data.size(); ++e) {
      const double g = p.grad.data[e];
      m.data[e] = opt_.beta1 * m.data[e] + (1.0 - opt_.beta1) * g;
      v.data[e] = opt_.beta2 * v.data[e] + (1.0 - opt_.beta2) * g * g;
      const double mhat = m.data[e] / bc1;
      const double vhat = v.data[e] / bc2;
      p.value.data[e] -= lr * mhat / (std::sqrt(vhat) + opt_.epsilon);
    }
  }
}

void write_loss_history(const std::vector<EpochLoss>& history, std::ostream& out) {
  out << "epoch,pitch_mse,energy_mse,lpe_mse,style_ce,total\n";
  for (const EpochLoss& e : history)
    out << fmt_int(e.epoch) << ',' << fmt_double(e.pitch_mse) << ',' << fmt_double(e.energy_mse)
        << ',' << fmt_double(e.lpe_mse) << ',' << fmt_double(e.style_ce) << ','
        << fmt_double(e.total) << '\n';
}

std::string loss_history_csv(const std::vector<EpochLoss>& history) {
  std::ostringstream os;
  write_loss_history(history, os);
  return os.str();
}

namespace {

struct Example {
  const Utterance* utt = nullptr;
  const PhonemeTargets* targets = nullptr;
};

std::vector<Example> collect_examples(const TrainData& data) {
  if (data.discourses.empty()) throw ValidationError("training corpus is empty");
  std::vector<Example> out;
  for (const Discourse& d : data.discourses) {
    if (d.utterances.empty())
      throw ValidationError(cat("discourse '", d.id, "' has no utterances"));
    for (const Utterance& u : d.utterances) {
      auto it = data.targets.find(u.id);
      if (it == data.targets.end())
        throw ValidationError(cat("no feature targets for utterance '", u.id, "'"));
      validate_targets(u, it->second);
      out.push_back({&u, &it->second});
    }
  }
  return out;
}

// Scans values first, then gradients; raised when a batch loss leaves the
// finite range so the report can name the offending tensor.
[[noreturn]] void abort_non_finite(const ParamStore& store, double loss, int epoch,
                                   long long step) {
  std::string head = cat("non-finite loss ", loss, " at epoch ", epoch, ", step ", step);
  for (int i = 0; i < store.size(); ++i)
    for (double x : store.at(i).value.data)
      if (!std::isfinite(x))
        throw ValidationError(
            cat(head, "; first non-finite tensor: value of ", store.at(i).name));
  for (int i = 0; i < store.size(); ++i)
    for (double x : store.at(i).grad.data)
      if (!std::isfinite(x))
        throw ValidationError(
            cat(head, "; first non-finite tensor: gradient of ", store.at(i).name));
  throw ValidationError(cat(head, "; all parameter tensors are finite"));
}

Tape::Id fold_add(Tape& tape, const std::vector<Tape::Id>& ids) {
  Tape::Id acc = ids.front();
  for (size_t i = 1; i < ids.size(); ++i) acc = tape.add(acc, ids[i]);
  return acc;
}

PeNorm compute_pe_norm(const std::vector<Example>& examples) {
  double sp = 0, sp2 = 0, se = 0, se2 = 0;
  long long n = 0;
  for (const Example& ex : examples) {
    for (double v : ex.targets->pitch) {
      sp += v;
      sp2 += v * v;
    }
    for (double v : ex.targets->energy) {
      se += v;
      se2 += v * v;
    }
    n += static_cast<long long>(ex.targets->pitch.size());
  }
  if (n == 0) throw ValidationError("cannot normalize an empty corpus");
  PeNorm norm;
  norm.pitch_mean = sp / n;
  norm.energy_mean = se / n;
  double vp = sp2 / n - norm.pitch_mean * norm.pitch_mean;
  double ve = se2 / n - norm.energy_mean * norm.energy_mean;
  norm.pitch_std = vp > 0 ? std::sqrt(vp) : 1.0;
  norm.energy_std = ve > 0 ? std::sqrt(ve) : 1.0;
  return norm;
}

int derive_n_styles_utterance(const TrainData& data) {
  int n = 1;
  for (const Discourse& d : data.discourses)
    for (const Utterance& u : d.utterances) n = std::max(n, u.style_label + 1);
  return std::max(n, 2);
}

int derive_n_styles_discourse(const TrainData& data) {
  int n = 1;
  for (const Discourse& d : data.discourses) n = std::max(n, d.style_label + 1);
  return std::max(n, 2);
}

DmpmConfig derive_dmpm_config(const TrainData& data, const ModelSettings& model) {
  DmpmConfig c;
  c.r = model.encoder.r;
  c.n_styles = derive_n_styles_discourse(data);
  c.mlp_hidden = model.mlp_hidden;
  c.att_hidden = model.att_hidden;
  return c;
}

}  // namespace

UmpmConfig derive_umpm_config(const TrainData& data, const ModelSettings& model,
                              const std::vector<std::string>& ablation) {
  UmpmConfig cfg;
  cfg.encoder = model.encoder;
  cfg.mlp_hidden = model.mlp_hidden;
  std::set<std::string> symbols;
  symbols.insert(kSeparatorSymbol);
  int n_speakers = 1;
  for (const Discourse& d : data.discourses)
    for (const Utterance& u : d.utterances) {
      n_speakers = std::max(n_speakers, u.speaker_id + 1);
      for (const WordToken& w : u.words)
        for (const PhonemeToken& p : w.phonemes) symbols.insert(p.symbol);
    }
  cfg.phoneme_alphabet.assign(symbols.begin(), symbols.end());
  cfg.n_speakers = n_speakers;
  cfg.n_styles = derive_n_styles_utterance(data);
  apply_ablation(ablation, cfg);
  return cfg;
}

TrainOutput train_stage1(const TrainData& data, const TrainConfig& config) {
  validate_train_config(config);
  std::vector<Example> examples = collect_examples(data);
  UmpmConfig cfg = derive_umpm_config(data, config.model, config.ablation);
  Vocabulary vocab = Vocabulary::build(data.discourses);

  UmpmModel model(cfg, vocab);
  if (config.model.normalize_pitch_energy) model.set_pe_norm(compute_pe_norm(examples));

  ParamStore store;
  model.register_params(store);
  store.initialize(config.stage1.seed);

  Adam adam(store, config.stage1.opt);
  adam.set_lr(ParamGroup::kEncoder, config.stage1.lr_encoder);
  adam.set_lr(ParamGroup::kRest, config.stage1.lr_rest);
  adam.set_lr(ParamGroup::kStage2, 0.0);

  const LossLambdas& lam = config.model.lambdas;
  const int batch = config.stage1.batch_size;
  TrainOutput out;
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.stage1.epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(config.stage1.seed, "shuffle", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double ep_p = 0, ep_e = 0, ep_l = 0, ep_ce = 0;
    long long ep_valid = 0, ep_lpe = 0, ep_utts = 0;
    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(batch)) {
      size_t hi = std::min(order.size(), b + static_cast<size_t>(batch));
      store.zero_grads();
      Tape tape;
      ParamNodes params(tape, store);
      std::vector<Tape::Id> ps, es, ls, ces;
      long long n_valid = 0, n_lpe = 0;
      for (size_t k = b; k < hi; ++k) {
        const Example& ex = examples[order[k]];
        UmpmNodes nodes = model.forward(tape, params, *ex.utt, ex.targets, RunMode::kTrain,
                                        ex.utt->speaker_id);
        UtteranceSse sse = model.build_sse(tape, nodes, *ex.targets, ex.utt->style_label);
        ps.push_back(sse.pitch_sse);
        es.push_back(sse.energy_sse);
        ls.push_back(sse.lpe_sse);
        ces.push_back(sse.style_ce);
        n_valid += sse.n_valid;
        n_lpe += sse.n_lpe_rows;
      }
      const long long n_batch = static_cast<long long>(hi - b);
      Tape::Id sum_p = fold_add(tape, ps);
      Tape::Id sum_e = fold_add(tape, es);
      Tape::Id sum_l = fold_add(tape, ls);
      Tape::Id sum_ce = fold_add(tape, ces);
      Tape::Id total = tape.scale(sum_p, lam.pitch / static_cast<double>(n_valid));
      total = tape.add(total, tape.scale(sum_e, lam.energy / static_cast<double>(n_valid)));
      if (n_lpe > 0)
        total = tape.add(total, tape.scale(sum_l, lam.lpe / (3.0 * static_cast<double>(n_lpe))));
      total = tape.add(total, tape.scale(sum_ce, lam.style / static_cast<double>(n_batch)));

      ep_p += tape.scalar(sum_p);
      ep_e += tape.scalar(sum_e);
      ep_l += tape.scalar(sum_l);
      ep_ce += tape.scalar(sum_ce);
      ep_valid += n_valid;
      ep_lpe += n_lpe;
      ep_utts += n_batch;

      tape.backward({{total, 1.0}});
      if (!std::isfinite(tape.scalar(total))) abort_non_finite(store, tape.scalar(total), epoch,
                                                               out.steps);
      adam.step();
      ++out.steps;
    }

    EpochLoss el;
    el.epoch = epoch;
    el.pitch_mse = ep_p / static_cast<double>(ep_valid);
    el.energy_mse = ep_e / static_cast<double>(ep_valid);
    el.lpe_mse = ep_lpe > 0 ? ep_l / (3.0 * static_cast<double>(ep_lpe)) : 0.0;
    el.style_ce = ep_ce / static_cast<double>(ep_utts);
    el.total = lam.pitch * el.pitch_mse + lam.energy * el.energy_mse + lam.lpe * el.lpe_mse +
               lam.style * el.style_ce;
    out.history.push_back(el);
  }

  out.checkpoint = snapshot_checkpoint(1, cfg, derive_dmpm_config(data, config.model), vocab,
                                       model.pe_norm(), store);
  return out;
}

TrainOutput train_stage2(const TrainData& data, const Checkpoint& stage1_ckpt,
                         const TrainConfig& config) {
  validate_train_config(config);
  if (stage1_ckpt.stage != 1)
    throw ValidationError(cat("stage-2 training requires a stage-1 checkpoint, got stage ",
                              stage1_ckpt.stage));
  collect_examples(data);  // validates structure and target presence

  UmpmConfig expected_cfg = derive_umpm_config(data, config.model, config.ablation);
  Vocabulary expected_vocab = Vocabulary::build(data.discourses);
  std::uint64_t expected = config_hash(expected_cfg, expected_vocab);
  if (expected != stage1_ckpt.config_hash)
    throw ValidationError(
        "config hash mismatch between corpus and checkpoint; the stage-1 model was trained with "
        "a different vocabulary, alphabet or model configuration");

  Vocabulary vocab = vocab_from(stage1_ckpt);
  UmpmModel stage1(stage1_ckpt.umpm, vocab);
  stage1.set_pe_norm(stage1_ckpt.pe_norm);
  DmpmConfig dcfg = derive_dmpm_config(data, config.model);
  DmpmModel stage2(dcfg);

  ParamStore store;
  stage1.register_params(store);
  stage2.register_params(store);
  store.initialize(config.stage2.seed);
  restore_params(stage1_ckpt, store);
  for (int i = 0; i < store.size(); ++i)
    if (store.at(i).group != ParamGroup::kStage2) store.at(i).frozen = true;

  const std::uint64_t enc_digest = store.values_digest("enc.");
  const std::uint64_t umpm_digest = store.values_digest("umpm.");

  Adam adam(store, config.stage2.opt);
  adam.set_lr(ParamGroup::kEncoder, 0.0);
  adam.set_lr(ParamGroup::kRest, 0.0);
  adam.set_lr(ParamGroup::kStage2, config.stage2.lr);

  auto make_batches = [&]() {
    std::vector<DiscourseBatch> batches;
    batches.reserve(data.discourses.size());
    for (const Discourse& d : data.discourses) {
      std::vector<PhonemeTargets> targets;
      targets.reserve(d.utterances.size());
      for (const Utterance& u : d.utterances) targets.push_back(data.targets.at(u.id));
      batches.push_back(make_discourse_batch(stage1, store, d, &targets));
    }
    return batches;
  };

  std::vector<DiscourseBatch> cached;
  if (config.stage2.cache_stage1) cached = make_batches();

  const DiscourseLambdas lam{config.model.lambdas.lpe, config.model.lambdas.style};
  const int batch = config.stage2.batch_size;
  TrainOutput out;
  std::vector<size_t> order(data.discourses.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.stage2.epochs; ++epoch) {
    if (!config.stage2.cache_stage1) cached = make_batches();
    const std::vector<DiscourseBatch>& batches = cached;
    Rng shuffle_rng(Rng::derive(config.stage2.seed, "shuffle", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double ep_l = 0, ep_ce = 0;
    long long ep_lpe = 0, ep_disc = 0;
    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(batch)) {
      size_t hi = std::min(order.size(), b + static_cast<size_t>(batch));
      store.zero_grads();
      Tape tape;
      ParamNodes params(tape, store);
      std::vector<Tape::Id> ls, ces;
      long long n_lpe = 0;
      for (size_t k = b; k < hi; ++k) {
        const DiscourseBatch& db = batches[order[k]];
        DmpmModel::Nodes nodes = stage2.forward(tape, params, db);
        DmpmModel::Sse sse = stage2.build_sse(tape, nodes, db);
        ls.push_back(sse.lpe_sse);
        ces.push_back(sse.style_ce);
        n_lpe += sse.n_lpe_rows;
      }
      const long long n_batch = static_cast<long long>(hi - b);
      Tape::Id sum_l = fold_add(tape, ls);
      Tape::Id sum_ce = fold_add(tape, ces);
      Tape::Id total = tape.scale(sum_l, lam.lpe / (3.0 * static_cast<double>(n_lpe)));
      total = tape.add(total, tape.scale(sum_ce, lam.style / static_cast<double>(n_batch)));

      ep_l += tape.scalar(sum_l);
      ep_ce += tape.scalar(sum_ce);
      ep_lpe += n_lpe;
      ep_disc += n_batch;

      tape.backward({{total, 1.0}});
      if (!std::isfinite(tape.scalar(total))) abort_non_finite(store, tape.scalar(total), epoch,
                                                               out.steps);
      adam.step();
      ++out.steps;
    }

    EpochLoss el;
    el.epoch = epoch;
    el.lpe_mse = ep_l / (3.0 * static_cast<double>(ep_lpe));
    el.style_ce = ep_ce / static_cast<double>(ep_disc);
    el.total = lam.lpe * el.lpe_mse + lam.style * el.style_ce;
    out.history.push_back(el);
  }

  if (store.values_digest("enc.") != enc_digest || store.values_digest("umpm.") != umpm_digest)
    throw ValidationError("freeze contract violated: stage-1 tensors changed during stage 2");

  out.checkpoint = snapshot_checkpoint(2, stage1_ckpt.umpm, dcfg, vocab, stage1_ckpt.pe_norm,
                                       store);
  return out;
}

}  // namespace proso
