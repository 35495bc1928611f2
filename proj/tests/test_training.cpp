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

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "proso/core/digest.hpp"
#include "proso/core/error.hpp"
#include "proso/core/rng.hpp"
#include "proso/train/checkpoint.hpp"
#include "proso/train/train.hpp"
#include "testutil.hpp"

using namespace proso;
using namespace proso::testutil;

namespace {

TrainConfig micro_train_config() {
  TrainConfig c;
  c.model.encoder.d = 4;
  c.model.encoder.r = 4;
  c.model.mlp_hidden = 3;
  c.model.att_hidden = 3;
  c.stage1.epochs = 1;
  c.stage2.epochs = 1;
  return c;
}

// Small random corpus: n_disc discourses of n_utt utterances each, with
// matching random targets.
TrainData random_corpus(uint64_t seed, int n_disc, int n_utt) {
  Rng rng(seed);
  TrainData data;
  for (int d = 0; d < n_disc; ++d) {
    Discourse disc;
    disc.id = "d" + std::to_string(d);
    disc.style_label = rng.range(0, 1);
    for (int u = 0; u < n_utt; ++u) {
      Utterance utt = random_utt(rng, disc.id + "_u" + std::to_string(u), 4, 3,
                                 rng.range(0, 1), rng.range(0, 1));
      data.targets.emplace(utt.id, random_targets(rng, utt));
      disc.utterances.push_back(std::move(utt));
    }
    data.discourses.push_back(std::move(disc));
  }
  return data;
}

std::uint64_t tensors_digest(const Checkpoint& ckpt, const std::string& prefix = "") {
  Digest d;
  for (const auto& [name, m] : ckpt.tensors) {
    if (name.rfind(prefix, 0) != 0) continue;
    d.str(name);
    d.matrix(m);
  }
  return d.value();
}

}  // namespace

TEST_CASE("empty config stream keeps the published defaults") {
  std::istringstream is("");
  TrainConfig c = parse_train_config(is);
  CHECK(c.model.encoder.d == 32);
  CHECK(c.model.encoder.r == 32);
  CHECK(c.model.lambdas.pitch == 0.05);
  CHECK(c.model.lambdas.energy == 0.0025);
  CHECK(c.model.lambdas.lpe == 1.0);
  CHECK(c.model.lambdas.style == 1.0);
  CHECK(c.stage1.lr_encoder == 1e-5);
  CHECK(c.stage1.lr_rest == 1e-3);
  CHECK(c.stage1.batch_size == 16);
  CHECK(c.stage1.epochs == 40);
  CHECK(c.stage1.opt.beta1 == 0.9);
  CHECK(c.stage1.opt.beta2 == 0.999);
  CHECK(c.stage1.opt.epsilon == 1e-8);
  CHECK(c.stage1.opt.clip_norm == 0.0);
  CHECK(c.stage2.lr == 2e-4);
  CHECK(c.stage2.batch_size == 32);
  CHECK(c.stage2.epochs == 40);
  CHECK(c.stage2.cache_stage1);
  CHECK(c.ablation.empty());
}

TEST_CASE("config file keys land in the right fields") {
  std::istringstream is(
      "# comment\n"
      "[model]\n"
      "d = 8\n"
      "r = 6\n"
      "mlp_hidden = 5\n"
      "att_hidden = 7\n"
      "lambda_pitch = 0.1\n"
      "lambda_energy = 0.2\n"
      "lambda_lpe = 0.3\n"
      "lambda_style = 0.4\n"
      "normalize_pitch_energy = true\n"
      "\n"
      "[train.stage1]\n"
      "lr_encoder = 2e-5\n"
      "lr_rest = 5e-4\n"
      "batch_size = 4\n"
      "epochs = 3\n"
      "seed = 9\n"
      "beta1 = 0.8\n"
      "beta2 = 0.99\n"
      "epsilon = 1e-7\n"
      "clip_norm = 2.5\n"
      "; another comment\n"
      "[train.stage2]\n"
      "lr = 1e-3\n"
      "batch_size = 2\n"
      "epochs = 5\n"
      "cache_stage1 = false\n"
      "seed = 11\n"
      "[ablation]\n"
      "no_word = true\n"
      "no_pe = false\n");
  TrainConfig c = parse_train_config(is);
  CHECK(c.model.encoder.d == 8);
  CHECK(c.model.encoder.r == 6);
  CHECK(c.model.mlp_hidden == 5);
  CHECK(c.model.att_hidden == 7);
  CHECK(c.model.lambdas.pitch == 0.1);
  CHECK(c.model.lambdas.energy == 0.2);
  CHECK(c.model.lambdas.lpe == 0.3);
  CHECK(c.model.lambdas.style == 0.4);
  CHECK(c.model.normalize_pitch_energy);
  CHECK(c.stage1.lr_encoder == 2e-5);
  CHECK(c.stage1.lr_rest == 5e-4);
  CHECK(c.stage1.batch_size == 4);
  CHECK(c.stage1.epochs == 3);
  CHECK(c.stage1.seed == 9);
  CHECK(c.stage1.opt.beta1 == 0.8);
  CHECK(c.stage1.opt.beta2 == 0.99);
  CHECK(c.stage1.opt.epsilon == 1e-7);
  CHECK(c.stage1.opt.clip_norm == 2.5);
  CHECK(c.stage2.lr == 1e-3);
  CHECK(c.stage2.batch_size == 2);
  CHECK(c.stage2.epochs == 5);
  CHECK_FALSE(c.stage2.cache_stage1);
  CHECK(c.stage2.seed == 11);
  REQUIRE(c.ablation.size() == 1);
  CHECK(c.ablation[0] == "no_word");
}

TEST_CASE("config rejections") {
  auto reject = [](const std::string& text) {
    std::istringstream is(text);
    CHECK_THROWS_AS(parse_train_config(is), ParseError);
  };
  reject("[training]\n");
  reject("[model]\nwidth = 4\n");
  reject("[train.stage1]\nlr = 1\n");
  reject("[ablation]\nno_tone = true\n");
  reject("d = 8\n");
  reject("[model]\nd 8\n");
  reject("[model]\nnormalize_pitch_energy = maybe\n");
  std::istringstream bad_lr("[train.stage1]\nlr_rest = 0\n");
  CHECK_THROWS_AS(parse_train_config(bad_lr), ValidationError);
  std::istringstream bad_beta("[train.stage2]\nbeta1 = 1\n");
  CHECK_THROWS_AS(parse_train_config(bad_beta), ValidationError);
}

TEST_CASE("ablation flags map onto model wiring") {
  UmpmConfig cfg;
  apply_ablation({}, cfg);
  CHECK_FALSE(cfg.ablate_word);
  CHECK_FALSE(cfg.ablate_phn);
  CHECK_FALSE(cfg.ablate_pe);
  apply_ablation({"no_word", "no_pe"}, cfg);
  CHECK(cfg.ablate_word);
  CHECK_FALSE(cfg.ablate_phn);
  CHECK(cfg.ablate_pe);
  CHECK_THROWS_WITH_AS(apply_ablation({"no_tone"}, cfg),
                       doctest::Contains("no_word, no_phn, no_pe"), ValidationError);
}

TEST_CASE("parameter groups update at their own learning rates") {
  ParamStore store;
  store.add("enc.x", 2, 2, ParamGroup::kEncoder);
  store.add("umpm.y", 2, 2, ParamGroup::kRest);
  store.add("dmpm.z", 2, 2, ParamGroup::kStage2);
  for (int i = 0; i < store.size(); ++i) {
    store.at(i).value.zero();
    for (double& g : store.at(i).grad.data) g = 1.0;
  }
  Adam adam(store, OptimizerConfig{});
  adam.set_lr(ParamGroup::kEncoder, 1e-5);
  adam.set_lr(ParamGroup::kRest, 1e-3);
  adam.set_lr(ParamGroup::kStage2, 2e-4);
  adam.step();
  // First step moves each weight by lr * g / (|g| + eps).
  const double unit = 1.0 / (1.0 + 1e-8);
  CHECK(store.at(0).value.data[0] == doctest::Approx(-1e-5 * unit).epsilon(1e-12));
  CHECK(store.at(1).value.data[0] == doctest::Approx(-1e-3 * unit).epsilon(1e-12));
  CHECK(store.at(2).value.data[0] == doctest::Approx(-2e-4 * unit).epsilon(1e-12));
  CHECK(adam.steps() == 1);
}

TEST_CASE("optimizer trajectory matches a scripted reference") {
  ParamStore store;
  store.add("w", 1, 3, ParamGroup::kRest);
  Param& p = store.at(0);
  p.value.data = {0.5, -0.2, 1.0};
  OptimizerConfig opt;
  Adam adam(store, opt);
  adam.set_lr(ParamGroup::kRest, 0.01);

  std::vector<double> w_ref = p.value.data;
  std::vector<double> m(3, 0.0), v(3, 0.0);
  Rng rng(7);
  for (int t = 1; t <= 5; ++t) {
    std::vector<double> g(3);
    for (double& x : g) x = rng.uniform(-1, 1);
    p.grad.data = g;
    adam.step();
    for (int e = 0; e < 3; ++e) {
      m[e] = opt.beta1 * m[e] + (1 - opt.beta1) * g[e];
      v[e] = opt.beta2 * v[e] + (1 - opt.beta2) * g[e] * g[e];
      double mhat = m[e] / (1 - std::pow(opt.beta1, t));
      double vhat = v[e] / (1 - std::pow(opt.beta2, t));
      w_ref[e] -= 0.01 * mhat / (std::sqrt(vhat) + opt.epsilon);
    }
    for (int e = 0; e < 3; ++e) CHECK(p.value.data[e] == w_ref[e]);
  }
}

TEST_CASE("frozen tensors are never touched and reject gradients") {
  ParamStore store;
  store.add("a", 1, 2, ParamGroup::kRest);
  store.add("b", 1, 2, ParamGroup::kRest);
  store.at(0).frozen = true;
  store.at(0).value.data = {3.0, 4.0};
  store.at(1).grad.data = {1.0, 1.0};
  Adam adam(store, OptimizerConfig{});
  adam.set_lr(ParamGroup::kRest, 0.1);
  adam.step();
  CHECK(store.at(0).value.data[0] == 3.0);
  CHECK(store.at(0).value.data[1] == 4.0);
  CHECK(store.at(1).value.data[0] != 0.0);

  store.at(0).grad.data = {0.5, 0.0};
  CHECK_THROWS_WITH_AS(adam.step(), doctest::Contains("frozen tensor 'a'"), ValidationError);
}

TEST_CASE("gradient clipping rescales to the requested norm") {
  ParamStore store;
  store.add("a", 1, 1, ParamGroup::kRest);
  store.add("b", 1, 1, ParamGroup::kRest);
  store.add("c", 1, 1, ParamGroup::kRest);
  store.at(0).grad.data = {3.0};
  store.at(1).grad.data = {4.0};
  store.at(2).frozen = true;
  store.at(2).grad.data = {0.0};
  CHECK(clip_gradients(store, 10.0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(store.at(0).grad.data[0] == 3.0);  // below the limit: untouched
  CHECK(clip_gradients(store, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(store.at(0).grad.data[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(store.at(1).grad.data[0] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("loss history renders as the fixed CSV schema") {
  std::vector<EpochLoss> h;
  h.push_back({0, 1.5, 0.25, 0.125, 0.7, 2.0});
  h.push_back({1, 1.0, 0.2, 0.1, 0.5, 1.5});
  CHECK(loss_history_csv(h) ==
        "epoch,pitch_mse,energy_mse,lpe_mse,style_ce,total\n"
        "0,1.5,0.25,0.125,0.7,2\n"
        "1,1,0.2,0.1,0.5,1.5\n");
}

TEST_CASE("checkpoint round-trips exactly") {
  TrainData data = random_corpus(3, 2, 2);
  UmpmConfig cfg = derive_umpm_config(data, micro_train_config().model, {"no_phn"});
  Vocabulary vocab = Vocabulary::build(data.discourses);
  UmpmModel model(cfg, vocab);
  ParamStore store;
  model.register_params(store);
  store.initialize(5);
  // Stress the formatter with exact edge values.
  store.at(0).value.data[0] = -0.0;
  store.at(0).value.data[1] = 5e-324;
  store.at(0).value.data[2] = 1.0 / 3.0;
  PeNorm norm{5.0, 0.5, 1.0, 2.0};
  DmpmConfig dcfg;
  dcfg.r = cfg.encoder.r;
  dcfg.n_styles = 3;
  dcfg.mlp_hidden = 4;
  dcfg.att_hidden = 5;

  Checkpoint ckpt = snapshot_checkpoint(1, cfg, dcfg, vocab, norm, store);
  std::ostringstream os;
  write_checkpoint(ckpt, os);
  std::istringstream is(os.str());
  Checkpoint back = read_checkpoint(is);

  CHECK(back.stage == 1);
  CHECK(back.config_hash == ckpt.config_hash);
  CHECK(back.umpm.encoder.d == cfg.encoder.d);
  CHECK(back.umpm.encoder.r == cfg.encoder.r);
  CHECK(back.umpm.n_speakers == cfg.n_speakers);
  CHECK(back.umpm.n_styles == cfg.n_styles);
  CHECK(back.umpm.mlp_hidden == cfg.mlp_hidden);
  CHECK(back.umpm.ablate_phn == cfg.ablate_phn);
  CHECK(back.umpm.phoneme_alphabet == cfg.phoneme_alphabet);
  CHECK(back.dmpm.r == dcfg.r);
  CHECK(back.dmpm.n_styles == dcfg.n_styles);
  CHECK(back.dmpm.mlp_hidden == dcfg.mlp_hidden);
  CHECK(back.dmpm.att_hidden == dcfg.att_hidden);
  CHECK(back.vocab_tokens == vocab.tokens());
  CHECK(back.pe_norm.pitch_mean == 5.0);
  CHECK(back.pe_norm.pitch_std == 0.5);
  CHECK(back.pe_norm.energy_mean == 1.0);
  CHECK(back.pe_norm.energy_std == 2.0);
  REQUIRE(back.tensors.size() == ckpt.tensors.size());
  for (size_t i = 0; i < back.tensors.size(); ++i) {
    CHECK(back.tensors[i].first == ckpt.tensors[i].first);
    CHECK(back.tensors[i].second == ckpt.tensors[i].second);
  }
  CHECK(std::signbit(back.tensors[0].second.data[0]));

  // restore_params reproduces the exact store values.
  ParamStore other;
  model.register_params(other);
  other.initialize(99);
  restore_params(back, other);
  CHECK(other.values_digest() == store.values_digest());
}

TEST_CASE("checkpoint rejects corrupt input") {
  std::istringstream bad_magic("PROSO-CKPT v2\n");
  CHECK_THROWS_AS(read_checkpoint(bad_magic), ParseError);
  std::istringstream truncated("PROSO-CKPT v1\nstage 1\n");
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);

  TrainData data = random_corpus(4, 1, 2);
  TrainConfig tc = micro_train_config();
  UmpmConfig cfg = derive_umpm_config(data, tc.model, {});
  Vocabulary vocab = Vocabulary::build(data.discourses);
  UmpmModel model(cfg, vocab);
  ParamStore store;
  model.register_params(store);
  store.initialize(5);
  Checkpoint ckpt = snapshot_checkpoint(1, cfg, DmpmConfig{}, vocab, PeNorm{}, store);

  Checkpoint renamed = ckpt;
  renamed.tensors[0].first = "enc.bogus";
  CHECK_THROWS_WITH_AS(restore_params(renamed, store), doctest::Contains("enc.bogus"),
                       ValidationError);
  Checkpoint reshaped = ckpt;
  reshaped.tensors[0].second = Matrix(1, 1);
  CHECK_THROWS_AS(restore_params(reshaped, store), ValidationError);
}

TEST_CASE("config hash tracks model identity") {
  TrainData data = random_corpus(6, 2, 2);
  TrainConfig tc = micro_train_config();
  UmpmConfig cfg = derive_umpm_config(data, tc.model, {});
  Vocabulary vocab = Vocabulary::build(data.discourses);
  std::uint64_t base = config_hash(cfg, vocab);
  CHECK(config_hash(cfg, vocab) == base);

  UmpmConfig wider = cfg;
  wider.encoder.d = 8;
  CHECK(config_hash(wider, vocab) != base);
  UmpmConfig ablated = cfg;
  ablated.ablate_pe = true;
  CHECK(config_hash(ablated, vocab) != base);
  Vocabulary extra = vocab;
  extra.add("wz");
  CHECK(config_hash(cfg, extra) != base);
}

TEST_CASE("stage-1 runs count optimizer steps and epochs") {
  TrainConfig tc = micro_train_config();
  tc.stage1.epochs = 1;
  TrainData one = random_corpus(7, 1, 1);
  TrainOutput out = train_stage1(one, tc);
  CHECK(out.steps == 1);
  REQUIRE(out.history.size() == 1);
  CHECK(out.history[0].epoch == 0);
  CHECK(out.checkpoint.stage == 1);

  TrainData five = random_corpus(8, 5, 1);
  tc.stage1.batch_size = 2;
  tc.stage1.epochs = 3;
  out = train_stage1(five, tc);
  CHECK(out.steps == 9);  // ceil(5 / 2) = 3 batches per epoch
  CHECK(out.history.size() == 3);
  CHECK(out.history[2].epoch == 2);
}

TEST_CASE("stage-1 training is deterministic in the seed") {
  TrainData data = random_corpus(9, 3, 2);
  TrainConfig tc = micro_train_config();
  tc.stage1.epochs = 2;
  tc.stage1.batch_size = 3;
  TrainOutput a = train_stage1(data, tc);
  TrainOutput b = train_stage1(data, tc);
  CHECK(a.history == b.history);
  CHECK(loss_history_csv(a.history) == loss_history_csv(b.history));
  CHECK(tensors_digest(a.checkpoint) == tensors_digest(b.checkpoint));

  tc.stage1.seed = 2;
  TrainOutput c = train_stage1(data, tc);
  CHECK(tensors_digest(c.checkpoint) != tensors_digest(a.checkpoint));
}

TEST_CASE("stage-1 refuses incomplete target sets") {
  TrainData data = random_corpus(10, 2, 2);
  data.targets.erase(data.discourses[1].utterances[0].id);
  TrainConfig tc = micro_train_config();
  CHECK_THROWS_WITH_AS(train_stage1(data, tc),
                       doctest::Contains(data.discourses[1].utterances[0].id.c_str()),
                       ValidationError);
}

TEST_CASE("non-finite losses abort with a tensor diagnostic") {
  TrainConfig tc = micro_train_config();

  // Overflowing target: the loss leaves the finite range while every
  // tensor stays representable.
  TrainData data = random_corpus(11, 1, 2);
  data.targets.begin()->second.pitch[0] = 1e200;
  CHECK_THROWS_WITH_AS(train_stage1(data, tc), doctest::Contains("non-finite loss"),
                       ValidationError);

  // NaN teacher input: backpropagation poisons gradients, and the abort
  // names the first offending tensor.
  TrainData poisoned = random_corpus(11, 1, 2);
  poisoned.targets.begin()->second.pitch[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train_stage1(poisoned, tc);
    FAIL("expected a non-finite abort");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("first non-finite tensor: gradient of") !=
          std::string::npos);
  }
}

TEST_CASE("stage-1 loss falls on a word-coded corpus") {
  // LPE depends only on the word identity; everything is learnable.
  TrainData data;
  Rng rng(12);
  Discourse disc;
  disc.id = "d0";
  for (int u = 0; u < 12; ++u) {
    bool pick = (u % 2) == 0;
    Utterance utt = make_utt("d0_u" + std::to_string(u),
                             {lex(pick ? "wa" : "wb", {"p0"}, 1)}, 0, pick ? 0 : 1);
    PhonemeTargets t;
    t.utterance_id = utt.id;
    t.pitch = {pick ? 4.5 : 5.5};
    t.energy = {pick ? 0.5 : 1.5};
    t.lpe = {pick ? std::array<double, 3>{0.2, 0.8, 0.3} : std::array<double, 3>{0.9, 0.1, 0.6}};
    data.targets.emplace(utt.id, std::move(t));
    disc.utterances.push_back(std::move(utt));
  }
  data.discourses.push_back(std::move(disc));

  TrainConfig tc = micro_train_config();
  tc.model.encoder.d = 8;
  tc.model.encoder.r = 8;
  tc.stage1.epochs = 40;
  tc.stage1.batch_size = 4;
  tc.stage1.lr_rest = 0.01;
  TrainOutput out = train_stage1(data, tc);
  CHECK(out.history.back().lpe_mse < 0.3 * out.history.front().lpe_mse);
  CHECK(out.history.back().style_ce < out.history.front().style_ce);
  CHECK(out.history.back().total < out.history.front().total);
}

TEST_CASE("normalization constants come from corpus statistics") {
  TrainData data;
  Discourse disc;
  disc.id = "d0";
  for (int u = 0; u < 2; ++u) {
    Utterance utt = make_utt("d0_u" + std::to_string(u), {lex("wa", {"p0"}, 1)}, 0, 0);
    PhonemeTargets t;
    t.utterance_id = utt.id;
    t.pitch = {u == 0 ? 4.0 : 6.0};
    t.energy = {u == 0 ? 1.0 : 3.0};
    t.lpe = {{0.5, 0.5, 0.5}};
    data.targets.emplace(utt.id, std::move(t));
    disc.utterances.push_back(std::move(utt));
  }
  data.discourses.push_back(std::move(disc));

  TrainConfig tc = micro_train_config();
  tc.model.normalize_pitch_energy = true;
  TrainOutput out = train_stage1(data, tc);
  CHECK(out.checkpoint.pe_norm.pitch_mean == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(out.checkpoint.pe_norm.pitch_std == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.checkpoint.pe_norm.energy_mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out.checkpoint.pe_norm.energy_std == doctest::Approx(1.0).epsilon(1e-12));

  tc.model.normalize_pitch_energy = false;
  TrainOutput plain = train_stage1(data, tc);
  CHECK(plain.checkpoint.pe_norm.is_identity());
}

TEST_CASE("stage 2 with zero epochs returns its initialization") {
  TrainData data = random_corpus(13, 3, 2);
  TrainConfig tc = micro_train_config();
  TrainOutput s1 = train_stage1(data, tc);

  tc.stage2.epochs = 0;
  TrainOutput s2 = train_stage2(data, s1.checkpoint, tc);
  CHECK(s2.steps == 0);
  CHECK(s2.history.empty());
  CHECK(s2.checkpoint.stage == 2);

  // Expected initialization: fresh registration under the stage-2 seed.
  UmpmModel stage1(s1.checkpoint.umpm, vocab_from(s1.checkpoint));
  DmpmModel stage2(s2.checkpoint.dmpm);
  ParamStore fresh;
  stage1.register_params(fresh);
  stage2.register_params(fresh);
  fresh.initialize(tc.stage2.seed);
  for (const auto& [name, m] : s2.checkpoint.tensors) {
    if (name.rfind("dmpm.", 0) != 0) continue;
    CHECK(m == fresh.at(fresh.index_of(name)).value);
  }
  // Stage-1 tensors pass through byte-identical.
  CHECK(tensors_digest(s2.checkpoint, "enc.") == tensors_digest(s1.checkpoint, "enc."));
  CHECK(tensors_digest(s2.checkpoint, "umpm.") == tensors_digest(s1.checkpoint, "umpm."));
}

TEST_CASE("stage 2 trains only its own tensors") {
  TrainData data = random_corpus(14, 4, 3);
  TrainConfig tc = micro_train_config();
  TrainOutput s1 = train_stage1(data, tc);

  tc.stage2.epochs = 3;
  tc.stage2.batch_size = 2;
  TrainOutput s2 = train_stage2(data, s1.checkpoint, tc);
  CHECK(s2.steps == 6);  // ceil(4 / 2) = 2 batches x 3 epochs
  CHECK(s2.history.size() == 3);
  for (const EpochLoss& e : s2.history) {
    CHECK(e.pitch_mse == 0.0);
    CHECK(e.energy_mse == 0.0);
    CHECK(e.total == doctest::Approx(e.lpe_mse + e.style_ce).epsilon(1e-12));
  }
  CHECK(tensors_digest(s2.checkpoint, "enc.") == tensors_digest(s1.checkpoint, "enc."));
  CHECK(tensors_digest(s2.checkpoint, "umpm.") == tensors_digest(s1.checkpoint, "umpm."));

  // Deterministic across reruns; cache_stage1 = false changes nothing.
  TrainOutput again = train_stage2(data, s1.checkpoint, tc);
  CHECK(again.history == s2.history);
  CHECK(tensors_digest(again.checkpoint) == tensors_digest(s2.checkpoint));
  tc.stage2.cache_stage1 = false;
  TrainOutput uncached = train_stage2(data, s1.checkpoint, tc);
  CHECK(uncached.history == s2.history);
  CHECK(tensors_digest(uncached.checkpoint) == tensors_digest(s2.checkpoint));
}

TEST_CASE("stage 2 refuses mismatched corpora and wrong-stage checkpoints") {
  TrainData data = random_corpus(15, 3, 2);
  TrainConfig tc = micro_train_config();
  TrainOutput s1 = train_stage1(data, tc);

  TrainData other = random_corpus(16, 3, 2);
  CHECK_THROWS_WITH_AS(train_stage2(other, s1.checkpoint, tc),
                       doctest::Contains("config hash mismatch"), ValidationError);

  tc.stage2.epochs = 1;
  TrainOutput s2 = train_stage2(data, s1.checkpoint, tc);
  CHECK_THROWS_WITH_AS(train_stage2(data, s2.checkpoint, tc), doctest::Contains("stage"),
                       ValidationError);
}
