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

#include "proso/encoder/encoder.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "proso/core/error.hpp"
#include "proso/corpus/corpus.hpp"
#include "testutil.hpp"

namespace proso {
namespace {

Utterance utt_of(const std::vector<std::string>& surfaces) {
  std::string text;
  std::vector<PinyinEntry> entries;
  for (const auto& s : surfaces) {
    text += s;
    entries.push_back(PinyinEntry{s, {"a", "b"}, 1});
  }
  Utterance utt = tokenize_and_separate(text, entries);
  utt.id = "u0";
  return utt;
}

Vocabulary vocab_of(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

TEST_CASE("vocabulary reserves id 0 for unk and round-trips") {
  Vocabulary v = vocab_of({"ax", "bx", ","});
  CHECK(v.id_of(kUnkToken) == 0);
  CHECK(v.id_of("ax") == 1);
  CHECK(v.id_of("missing") == 0);
  CHECK(v.size() == 4);

  std::ostringstream out;
  v.write(out);
  std::istringstream in(out.str());
  Vocabulary back = Vocabulary::read(in);
  CHECK(back.size() == v.size());
  CHECK(back.id_of("bx") == v.id_of("bx"));

  std::istringstream bad("ax\nbx\n");
  CHECK_THROWS_AS(Vocabulary::read(bad), ParseError);
}

TEST_CASE("vocabulary built from a corpus covers all non-separator surfaces") {
  Utterance utt = utt_of({"ax", "bx"});
  Discourse d;
  d.id = "d0";
  d.utterances.push_back(utt);
  Vocabulary v = Vocabulary::build({d});
  CHECK(v.contains("ax"));
  CHECK(v.contains("bx"));
  CHECK_FALSE(v.contains("/"));
  for (const WordToken& w : utt.words)
    if (w.kind != WordKind::kSeparator) CHECK(v.id_of(w.surface) != 0);
}

TEST_CASE("zero params give zero encodings") {
  Utterance utt = utt_of({"ax"});
  ToyEncoder enc(EncoderConfig{8, 6, EncoderContext::kRecurrent}, vocab_of({"ax"}));
  ParamStore store;
  enc.register_params(store);
  WordEncoding e = enc.encode_values(store, utt);
  CHECK(e.word_vectors.rows == 1);
  CHECK(e.word_vectors.cols == 8);
  CHECK(e.utterance_vector.cols == 6);
  for (double v : e.word_vectors.data) CHECK(v == 0.0);
  for (double v : e.utterance_vector.data) CHECK(v == 0.0);
}

TEST_CASE("encoding is per-utterance deterministic and order independent") {
  Utterance a = utt_of({"ax", "bx"});
  Utterance b = utt_of({"cx"});
  ToyEncoder enc(EncoderConfig{8, 4, EncoderContext::kRecurrent},
                 vocab_of({"ax", "bx", "cx"}));
  ParamStore store;
  enc.register_params(store);
  store.initialize(7);

  WordEncoding ea1 = enc.encode_values(store, a);
  WordEncoding eb = enc.encode_values(store, b);
  WordEncoding ea2 = enc.encode_values(store, a);
  CHECK(ea1.word_vectors == ea2.word_vectors);
  CHECK(ea1.utterance_vector == ea2.utterance_vector);
  CHECK(eb.word_vectors.rows == 1);
}

TEST_CASE("separators are not encoder tokens") {
  Utterance utt = utt_of({"ax", "bx"});
  ToyEncoder enc(EncoderConfig{8, 4, EncoderContext::kRecurrent}, vocab_of({"ax", "bx"}));
  CHECK(enc.token_ids(utt).size() == 2);
  CHECK(utt.words.size() == 3);
}

TEST_CASE("embedding gradient matches finite differences") {
  Utterance utt = utt_of({"ax", "bx", "ax"});
  Vocabulary vocab = vocab_of({"ax", "bx"});
  for (EncoderContext ctx : {EncoderContext::kBag, EncoderContext::kRecurrent}) {
    ToyEncoder enc(EncoderConfig{4, 3, ctx}, vocab);
    ParamStore store;
    enc.register_params(store);
    store.initialize(3);

    store.zero_grads();
    Tape tape;
    ParamNodes params(tape, store);
    auto nodes = enc.encode(tape, params, utt);
    Rng r2(5);
    Matrix target = testutil::random_matrix(r2, tape.value(nodes.word_vectors).rows, 4);
    Matrix target_u = testutil::random_matrix(r2, 1, 3);
    std::vector<uint8_t> mask(static_cast<size_t>(tape.value(nodes.word_vectors).rows), 1);
    Tape::Id loss = tape.add(tape.masked_sse(nodes.word_vectors, target, mask),
                             tape.masked_sse(nodes.utterance_vector, target_u, {1}));
    tape.backward({{loss, 1.0}});

    double eps = 1e-5;
    double max_err = 0.0;
    for (int pi = 0; pi < store.size(); ++pi) {
      Param& p = store.at(pi);
      for (size_t e = 0; e < p.value.data.size(); ++e) {
        double keep = p.value.data[e];
        auto eval = [&](double v) {
          p.value.data[e] = v;
          Tape t2;
          ParamNodes pn(t2, store);
          auto n2 = enc.encode(t2, pn, utt);
          Tape::Id l2 = t2.add(t2.masked_sse(n2.word_vectors, target, mask),
                               t2.masked_sse(n2.utterance_vector, target_u, {1}));
          return t2.scalar(l2);
        };
        double num = (eval(keep + eps) - eval(keep - eps)) / (2 * eps);
        p.value.data[e] = keep;
        max_err = std::max(max_err, testutil::rel_err(p.grad.data[e], num));
      }
    }
    CHECK(max_err < 1e-4);
  }
}

TEST_CASE("empty utterance is rejected") {
  Utterance utt;
  utt.id = "empty";
  ToyEncoder enc(EncoderConfig{4, 3, EncoderContext::kBag}, vocab_of({}));
  ParamStore store;
  enc.register_params(store);
  CHECK_THROWS_AS(enc.encode_values(store, utt), ValidationError);
}

TEST_CASE("adapter seam: toy resolves, external providers raise CapabilityError") {
  Vocabulary vocab = vocab_of({"ax"});
  EncoderConfig config{8, 4, EncoderContext::kRecurrent};
  ToyEncoder enc = load_pretrained_adapter(AdapterSpec{"toy", "", false, 0.0}, config, vocab);
  CHECK(enc.config().d == 8);
  CHECK_THROWS_AS(
      load_pretrained_adapter(AdapterSpec{"roberta-provider", "zh", false, 0.0}, config, vocab),
      CapabilityError);
}

TEST_CASE("adapter output shape contract is enforced") {
  WordEncoding bad;
  bad.word_vectors = Matrix::zeros(3, 4);
  bad.utterance_vector = Matrix::zeros(1, 2);
  CHECK_THROWS_AS(validate_encoding(bad, 3, 5, 2), ValidationError);
  CHECK_THROWS_AS(validate_encoding(bad, 3, 4, 3), ValidationError);
  validate_encoding(bad, 3, 4, 2);
  bad.word_vectors.data[0] = std::nan("");
  CHECK_THROWS_AS(validate_encoding(bad, 3, 4, 2), ValidationError);
}

TEST_CASE("parameter digests differ across seeds and freeze blocks gradients") {
  ToyEncoder enc(EncoderConfig{4, 3, EncoderContext::kRecurrent}, vocab_of({"ax"}));
  ParamStore store;
  enc.register_params(store);
  store.initialize(1);
  uint64_t d1 = store.values_digest();
  store.initialize(2);
  uint64_t d2 = store.values_digest();
  CHECK(d1 != d2);

  store.freeze_all();
  Utterance utt = utt_of({"ax"});
  Tape tape;
  ParamNodes params(tape, store);
  auto nodes = enc.encode(tape, params, utt);
  std::vector<uint8_t> mask(1, 1);
  Tape::Id loss = tape.masked_sse(nodes.utterance_vector, Matrix::zeros(1, 3), {1});
  tape.backward({{loss, 1.0}});
  for (int i = 0; i < store.size(); ++i)
    for (double g : store.at(i).grad.data) CHECK(g == 0.0);
}

}  // namespace
}  // namespace proso
