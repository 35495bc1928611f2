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

#include <istream>
#include <ostream>

#include "proso/core/error.hpp"

namespace proso {

Vocabulary::Vocabulary() { add(kUnkToken); }

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_[token] = id;
  return id;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

Vocabulary Vocabulary::build(const std::vector<Discourse>& discourses) {
  Vocabulary vocab;
  for (const Discourse& d : discourses)
    for (const Utterance& utt : d.utterances)
      for (const WordToken& w : utt.words)
        if (w.kind != WordKind::kSeparator) vocab.add(w.surface);
  return vocab;
}

Vocabulary Vocabulary::read(std::istream& in) {
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.index_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (vocab.index_.count(line))
      throw ParseError(cat("vocabulary: duplicate token '", line, "'"));
    vocab.index_[line] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(line);
  }
  if (vocab.tokens_.empty() || vocab.tokens_[0] != kUnkToken)
    throw ParseError(cat("vocabulary: first token must be ", kUnkToken));
  return vocab;
}

void Vocabulary::write(std::ostream& out) const {
  for (const std::string& t : tokens_) out << t << "\n";
}

std::string encoder_context_name(EncoderContext c) {
  return c == EncoderContext::kBag ? "bag" : "recurrent";
}

EncoderContext encoder_context_from_name(const std::string& name) {
  if (name == "bag") return EncoderContext::kBag;
  if (name == "recurrent") return EncoderContext::kRecurrent;
  throw ParseError(cat("unknown encoder context '", name, "'"));
}

void validate_encoding(const WordEncoding& enc, int n_tokens, int d, int r) {
  require_shape(enc.word_vectors, n_tokens, d, "encoder word_vectors");
  require_shape(enc.utterance_vector, 1, r, "encoder utterance_vector");
  if (!enc.word_vectors.all_finite() || !enc.utterance_vector.all_finite())
    throw ValidationError("encoder output contains non-finite values");
}

ToyEncoder::ToyEncoder(EncoderConfig config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
  if (config_.d <= 0 || config_.r <= 0)
    throw ValidationError(cat("encoder dims must be positive, got d=", config_.d, " r=", config_.r));
  if (config_.context == EncoderContext::kRecurrent && config_.d % 2 != 0)
    throw ValidationError(cat("recurrent encoder needs even d, got ", config_.d));
}

void ToyEncoder::register_params(ParamStore& store) const {
  store.add("enc.embed", vocab_.size(), config_.d, ParamGroup::kEncoder);
  if (config_.context == EncoderContext::kRecurrent) {
    int h = config_.d / 2;
    for (const char* dir : {"fwd", "bwd"}) {
      store.add(cat("enc.", dir, ".wx"), config_.d, 4 * h, ParamGroup::kEncoder);
      store.add(cat("enc.", dir, ".wh"), h, 4 * h, ParamGroup::kEncoder,
                InitKind::kOrthogonalGates);
      store.add(cat("enc.", dir, ".b"), 1, 4 * h, ParamGroup::kEncoder, InitKind::kZero);
    }
  }
  store.add("enc.proj", config_.d, config_.r, ParamGroup::kEncoder);
  store.add("enc.proj_b", 1, config_.r, ParamGroup::kEncoder, InitKind::kZero);
}

std::vector<int> ToyEncoder::token_ids(const Utterance& utt) const {
  std::vector<int> ids;
  for (const WordToken& w : utt.words)
    if (w.kind != WordKind::kSeparator) ids.push_back(vocab_.id_of(w.surface));
  return ids;
}

ToyEncoder::Nodes ToyEncoder::encode(Tape& tape, ParamNodes& params, const Utterance& utt) const {
  std::vector<int> ids = token_ids(utt);
  if (ids.empty())
    throw ValidationError(cat(utt.id, ": utterance has no encoder tokens"));
  int n = static_cast<int>(ids.size());

  Tape::Id embedded = tape.gather_rows(params.id("enc.embed"), ids);

  Nodes nodes;
  nodes.n_tokens = n;
  Tape::Id summary;  // 1 x d
  if (config_.context == EncoderContext::kRecurrent) {
    Tape::Id fwd = tape.lstm_seq(embedded, params.id("enc.fwd.wx"), params.id("enc.fwd.wh"),
                                 params.id("enc.fwd.b"), false);
    Tape::Id bwd = tape.lstm_seq(embedded, params.id("enc.bwd.wx"), params.id("enc.bwd.wh"),
                                 params.id("enc.bwd.b"), true);
    nodes.word_vectors = tape.concat_cols({fwd, bwd});
    summary = tape.concat_cols({tape.slice_rows(fwd, n - 1, n), tape.slice_rows(bwd, 0, 1)});
  } else {
    nodes.word_vectors = embedded;
    summary = tape.mean_rows(embedded);
  }
  nodes.utterance_vector =
      tape.add(tape.matmul(summary, params.id("enc.proj")), params.id("enc.proj_b"));
  return nodes;
}

WordEncoding ToyEncoder::encode_values(ParamStore& store, const Utterance& utt) const {
  Tape tape;
  ParamNodes params(tape, store);
  Nodes nodes = encode(tape, params, utt);
  WordEncoding enc;
  enc.word_vectors = tape.value(nodes.word_vectors);
  enc.utterance_vector = tape.value(nodes.utterance_vector);
  validate_encoding(enc, nodes.n_tokens, config_.d, config_.r);
  return enc;
}

ToyEncoder load_pretrained_adapter(const AdapterSpec& spec, const EncoderConfig& config,
                                   const Vocabulary& vocab) {
  if (spec.provider.empty() || spec.provider == "toy") return ToyEncoder(config, vocab);
  throw CapabilityError(cat("encoder provider '", spec.provider,
                            "' is not available in this build; only 'toy' ships. "
                            "The pipeline runs fully on the toy encoder."));
}

}  // namespace proso
