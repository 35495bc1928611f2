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

#ifndef PROSO_ENCODER_ENCODER_HPP_
#define PROSO_ENCODER_ENCODER_HPP_

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "proso/core/matrix.hpp"
#include "proso/corpus/types.hpp"
#include "proso/model/params.hpp"

namespace proso {

inline constexpr const char* kUnkToken = "<unk>";

// Token ids for word surfaces; id 0 is always the UNK token.
class Vocabulary {
 public:
  Vocabulary();

  int add(const std::string& token);  // returns id, existing or new
  int id_of(const std::string& token) const;  // UNK id when absent
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_[id]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Lexical and punctuation surfaces of every utterance, first-seen order.
  static Vocabulary build(const std::vector<Discourse>& discourses);

  static Vocabulary read(std::istream& in);   // one token per line, id = line
  void write(std::ostream& out) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class EncoderContext { kBag, kRecurrent };

std::string encoder_context_name(EncoderContext c);
EncoderContext encoder_context_from_name(const std::string& name);

struct EncoderConfig {
  int d = 32;  // word embedding width (even: the recurrent halves are d/2)
  int r = 32;  // utterance vector width
  EncoderContext context = EncoderContext::kRecurrent;
};

// Value-level encoding result, the contract shared by the toy encoder and
// any external adapter.
struct WordEncoding {
  Matrix word_vectors;      // n_tokens x d
  Matrix utterance_vector;  // 1 x r
};

void validate_encoding(const WordEncoding& enc, int n_tokens, int d, int r);

// Small trainable encoder: embedding table plus an optional bidirectional
// recurrent context layer, with a linear projection to the utterance vector.
class ToyEncoder {
 public:
  ToyEncoder(EncoderConfig config, Vocabulary vocab);

  void register_params(ParamStore& store) const;

  const EncoderConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }

  // Encoder input tokens: lexical and punctuation words. Separators are not
  // encoder tokens; length regulation copies the preceding word's vector.
  std::vector<int> token_ids(const Utterance& utt) const;

  struct Nodes {
    Tape::Id word_vectors = -1;      // n_tokens x d
    Tape::Id utterance_vector = -1;  // 1 x r
    int n_tokens = 0;
  };
  Nodes encode(Tape& tape, ParamNodes& params, const Utterance& utt) const;

  // Convenience value-level evaluation on a throwaway tape.
  WordEncoding encode_values(ParamStore& store, const Utterance& utt) const;

 private:
  EncoderConfig config_;
  Vocabulary vocab_;
};

// Adapter seam for an external pretrained encoder. The table names a
// provider and model id; no provider ships with this project, so resolving
// any provider other than "toy" raises CapabilityError. The toy path keeps
// the whole pipeline runnable.
struct AdapterSpec {
  std::string provider;  // "toy" or an external provider name
  std::string model_id;
  bool trainable = false;
  double lr_override = 0.0;  // 0 = no override
};

ToyEncoder load_pretrained_adapter(const AdapterSpec& spec, const EncoderConfig& config,
                                   const Vocabulary& vocab);

}  // namespace proso

#endif  // PROSO_ENCODER_ENCODER_HPP_
