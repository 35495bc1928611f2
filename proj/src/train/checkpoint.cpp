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

#include "proso/train/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "proso/core/digest.hpp"
#include "proso/core/error.hpp"
#include "proso/core/text.hpp"

namespace proso {

namespace {

constexpr const char* kMagic = "PROSO-CKPT v1";

void put_kv(std::ostream& out, const std::string& key, const std::string& value) {
  out << key << ' ' << value << '\n';
}

// Reads the next non-empty line and splits it into key and remainder.
std::pair<std::string, std::string> next_kv(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    std::string_view t = trim(line);
    if (t.empty()) continue;
    size_t sp = t.find(' ');
    if (sp == std::string_view::npos) return {std::string(t), ""};
    return {std::string(t.substr(0, sp)), std::string(trim(t.substr(sp + 1)))};
  }
  throw ParseError("checkpoint: unexpected end of file");
}

std::string expect_kv(std::istream& in, const std::string& key) {
  auto [k, v] = next_kv(in);
  if (k != key) throw ParseError(cat("checkpoint: expected key '", key, "', got '", k, "'"));
  return v;
}

int expect_int(std::istream& in, const std::string& key) {
  return static_cast<int>(parse_int(expect_kv(in, key), "checkpoint " + key));
}

double expect_double(std::istream& in, const std::string& key) {
  return parse_double(expect_kv(in, key), "checkpoint " + key);
}

std::string checkpoint_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(cat("checkpoint: missing ", what));
  return line;
}

}  // namespace

std::uint64_t config_hash(const UmpmConfig& config, const Vocabulary& vocab) {
  Digest d;
  auto num = [&d](long long v) { d.bytes(&v, sizeof(v)); };
  num(config.encoder.d);
  num(config.encoder.r);
  d.str(encoder_context_name(config.encoder.context));
  num(config.n_speakers);
  num(config.n_styles);
  num(config.mlp_hidden);
  num(config.ablate_word ? 1 : 0);
  num(config.ablate_phn ? 1 : 0);
  num(config.ablate_pe ? 1 : 0);
  num(static_cast<long long>(config.phoneme_alphabet.size()));
  for (const std::string& s : config.phoneme_alphabet) {
    d.str(s);
    d.str("\n");
  }
  num(vocab.size());
  for (const std::string& s : vocab.tokens()) {
    d.str(s);
    d.str("\n");
  }
  return d.value();
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  out << kMagic << '\n';
  put_kv(out, "stage", fmt_int(ckpt.stage));
  {
    std::ostringstream os;
    os << std::hex << ckpt.config_hash;
    put_kv(out, "config_hash", os.str());
  }
  put_kv(out, "encoder.d", fmt_int(ckpt.umpm.encoder.d));
  put_kv(out, "encoder.r", fmt_int(ckpt.umpm.encoder.r));
  put_kv(out, "encoder.context", encoder_context_name(ckpt.umpm.encoder.context));
  put_kv(out, "n_speakers", fmt_int(ckpt.umpm.n_speakers));
  put_kv(out, "n_styles", fmt_int(ckpt.umpm.n_styles));
  put_kv(out, "mlp_hidden", fmt_int(ckpt.umpm.mlp_hidden));
  put_kv(out, "ablate_word", ckpt.umpm.ablate_word ? "1" : "0");
  put_kv(out, "ablate_phn", ckpt.umpm.ablate_phn ? "1" : "0");
  put_kv(out, "ablate_pe", ckpt.umpm.ablate_pe ? "1" : "0");
  put_kv(out, "dmpm.n_styles", fmt_int(ckpt.dmpm.n_styles));
  put_kv(out, "dmpm.mlp_hidden", fmt_int(ckpt.dmpm.mlp_hidden));
  put_kv(out, "dmpm.att_hidden", fmt_int(ckpt.dmpm.att_hidden));
  put_kv(out, "norm.pitch_mean", fmt_double(ckpt.pe_norm.pitch_mean));
  put_kv(out, "norm.pitch_std", fmt_double(ckpt.pe_norm.pitch_std));
  put_kv(out, "norm.energy_mean", fmt_double(ckpt.pe_norm.energy_mean));
  put_kv(out, "norm.energy_std", fmt_double(ckpt.pe_norm.energy_std));
  put_kv(out, "vocab", fmt_int(static_cast<long long>(ckpt.vocab_tokens.size())));
  for (const std::string& t : ckpt.vocab_tokens) out << t << '\n';
  put_kv(out, "alphabet", fmt_int(static_cast<long long>(ckpt.umpm.phoneme_alphabet.size())));
  for (const std::string& s : ckpt.umpm.phoneme_alphabet) out << s << '\n';
  put_kv(out, "tensors", fmt_int(static_cast<long long>(ckpt.tensors.size())));
  for (const auto& [name, m] : ckpt.tensors) {
    out << "tensor " << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (int i = 0; i < m.rows; ++i) {
      for (int j = 0; j < m.cols; ++j) {
        if (j) out << ' ';
        out << fmt_double(m.at(i, j));
      }
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw ParseError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  if (checkpoint_line(in, "magic") != kMagic)
    throw ParseError(cat("checkpoint: bad magic, expected '", kMagic, "'"));
  Checkpoint ckpt;
  ckpt.stage = expect_int(in, "stage");
  if (ckpt.stage != 1 && ckpt.stage != 2)
    throw ParseError(cat("checkpoint: stage must be 1 or 2, got ", ckpt.stage));
  {
    std::string hex = expect_kv(in, "config_hash");
    std::istringstream is(hex);
    is >> std::hex >> ckpt.config_hash;
    if (is.fail()) throw ParseError(cat("checkpoint: bad config_hash '", hex, "'"));
  }
  ckpt.umpm.encoder.d = expect_int(in, "encoder.d");
  ckpt.umpm.encoder.r = expect_int(in, "encoder.r");
  ckpt.umpm.encoder.context = encoder_context_from_name(expect_kv(in, "encoder.context"));
  ckpt.umpm.n_speakers = expect_int(in, "n_speakers");
  ckpt.umpm.n_styles = expect_int(in, "n_styles");
  ckpt.umpm.mlp_hidden = expect_int(in, "mlp_hidden");
  ckpt.umpm.ablate_word = expect_int(in, "ablate_word") != 0;
  ckpt.umpm.ablate_phn = expect_int(in, "ablate_phn") != 0;
  ckpt.umpm.ablate_pe = expect_int(in, "ablate_pe") != 0;
  ckpt.dmpm.n_styles = expect_int(in, "dmpm.n_styles");
  ckpt.dmpm.mlp_hidden = expect_int(in, "dmpm.mlp_hidden");
  ckpt.dmpm.att_hidden = expect_int(in, "dmpm.att_hidden");
  ckpt.dmpm.r = ckpt.umpm.encoder.r;
  ckpt.pe_norm.pitch_mean = expect_double(in, "norm.pitch_mean");
  ckpt.pe_norm.pitch_std = expect_double(in, "norm.pitch_std");
  ckpt.pe_norm.energy_mean = expect_double(in, "norm.energy_mean");
  ckpt.pe_norm.energy_std = expect_double(in, "norm.energy_std");
  int n_vocab = expect_int(in, "vocab");
  for (int i = 0; i < n_vocab; ++i)
    ckpt.vocab_tokens.push_back(checkpoint_line(in, "vocab token"));
  int n_alpha = expect_int(in, "alphabet");
  for (int i = 0; i < n_alpha; ++i)
    ckpt.umpm.phoneme_alphabet.push_back(checkpoint_line(in, "alphabet symbol"));
  int n_tensors = expect_int(in, "tensors");
  for (int t = 0; t < n_tensors; ++t) {
    std::vector<std::string> head = split_ws(checkpoint_line(in, "tensor header"));
    if (head.size() != 4 || head[0] != "tensor")
      throw ParseError("checkpoint: malformed tensor header");
    int rows = static_cast<int>(parse_int(head[2], "tensor rows"));
    int cols = static_cast<int>(parse_int(head[3], "tensor cols"));
    if (rows < 0 || cols < 0) throw ParseError("checkpoint: negative tensor shape");
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      std::vector<std::string> vals = split_ws(checkpoint_line(in, "tensor row"));
      if (static_cast<int>(vals.size()) != cols)
        throw ParseError(cat("checkpoint: tensor '", head[1], "' row ", i, " has ", vals.size(),
                             " values, expected ", cols));
      for (int j = 0; j < cols; ++j) m.at(i, j) = parse_double(vals[j], "tensor value");
    }
    ckpt.tensors.emplace_back(head[1], std::move(m));
  }
  if (next_kv(in).first != "end") throw ParseError("checkpoint: missing end marker");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream os;
  write_checkpoint(ckpt, os);
  write_file(path, os.str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::istringstream is(read_file(path));
  return read_checkpoint(is);
}

Checkpoint snapshot_checkpoint(int stage, const UmpmConfig& umpm, const DmpmConfig& dmpm,
                               const Vocabulary& vocab, const PeNorm& pe_norm,
                               const ParamStore& store) {
  Checkpoint ckpt;
  ckpt.stage = stage;
  ckpt.umpm = umpm;
  ckpt.dmpm = dmpm;
  ckpt.vocab_tokens = vocab.tokens();
  ckpt.pe_norm = pe_norm;
  ckpt.config_hash = config_hash(umpm, vocab);
  for (int i = 0; i < store.size(); ++i)
    ckpt.tensors.emplace_back(store.at(i).name, store.at(i).value);
  return ckpt;
}

void restore_params(const Checkpoint& ckpt, ParamStore& store) {
  for (const auto& [name, m] : ckpt.tensors) {
    int idx = store.index_of(name);
    if (idx < 0) throw ValidationError(cat("checkpoint tensor '", name, "' not in model"));
    Param& p = store.at(idx);
    if (p.value.rows != m.rows || p.value.cols != m.cols)
      throw ValidationError(cat("checkpoint tensor '", name, "' is ", m.rows, "x", m.cols,
                                ", model expects ", p.value.rows, "x", p.value.cols));
    p.value = m;
  }
}

Vocabulary vocab_from(const Checkpoint& ckpt) {
  Vocabulary vocab;
  for (const std::string& t : ckpt.vocab_tokens) vocab.add(t);
  return vocab;
}

}  // namespace proso
