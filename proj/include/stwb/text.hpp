// stwb/text.hpp

// Copyright 2026  The STWB Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef STWB_TEXT_HPP_
#define STWB_TEXT_HPP_

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stwb/common.hpp"
#include "stwb/io.hpp"

namespace stwb {

constexpr const char* kPadSym = "<pad>";
constexpr const char* kBosSym = "<bos>";
constexpr const char* kEosSym = "<eos>";
constexpr const char* kUnkSym = "<unk>";
constexpr const char* kBlankSym = "<blank>";
constexpr const char* kUnkMark = "⟨unk⟩";  // ⟨unk⟩ in decoded text
constexpr const char* kSpaceMark = "▁";         // ▁ word marker / space

// Symbol table with fixed reserved slots. Blank exists only on CTC
// vocabularies.
struct Vocabulary {
  std::vector<std::string> symbols;  // reserved markers first
  int pad = 0, bos = 1, eos = 2, unk = 3;
  int blank = -1;  // >= 0 only for CTC vocabularies
  std::map<std::string, int> index;

  int size() const { return static_cast<int>(symbols.size()); }
  bool has_blank() const { return blank >= 0; }

  int id_of(const std::string& sym) const {
    auto it = index.find(sym);
    return it == index.end() ? unk : it->second;
  }
  const std::string& sym_of(int id) const {
    require_data(id >= 0 && id < size(), "symbol id out of range: " + std::to_string(id));
    return symbols[id];
  }
  bool is_reserved(int id) const {
    return id == pad || id == bos || id == eos || id == unk || id == blank;
  }

  void rebuild_index() {
    index.clear();
    for (int i = 0; i < size(); ++i) {
      require_data(index.emplace(symbols[i], i).second,
                   "duplicate symbol '" + symbols[i] + "'");
    }
  }

  static Vocabulary from_symbols(const std::vector<std::string>& units,
                                 bool with_blank) {
    Vocabulary v;
    v.symbols = {kPadSym, kBosSym, kEosSym, kUnkSym};
    if (with_blank) {
      v.blank = 4;
      v.symbols.push_back(kBlankSym);
    }
    for (const auto& u : units) v.symbols.push_back(u);
    v.rebuild_index();
    return v;
  }
};

// Character vocabulary: sorted distinct characters of the corpus plus the
// reserved markers. Whitespace is an ordinary symbol.
inline Vocabulary train_char_vocab(const std::vector<std::string>& texts,
                                   bool with_blank = false) {
  require_data(!texts.empty(), "train_char_vocab: empty corpus");
  std::set<std::string> chars;
  for (const auto& t : texts)
    for (const auto& c : utf8_chars(t)) chars.insert(c);
  require_data(!chars.empty(), "train_char_vocab: corpus has no characters");
  return Vocabulary::from_symbols(
      std::vector<std::string>(chars.begin(), chars.end()), with_blank);
}

inline std::vector<int> encode_chars(const Vocabulary& v, const std::string& text) {
  std::vector<int> ids;
  for (const auto& c : utf8_chars(text)) ids.push_back(v.id_of(c));
  return ids;
}

inline std::string decode_chars(const Vocabulary& v, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) out += (id == v.unk) ? kUnkMark : v.sym_of(id);
  return out;
}

// Byte-pair subword model. Spaces are represented by the ▁ symbol inside the
// merge stream, so merges may produce word-initial "▁x" units and decoding is
// unambiguous.
struct SubwordModel {
  std::vector<std::pair<std::string, std::string>> merges;  // training order
  Vocabulary vocab;
  int target_size = 0;
};

namespace text_detail {

inline std::vector<std::string> to_symbol_stream(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& c : utf8_chars(text)) out.push_back(c == " " ? kSpaceMark : c);
  return out;
}

inline void apply_merge(std::vector<std::string>* stream,
                        const std::pair<std::string, std::string>& m) {
  std::vector<std::string>& s = *stream;
  size_t w = 0;
  for (size_t r = 0; r < s.size(); ++r) {
    if (w > 0 && s[w - 1] == m.first && s[r] == m.second) {
      s[w - 1] += s[r];  // left-to-right, non-overlapping
    } else {
      s[w++] = std::move(s[r]);
    }
  }
  s.resize(w);
}

}  // namespace text_detail

// Greedy frequency BPE: repeatedly merge the most frequent adjacent pair,
// breaking ties by lexicographic pair order, until the vocabulary reaches
// target_size or no pair occurs at least twice.
inline SubwordModel train_bpe(const std::vector<std::string>& texts,
                              int target_size) {
  require_data(!texts.empty(), "train_bpe: empty corpus");
  std::vector<std::vector<std::string>> streams;
  std::set<std::string> base;
  for (const auto& t : texts) {
    streams.push_back(text_detail::to_symbol_stream(t));
    for (const auto& s : streams.back()) base.insert(s);
  }
  const int reserved = 4;
  require_config(target_size > static_cast<int>(base.size()) + reserved,
                 "train_bpe: target_size " + std::to_string(target_size) +
                     " too small for charset of " + std::to_string(base.size()) +
                     " plus " + std::to_string(reserved) + " reserved symbols");

  SubwordModel model;
  model.target_size = target_size;
  std::vector<std::string> units(base.begin(), base.end());
  int vocab_size = reserved + static_cast<int>(units.size());

  while (vocab_size < target_size) {
    std::map<std::pair<std::string, std::string>, int64_t> pair_count;
    for (const auto& s : streams)
      for (size_t i = 0; i + 1 < s.size(); ++i)
        ++pair_count[{s[i], s[i + 1]}];
    std::pair<std::string, std::string> best;
    int64_t best_count = 0;
    for (const auto& [p, c] : pair_count) {
      if (c > best_count) {  // map order is lexicographic; first max wins ties
        best = p;
        best_count = c;
      }
    }
    if (best_count < 2) break;
    model.merges.push_back(best);
    for (auto& s : streams) text_detail::apply_merge(&s, best);
    std::string unit = best.first + best.second;
    if (std::find(units.begin(), units.end(), unit) == units.end()) {
      units.push_back(unit);  // distinct merges can collide on the unit string
      ++vocab_size;
    }
  }
  model.vocab = Vocabulary::from_symbols(units, /*with_blank=*/false);
  return model;
}

// Applies the merge list in training order, then maps units to ids
// (unknown characters become unk).
inline std::vector<int> encode(const SubwordModel& m, const std::string& text) {
  auto stream = text_detail::to_symbol_stream(text);
  for (const auto& merge : m.merges) text_detail::apply_merge(&stream, merge);
  std::vector<int> ids;
  for (const auto& u : stream) ids.push_back(m.vocab.id_of(u));
  return ids;
}

inline std::string decode(const SubwordModel& m, const std::vector<int>& ids) {
  std::string joined;
  for (int id : ids) {
    require_data(id >= 0 && id < m.vocab.size(),
                 "subword id out of range: " + std::to_string(id));
    if (m.vocab.is_reserved(id)) {
      if (id == m.vocab.unk) joined += kUnkMark;
      continue;  // pad/bos/eos vanish in text
    }
    joined += m.vocab.sym_of(id);
  }
  // ▁ back to plain spaces
  std::string out;
  size_t i = 0;
  const std::string mark = kSpaceMark;
  while (i < joined.size()) {
    if (joined.compare(i, mark.size(), mark) == 0) {
      out += ' ';
      i += mark.size();
    } else {
      out += joined[i];
      ++i;
    }
  }
  return out;
}

// --- serialization ---------------------------------------------------------
// Line 1: the vocabulary, space separated (a literal space symbol is escaped
// as <sp>). Following lines: one merge pair per line, in training order.

namespace text_detail {
inline std::string escape_sym(const std::string& s) { return s == " " ? "<sp>" : s; }
inline std::string unescape_sym(const std::string& s) { return s == "<sp>" ? " " : s; }
}  // namespace text_detail

inline std::string serialize_subword(const SubwordModel& m) {
  std::ostringstream os;
  for (int i = 0; i < m.vocab.size(); ++i) {
    if (i) os << ' ';
    os << text_detail::escape_sym(m.vocab.symbols[i]);
  }
  os << '\n';
  for (const auto& [a, b] : m.merges)
    os << text_detail::escape_sym(a) << ' ' << text_detail::escape_sym(b) << '\n';
  return os.str();
}

inline void write_subword(const SubwordModel& m, const std::string& path) {
  write_text_file(path, serialize_subword(m));
}

inline SubwordModel read_subword(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  require_data(static_cast<bool>(std::getline(is, line)), "empty subword file: " + path);
  SubwordModel m;
  Vocabulary v;
  v.symbols.clear();
  for (const auto& tok : split_ws(line))
    v.symbols.push_back(text_detail::unescape_sym(tok));
  require_data(v.symbols.size() >= 4 && v.symbols[0] == kPadSym,
               "bad subword vocabulary line in " + path);
  v.blank = -1;
  for (size_t i = 0; i < v.symbols.size(); ++i)
    if (v.symbols[i] == kBlankSym) v.blank = static_cast<int>(i);
  v.rebuild_index();
  m.vocab = std::move(v);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto toks = split_ws(line);
    require_data(toks.size() == 2, "bad merge line in " + path + ": " + line);
    m.merges.emplace_back(text_detail::unescape_sym(toks[0]),
                          text_detail::unescape_sym(toks[1]));
  }
  m.target_size = m.vocab.size();
  return m;
}

// Character vocabularies reuse the subword container with no merge lines.
inline void write_vocab(const Vocabulary& v, const std::string& path) {
  SubwordModel m;
  m.vocab = v;
  write_subword(m, path);
}

inline Vocabulary read_vocab(const std::string& path) {
  return read_subword(path).vocab;
}

}  // namespace stwb

#endif  // STWB_TEXT_HPP_
