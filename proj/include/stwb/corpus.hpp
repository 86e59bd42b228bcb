// stwb/corpus.hpp

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

#ifndef STWB_CORPUS_HPP_
#define STWB_CORPUS_HPP_

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stwb/common.hpp"
#include "stwb/io.hpp"
#include "stwb/rng.hpp"
#include "stwb/tensor.hpp"

namespace stwb {

// Synthetic "audio" is canonically a frame stream (T x F band amplitudes at a
// nominal sample rate). A waveform form exists only so speed perturbation has
// something to resample; the sine renderer in frontend.hpp converts between
// the two.
struct Audio {
  enum class Kind { kFrames, kWaveform };
  Kind kind = Kind::kFrames;
  Tensor frames;                 // T x F, kFrames only
  std::vector<double> waveform;  // kWaveform only
  int sample_rate = 8000;        // Hz (nominal for frame streams)

  bool empty() const {
    return kind == Kind::kFrames ? frames.rows() == 0 : waveform.empty();
  }
};

struct Utterance {
  std::string id;
  Audio audio;
  std::string transcript;    // source-language phone characters
  std::string translation;   // target-language words
  std::optional<std::string> pseudo_phones;
};

enum class Split { kTrain, kValid, kTest };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s, const std::string& where) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw DataError(where + ": unknown split '" + s + "'");
}

struct ManifestEntry {
  std::string id;
  std::string audio_ref;  // path relative to the manifest's directory
  std::string transcript;
  std::string translation;
  Split split = Split::kTrain;
  std::optional<std::string> pseudo_phones;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split_view(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(&e);
    return out;
  }
  size_t count(Split s) const { return split_view(s).size(); }

  friend bool operator==(const Manifest& a, const Manifest& b) {
    if (a.entries.size() != b.entries.size()) return false;
    for (size_t i = 0; i < a.entries.size(); ++i) {
      const auto& x = a.entries[i];
      const auto& y = b.entries[i];
      if (x.id != y.id || x.audio_ref != y.audio_ref ||
          x.transcript != y.transcript || x.translation != y.translation ||
          x.split != y.split || x.pseudo_phones != y.pseudo_phones)
        return false;
    }
    return true;
  }
};

// Description of one toy language: which phones exist, what each phone sounds
// like (its prototype frame), how words are pronounced, and how words
// translate. Two languages overlap in phone inventory but are not identical,
// and shared phones share prototype vectors.
struct SyntheticLanguageSpec {
  std::string name;                          // used for utterance id prefixes
  std::vector<std::string> phone_inventory;  // single-character phones
  std::map<std::string, std::vector<double>> prototype_map;  // phone -> F-dim
  int frames_per_phone_min = 2;
  int frames_per_phone_max = 4;
  double noise_std = 0.05;
  std::map<std::string, std::string> lexicon;  // word -> phone sequence
  std::map<std::string, std::vector<std::string>> translation_map;
  int reorder_window = 4;  // 0 disables reordering
  uint64_t seed = 0;
  int sentence_words_min = 2;
  int sentence_words_max = 6;
  int sample_rate = 8000;

  int feat_dim() const {
    return prototype_map.empty()
               ? 0
               : static_cast<int>(prototype_map.begin()->second.size());
  }

  void validate() const {
    require_config(!lexicon.empty(), "corpus: empty lexicon");
    require_config(!prototype_map.empty(), "corpus: empty prototype map");
    require_config(frames_per_phone_min >= 1 &&
                       frames_per_phone_max >= frames_per_phone_min,
                   "corpus: bad frames_per_phone range");
    require_config(noise_std >= 0.0, "corpus: negative noise_std");
    require_config(reorder_window >= 0, "corpus: negative reorder_window");
    for (const auto& [word, phones] : lexicon) {
      require_config(translation_map.count(word) > 0,
                     "corpus: translation_map missing word '" + word + "'");
      for (const std::string& p : utf8_chars(phones))
        require_config(prototype_map.count(p) > 0,
                       "corpus: no prototype for phone '" + p + "'");
    }
    require_config(prototype_map.count(" ") > 0,
                   "corpus: no prototype for the word separator");
  }
};

namespace corpus_detail {

constexpr uint64_t kNoiseStream = 0xA0D10u;
constexpr uint64_t kSentenceStream = 0x5E47u;
constexpr uint64_t kReorderStream = 0x4E0Du;

// A target token is "inverting" if a seeded coin keyed on its spelling says
// so. An inverting token swaps with its successor, at most once per
// reorder_window tokens. Keying on content (not utterance index) keeps the
// translation a pure function of the sentence, so the mapping stays
// learnable.
inline bool is_inverting(uint64_t spec_seed, const std::string& token) {
  Rng r(Rng::mix(Rng::mix(spec_seed, kReorderStream), Rng::hash(token)));
  return r.uniform() < 0.25;
}

inline std::vector<std::string> apply_reorder(
    const SyntheticLanguageSpec& spec, std::vector<std::string> tokens) {
  if (spec.reorder_window <= 0) return tokens;
  int next_allowed = 0;
  for (int i = 0; i + 1 < static_cast<int>(tokens.size()); ++i) {
    if (i < next_allowed) continue;
    if (is_inverting(spec.seed, tokens[i])) {
      std::swap(tokens[i], tokens[i + 1]);
      next_allowed = i + spec.reorder_window;
    }
  }
  return tokens;
}

}  // namespace corpus_detail

// Renders one utterance's frame stream: per transcript character (phones and
// word separators alike), a run of prototype frames plus Gaussian noise.
inline Tensor synthesize_frames(const SyntheticLanguageSpec& spec,
                                const std::string& transcript, Rng* rng) {
  const int F = spec.feat_dim();
  std::vector<std::vector<double>> rows;
  for (const std::string& ch : utf8_chars(transcript)) {
    auto it = spec.prototype_map.find(ch);
    require_data(it != spec.prototype_map.end(),
                 "no prototype for phone '" + ch + "'");
    int n = static_cast<int>(
        rng->uniform_int(spec.frames_per_phone_min, spec.frames_per_phone_max));
    for (int i = 0; i < n; ++i) {
      std::vector<double> row(it->second);
      if (spec.noise_std > 0.0)
        for (double& v : row) v += rng->normal(0.0, spec.noise_std);
      rows.push_back(std::move(row));
    }
  }
  Tensor out(static_cast<int>(rows.size()), F);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < F; ++c) out.at(static_cast<int>(r), c) = rows[r][c];
  return out;
}

// Pure generation: the utterance list depends only on (spec, n_utts).
inline std::vector<Utterance> generate_utterances(
    const SyntheticLanguageSpec& spec, int n_utts) {
  spec.validate();
  require_config(n_utts >= 10, "corpus: n_utts must be >= 10");
  std::vector<std::string> words;
  for (const auto& [w, _] : spec.lexicon) words.push_back(w);
  std::sort(words.begin(), words.end());

  std::vector<Utterance> out;
  out.reserve(n_utts);
  for (int idx = 0; idx < n_utts; ++idx) {
    Rng sentence_rng(
        Rng::mix(Rng::mix(spec.seed, corpus_detail::kSentenceStream), idx));
    int n_words = static_cast<int>(sentence_rng.uniform_int(
        spec.sentence_words_min, spec.sentence_words_max));
    std::vector<std::string> src;
    for (int i = 0; i < n_words; ++i)
      src.push_back(words[sentence_rng.uniform_int(
          0, static_cast<int64_t>(words.size()) - 1)]);

    std::vector<std::string> phones;
    std::vector<std::string> tgt;
    for (const std::string& w : src) {
      phones.push_back(spec.lexicon.at(w));
      for (const std::string& t : spec.translation_map.at(w)) tgt.push_back(t);
    }
    tgt = corpus_detail::apply_reorder(spec, std::move(tgt));

    Utterance u;
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s%05d", spec.name.c_str(), idx);
    u.id = idbuf;
    u.transcript = join(phones, " ");
    u.translation = join(tgt, " ");
    Rng noise_rng(
        Rng::mix(Rng::mix(spec.seed, corpus_detail::kNoiseStream), idx));
    u.audio.kind = Audio::Kind::kFrames;
    u.audio.frames = synthesize_frames(spec, u.transcript, &noise_rng);
    u.audio.sample_rate = spec.sample_rate;
    require_data(!u.audio.empty(), "generated utterance has empty audio: " + u.id);
    out.push_back(std::move(u));
  }
  return out;
}

// Largest-remainder split sizing; ratios must sum to 1.
inline std::vector<size_t> split_sizes(int n, double r_train, double r_valid,
                                       double r_test) {
  require_config(std::fabs(r_train + r_valid + r_test - 1.0) < 1e-9,
                 "corpus: split ratios must sum to 1");
  double ratios[3] = {r_train, r_valid, r_test};
  size_t sizes[3];
  double rem[3];
  size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double exact = ratios[i] * n;
    sizes[i] = static_cast<size_t>(std::floor(exact + 1e-12));
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < static_cast<size_t>(n)) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++sizes[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return {sizes[0], sizes[1], sizes[2]};
}

// Generates a corpus, stores per-utterance frame streams under
// out_dir/audio/, and returns the manifest (audio_refs relative to out_dir).
inline Manifest generate_corpus(const SyntheticLanguageSpec& spec, int n_utts,
                                double r_train, double r_valid, double r_test,
                                const std::string& out_dir) {
  auto sizes = split_sizes(n_utts, r_train, r_valid, r_test);
  auto utts = generate_utterances(spec, n_utts);
  ensure_dir(out_dir + "/audio");
  Manifest m;
  for (size_t i = 0; i < utts.size(); ++i) {
    const Utterance& u = utts[i];
    ManifestEntry e;
    e.id = u.id;
    e.audio_ref = "audio/" + u.id + ".fs";
    e.transcript = u.transcript;
    e.translation = u.translation;
    e.split = i < sizes[0]                ? Split::kTrain
              : i < sizes[0] + sizes[1]   ? Split::kValid
                                          : Split::kTest;
    write_frame_stream(out_dir + "/" + e.audio_ref, u.audio.frames,
                       u.audio.sample_rate);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline std::string serialize_manifest(const Manifest& m) {
  std::ostringstream os;
  for (const auto& e : m.entries) {
    os << e.id << '\t' << e.audio_ref << '\t' << e.transcript << '\t'
       << e.translation << '\t' << split_name(e.split);
    if (e.pseudo_phones) os << '\t' << *e.pseudo_phones;
    os << '\n';
  }
  return os.str();
}

inline void write_manifest(const Manifest& m, const std::string& path) {
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    require_data(!e.id.empty() && !e.audio_ref.empty(), "manifest entry with empty id/audio_ref");
    require_data(!e.translation.empty(), "manifest entry with empty translation: " + e.id);
    require_data(ids.insert(e.id).second, "duplicate utterance id: " + e.id);
    require_data(e.id.find('\t') == std::string::npos &&
                     e.transcript.find('\t') == std::string::npos &&
                     e.translation.find('\t') == std::string::npos,
                 "tab character inside manifest field: " + e.id);
  }
  write_text_file(path, serialize_manifest(m));
}

// One record per line, tab separated. Lines with an empty translation are
// dropped (counted on stderr); anything else malformed is an error naming the
// line number. An empty file is an empty manifest.
inline Manifest read_manifest(const std::string& path) {
  std::string text = read_text_file(path);
  Manifest m;
  std::set<std::string> ids;
  size_t dropped = 0;
  int line_no = 0;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto where = path + ":" + std::to_string(line_no);
    auto fields = split(line, '\t');
    require_data(fields.size() == 5 || fields.size() == 6,
                 where + ": expected 5 or 6 tab-separated fields, got " +
                     std::to_string(fields.size()));
    ManifestEntry e;
    e.id = fields[0];
    e.audio_ref = fields[1];
    e.transcript = fields[2];
    e.translation = fields[3];
    e.split = parse_split(fields[4], where);
    if (fields.size() == 6) e.pseudo_phones = fields[5];
    require_data(!e.id.empty(), where + ": empty id");
    require_data(!e.audio_ref.empty(), where + ": empty audio_ref");
    if (e.translation.empty()) {
      ++dropped;  // untranslated segments carry no supervision here
      continue;
    }
    require_data(ids.insert(e.id).second, where + ": duplicate id '" + e.id + "'");
    m.entries.push_back(std::move(e));
  }
  if (dropped > 0)
    std::cerr << "read_manifest: dropped " << dropped
              << " entr" << (dropped == 1 ? "y" : "ies")
              << " with empty translation from " << path << "\n";
  return m;
}

inline Tensor load_audio_frames(const std::string& manifest_dir,
                                const ManifestEntry& e, int* sample_rate = nullptr) {
  int32_t sr = 0;
  Tensor frames = read_frame_stream(manifest_dir + "/" + e.audio_ref, &sr);
  require_data(frames.all_finite(), "non-finite features in " + e.audio_ref);
  if (sample_rate) *sample_rate = sr;
  return frames;
}

// ---------------------------------------------------------------------------
// Built-in toy languages. Prototypes are keyed on the phone character alone,
// so phones shared between languages sound identical.

inline std::vector<double> phone_prototype(const std::string& phone, int dim) {
  Rng r(Rng::mix(0x9807u, Rng::hash(phone)));
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = r.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x = 2.0 * x / norm;  // fixed energy per phone
  if (phone == " ")
    for (double& x : v) x *= 0.25;  // separators are quiet
  return v;
}

inline SyntheticLanguageSpec toy_language_a(int feat_dim = 12,
                                            uint64_t seed = 7) {
  SyntheticLanguageSpec s;
  s.name = "a";
  s.seed = seed;
  s.phone_inventory = {"a", "b", "d", "e", "g", "i", "k", "o", "s", "t"};
  for (const auto& p : s.phone_inventory)
    s.prototype_map[p] = phone_prototype(p, feat_dim);
  s.prototype_map[" "] = phone_prototype(" ", feat_dim);
  s.lexicon = {
      {"bade", "bade"}, {"gik", "gik"},   {"sota", "sota"}, {"tebi", "tebi"},
      {"kago", "kago"}, {"dise", "dise"}, {"bago", "bago"}, {"keti", "keti"},
      {"soda", "soda"}, {"gita", "gita"}, {"bedo", "bedo"}, {"kasi", "kasi"},
      {"toge", "toge"}, {"dabi", "dabi"}, {"seko", "seko"}, {"ogi", "ogi"},
  };
  s.translation_map = {
      {"bade", {"mu"}},        {"gik", {"re"}},   {"sota", {"ka"}},
      {"tebi", {"lo"}},        {"kago", {"vi"}},  {"dise", {"zu"}},
      {"bago", {"re", "lo"}},  {"keti", {"pol"}}, {"soda", {"nar"}},
      {"gita", {"tiq"}},       {"bedo", {"mu", "ka"}}, {"kasi", {"wex"}},
      {"toge", {"hy"}},        {"dabi", {"fos"}}, {"seko", {"jal"}},
      {"ogi", {"zu", "re"}},
  };
  return s;
}

inline SyntheticLanguageSpec toy_language_b(int feat_dim = 12,
                                            uint64_t seed = 11) {
  SyntheticLanguageSpec s;
  s.name = "b";
  s.seed = seed;
  // Overlaps language A in {a,b,d,e,i,k,o,t}; adds {f,u}, lacks {g,s}.
  s.phone_inventory = {"a", "b", "d", "e", "f", "i", "k", "o", "t", "u"};
  for (const auto& p : s.phone_inventory)
    s.prototype_map[p] = phone_prototype(p, feat_dim);
  s.prototype_map[" "] = phone_prototype(" ", feat_dim);
  s.lexicon = {
      {"fado", "fado"}, {"kibe", "kibe"}, {"tuda", "tuda"}, {"beko", "beko"},
      {"dif", "dif"},   {"ketu", "ketu"}, {"obi", "obi"},   {"fute", "fute"},
      {"adok", "adok"}, {"tibe", "tibe"}, {"kuda", "kuda"}, {"efo", "efo"},
  };
  s.translation_map = {
      {"fado", {"mu"}},  {"kibe", {"ka"}},       {"tuda", {"re"}},
      {"beko", {"lo"}},  {"dif", {"vi"}},        {"ketu", {"zu"}},
      {"obi", {"pol"}},  {"fute", {"nar", "ka"}}, {"adok", {"tiq"}},
      {"tibe", {"hy"}},  {"kuda", {"fos"}},      {"efo", {"jal"}},
  };
  return s;
}

}  // namespace stwb

#endif  // STWB_CORPUS_HPP_
