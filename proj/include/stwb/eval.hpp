// stwb/eval.hpp

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

#ifndef STWB_EVAL_HPP_
#define STWB_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stwb/common.hpp"

namespace stwb {

struct ScoreReport {
  std::string metric;                 // "wer", "per", "bleu"
  double corpus_value = 0.0;
  std::vector<std::string> utt_ids;   // may be empty (then indices are used)
  std::vector<double> utt_values;
  double utt_mean = 0.0;
  double utt_stddev = 0.0;            // population standard deviation
  // Raw counts the corpus value is recomputable from.
  std::map<std::string, double> counts;
};

enum class ErrorUnit { kWord, kPhone };

// Word unit: whitespace tokens. Phone unit: characters with whitespace
// removed (word boundaries do not count as phones).
inline std::vector<std::string> error_tokens(const std::string& text,
                                             ErrorUnit unit) {
  if (unit == ErrorUnit::kWord) return split_ws(text);
  std::vector<std::string> out;
  for (const auto& c : utf8_chars(text))
    if (c != " " && c != "\t") out.push_back(c);
  return out;
}

// Unit-cost Levenshtein distance (substitution = deletion = insertion = 1).
inline int64_t edit_distance(const std::vector<std::string>& a,
                             const std::vector<std::string>& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Corpus error rate: total edits / total reference tokens, with the
// per-utterance rates, their mean, and their standard deviation alongside.
inline ScoreReport wer(const std::vector<std::string>& refs,
                       const std::vector<std::string>& hyps,
                       ErrorUnit unit = ErrorUnit::kWord,
                       const std::vector<std::string>& utt_ids = {}) {
  require_data(!refs.empty(), "wer: empty reference corpus");
  require_data(refs.size() == hyps.size(), "wer: refs/hyps size mismatch");
  ScoreReport r;
  r.metric = unit == ErrorUnit::kWord ? "wer" : "per";
  r.utt_ids = utt_ids;
  int64_t edits = 0, ref_tokens = 0;
  for (size_t i = 0; i < refs.size(); ++i) {
    auto ra = error_tokens(refs[i], unit);
    auto ha = error_tokens(hyps[i], unit);
    require_data(!ra.empty(), "wer: empty reference at index " + std::to_string(i));
    int64_t e = edit_distance(ra, ha);
    edits += e;
    ref_tokens += static_cast<int64_t>(ra.size());
    r.utt_values.push_back(static_cast<double>(e) / ra.size());
  }
  r.counts["edits"] = static_cast<double>(edits);
  r.counts["ref_tokens"] = static_cast<double>(ref_tokens);
  r.corpus_value = static_cast<double>(edits) / static_cast<double>(ref_tokens);
  double mean = 0.0;
  for (double v : r.utt_values) mean += v;
  mean /= r.utt_values.size();
  double var = 0.0;
  for (double v : r.utt_values) var += (v - mean) * (v - mean);
  var /= r.utt_values.size();
  r.utt_mean = mean;
  r.utt_stddev = std::sqrt(var);
  return r;
}

namespace eval_detail {

inline std::map<std::vector<std::string>, int64_t> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, int64_t> out;
  if (static_cast<int>(tokens.size()) < n) return out;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

struct BleuCounts {
  int64_t match[4] = {0, 0, 0, 0};
  int64_t total[4] = {0, 0, 0, 0};
  int64_t hyp_len = 0;
  int64_t ref_len = 0;
};

inline void accumulate_bleu(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp, int max_n,
                            BleuCounts* c) {
  c->hyp_len += static_cast<int64_t>(hyp.size());
  c->ref_len += static_cast<int64_t>(ref.size());
  for (int n = 1; n <= max_n; ++n) {
    auto rc = ngram_counts(ref, n);
    auto hc = ngram_counts(hyp, n);
    for (const auto& [g, cnt] : hc) {
      c->total[n - 1] += cnt;
      auto it = rc.find(g);
      if (it != rc.end()) c->match[n - 1] += std::min(cnt, it->second);
    }
  }
}

// Geometric mean of clipped precisions times the brevity penalty, on a 0-100
// scale. Orders >= 2 with zero matches get add-one smoothing on both sides;
// everything else is unsmoothed.
inline double bleu_from_counts(const BleuCounts& c, int max_n) {
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    double match = static_cast<double>(c.match[n - 1]);
    double total = static_cast<double>(c.total[n - 1]);
    double p;
    if (n >= 2 && match == 0.0) {
      p = (match + 1.0) / (total + 1.0);
    } else if (total == 0.0 || match == 0.0) {
      return 0.0;  // unigram precision zero (or empty hypothesis corpus)
    } else {
      p = match / total;
    }
    log_sum += std::log(p);
  }
  double bp = 1.0;
  if (c.hyp_len < c.ref_len && c.hyp_len > 0)
    bp = std::exp(1.0 - static_cast<double>(c.ref_len) /
                            static_cast<double>(c.hyp_len));
  if (c.hyp_len == 0) return 0.0;
  return 100.0 * bp * std::exp(log_sum / max_n);
}

}  // namespace eval_detail

// Corpus BLEU over whitespace tokens, single reference per hypothesis.
// Per-utterance values use the same formula applied to one sentence.
inline ScoreReport bleu(const std::vector<std::string>& refs,
                        const std::vector<std::string>& hyps, int max_n = 4,
                        const std::vector<std::string>& utt_ids = {}) {
  require_data(!refs.empty(), "bleu: empty corpus");
  require_data(refs.size() == hyps.size(), "bleu: refs/hyps size mismatch");
  require_data(max_n >= 1 && max_n <= 4, "bleu: max_n must be in 1..4");
  ScoreReport r;
  r.metric = "bleu";
  r.utt_ids = utt_ids;
  eval_detail::BleuCounts corpus;
  for (size_t i = 0; i < refs.size(); ++i) {
    auto rt = split_ws(refs[i]);
    auto ht = split_ws(hyps[i]);
    eval_detail::BleuCounts one;
    eval_detail::accumulate_bleu(rt, ht, max_n, &one);
    eval_detail::accumulate_bleu(rt, ht, max_n, &corpus);
    r.utt_values.push_back(eval_detail::bleu_from_counts(one, max_n));
  }
  for (int n = 1; n <= max_n; ++n) {
    r.counts["match" + std::to_string(n)] = static_cast<double>(corpus.match[n - 1]);
    r.counts["total" + std::to_string(n)] = static_cast<double>(corpus.total[n - 1]);
  }
  r.counts["hyp_len"] = static_cast<double>(corpus.hyp_len);
  r.counts["ref_len"] = static_cast<double>(corpus.ref_len);
  r.corpus_value = eval_detail::bleu_from_counts(corpus, max_n);
  double mean = 0.0;
  for (double v : r.utt_values) mean += v;
  mean /= r.utt_values.size();
  double var = 0.0;
  for (double v : r.utt_values) var += (v - mean) * (v - mean);
  var /= r.utt_values.size();
  r.utt_mean = mean;
  r.utt_stddev = std::sqrt(var);
  return r;
}

// Report file: metric header, `utt_id value` lines, then
// `corpus <value> <mean> <sd>`.
inline std::string serialize_report(const ScoreReport& r) {
  std::ostringstream os;
  os << r.metric << "\n";
  for (size_t i = 0; i < r.utt_values.size(); ++i) {
    os << (i < r.utt_ids.size() ? r.utt_ids[i] : "utt" + std::to_string(i))
       << " " << fmt_double(r.utt_values[i], 6) << "\n";
  }
  os << "corpus " << fmt_double(r.corpus_value, 6) << " "
     << fmt_double(r.utt_mean, 6) << " " << fmt_double(r.utt_stddev, 6) << "\n";
  return os.str();
}

}  // namespace stwb

#endif  // STWB_EVAL_HPP_
