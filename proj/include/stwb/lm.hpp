// stwb/lm.hpp

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

#ifndef STWB_LM_HPP_
#define STWB_LM_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stwb/common.hpp"
#include "stwb/text.hpp"

namespace stwb {

// Interpolated Kneser-Ney n-gram model with one fixed discount.
//
//   P_k(w|c) = max(n_k(c,w) - d, 0) / n_k(c)  +  d * T_k(c) / n_k(c) * P_{k-1}(w|c')
//
// where the highest order uses raw counts and lower orders use continuation
// counts (number of distinct one-longer contexts), T_k(c) is the number of
// distinct continuations of c, and the unigram interpolates with a uniform
// base over the predictable vocabulary (everything except pad and bos).
// Contexts never seen at some order pass straight through to the next lower
// order, so every conditional distribution sums to one exactly.
class NGramLM {
 public:
  struct Row {
    std::map<int, int64_t> cnt;
    int64_t total = 0;
    int types = 0;
  };
  using Table = std::map<std::vector<int>, Row>;

  int order = 0;
  double discount = 0.75;
  Vocabulary vocab;
  std::vector<Table> tables;  // tables[k]: contexts of length k

  int pred_vocab() const { return vocab.size() - 2; }  // minus pad, bos

  // P(w | ctx); ctx is truncated to the last order-1 ids.
  double prob(const std::vector<int>& context, int token) const {
    const size_t max_ctx = static_cast<size_t>(order - 1);
    size_t start = context.size() > max_ctx ? context.size() - max_ctx : 0;
    return prob_rec(context, start, token);
  }

  double log_prob(const std::vector<int>& context, int token) const {
    return std::log(prob(context, token));
  }

  std::vector<int> to_ids(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
    return ids;
  }

  // Sum of log P over the tokens plus the closing eos, with bos padding.
  double score_ids(const std::vector<int>& ids) const {
    std::vector<int> hist(static_cast<size_t>(order - 1), vocab.bos);
    double total = 0.0;
    auto step = [&](int id) {
      total += log_prob(hist, id);
      hist.push_back(id);
    };
    for (int id : ids) step(id);
    step(vocab.eos);
    return total;
  }

  double score_tokens(const std::vector<std::string>& tokens) const {
    return score_ids(to_ids(tokens));
  }

  // Uniform model: no counts, every query falls through to 1/|Vpred|.
  static NGramLM uniform(const Vocabulary& v, int order) {
    NGramLM lm;
    lm.order = order;
    lm.vocab = v;
    lm.tables.resize(order);
    return lm;
  }

 private:
  double prob_rec(const std::vector<int>& context, size_t start, int token) const {
    const size_t k = context.size() - start;  // current context length
    const Table& table = tables[k];
    auto it = table.find(std::vector<int>(context.begin() + start, context.end()));
    double lower =
        k == 0 ? 1.0 / pred_vocab() : prob_rec(context, start + 1, token);
    if (it == table.end() || it->second.total == 0) return lower;
    const Row& row = it->second;
    auto ct = row.cnt.find(token);
    double num = 0.0;
    if (ct != row.cnt.end())
      num = std::max(static_cast<double>(ct->second) - discount, 0.0);
    double denom = static_cast<double>(row.total);
    double lambda = discount * row.types / denom;
    return num / denom + lambda * lower;
  }
};

// Trains an order-n interpolated KN model. Sentences are padded with order-1
// bos tokens and terminated with eos; eos is a predicted token.
inline NGramLM train_ngram(const std::vector<std::vector<std::string>>& sequences,
                           int order, double discount = 0.75) {
  require_config(order >= 1, "train_ngram: order must be >= 1");
  require_config(discount > 0.0 && discount < 1.0,
                 "train_ngram: discount must be in (0, 1)");
  require_data(!sequences.empty(), "train_ngram: empty corpus");

  std::set<std::string> toks;
  for (const auto& s : sequences)
    for (const auto& t : s) toks.insert(t);
  NGramLM lm;
  lm.order = order;
  lm.discount = discount;
  lm.vocab = Vocabulary::from_symbols(
      std::vector<std::string>(toks.begin(), toks.end()), /*with_blank=*/false);

  // Raw counts at every order.
  std::vector<NGramLM::Table> raw(order);
  for (const auto& s : sequences) {
    std::vector<int> seq(static_cast<size_t>(order - 1), lm.vocab.bos);
    for (const auto& t : s) seq.push_back(lm.vocab.id_of(t));
    seq.push_back(lm.vocab.eos);
    for (size_t i = static_cast<size_t>(order - 1); i < seq.size(); ++i) {
      for (int k = 0; k < order; ++k) {
        std::vector<int> ctx(seq.begin() + (i - k), seq.begin() + i);
        ++raw[k][ctx].cnt[seq[i]];
      }
    }
  }

  // Highest order keeps raw counts; each lower order uses continuation
  // counts (distinct one-token-longer contexts).
  lm.tables.resize(order);
  lm.tables[order - 1] = raw[order - 1];
  for (int k = order - 2; k >= 0; --k) {
    for (const auto& [ctx, row] : raw[k + 1]) {
      std::vector<int> shorter(ctx.begin() + 1, ctx.end());
      for (const auto& [w, c] : row.cnt) {
        (void)c;
        ++lm.tables[k][shorter].cnt[w];
      }
    }
  }
  for (auto& table : lm.tables) {
    for (auto& [ctx, row] : table) {
      (void)ctx;
      row.total = 0;
      for (const auto& [w, c] : row.cnt) {
        (void)w;
        row.total += c;
      }
      row.types = static_cast<int>(row.cnt.size());
    }
  }
  return lm;
}

// exp(-mean log P) over all tokens including eos.
inline double perplexity(const NGramLM& lm,
                         const std::vector<std::vector<std::string>>& sequences) {
  require_data(!sequences.empty(), "perplexity: empty corpus");
  double total = 0.0;
  int64_t count = 0;
  for (const auto& s : sequences) {
    total += lm.score_tokens(s);
    count += static_cast<int64_t>(s.size()) + 1;
  }
  return std::exp(-total / static_cast<double>(count));
}

// --- n-best rescoring --------------------------------------------------
// combined = model_score + lm_weight * lm_score; ties keep input order.

struct RescoredHyp {
  size_t input_index = 0;
  double model_score = 0.0;
  double lm_score = 0.0;
  double combined = 0.0;
  std::string text;
};

inline std::vector<RescoredHyp> rescore_with_scores(
    const std::vector<std::pair<double, double>>& model_and_lm_scores,
    double lm_weight) {
  require_data(!model_and_lm_scores.empty(), "rescore: empty n-best list");
  std::vector<RescoredHyp> out;
  for (size_t i = 0; i < model_and_lm_scores.size(); ++i) {
    RescoredHyp h;
    h.input_index = i;
    h.model_score = model_and_lm_scores[i].first;
    h.lm_score = model_and_lm_scores[i].second;
    h.combined = h.model_score + lm_weight * h.lm_score;
    out.push_back(h);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RescoredHyp& a, const RescoredHyp& b) {
                     return a.combined > b.combined;
                   });
  return out;
}

enum class LmTokenize { kChars, kWords };

inline std::vector<std::string> lm_tokenize(const std::string& text,
                                            LmTokenize mode) {
  if (mode == LmTokenize::kWords) return split_ws(text);
  std::vector<std::string> out;
  for (const auto& c : utf8_chars(text)) out.push_back(c);
  return out;
}

inline std::vector<RescoredHyp> rescore_nbest(
    const NGramLM& lm, const std::vector<std::pair<double, std::string>>& nbest,
    double lm_weight, LmTokenize mode = LmTokenize::kChars) {
  require_data(!nbest.empty(), "rescore_nbest: empty n-best list");
  std::vector<std::pair<double, double>> scores;
  std::vector<std::string> texts;
  for (const auto& [ms, text] : nbest) {
    scores.emplace_back(ms, lm.score_tokens(lm_tokenize(text, mode)));
    texts.push_back(text);
  }
  auto out = rescore_with_scores(scores, lm_weight);
  for (auto& h : out) h.text = texts[h.input_index];
  return out;
}

// --- ARPA interchange ----------------------------------------------------
// Entries carry the fully interpolated probability (log10); backoff weights
// are the interpolation weights, so a standard backoff walk over the file
// reproduces the model's probabilities exactly. Context-only n-grams (such
// as bos runs) are emitted with logp -99 to carry their backoff weight.

namespace lm_detail {

inline double context_log10_backoff(const NGramLM& lm, const std::vector<int>& ctx) {
  if (static_cast<int>(ctx.size()) >= lm.order) return 0.0;
  const auto& table = lm.tables[ctx.size()];
  auto it = table.find(ctx);
  if (it == table.end() || it->second.total == 0) return 0.0;  // pass-through
  double lambda =
      lm.discount * it->second.types / static_cast<double>(it->second.total);
  return std::log10(lambda);
}

}  // namespace lm_detail

inline std::string write_arpa_string(const NGramLM& lm) {
  // n-grams per order: predictions (ctx + w) plus any higher-order contexts
  // that would otherwise be missing.
  std::vector<std::set<std::vector<int>>> grams(lm.order);
  for (int k = 0; k < lm.order; ++k) {
    for (const auto& [ctx, row] : lm.tables[k]) {
      for (const auto& [w, c] : row.cnt) {
        (void)c;
        std::vector<int> g = ctx;
        g.push_back(w);
        grams[k].insert(std::move(g));
      }
      if (k >= 1) grams[k - 1].insert(ctx);  // context-only entry
    }
  }
  // Unigram section covers every predictable symbol plus bos (context-only).
  for (int id = 0; id < lm.vocab.size(); ++id)
    if (id != lm.vocab.pad) grams[0].insert({id});

  std::ostringstream os;
  os << "\\data\\\n";
  for (int k = 0; k < lm.order; ++k)
    os << "ngram " << (k + 1) << "=" << grams[k].size() << "\n";
  for (int k = 0; k < lm.order; ++k) {
    os << "\n\\" << (k + 1) << "-grams:\n";
    for (const auto& g : grams[k]) {
      std::vector<int> ctx(g.begin(), g.end() - 1);
      int w = g.back();
      double lp;
      if (w == lm.vocab.bos || w == lm.vocab.pad) {
        lp = -99.0;  // context-only
      } else {
        lp = std::log10(lm.prob(ctx, w));
      }
      os << fmt_double(lp, 7);
      for (int id : g) os << "\t" << lm.vocab.sym_of(id);
      if (k + 1 < lm.order)
        os << "\t" << fmt_double(lm_detail::context_log10_backoff(lm, g), 7);
      os << "\n";
    }
  }
  os << "\n\\end\\\n";
  return os.str();
}

inline void write_arpa(const NGramLM& lm, const std::string& path) {
  write_text_file(path, write_arpa_string(lm));
}

// Backoff scorer over a parsed ARPA file; the independent read-side of the
// interchange format.
class ArpaModel {
 public:
  int order = 0;

  static ArpaModel parse(const std::string& text) {
    ArpaModel m;
    std::istringstream is(text);
    std::string line;
    int cur_order = 0;
    bool in_data = false;
    while (std::getline(is, line)) {
      line = trim(line);
      if (line.empty()) continue;
      if (line == "\\data\\") {
        in_data = true;
        continue;
      }
      if (line == "\\end\\") break;
      if (line.size() > 2 && line.front() == '\\' && line.back() == ':') {
        cur_order = static_cast<int>(parse_int(
            line.substr(1, line.find('-') - 1), "ARPA section order"));
        m.order = std::max(m.order, cur_order);
        continue;
      }
      if (in_data && line.rfind("ngram", 0) == 0) continue;
      if (cur_order == 0) continue;
      auto f = split(line, '\t');
      require_data(static_cast<int>(f.size()) >= 1 + cur_order,
                   "bad ARPA line: " + line);
      Entry e;
      e.logp = parse_double(f[0], "ARPA logp");
      std::vector<std::string> g(f.begin() + 1, f.begin() + 1 + cur_order);
      if (static_cast<int>(f.size()) > 1 + cur_order)
        e.log_backoff = parse_double(f[1 + cur_order], "ARPA backoff");
      m.entries_[g] = e;
    }
    require_data(m.order >= 1, "ARPA parse found no n-gram sections");
    return m;
  }

  // log10 P(w | ctx) by the standard backoff walk.
  double log10_prob(std::vector<std::string> ctx, const std::string& w) const {
    if (static_cast<int>(ctx.size()) > order - 1)
      ctx.erase(ctx.begin(),
                ctx.end() - (order - 1));
    return walk(ctx, w);
  }

 private:
  struct Entry {
    double logp = 0.0;
    double log_backoff = 0.0;
  };
  std::map<std::vector<std::string>, Entry> entries_;

  double walk(const std::vector<std::string>& ctx, const std::string& w) const {
    std::vector<std::string> g = ctx;
    g.push_back(w);
    auto it = entries_.find(g);
    if (it != entries_.end() && it->second.logp > -98.0) return it->second.logp;
    require_data(!ctx.empty(), "ARPA walk fell off the unigram floor for " + w);
    double alpha = 0.0;
    auto ct = entries_.find(ctx);
    if (ct != entries_.end()) alpha = ct->second.log_backoff;
    return alpha + walk(std::vector<std::string>(ctx.begin() + 1, ctx.end()), w);
  }
};

}  // namespace stwb

#endif  // STWB_LM_HPP_
