// stwb/nnet.hpp

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

#ifndef STWB_NNET_HPP_
#define STWB_NNET_HPP_

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stwb/autograd.hpp"
#include "stwb/common.hpp"
#include "stwb/io.hpp"
#include "stwb/rng.hpp"
#include "stwb/tensor.hpp"

namespace stwb {

// Architecture description. Presence flags: a speech encoder exists when
// n_enc_layers > 0, a text encoder when src_vocab > 0, a decoder when
// tgt_vocab > 0, a CTC head when ctc_vocab > 0, and a frame-reconstruction
// head when recon_head is set (masked-frame pretraining).
struct ModelConfig {
  std::string block_type = "transformer";  // "transformer" | "conformer"
  int d_model = 32;
  int n_heads = 2;
  int d_ff = 64;
  int n_enc_layers = 2;
  int n_text_enc_layers = 2;
  int n_dec_layers = 2;
  int feat_dim = 12;
  int src_vocab = 0;
  int tgt_vocab = 0;
  int ctc_vocab = 0;
  int ctc_hidden = 0;
  int conv_kernel = 5;
  int conv_stride = 2;
  int dw_kernel = 3;
  uint64_t seed = 1;

  bool has_speech_encoder() const { return n_enc_layers > 0; }
  bool has_text_encoder() const { return src_vocab > 0; }
  bool has_decoder() const { return tgt_vocab > 0; }
  bool has_ctc() const { return ctc_vocab > 0; }
  bool recon_head = false;

  void validate() const {
    require_config(d_model > 0 && n_heads > 0 && d_ff > 0, "bad model dims");
    require_config(d_model % n_heads == 0,
                   "d_model " + std::to_string(d_model) +
                       " not divisible by n_heads " + std::to_string(n_heads));
    require_config(block_type == "transformer" || block_type == "conformer",
                   "unknown block_type '" + block_type + "'");
    require_config(conv_kernel >= 1 && conv_stride >= 1, "bad subsampler config");
    require_config(has_speech_encoder() || has_text_encoder(),
                   "model needs at least one encoder");
    if (has_ctc() || recon_head)
      require_config(has_speech_encoder(), "ctc/recon heads need a speech encoder");
  }

  std::vector<std::pair<std::string, std::string>> to_kv() const {
    return {
        {"block_type", block_type},
        {"d_model", std::to_string(d_model)},
        {"n_heads", std::to_string(n_heads)},
        {"d_ff", std::to_string(d_ff)},
        {"n_enc_layers", std::to_string(n_enc_layers)},
        {"n_text_enc_layers", std::to_string(n_text_enc_layers)},
        {"n_dec_layers", std::to_string(n_dec_layers)},
        {"feat_dim", std::to_string(feat_dim)},
        {"src_vocab", std::to_string(src_vocab)},
        {"tgt_vocab", std::to_string(tgt_vocab)},
        {"ctc_vocab", std::to_string(ctc_vocab)},
        {"ctc_hidden", std::to_string(ctc_hidden)},
        {"conv_kernel", std::to_string(conv_kernel)},
        {"conv_stride", std::to_string(conv_stride)},
        {"dw_kernel", std::to_string(dw_kernel)},
        {"seed", std::to_string(seed)},
        {"recon_head", recon_head ? "1" : "0"},
    };
  }

  static ModelConfig from_kv(
      const std::vector<std::pair<std::string, std::string>>& kv) {
    ModelConfig c;
    for (const auto& [k, v] : kv) {
      if (k == "block_type") c.block_type = v;
      else if (k == "d_model") c.d_model = static_cast<int>(parse_int(v, k));
      else if (k == "n_heads") c.n_heads = static_cast<int>(parse_int(v, k));
      else if (k == "d_ff") c.d_ff = static_cast<int>(parse_int(v, k));
      else if (k == "n_enc_layers") c.n_enc_layers = static_cast<int>(parse_int(v, k));
      else if (k == "n_text_enc_layers") c.n_text_enc_layers = static_cast<int>(parse_int(v, k));
      else if (k == "n_dec_layers") c.n_dec_layers = static_cast<int>(parse_int(v, k));
      else if (k == "feat_dim") c.feat_dim = static_cast<int>(parse_int(v, k));
      else if (k == "src_vocab") c.src_vocab = static_cast<int>(parse_int(v, k));
      else if (k == "tgt_vocab") c.tgt_vocab = static_cast<int>(parse_int(v, k));
      else if (k == "ctc_vocab") c.ctc_vocab = static_cast<int>(parse_int(v, k));
      else if (k == "ctc_hidden") c.ctc_hidden = static_cast<int>(parse_int(v, k));
      else if (k == "conv_kernel") c.conv_kernel = static_cast<int>(parse_int(v, k));
      else if (k == "conv_stride") c.conv_stride = static_cast<int>(parse_int(v, k));
      else if (k == "dw_kernel") c.dw_kernel = static_cast<int>(parse_int(v, k));
      else if (k == "seed") c.seed = static_cast<uint64_t>(parse_int(v, k));
      else if (k == "recon_head") c.recon_head = (v == "1");
      else throw DataError("unknown checkpoint config key: " + k);
    }
    return c;
  }

  friend bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.to_kv() == b.to_kv();
  }
};

// Named parameter tensors plus the architecture config that reconstructs
// their shapes. `trainable` is the freeze mask; frozen parameters are
// excluded from optimizer updates but unchanged in the forward pass.
struct ModelGraph {
  ModelConfig cfg;
  std::map<std::string, Tensor> params;
  std::map<std::string, bool> trainable;

  const Tensor& p(const std::string& name) const {
    auto it = params.find(name);
    require_data(it != params.end(), "no such parameter: " + name);
    return it->second;
  }
  bool is_trainable(const std::string& name) const {
    auto it = trainable.find(name);
    return it == trainable.end() ? true : it->second;
  }
};

using FreezeMask = std::map<std::string, bool>;

namespace nnet_detail {

inline std::string layer_name(const std::string& stem, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s.layer%02d", stem.c_str(), i);
  return buf;
}

inline void block_shapes(const ModelConfig& c, const std::string& p,
                         std::map<std::string, std::vector<int>>* out,
                         bool conformer) {
  const int d = c.d_model, ff = c.d_ff;
  auto add = [&](const std::string& n, int r, int cc) { (*out)[p + n] = {r, cc}; };
  add(".attn.wq", d, d);
  add(".attn.wk", d, d);
  add(".attn.wv", d, d);
  add(".attn.wo", d, d);
  add(".ln1.g", 1, d);
  add(".ln1.b", 1, d);
  add(".ln2.g", 1, d);
  add(".ln2.b", 1, d);
  add(".ff.w1", d, ff);
  add(".ff.b1", 1, ff);
  add(".ff.w2", ff, d);
  add(".ff.b2", 1, d);
  if (conformer) {
    add(".ffm.w1", d, ff);
    add(".ffm.b1", 1, ff);
    add(".ffm.w2", ff, d);
    add(".ffm.b2", 1, d);
    add(".lnm.g", 1, d);
    add(".lnm.b", 1, d);
    add(".lnc.g", 1, d);
    add(".lnc.b", 1, d);
    add(".conv.pw1.w", d, d);
    add(".conv.pw1.b", 1, d);
    add(".conv.dw.w", c.dw_kernel, d);
    add(".conv.dw.b", 1, d);
    add(".conv.pw2.w", d, d);
    add(".conv.pw2.b", 1, d);
    add(".lnf.g", 1, d);
    add(".lnf.b", 1, d);
  }
}

inline void decoder_block_shapes(const ModelConfig& c, const std::string& p,
                                 std::map<std::string, std::vector<int>>* out) {
  const int d = c.d_model, ff = c.d_ff;
  auto add = [&](const std::string& n, int r, int cc) { (*out)[p + n] = {r, cc}; };
  for (const char* side : {".self", ".cross"}) {
    add(std::string(side) + ".wq", d, d);
    add(std::string(side) + ".wk", d, d);
    add(std::string(side) + ".wv", d, d);
    add(std::string(side) + ".wo", d, d);
  }
  add(".ln1.g", 1, d);
  add(".ln1.b", 1, d);
  add(".ln2.g", 1, d);
  add(".ln2.b", 1, d);
  add(".ln3.g", 1, d);
  add(".ln3.b", 1, d);
  add(".ff.w1", d, ff);
  add(".ff.b1", 1, ff);
  add(".ff.w2", ff, d);
  add(".ff.b2", 1, d);
}

}  // namespace nnet_detail

// Full name -> shape map; the single source of truth for what parameters a
// config implies.
inline std::map<std::string, std::vector<int>> param_shapes(const ModelConfig& c) {
  c.validate();
  std::map<std::string, std::vector<int>> s;
  const int d = c.d_model;
  const bool conf = c.block_type == "conformer";
  if (c.has_speech_encoder()) {
    s["enc.fe.w"] = {c.conv_kernel * c.feat_dim, d};
    s["enc.fe.b"] = {1, d};
    for (int i = 0; i < c.n_enc_layers; ++i)
      nnet_detail::block_shapes(c, nnet_detail::layer_name("enc", i), &s, conf);
    s["enc.norm.g"] = {1, d};
    s["enc.norm.b"] = {1, d};
    s["enc.proj.w"] = {d, d};
    s["enc.proj.b"] = {1, d};
  }
  if (c.has_text_encoder()) {
    s["tenc.embed"] = {c.src_vocab, d};
    for (int i = 0; i < c.n_text_enc_layers; ++i)
      nnet_detail::block_shapes(c, nnet_detail::layer_name("tenc", i), &s, false);
    s["tenc.norm.g"] = {1, d};
    s["tenc.norm.b"] = {1, d};
  }
  if (c.has_decoder()) {
    s["dec.embed"] = {c.tgt_vocab, d};
    for (int i = 0; i < c.n_dec_layers; ++i)
      nnet_detail::decoder_block_shapes(c, nnet_detail::layer_name("dec", i), &s);
    s["dec.norm.g"] = {1, d};
    s["dec.norm.b"] = {1, d};
    s["dec.out.w"] = {d, c.tgt_vocab};
    s["dec.out.b"] = {1, c.tgt_vocab};
  }
  if (c.has_ctc()) {
    const int in = c.ctc_hidden > 0 ? c.ctc_hidden : d;
    if (c.ctc_hidden > 0) {
      s["ctc.hidden.w"] = {d, c.ctc_hidden};
      s["ctc.hidden.b"] = {1, c.ctc_hidden};
    }
    s["ctc.out.w"] = {in, c.ctc_vocab};
    s["ctc.out.b"] = {1, c.ctc_vocab};
  }
  if (c.recon_head) {
    s["recon.w"] = {d, c.feat_dim};
    s["recon.b"] = {1, c.feat_dim};
  }
  return s;
}

namespace nnet_detail {

inline std::string last_component(const std::string& name) {
  auto pos = name.rfind('.');
  return pos == std::string::npos ? name : name.substr(pos + 1);
}
inline bool is_gain(const std::string& name) { return last_component(name) == "g"; }
inline bool is_bias(const std::string& name) {
  const std::string c = last_component(name);
  return c == "b" || c == "b1" || c == "b2";
}

inline Tensor init_tensor(const std::string& name, const std::vector<int>& shape,
                          Rng* rng) {
  Tensor t(shape);
  if (is_gain(name)) {
    t.fill(1.0);
  } else if (is_bias(name)) {
    // zeros
  } else {
    const int fan_in = shape[0], fan_out = shape.size() > 1 ? shape[1] : 1;
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng->uniform(-s, s);
  }
  return t;
}

}  // namespace nnet_detail

// Builds a model with deterministic initialization: parameters are created in
// name order with a single stream seeded by cfg.seed.
inline ModelGraph build_model(const ModelConfig& cfg) {
  ModelGraph m;
  m.cfg = cfg;
  auto shapes = param_shapes(cfg);
  Rng rng(Rng::mix(cfg.seed, 0xB01Du));
  for (const auto& [name, shape] : shapes) {
    m.params[name] = nnet_detail::init_tensor(name, shape, &rng);
    m.trainable[name] = true;
  }
  return m;
}

// Convenience builders for the four model roles.
inline ModelGraph build_st_model(ModelConfig cfg) {
  cfg.src_vocab = 0;
  cfg.ctc_vocab = 0;
  cfg.recon_head = false;
  require_config(cfg.tgt_vocab > 0, "ST model needs tgt_vocab");
  require_config(cfg.n_enc_layers > 0, "ST model needs a speech encoder");
  return build_model(cfg);
}

inline ModelGraph build_asr_model(ModelConfig cfg) {
  cfg.src_vocab = 0;
  cfg.tgt_vocab = 0;
  cfg.n_dec_layers = 0;
  cfg.recon_head = false;
  require_config(cfg.ctc_vocab > 0, "ASR model needs ctc_vocab");
  return build_model(cfg);
}

inline ModelGraph build_mt_model(ModelConfig cfg) {
  cfg.n_enc_layers = 0;
  cfg.ctc_vocab = 0;
  cfg.recon_head = false;
  require_config(cfg.src_vocab > 0 && cfg.tgt_vocab > 0,
                 "MT model needs src and tgt vocabularies");
  return build_model(cfg);
}

inline ModelGraph build_joint_model(ModelConfig cfg) {
  cfg.recon_head = false;
  require_config(cfg.src_vocab > 0 && cfg.tgt_vocab > 0 && cfg.ctc_vocab > 0,
                 "joint model needs src/tgt/ctc vocabularies");
  require_config(cfg.n_enc_layers > 0, "joint model needs a speech encoder");
  return build_model(cfg);
}

inline ModelGraph build_pretrain_model(ModelConfig cfg) {
  cfg.src_vocab = 0;
  cfg.tgt_vocab = 0;
  cfg.ctc_vocab = 0;
  cfg.n_dec_layers = 0;
  cfg.recon_head = true;
  return build_model(cfg);
}

inline int64_t count_parameters(const ModelGraph& m) {
  int64_t n = 0;
  for (const auto& [name, t] : m.params) {
    (void)name;
    n += static_cast<int64_t>(t.size());
  }
  return n;
}

// Keeps encoder layers 0..keep_n-1 (weights bit-identical), the subsampler,
// the final norm, and the final projection; dropped layers leave the graph
// entirely.
inline ModelGraph truncate_encoder(const ModelGraph& m, int keep_n) {
  require_config(m.cfg.has_speech_encoder(), "truncate_encoder: no speech encoder");
  require_config(keep_n >= 1 && keep_n <= m.cfg.n_enc_layers,
                 "truncate_encoder: keep_n " + std::to_string(keep_n) +
                     " out of range 1.." + std::to_string(m.cfg.n_enc_layers));
  ModelGraph out;
  out.cfg = m.cfg;
  out.cfg.n_enc_layers = keep_n;
  std::set<std::string> dropped;
  for (int i = keep_n; i < m.cfg.n_enc_layers; ++i)
    dropped.insert(nnet_detail::layer_name("enc", i) + ".");
  for (const auto& [name, t] : m.params) {
    bool drop = false;
    for (const auto& pre : dropped)
      if (name.rfind(pre, 0) == 0) drop = true;
    if (!drop) {
      out.params[name] = t;
      out.trainable[name] = m.is_trainable(name);
    }
  }
  return out;
}

// Freezes parameters whose names match any comma-separated glob pattern.
// An empty selector freezes nothing (everything trainable).
inline FreezeMask set_freeze(ModelGraph* m, const std::string& selector) {
  std::vector<std::string> pats;
  for (const auto& p : split(selector, ','))
    if (!trim(p).empty()) pats.push_back(trim(p));
  FreezeMask mask;
  for (const auto& [name, t] : m->params) {
    (void)t;
    bool frozen = false;
    for (const auto& p : pats)
      if (glob_match(p, name) || name.rfind(p, 0) == 0) frozen = true;
    mask[name] = !frozen;
  }
  m->trainable = mask;
  return mask;
}

// Output-side layer groups, earliest to latest. Retargeting re-initializes
// the last k of these.
inline std::vector<std::string> output_side_layers(const ModelGraph& m) {
  std::vector<std::string> out;
  if (m.cfg.has_decoder()) {
    for (int i = 0; i < m.cfg.n_dec_layers; ++i)
      out.push_back(nnet_detail::layer_name("dec", i));
    out.push_back("dec.out");
  } else if (m.cfg.has_ctc()) {
    if (m.cfg.ctc_hidden > 0) out.push_back("ctc.hidden");
    out.push_back("ctc.out");
  }
  return out;
}

// Transfer surgery: the output vocabulary is resized (output projection and,
// for decoder models, the target embedding) and the last reinit_last_k
// output-side layers are freshly initialized; every other tensor is copied
// bit-identically. Deterministic given seed.
inline ModelGraph transfer_retarget(const ModelGraph& m, int new_vocab,
                                    int reinit_last_k, uint64_t seed) {
  auto layers = output_side_layers(m);
  require_config(!layers.empty(), "transfer_retarget: model has no output side");
  require_config(reinit_last_k >= 0 &&
                     reinit_last_k <= static_cast<int>(layers.size()),
                 "transfer_retarget: reinit_last_k exceeds output-side depth");
  require_config(new_vocab > 0, "transfer_retarget: bad vocabulary size");

  ModelGraph out;
  out.cfg = m.cfg;
  const bool dec = m.cfg.has_decoder();
  if (dec)
    out.cfg.tgt_vocab = new_vocab;
  else
    out.cfg.ctc_vocab = new_vocab;

  std::set<std::string> reinit_prefixes;
  for (size_t i = layers.size() - reinit_last_k; i < layers.size(); ++i)
    reinit_prefixes.insert(layers[i]);

  auto shapes = param_shapes(out.cfg);
  for (const auto& [name, shape] : shapes) {
    bool reinit = false;
    for (const auto& pre : reinit_prefixes)
      if (name.rfind(pre, 0) == 0) reinit = true;
    auto it = m.params.find(name);
    if (!reinit && it != m.params.end() && it->second.shape() == shape) {
      out.params[name] = it->second;  // bit-identical copy
    } else {
      Rng rng(Rng::mix(Rng::mix(seed, 0x4E7Au), Rng::hash(name)));
      out.params[name] = nnet_detail::init_tensor(name, shape, &rng);
    }
    out.trainable[name] = true;
  }
  return out;
}

// --- checkpoints -----------------------------------------------------------

inline void save_checkpoint(const ModelGraph& m, const std::string& path) {
  NamedTensorFile f;
  f.header = m.cfg.to_kv();
  for (const auto& [name, t] : m.params) f.tensors.emplace_back(name, t);
  write_named_tensors(path, f);
}

inline ModelGraph load_checkpoint(const std::string& path) {
  NamedTensorFile f = read_named_tensors(path);
  ModelGraph m;
  m.cfg = ModelConfig::from_kv(f.header);
  auto shapes = param_shapes(m.cfg);
  for (auto& [name, t] : f.tensors) {
    auto it = shapes.find(name);
    require_data(it != shapes.end(),
                 "checkpoint tensor '" + name + "' not implied by its config (" + path + ")");
    require_data(it->second == t.shape(),
                 "checkpoint tensor '" + name + "' has shape " + t.shape_str() +
                     ", config implies different shape (" + path + ")");
    require_data(t.all_finite(), "non-finite values in tensor '" + name + "'");
    m.params[name] = std::move(t);
    m.trainable[name] = true;
  }
  for (const auto& [name, shape] : shapes) {
    (void)shape;
    require_data(m.params.count(name) > 0,
                 "checkpoint missing tensor '" + name + "' (" + path + ")");
  }
  return m;
}

// Loads into an existing model; the checkpoint must match the model's config.
inline void load_checkpoint_into(ModelGraph* m, const std::string& path) {
  ModelGraph loaded = load_checkpoint(path);
  require_data(loaded.cfg == m->cfg,
               "checkpoint config mismatch loading " + path);
  m->params = std::move(loaded.params);
}

// Copies every destination tensor whose name starts with `prefix` from src;
// all of them must exist in src with identical shapes.
inline void copy_params_with_prefix(ModelGraph* dst, const ModelGraph& src,
                                    const std::string& prefix) {
  for (auto& [name, t] : dst->params) {
    if (name.rfind(prefix, 0) != 0) continue;
    auto it = src.params.find(name);
    require_data(it != src.params.end(),
                 "source model lacks tensor '" + name + "' for prefix copy");
    require_data(it->second.same_shape(t),
                 "shape mismatch copying tensor '" + name + "'");
    t = it->second;
  }
}

// --- forward passes --------------------------------------------------------

inline Tensor sinusoidal_positions(int len, int d) {
  Tensor pe(len, d);
  for (int t = 0; t < len; ++t) {
    for (int i = 0; i < d; i += 2) {
      double angle = t / std::pow(10000.0, static_cast<double>(i) / d);
      pe.at(t, i) = std::sin(angle);
      if (i + 1 < d) pe.at(t, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

inline Tensor causal_mask(int len) {
  Tensor m(len, len, 0.0);
  for (int i = 0; i < len; ++i)
    for (int j = i + 1; j < len; ++j) m.at(i, j) = -1e30;
  return m;
}

// Ties a tape to a model: parameters enter the tape lazily as leaves, frozen
// ones as constants. After backward, grads() returns per-parameter gradients.
class Runner {
 public:
  Runner(ag::Tape* tape, const ModelGraph* model) : t_(tape), m_(model) {}

  ag::Var P(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    ag::Var v = t_->leaf(m_->p(name), m_->is_trainable(name));
    vars_.emplace(name, v);
    return v;
  }

  std::map<std::string, Tensor> grads() const {
    std::map<std::string, Tensor> g;
    for (const auto& [name, v] : vars_) {
      const Tensor& gv = t_->grad(v);
      if (!gv.empty()) g[name] = gv;
    }
    return g;
  }

  // Multi-head attention. q_in attends over kv_in; mask (optional) is added
  // to every head's scores before the softmax.
  ag::Var mha(const std::string& prefix, ag::Var q_in, ag::Var kv_in,
              ag::Var mask) {
    ag::Tape& t = *t_;
    const int d = m_->cfg.d_model;
    const int h = m_->cfg.n_heads;
    const int dh = d / h;
    ag::Var q = ag::matmul(t, q_in, P(prefix + ".wq"));
    ag::Var k = ag::matmul(t, kv_in, P(prefix + ".wk"));
    ag::Var v = ag::matmul(t, kv_in, P(prefix + ".wv"));
    std::vector<ag::Var> heads;
    for (int i = 0; i < h; ++i) {
      ag::Var qh = ag::slice_cols(t, q, i * dh, dh);
      ag::Var kh = ag::slice_cols(t, k, i * dh, dh);
      ag::Var vh = ag::slice_cols(t, v, i * dh, dh);
      ag::Var scores = ag::scale(t, ag::matmul(t, qh, kh, false, true),
                                 1.0 / std::sqrt(static_cast<double>(dh)));
      if (mask.valid()) scores = ag::add(t, scores, mask);
      ag::Var att = ag::softmax_rows(t, scores);
      heads.push_back(ag::matmul(t, att, vh));
    }
    ag::Var cat = ag::concat_cols(t, heads);
    return ag::matmul(t, cat, P(prefix + ".wo"));
  }

  ag::Var feed_forward(const std::string& prefix, ag::Var x) {
    ag::Tape& t = *t_;
    ag::Var h = ag::relu(
        t, ag::add_rowvec(t, ag::matmul(t, x, P(prefix + ".w1")), P(prefix + ".b1")));
    return ag::add_rowvec(t, ag::matmul(t, h, P(prefix + ".w2")), P(prefix + ".b2"));
  }

  ag::Var ln(const std::string& prefix, ag::Var x) {
    return ag::layer_norm(*t_, x, P(prefix + ".g"), P(prefix + ".b"));
  }

  // Pre-norm transformer block.
  ag::Var transformer_block(const std::string& p, ag::Var x, ag::Var mask) {
    ag::Tape& t = *t_;
    ag::Var n1 = ln(p + ".ln1", x);
    x = ag::add(t, x, mha(p + ".attn", n1, n1, mask));
    x = ag::add(t, x, feed_forward(p + ".ff", ln(p + ".ln2", x)));
    return x;
  }

  // Conformer block: macaron feed-forward halves around attention and a
  // depthwise-convolution module, then a final norm.
  ag::Var conformer_block(const std::string& p, ag::Var x, ag::Var mask) {
    ag::Tape& t = *t_;
    x = ag::add(t, x, ag::scale(t, feed_forward(p + ".ffm", ln(p + ".lnm", x)), 0.5));
    ag::Var n1 = ln(p + ".ln1", x);
    x = ag::add(t, x, mha(p + ".attn", n1, n1, mask));
    {
      ag::Var c = ln(p + ".lnc", x);
      c = ag::relu(t, ag::add_rowvec(t, ag::matmul(t, c, P(p + ".conv.pw1.w")),
                                     P(p + ".conv.pw1.b")));
      c = ag::depthwise_conv1d(t, c, P(p + ".conv.dw.w"), P(p + ".conv.dw.b"),
                               m_->cfg.dw_kernel);
      c = ag::add_rowvec(t, ag::matmul(t, c, P(p + ".conv.pw2.w")),
                         P(p + ".conv.pw2.b"));
      x = ag::add(t, x, c);
    }
    x = ag::add(t, x, ag::scale(t, feed_forward(p + ".ff", ln(p + ".ln2", x)), 0.5));
    return ln(p + ".lnf", x);
  }

  ag::Var encoder_block(const std::string& p, ag::Var x, ag::Var mask) {
    return m_->cfg.block_type == "conformer" ? conformer_block(p, x, mask)
                                             : transformer_block(p, x, mask);
  }

  // Speech features -> encoder states. The subsampler is a 1-D convolution
  // (kernel conv_kernel, stride conv_stride); sinusoidal positions are added
  // after it.
  ag::Var speech_encode(const Tensor& feats) {
    ag::Tape& t = *t_;
    const ModelConfig& c = m_->cfg;
    require_data(feats.rows() >= c.conv_kernel,
                 "utterance shorter than the subsampler kernel");
    ag::Var x = t.constant(feats);
    x = ag::conv1d(t, x, P("enc.fe.w"), P("enc.fe.b"), c.conv_kernel, c.conv_stride);
    x = ag::relu(t, x);
    x = ag::add(t, x, t.constant(sinusoidal_positions(t.value(x).rows(), c.d_model)));
    ag::Var no_mask;
    for (int i = 0; i < c.n_enc_layers; ++i)
      x = encoder_block(nnet_detail::layer_name("enc", i), x, no_mask);
    x = ln("enc.norm", x);
    return ag::add_rowvec(t, ag::matmul(t, x, P("enc.proj.w")), P("enc.proj.b"));
  }

  // Token ids -> text encoder states (transformer blocks regardless of the
  // speech block type).
  ag::Var text_encode(const std::vector<int>& ids) {
    ag::Tape& t = *t_;
    const ModelConfig& c = m_->cfg;
    require_data(!ids.empty(), "text_encode: empty input");
    ag::Var x = ag::embed_rows(t, P("tenc.embed"), ids);
    x = ag::add(t, x, t.constant(sinusoidal_positions(static_cast<int>(ids.size()),
                                                      c.d_model)));
    ag::Var no_mask;
    for (int i = 0; i < c.n_text_enc_layers; ++i)
      x = transformer_block(nnet_detail::layer_name("tenc", i), x, no_mask);
    return ln("tenc.norm", x);
  }

  // Teacher-forced decoder: input_ids (bos-led) -> per-position log-probs
  // over the target vocabulary.
  ag::Var decode(ag::Var memory, const std::vector<int>& input_ids) {
    ag::Tape& t = *t_;
    const ModelConfig& c = m_->cfg;
    require_data(!input_ids.empty(), "decode: empty input");
    const int L = static_cast<int>(input_ids.size());
    ag::Var x = ag::embed_rows(t, P("dec.embed"), input_ids);
    x = ag::add(t, x, t.constant(sinusoidal_positions(L, c.d_model)));
    ag::Var cmask = t.constant(causal_mask(L));
    const bool have_memory = memory.valid() && t.value(memory).rows() > 0;
    for (int i = 0; i < c.n_dec_layers; ++i) {
      std::string p = nnet_detail::layer_name("dec", i);
      ag::Var n1 = ln(p + ".ln1", x);
      x = ag::add(t, x, mha(p + ".self", n1, n1, cmask));
      if (have_memory) {
        ag::Var no_mask;
        x = ag::add(t, x, mha(p + ".cross", ln(p + ".ln2", x), memory, no_mask));
      }
      x = ag::add(t, x, feed_forward(p + ".ff", ln(p + ".ln3", x)));
    }
    x = ln("dec.norm", x);
    ag::Var logits = ag::add_rowvec(t, ag::matmul(t, x, P("dec.out.w")), P("dec.out.b"));
    return ag::log_softmax_rows(t, logits);
  }

  // Encoder states -> per-frame CTC log-probs (blank included in the vocab).
  ag::Var ctc_logprobs(ag::Var enc) {
    ag::Tape& t = *t_;
    ag::Var x = enc;
    if (m_->cfg.ctc_hidden > 0) {
      x = ag::relu(t, ag::add_rowvec(t, ag::matmul(t, x, P("ctc.hidden.w")),
                                     P("ctc.hidden.b")));
    }
    ag::Var logits = ag::add_rowvec(t, ag::matmul(t, x, P("ctc.out.w")), P("ctc.out.b"));
    return ag::log_softmax_rows(t, logits);
  }

  // Encoder states -> reconstructed input frames (pretraining head).
  ag::Var recon(ag::Var enc) {
    return ag::add_rowvec(*t_, ag::matmul(*t_, enc, P("recon.w")), P("recon.b"));
  }

 private:
  ag::Tape* t_;
  const ModelGraph* m_;
  std::map<std::string, ag::Var> vars_;
};

// Subsampled length of the speech encoder for T input frames.
inline int subsampled_length(const ModelConfig& c, int T) {
  if (T < c.conv_kernel) return 0;
  return (T - c.conv_kernel) / c.conv_stride + 1;
}

}  // namespace stwb

#endif  // STWB_NNET_HPP_
