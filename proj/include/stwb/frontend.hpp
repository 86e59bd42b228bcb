// stwb/frontend.hpp

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

#ifndef STWB_FRONTEND_HPP_
#define STWB_FRONTEND_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "stwb/common.hpp"
#include "stwb/corpus.hpp"
#include "stwb/io.hpp"
#include "stwb/rng.hpp"
#include "stwb/tensor.hpp"

namespace stwb {

constexpr double kLogFloor = 1e-10;  // energy floor before taking logs

struct FeatureMatrix {
  Tensor data;  // T x F
  double frame_shift_ms = 10.0;
  double frame_length_ms = 25.0;

  int num_frames() const { return data.rows(); }
  int dim() const { return data.cols(); }

  void validate() const {
    require_data(data.rows() >= 1 && data.cols() >= 1,
                 "feature matrix must be at least 1x1");
    require_data(data.all_finite(), "non-finite feature values");
  }
};

struct CmvnStats {
  std::vector<double> mean;
  std::vector<double> var;
  int64_t count = 0;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const {
    require_data(count >= 2, "CMVN needs at least 2 frames");
    for (double v : var) require_data(v >= 0.0, "negative CMVN variance");
  }
};

struct SpecAugmentConfig {
  int n_freq_masks = 2;
  int n_time_masks = 5;
  int max_freq_width = 4;
  int max_time_width = 8;
  double mask_value = 0.0;  // features are masked after CMVN, where 0 is the mean
};

// Band center frequencies are aligned to analysis-window DFT bins so a frame
// synthesized from band amplitudes is recovered by the analysis below.
namespace frontend_detail {
inline std::vector<double> band_bins(int n_bands, int window_samples) {
  std::vector<double> bins(n_bands);
  int max_bin = window_samples / 2 - 1;
  for (int f = 0; f < n_bands; ++f)
    bins[f] = 1.0 + std::floor(static_cast<double>(f) * (max_bin - 1) /
                               std::max(1, n_bands));
  return bins;
}
}  // namespace frontend_detail

// Renders a frame stream to a waveform: each frame contributes its band
// amplitudes as sinusoids over one hop of samples. Only exists so speed
// perturbation has a waveform to resample.
inline std::vector<double> render_waveform(const Tensor& frames,
                                           int sample_rate,
                                           double frame_shift_ms = 10.0,
                                           double frame_length_ms = 25.0) {
  const int hop = static_cast<int>(std::lround(sample_rate * frame_shift_ms / 1000.0));
  const int win = static_cast<int>(std::lround(sample_rate * frame_length_ms / 1000.0));
  const int T = frames.rows(), F = frames.cols();
  auto bins = frontend_detail::band_bins(F, win);
  std::vector<double> wave(static_cast<size_t>(T) * hop + (T > 0 ? win - hop : 0), 0.0);
  for (int t = 0; t < T; ++t) {
    for (int n = 0; n < hop; ++n) {
      size_t pos = static_cast<size_t>(t) * hop + n;
      double s = 0.0;
      for (int f = 0; f < F; ++f)
        s += frames.at(t, f) *
             std::sin(2.0 * M_PI * bins[f] * static_cast<double>(pos) / win);
      wave[pos] = s;
    }
  }
  return wave;
}

// Log band-magnitude analysis of a waveform. T = floor((len - win)/hop) + 1.
inline FeatureMatrix analyze_waveform(const std::vector<double>& wave,
                                      int sample_rate, int n_bands,
                                      double frame_length_ms = 25.0,
                                      double frame_shift_ms = 10.0) {
  const int hop = static_cast<int>(std::lround(sample_rate * frame_shift_ms / 1000.0));
  const int win = static_cast<int>(std::lround(sample_rate * frame_length_ms / 1000.0));
  require_data(static_cast<int>(wave.size()) >= win,
               "audio shorter than one analysis frame");
  const int T = static_cast<int>((wave.size() - win) / hop) + 1;
  auto bins = frontend_detail::band_bins(n_bands, win);
  FeatureMatrix fm;
  fm.frame_length_ms = frame_length_ms;
  fm.frame_shift_ms = frame_shift_ms;
  fm.data = Tensor(T, n_bands);
  for (int t = 0; t < T; ++t) {
    const size_t t0 = static_cast<size_t>(t) * hop;
    for (int f = 0; f < n_bands; ++f) {
      double re = 0.0, im = 0.0;
      for (int n = 0; n < win; ++n) {
        double ang = 2.0 * M_PI * bins[f] * static_cast<double>(t0 + n) / win;
        re += wave[t0 + n] * std::cos(ang);
        im += wave[t0 + n] * std::sin(ang);
      }
      double mag = 2.0 * std::sqrt(re * re + im * im) / win;
      fm.data.at(t, f) = std::log(std::max(mag, kLogFloor));
    }
  }
  return fm;
}

// Frame-stream utterances pass through (with an optional band projection when
// the stored dimension differs); waveform utterances go through analysis.
// n_mels = 0 keeps the stored dimension.
inline FeatureMatrix compute_log_mel(const Utterance& u, int n_mels = 0,
                                     double frame_length_ms = 25.0,
                                     double frame_shift_ms = 10.0) {
  if (u.audio.kind == Audio::Kind::kWaveform) {
    require_data(!u.audio.waveform.empty(), "empty waveform: " + u.id);
    return analyze_waveform(u.audio.waveform, u.audio.sample_rate,
                            n_mels > 0 ? n_mels : 40, frame_length_ms,
                            frame_shift_ms);
  }
  FeatureMatrix fm;
  fm.frame_length_ms = frame_length_ms;
  fm.frame_shift_ms = frame_shift_ms;
  const Tensor& x = u.audio.frames;
  require_data(x.rows() >= 1, "empty frame stream: " + u.id);
  if (n_mels == 0 || n_mels == x.cols()) {
    fm.data = x;
  } else {
    // Triangle-free band pooling: adjacent stored bands are averaged into
    // n_mels output bands.
    fm.data = Tensor(x.rows(), n_mels);
    for (int t = 0; t < x.rows(); ++t) {
      for (int j = 0; j < n_mels; ++j) {
        int lo = j * x.cols() / n_mels;
        int hi = std::max(lo + 1, (j + 1) * x.cols() / n_mels);
        double acc = 0.0;
        for (int c = lo; c < hi; ++c) acc += x.at(t, c);
        fm.data.at(t, j) = acc / (hi - lo);
      }
    }
  }
  fm.validate();
  return fm;
}

// Accumulates global mean/variance over a set of feature matrices.
class CmvnAccumulator {
 public:
  void add(const Tensor& feats) {
    if (sum_.empty()) {
      sum_.assign(feats.cols(), 0.0);
      sumsq_.assign(feats.cols(), 0.0);
    }
    require_data(static_cast<int>(sum_.size()) == feats.cols(),
                 "CMVN dimension mismatch");
    for (int t = 0; t < feats.rows(); ++t) {
      const double* row = feats.row_ptr(t);
      for (size_t c = 0; c < sum_.size(); ++c) {
        sum_[c] += row[c];
        sumsq_[c] += row[c] * row[c];
      }
    }
    count_ += feats.rows();
  }

  CmvnStats finalize() const {
    require_data(count_ >= 2, "CMVN needs at least 2 frames");
    CmvnStats s;
    s.count = count_;
    s.mean.resize(sum_.size());
    s.var.resize(sum_.size());
    for (size_t c = 0; c < sum_.size(); ++c) {
      s.mean[c] = sum_[c] / count_;
      s.var[c] = std::max(0.0, sumsq_[c] / count_ - s.mean[c] * s.mean[c]);
    }
    return s;
  }

 private:
  std::vector<double> sum_, sumsq_;
  int64_t count_ = 0;
};

inline Tensor apply_cmvn(const Tensor& feats, const CmvnStats& stats,
                         double var_floor = 1e-8) {
  stats.validate();
  require_data(feats.cols() == stats.dim(), "CMVN dimension mismatch");
  Tensor out = feats;
  for (int t = 0; t < out.rows(); ++t) {
    double* row = out.row_ptr(t);
    for (int c = 0; c < out.cols(); ++c)
      row[c] = (row[c] - stats.mean[c]) /
               std::sqrt(std::max(stats.var[c], var_floor));
  }
  return out;
}

// CMVN serialization reuses the frame-stream format: a 2 x F matrix
// (mean row, variance row) with the count in the third header slot.
inline void write_cmvn(const std::string& path, const CmvnStats& s) {
  Tensor m(2, s.dim());
  for (int c = 0; c < s.dim(); ++c) {
    m.at(0, c) = s.mean[c];
    m.at(1, c) = s.var[c];
  }
  write_frame_stream(path, m, static_cast<int32_t>(s.count));
}

inline CmvnStats read_cmvn(const std::string& path) {
  int32_t count = 0;
  Tensor m = read_frame_stream(path, &count);
  require_data(m.rows() == 2, "bad CMVN file: " + path);
  CmvnStats s;
  s.count = count;
  s.mean.resize(m.cols());
  s.var.resize(m.cols());
  for (int c = 0; c < m.cols(); ++c) {
    s.mean[c] = m.at(0, c);
    s.var[c] = m.at(1, c);
  }
  s.validate();
  return s;
}

// Masks exactly cfg.n_freq_masks column bands and cfg.n_time_masks row bands
// with widths drawn uniformly in [0, max_width]. Fresh matrix; the input is
// untouched. Draw order: frequency masks then time masks, width before start.
inline Tensor spec_augment(const Tensor& feats, const SpecAugmentConfig& cfg,
                           uint64_t rng_seed) {
  require_config(cfg.max_freq_width <= feats.cols(),
                 "freq mask width exceeds feature dim");
  require_config(cfg.max_time_width <= feats.rows(),
                 "time mask width exceeds frame count");
  Tensor out = feats;
  Rng rng(rng_seed);
  const int T = feats.rows(), F = feats.cols();
  for (int i = 0; i < cfg.n_freq_masks; ++i) {
    int w = static_cast<int>(rng.uniform_int(0, cfg.max_freq_width));
    int f0 = static_cast<int>(rng.uniform_int(0, F - w));
    for (int t = 0; t < T; ++t)
      for (int f = f0; f < f0 + w; ++f) out.at(t, f) = cfg.mask_value;
  }
  for (int i = 0; i < cfg.n_time_masks; ++i) {
    int w = static_cast<int>(rng.uniform_int(0, cfg.max_time_width));
    int t0 = static_cast<int>(rng.uniform_int(0, T - w));
    for (int t = t0; t < t0 + w; ++t)
      for (int f = 0; f < F; ++f) out.at(t, f) = cfg.mask_value;
  }
  return out;
}

// Linear-interpolation resampling to round(len / factor) samples.
inline std::vector<double> resample_linear(const std::vector<double>& x,
                                           double factor) {
  require_config(factor > 0.0, "speed factor must be positive");
  const size_t n_out =
      static_cast<size_t>(std::lround(static_cast<double>(x.size()) / factor));
  std::vector<double> y(n_out);
  if (n_out == 0) return y;
  for (size_t i = 0; i < n_out; ++i) {
    double pos = static_cast<double>(i) * factor;
    size_t i0 = static_cast<size_t>(pos);
    if (i0 >= x.size() - 1) {
      y[i] = x.back();
    } else {
      double frac = pos - static_cast<double>(i0);
      y[i] = x[i0] * (1.0 - frac) + x[i0 + 1] * frac;
    }
  }
  return y;
}

// Speed perturbation. Factor 1.0 is the identity; frame-stream utterances are
// rendered to a waveform first, so the result is a waveform utterance.
inline Utterance speed_perturb(const Utterance& u, double factor) {
  require_config(factor > 0.0, "speed factor must be positive");
  if (factor == 1.0) return u;
  Utterance out = u;
  const std::vector<double>* wave = nullptr;
  std::vector<double> rendered;
  if (u.audio.kind == Audio::Kind::kWaveform) {
    wave = &u.audio.waveform;
  } else {
    rendered = render_waveform(u.audio.frames, u.audio.sample_rate);
    wave = &rendered;
  }
  out.audio.kind = Audio::Kind::kWaveform;
  out.audio.frames = Tensor{};
  out.audio.waveform = resample_linear(*wave, factor);
  out.audio.sample_rate = u.audio.sample_rate;
  require_data(!out.audio.waveform.empty(), "speed_perturb produced empty audio");
  return out;
}

}  // namespace stwb

#endif  // STWB_FRONTEND_HPP_
