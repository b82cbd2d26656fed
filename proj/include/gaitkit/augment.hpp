#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/rng.hpp"
#include "gaitkit/skeleton.hpp"

namespace gaitkit {

struct AugmentConfig {
  std::size_t window_len = 54;
  std::vector<double> pace_factors{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  std::size_t shuffle_segments = 3;
  double squeeze_min = 0.8;
  double squeeze_max = 1.2;
  double p_shuffle = 0.5;
  double p_squeeze = 0.5;
  double p_flip = 0.5;
  double p_mirror = 0.5;
  double p_joint_drop = 0.1;
  double p_frame_drop = 0.05;

  void validate() const {
    require(window_len >= 2, ErrorCode::ConfigError, "window_len must be >= 2");
    require(!pace_factors.empty(), ErrorCode::ConfigError, "pace_factors must not be empty");
    for (const double f : pace_factors)
      require(f > 0.0 && std::isfinite(f), ErrorCode::ConfigError, "pace factors must be > 0");
    require(shuffle_segments >= 1, ErrorCode::ConfigError, "shuffle_segments must be >= 1");
    require(squeeze_min > 0.0 && squeeze_min <= squeeze_max, ErrorCode::ConfigError, "invalid squeeze range");
    for (const double p : {p_shuffle, p_squeeze, p_flip, p_mirror, p_joint_drop, p_frame_drop})
      require(p >= 0.0 && p <= 1.0, ErrorCode::ConfigError, "probabilities must be in [0, 1]");
  }
};

/// Uniform random contiguous window of `len` frames; shorter inputs are tiled
/// from their start and truncated.
inline NormalizedSequence sample_window(const NormalizedSequence& ns, std::size_t len, Rng& rng) {
  require(!ns.empty(), ErrorCode::EmptySequence, "cannot window an empty sequence");
  NormalizedSequence out;
  out.source_track_id = ns.source_track_id;
  out.frames.reserve(len);
  if (ns.size() >= len) {
    const auto start = static_cast<std::size_t>(rng.uniform_int(ns.size() - len + 1));
    out.frames.assign(ns.frames.begin() + static_cast<std::ptrdiff_t>(start),
                      ns.frames.begin() + static_cast<std::ptrdiff_t>(start + len));
  } else {
    for (std::size_t i = 0; i < len; ++i) out.frames.push_back(ns.frames[i % ns.size()]);
  }
  return out;
}

/// Deterministic centre crop (tiling when shorter), used for evaluation.
inline NormalizedSequence center_window(const NormalizedSequence& ns, std::size_t len) {
  require(!ns.empty(), ErrorCode::EmptySequence, "cannot window an empty sequence");
  NormalizedSequence out;
  out.source_track_id = ns.source_track_id;
  if (ns.size() >= len) {
    const std::size_t start = (ns.size() - len) / 2;
    out.frames.assign(ns.frames.begin() + static_cast<std::ptrdiff_t>(start),
                      ns.frames.begin() + static_cast<std::ptrdiff_t>(start + len));
  } else {
    for (std::size_t i = 0; i < len; ++i) out.frames.push_back(ns.frames[i % ns.size()]);
  }
  return out;
}

/// Resamples to `out_len` frames; output frame i sits at source time
/// i * factor * (T - 1) / (out_len - 1), clamped to [0, T - 1], and each
/// coordinate is linearly interpolated independently.
inline NormalizedSequence pace_resample(const NormalizedSequence& seq, double factor, std::size_t out_len) {
  require(factor > 0.0 && std::isfinite(factor), ErrorCode::InvalidArgument, "pace factor must be > 0");
  require(seq.size() >= 2, ErrorCode::TooShort, "pace_resample needs at least 2 frames");
  require(out_len >= 1, ErrorCode::InvalidArgument, "out_len must be >= 1");
  const auto last = static_cast<double>(seq.size() - 1);
  const double denom = out_len > 1 ? static_cast<double>(out_len - 1) : 1.0;
  NormalizedSequence out;
  out.source_track_id = seq.source_track_id;
  out.frames.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double t = std::clamp(static_cast<double>(i) * factor * last / denom, 0.0, last);
    auto lo = static_cast<std::size_t>(std::floor(t));
    if (lo >= seq.size() - 1) lo = seq.size() - 1;
    const double frac = t - static_cast<double>(lo);
    const Pose& a = seq.frames[lo];
    if (frac == 0.0) {
      out.frames[i] = a;
      continue;
    }
    const Pose& b = seq.frames[lo + 1];
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      out.frames[i][j] = {a[j].x + (b[j].x - a[j].x) * frac, a[j].y + (b[j].y - a[j].y) * frac};
    }
  }
  return out;
}

/// Splits into k near-equal contiguous segments (the first T mod k are one
/// frame longer) and permutes their order uniformly.
inline NormalizedSequence shuffle_segments(const NormalizedSequence& seq, std::size_t k, Rng& rng) {
  require(k >= 1 && k <= seq.size(), ErrorCode::InvalidArgument, "segment count must be in [1, length]");
  const std::size_t base = seq.size() / k;
  const std::size_t extra = seq.size() % k;
  std::vector<std::pair<std::size_t, std::size_t>> segments;  // [begin, end)
  std::size_t begin = 0;
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    segments.emplace_back(begin, begin + len);
    begin += len;
  }
  rng.shuffle(segments);
  NormalizedSequence out;
  out.source_track_id = seq.source_track_id;
  out.frames.reserve(seq.size());
  for (const auto& [b, e] : segments)
    out.frames.insert(out.frames.end(), seq.frames.begin() + static_cast<std::ptrdiff_t>(b),
                      seq.frames.begin() + static_cast<std::ptrdiff_t>(e));
  return out;
}

/// Left-right reflection: negates x and swaps left/right joint labels.
inline NormalizedSequence mirror(NormalizedSequence seq) {
  for (auto& pose : seq.frames) {
    for (auto& p : pose) p.x = -p.x;
    for (const auto& [l, r] : kLeftRightPairs) std::swap(pose[l], pose[r]);
  }
  return seq;
}

/// Temporal reversal.
inline NormalizedSequence flip(NormalizedSequence seq) {
  std::reverse(seq.frames.begin(), seq.frames.end());
  return seq;
}

inline NormalizedSequence squeeze(NormalizedSequence seq, double s) {
  for (auto& pose : seq.frames)
    for (auto& p : pose) p.x *= s;
  return seq;
}

/// Frame dropout repeats the (already processed) predecessor; joint dropout
/// zeroes a joint in a frame.
inline NormalizedSequence dropout(NormalizedSequence seq, double p_joint, double p_frame, Rng& rng) {
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (t > 0 && rng.bernoulli(p_frame)) seq.frames[t] = seq.frames[t - 1];
    for (auto& p : seq.frames[t]) {
      if (rng.bernoulli(p_joint)) p = {0.0, 0.0};
    }
  }
  return seq;
}

inline NormalizedSequence make_view(const NormalizedSequence& ns, const AugmentConfig& cfg, Rng& rng) {
  const double factor = cfg.pace_factors[rng.uniform_int(cfg.pace_factors.size())];
  const auto span = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(static_cast<double>(cfg.window_len) * factor)));
  NormalizedSequence v = sample_window(ns, span, rng);
  v = pace_resample(v, 1.0, cfg.window_len);
  if (rng.bernoulli(cfg.p_shuffle)) v = shuffle_segments(v, std::min(cfg.shuffle_segments, v.size()), rng);
  if (rng.bernoulli(cfg.p_squeeze)) v = squeeze(std::move(v), rng.uniform(cfg.squeeze_min, cfg.squeeze_max));
  if (rng.bernoulli(cfg.p_flip)) v = flip(std::move(v));
  if (rng.bernoulli(cfg.p_mirror)) v = mirror(std::move(v));
  return dropout(std::move(v), cfg.p_joint_drop, cfg.p_frame_drop, rng);
}

/// Two independently augmented views of the same sequence.
inline std::pair<NormalizedSequence, NormalizedSequence> make_views(const NormalizedSequence& ns,
                                                                    const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  require(!ns.empty(), ErrorCode::EmptySequence, "cannot augment an empty sequence");
  auto a = make_view(ns, cfg, rng);
  auto b = make_view(ns, cfg, rng);
  return {std::move(a), std::move(b)};
}

}  // namespace gaitkit
