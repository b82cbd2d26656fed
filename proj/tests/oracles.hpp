#pragma once

// Independent reference implementations used by the tests. Nothing here calls
// into the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gaitkit/rng.hpp"
#include "gaitkit/skeleton.hpp"

namespace oracle {

/// Plain 1-D linear interpolation of samples at continuous time t, clamped to
/// the sample range.
inline double lerp_at(const std::vector<double>& samples, double t) {
  const double last = static_cast<double>(samples.size() - 1);
  t = std::min(std::max(t, 0.0), last);
  const double lo = std::floor(t);
  const auto i = static_cast<std::size_t>(lo);
  if (i + 1 >= samples.size()) return samples.back();
  const double w = t - lo;
  return (1.0 - w) * samples[i] + w * samples[i + 1];
}

/// Resamples every joint coordinate on its own.
inline gaitkit::NormalizedSequence resample(const gaitkit::NormalizedSequence& seq, double factor,
                                            std::size_t out_len) {
  gaitkit::NormalizedSequence out;
  out.frames.resize(out_len);
  const double span = static_cast<double>(seq.size() - 1);
  for (std::size_t j = 0; j < gaitkit::kNumJoints; ++j) {
    std::vector<double> xs, ys;
    for (const auto& f : seq.frames) {
      xs.push_back(f[j].x);
      ys.push_back(f[j].y);
    }
    for (std::size_t i = 0; i < out_len; ++i) {
      const double t = static_cast<double>(i) * factor * span / static_cast<double>(out_len - 1);
      out.frames[i][j] = {lerp_at(xs, t), lerp_at(ys, t)};
    }
  }
  return out;
}

/// Scalar Kalman step for a random-walk-free coordinate: prior (m, p),
/// measurement z with variance r.
struct Scalar {
  double mean;
  double var;
};

inline Scalar scalar_update(Scalar prior, double z, double r) {
  const double k = prior.var / (prior.var + r);
  return {prior.mean + k * (z - prior.mean), (1.0 - k) * prior.var};
}

/// Skeleton with joints scattered inside a plausible box, well-separated
/// shoulders and a clear trunk.
inline gaitkit::Skeleton random_skeleton(gaitkit::Rng& rng) {
  gaitkit::Skeleton s;
  for (auto& k : s.joints) k = {rng.uniform(-50.0, 50.0), rng.uniform(-100.0, 100.0), rng.uniform(0.1, 1.0)};
  using gaitkit::Joint;
  s[Joint::LeftShoulder].x = rng.uniform(-30.0, -5.0);
  s[Joint::RightShoulder].x = rng.uniform(5.0, 30.0);
  s[Joint::LeftShoulder].y = rng.uniform(-80.0, -40.0);
  s[Joint::RightShoulder].y = rng.uniform(-80.0, -40.0);
  s[Joint::LeftHip].y = rng.uniform(20.0, 40.0);
  s[Joint::RightHip].y = rng.uniform(20.0, 40.0);
  return s;
}

}  // namespace oracle
