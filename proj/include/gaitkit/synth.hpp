#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/rng.hpp"
#include "gaitkit/skeleton.hpp"

namespace gaitkit {

/// Body and gait parameters of one synthetic identity. Lengths are pixels,
/// angles radians.
struct WalkerParams {
  double gait_hz = 1.0;
  double direction = 1.0;  // +1 walks right, -1 walks left
  double speed = 1.0;      // px / frame
  double origin_x = 200.0;
  double origin_y = 300.0;
  double trunk = 40.0;
  double thigh = 30.0;
  double shank = 30.0;
  double upper_arm = 22.0;
  double forearm = 20.0;
  double head = 15.0;
  double head_forward = 2.0;
  double shoulder_half = 10.0;
  double hip_half = 6.0;
  double lean = 0.05;
  double bob = 2.0;
  double hip_swing = 0.35;
  double knee_flex = 0.6;
  double knee_phase = 0.5;
  double arm_swing = 0.3;
  double arm_phase = 0.0;
  double elbow_bend = 0.3;
  double shoulder_sway = 1.5;

  friend bool operator==(const WalkerParams&, const WalkerParams&) = default;
};

struct SyntheticTrack {
  std::int64_t label = 0;
  std::size_t run = 0;
  WalkerParams walker;  // parameters this run was rendered with
  double phase0 = 0.0;  // gait phase at frame 0
  Tracklet tracklet;
};

/// Body parameters are drawn from the middle `spread` fraction of their ranges;
/// gait frequency always spans [0.8, 1.4] Hz.
inline WalkerParams sample_walker(Rng& rng, double spread = 1.0, double height_scale = 1.0) {
  WalkerParams w;
  auto draw = [&](double lo, double hi) {
    const double mid = (lo + hi) / 2.0;
    const double half = (hi - lo) / 2.0 * spread;
    return rng.uniform(mid - half, mid + half);
  };
  const double height = draw(100.0, 150.0) * height_scale;
  w.gait_hz = rng.uniform(0.8, 1.4);
  w.direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
  w.origin_x = draw(150.0, 400.0);
  w.origin_y = draw(250.0, 450.0);
  w.trunk = height * draw(0.27, 0.35);
  w.thigh = height * draw(0.21, 0.28);
  w.shank = height * draw(0.21, 0.28);
  w.upper_arm = height * draw(0.15, 0.21);
  w.forearm = height * draw(0.13, 0.19);
  w.head = height * draw(0.09, 0.14);
  w.head_forward = height * draw(0.0, 0.05);
  w.shoulder_half = height * draw(0.06, 0.12);
  w.hip_half = height * draw(0.035, 0.08);
  w.lean = draw(-0.05, 0.15);
  w.bob = height * draw(0.005, 0.03);
  w.hip_swing = draw(0.25, 0.5);
  w.knee_flex = draw(0.3, 0.9);
  w.knee_phase = draw(0.0, 1.2);
  w.arm_swing = draw(0.1, 0.5);
  w.arm_phase = draw(-0.4, 0.4);
  w.elbow_bend = draw(0.1, 0.6);
  w.shoulder_sway = height * draw(0.0, 0.02);
  // Two steps per gait cycle, each covering roughly the leg's swing chord.
  w.speed = 2.0 * (w.thigh + w.shank) * std::sin(w.hip_swing) * 2.0 * w.gait_hz / 24.0;
  return w;
}

/// Noise-free joint positions at gait phase `phase` with the pelvis at `pelvis`.
inline Skeleton walker_pose(const WalkerParams& w, double phase, Point2 pelvis) {
  const double d = w.direction;
  Skeleton s;
  auto set = [&](Joint j, double x, double y) { s[j] = {x, y, 1.0}; };
  const Point2 pel{pelvis.x, pelvis.y - w.bob * std::cos(2.0 * phase)};
  const Point2 neck{pel.x + d * w.lean * w.trunk, pel.y - w.trunk};

  const Point2 lhip{pel.x - w.hip_half, pel.y};
  const Point2 rhip{pel.x + w.hip_half, pel.y};
  auto leg = [&](Point2 hip, double ph, Joint knee, Joint ankle) {
    const double swing = w.hip_swing * std::sin(ph);
    const double flex = w.knee_flex * std::max(0.0, std::sin(ph + w.knee_phase));
    const Point2 k{hip.x + d * w.thigh * std::sin(swing), hip.y + w.thigh * std::cos(swing)};
    set(knee, k.x, k.y);
    set(ankle, k.x + d * w.shank * std::sin(swing - flex), k.y + w.shank * std::cos(swing - flex));
  };
  set(Joint::LeftHip, lhip.x, lhip.y);
  set(Joint::RightHip, rhip.x, rhip.y);
  leg(lhip, phase, Joint::LeftKnee, Joint::LeftAnkle);
  leg(rhip, phase + std::numbers::pi, Joint::RightKnee, Joint::RightAnkle);

  const double sway = w.shoulder_sway * std::sin(phase);
  const Point2 lsh{neck.x - w.shoulder_half, neck.y + sway};
  const Point2 rsh{neck.x + w.shoulder_half, neck.y - sway};
  auto arm = [&](Point2 sh, double ph, Joint sj, Joint elbow, Joint wrist) {
    set(sj, sh.x, sh.y);
    const double swing = w.arm_swing * std::sin(ph);
    const Point2 e{sh.x + d * w.upper_arm * std::sin(swing), sh.y + w.upper_arm * std::cos(swing)};
    set(elbow, e.x, e.y);
    const double fore = swing + w.elbow_bend;
    set(wrist, e.x + d * w.forearm * std::sin(fore), e.y + w.forearm * std::cos(fore));
  };
  // Arms swing against the leg on the same side.
  arm(lsh, phase + std::numbers::pi + w.arm_phase, Joint::LeftShoulder, Joint::LeftElbow, Joint::LeftWrist);
  arm(rsh, phase + w.arm_phase, Joint::RightShoulder, Joint::RightElbow, Joint::RightWrist);

  const Point2 nose{neck.x + d * w.head_forward, neck.y - w.head};
  set(Joint::Nose, nose.x, nose.y);
  const double eye = 0.2 * w.head;
  set(Joint::LeftEye, nose.x - 0.5 * eye, nose.y - 0.5 * eye);
  set(Joint::RightEye, nose.x + 0.5 * eye, nose.y - 0.5 * eye);
  set(Joint::LeftEar, nose.x - eye - d * 0.3 * eye, nose.y - 0.2 * eye);
  set(Joint::RightEar, nose.x + eye - d * 0.3 * eye, nose.y - 0.2 * eye);
  return s;
}

struct SynthConfig {
  double fps = 24.0;
  double spread = 1.0;        // fraction of each body-parameter range identities are drawn from
  double height_scale = 1.0;  // multiplies the 100-150 px body height
  bool alternate_direction = false;  // odd runs walk the opposite way, as when pacing back and forth
  double noise_correlation = 0.0;    // AR(1) coefficient of each joint's noise; its marginal sigma stays 1 px

  /// Distant walkers pacing back and forth under slowly drifting keypoint
  /// noise; an untrained network does not separate them.
  static SynthConfig benchmark() {
    SynthConfig c;
    c.height_scale = 0.4;
    c.alternate_direction = true;
    c.noise_correlation = 0.85;
    return c;
  }

  void validate() const {
    require(fps > 0.0, ErrorCode::InvalidArgument, "fps must be > 0");
    require(spread >= 0.0 && spread <= 1.0, ErrorCode::InvalidArgument, "spread must be in [0, 1]");
    require(height_scale > 0.0, ErrorCode::InvalidArgument, "height_scale must be > 0");
    require(noise_correlation >= 0.0 && noise_correlation < 1.0, ErrorCode::InvalidArgument,
            "noise_correlation must be in [0, 1)");
  }
};

/// Noise-free pose of `w` at frame `f` of a walk that starts at `phase0`.
inline Skeleton walker_frame(const WalkerParams& w, double phase0, std::size_t f, double fps = 24.0) {
  const double t = static_cast<double>(f);
  const double phase = phase0 + 2.0 * std::numbers::pi * w.gait_hz * t / fps;
  return walker_pose(w, phase, {w.origin_x + w.direction * w.speed * t, w.origin_y});
}

/// Parametric 2-D walkers. Runs of one identity share every body and gait
/// parameter and differ in observation noise (sigma 1 px, white unless
/// `noise_correlation` is set), the phase at which the walk starts and, with
/// `alternate_direction`, the walking direction.
/// Confidences are drawn from [0.85, 0.95].
inline std::vector<SyntheticTrack> generate_synthetic_walkers(std::size_t n_ids, std::size_t runs_per_id,
                                                              std::size_t frames, std::uint64_t seed,
                                                              const SynthConfig& cfg = {}) {
  require(frames > 0, ErrorCode::InvalidArgument, "frames must be > 0");
  cfg.validate();
  const Rng root(seed, 0x73796e7468ULL);
  std::vector<SyntheticTrack> out;
  out.reserve(n_ids * runs_per_id);
  for (std::size_t id = 0; id < n_ids; ++id) {
    Rng id_rng = root.derive(id);
    const WalkerParams w = sample_walker(id_rng, cfg.spread, cfg.height_scale);
    for (std::size_t run = 0; run < runs_per_id; ++run) {
      Rng run_rng = id_rng.derive(run + 1);
      SyntheticTrack st;
      st.label = static_cast<std::int64_t>(id);
      st.run = run;
      st.walker = w;
      if (cfg.alternate_direction && run % 2 == 1) st.walker.direction = -w.direction;
      st.phase0 = run_rng.uniform(0.0, 2.0 * std::numbers::pi);
      st.tracklet.track_id = static_cast<std::int64_t>(id * runs_per_id + run);
      st.tracklet.camera = "synthetic";
      st.tracklet.fps = cfg.fps;
      st.tracklet.start_frame = 0;
      st.tracklet.frames.reserve(frames);
      const double rho = cfg.noise_correlation;
      const double innovation = std::sqrt(1.0 - rho * rho);
      std::array<Point2, kNumJoints> noise{};
      for (std::size_t f = 0; f < frames; ++f) {
        st.tracklet.frames.push_back(walker_frame(st.walker, st.phase0, f, cfg.fps));
        for (std::size_t j = 0; j < kNumJoints; ++j) {
          auto& e = noise[j];
          const double nx = run_rng.normal();
          const double ny = run_rng.normal();
          e = f == 0 ? Point2{nx, ny} : Point2{rho * e.x + innovation * nx, rho * e.y + innovation * ny};
          auto& k = st.tracklet.frames.back().joints[j];
          k.x += e.x;
          k.y += e.y;
          k.confidence = run_rng.uniform(0.85, 0.95);
        }
      }
      out.push_back(std::move(st));
    }
  }
  return out;
}

}  // namespace gaitkit
