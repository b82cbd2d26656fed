#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gaitkit/error.hpp"

namespace gaitkit {

inline constexpr std::size_t kNumJoints = 17;

// COCO-17 ordering.
enum class Joint : std::uint8_t {
  Nose = 0,
  LeftEye,
  RightEye,
  LeftEar,
  RightEar,
  LeftShoulder,
  RightShoulder,
  LeftElbow,
  RightElbow,
  LeftWrist,
  RightWrist,
  LeftHip,
  RightHip,
  LeftKnee,
  RightKnee,
  LeftAnkle,
  RightAnkle,
};

constexpr std::size_t index(Joint j) { return static_cast<std::size_t>(j); }

/// Left/right joint pairs, used by mirroring.
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 8> kLeftRightPairs{{
    {1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16},
}};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Skeleton {
  std::array<Keypoint, kNumJoints> joints{};

  const Keypoint& operator[](Joint j) const { return joints[index(j)]; }
  Keypoint& operator[](Joint j) { return joints[index(j)]; }

  bool valid() const {
    return std::all_of(joints.begin(), joints.end(), [](const Keypoint& k) {
      return std::isfinite(k.x) && std::isfinite(k.y) && k.confidence >= 0.0 && k.confidence <= 1.0;
    });
  }

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

/// Pelvis and neck are synthesized as hip and shoulder midpoints since COCO-17
/// has neither joint.
struct DerivedJoints {
  Point2 pelvis;
  Point2 neck;
  double shoulder_width = 0.0;
  double trunk_length = 0.0;
};

struct Tracklet {
  std::int64_t track_id = 0;
  std::string camera;
  double fps = 24.0;
  std::int64_t start_frame = 0;
  std::vector<Skeleton> frames;

  std::size_t size() const { return frames.size(); }

  void validate() const {
    require(!frames.empty(), ErrorCode::InvalidArgument, "tracklet has no frames");
    require(fps > 0.0 && std::isfinite(fps), ErrorCode::InvalidArgument, "tracklet fps must be > 0");
    require(start_frame >= 0, ErrorCode::InvalidArgument, "tracklet start_frame must be >= 0");
    for (const auto& s : frames) {
      require(s.valid(), ErrorCode::InvalidArgument, "tracklet contains an invalid keypoint");
    }
  }

  friend bool operator==(const Tracklet&, const Tracklet&) = default;
};

/// One normalized frame: 17 (x, y) pairs, unitless.
using Pose = std::array<Point2, kNumJoints>;

struct NormalizedSequence {
  std::vector<Pose> frames;
  std::int64_t source_track_id = 0;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  friend bool operator==(const NormalizedSequence&, const NormalizedSequence&) = default;
};

inline DerivedJoints derived_joints(const Skeleton& s) {
  const auto& ls = s[Joint::LeftShoulder];
  const auto& rs = s[Joint::RightShoulder];
  const auto& lh = s[Joint::LeftHip];
  const auto& rh = s[Joint::RightHip];
  DerivedJoints d;
  d.pelvis = {(lh.x + rh.x) / 2.0, (lh.y + rh.y) / 2.0};
  d.neck = {(ls.x + rs.x) / 2.0, (ls.y + rs.y) / 2.0};
  d.shoulder_width = std::abs(rs.x - ls.x);
  d.trunk_length = std::abs(d.neck.y - d.pelvis.y);
  return d;
}

/// Zero-centres on the pelvis, divides x by the shoulder width and y by the
/// neck-pelvis distance. A per-frame denominator below 10% of its fallback is
/// replaced by the fallback.
inline Pose normalize_skeleton(const Skeleton& s, double fallback_width, double fallback_trunk) {
  require(fallback_width > 0.0 && fallback_trunk > 0.0, ErrorCode::InvalidArgument,
          "normalization fallbacks must be > 0");
  const DerivedJoints d = derived_joints(s);
  const double w = d.shoulder_width >= 0.1 * fallback_width ? d.shoulder_width : fallback_width;
  const double l = d.trunk_length >= 0.1 * fallback_trunk ? d.trunk_length : fallback_trunk;
  Pose out;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    out[j] = {(s.joints[j].x - d.pelvis.x) / w, (s.joints[j].y - d.pelvis.y) / l};
  }
  return out;
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

}  // namespace detail

inline NormalizedSequence normalize_tracklet(const Tracklet& t) {
  t.validate();
  std::vector<double> widths;
  std::vector<double> trunks;
  widths.reserve(t.size());
  trunks.reserve(t.size());
  for (const auto& s : t.frames) {
    const auto d = derived_joints(s);
    widths.push_back(d.shoulder_width);
    trunks.push_back(d.trunk_length);
  }
  const double med_w = detail::median(std::move(widths));
  const double med_l = detail::median(std::move(trunks));
  if (!(med_w >= 1.0) || !(med_l >= 1.0)) {
    fail(ErrorCode::DegenerateTracklet,
         "track " + std::to_string(t.track_id) + " has median shoulder width or trunk length below 1 px");
  }
  NormalizedSequence ns;
  ns.source_track_id = t.track_id;
  ns.frames.reserve(t.size());
  for (const auto& s : t.frames) ns.frames.push_back(normalize_skeleton(s, med_w, med_l));
  return ns;
}

/// Lifts normalized coordinates back into a Skeleton (confidence 1) so they
/// can be fed through pixel-space operations again.
inline Skeleton to_skeleton(const Pose& p, double confidence = 1.0) {
  Skeleton s;
  for (std::size_t j = 0; j < kNumJoints; ++j) s.joints[j] = {p[j].x, p[j].y, confidence};
  return s;
}

}  // namespace gaitkit
