#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/skeleton.hpp"

namespace gaitkit {

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Axis-aligned bounds over joints with confidence >= 0.05, or over all joints
/// when none qualifies.
inline BBox skeleton_bbox(const Skeleton& s, double min_confidence = 0.05) {
  BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  bool any = false;
  for (const auto& k : s.joints) {
    if (k.confidence < min_confidence) continue;
    any = true;
    b.x_min = std::min(b.x_min, k.x);
    b.y_min = std::min(b.y_min, k.y);
    b.x_max = std::max(b.x_max, k.x);
    b.y_max = std::max(b.y_max, k.y);
  }
  if (!any) return skeleton_bbox(s, -1.0);
  return b;
}

struct Detection {
  std::int64_t frame_idx = 0;
  Skeleton skeleton;
  BBox bbox;

  static Detection from_skeleton(std::int64_t frame_idx, const Skeleton& s) {
    return Detection{frame_idx, s, skeleton_bbox(s)};
  }
};

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat47 = Eigen::Matrix<double, 4, 7>;

namespace kalman {

// Boxes are degenerate when every joint is collinear; keep the measurement finite.
inline constexpr double kMinSide = 1e-3;

/// (cx, cy, area, aspect) measurement of a box.
inline Vec4 measure(const BBox& b) {
  const double w = std::max(b.width(), kMinSide);
  const double h = std::max(b.height(), kMinSide);
  Vec4 z;
  z << b.x_min + b.width() / 2.0, b.y_min + b.height() / 2.0, w * h, w / h;
  return z;
}

inline Mat7 transition() {
  Mat7 f = Mat7::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

inline Mat47 observation() {
  Mat47 h = Mat47::Zero();
  h.leftCols<4>().setIdentity();
  return h;
}

inline Mat7 process_noise() {
  Mat7 q = Mat7::Identity();
  q(6, 6) *= 0.01;
  q.bottomRightCorner<3, 3>() *= 0.01;
  return q;
}

inline Mat4 measurement_noise() {
  Mat4 r = Mat4::Identity();
  r.bottomRightCorner<2, 2>() *= 10.0;
  return r;
}

}  // namespace kalman

struct TrackState {
  Vec7 mean = Vec7::Zero();  // cx, cy, area, aspect, vcx, vcy, varea
  Mat7 covariance = Mat7::Identity();
  int age = 0;
  int time_since_update = 0;
  int hit_streak = 0;
  std::int64_t track_id = -1;

  static TrackState from_bbox(const BBox& b) {
    TrackState ts;
    ts.mean.head<4>() = kalman::measure(b);
    ts.covariance = Mat7::Identity();
    ts.covariance.bottomRightCorner<3, 3>() *= 1000.0;  // velocities unobserved
    ts.covariance *= 10.0;
    ts.hit_streak = 1;
    return ts;
  }

  BBox bbox() const {
    const double area = std::max(mean(2), 0.0);
    const double aspect = std::max(mean(3), 1e-6);
    const double w = std::sqrt(area * aspect);
    const double h = w > 0.0 ? area / w : 0.0;
    return {mean(0) - w / 2.0, mean(1) - h / 2.0, mean(0) + w / 2.0, mean(1) + h / 2.0};
  }
};

inline TrackState predict(TrackState ts) {
  if (ts.mean(2) + ts.mean(6) <= 0.0) ts.mean(6) = 0.0;
  static const Mat7 f = kalman::transition();
  static const Mat7 q = kalman::process_noise();
  ts.mean = f * ts.mean;
  Mat7 p = f * ts.covariance * f.transpose() + q;
  ts.covariance = (p + p.transpose()) / 2.0;
  ++ts.age;
  if (ts.time_since_update > 0) ts.hit_streak = 0;
  ++ts.time_since_update;
  return ts;
}

/// Joseph-form update, which keeps the covariance symmetric PSD under rounding.
inline TrackState update(TrackState ts, const Detection& d) {
  static const Mat47 h = kalman::observation();
  static const Mat4 r = kalman::measurement_noise();
  const Vec4 z = kalman::measure(d.bbox);
  const Vec4 innovation = z - h * ts.mean;
  const Mat4 s = h * ts.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 7, 4> k = ts.covariance * h.transpose() * s.inverse();
  ts.mean += k * innovation;
  const Mat7 i_kh = Mat7::Identity() - k * h;
  Mat7 p = i_kh * ts.covariance * i_kh.transpose() + k * r * k.transpose();
  ts.covariance = (p + p.transpose()) / 2.0;
  ts.mean(3) = std::max(ts.mean(3), 1e-6);
  ts.time_since_update = 0;
  ++ts.hit_streak;
  return ts;
}

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, detection)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

namespace detail {

/// Minimum-cost assignment for a rows <= cols cost matrix (Kuhn-Munkres with
/// potentials, O(rows^2 * cols)). Returns the column chosen for each row.
inline std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost[0].size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<bool> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

inline constexpr std::size_t kMaxExactAssignmentTracks = 64;

/// One-to-one assignment maximizing total IoU; exact up to 64 tracks, greedy
/// by descending IoU above that. Pairs below `iou_threshold` are returned as
/// unmatched on both sides.
inline Assignment associate(const std::vector<BBox>& tracks, const std::vector<Detection>& dets,
                            double iou_threshold) {
  require(iou_threshold >= 0.0 && iou_threshold <= 1.0, ErrorCode::InvalidArgument,
          "iou_threshold must be in [0, 1]");
  Assignment out;
  const std::size_t nt = tracks.size();
  const std::size_t nd = dets.size();
  std::vector<std::vector<double>> ious(nt, std::vector<double>(nd, 0.0));
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t j = 0; j < nd; ++j) ious[i][j] = iou(tracks[i], dets[j].bbox);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (nt > 0 && nd > 0) {
    if (nt <= kMaxExactAssignmentTracks) {
      const bool transpose = nt > nd;
      const std::size_t rows = transpose ? nd : nt;
      const std::size_t cols = transpose ? nt : nd;
      std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) cost[r][c] = -(transpose ? ious[c][r] : ious[r][c]);
      const auto assign = detail::hungarian(cost);
      for (std::size_t r = 0; r < rows; ++r)
        pairs.emplace_back(transpose ? assign[r] : r, transpose ? r : assign[r]);
    } else {
      std::vector<std::pair<std::size_t, std::size_t>> all;
      for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < nd; ++j) all.emplace_back(i, j);
      std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
        return ious[a.first][a.second] > ious[b.first][b.second];
      });
      std::vector<bool> track_used(nt, false), det_used(nd, false);
      for (const auto& [i, j] : all) {
        if (track_used[i] || det_used[j]) continue;
        track_used[i] = det_used[j] = true;
        pairs.emplace_back(i, j);
      }
    }
  }

  std::vector<bool> track_matched(nt, false), det_matched(nd, false);
  for (const auto& [i, j] : pairs) {
    if (ious[i][j] < iou_threshold || ious[i][j] <= 0.0) continue;
    out.matches.emplace_back(i, j);
    track_matched[i] = det_matched[j] = true;
  }
  std::sort(out.matches.begin(), out.matches.end());
  for (std::size_t i = 0; i < nt; ++i)
    if (!track_matched[i]) out.unmatched_tracks.push_back(i);
  for (std::size_t j = 0; j < nd; ++j)
    if (!det_matched[j]) out.unmatched_detections.push_back(j);
  return out;
}

struct TrackerConfig {
  double iou_threshold = 0.3;
  int max_age = 8;
  int min_hits = 3;
  double fps = 24.0;
  std::string camera = "cam0";
};

/// Detections observed in one frame.
struct DetectionFrame {
  std::int64_t frame_idx = 0;
  std::vector<Detection> detections;
};

/// Stateful single-stream SORT tracker. Feed frames in increasing order, then
/// call finish() to collect the tracklets.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) {
    require(cfg_.max_age >= 0 && cfg_.min_hits >= 1, ErrorCode::InvalidArgument, "invalid tracker config");
    require(cfg_.fps > 0.0, ErrorCode::InvalidArgument, "tracker fps must be > 0");
  }

  void step(const DetectionFrame& frame) {
    if (last_frame_ && frame.frame_idx <= *last_frame_) {
      fail(ErrorCode::NonMonotonicFrames, "frame " + std::to_string(frame.frame_idx) + " follows frame " +
                                              std::to_string(*last_frame_));
    }
    if (last_frame_) {
      // Frames with no input record are empty frames.
      for (std::int64_t f = *last_frame_ + 1; f < frame.frame_idx; ++f) advance({f, {}});
    }
    advance(frame);
    last_frame_ = frame.frame_idx;
  }

  std::vector<Tracklet> finish() {
    for (auto& t : live_) retire(std::move(t));
    live_.clear();
    std::sort(done_.begin(), done_.end(),
              [](const Tracklet& a, const Tracklet& b) { return a.track_id < b.track_id; });
    return std::move(done_);
  }

 private:
  struct LiveTrack {
    TrackState state;
    std::int64_t first_frame = 0;
    // (frame index, skeleton) for every associated detection.
    std::vector<std::pair<std::int64_t, Skeleton>> observations;
    bool confirmed = false;
  };

  void advance(const DetectionFrame& frame) {
    std::vector<BBox> predicted;
    predicted.reserve(live_.size());
    for (auto& t : live_) {
      t.state = predict(t.state);
      predicted.push_back(t.state.bbox());
    }
    const Assignment a = associate(predicted, frame.detections, cfg_.iou_threshold);
    for (const auto& [ti, di] : a.matches) {
      auto& t = live_[ti];
      t.state = update(t.state, frame.detections[di]);
      t.observations.emplace_back(frame.frame_idx, frame.detections[di].skeleton);
      confirm_if_ready(t);
    }
    for (const auto di : a.unmatched_detections) {
      LiveTrack t;
      t.state = TrackState::from_bbox(frame.detections[di].bbox);
      t.first_frame = frame.frame_idx;
      t.observations.emplace_back(frame.frame_idx, frame.detections[di].skeleton);
      confirm_if_ready(t);
      live_.push_back(std::move(t));
    }
    std::vector<LiveTrack> keep;
    keep.reserve(live_.size());
    for (auto& t : live_) {
      if (t.state.time_since_update > cfg_.max_age) {
        retire(std::move(t));
      } else {
        keep.push_back(std::move(t));
      }
    }
    live_ = std::move(keep);
  }

  void confirm_if_ready(LiveTrack& t) {
    if (!t.confirmed && t.state.hit_streak >= cfg_.min_hits) {
      t.confirmed = true;
      t.state.track_id = next_id_++;
    }
  }

  void retire(LiveTrack&& t) {
    if (!t.confirmed || t.observations.empty()) return;
    Tracklet out;
    out.track_id = t.state.track_id;
    out.camera = cfg_.camera;
    out.fps = cfg_.fps;
    out.start_frame = t.observations.front().first;
    // Gaps between observations repeat the last observed skeleton.
    for (std::size_t i = 0; i < t.observations.size(); ++i) {
      if (i > 0) {
        for (auto f = t.observations[i - 1].first + 1; f < t.observations[i].first; ++f)
          out.frames.push_back(t.observations[i - 1].second);
      }
      out.frames.push_back(t.observations[i].second);
    }
    done_.push_back(std::move(out));
  }

  TrackerConfig cfg_;
  std::vector<LiveTrack> live_;
  std::vector<Tracklet> done_;
  std::optional<std::int64_t> last_frame_;
  std::int64_t next_id_ = 0;
};

inline std::vector<Tracklet> track_stream(const std::vector<DetectionFrame>& frames, const TrackerConfig& cfg) {
  Tracker tracker(cfg);
  for (const auto& f : frames) tracker.step(f);
  return tracker.finish();
}

}  // namespace gaitkit
