#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/skeleton.hpp"

namespace gaitkit {

struct FilterConfig {
  double min_mean_conf = 0.60;
  double feet_conf_floor = 0.50;
  int max_consec_low_feet = 3;
  std::size_t min_len = 54;
  std::size_t max_len = 900;
  double min_leg_velocity = 0.01;  // normalized units per frame

  void validate() const {
    require(min_mean_conf > 0.0 && feet_conf_floor > 0.0 && max_consec_low_feet > 0 && min_len > 0 &&
                min_leg_velocity > 0.0,
            ErrorCode::ConfigError, "filter thresholds must be positive");
    require(min_len <= max_len, ErrorCode::ConfigError, "filter min_len must not exceed max_len");
  }
};

enum class RejectReason {
  None,
  LowConfidence,
  FeetOcclusion,
  TooShort,
  TooLong,
  NotWalking,
  Degenerate,
};

inline constexpr std::array<RejectReason, 6> kRejectReasons{
    RejectReason::LowConfidence, RejectReason::FeetOcclusion, RejectReason::TooShort,
    RejectReason::TooLong,       RejectReason::NotWalking,    RejectReason::Degenerate,
};

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::None: return "None";
    case RejectReason::LowConfidence: return "LowConfidence";
    case RejectReason::FeetOcclusion: return "FeetOcclusion";
    case RejectReason::TooShort: return "TooShort";
    case RejectReason::TooLong: return "TooLong";
    case RejectReason::NotWalking: return "NotWalking";
    case RejectReason::Degenerate: return "Degenerate";
  }
  return "Unknown";
}

inline bool mean_confidence_ok(const Tracklet& t, const FilterConfig& cfg) {
  if (t.frames.empty()) return false;
  // Compensated sum, so a constant 0.6 averages to exactly 0.6.
  double sum = 0.0;
  double carry = 0.0;
  for (const auto& s : t.frames) {
    for (const auto& k : s.joints) {
      const double next = sum + k.confidence;
      carry += std::abs(sum) >= std::abs(k.confidence) ? (sum - next) + k.confidence : (k.confidence - next) + sum;
      sum = next;
    }
  }
  const double mean = (sum + carry) / static_cast<double>(t.frames.size() * kNumJoints);
  return mean > cfg.min_mean_conf;
}

/// Feet confidence is the mean of both ankle confidences.
inline bool feet_visibility_ok(const Tracklet& t, const FilterConfig& cfg) {
  int run = 0;
  for (const auto& s : t.frames) {
    const double feet = (s[Joint::LeftAnkle].confidence + s[Joint::RightAnkle].confidence) / 2.0;
    run = feet < cfg.feet_conf_floor ? run + 1 : 0;
    if (run > cfg.max_consec_low_feet) return false;
  }
  return true;
}

inline bool length_ok(const Tracklet& t, const FilterConfig& cfg) {
  return t.size() >= cfg.min_len && t.size() <= cfg.max_len;
}

inline constexpr std::array<std::size_t, 4> kLegJoints{index(Joint::LeftKnee), index(Joint::RightKnee),
                                                       index(Joint::LeftAnkle), index(Joint::RightAnkle)};

/// Mean over consecutive frame pairs of the mean knee/ankle displacement.
inline double leg_velocity(const NormalizedSequence& ns) {
  require(ns.size() >= 2, ErrorCode::TooShort, "leg_velocity needs at least 2 frames");
  double total = 0.0;
  for (std::size_t t = 1; t < ns.size(); ++t) {
    double frame = 0.0;
    for (const auto j : kLegJoints) {
      frame += std::hypot(ns.frames[t][j].x - ns.frames[t - 1][j].x, ns.frames[t][j].y - ns.frames[t - 1][j].y);
    }
    total += frame / static_cast<double>(kLegJoints.size());
  }
  return total / static_cast<double>(ns.size() - 1);
}

inline bool walking_ok(const NormalizedSequence& ns, const FilterConfig& cfg) {
  return leg_velocity(ns) >= cfg.min_leg_velocity;
}

struct FilterVerdict {
  std::int64_t track_id = 0;
  bool passed = false;
  RejectReason reason = RejectReason::None;

  friend bool operator==(const FilterVerdict&, const FilterVerdict&) = default;
};

/// Applies length, mean confidence, feet visibility, normalization and the
/// walking check in that order; the first failure names the reason.
inline FilterVerdict run_filters(const Tracklet& t, const FilterConfig& cfg) {
  FilterVerdict v{t.track_id, false, RejectReason::None};
  if (t.size() < cfg.min_len) {
    v.reason = RejectReason::TooShort;
    return v;
  }
  if (t.size() > cfg.max_len) {
    v.reason = RejectReason::TooLong;
    return v;
  }
  if (!mean_confidence_ok(t, cfg)) {
    v.reason = RejectReason::LowConfidence;
    return v;
  }
  if (!feet_visibility_ok(t, cfg)) {
    v.reason = RejectReason::FeetOcclusion;
    return v;
  }
  NormalizedSequence ns;
  try {
    ns = normalize_tracklet(t);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateTracklet) throw;
    v.reason = RejectReason::Degenerate;
    return v;
  }
  if (ns.size() < 2 || !walking_ok(ns, cfg)) {
    v.reason = RejectReason::NotWalking;
    return v;
  }
  v.passed = true;
  return v;
}

struct FilterReport {
  std::vector<FilterVerdict> verdicts;
  std::size_t passed = 0;
  std::map<RejectReason, std::size_t> rejected;

  std::size_t total() const { return verdicts.size(); }
};

inline FilterReport run_filters(const std::vector<Tracklet>& tracks, const FilterConfig& cfg) {
  cfg.validate();
  FilterReport report;
  for (const auto r : kRejectReasons) report.rejected[r] = 0;
  for (const auto& t : tracks) {
    auto v = run_filters(t, cfg);
    if (v.passed) {
      ++report.passed;
    } else {
      ++report.rejected[v.reason];
    }
    report.verdicts.push_back(v);
  }
  return report;
}

}  // namespace gaitkit
