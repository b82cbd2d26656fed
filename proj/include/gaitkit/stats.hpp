#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/skeleton.hpp"

namespace gaitkit {

struct HistogramBin {
  std::size_t start_frames = 0;  // inclusive
  std::size_t end_frames = 0;    // exclusive
  std::size_t count = 0;
};

struct DatasetStats {
  std::size_t id_count = 0;
  std::size_t total_frames = 0;
  double total_walk_hours = 0.0;
  double avg_run_length = 0.0;
  std::vector<HistogramBin> histogram;
};

/// Every tracklet counts as one identity. Histogram bins are
/// [k * bin_width, (k + 1) * bin_width) up to the last non-empty bin.
inline DatasetStats dataset_stats(const std::vector<Tracklet>& store, double fps, std::size_t bin_width = 24) {
  require(fps > 0.0, ErrorCode::InvalidArgument, "fps must be > 0");
  require(bin_width > 0, ErrorCode::InvalidArgument, "bin width must be > 0");
  DatasetStats s;
  s.id_count = store.size();
  std::size_t longest = 0;
  for (const auto& t : store) {
    s.total_frames += t.size();
    longest = std::max(longest, t.size());
  }
  if (store.empty()) return s;
  s.total_walk_hours = static_cast<double>(s.total_frames) / fps / 3600.0;
  s.avg_run_length = static_cast<double>(s.total_frames) / static_cast<double>(store.size());
  const std::size_t bins = longest / bin_width + 1;
  for (std::size_t b = 0; b < bins; ++b) s.histogram.push_back({b * bin_width, (b + 1) * bin_width, 0});
  for (const auto& t : store) ++s.histogram[t.size() / bin_width].count;
  return s;
}

}  // namespace gaitkit
