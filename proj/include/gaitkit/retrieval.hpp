#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/model.hpp"

namespace gaitkit {

struct Embeddings {
  Mat<double> vectors;  // one row per item
  std::vector<std::int64_t> labels;

  std::size_t size() const { return labels.size(); }
};

struct ProbeMatch {
  std::size_t probe = 0;
  std::size_t nearest_gallery = 0;
  std::int64_t probe_label = 0;
  std::int64_t gallery_label = 0;
  double similarity = 0.0;
};

struct RetrievalResult {
  double rank1 = 0.0;
  double rank5 = 0.0;
  std::vector<ProbeMatch> nearest;
};

namespace detail {

inline void check_embeddings(const Embeddings& e, const char* what) {
  require(static_cast<std::size_t>(e.vectors.rows()) == e.labels.size(), ErrorCode::ShapeMismatch,
          std::string(what) + ": one label per embedding row is required");
}

inline double cosine(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

/// Gallery indices by descending cosine similarity; ties go to the lower index.
inline std::vector<std::size_t> ranked_gallery(const Embeddings& gallery, const Eigen::RowVectorXd& probe,
                                               std::vector<double>& sims) {
  const auto n = gallery.size();
  sims.resize(n);
  for (std::size_t g = 0; g < n; ++g) sims[g] = cosine(gallery.vectors.row(static_cast<Eigen::Index>(g)), probe);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  return order;
}

}  // namespace detail

/// Fraction of probes whose k most similar gallery entries include their label.
inline double rank_k(const Embeddings& gallery, const Embeddings& probe, std::size_t k) {
  detail::check_embeddings(gallery, "gallery");
  detail::check_embeddings(probe, "probe");
  require(gallery.size() > 0, ErrorCode::EmptyGallery, "gallery is empty");
  require(k >= 1, ErrorCode::InvalidArgument, "k must be >= 1");
  require(probe.vectors.cols() == gallery.vectors.cols() || probe.size() == 0, ErrorCode::ShapeMismatch,
          "gallery and probe dimensions differ");
  if (probe.size() == 0) return 0.0;
  std::size_t hits = 0;
  std::vector<double> sims;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const auto order = detail::ranked_gallery(gallery, probe.vectors.row(static_cast<Eigen::Index>(p)), sims);
    const std::size_t top = std::min(k, order.size());
    for (std::size_t r = 0; r < top; ++r) {
      if (gallery.labels[order[r]] == probe.labels[p]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(probe.size());
}

inline RetrievalResult evaluate_retrieval(const Embeddings& gallery, const Embeddings& probe) {
  RetrievalResult r;
  r.rank1 = rank_k(gallery, probe, 1);
  r.rank5 = rank_k(gallery, probe, 5);
  std::vector<double> sims;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const auto order = detail::ranked_gallery(gallery, probe.vectors.row(static_cast<Eigen::Index>(p)), sims);
    r.nearest.push_back({p, order.front(), probe.labels[p], gallery.labels[order.front()], sims[order.front()]});
  }
  return r;
}

}  // namespace gaitkit
