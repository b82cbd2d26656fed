#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/model.hpp"

namespace gaitkit {

struct LossConfig {
  double temperature = 0.01;
};

template <class S>
struct LossResult {
  S loss = S(0);
  Mat<S> grad;  // N x D, d(loss)/d(embeddings)
};

namespace detail {

template <class S>
void check_supcon_batch(const Mat<S>& z, const std::vector<std::int64_t>& labels, const LossConfig& cfg,
                        bool check_norms) {
  require(cfg.temperature > 0.0, ErrorCode::InvalidArgument, "temperature must be > 0");
  require(z.rows() >= 2, ErrorCode::InvalidArgument, "supcon needs at least 2 embeddings");
  require(static_cast<std::size_t>(z.rows()) == labels.size(), ErrorCode::ShapeMismatch,
          "one label per embedding row is required");
  std::map<std::int64_t, int> counts;
  for (const auto l : labels) ++counts[l];
  for (const auto& [label, count] : counts)
    require(count >= 2, ErrorCode::NoPositive, "label " + std::to_string(label) + " has no positive in the batch");
  if (check_norms) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double norm = static_cast<double>(z.row(i).norm());
      require(std::abs(norm - 1.0) <= 1e-5, ErrorCode::InvalidArgument, "embedding rows must be unit norm");
    }
  }
}

}  // namespace detail

/// Supervised contrastive loss (positives averaged outside the log):
///   L = 1/N sum_i -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau) )
/// The gradient is with respect to the raw rows of z. Each anchor's
/// log-sum-exp is evaluated as max + log1p(rest), so the loss stays positive
/// even when one logit dominates by far.
template <class S>
LossResult<S> supcon_loss_unchecked(const Mat<S>& z, const std::vector<std::int64_t>& labels, const LossConfig& cfg) {
  const Eigen::Index n = z.rows();
  const S inv_tau = S(1) / static_cast<S>(cfg.temperature);
  const Mat<S> logits = (z * z.transpose()) * inv_tau;
  Mat<S> g = Mat<S>::Zero(n, n);  // d(loss)/d(logit_ia)
  S total = S(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg = -1;
    S m = -std::numeric_limits<S>::infinity();
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i && logits(i, a) > m) {
        m = logits(i, a);
        arg = a;
      }
    }
    S rest = S(0);
    for (Eigen::Index a = 0; a < n; ++a)
      if (a != i && a != arg) rest += std::exp(logits(i, a) - m);
    const S log_denominator = std::log1p(rest);  // LSE - m
    const S denominator = S(1) + rest;

    S positives = S(0);
    S anchor = S(0);
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p == i || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(i)]) continue;
      positives += S(1);
      anchor += log_denominator + (m - logits(i, p));
    }
    anchor /= positives;
    total += anchor;

    for (Eigen::Index a = 0; a < n; ++a) {
      if (a == i) continue;
      const S softmax = std::exp(logits(i, a) - m) / denominator;
      const bool positive = labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(i)];
      g(i, a) = (softmax - (positive ? S(1) / positives : S(0))) / static_cast<S>(n);
    }
  }
  LossResult<S> out;
  out.loss = total / static_cast<S>(n);
  out.grad = ((g + g.transpose()) * z) * inv_tau;
  return out;
}

/// Checked entry point: at least two rows, every label repeated, unit rows.
template <class S>
LossResult<S> supcon_loss(const Mat<S>& z, const std::vector<std::int64_t>& labels, const LossConfig& cfg) {
  detail::check_supcon_batch(z, labels, cfg, true);
  return supcon_loss_unchecked(z, labels, cfg);
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest relative error between the analytic embedding gradient and central
/// differences with step h, all in 64-bit.
inline double supcon_grad_check(const Mat<double>& z, const std::vector<std::int64_t>& labels, const LossConfig& cfg,
                                double h = 1e-5) {
  detail::check_supcon_batch(z, labels, cfg, false);
  const auto analytic = supcon_loss_unchecked(z, labels, cfg).grad;
  double worst = 0.0;
  Mat<double> probe = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index d = 0; d < z.cols(); ++d) {
      const double saved = probe(i, d);
      probe(i, d) = saved + h;
      const double up = supcon_loss_unchecked(probe, labels, cfg).loss;
      probe(i, d) = saved - h;
      const double down = supcon_loss_unchecked(probe, labels, cfg).loss;
      probe(i, d) = saved;
      worst = std::max(worst, relative_error(analytic(i, d), (up - down) / (2.0 * h), 1e-6));
    }
  }
  return worst;
}

}  // namespace gaitkit
