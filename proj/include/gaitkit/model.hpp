#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/graph.hpp"
#include "gaitkit/rng.hpp"
#include "gaitkit/skeleton.hpp"

namespace gaitkit {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  std::vector<std::size_t> channels{2, 32, 64};  // input channels, then one entry per block
  std::size_t temporal_kernel = 5;
  std::size_t embedding_dim = 128;
  std::size_t frames = 54;
  std::size_t joints = kNumJoints;
  std::size_t partitions = 3;

  std::size_t num_blocks() const { return channels.size() - 1; }

  void validate() const {
    require(channels.size() >= 2, ErrorCode::ConfigError, "model needs at least one block");
    require(channels.front() == 2, ErrorCode::ConfigError, "model input has 2 coordinate channels");
    for (const auto c : channels) require(c > 0, ErrorCode::ConfigError, "channel counts must be > 0");
    require(temporal_kernel % 2 == 1, ErrorCode::ConfigError, "temporal kernel must be odd");
    require(embedding_dim > 0 && frames > 0 && joints > 0 && partitions > 0, ErrorCode::ConfigError,
            "model dimensions must be > 0");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class S>
struct BlockParams {
  std::vector<Mat<S>> spatial;   // per partition, C_in x C_out
  std::vector<Mat<S>> temporal;  // per tap, C_out x C_out
  Mat<S> scale;                  // 1 x C_out
  Mat<S> bias;                   // 1 x C_out
};

template <class S>
struct ModelParams {
  ModelConfig config;
  std::vector<BlockParams<S>> blocks;
  Mat<S> projection;  // C_last x embedding_dim

  /// Zero-valued parameters with the shapes implied by `cfg`.
  static ModelParams zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    for (std::size_t b = 0; b < cfg.num_blocks(); ++b) {
      const auto cin = static_cast<Eigen::Index>(cfg.channels[b]);
      const auto cout = static_cast<Eigen::Index>(cfg.channels[b + 1]);
      BlockParams<S> bp;
      bp.spatial.assign(cfg.partitions, Mat<S>::Zero(cin, cout));
      bp.temporal.assign(cfg.temporal_kernel, Mat<S>::Zero(cout, cout));
      bp.scale = Mat<S>::Zero(1, cout);
      bp.bias = Mat<S>::Zero(1, cout);
      p.blocks.push_back(std::move(bp));
    }
    p.projection = Mat<S>::Zero(static_cast<Eigen::Index>(cfg.channels.back()),
                                static_cast<Eigen::Index>(cfg.embedding_dim));
    return p;
  }

  template <class T>
  ModelParams<T> cast() const {
    ModelParams<T> out;
    out.config = config;
    for (const auto& b : blocks) {
      BlockParams<T> ob;
      for (const auto& m : b.spatial) ob.spatial.push_back(m.template cast<T>());
      for (const auto& m : b.temporal) ob.temporal.push_back(m.template cast<T>());
      ob.scale = b.scale.template cast<T>();
      ob.bias = b.bias.template cast<T>();
      out.blocks.push_back(std::move(ob));
    }
    out.projection = projection.template cast<T>();
    return out;
  }
};

/// Visits every parameter tensor with a stable name, in a fixed order.
/// Names: block<b>.spatial<k>, block<b>.temporal<tap>, block<b>.scale,
/// block<b>.bias, projection.
template <class P, class F>
void for_each_tensor(P& params, F&& f) {
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    auto& bp = params.blocks[b];
    const std::string prefix = "block" + std::to_string(b) + ".";
    for (std::size_t k = 0; k < bp.spatial.size(); ++k) f(prefix + "spatial" + std::to_string(k), bp.spatial[k]);
    for (std::size_t k = 0; k < bp.temporal.size(); ++k) f(prefix + "temporal" + std::to_string(k), bp.temporal[k]);
    f(prefix + "scale", bp.scale);
    f(prefix + "bias", bp.bias);
  }
  f(std::string("projection"), params.projection);
}

/// Fan-in scaled uniform weights; scale 1, bias 0. Spatial and temporal
/// weights use the He bound sqrt(6 / fan_in), the projection sqrt(3 / fan_in).
/// A spatial weight sees one graph-averaged copy of the input, so its fan-in is
/// C_in rather than K * C_in.
template <class S = float>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = ModelParams<S>::zeros(cfg);
  const Rng root(seed, 0x6d6f64656cULL);
  std::uint64_t tensor_index = 0;
  auto fill = [&](Mat<S>& m, double bound) {
    Rng rng = root.derive(tensor_index++);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
  };
  for (std::size_t b = 0; b < cfg.num_blocks(); ++b) {
    auto& bp = p.blocks[b];
    const double cin = static_cast<double>(cfg.channels[b]);
    const double cout = static_cast<double>(cfg.channels[b + 1]);
    for (auto& w : bp.spatial) fill(w, std::sqrt(6.0 / cin));
    for (auto& w : bp.temporal) fill(w, std::sqrt(6.0 / (cout * static_cast<double>(cfg.temporal_kernel))));
    bp.scale.setOnes();
    bp.bias.setZero();
  }
  fill(p.projection, std::sqrt(3.0 / static_cast<double>(cfg.channels.back())));
  return p;
}

/// N x C x T x V values in row-major order: element (n, c, t, v) lives at
/// ((n * C + c) * T + t) * V + v.
struct BatchTensor {
  std::size_t n = 0;
  std::size_t c = 2;
  std::size_t t = 0;
  std::size_t v = kNumJoints;
  std::vector<double> values;

  std::size_t offset(std::size_t in, std::size_t ic, std::size_t it, std::size_t iv) const {
    return ((in * c + ic) * t + it) * v + iv;
  }
  double at(std::size_t in, std::size_t ic, std::size_t it, std::size_t iv) const {
    return values[offset(in, ic, it, iv)];
  }
  double& at(std::size_t in, std::size_t ic, std::size_t it, std::size_t iv) {
    return values[offset(in, ic, it, iv)];
  }

  static BatchTensor from_sequences(const std::vector<NormalizedSequence>& seqs) {
    BatchTensor b;
    b.n = seqs.size();
    b.t = seqs.empty() ? 0 : seqs.front().size();
    b.values.assign(b.n * b.c * b.t * b.v, 0.0);
    for (std::size_t in = 0; in < b.n; ++in) {
      require(seqs[in].size() == b.t, ErrorCode::ShapeMismatch, "sequences in a batch must share a length");
      for (std::size_t it = 0; it < b.t; ++it) {
        for (std::size_t iv = 0; iv < b.v; ++iv) {
          b.at(in, 0, it, iv) = seqs[in].frames[it][iv].x;
          b.at(in, 1, it, iv) = seqs[in].frames[it][iv].y;
        }
      }
    }
    return b;
  }
};

inline constexpr double kNormEpsilon = 1e-12;

template <class S>
struct BlockCache {
  Mat<S> input;     // TV x C_in
  Mat<S> gathered;  // TV x (K * C_in), graph-aggregated input per partition
  Mat<S> pre;       // TV x C_out, before ReLU
  Mat<S> hidden;    // TV x C_out, after ReLU
  Mat<S> conv;      // TV x C_out, temporal conv (+ residual), before scale/bias
};

template <class S>
struct SampleCache {
  std::vector<BlockCache<S>> blocks;
  Mat<S> pooled;     // 1 x C_last
  Mat<S> raw;        // 1 x D, before normalization
  S norm = S(0);
  bool fallback = false;
};

template <class S>
struct ForwardResult {
  Mat<S> embeddings;  // N x D, unit-norm rows
  std::vector<SampleCache<S>> caches;
};

namespace detail {

template <class S>
std::vector<Mat<S>> graph_ops(const GraphSpec& g) {
  std::vector<Mat<S>> ops;
  for (const auto& a : g.normalized) ops.push_back(a.template cast<S>());
  return ops;
}

template <class S>
void check_shapes(const ModelParams<S>& params, const GraphSpec& graph, const BatchTensor& batch) {
  const auto& cfg = params.config;
  require(batch.c == cfg.channels.front() && batch.t == cfg.frames && batch.v == cfg.joints,
          ErrorCode::ShapeMismatch,
          "batch shape (" + std::to_string(batch.c) + ", " + std::to_string(batch.t) + ", " + std::to_string(batch.v) +
              ") does not match model (" + std::to_string(cfg.channels.front()) + ", " + std::to_string(cfg.frames) +
              ", " + std::to_string(cfg.joints) + ")");
  require(batch.values.size() == batch.n * batch.c * batch.t * batch.v, ErrorCode::ShapeMismatch,
          "batch value count does not match its shape");
  require(graph.num_nodes == cfg.joints && graph.num_partitions() == cfg.partitions, ErrorCode::ShapeMismatch,
          "graph does not match model config");
  require(params.blocks.size() == cfg.num_blocks(), ErrorCode::ShapeMismatch, "parameter block count mismatch");
}

template <class S>
Mat<S> sample_input(const BatchTensor& batch, std::size_t n) {
  Mat<S> x(static_cast<Eigen::Index>(batch.t * batch.v), static_cast<Eigen::Index>(batch.c));
  for (std::size_t ic = 0; ic < batch.c; ++ic)
    for (std::size_t it = 0; it < batch.t; ++it)
      for (std::size_t iv = 0; iv < batch.v; ++iv)
        x(static_cast<Eigen::Index>(it * batch.v + iv), static_cast<Eigen::Index>(ic)) =
            static_cast<S>(batch.at(n, ic, it, iv));
  return x;
}

template <class S>
void block_forward(const BlockParams<S>& bp, const std::vector<Mat<S>>& ops, std::size_t frames, std::size_t joints,
                   BlockCache<S>& c) {
  const auto V = static_cast<Eigen::Index>(joints);
  const auto T = static_cast<Eigen::Index>(frames);
  const Eigen::Index cin = c.input.cols();
  const Eigen::Index cout = bp.spatial.front().cols();
  const auto K = static_cast<Eigen::Index>(ops.size());

  c.gathered.resize(T * V, K * cin);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index k = 0; k < K; ++k)
      c.gathered.block(t * V, k * cin, V, cin).noalias() = ops[static_cast<std::size_t>(k)] * c.input.middleRows(t * V, V);

  c.pre = Mat<S>::Zero(T * V, cout);
  for (Eigen::Index k = 0; k < K; ++k)
    c.pre.noalias() += c.gathered.middleCols(k * cin, cin) * bp.spatial[static_cast<std::size_t>(k)];
  c.hidden = c.pre.cwiseMax(S(0));

  const auto taps = static_cast<Eigen::Index>(bp.temporal.size());
  const Eigen::Index pad = (taps - 1) / 2;
  c.conv = Mat<S>::Zero(T * V, cout);
  for (Eigen::Index tap = 0; tap < taps; ++tap) {
    const Eigen::Index shift = tap - pad;  // output t reads hidden t + shift
    const Eigen::Index t_lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index t_hi = std::min<Eigen::Index>(T, T - shift);
    if (t_hi <= t_lo) continue;
    c.conv.middleRows(t_lo * V, (t_hi - t_lo) * V).noalias() +=
        c.hidden.middleRows((t_lo + shift) * V, (t_hi - t_lo) * V) * bp.temporal[static_cast<std::size_t>(tap)];
  }
  if (cin == cout) c.conv += c.input;
}

template <class S>
Mat<S> block_output(const BlockParams<S>& bp, const BlockCache<S>& c) {
  return (c.conv.array().rowwise() * bp.scale.row(0).array()).rowwise() + bp.bias.row(0).array();
}

/// Accumulates parameter gradients for one block and returns d(input).
template <class S>
Mat<S> block_backward(const BlockParams<S>& bp, const std::vector<Mat<S>>& ops, std::size_t frames,
                      std::size_t joints, const BlockCache<S>& c, const Mat<S>& d_out, BlockParams<S>& grad) {
  const auto V = static_cast<Eigen::Index>(joints);
  const auto T = static_cast<Eigen::Index>(frames);
  const Eigen::Index cin = c.input.cols();
  const Eigen::Index cout = bp.spatial.front().cols();
  const auto K = static_cast<Eigen::Index>(ops.size());

  grad.scale.row(0) += (d_out.array() * c.conv.array()).colwise().sum().matrix();
  grad.bias.row(0) += d_out.colwise().sum();
  const Mat<S> d_conv = d_out.array().rowwise() * bp.scale.row(0).array();

  Mat<S> d_input = Mat<S>::Zero(T * V, cin);
  if (cin == cout) d_input += d_conv;

  const auto taps = static_cast<Eigen::Index>(bp.temporal.size());
  const Eigen::Index pad = (taps - 1) / 2;
  Mat<S> d_hidden = Mat<S>::Zero(T * V, cout);
  for (Eigen::Index tap = 0; tap < taps; ++tap) {
    const Eigen::Index shift = tap - pad;
    const Eigen::Index t_lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index t_hi = std::min<Eigen::Index>(T, T - shift);
    if (t_hi <= t_lo) continue;
    const Eigen::Index rows = (t_hi - t_lo) * V;
    const auto& w = bp.temporal[static_cast<std::size_t>(tap)];
    grad.temporal[static_cast<std::size_t>(tap)].noalias() +=
        c.hidden.middleRows((t_lo + shift) * V, rows).transpose() * d_conv.middleRows(t_lo * V, rows);
    d_hidden.middleRows((t_lo + shift) * V, rows).noalias() += d_conv.middleRows(t_lo * V, rows) * w.transpose();
  }

  const Mat<S> d_pre = (c.pre.array() > S(0)).select(d_hidden, S(0));
  Mat<S> d_gathered(T * V, K * cin);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& w = bp.spatial[static_cast<std::size_t>(k)];
    grad.spatial[static_cast<std::size_t>(k)].noalias() += c.gathered.middleCols(k * cin, cin).transpose() * d_pre;
    d_gathered.middleCols(k * cin, cin).noalias() = d_pre * w.transpose();
  }
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index k = 0; k < K; ++k)
      d_input.middleRows(t * V, V).noalias() +=
          ops[static_cast<std::size_t>(k)].transpose() * d_gathered.block(t * V, k * cin, V, cin);
  return d_input;
}

}  // namespace detail

/// Runs the network and keeps the intermediates needed by backward().
/// Per block: ReLU(sum_k A_k X W_k), temporal convolution with zero "same"
/// padding (+ identity residual when channel counts agree), per-channel
/// scale and bias. Then a mean pool over frames and joints, a linear
/// projection and row-wise L2 normalization. A row whose norm is below 1e-12
/// maps to the first basis vector.
template <class S>
ForwardResult<S> forward_with_cache(const ModelParams<S>& params, const GraphSpec& graph, const BatchTensor& batch) {
  detail::check_shapes(params, graph, batch);
  const auto& cfg = params.config;
  const auto ops = detail::graph_ops<S>(graph);
  const auto D = static_cast<Eigen::Index>(cfg.embedding_dim);
  ForwardResult<S> out;
  out.embeddings = Mat<S>::Zero(static_cast<Eigen::Index>(batch.n), D);
  out.caches.resize(batch.n);
  for (std::size_t n = 0; n < batch.n; ++n) {
    auto& sc = out.caches[n];
    sc.blocks.resize(params.blocks.size());
    Mat<S> x = detail::sample_input<S>(batch, n);
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
      auto& bc = sc.blocks[b];
      bc.input = std::move(x);
      detail::block_forward(params.blocks[b], ops, cfg.frames, cfg.joints, bc);
      x = detail::block_output(params.blocks[b], bc);
    }
    sc.pooled = x.colwise().mean();
    sc.raw = sc.pooled * params.projection;
    sc.norm = sc.raw.norm();
    if (!(sc.norm >= S(kNormEpsilon))) {
      sc.fallback = true;
      out.embeddings(static_cast<Eigen::Index>(n), 0) = S(1);
    } else {
      out.embeddings.row(static_cast<Eigen::Index>(n)) = sc.raw / sc.norm;
    }
  }
  return out;
}

template <class S>
Mat<S> forward(const ModelParams<S>& params, const GraphSpec& graph, const BatchTensor& batch) {
  return forward_with_cache(params, graph, batch).embeddings;
}

/// Exact parameter gradients given d(loss)/d(embeddings) for the forward pass
/// recorded in `fwd`.
template <class S>
ModelParams<S> backward(const ModelParams<S>& params, const GraphSpec& graph, const ForwardResult<S>& fwd,
                        const Mat<S>& upstream) {
  const auto& cfg = params.config;
  require(upstream.rows() == fwd.embeddings.rows() && upstream.cols() == fwd.embeddings.cols(),
          ErrorCode::ShapeMismatch, "upstream gradient shape does not match embeddings");
  const auto ops = detail::graph_ops<S>(graph);
  auto grad = ModelParams<S>::zeros(cfg);
  const auto rows = static_cast<Eigen::Index>(cfg.frames * cfg.joints);
  for (std::size_t n = 0; n < fwd.caches.size(); ++n) {
    const auto& sc = fwd.caches[n];
    if (sc.fallback) continue;  // constant output, zero gradient
    const Mat<S> z = fwd.embeddings.row(static_cast<Eigen::Index>(n));
    const Mat<S> dz = upstream.row(static_cast<Eigen::Index>(n));
    const Mat<S> d_raw = (dz - z * (z * dz.transpose())(0, 0)) / sc.norm;
    grad.projection.noalias() += sc.pooled.transpose() * d_raw;
    const Mat<S> d_pooled = d_raw * params.projection.transpose();
    Mat<S> d_x = d_pooled.replicate(rows, 1) / static_cast<S>(rows);
    for (std::size_t b = params.blocks.size(); b-- > 0;) {
      d_x = detail::block_backward(params.blocks[b], ops, cfg.frames, cfg.joints, sc.blocks[b], d_x, grad.blocks[b]);
    }
  }
  return grad;
}

template <class S>
ModelParams<S> backward(const ModelParams<S>& params, const GraphSpec& graph, const BatchTensor& batch,
                        const Mat<S>& upstream) {
  return backward(params, graph, forward_with_cache(params, graph, batch), upstream);
}

}  // namespace gaitkit
