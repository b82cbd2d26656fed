#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cstring>
#include <sstream>

#include "gaitkit/checkpoint.hpp"
#include "gaitkit/graph.hpp"
#include "gaitkit/model.hpp"
#include "gaitkit/supcon.hpp"

#include "fd_check.hpp"

using namespace gaitkit;

namespace {

BatchTensor random_batch(std::size_t n, std::size_t frames, std::uint64_t seed, double sigma = 1.0) {
  BatchTensor b;
  b.n = n;
  b.t = frames;
  b.values.resize(n * b.c * b.t * b.v);
  Rng rng(seed, 17);
  for (auto& x : b.values) x = sigma * rng.normal();
  return b;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.channels = {2, 6, 6};
  cfg.embedding_dim = 5;
  cfg.frames = 10;
  return cfg;
}

}  // namespace

TEST(Graph, DefaultShapeAndSymmetry) {
  const auto g = build_graph(GraphConfig::coco17());
  ASSERT_EQ(g.num_nodes, 17u);
  ASSERT_EQ(g.num_partitions(), 3u);
  EXPECT_TRUE(g.adjacency.isApprox(g.adjacency.transpose(), 0.0));
  EXPECT_EQ(g.adjacency.diagonal().sum(), 0.0);
  const MatrixXdR with_self = g.adjacency + MatrixXdR::Identity(17, 17);
  for (Eigen::Index i = 0; i < 17; ++i) EXPECT_GE(with_self.row(i).sum(), 1.0);
  EXPECT_EQ(g.hop_distance[11], 0);
  EXPECT_EQ(g.hop_distance[15], 2);
}

TEST(Graph, PartitionsSumToAdjacencyPlusIdentity) {
  const auto g = build_graph(GraphConfig::coco17());
  MatrixXdR sum = MatrixXdR::Zero(17, 17);
  for (const auto& a : g.partitions) sum += a;
  EXPECT_EQ(sum, g.adjacency + MatrixXdR::Identity(17, 17));
}

TEST(Graph, SpectralRadiusAtMostOne) {
  const auto g = build_graph(GraphConfig::coco17());
  for (const auto& a : g.normalized) {
    const Eigen::MatrixXd dense = a;
    const auto eig = dense.eigenvalues();
    for (Eigen::Index i = 0; i < eig.size(); ++i) EXPECT_LE(std::abs(eig(i)), 1.0 + 1e-6);
  }
}

TEST(Graph, TwoNodeHandComputation) {
  GraphConfig cfg;
  cfg.edges = {{0, 1}};
  cfg.center = {0};
  const auto g = build_graph(cfg);
  // Degrees of A + I: both endpoints 2, so the edge weight is 1 / sqrt(2 * 2).
  MatrixXdR total = MatrixXdR::Zero(17, 17);
  for (const auto& a : g.normalized) total += a;
  EXPECT_DOUBLE_EQ(total(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(total(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(total(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(total(5, 5), 1.0);
  EXPECT_EQ(g.partitions[2](0, 1), 1.0);  // away from the centre
  EXPECT_EQ(g.partitions[1](1, 0), 1.0);  // towards it
}

TEST(Graph, InvalidGraph) {
  GraphConfig cfg;
  cfg.edges = {{0, 17}};
  try {
    build_graph(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidGraph);
  }
}

TEST(Forward, UnitNormRows) {
  const auto g = build_graph(GraphConfig::coco17());
  const auto params = init_params<float>(ModelConfig{}, 1);
  for (const double sigma : {0.01, 1.0, 100.0}) {
    const auto z = forward(params, g, random_batch(3, 54, 2, sigma));
    for (Eigen::Index i = 0; i < z.rows(); ++i) EXPECT_NEAR(z.row(i).norm(), 1.0, 1e-5) << sigma;
  }
}

TEST(Forward, ZeroVectorFallback) {
  const auto g = build_graph(GraphConfig::coco17());
  const auto params = init_params<float>(ModelConfig{}, 1);
  BatchTensor zero = random_batch(2, 54, 1);
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  const auto fwd = forward_with_cache(params, g, zero);
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_TRUE(fwd.caches[static_cast<std::size_t>(i)].fallback);
    EXPECT_EQ(fwd.embeddings(i, 0), 1.0f);
    EXPECT_EQ(fwd.embeddings.row(i).squaredNorm(), 1.0f);
  }
  const auto grad = backward(params, g, fwd, Mat<float>(Mat<float>::Ones(2, 128)));
  EXPECT_EQ(grad.projection.squaredNorm(), 0.0f);
}

TEST(Forward, BatchPermutation) {
  const auto g = build_graph(GraphConfig::coco17());
  const auto params = init_params<float>(ModelConfig{}, 3);
  const auto batch = random_batch(3, 54, 4);
  BatchTensor swapped = batch;
  const std::size_t per = batch.c * batch.t * batch.v;
  std::copy_n(batch.values.begin(), per, swapped.values.begin() + 2 * per);
  std::copy_n(batch.values.begin() + 2 * per, per, swapped.values.begin());
  const auto a = forward(params, g, batch);
  const auto b = forward(params, g, swapped);
  EXPECT_EQ(a.row(0), b.row(2));
  EXPECT_EQ(a.row(1), b.row(1));
  EXPECT_EQ(a.row(2), b.row(0));
}

TEST(Forward, ShapeMismatch) {
  const auto g = build_graph(GraphConfig::coco17());
  const auto params = init_params<float>(ModelConfig{}, 3);
  try {
    forward(params, g, random_batch(1, 40, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Forward, Deterministic) {
  const auto g = build_graph(GraphConfig::coco17());
  const auto params = init_params<float>(ModelConfig{}, 3);
  const auto batch = random_batch(2, 54, 8);
  EXPECT_EQ(forward(params, g, batch), forward(params, g, batch));
}

// Central differences of a supervised contrastive loss through the whole
// network, in double. Error per tensor is the largest absolute deviation
// divided by the largest finite-difference magnitude in that tensor.
TEST(Backward, MatchesFiniteDifferences) {
  const auto g = build_graph(GraphConfig::coco17());
  const std::vector<std::int64_t> labels{0, 0, 1, 1, 2, 2, 3, 3};
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = init_params<double>(small_config(), seed);
    Rng jitter(seed, 99);
    for_each_tensor(p, [&](const std::string&, Mat<double>& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.1 * jitter.normal();
    });
    for (const auto& r : fdcheck::check(p, g, random_batch(8, 10, seed + 10), labels, LossConfig{0.5}, 1e-4)) {
      EXPECT_LT(r.rel_error, 1e-4) << r.name << " seed " << seed;
      // Kinks may cost a few coordinates, never most of a tensor.
      EXPECT_GE(r.checked, 9 * (r.checked + r.skipped) / 10) << r.name << " seed " << seed;
    }
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  const auto g = build_graph(GraphConfig::coco17());
  const auto p = init_params<double>(small_config(), 4);
  const auto batch = random_batch(3, 10, 4);
  auto grad = backward(p, g, batch, Mat<double>(Mat<double>::Zero(3, 5)));
  for_each_tensor(grad, [](const std::string& name, const Mat<double>& m) {
    EXPECT_EQ(m.squaredNorm(), 0.0) << name;
  });
}

TEST(Backward, NormalizeGradientOrthogonalToOutput) {
  // d(x / |x|) applied to an upstream u is (u - z (z.u)) / |x|, so z . that = 0.
  const auto g = build_graph(GraphConfig::coco17());
  const auto p = init_params<double>(small_config(), 5);
  const auto fwd = forward_with_cache(p, g, random_batch(4, 10, 5));
  Rng rng(5);
  for (std::size_t n = 0; n < 4; ++n) {
    const auto& sc = fwd.caches[n];
    const Mat<double> z = fwd.embeddings.row(static_cast<Eigen::Index>(n));
    Mat<double> u(1, 5);
    for (Eigen::Index d = 0; d < 5; ++d) u(0, d) = rng.normal();
    // Numerical Jacobian-vector product of the normalization itself.
    Mat<double> jvp = Mat<double>::Zero(1, 5);
    const double h = 1e-6;
    for (Eigen::Index d = 0; d < 5; ++d) {
      Mat<double> up = sc.raw, down = sc.raw;
      up(0, d) += h;
      down(0, d) -= h;
      const Mat<double> dz = (up / up.norm() - down / down.norm()) / (2.0 * h);
      jvp(0, d) = (dz * u.transpose())(0, 0);
    }
    EXPECT_LT(std::abs((jvp * z.transpose())(0, 0)), 1e-6);
  }
}

TEST(Init, DeterministicPerSeed) {
  const auto a = init_params<float>(ModelConfig{}, 7);
  const auto b = init_params<float>(ModelConfig{}, 7);
  const auto c = init_params<float>(ModelConfig{}, 8);
  EXPECT_EQ(a.projection, b.projection);
  EXPECT_EQ(a.blocks[1].temporal[2], b.blocks[1].temporal[2]);
  EXPECT_NE(a.projection, c.projection);
  EXPECT_EQ(a.blocks[0].scale, Mat<float>::Ones(1, 32));
  EXPECT_EQ(a.blocks[0].bias, Mat<float>::Zero(1, 32));
}

TEST(Init, LayerOutputVarianceStaysBounded) {
  const auto g = build_graph(GraphConfig::coco17());
  const auto p = init_params<double>(ModelConfig{}, 11);
  const auto fwd = forward_with_cache(p, g, random_batch(8, 54, 11));
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    double sum = 0.0, sq = 0.0, count = 0.0;
    for (const auto& sc : fwd.caches) {
      const Mat<double> out = detail::block_output(p.blocks[b], sc.blocks[b]);
      sum += out.sum();
      sq += out.squaredNorm();
      count += static_cast<double>(out.size());
    }
    const double var = sq / count - (sum / count) * (sum / count);
    EXPECT_GE(var, 0.25) << "block " << b;
    EXPECT_LE(var, 4.0) << "block " << b;
  }
}

TEST(Checkpoint, BitExactRoundTrip) {
  const auto p = init_params<float>(ModelConfig{}, 21);
  std::stringstream ss;
  write_checkpoint(ss, p);
  const auto q = read_checkpoint(ss);
  EXPECT_EQ(q.config, p.config);
  std::vector<Mat<float>> a, b;
  for_each_tensor(p, [&](const std::string&, const Mat<float>& m) { a.push_back(m); });
  for_each_tensor(q, [&](const std::string&, const Mat<float>& m) { b.push_back(m); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(std::memcmp(a[i].data(), b[i].data(), sizeof(float) * static_cast<std::size_t>(a[i].size())), 0);
}

TEST(Checkpoint, RejectsCorruption) {
  const auto p = init_params<float>(small_config(), 21);
  std::stringstream ss;
  write_checkpoint(ss, p);
  std::string bytes = ss.str();
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream s1(bad_magic);
  EXPECT_THROW(read_checkpoint(s1), Error);
  std::stringstream s2(bytes.substr(0, bytes.size() / 2));
  try {
    read_checkpoint(s2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CheckpointError);
  }
}
