#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/skeleton.hpp"

namespace gaitkit {

using MatrixXdR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GraphConfig {
  std::size_t num_nodes = kNumJoints;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> center{index(Joint::LeftHip), index(Joint::RightHip)};

  /// COCO-17 bones: face, arms, legs, shoulder and hip girdles, torso sides,
  /// and the nose joined to both shoulders.
  static GraphConfig coco17() {
    GraphConfig g;
    g.edges = {
        {0, 1},  {0, 2},   {1, 3},   {2, 4},                     // face
        {5, 7},  {7, 9},   {6, 8},   {8, 10},                    // arms
        {11, 13}, {13, 15}, {12, 14}, {14, 16},                  // legs
        {5, 6},  {11, 12}, {5, 11},  {6, 12},                    // torso
        {0, 5},  {0, 6},                                         // head to shoulders
    };
    return g;
  }
};

/// Adjacency split into three partitions by hop distance to the centre set:
/// same distance (includes self loops), closer to the centre (centripetal) and
/// farther from it (centrifugal).
struct GraphSpec {
  std::size_t num_nodes = 0;
  MatrixXdR adjacency;                  // symmetric, no self loops
  std::vector<int> hop_distance;        // to the centre set; -1 if unreachable
  std::vector<MatrixXdR> partitions;    // unnormalized, sum to A + I
  std::vector<MatrixXdR> normalized;    // D^-1/2 A_k D^-1/2, D = degree of A + I (floor 1)

  std::size_t num_partitions() const { return partitions.size(); }
};

inline GraphSpec build_graph(const GraphConfig& cfg) {
  const std::size_t n = cfg.num_nodes;
  require(n > 0, ErrorCode::InvalidGraph, "graph needs at least one node");
  GraphSpec g;
  g.num_nodes = n;
  g.adjacency = MatrixXdR::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& [a, b] : cfg.edges) {
    require(a < n && b < n, ErrorCode::InvalidGraph,
            "edge (" + std::to_string(a) + ", " + std::to_string(b) + ") references a node >= " + std::to_string(n));
    require(a != b, ErrorCode::InvalidGraph, "self edges are implicit");
    g.adjacency(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
    g.adjacency(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0;
  }
  require(!cfg.center.empty(), ErrorCode::InvalidGraph, "centre node set is empty");

  g.hop_distance.assign(n, -1);
  std::deque<std::size_t> queue;
  for (const auto c : cfg.center) {
    require(c < n, ErrorCode::InvalidGraph, "centre node out of range");
    g.hop_distance[c] = 0;
    queue.push_back(c);
  }
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (std::size_t v = 0; v < n; ++v) {
      if (g.adjacency(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) != 0.0 && g.hop_distance[v] < 0) {
        g.hop_distance[v] = g.hop_distance[u] + 1;
        queue.push_back(v);
      }
    }
  }
  // Unreachable nodes sit "infinitely" far away.
  auto dist = [&](std::size_t i) {
    return g.hop_distance[i] < 0 ? std::numeric_limits<int>::max() : g.hop_distance[i];
  };

  const auto N = static_cast<Eigen::Index>(n);
  const MatrixXdR with_self = g.adjacency + MatrixXdR::Identity(N, N);
  g.partitions.assign(3, MatrixXdR::Zero(N, N));
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      if (with_self(i, j) == 0.0) continue;
      const int di = dist(static_cast<std::size_t>(i));
      const int dj = dist(static_cast<std::size_t>(j));
      const std::size_t k = dj == di ? 0 : (dj < di ? 1 : 2);
      g.partitions[k](i, j) = with_self(i, j);
    }
  }

  Eigen::VectorXd inv_sqrt_deg(N);
  for (Eigen::Index i = 0; i < N; ++i) inv_sqrt_deg(i) = 1.0 / std::sqrt(std::max(1.0, with_self.row(i).sum()));
  for (const auto& a : g.partitions) g.normalized.push_back(inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal());
  return g;
}

}  // namespace gaitkit
