#include <gtest/gtest.h>

#include <Eigen/QR>

#include <cmath>
#include <numbers>

#include "gaitkit/rng.hpp"
#include "gaitkit/supcon.hpp"

using namespace gaitkit;

namespace {

Mat<double> random_unit_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed, 3);
  Mat<double> z(n, d);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
  z.rowwise().normalize();
  return z;
}

Mat<double> random_rotation(Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed, 4);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(d, d);
}

// Direct, unstabilized evaluation of the loss, usable when logits are small.
double naive_loss(const Mat<double>& z, const std::vector<std::int64_t>& labels, double tau) {
  const auto n = z.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    for (Eigen::Index a = 0; a < n; ++a)
      if (a != i) denom += std::exp(z.row(i).dot(z.row(a)) / tau);
    double sum = 0.0;
    int positives = 0;
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p == i || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(i)]) continue;
      sum += -std::log(std::exp(z.row(i).dot(z.row(p)) / tau) / denom);
      ++positives;
    }
    total += sum / positives;
  }
  return total / static_cast<double>(n);
}

const std::vector<std::int64_t> kEight{0, 0, 1, 1, 2, 2, 3, 3};

}  // namespace

TEST(SupCon, IdenticalEmbeddingsGiveLogThree) {
  Mat<double> z = Mat<double>::Zero(4, 3);
  z.col(1).setOnes();
  for (const double tau : {0.01, 0.1, 1.0, 7.0}) {
    const auto r = supcon_loss<double>(z, {0, 0, 1, 1}, LossConfig{tau});
    EXPECT_NEAR(r.loss, std::log(3.0), 1e-12) << tau;
  }
}

TEST(SupCon, TwoIdentitiesHandValue) {
  Mat<double> z(4, 2);
  z << 1, 0, 1, 0, 0, 1, 0, 1;
  const std::vector<std::int64_t> labels{0, 0, 1, 1};
  const double expected = std::log(std::numbers::e + 2.0) - 1.0;
  EXPECT_NEAR(supcon_loss<double>(z, labels, LossConfig{1.0}).loss, expected, 1e-12);
  EXPECT_NEAR(expected, 0.5514, 1e-4);
  const double sharp = supcon_loss<double>(z, labels, LossConfig{0.01}).loss;
  EXPECT_LT(sharp, 1e-10);
  EXPECT_GT(sharp, 0.0);
}

TEST(SupCon, MatchesNaiveFormula) {
  const auto z = random_unit_rows(8, 16, 1);
  EXPECT_NEAR(supcon_loss<double>(z, kEight, LossConfig{0.5}).loss, naive_loss(z, kEight, 0.5), 1e-12);
  const std::vector<std::int64_t> uneven{0, 0, 0, 1, 1, 2, 2, 2};
  EXPECT_NEAR(supcon_loss<double>(z, uneven, LossConfig{0.2}).loss, naive_loss(z, uneven, 0.2), 1e-12);
}

TEST(SupCon, GradientCheck) {
  for (const double tau : {0.1, 0.5, 1.0}) {
    const auto z = random_unit_rows(8, 16, 2);
    EXPECT_LT(supcon_grad_check(z, kEight, LossConfig{tau}), 1e-6) << tau;
  }
}

TEST(SupCon, IdenticalBatchGradientsSumToZero) {
  Mat<double> z = Mat<double>::Zero(6, 4);
  z.col(2).setOnes();
  const auto r = supcon_loss<double>(z, {0, 0, 1, 1, 2, 2}, LossConfig{0.3});
  EXPECT_LT(r.grad.colwise().sum().norm(), 1e-9);
}

TEST(SupCon, RotationInvariance) {
  const auto z = random_unit_rows(8, 16, 5);
  const auto q = random_rotation(16, 5);
  const LossConfig cfg{0.1};
  const auto a = supcon_loss<double>(z, kEight, cfg);
  const auto b = supcon_loss<double>(z * q, kEight, cfg);
  EXPECT_NEAR(a.loss, b.loss, 1e-9);
  EXPECT_LT((a.grad * q - b.grad).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SupCon, PermutationEquivariance) {
  const auto z = random_unit_rows(8, 16, 6);
  const std::vector<Eigen::Index> perm{3, 7, 0, 5, 1, 6, 2, 4};
  Mat<double> zp(8, 16);
  std::vector<std::int64_t> lp(8);
  for (std::size_t i = 0; i < 8; ++i) {
    zp.row(static_cast<Eigen::Index>(i)) = z.row(perm[i]);
    lp[i] = kEight[static_cast<std::size_t>(perm[i])];
  }
  const LossConfig cfg{0.05};
  const auto a = supcon_loss<double>(z, kEight, cfg);
  const auto b = supcon_loss<double>(zp, lp, cfg);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  for (std::size_t i = 0; i < 8; ++i)
    EXPECT_LT((b.grad.row(static_cast<Eigen::Index>(i)) - a.grad.row(perm[i])).norm(), 1e-12);
}

TEST(SupCon, PositiveAndFiniteAtLowTemperature) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto z = random_unit_rows(8, 16, seed);
    const auto r = supcon_loss<double>(z, kEight, LossConfig{0.01});
    EXPECT_GT(r.loss, 0.0);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_TRUE(r.grad.allFinite());
  }
}

TEST(SupCon, PullingPositivesTogetherDoesNotIncreaseLoss) {
  const LossConfig cfg{0.2};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Mat<double> z = random_unit_rows(8, 16, seed + 100);
    const double before = supcon_loss<double>(z, kEight, cfg).loss;
    // Step row 1 a little along the great circle towards row 0.
    const Eigen::RowVectorXd a = z.row(0), b = z.row(1);
    const double angle = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
    const double t = 0.1;
    z.row(1) = (std::sin((1 - t) * angle) * b + std::sin(t * angle) * a) / std::sin(angle);
    const double after = supcon_loss<double>(z, kEight, cfg).loss;
    EXPECT_LE(after, before + 1e-12) << seed;
  }
}

TEST(SupCon, Errors) {
  const auto z = random_unit_rows(4, 3, 1);
  try {
    supcon_loss<double>(z, {0, 0, 1, 2}, LossConfig{0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoPositive);
  }
  EXPECT_THROW(supcon_loss<double>(z, {0, 0, 1, 1}, LossConfig{0.0}), Error);
  EXPECT_THROW(supcon_loss<double>(z * 2.0, {0, 0, 1, 1}, LossConfig{0.1}), Error);
}
