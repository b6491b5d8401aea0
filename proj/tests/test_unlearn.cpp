// Copyright 2026 The attrunlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "attrunlearn/recsys/metrics.hpp"
#include "attrunlearn/unlearn/losses.hpp"
#include "attrunlearn/unlearn/retrain.hpp"
#include "attrunlearn/unlearn/unlearn.hpp"
#include "support.hpp"

namespace au = attrunlearn;
namespace ul = attrunlearn::unlearn;
namespace tst = attrunlearn::testing;
using au::AttributeTable;
using au::Matrix;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index r = 0;
  for (double x : v) m(r++, 0) = x;
  return m;
}

// (0, 1, 3) with labels (A, A, B).
const AttributeTable& aab() {
  static const AttributeTable t = AttributeTable::from_labels({0, 0, 1});
  return t;
}

// Twice the Laplacian quadratic form of the "different label" graph.
double laplacian_route(const Matrix& theta, const AttributeTable& labels) {
  const auto n = theta.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && labels.label(static_cast<au::Index>(i)) != labels.label(static_cast<au::Index>(j))) {
        l(i, j) = -1.0;
        l(i, i) += 1.0;
      }
    }
  }
  return 2.0 * (theta.transpose() * l * theta).trace();
}

double median_oracle(const Matrix& points) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) d.push_back((points.row(i) - points.row(j)).norm());
  }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

Matrix split_rows(const Matrix& theta, const AttributeTable& labels, au::Label g) {
  Matrix out(static_cast<Eigen::Index>(labels.group(g).size()), theta.cols());
  Eigen::Index r = 0;
  for (au::Index u : labels.group(g)) out.row(r++) = theta.row(u);
  return out;
}

}  // namespace

TEST(Frobenius, Examples) {
  const Matrix a = tst::random_matrix(2, 2, 1);
  EXPECT_EQ(ul::frobenius_reg(a, a), 0.0);
  EXPECT_DOUBLE_EQ(ul::frobenius_reg(a + Matrix::Ones(2, 2), a), 4.0);
  EXPECT_THROW(ul::frobenius_reg(a, Matrix::Zero(2, 3)), au::ShapeError);
}

TEST(U2u, WorkedExample) {
  const Matrix theta = column({0, 1, 3});
  EXPECT_DOUBLE_EQ(ul::u2u_loss_bruteforce(theta, aab()), 26.0);
  EXPECT_DOUBLE_EQ(ul::u2u_loss(theta, aab()), 26.0);
  EXPECT_DOUBLE_EQ(tst::u2u_reference(theta, aab().labels()), 26.0);
  EXPECT_EQ(ul::u2u_grad(theta, aab()), column({-12, -8, 20}));
}

TEST(U2u, SingleGroupRejected) {
  const auto same = AttributeTable::from_labels({1, 1, 1});
  EXPECT_THROW(ul::u2u_loss(column({0, 1, 3}), same), au::Error);
  EXPECT_THROW(ul::u2u_loss_bruteforce(column({0, 1, 3}), same), au::Error);
  EXPECT_THROW(ul::u2u_grad(column({0, 1, 3}), same), au::Error);
}

TEST(U2u, IdenticalRowsGiveZeroLossAndGradient) {
  const Matrix theta = Matrix::Constant(6, 3, 0.7);
  const auto labels = tst::random_labels(6, 2);
  EXPECT_EQ(ul::u2u_loss(theta, labels), 0.0);
  EXPECT_EQ(ul::u2u_grad(theta, labels).cwiseAbs().maxCoeff(), 0.0);
}

TEST(U2u, ClosedFormMatchesBruteForceOnRandomInstances) {
  au::Rng rng(2024);
  std::uniform_int_distribution<int> size(2, 50), width(1, 8);
  std::uniform_real_distribution<double> scale(0.01, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng), k = width(rng);
    const Matrix theta = tst::random_matrix(n, k, 1000 + trial, scale(rng));
    const auto labels = tst::random_labels(static_cast<std::size_t>(n), 5000 + trial);
    const double brute = ul::u2u_loss_bruteforce(theta, labels);
    EXPECT_NEAR(ul::u2u_loss(theta, labels), brute, 1e-9 * brute) << "trial " << trial;
    EXPECT_NEAR(tst::u2u_reference(theta, labels.labels()), brute, 1e-9 * brute);
    EXPECT_NEAR(laplacian_route(theta, labels), brute, 1e-9 * brute);
  }
}

TEST(U2u, DuplicatingUsersQuadruplesLoss) {
  const Matrix theta = tst::random_matrix(9, 3, 4);
  const auto labels = tst::random_labels(9, 4);
  Matrix twice(18, 3);
  twice << theta, theta;
  std::vector<au::Label> y = labels.labels();
  y.insert(y.end(), labels.labels().begin(), labels.labels().end());
  const double base = ul::u2u_loss(theta, labels);
  EXPECT_NEAR(ul::u2u_loss(twice, AttributeTable::from_labels(y)), 4.0 * base, 1e-10 * base);
}

TEST(U2u, TranslationAndPermutationInvariance) {
  const Matrix theta = tst::random_matrix(12, 4, 6);
  const auto labels = tst::random_labels(12, 6);
  const double base = ul::u2u_loss(theta, labels);
  const Eigen::RowVectorXd shift = tst::random_matrix(1, 4, 7, 5.0);
  const Matrix moved = theta.rowwise() + shift;
  EXPECT_NEAR(ul::u2u_loss(moved, labels), base, 1e-9 * base);

  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  au::Rng rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix p(12, 4);
  std::vector<au::Label> py(12);
  for (int i = 0; i < 12; ++i) {
    p.row(i) = theta.row(perm[static_cast<std::size_t>(i)]);
    py[static_cast<std::size_t>(i)] = labels.label(perm[static_cast<std::size_t>(i)]);
  }
  const auto plabels = AttributeTable::from_labels(py);
  EXPECT_NEAR(ul::u2u_loss(p, plabels), base, 1e-9 * base);
  EXPECT_NEAR(ul::mmd_rbf(split_rows(p, plabels, 0), split_rows(p, plabels, 1), 1.3),
              ul::mmd_rbf(split_rows(theta, labels, 0), split_rows(theta, labels, 1), 1.3), 1e-12);
}

TEST(U2u, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix theta = tst::random_matrix(5, 3, 40 + seed);
    const auto labels = tst::random_labels(5, 40 + seed);
    const Matrix numeric = tst::numeric_gradient(
        [&](const Matrix& t) { return ul::u2u_loss_bruteforce(t, labels); }, theta, 1e-6);
    EXPECT_LT(tst::relative_error(ul::u2u_grad(theta, labels), numeric), 1e-5);
  }
}

TEST(Mmd, OneDimensionalClosedForm) {
  const double v = ul::mmd_rbf(column({0}), column({1}), 1.0);
  EXPECT_NEAR(v, 2.0 - 2.0 * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(v, 0.786939, 1e-6);
}

TEST(Mmd, MatchesKernelMeanReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = tst::random_matrix(7, 3, seed);
    const Matrix y = tst::random_matrix(4, 3, seed + 50, 1.5);
    EXPECT_NEAR(ul::mmd_rbf(x, y, 0.8), tst::mmd_reference(x, y, 0.8), 1e-12);
  }
}

TEST(Mmd, Axioms) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix x = tst::random_matrix(6, 2, 100 + seed);
    const Matrix y = tst::random_matrix(9, 2, 200 + seed, 2.0);
    const auto bw = ul::Bandwidth::median();
    const double xy = ul::mmd_rbf(x, y, bw);
    EXPECT_GE(xy, 0.0);
    EXPECT_GT(xy, 0.0);
    EXPECT_NEAR(ul::mmd_rbf(y, x, bw), xy, 1e-14);
    EXPECT_NEAR(ul::mmd_rbf(x, x, bw), 0.0, 1e-14);
  }
}

TEST(Mmd, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = tst::random_matrix(4, 2, 300 + seed);
    const Matrix y = tst::random_matrix(5, 2, 400 + seed, 1.5);
    const double sigma = 1.1;
    const auto [gx, gy] = ul::mmd_grad(x, y, sigma);
    const Matrix nx = tst::numeric_gradient(
        [&](const Matrix& t) { return tst::mmd_reference(t, y, sigma); }, x, 1e-6);
    const Matrix ny = tst::numeric_gradient(
        [&](const Matrix& t) { return tst::mmd_reference(x, t, sigma); }, y, 1e-6);
    EXPECT_LT(tst::relative_error(gx, nx), 1e-5);
    EXPECT_LT(tst::relative_error(gy, ny), 1e-5);
  }
}

TEST(Mmd, EqualSetsHaveZeroGradient) {
  const Matrix x = tst::random_matrix(5, 3, 9);
  const auto [gx, gy] = ul::mmd_grad(x, x, 0.9);
  EXPECT_LT(gx.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(gy.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mmd, Errors) {
  const Matrix x = tst::random_matrix(3, 2, 1);
  EXPECT_THROW(ul::mmd_rbf(Matrix(0, 2), x, 1.0), au::Error);
  EXPECT_THROW(ul::mmd_rbf(x, Matrix::Zero(2, 3), 1.0), au::ShapeError);
  EXPECT_THROW(ul::mmd_rbf(x, x, 0.0), au::Error);
  try {
    ul::mmd_rbf(Matrix::Ones(3, 2), Matrix::Ones(2, 2), ul::Bandwidth::median());
    FAIL();
  } catch (const au::Error& e) {
    EXPECT_NE(std::string(e.what()).find("fixed bandwidth"), std::string::npos);
  }
}

TEST(Mmd, MedianHeuristicMatchesSortedDistances) {
  // Sizes on both sides of the sampled-bracket path, plus heavy ties.
  for (int n : {2, 3, 4, 10, 57, 363, 400, 700}) {
    for (int variant = 0; variant < 2; ++variant) {
      Matrix pts = tst::random_matrix(n, 3, static_cast<std::uint64_t>(n * 10 + variant));
      if (variant == 1) pts = pts.array().round().matrix();  // many equal distances
      const double want = median_oracle(pts);
      const double got = ul::median_pairwise_distance(ul::squared_distances(pts));
      EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, want)) << "n=" << n << " variant=" << variant;
    }
  }
}

TEST(TotalLoss, Composition) {
  const Matrix theta = column({0, 1, 3});
  auto cfg = ul::UnlearnConfig::defaults(ul::LossKind::kU2UR);
  cfg.alpha = 1.0;
  EXPECT_DOUBLE_EQ(ul::total_loss(theta, theta, aab(), cfg).total, 26.0);
  const Matrix star = column({1, 1, 1});
  cfg.alpha = 0.0;
  const auto v = ul::total_loss(theta, star, aab(), cfg);
  EXPECT_DOUBLE_EQ(v.total, v.distinguishability);
  EXPECT_DOUBLE_EQ(v.regularization, 5.0);
  cfg.alpha = 0.5;
  EXPECT_DOUBLE_EQ(ul::total_loss(theta, star, aab(), cfg).total, 26.0 + 2.5);
}

TEST(Unlearn, ZeroEpochsReturnsInput) {
  const auto f = tst::two_gaussians(40, 3, 4.0, 1);
  for (auto kind : {ul::LossKind::kU2UR, ul::LossKind::kD2DR}) {
    auto cfg = ul::UnlearnConfig::defaults(kind);
    cfg.epochs = 0;
    const auto r = ul::unlearn(f.theta, f.labels, cfg);
    EXPECT_EQ(r.theta, f.theta);
    ASSERT_EQ(r.loss_trace.size(), 1u);
    EXPECT_DOUBLE_EQ(r.loss_trace[0].total, ul::total_loss(f.theta, f.theta, f.labels, cfg).total);
  }
}

TEST(Unlearn, GradientDescentStepMatchesHandComputation) {
  auto cfg = ul::UnlearnConfig::defaults(ul::LossKind::kU2UR);
  cfg.step_rule = ul::StepRule::kGradientDescent;
  cfg.learning_rate = 0.01;
  cfg.alpha = 0.0;
  cfg.epochs = 1;
  const auto r = ul::unlearn(column({0, 1, 3}), aab(), cfg);
  // theta - 0.01 * (-12, -8, 20)
  EXPECT_NEAR((r.theta - column({0.12, 1.08, 2.8})).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  ASSERT_EQ(r.loss_trace.size(), 2u);
  EXPECT_NEAR(r.loss_trace[1].total, ul::u2u_loss(column({0.12, 1.08, 2.8}), aab()), 1e-12);
}

TEST(Unlearn, DescendsForBothLosses) {
  const auto f = tst::two_gaussians(120, 4, 4.0, 2);
  for (auto kind : {ul::LossKind::kU2UR, ul::LossKind::kD2DR}) {
    auto cfg = ul::UnlearnConfig::defaults(kind);
    cfg.epochs = 300;
    const auto r = ul::unlearn(f.theta, f.labels, cfg);
    ASSERT_EQ(r.loss_trace.size(), 301u);
    EXPECT_LT(r.loss_trace.back().total, r.loss_trace.front().total) << ul::to_string(kind);
    EXPECT_LT(r.loss_trace[150].total, r.loss_trace.front().total);
    EXPECT_LT(r.loss_trace.back().total, r.loss_trace[150].total);
    EXPECT_GT(r.wall_seconds, 0.0);
    if (kind == ul::LossKind::kD2DR) {
      EXPECT_GT(r.final_sigma, 0.0);
    }
  }
}

TEST(Unlearn, DeterministicAndLeavesInputUntouched) {
  const auto f = tst::two_gaussians(60, 3, 4.0, 3);
  const Matrix copy = f.theta;
  auto cfg = ul::UnlearnConfig::defaults(ul::LossKind::kD2DR);
  cfg.epochs = 50;
  const auto a = ul::unlearn(f.theta, f.labels, cfg);
  const auto b = ul::unlearn(f.theta, f.labels, cfg);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(f.theta, copy);
}

TEST(Unlearn, LargeAlphaAnchorsToStart) {
  const auto f = tst::two_gaussians(200, 8, 4.0, 4);
  for (auto kind : {ul::LossKind::kU2UR, ul::LossKind::kD2DR}) {
    auto cfg = ul::UnlearnConfig::defaults(kind);
    cfg.alpha = 1e6;
    const auto r = ul::unlearn(f.theta, f.labels, cfg);
    EXPECT_LT((r.theta - f.theta).norm(), 1e-3 * f.theta.norm()) << ul::to_string(kind);
  }
}

TEST(Unlearn, RegularizerStrengthOrdersDistance) {
  const auto f = tst::two_gaussians(100, 4, 4.0, 5);
  double previous = std::numeric_limits<double>::infinity();
  for (double alpha : {0.0, 1e-2, 1.0, 100.0}) {
    auto cfg = ul::UnlearnConfig::defaults(ul::LossKind::kD2DR);
    cfg.alpha = alpha;
    cfg.epochs = 300;
    const double dist = (ul::unlearn(f.theta, f.labels, cfg).theta - f.theta).norm();
    EXPECT_LT(dist, previous) << "alpha=" << alpha;
    previous = dist;
  }
}

TEST(Unlearn, DivergenceReportsEpochAndLastFiniteState) {
  const auto f = tst::two_gaussians(50, 2, 4.0, 6);
  auto cfg = ul::UnlearnConfig::defaults(ul::LossKind::kU2UR);
  cfg.step_rule = ul::StepRule::kGradientDescent;
  cfg.learning_rate = 1.0;  // far beyond 1 / (2 N) stability
  try {
    ul::unlearn(f.theta, f.labels, cfg);
    FAIL() << "expected divergence";
  } catch (const ul::UnlearnDivergence& e) {
    EXPECT_GT(e.epoch(), 0);
    EXPECT_TRUE(e.last_finite_theta().allFinite());
    EXPECT_NE(std::string(e.what()).find(std::to_string(e.epoch())), std::string::npos);
  }
}

TEST(Unlearn, MiniBatchRowsStillDescend) {
  const auto f = tst::two_gaussians(200, 3, 4.0, 7);
  auto cfg = ul::UnlearnConfig::defaults(ul::LossKind::kD2DR);
  cfg.batch_rows = 64;
  cfg.epochs = 300;
  const auto r = ul::unlearn(f.theta, f.labels, cfg);
  EXPECT_LT(r.loss_trace.back().distinguishability, r.loss_trace.front().distinguishability);
}

TEST(Unlearn, InvalidInputsRejected) {
  const auto f = tst::two_gaussians(20, 2, 4.0, 8);
  auto cfg = ul::UnlearnConfig::defaults(ul::LossKind::kD2DR);
  cfg.alpha = -1.0;
  EXPECT_THROW(ul::unlearn(f.theta, f.labels, cfg), au::Error);
  cfg = ul::UnlearnConfig::defaults(ul::LossKind::kD2DR);
  EXPECT_THROW(ul::unlearn(f.theta.topRows(10), f.labels, cfg), au::ShapeError);
  EXPECT_THROW(ul::unlearn(f.theta, AttributeTable::from_labels(std::vector<au::Label>(20, 0)), cfg),
               au::Error);
  Matrix bad = f.theta;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(ul::unlearn(bad, f.labels, cfg), au::Error);
}

TEST(LossKind, NamesRoundTrip) {
  for (auto k : {ul::LossKind::kU2UR, ul::LossKind::kD2DR}) {
    EXPECT_EQ(ul::parse_loss_kind(ul::to_string(k)), k);
  }
  EXPECT_EQ(ul::parse_loss_kind("D2D-R"), ul::LossKind::kD2DR);
  EXPECT_THROW(ul::parse_loss_kind("mmd"), au::Error);
}

namespace {

struct RetrainFixture {
  au::InteractionDataset ds;
  AttributeTable labels;
};

RetrainFixture retrain_fixture() {
  auto s = tst::synthetic_ratings(120, 60, 12, 21);
  RetrainFixture f;
  f.ds = au::split_dataset(s.raw, {}, 42);
  f.labels = au::build_attribute_table(f.ds, s.labels);
  return f;
}

}  // namespace

TEST(Retrain, ZeroLambdaReproducesPlainTraining) {
  const auto f = retrain_fixture();
  au::recsys::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 3;
  const auto plain = au::recsys::train_mf(f.ds, cfg);
  const auto r = ul::retrain_with_d2d(f.ds, f.labels, au::recsys::ModelKind::kMF, cfg, 0.0);
  EXPECT_EQ(r.model.user_emb, plain.user_emb);
  EXPECT_EQ(r.model.item_emb, plain.item_emb);
}

TEST(Retrain, PenaltyLowersGroupDiscrepancy) {
  const auto f = retrain_fixture();
  for (auto kind : {au::recsys::ModelKind::kMF, au::recsys::ModelKind::kLightGCN}) {
    auto cfg = au::recsys::TrainConfig::defaults(kind);
    cfg.epochs = kind == au::recsys::ModelKind::kMF ? 40 : 60;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 256;
    auto mmd = [&](const au::recsys::EmbeddingModel& m) {
      return ul::mmd_groups(m.user_emb, f.labels, ul::Bandwidth::median(), false).value;
    };
    const double plain = mmd(ul::retrain_with_d2d(f.ds, f.labels, kind, cfg, 0.0).model);
    const double penalized = mmd(ul::retrain_with_d2d(f.ds, f.labels, kind, cfg, 1.0).model);
    EXPECT_LE(penalized, plain) << au::recsys::to_string(kind);
    EXPECT_LT(penalized, 0.5 * plain) << au::recsys::to_string(kind);
  }
}

TEST(Retrain, RejectsBadArguments) {
  const auto f = retrain_fixture();
  au::recsys::TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(ul::retrain_with_d2d(f.ds, f.labels, au::recsys::ModelKind::kMF, cfg, -1.0), au::Error);
  EXPECT_THROW(ul::retrain_with_d2d(f.ds, AttributeTable::from_labels({0, 1}),
                                    au::recsys::ModelKind::kMF, cfg, 1.0),
               au::ShapeError);
}
