#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "collab/estimators.hpp"

using namespace collab;

namespace {

Allocation alloc1(std::vector<double> clean, std::vector<double> corrupted, double eta_sq) {
  return {Dataset::scalars(std::move(clean)), Dataset::scalars(std::move(corrupted)), Vec{eta_sq}};
}

const ProblemParams kParams = make_params(1.0, 1.0 / 900.0, 9);

Dataset shifted(const Dataset& x, double t) {
  Dataset out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (double& v : out.point(i)) v += t;
  return out;
}

Dataset scaled(const Dataset& x, double s) {
  Dataset out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (double& v : out.point(i)) v *= s;
  return out;
}

}  // namespace

TEST(Submission, IdentityScaleShift) {
  Engine eng(1);
  const auto x = Dataset::scalars({1.0, 2.0, 3.0});
  EXPECT_EQ(apply_submission(submit::Identity{}, x, kParams, eng), x);
  EXPECT_EQ(apply_submission(submit::Scale{0.5}, Dataset::scalars({2.0, 4.0}), kParams, eng),
            Dataset::scalars({1.0, 2.0}));
  EXPECT_EQ(apply_submission(submit::Shift{1.0}, x, kParams, eng), Dataset::scalars({2.0, 3.0, 4.0}));
  EXPECT_EQ(apply_submission(submit::SubmitConstant{0.0}, x, kParams, eng), Dataset::scalars({0.0, 0.0, 0.0}));
  EXPECT_TRUE(apply_submission(submit::Empty{}, x, kParams, eng).empty());
}

TEST(Submission, SubsetKeepsPrefix) {
  Engine eng(1);
  const auto x = Dataset::points({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(apply_submission(submit::Subset{2}, x, kParams, eng), Dataset::points({{1, 2}, {3, 4}}));
  try {
    apply_submission(submit::Subset{4}, x, kParams, eng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SubsetTooLarge);
  }
}

TEST(Submission, ShrinkConvergesToIdentity) {
  Engine eng(1);
  const auto x = Dataset::scalars({1.0, -2.0, 3.0});
  const auto y = apply_submission(submit::ShrinkEll{1.0}, x, kParams, eng);
  EXPECT_DOUBLE_EQ(y.point(0)[0], 1.0 / (1.0 + 1.0 / 3.0));
  const auto far = apply_submission(submit::ShrinkEll{1e8}, x, kParams, eng);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(far.point(i)[0], x.point(i)[0], 1e-15);
}

TEST(Submission, FabricationFitsMoments) {
  Engine eng(3);
  const auto x = Dataset::points({{1.0, 10.0}, {3.0, 14.0}});
  const auto y = apply_submission(submit::FabricateFitGaussian{200000}, x, kParams, eng);
  EXPECT_EQ(y.size(), 200000u);
  EXPECT_EQ(y.dim(), 2u);
  const Vec mu = y.mean();
  EXPECT_NEAR(mu[0], 2.0, 0.01);
  EXPECT_NEAR(mu[1], 12.0, 0.02);
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ss += (y.point(i)[1] - mu[1]) * (y.point(i)[1] - mu[1]);
  EXPECT_NEAR(ss / (y.size() - 1), 8.0, 0.1);  // unbiased variance of {10, 14}
}

TEST(Submission, FabricationFromSinglePointUsesSigma) {
  Engine eng(4);
  const auto y = apply_submission(submit::FabricateFitGaussian{100000}, Dataset::scalars({5.0}), kParams, eng);
  const double mu = y.mean()[0];
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ss += (y.point(i)[0] - mu) * (y.point(i)[0] - mu);
  EXPECT_NEAR(mu, 5.0, 0.02);
  EXPECT_NEAR(ss / (y.size() - 1), 1.0, 0.02);
  EXPECT_THROW(apply_submission(submit::FabricateFitGaussian{3}, Dataset(1), kParams, eng), Error);
}

TEST(Estimate, RecommendedWeightedHandValue) {
  const auto x = Dataset::scalars({0.0, 2.0});
  const auto a = alloc1({4.0}, {10.0}, 1.0);
  EXPECT_NEAR(estimate(est::RecommendedWeighted{}, x, x, a, 1.0)[0], 22.0 / 7.0, 1e-15);
}

TEST(Estimate, ZeroCorruptionIsPlainMean) {
  const auto x = Dataset::scalars({0.5, 2.0, -1.0});
  const auto a = alloc1({4.0, 3.0}, {10.0, -7.0, 1.5}, 0.0);
  EXPECT_NEAR(estimate(est::RecommendedWeighted{}, x, x, a, 2.0)[0], estimate(est::PlainMeanAll{}, x, x, a, 2.0)[0],
              1e-15);
}

TEST(Estimate, NoCorruptedSetIsCleanMean) {
  const auto x = Dataset::scalars({0.0, 2.0});
  const auto a = alloc1({4.0}, {}, 3.0);
  EXPECT_DOUBLE_EQ(estimate(est::RecommendedWeighted{}, x, x, a, 1.0)[0], 2.0);
  EXPECT_DOUBLE_EQ(estimate(est::CleanOnlyMean{}, x, x, a, 1.0)[0], 2.0);
}

TEST(Estimate, InfiniteVarianceIgnoresCorrupted) {
  const auto x = Dataset::scalars({0.0, 2.0});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto a = alloc1({4.0}, {nan, nan}, std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(estimate(est::RecommendedWeighted{}, x, Dataset(1), a, 1.0)[0], 2.0);
  EXPECT_TRUE(std::isnan(estimate(est::PlainMeanAll{}, x, Dataset(1), a, 1.0)[0]));
}

TEST(Estimate, FixedWeightedUsesTau) {
  const auto x = Dataset::scalars({0.0, 2.0});
  const auto a = alloc1({4.0}, {10.0}, 1000.0);
  EXPECT_NEAR(estimate(est::FixedWeighted{1.0}, x, x, a, 1.0)[0], 22.0 / 7.0, 1e-15);
}

TEST(Estimate, OwnOnlyAndDeployed) {
  const auto x = Dataset::scalars({1.0, 3.0});
  const auto y = Dataset::scalars({5.0});
  const auto a = alloc1({}, {7.0, 9.0}, 1.0);
  EXPECT_DOUBLE_EQ(estimate(est::OwnDataOnlyMean{}, x, y, a, 1.0)[0], 2.0);
  EXPECT_DOUBLE_EQ(estimate(est::Deployed{}, x, y, a, 1.0)[0], 7.0);
}

TEST(Estimate, PosteriorMeanLimits) {
  const auto x = Dataset::scalars({0.0, 2.0});
  const auto a = alloc1({4.0}, {10.0}, 1.0);
  EXPECT_NEAR(estimate(est::PosteriorMean{1e7}, x, x, a, 1.0)[0], 22.0 / 7.0, 1e-12);
  // prior precision 1 adds to the denominator only
  EXPECT_NEAR(estimate(est::PosteriorMean{1.0}, x, x, a, 1.0)[0], 11.0 / 4.5, 1e-15);
}

TEST(Estimate, Errors) {
  const Allocation empty{Dataset(1), Dataset(1), Vec{0.0}};
  try {
    estimate(est::PlainMeanAll{}, Dataset(1), Dataset(1), empty, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  const Allocation mixed{Dataset::points({{1.0, 2.0}}), Dataset(2), Vec{0.0, 0.0}};
  try {
    estimate(est::PlainMeanAll{}, Dataset::scalars({1.0}), Dataset(1), mixed, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Estimate, LocationEquivariance) {
  const auto x = Dataset::points({{0.3, -1.0}, {2.0, 0.5}});
  const Allocation a{Dataset::points({{4.0, 1.0}}), Dataset::points({{10.0, 2.0}, {-3.0, 7.0}}), Vec{1.5, 0.2}};
  const double t = 17.25;
  const Allocation at{shifted(a.clean, t), shifted(a.corrupted, t), a.eta_sq};
  for (const EstimatorChoice& c : {EstimatorChoice{est::PlainMeanAll{}}, EstimatorChoice{est::RecommendedWeighted{}},
                                   EstimatorChoice{est::FixedWeighted{0.7}}, EstimatorChoice{est::CleanOnlyMean{}},
                                   EstimatorChoice{est::OwnDataOnlyMean{}}, EstimatorChoice{est::Deployed{}}}) {
    const Vec base = estimate(c, x, x, a, 1.0);
    const Vec moved = estimate(c, shifted(x, t), shifted(x, t), at, 1.0);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(moved[k], base[k] + t, 1e-12) << describe(c);
  }
}

TEST(Estimate, ScaleEquivariance) {
  const auto x = Dataset::scalars({0.3, 2.0, -0.4});
  const auto a = alloc1({4.0, 1.0}, {10.0, -3.0}, 1.5);
  const double s = 3.5;
  const Allocation as{scaled(a.clean, s), scaled(a.corrupted, s), Vec{a.eta_sq[0] * s * s}};
  EXPECT_NEAR(estimate(est::RecommendedWeighted{}, scaled(x, s), x, as, 2.0 * s)[0],
              s * estimate(est::RecommendedWeighted{}, x, x, a, 2.0)[0], 1e-12);
}

TEST(Estimate, CorruptionWeightMonotone) {
  const auto x = Dataset::scalars({0.0, 2.0});
  const double clean_mean = 2.0;  // mean of X and D = {0, 2, 4}
  double prev = std::numeric_limits<double>::infinity();
  for (double eta : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    const double v = estimate(est::RecommendedWeighted{}, x, x, alloc1({4.0}, {10.0}, eta), 1.0)[0];
    EXPECT_LT(std::abs(v - clean_mean), prev);
    prev = std::abs(v - clean_mean);
  }
}

TEST(Estimate, PlainMeanOfSingleDataset) {
  const auto x = Dataset::scalars({0.1, 0.2, 0.3, 0.4});
  const Allocation a{Dataset(1), Dataset(1), {}};
  EXPECT_DOUBLE_EQ(estimate(est::PlainMeanAll{}, x, x, a, 1.0)[0], (0.1 + 0.2 + 0.3 + 0.4) / 4.0);
}

TEST(Estimate, EquivarianceClassification) {
  EXPECT_TRUE(is_translation_equivariant(SubmissionRule{submit::Shift{1.0}}));
  EXPECT_TRUE(is_translation_equivariant(SubmissionRule{submit::FabricateFitGaussian{3}}));
  EXPECT_FALSE(is_translation_equivariant(SubmissionRule{submit::Scale{0.5}}));
  EXPECT_FALSE(is_translation_equivariant(SubmissionRule{submit::SubmitConstant{0.0}}));
  EXPECT_FALSE(is_translation_equivariant(EstimatorChoice{est::PosteriorMean{1.0}}));
}
