#include "csilab/aoa.hpp"

#include <gtest/gtest.h>

#include "csilab/rng.hpp"

using namespace csilab;

namespace {

VecC noiseless_observation(const ArrayGeometry& arr, double angle, cplx gain) {
  return gain * steering_vector(arr, angle);
}

}  // namespace

TEST(AoaMlEstimate, RecoversNoiselessAngle) {
  ArrayGeometry arr{32, 0.5, 0.0};
  for (double angle : {-1.2, -0.4, 0.0, 0.3, 1.0}) {
    const VecC y = noiseless_observation(arr, angle, cplx(0.8, -0.4));
    EXPECT_NEAR(aoa_ml_estimate(arr, y), angle, 1e-5) << "angle=" << angle;
  }
}

TEST(AoaMlEstimate, WorksOffGridBetweenCoarsePoints) {
  ArrayGeometry arr{16, 0.5, 0.0};
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const double angle = std::asin(rng.uniform(-0.95, 0.95));
    const VecC y = noiseless_observation(arr, angle, std::polar(1.0, rng.uniform(-kPi, kPi)));
    EXPECT_NEAR(aoa_ml_estimate(arr, y), angle, 1e-5);
  }
}

TEST(AoaMlEstimate, RespectsArrayOrientation) {
  ArrayGeometry arr{16, 0.5, 0.7};
  const double relative = -0.25;
  const VecC y = steering_vector(arr, arr.orientation + relative);
  EXPECT_NEAR(aoa_ml_estimate(arr, y), relative, 1e-5);
}

TEST(AoaMlEstimate, RejectsBadInputs) {
  ArrayGeometry arr{8, 0.5, 0.0};
  EXPECT_THROW(aoa_ml_estimate(arr, VecC::Zero(8)), DegenerateInputError);
  EXPECT_THROW(aoa_ml_estimate(arr, VecC::Ones(4)), std::invalid_argument);
}

TEST(AoaMlEstimate, NoisyEstimateImprovesWithAperture) {
  Rng rng(22);
  const double angle = 0.2;
  double mse_small = 0.0, mse_large = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    for (int m : {8, 64}) {
      ArrayGeometry arr{m, 0.5, 0.0};
      VecC y = steering_vector(arr, angle);
      for (int i = 0; i < m; ++i) y[i] += rng.cnormal(0.1);
      const double err = aoa_ml_estimate(arr, y) - angle;
      (m == 8 ? mse_small : mse_large) += err * err / trials;
    }
  }
  EXPECT_LT(mse_large, mse_small / 10.0);
}

TEST(RemoteAoaScaling, NoiselessTrialsHaveNearZeroError) {
  AoaScalingConfig cfg;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  cfg.m_values = {8, 16};
  cfg.trials = 40;
  cfg.seed = 31;
  for (AoaMode mode : {AoaMode::kTwoSite, AoaMode::kOneSite}) {
    cfg.mode = mode;
    const ScalingReport rep = remote_aoa_scaling(cfg);
    ASSERT_EQ(rep.mse_values.size(), 2u);
    for (double mse : rep.mse_values) EXPECT_LT(mse, 1e-8);
  }
}

TEST(RemoteAoaScaling, DeterministicAcrossThreadCounts) {
  AoaScalingConfig cfg;
  cfg.m_values = {8, 32};
  cfg.trials = 60;
  cfg.seed = 32;
  cfg.mode = AoaMode::kTwoSite;
  const ScalingReport a = remote_aoa_scaling(cfg, 1);
  const ScalingReport b = remote_aoa_scaling(cfg, 4);
  ASSERT_EQ(a.mse_values.size(), b.mse_values.size());
  for (std::size_t i = 0; i < a.mse_values.size(); ++i)
    EXPECT_DOUBLE_EQ(a.mse_values[i], b.mse_values[i]);
  EXPECT_DOUBLE_EQ(a.fitted_slope, b.fitted_slope);
}

TEST(RemoteAoaScaling, TwoSiteSlopeNearMinusThree) {
  AoaScalingConfig cfg;
  cfg.mode = AoaMode::kTwoSite;
  cfg.m_values = {8, 16, 32, 64, 128};
  cfg.trials = 300;
  cfg.seed = 33;
  const ScalingReport rep = remote_aoa_scaling(cfg, 4);
  EXPECT_NEAR(rep.fitted_slope, -3.0, 0.8);
  for (std::size_t i = 1; i < rep.mse_values.size(); ++i)
    EXPECT_LT(rep.mse_values[i], rep.mse_values[i - 1]);
}

TEST(RemoteAoaScaling, OneSiteSlopeNearMinusOne) {
  AoaScalingConfig cfg;
  cfg.mode = AoaMode::kOneSite;
  cfg.m_values = {8, 16, 32, 64, 128};
  cfg.trials = 300;
  cfg.seed = 34;
  const ScalingReport rep = remote_aoa_scaling(cfg, 4);
  EXPECT_NEAR(rep.fitted_slope, -1.0, 0.5);
}

TEST(RemoteAoaScaling, CollinearGeometryIsRejected) {
  AoaScalingConfig cfg;
  cfg.mode = AoaMode::kTwoSite;
  cfg.site_a = Vec2{0, 0};
  cfg.site_b = Vec2{500, 0};
  // Users sit on the line through both sites, so every bearing pair is
  // parallel and triangulation can never intersect.
  cfg.user_region = RegionRect{150, -0.001, 350, 0.001};
  cfg.target = Vec2{250, 0};
  cfg.m_values = {8};
  cfg.trials = 50;
  cfg.seed = 35;
  EXPECT_THROW(remote_aoa_scaling(cfg), DegenerateGeometryError);
}
