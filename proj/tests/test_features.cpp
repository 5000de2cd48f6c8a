#include "csilab/features.hpp"

#include <gtest/gtest.h>

#include "csilab/rng.hpp"

using namespace csilab;

namespace {

VecC random_complex(Rng& rng, int n) {
  VecC v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.cnormal(1.0);
  return v;
}

}  // namespace

TEST(AngularTransform, CodebookAngleGivesOneHot) {
  // A steering vector at a Q=1 beam angle is a scaled DFT column.
  const Codebook cb = build_dft_codebook(4, 1);
  const VecC h = 2.0 * cb.codewords[2];  // sqrt(M) * codeword = steering vector
  const VecC y = angular_transform(h);
  int nonzero = 0;
  for (int k = 0; k < 4; ++k)
    if (std::abs(y[k]) > 1e-9) ++nonzero;
  EXPECT_EQ(nonzero, 1);
  EXPECT_NEAR(y.cwiseAbs().maxCoeff(), 2.0, 1e-12);
}

TEST(AngularTransform, PreservesNorm) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const VecC h = random_complex(rng, 17);
    const VecC y = angular_transform(h);
    EXPECT_NEAR(y.norm(), h.norm(), 1e-12 * h.norm());
  }
}

TEST(AngularTransform, RoundTrip) {
  Rng rng(6);
  const VecC h = random_complex(rng, 33);
  const VecC back = inverse_angular_transform(angular_transform(h));
  EXPECT_LT((back - h).norm(), 1e-12 * h.norm());
}

TEST(LogWhiten, ConstantVectorMapsToZero) {
  EXPECT_NEAR(log_whiten(VecR::Ones(8), 1e-12).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  VecR es = VecR::Constant(2, std::exp(1.0));
  EXPECT_NEAR(log_whiten(es, 1e-12).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(LogWhiten, TwoPointStandardization) {
  VecR x(2);
  x << 1.0, std::exp(2.0);
  const VecR y = log_whiten(x, 1e-12);
  EXPECT_NEAR(y[0], -1.0, 1e-12);
  EXPECT_NEAR(y[1], 1.0, 1e-12);
}

TEST(LogWhiten, FloorHandlesZeros) {
  VecR x(3);
  x << 0.0, 1.0, 2.0;
  const VecR y = log_whiten(x, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(std::isfinite(y[i]));
  EXPECT_NEAR(y.mean(), 0.0, 1e-12);
}

TEST(Codebook, OrthonormalForUnitOversampling) {
  const Codebook cb = build_dft_codebook(4, 1);
  ASSERT_EQ(cb.size(), 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double mag = std::abs(cb.codewords[i].dot(cb.codewords[j]));
      EXPECT_NEAR(mag, i == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Codebook, TwentyCodewordsForSmallSite) {
  const Codebook cb = build_dft_codebook(20, 1);
  EXPECT_EQ(cb.size(), 20);
  for (const auto& c : cb.codewords) EXPECT_NEAR(c.norm(), 1.0, 1e-12);
}

TEST(Codebook, OversampledInnerProducts) {
  const Codebook cb = build_dft_codebook(2, 2);
  ASSERT_EQ(cb.size(), 4);
  EXPECT_NEAR(std::abs(cb.codewords[0].dot(cb.codewords[2])), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(cb.codewords[0].dot(cb.codewords[1])), std::cos(kPi / 4.0), 1e-12);
}

TEST(Quantize, SelfMatch) {
  const Codebook cb = build_dft_codebook(8, 1);
  EXPECT_EQ(quantize(cb.codewords[3], cb), 3u);
}

TEST(Quantize, ScaleAndPhaseInvariant) {
  const Codebook cb = build_dft_codebook(8, 1);
  const VecC h = cplx(0.0, 5.0) * cb.codewords[3];
  EXPECT_EQ(quantize(h, cb), 3u);

  Rng rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const VecC g = random_complex(rng, 8);
    const cplx scale = std::polar(rng.uniform(0.1, 10.0), rng.uniform(-kPi, kPi));
    EXPECT_EQ(quantize(g, cb), quantize((scale * g).eval(), cb));
  }
}

TEST(Quantize, MatchesBruteForceOracle) {
  const Codebook cb = build_dft_codebook(8, 1);
  Rng rng(10);
  for (int rep = 0; rep < 100; ++rep) {
    const VecC h = random_complex(rng, 8);
    // Brute force with explicitly written inner products.
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t k = 0; k < 8; ++k) {
      cplx ip = 0.0;
      for (int n = 0; n < 8; ++n) ip += std::conj(cb.codewords[k][n]) * h[n];
      if (std::abs(ip) > best_mag) {
        best_mag = std::abs(ip);
        best = k;
      }
    }
    EXPECT_EQ(quantize(h, cb), best);
  }
}

TEST(Quantize, ZeroVectorRejected) {
  const Codebook cb = build_dft_codebook(4, 1);
  EXPECT_THROW(quantize(VecC::Zero(4), cb), DegenerateInputError);
}

TEST(BeamformingGain, AlignedAndOrthogonal) {
  Rng rng(11);
  const VecC h = random_complex(rng, 6);
  const VecC aligned = h / h.norm();
  EXPECT_NEAR(beamforming_gain(h, aligned), h.squaredNorm(), 1e-9);

  VecC orth = random_complex(rng, 6);
  orth -= aligned * aligned.dot(orth);
  orth /= orth.norm();
  EXPECT_NEAR(beamforming_gain(h, orth), 0.0, 1e-18);
}

TEST(BeamformingGain, MatchesDirectFormula) {
  Rng rng(12);
  const VecC h = random_complex(rng, 5);
  VecC w = random_complex(rng, 5);
  w /= w.norm();
  cplx ip = 0.0;
  for (int n = 0; n < 5; ++n) ip += std::conj(w[n]) * h[n];
  EXPECT_NEAR(beamforming_gain(h, w), std::norm(ip), 1e-12);
}

TEST(NormalizedError, OptimalCodewordGivesZero) {
  const Codebook cb = build_dft_codebook(16, 1);
  Rng rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    const VecC h = random_complex(rng, 16);
    EXPECT_EQ(normalized_error(h, quantize(h, cb), cb), 0.0);
  }
}

TEST(NormalizedError, OrthogonalCodewordGivesOne) {
  const Codebook cb = build_dft_codebook(8, 1);
  const VecC h = cb.codewords[2];  // orthogonal to every other codeword
  EXPECT_NEAR(normalized_error(h, 5, cb), 1.0, 1e-12);
}

TEST(NormalizedError, MatchesBruteForceOracle) {
  const Codebook cb = build_dft_codebook(8, 1);
  Rng rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    const VecC h = random_complex(rng, 8);
    const std::size_t inferred = static_cast<std::size_t>(rng.uniform_int(0, 7));
    double g_best = 0.0;
    for (const auto& c : cb.codewords) g_best = std::max(g_best, std::norm(c.dot(h)));
    const double want = 1.0 - std::norm(cb.codewords[inferred].dot(h)) / g_best;
    EXPECT_NEAR(normalized_error(h, inferred, cb), want, 1e-12);
  }
}

TEST(ComputeAps, GridSteeringVectorIsOneHot) {
  const int m = 8;
  const VecR grid = aps_grid(m);
  const VecC h = steering_vector(ArrayGeometry{m, 0.5, 0.0}, grid[5]);
  const std::vector<VecC> snaps = {h};
  const Aps aps = compute_aps(snaps, ArrayGeometry{m, 0.5, 0.0}, m);
  int nonzero = 0;
  for (int g = 0; g < m; ++g)
    if (aps.bins[g] > 1e-9) ++nonzero;
  EXPECT_EQ(nonzero, 1);
  EXPECT_NEAR(aps.bins[5], h.squaredNorm(), 1e-9);
}

TEST(ComputeAps, NonnegativeBins) {
  Rng rng(15);
  std::vector<VecC> snaps;
  for (int t = 0; t < 4; ++t) snaps.push_back(random_complex(rng, 8));
  const Aps aps = compute_aps(snaps, ArrayGeometry{8, 0.5, 0.0}, 32);
  EXPECT_GE(aps.bins.minCoeff(), 0.0);
}

TEST(ComputeAps, AveragingIsLinear) {
  Rng rng(16);
  const VecC a = random_complex(rng, 8);
  const VecC b = random_complex(rng, 8);
  const ArrayGeometry arr{8, 0.5, 0.0};
  const std::vector<VecC> both = {a, b};
  const std::vector<VecC> only_a = {a};
  const std::vector<VecC> only_b = {b};
  const Aps joint = compute_aps(both, arr, 16);
  const Aps pa = compute_aps(only_a, arr, 16);
  const Aps pb = compute_aps(only_b, arr, 16);
  EXPECT_LT((joint.bins - 0.5 * (pa.bins + pb.bins)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ComputeAps, BinsSumToMeanPower) {
  Rng rng(17);
  const ArrayGeometry arr{8, 0.5, 0.0};
  std::vector<VecC> snaps;
  double mean_power = 0.0;
  for (int t = 0; t < 3; ++t) {
    snaps.push_back(random_complex(rng, 8));
    mean_power += snaps.back().squaredNorm();
  }
  mean_power /= 3.0;
  for (int grid : {8, 16, 1024}) {
    const Aps aps = compute_aps(snaps, arr, grid);
    EXPECT_NEAR(aps.bins.sum(), mean_power, 1e-9 * mean_power) << "grid " << grid;
  }
}

TEST(ComputeAps, RejectsBadInputs) {
  const ArrayGeometry arr{8, 0.5, 0.0};
  EXPECT_THROW(compute_aps(std::span<const VecC>{}, arr, 16), std::invalid_argument);
  const std::vector<VecC> snaps = {VecC::Ones(8)};
  EXPECT_THROW(compute_aps(snaps, arr, 4), std::invalid_argument);
}

TEST(CodebookCompleteness, UnitOversamplingResolvesAllPower) {
  const Codebook cb = build_dft_codebook(12, 1);
  Rng rng(18);
  for (int rep = 0; rep < 20; ++rep) {
    const VecC h = random_complex(rng, 12);
    double total = 0.0;
    for (const auto& c : cb.codewords) total += std::norm(c.dot(h));
    EXPECT_NEAR(total, h.squaredNorm(), 1e-9 * h.squaredNorm());
  }
}
