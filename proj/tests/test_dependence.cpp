#include "csilab/dependence.hpp"

#include <gtest/gtest.h>

#include "csilab/features.hpp"
#include "csilab/rng.hpp"
#include "csilab/scene.hpp"

using namespace csilab;

TEST(PlugInEntropy, UniformFourSymbols) {
  const std::vector<int> xs = {0, 1, 2, 3, 0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(plug_in_entropy(xs), 2.0);
}

TEST(PlugInEntropy, SingleSymbolIsZero) {
  const std::vector<int> xs(10, 7);
  EXPECT_DOUBLE_EQ(plug_in_entropy(xs), 0.0);
}

TEST(PlugInEntropy, SkewedCounts) {
  const std::vector<char> xs = {'a', 'a', 'b', 'c'};
  EXPECT_NEAR(plug_in_entropy(xs), 1.5, 1e-12);
}

TEST(PlugInEntropy, BoundedByLogAlphabet) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> xs;
    const int alphabet = 1 + static_cast<int>(rng.uniform_int(0, 9));
    for (int i = 0; i < 200; ++i) xs.push_back(static_cast<int>(rng.uniform_int(0, alphabet - 1)));
    EXPECT_LE(plug_in_entropy(xs), std::log2(static_cast<double>(alphabet)) + 1e-12);
  }
}

TEST(MutualInformation, PerfectlyCoupledBinary) {
  const std::vector<std::size_t> a = {0, 1, 0, 1};
  DiscreteJoint j = make_joint(a, a, 2, 2);
  EXPECT_NEAR(mutual_information(j), 1.0, 1e-12);
}

TEST(MutualInformation, ExactProductJointIsZero) {
  DiscreteJoint j;
  j.counts.setZero(2, 2);
  j.counts << 1, 1, 1, 1;
  j.n = 4;
  EXPECT_NEAR(mutual_information(j), 0.0, 1e-12);
}

TEST(MutualInformation, MatchesTermByTermOracle) {
  DiscreteJoint j;
  j.counts.setZero(2, 2);
  j.counts << 1, 1, 0, 2;
  j.n = 4;
  // Direct summation with hand-written marginals.
  const double pa0 = 0.5, pa1 = 0.5, pb0 = 0.25, pb1 = 0.75;
  double want = 0.0;
  want += 0.25 * std::log2(0.25 / (pa0 * pb0));
  want += 0.25 * std::log2(0.25 / (pa0 * pb1));
  want += 0.50 * std::log2(0.50 / (pa1 * pb1));
  EXPECT_NEAR(mutual_information(j), want, 1e-12);
}

TEST(MutualInformation, SelfInformationEqualsEntropy) {
  Rng rng(2);
  std::vector<std::size_t> xs;
  for (int i = 0; i < 500; ++i) xs.push_back(static_cast<std::size_t>(rng.uniform_int(0, 5)));
  DiscreteJoint j = make_joint(xs, xs, 6, 6);
  std::vector<std::size_t> copy = xs;
  EXPECT_NEAR(mutual_information(j), plug_in_entropy(copy), 1e-12);
}

TEST(MutualInformation, SymmetricUnderTranspose) {
  Rng rng(3);
  std::vector<std::size_t> a, b;
  for (int i = 0; i < 400; ++i) {
    a.push_back(static_cast<std::size_t>(rng.uniform_int(0, 4)));
    b.push_back(static_cast<std::size_t>(rng.uniform_int(0, 4)) == 0 ? a.back() % 5
                                                                     : static_cast<std::size_t>(
                                                                           rng.uniform_int(0, 4)));
  }
  DiscreteJoint j = make_joint(a, b, 5, 5);
  DiscreteJoint jt;
  jt.counts = j.counts.transpose();
  jt.n = j.n;
  EXPECT_NEAR(mutual_information(j), mutual_information(jt), 1e-12);
}

TEST(MutualInformation, BoundsHoldOnRandomJoints) {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::size_t> a, b;
    for (int i = 0; i < 300; ++i) {
      a.push_back(static_cast<std::size_t>(rng.uniform_int(0, 7)));
      b.push_back((a.back() + static_cast<std::size_t>(rng.uniform_int(0, 2))) % 8);
    }
    DiscreteJoint j = make_joint(a, b, 8, 8);
    const double mi = mutual_information(j);
    const auto [ha, hb] = marginal_entropies(j);
    EXPECT_GE(mi, 0.0);
    EXPECT_LE(mi, std::min(ha, hb));
  }
}

namespace {

MatR random_matrix(Rng& rng, int n, int p) {
  MatR m(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST(AvgCanonicalCorrelation, SelfCorrelationIsOne) {
  Rng rng(5);
  const MatR x = random_matrix(rng, 200, 4);
  EXPECT_NEAR(avg_canonical_correlation(x, x, 0.0), 1.0, 1e-9);
}

TEST(AvgCanonicalCorrelation, InvariantToInvertibleMaps) {
  Rng rng(6);
  const MatR x = random_matrix(rng, 300, 5);
  MatR a(5, 5);
  do {
    a = random_matrix(rng, 5, 5);
  } while (std::abs(a.determinant()) < 1e-3);
  const MatR y = x * a;
  EXPECT_NEAR(avg_canonical_correlation(x, y, 0.0), 1.0, 1e-8);
}

TEST(AvgCanonicalCorrelation, IndependentSamplesNearZero) {
  Rng rng(7);
  const MatR x = random_matrix(rng, 10000, 4);
  const MatR y = random_matrix(rng, 10000, 4);
  const double r = avg_canonical_correlation(x, y);
  EXPECT_GE(r, 0.0);
  EXPECT_LT(r, 0.1);
}

TEST(AvgCanonicalCorrelation, RankDeficientWithoutRidgeFails) {
  Rng rng(8);
  MatR x = random_matrix(rng, 100, 4);
  x.col(3) = x.col(0);  // exact collinearity
  const MatR y = random_matrix(rng, 100, 3);
  EXPECT_THROW(avg_canonical_correlation(x, y, 0.0), NumericalError);
  EXPECT_NO_THROW(avg_canonical_correlation(x, y, 1e-6));
}

TEST(AvgCanonicalCorrelation, StaysInUnitInterval) {
  Rng rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    const MatR x = random_matrix(rng, 80, 3);
    MatR y = random_matrix(rng, 80, 5);
    y.col(0) = x.col(1) * 0.7 + 0.3 * y.col(0);
    const double r = avg_canonical_correlation(x, y);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
}

namespace {

// Quantized channel index at a site whose scatterer cluster is drawn around
// `center`; the user stays fixed, so draws with disjoint clusters share no
// randomness.
std::size_t cluster_index(const Site& site, const Vec2& cluster_center, const Vec2& user_pos,
                          const Codebook& cb, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene;
  scene.sites = {site};
  scene.users = {User{"u0", user_pos, Vec2{0, 0}}};
  scene.los_enabled.default_enabled = false;
  for (int s = 0; s < 4; ++s) {
    const double r = 25.0 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(-kPi, kPi);
    scene.scatterers.push_back(Scatterer{cluster_center + r * Vec2{std::cos(phi), std::sin(phi)},
                                         std::polar(rng.uniform(0.3, 0.9), rng.uniform(-kPi, kPi))});
  }
  return quantize(generate_channel(scene, site.id, "u0", 0).h, cb);
}

}  // namespace

TEST(MutualInformation, NoSharedPathsMeansIndependentIndices) {
  // Each site's channel is driven by its own scatterer cluster, redrawn per
  // trial; LoS is off and the user is pinned, so the two index streams are
  // independent and the MI estimate must stay under the plug-in bias scale.
  const Site site_a{"a", Vec2{0, 0}, ArrayGeometry{16, 0.5, 0.0}, 0.1};
  const Site site_b{"b", Vec2{500, 0}, ArrayGeometry{16, 0.5, -kPi}, 0.1};
  const Vec2 user{250, 60};
  const Codebook cb = build_dft_codebook(16, 1);

  const int n = 4000;
  std::vector<std::size_t> ia, ib, ia_shared, ib_shared;
  for (int t = 0; t < n; ++t) {
    ia.push_back(cluster_index(site_a, Vec2{60, 30}, user, cb, derive_seed(11, 2 * t)));
    ib.push_back(cluster_index(site_b, Vec2{440, 30}, user, cb, derive_seed(11, 2 * t + 1)));
    // Shared-cluster control: one cluster visible from both sites, its center
    // sweeping a wide arc so both indices track the same random position.
    Rng crng(derive_seed(13, t));
    const Vec2 center{crng.uniform(60.0, 440.0), 90.0};
    ia_shared.push_back(cluster_index(site_a, center, user, cb, derive_seed(14, t)));
    ib_shared.push_back(cluster_index(site_b, center, user, cb, derive_seed(14, t)));
  }
  const double bias_bound = 15.0 * 15.0 / (2.0 * n * std::log(2.0));
  const double mi_indep = mutual_information(make_joint(ia, ib, 16, 16));
  EXPECT_LT(mi_indep, 3.0 * bias_bound);

  const double mi_shared = mutual_information(make_joint(ia_shared, ib_shared, 16, 16));
  EXPECT_GT(mi_shared, 10.0 * bias_bound);
}

TEST(StackRealImag, LayoutAndLength) {
  VecC h(2);
  h << cplx(1.0, 2.0), cplx(-3.0, 0.5);
  const VecR v = stack_real_imag(h);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v[0], 1.0);
  EXPECT_EQ(v[1], -3.0);
  EXPECT_EQ(v[2], 2.0);
  EXPECT_EQ(v[3], 0.5);
}
