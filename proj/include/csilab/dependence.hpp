#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <map>
#include <span>
#include <vector>

#include "csilab/common.hpp"

namespace csilab {

/// Empirical joint law of two quantizer outputs: co-occurrence counts.
struct DiscreteJoint {
  Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  std::uint64_t n = 0;
};

inline DiscreteJoint make_joint(std::span<const std::size_t> a, std::span<const std::size_t> b,
                                std::size_t alphabet_a, std::size_t alphabet_b) {
  if (a.size() != b.size()) throw std::invalid_argument("make_joint: length mismatch");
  if (a.empty()) throw std::invalid_argument("make_joint: empty sample");
  DiscreteJoint j;
  j.counts.setZero(static_cast<Eigen::Index>(alphabet_a), static_cast<Eigen::Index>(alphabet_b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= alphabet_a || b[i] >= alphabet_b)
      throw std::invalid_argument("make_joint: symbol outside alphabet");
    j.counts(static_cast<Eigen::Index>(a[i]), static_cast<Eigen::Index>(b[i]))++;
  }
  j.n = a.size();
  return j;
}

/// Plug-in entropy in bits over the empirical symbol frequencies.
template <typename Symbol>
double plug_in_entropy(std::span<const Symbol> symbols) {
  if (symbols.empty()) throw std::invalid_argument("plug_in_entropy: empty sample");
  std::map<Symbol, std::uint64_t> counts;
  for (const auto& s : symbols) counts[s]++;
  const double n = static_cast<double>(symbols.size());
  double h = 0.0;
  for (const auto& [sym, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

template <typename Symbol>
double plug_in_entropy(const std::vector<Symbol>& symbols) {
  return plug_in_entropy(std::span<const Symbol>(symbols));
}

/// Marginal entropies of a joint in bits: {H(A), H(B)}.
inline std::pair<double, double> marginal_entropies(const DiscreteJoint& joint) {
  if (joint.n == 0) throw std::invalid_argument("marginal_entropies: empty joint");
  const double n = static_cast<double>(joint.n);
  double ha = 0.0, hb = 0.0;
  for (Eigen::Index i = 0; i < joint.counts.rows(); ++i) {
    const double p = static_cast<double>(joint.counts.row(i).sum()) / n;
    if (p > 0) ha -= p * std::log2(p);
  }
  for (Eigen::Index j = 0; j < joint.counts.cols(); ++j) {
    const double p = static_cast<double>(joint.counts.col(j).sum()) / n;
    if (p > 0) hb -= p * std::log2(p);
  }
  return {ha, hb};
}

/// Plug-in mutual information in bits. Zero-mass cells contribute nothing;
/// result is clamped into [0, min(H(A), H(B))] to absorb rounding.
inline double mutual_information(const DiscreteJoint& joint) {
  if (joint.n == 0) throw std::invalid_argument("mutual_information: empty joint");
  const double n = static_cast<double>(joint.n);
  const Eigen::Index ka = joint.counts.rows(), kb = joint.counts.cols();
  std::vector<double> pa(ka, 0.0), pb(kb, 0.0);
  for (Eigen::Index i = 0; i < ka; ++i) pa[i] = static_cast<double>(joint.counts.row(i).sum()) / n;
  for (Eigen::Index j = 0; j < kb; ++j) pb[j] = static_cast<double>(joint.counts.col(j).sum()) / n;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < ka; ++i)
    for (Eigen::Index j = 0; j < kb; ++j) {
      const std::uint64_t c = joint.counts(i, j);
      if (c == 0) continue;
      const double pij = static_cast<double>(c) / n;
      mi += pij * std::log2(pij / (pa[i] * pb[j]));
    }
  const auto [ha, hb] = marginal_entropies(joint);
  return std::min(std::max(mi, 0.0), std::min(ha, hb));
}

namespace detail {

/// Inverse matrix square root via eigendecomposition. With ridge == 0 a
/// near-singular spectrum is reported as a NumericalError instead of being
/// silently regularized.
inline MatR inverse_sqrt_spd(MatR cov, double ridge) {
  const Eigen::Index p = cov.rows();
  if (ridge > 0) {
    const double scale = cov.trace() / static_cast<double>(p);
    cov += ridge * scale * MatR::Identity(p, p);
  }
  Eigen::SelfAdjointEigenSolver<MatR> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericalError("avg_canonical_correlation: eigendecomposition failed");
  const VecR& d = eig.eigenvalues();
  const double dmax = d.maxCoeff();
  if (dmax <= 0 || d.minCoeff() <= dmax * 1e-13) {
    if (ridge <= 0)
      throw NumericalError("avg_canonical_correlation: rank-deficient covariance with no ridge");
  }
  VecR inv_sqrt(p);
  for (Eigen::Index i = 0; i < p; ++i)
    inv_sqrt[i] = d[i] > dmax * 1e-13 ? 1.0 / std::sqrt(d[i]) : 0.0;
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// Mean of the min(p, q) canonical correlation coefficients between the
/// column spaces of the centered samples, via singular values of the whitened
/// cross-covariance. Each covariance gets ridge * trace/dim on its diagonal.
inline double avg_canonical_correlation(const MatR& x, const MatR& y, double ridge = 1e-6) {
  if (x.rows() != y.rows()) throw std::invalid_argument("avg_canonical_correlation: row mismatch");
  const Eigen::Index n = x.rows(), p = x.cols(), q = y.cols();
  if (n < 2 || p < 1 || q < 1)
    throw std::invalid_argument("avg_canonical_correlation: need n >= 2 and nonempty blocks");

  const MatR xc = x.rowwise() - x.colwise().mean();
  const MatR yc = y.rowwise() - y.colwise().mean();
  const MatR sxx = xc.transpose() * xc / static_cast<double>(n);
  const MatR syy = yc.transpose() * yc / static_cast<double>(n);
  const MatR sxy = xc.transpose() * yc / static_cast<double>(n);

  const MatR wx = detail::inverse_sqrt_spd(sxx, ridge);
  const MatR wy = detail::inverse_sqrt_spd(syy, ridge);
  const MatR m = wx * sxy * wy;
  Eigen::BDCSVD<MatR> svd(m);
  const VecR& sv = svd.singularValues();
  const Eigen::Index k = std::min(p, q);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) acc += std::min(1.0, std::max(0.0, sv[i]));
  return acc / static_cast<double>(k);
}

/// Real-imaginary stacking for complex feature vectors, the convention used
/// before linear-correlation analysis.
inline VecR stack_real_imag(const VecC& h) {
  VecR v(2 * h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    v[i] = h[i].real();
    v[h.size() + i] = h[i].imag();
  }
  return v;
}

}  // namespace csilab
