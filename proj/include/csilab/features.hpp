#pragma once

#include <span>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/scene.hpp"

namespace csilab {

/// DFT beamforming codebook: K = Q*M unit-norm codewords of length M.
struct Codebook {
  int num_elements = 0;
  int oversampling = 1;
  std::vector<VecC> codewords;

  int size() const { return static_cast<int>(codewords.size()); }
};

/// Codeword k, element n: exp(j*2*pi*k*n / (Q*M)) / sqrt(M). With Q = 1 the
/// codewords form the orthonormal DFT basis.
inline Codebook build_dft_codebook(int num_elements, int oversampling = 1) {
  if (num_elements < 1) throw std::invalid_argument("build_dft_codebook: M < 1");
  if (oversampling < 1) throw std::invalid_argument("build_dft_codebook: Q < 1");
  Codebook cb;
  cb.num_elements = num_elements;
  cb.oversampling = oversampling;
  const int k_total = num_elements * oversampling;
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(num_elements));
  cb.codewords.reserve(k_total);
  for (int k = 0; k < k_total; ++k) {
    VecC c(num_elements);
    for (int n = 0; n < num_elements; ++n)
      c[n] = inv_sqrt_m * std::polar(1.0, 2.0 * kPi * k * n / k_total);
    cb.codewords.push_back(std::move(c));
  }
  return cb;
}

/// Unitary forward DFT; preserves the Euclidean norm.
inline VecC angular_transform(const VecC& h) {
  const auto m = h.size();
  if (m < 1) throw std::invalid_argument("angular_transform: empty input");
  VecC y(m);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  for (Eigen::Index k = 0; k < m; ++k) {
    cplx acc = 0.0;
    for (Eigen::Index n = 0; n < m; ++n)
      acc += h[n] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * n) / m);
    y[k] = acc * inv_sqrt_m;
  }
  return y;
}

inline VecC inverse_angular_transform(const VecC& y) {
  const auto m = y.size();
  if (m < 1) throw std::invalid_argument("inverse_angular_transform: empty input");
  VecC h(m);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  for (Eigen::Index n = 0; n < m; ++n) {
    cplx acc = 0.0;
    for (Eigen::Index k = 0; k < m; ++k)
      acc += y[k] * std::polar(1.0, 2.0 * kPi * static_cast<double>(k * n) / m);
    h[n] = acc * inv_sqrt_m;
  }
  return h;
}

/// Element-wise log of max(x, floor), then shifted and scaled to zero mean and
/// unit variance across the vector. A constant vector maps to all zeros.
inline VecR log_whiten(const VecR& x, double floor) {
  if (floor <= 0) throw std::invalid_argument("log_whiten: floor must be > 0");
  VecR y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = std::log(std::max(x[i], floor));
  const double mean = y.mean();
  y.array() -= mean;
  const double var = y.squaredNorm() / static_cast<double>(y.size());
  if (var < 1e-24) return VecR::Zero(x.size());
  return y / std::sqrt(var);
}

/// log_whiten with the default floor rule: 1e-12 of the vector maximum.
inline VecR log_whiten_auto(const VecR& x) {
  const double mx = x.maxCoeff();
  const double floor = mx > 0 ? 1e-12 * mx : 1e-300;
  return log_whiten(x, floor);
}

/// Index of the codeword with the largest |<c_k, h>|; ties go to the smaller
/// index.
inline std::size_t quantize(const VecC& h, const Codebook& cb) {
  if (h.size() != cb.num_elements) throw std::invalid_argument("quantize: length mismatch");
  if (h.squaredNorm() == 0.0) throw DegenerateInputError("quantize: zero channel vector");
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 0; k < cb.codewords.size(); ++k) {
    const double mag = std::norm(cb.codewords[k].dot(h));
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  return best;
}

/// |<w, h>|^2 for a unit-norm beamforming vector w.
inline double beamforming_gain(const VecC& h, const VecC& w) {
  if (h.size() != w.size()) throw std::invalid_argument("beamforming_gain: length mismatch");
  return std::norm(w.dot(h));
}

/// 1 - gain(h, codeword[index]) / gain(h, best codeword); lies in [0, 1].
inline double normalized_error(const VecC& h, std::size_t inferred_index, const Codebook& cb) {
  if (inferred_index >= cb.codewords.size())
    throw std::invalid_argument("normalized_error: index out of range");
  const std::size_t opt = quantize(h, cb);  // rejects h = 0
  const double g_opt = beamforming_gain(h, cb.codewords[opt]);
  const double g_inf = beamforming_gain(h, cb.codewords[inferred_index]);
  const double err = 1.0 - g_inf / g_opt;
  return std::min(1.0, std::max(0.0, err));
}

/// Nonnegative angular power spectrum over a grid uniform in sin(angle).
struct Aps {
  VecR bins;  // length G, all >= 0
  VecR grid;  // boresight-relative angles, asin of the uniform sin grid
};

/// Grid angle g of G: asin(-1 + 2g/G). For G = M and half-wavelength spacing
/// this is exactly the DFT beam set.
inline VecR aps_grid(int grid_size) {
  VecR grid(grid_size);
  for (int g = 0; g < grid_size; ++g)
    grid[g] = std::asin(-1.0 + 2.0 * static_cast<double>(g) / grid_size);
  return grid;
}

/// bin_g = (M/G) * mean_t |<a_g/sqrt(M), h_t>|^2. The M/G factor makes the
/// bins sum to the mean snapshot power for half-wavelength arrays.
inline Aps compute_aps(std::span<const VecC> snapshots, const ArrayGeometry& arr, int grid_size) {
  if (snapshots.empty()) throw std::invalid_argument("compute_aps: no snapshots");
  const int m = arr.num_elements;
  if (grid_size < m) throw std::invalid_argument("compute_aps: grid smaller than array");
  for (const auto& h : snapshots)
    if (h.size() != m) throw std::invalid_argument("compute_aps: snapshot length mismatch");

  Aps aps;
  aps.grid = aps_grid(grid_size);
  aps.bins = VecR::Zero(grid_size);
  // Steering matrix rows indexed by grid angle; boresight-relative, so the
  // array orientation does not enter.
  ArrayGeometry local = arr;
  local.orientation = 0.0;
  MatC steer(grid_size, m);
  for (int g = 0; g < grid_size; ++g)
    steer.row(g) = steering_vector(local, aps.grid[g]).conjugate();
  for (const auto& h : snapshots) aps.bins += (steer * h).cwiseAbs2();
  aps.bins *= 1.0 / (static_cast<double>(grid_size) * static_cast<double>(snapshots.size()));
  return aps;
}

}  // namespace csilab
