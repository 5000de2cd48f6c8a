#pragma once

#include <span>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/rng.hpp"
#include "csilab/scene.hpp"

namespace csilab {

namespace detail {

template <typename F>
double golden_section_max(F&& f, double lo, double hi, double tol) {
  constexpr double gr = 0.6180339887498949;  // (sqrt(5)-1)/2
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Maximum-likelihood AoA for a single ULA snapshot: maximizes |a(theta)^H y|^2
/// with a coarse sin-angle grid followed by golden-section refinement.
/// Returns the boresight-relative angle.
inline double aoa_ml_estimate(const ArrayGeometry& arr, const VecC& y, int coarse_grid = 1024,
                              double tol = 1e-6) {
  if (y.size() != arr.num_elements) throw std::invalid_argument("aoa_ml_estimate: length mismatch");
  if (y.norm() == 0.0) throw DegenerateInputError("aoa_ml_estimate: zero observation");
  ArrayGeometry local = arr;
  local.orientation = 0.0;
  const auto objective = [&](double theta) {
    return std::norm(steering_vector(local, theta).dot(y));
  };
  int best = 0;
  double best_val = -1.0;
  std::vector<double> angles(coarse_grid);
  for (int i = 0; i < coarse_grid; ++i) {
    const double u = -1.0 + 2.0 * (i + 0.5) / coarse_grid;
    angles[i] = std::asin(u);
    const double v = objective(angles[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  const double lo = best > 0 ? angles[best - 1] : -kPi / 2.0;
  const double hi = best + 1 < coarse_grid ? angles[best + 1] : kPi / 2.0;
  return detail::golden_section_max(objective, lo, hi, tol);
}

enum class AoaMode { kTwoSite, kOneSite };

/// Monte-Carlo sweep configuration for the remote-AoA error scaling check.
/// Pure line-of-sight: each known site observes one noisy snapshot of the
/// user at fixed per-antenna SNR.
struct AoaScalingConfig {
  AoaMode mode = AoaMode::kTwoSite;
  Vec2 site_a{0.0, 0.0};
  Vec2 site_b{500.0, 0.0};
  Vec2 target{250.0, 300.0};
  RegionRect user_region{150.0, 60.0, 350.0, 180.0};
  std::vector<int> m_values{8, 16, 32, 64, 128};
  double snr_db = 10.0;  // per antenna; +inf for noiseless snapshots
  std::uint64_t trials = 2000;
  std::uint64_t seed = 1;
  int coarse_grid = 1024;
  double refine_tol = 1e-6;
  double wavelength = 0.1;
  double spacing = 0.5;
  double pathloss_exponent = 2.0;
};

struct ScalingReport {
  std::vector<int> m_values;
  std::vector<double> mse_values;  // radians^2
  double fitted_slope = 0.0;
  std::vector<std::uint64_t> discarded;  // near-parallel triangulations per M
  std::uint64_t trials_per_m = 0;
};

namespace detail {

struct AoaTrialResult {
  double sq_err = 0.0;
  bool discarded = false;
};

/// Ray-ray intersection; false when bearings are near-parallel or the
/// intersection lies behind either site.
inline bool triangulate(const Vec2& pa, double phi_a, const Vec2& pb, double phi_b, Vec2& out) {
  const Vec2 ua{std::cos(phi_a), std::sin(phi_a)};
  const Vec2 ub{std::cos(phi_b), std::sin(phi_b)};
  const double cross = ua.x() * ub.y() - ua.y() * ub.x();
  if (std::abs(cross) < 1e-3) return false;
  const Vec2 delta = pb - pa;
  const double ta = (delta.x() * ub.y() - delta.y() * ub.x()) / cross;
  const double tb = (delta.x() * ua.y() - delta.y() * ua.x()) / cross;
  if (ta <= 0.0 || tb <= 0.0) return false;
  out = pa + ta * ua;
  return true;
}

}  // namespace detail

/// For each array size M, runs `trials` independent estimates of the AoA at
/// the unobserved target site and reports the mean squared angular error plus
/// the log-log slope of MSE versus M.
inline ScalingReport remote_aoa_scaling(const AoaScalingConfig& cfg, unsigned threads = 1) {
  if (cfg.trials < 1) throw std::invalid_argument("remote_aoa_scaling: trials < 1");
  if (cfg.m_values.empty()) throw std::invalid_argument("remote_aoa_scaling: no M values");
  for (std::size_t i = 1; i < cfg.m_values.size(); ++i)
    if (cfg.m_values[i] <= cfg.m_values[i - 1])
      throw std::invalid_argument("remote_aoa_scaling: m_values must be strictly increasing");
  if (!cfg.user_region.well_formed()) throw ConfigError("remote_aoa_scaling: empty user_region");

  const Vec2 region_center{0.5 * (cfg.user_region.x0 + cfg.user_region.x1),
                           0.5 * (cfg.user_region.y0 + cfg.user_region.y1)};
  const double snr_lin = std::isinf(cfg.snr_db) ? 0.0 : std::pow(10.0, -cfg.snr_db / 10.0);

  ScalingReport report;
  report.m_values = cfg.m_values;
  report.trials_per_m = cfg.trials;

  for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
    const int m = cfg.m_values[mi];
    const ArrayGeometry arr_a{m, cfg.spacing, bearing(cfg.site_a, region_center)};
    const ArrayGeometry arr_b{m, cfg.spacing, bearing(cfg.site_b, region_center)};

    std::vector<detail::AoaTrialResult> results(cfg.trials);
    parallel_for(cfg.trials, threads, [&](std::size_t t) {
      Rng rng(derive_seed(cfg.seed, (static_cast<std::uint64_t>(mi) << 32) + t));
      const Vec2 user = cfg.user_region.sample(rng);
      const double true_remote = bearing(cfg.target, user);

      const auto observe = [&](const Vec2& site, const ArrayGeometry& arr, double& phi_hat,
                               double& amp_hat) {
        const double d = (site - user).norm();
        const double amp = std::pow(cfg.wavelength / (4.0 * kPi * d), cfg.pathloss_exponent / 2.0);
        const double rel = wrap_angle(bearing(site, user) - arr.orientation);
        ArrayGeometry boresight = arr;
        boresight.orientation = 0.0;
        VecC y = amp * std::polar(1.0, -2.0 * kPi * d / cfg.wavelength) *
                 steering_vector(boresight, rel);
        const double noise_var = amp * amp * snr_lin;
        if (noise_var > 0)
          for (int i = 0; i < m; ++i) y[i] += rng.cnormal(noise_var);
        const double rel_hat = aoa_ml_estimate(arr, y, cfg.coarse_grid, cfg.refine_tol);
        phi_hat = arr.orientation + rel_hat;
        amp_hat = std::abs(steering_vector(boresight, rel_hat).dot(y)) / m;
      };

      double phi_a, amp_a;
      observe(cfg.site_a, arr_a, phi_a, amp_a);

      Vec2 estimate;
      if (cfg.mode == AoaMode::kTwoSite) {
        double phi_b, amp_b;
        observe(cfg.site_b, arr_b, phi_b, amp_b);
        if (!detail::triangulate(cfg.site_a, phi_a, cfg.site_b, phi_b, estimate)) {
          results[t].discarded = true;
          return;
        }
      } else {
        // Amplitude-based ranging under the known pathloss law.
        const double d_hat = cfg.wavelength /
                             (4.0 * kPi * std::pow(amp_a, 2.0 / cfg.pathloss_exponent));
        estimate = cfg.site_a + d_hat * Vec2{std::cos(phi_a), std::sin(phi_a)};
      }
      const double err = wrap_angle(bearing(cfg.target, estimate) - true_remote);
      results[t].sq_err = err * err;
    });

    double acc = 0.0;
    std::uint64_t kept = 0, dropped = 0;
    for (const auto& r : results) {
      if (r.discarded) {
        ++dropped;
      } else {
        acc += r.sq_err;
        ++kept;
      }
    }
    if (dropped * 10 > cfg.trials)
      throw DegenerateGeometryError("remote_aoa_scaling: over 10% of triangulations discarded");
    report.mse_values.push_back(kept > 0 ? acc / static_cast<double>(kept) : 0.0);
    report.discarded.push_back(dropped);
  }

  // Least-squares slope of log(MSE) against log(M).
  const std::size_t k = report.m_values.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double x = std::log(static_cast<double>(report.m_values[i]));
    const double y = std::log(std::max(report.mse_values[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = sxx - sx * sx / static_cast<double>(k);
  report.fitted_slope = denom > 0 ? (sxy - sx * sy / static_cast<double>(k)) / denom : 0.0;
  return report;
}

}  // namespace csilab
