#pragma once
// Multi-user scheduling on angular power spectrum overlap: conflict graphs,
// greedy coloring into compatible groups, and thresholded sum-rate scoring.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/features.hpp"
#include "csilab/mlp.hpp"
#include "csilab/rng.hpp"
#include "csilab/scene.hpp"
#include "csilab/tasks.hpp"

namespace csilab {

/// Cosine similarity between two spectra. Defined as 0 when either input is
/// all-zero, which only happens for degenerate channels.
inline double aps_overlap(const VecR& a, const VecR& b) {
  if (a.size() != b.size()) throw std::invalid_argument("aps_overlap: grid size mismatch");
  if (a.size() == 0) throw std::invalid_argument("aps_overlap: empty spectrum");
  if ((a.array() < 0.0).any() || (b.array() < 0.0).any())
    throw std::invalid_argument("aps_overlap: negative bin");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::min(1.0, a.dot(b) / (na * nb));
}

struct ConflictGraph {
  int num_vertices = 0;
  MatR overlap;                            // symmetric, pairwise aps_overlap
  std::vector<std::pair<int, int>> edges;  // u < v with overlap > threshold
  std::vector<std::vector<int>> neighbors;

  int degree(int v) const { return static_cast<int>(neighbors[static_cast<std::size_t>(v)].size()); }
};

inline ConflictGraph build_conflict_graph(const std::vector<VecR>& spectra, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("build_conflict_graph: threshold outside [0, 1]");
  ConflictGraph g;
  g.num_vertices = static_cast<int>(spectra.size());
  g.overlap = MatR::Zero(g.num_vertices, g.num_vertices);
  g.neighbors.assign(static_cast<std::size_t>(g.num_vertices), {});
  for (int u = 0; u < g.num_vertices; ++u) {
    g.overlap(u, u) = aps_overlap(spectra[static_cast<std::size_t>(u)],
                                  spectra[static_cast<std::size_t>(u)]);
    for (int v = u + 1; v < g.num_vertices; ++v) {
      const double w = aps_overlap(spectra[static_cast<std::size_t>(u)],
                                   spectra[static_cast<std::size_t>(v)]);
      g.overlap(u, v) = w;
      g.overlap(v, u) = w;
      if (w > threshold) {
        g.edges.emplace_back(u, v);
        g.neighbors[static_cast<std::size_t>(u)].push_back(v);
        g.neighbors[static_cast<std::size_t>(v)].push_back(u);
      }
    }
  }
  return g;
}

struct GroupAssignment {
  std::vector<int> group_of;  // per vertex, contiguous 0..num_groups-1
  int num_groups = 0;

  std::vector<std::vector<int>> groups() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(num_groups));
    for (std::size_t v = 0; v < group_of.size(); ++v)
      out[static_cast<std::size_t>(group_of[v])].push_back(static_cast<int>(v));
    return out;
  }
};

/// Colors vertices in descending degree order (ties by id), giving each the
/// smallest color absent among its already-colored neighbors.
inline GroupAssignment greedy_color(const ConflictGraph& g) {
  const int n = g.num_vertices;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (g.degree(a) != g.degree(b)) return g.degree(a) > g.degree(b);
    return a < b;
  });

  GroupAssignment asg;
  asg.group_of.assign(static_cast<std::size_t>(n), -1);
  for (int v : order) {
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int w : g.neighbors[static_cast<std::size_t>(v)]) {
      const int c = asg.group_of[static_cast<std::size_t>(w)];
      if (c >= 0) used[static_cast<std::size_t>(c)] = true;
    }
    int color = 0;
    while (used[static_cast<std::size_t>(color)]) ++color;
    asg.group_of[static_cast<std::size_t>(v)] = color;
    asg.num_groups = std::max(asg.num_groups, color + 1);
  }
  return asg;
}

/// Thresholded sum rate in bits/s/Hz. Groups time-share equally; within a
/// group of size k each user transmits with power total_power / k. A user
/// whose SINR falls below sinr_min contributes nothing.
inline double sum_rate(const std::vector<VecC>& channels, const std::vector<std::vector<int>>& groups,
                       const std::vector<VecC>& beams, double total_power, double noise_power,
                       double sinr_min) {
  const std::size_t n = channels.size();
  if (n == 0) throw std::invalid_argument("sum_rate: no users");
  if (beams.size() != n) throw std::invalid_argument("sum_rate: beam count mismatch");
  if (groups.empty()) throw std::invalid_argument("sum_rate: no groups");
  if (total_power < 0.0 || noise_power <= 0.0 || sinr_min < 0.0)
    throw std::invalid_argument("sum_rate: bad power, noise, or threshold");
  for (std::size_t u = 0; u < n; ++u) {
    if (beams[u].size() != channels[u].size())
      throw std::invalid_argument("sum_rate: beam dimension mismatch");
    if (std::abs(beams[u].norm() - 1.0) > 1e-6)
      throw std::invalid_argument("sum_rate: beam not unit norm");
  }
  std::vector<int> seen(n, 0);
  for (const auto& grp : groups) {
    if (grp.empty()) throw std::invalid_argument("sum_rate: empty group");
    for (int u : grp) {
      if (u < 0 || static_cast<std::size_t>(u) >= n)
        throw std::invalid_argument("sum_rate: user index out of range");
      if (seen[static_cast<std::size_t>(u)]++)
        throw std::invalid_argument("sum_rate: user assigned twice");
    }
  }
  if (std::accumulate(seen.begin(), seen.end(), 0) != static_cast<int>(n))
    throw std::invalid_argument("sum_rate: unassigned user");

  double rate = 0.0;
  for (const auto& grp : groups) {
    const double p = total_power / static_cast<double>(grp.size());
    for (int u : grp) {
      const auto ui = static_cast<std::size_t>(u);
      const double sig = p * std::norm(beams[ui].dot(channels[ui]));
      double interference = 0.0;
      for (int v : grp) {
        if (v == u) continue;
        interference += p * std::norm(beams[static_cast<std::size_t>(v)].dot(channels[ui]));
      }
      const double sinr = sig / (interference + noise_power);
      if (sinr >= sinr_min) rate += std::log2(1.0 + sinr);
    }
  }
  return rate / static_cast<double>(groups.size());
}

enum class GroupingMode { kInferredAps, kTrueAps, kAllAtOnce, kOrthogonal };

inline std::string to_string(GroupingMode m) {
  switch (m) {
    case GroupingMode::kInferredAps: return "inferred-aps";
    case GroupingMode::kTrueAps: return "true-aps";
    case GroupingMode::kAllAtOnce: return "all-at-once";
    case GroupingMode::kOrthogonal: return "orthogonal";
  }
  throw std::invalid_argument("to_string: unknown grouping mode");
}

inline GroupingMode grouping_mode_from_string(const std::string& s) {
  if (s == "inferred-aps") return GroupingMode::kInferredAps;
  if (s == "true-aps") return GroupingMode::kTrueAps;
  if (s == "all-at-once") return GroupingMode::kAllAtOnce;
  if (s == "orthogonal") return GroupingMode::kOrthogonal;
  throw ConfigError("unknown grouping mode '" + s + "'");
}

/// Codebook index of the beam pointed at the strongest spectrum bin.
inline int beam_from_aps(const VecR& bins, const ArrayGeometry& arr, const Codebook& cb) {
  if (bins.size() == 0) throw std::invalid_argument("beam_from_aps: empty spectrum");
  Eigen::Index g = 0;
  bins.maxCoeff(&g);
  const double rel = std::asin(-1.0 + 2.0 * static_cast<double>(g) / static_cast<double>(bins.size()));
  const VecC a = steering_vector(arr, arr.orientation + rel);
  return static_cast<int>(quantize(a, cb));
}

struct GroupingConfig {
  EnsembleConfig ensemble;
  std::vector<int> user_counts{4, 8, 16, 32};
  int scenes_per_count = 50;
  int snapshots = 4;       // subcarrier snapshots per user for spectra
  int serving_grid = 256;  // spectrum grid at the serving (target) site
  int feature_grid = 256;  // spectrum grid at the observing site for inference
  double snr_db = 10.0;
  double sinr_min = 0.2;
  double tau = 0.3;
};

struct GroupingCell {
  int user_count = 0;
  GroupingMode mode = GroupingMode::kTrueAps;
  double tau = 0.0;
  double mean_sum_rate = 0.0;
  double ci95 = 0.0;
};

struct GroupingReport {
  std::vector<GroupingCell> cells;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_grouping(const GroupingConfig& gc, const MlpModel* model, bool need_model) {
  check_ensemble(gc.ensemble);
  std::vector<std::string> issues;
  if (gc.user_counts.empty()) issues.push_back("user_counts is empty");
  for (int u : gc.user_counts)
    if (u < 1) issues.push_back("user count below 1");
  if (gc.scenes_per_count < 1) issues.push_back("scenes_per_count below 1");
  if (gc.snapshots < 1) issues.push_back("snapshots below 1");
  if (!(gc.tau >= 0.0 && gc.tau <= 1.0)) issues.push_back("tau outside [0, 1]");
  if (gc.sinr_min < 0.0) issues.push_back("sinr_min negative");
  if (need_model && model == nullptr) issues.push_back("inferred-aps mode needs a spectrum model");
  if (model != nullptr) {
    if (model->input_dim() != gc.feature_grid)
      issues.push_back("spectrum model input does not match feature_grid");
    if (model->output_dim() != gc.serving_grid)
      issues.push_back("spectrum model output does not match serving_grid");
  }
  if (!issues.empty()) {
    std::string msg = "grouping config:";
    for (const auto& s : issues) msg += " " + s + ";";
    throw ConfigError(msg);
  }
}

inline std::uint64_t grouping_hash(const GroupingConfig& gc) {
  std::uint64_t h = ensemble_hash(gc.ensemble);
  for (int u : gc.user_counts) h = fnv1a(&u, sizeof u, h);
  h = fnv1a(&gc.scenes_per_count, sizeof gc.scenes_per_count, h);
  h = fnv1a(&gc.snapshots, sizeof gc.snapshots, h);
  h = fnv1a(&gc.serving_grid, sizeof gc.serving_grid, h);
  h = fnv1a(&gc.feature_grid, sizeof gc.feature_grid, h);
  const double reals[] = {gc.snr_db, gc.sinr_min, gc.tau};
  return hash_doubles(reals, 3, h);
}

/// One Monte-Carlo scene: the shared environment with `users` fresh users.
inline Scene grouping_scene(const EnsembleConfig& ec, int users, std::uint64_t seed,
                            std::uint64_t draw) {
  if (ec.fixed_environment) {
    Scene scene = ensemble_base(ec, seed);
    scene.users.clear();
    Rng rng(derive_seed(seed, 0x677270 ^ draw));
    for (int i = 0; i < users; ++i)
      scene.users.push_back(sample_user(ec.scene, "u" + std::to_string(i), rng));
    return scene;
  }
  SceneConfig cfg = ec.scene;
  cfg.num_users = users;
  return sample_scene(cfg, derive_seed(seed, 0x677270 ^ draw));
}

}  // namespace detail

/// Scores the requested grouping modes on one multi-user scene. All modes use
/// the serving site's codebook; baselines take the true-spectrum beams, the
/// inferred mode stays inference-only for both grouping and beam choice.
inline std::vector<double> evaluate_grouping_scene(const Scene& scene, const GroupingConfig& gc,
                                                   const std::vector<GroupingMode>& modes,
                                                   const MlpModel* model) {
  const Site& serving = scene.site(gc.ensemble.target_site);
  const Site& observed = scene.site(gc.ensemble.input_sites.at(0));
  const Codebook cb =
      build_dft_codebook(serving.array.num_elements, gc.ensemble.codebook_oversampling);
  const auto n = scene.users.size();
  if (n == 0) throw std::invalid_argument("evaluate_grouping_scene: no users");

  std::vector<VecC> channels(n);
  std::vector<VecR> true_aps(n), inf_aps(n);
  std::vector<VecC> beams_true(n), beams_inf(n);
  for (std::size_t u = 0; u < n; ++u) {
    const std::string& uid = scene.users[u].id;
    std::vector<VecC> serv_snaps, obs_snaps;
    for (int s = 0; s < gc.snapshots; ++s) {
      serv_snaps.push_back(generate_channel(scene, serving.id, uid, 0, s).h);
      if (model != nullptr) obs_snaps.push_back(generate_channel(scene, observed.id, uid, 0, s).h);
    }
    channels[u] = serv_snaps.front();
    true_aps[u] = compute_aps(serv_snaps, serving.array, gc.serving_grid).bins;
    beams_true[u] = cb.codewords[static_cast<std::size_t>(
        beam_from_aps(true_aps[u], serving.array, cb))];
    if (model != nullptr) {
      const Aps obs = compute_aps(obs_snaps, observed.array, gc.feature_grid);
      inf_aps[u] = aps_from_prediction(mlp_forward(*model, log_whiten_auto(obs.bins)));
      beams_inf[u] = cb.codewords[static_cast<std::size_t>(
          beam_from_aps(inf_aps[u], serving.array, cb))];
    }
  }

  double mean_gain = 0.0;
  for (std::size_t u = 0; u < n; ++u) mean_gain += std::norm(beams_true[u].dot(channels[u]));
  mean_gain /= static_cast<double>(n);
  if (!(mean_gain > 0.0)) throw NumericalError("evaluate_grouping_scene: zero beamformed power");
  const double noise = 1.0;
  const double power = std::pow(10.0, gc.snr_db / 10.0) * noise / mean_gain;

  const int u_count = static_cast<int>(n);
  std::vector<double> rates;
  for (GroupingMode mode : modes) {
    switch (mode) {
      case GroupingMode::kTrueAps: {
        const GroupAssignment asg = greedy_color(build_conflict_graph(true_aps, gc.tau));
        rates.push_back(sum_rate(channels, asg.groups(), beams_true, power, noise, gc.sinr_min));
        break;
      }
      case GroupingMode::kInferredAps: {
        if (model == nullptr)
          throw std::invalid_argument("evaluate_grouping_scene: inferred mode without model");
        const GroupAssignment asg = greedy_color(build_conflict_graph(inf_aps, gc.tau));
        rates.push_back(sum_rate(channels, asg.groups(), beams_inf, power, noise, gc.sinr_min));
        break;
      }
      case GroupingMode::kAllAtOnce: {
        std::vector<std::vector<int>> one(1);
        for (int u = 0; u < u_count; ++u) one[0].push_back(u);
        rates.push_back(sum_rate(channels, one, beams_true, power, noise, gc.sinr_min));
        break;
      }
      case GroupingMode::kOrthogonal: {
        std::vector<std::vector<int>> singles;
        for (int u = 0; u < u_count; ++u) singles.push_back({u});
        rates.push_back(sum_rate(channels, singles, beams_true, power, noise, gc.sinr_min));
        break;
      }
    }
  }
  return rates;
}

/// Monte-Carlo sweep over user counts and modes. Scene draws are shared
/// across modes within a cell row, so mode comparisons are paired.
inline GroupingReport evaluate_grouping_experiment(const GroupingConfig& gc,
                                                   const std::vector<GroupingMode>& modes,
                                                   std::uint64_t seed,
                                                   const MlpModel* model = nullptr,
                                                   unsigned threads = 1) {
  bool need_model = false;
  for (GroupingMode m : modes) need_model = need_model || m == GroupingMode::kInferredAps;
  detail::check_grouping(gc, model, need_model);
  if (modes.empty()) throw std::invalid_argument("evaluate_grouping_experiment: no modes");

  GroupingReport rep;
  rep.config_hash = detail::grouping_hash(gc);
  rep.seed = seed;
  const auto draws = static_cast<std::size_t>(gc.scenes_per_count);
  for (std::size_t ci = 0; ci < gc.user_counts.size(); ++ci) {
    const int users = gc.user_counts[ci];
    std::vector<std::vector<double>> per_scene(draws);
    parallel_for(draws, threads, [&](std::size_t d) {
      const Scene scene = detail::grouping_scene(gc.ensemble, users, seed,
                                                 (static_cast<std::uint64_t>(ci) << 32) | d);
      per_scene[d] = evaluate_grouping_scene(scene, gc, modes, model);
    });
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      double mean = 0.0;
      for (const auto& r : per_scene) mean += r[mi];
      mean /= static_cast<double>(draws);
      double var = 0.0;
      for (const auto& r : per_scene) var += (r[mi] - mean) * (r[mi] - mean);
      var = draws > 1 ? var / static_cast<double>(draws - 1) : 0.0;
      GroupingCell cell;
      cell.user_count = users;
      cell.mode = modes[mi];
      cell.tau = gc.tau;
      cell.mean_sum_rate = mean;
      cell.ci95 = 1.96 * std::sqrt(var / static_cast<double>(draws));
      rep.cells.push_back(cell);
    }
  }
  return rep;
}

}  // namespace csilab
