#pragma once

// Case-study harnesses: static remote CSI inference, delayed sequence
// inference with the location baseline, and angular-spectrum datasets.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/features.hpp"
#include "csilab/gru.hpp"
#include "csilab/mlp.hpp"
#include "csilab/rng.hpp"
#include "csilab/scene.hpp"

namespace csilab {

// Scene family for dataset construction. With fixed_environment the
// scatterer layout is drawn once and shared by every record; only the user
// placement is redrawn, which is what makes the cross-site mapping learnable.
struct EnsembleConfig {
  SceneConfig scene;
  std::vector<std::string> input_sites = {"mbs"};
  std::string target_site = "sbs";
  int codebook_oversampling = 1;
  bool fixed_environment = true;
};

namespace detail {

inline void check_ensemble(const EnsembleConfig& ec) {
  std::vector<std::string> bad;
  if (ec.input_sites.empty()) bad.push_back("ensemble: no input sites");
  const auto has_site = [&](const std::string& id) {
    for (const Site& s : ec.scene.sites)
      if (s.id == id) return true;
    return false;
  };
  for (const std::string& id : ec.input_sites)
    if (!has_site(id)) bad.push_back("ensemble: unknown input site " + id);
  if (!has_site(ec.target_site)) bad.push_back("ensemble: unknown target site " + ec.target_site);
  if (ec.codebook_oversampling < 1) bad.push_back("ensemble: oversampling < 1");
  if (!bad.empty()) throw ConfigError(bad);
}

inline std::uint64_t ensemble_hash(const EnsembleConfig& ec) {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix_str = [&](const std::string& s) { h = fnv1a(s.data(), s.size(), h); };
  const auto mix_d = [&](std::initializer_list<double> ds) {
    for (double d : ds) h = fnv1a(&d, sizeof(d), h);
  };
  for (const Site& s : ec.scene.sites) {
    mix_str(s.id);
    mix_d({s.position.x(), s.position.y(), static_cast<double>(s.array.num_elements),
           s.array.spacing, s.array.orientation, s.carrier_wavelength});
  }
  const RegionRect& u = ec.scene.user_region;
  const RegionRect& r = ec.scene.scatterer_region;
  mix_d({u.x0, u.y0, u.x1, u.y1, r.x0, r.y0, r.x1, r.y1,
         static_cast<double>(ec.scene.num_scatterers),
         static_cast<double>(static_cast<int>(ec.scene.scatterer_placement)),
         ec.scene.scatterer_radius, ec.scene.reflectivity_min, ec.scene.reflectivity_max,
         ec.scene.speed_min, ec.scene.speed_max,
         static_cast<double>(ec.scene.heading_fixed), ec.scene.heading,
         ec.scene.pathloss_exponent, static_cast<double>(ec.scene.los_default),
         ec.scene.noise_floor, ec.scene.subcarrier_spacing,
         static_cast<double>(ec.codebook_oversampling),
         static_cast<double>(ec.fixed_environment)});
  for (const std::string& id : ec.input_sites) mix_str(id);
  mix_str(ec.target_site);
  return h;
}

inline Scene ensemble_base(const EnsembleConfig& ec, std::uint64_t seed) {
  check_ensemble(ec);
  SceneConfig cfg = ec.scene;
  cfg.num_users = 1;
  return sample_scene(cfg, derive_seed(seed, 0x626173));
}

// Record-level scene: shared environment with the user re-placed, or a full
// redraw when the ensemble is not held fixed.
inline Scene record_scene(const Scene& base, const EnsembleConfig& ec, std::uint64_t seed,
                          std::uint64_t record) {
  if (!ec.fixed_environment) {
    SceneConfig cfg = ec.scene;
    cfg.num_users = 1;
    return sample_scene(cfg, derive_seed(seed, 0x726563 ^ record));
  }
  Scene scene = base;
  Rng rng(derive_seed(seed, 0x726563 ^ record));
  scene.users[0] = sample_user(ec.scene, "u0", rng);
  return scene;
}

// Per-slot input features: log-whitened angular magnitudes per site block.
inline VecR site_features(const Scene& scene, const std::vector<std::string>& input_sites,
                          const std::string& user_id, int slot) {
  Eigen::Index total = 0;
  for (const std::string& id : input_sites) total += scene.site(id).array.num_elements;
  VecR f(total);
  Eigen::Index at = 0;
  for (const std::string& id : input_sites) {
    const CsiSample s = generate_channel(scene, id, user_id, slot);
    const VecR mags = angular_transform(s.h).cwiseAbs();
    f.segment(at, mags.size()) = log_whiten_auto(mags);
    at += mags.size();
  }
  return f;
}

inline std::uint64_t record_hash(const VecR& features, const Vec2& pos,
                                 std::initializer_list<double> extra) {
  std::uint64_t h = hash_doubles(features.data(), static_cast<std::size_t>(features.size()));
  const double xy[2] = {pos.x(), pos.y()};
  h = fnv1a(xy, sizeof(xy), h);
  for (double d : extra) h = fnv1a(&d, sizeof(d), h);
  return h;
}

}  // namespace detail

struct StaticRecord {
  VecR features;
  int target = -1;
  VecC h_target;  // true channel at the target site, kept for gain scoring
  Vec2 user_pos = Vec2::Zero();
  std::uint64_t hash = 0;
};

struct StaticDataset {
  std::vector<StaticRecord> records;
  Codebook target_codebook;
  Site target_site;
  int feature_dim = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  std::unordered_set<std::uint64_t> hashes() const {
    std::unordered_set<std::uint64_t> s;
    for (const StaticRecord& r : records) s.insert(r.hash);
    return s;
  }
};

inline StaticDataset build_static_dataset(const EnsembleConfig& ec, int n_points,
                                          std::uint64_t seed, int threads = 1) {
  if (n_points < 1) throw std::invalid_argument("build_static_dataset: n_points < 1");
  const Scene base = detail::ensemble_base(ec, seed);
  StaticDataset ds;
  ds.target_site = base.site(ec.target_site);
  ds.target_codebook =
      build_dft_codebook(ds.target_site.array.num_elements, ec.codebook_oversampling);
  ds.config_hash = detail::ensemble_hash(ec);
  ds.seed = seed;
  ds.records.resize(static_cast<std::size_t>(n_points));
  parallel_for(static_cast<std::size_t>(n_points), threads, [&](std::size_t i) {
    const Scene scene = detail::record_scene(base, ec, seed, i);
    StaticRecord rec;
    rec.features = detail::site_features(scene, ec.input_sites, "u0", 0);
    const CsiSample tgt = generate_channel(scene, ec.target_site, "u0", 0);
    rec.h_target = tgt.h;
    rec.target = static_cast<int>(quantize(tgt.h, ds.target_codebook));
    rec.user_pos = scene.users[0].position;
    rec.hash = detail::record_hash(rec.features, rec.user_pos, {static_cast<double>(rec.target)});
    ds.records[i] = std::move(rec);
  });
  ds.feature_dim = static_cast<int>(ds.records.front().features.size());
  return ds;
}

// Sorted normalized errors with quantile access.
struct ErrorCdf {
  std::vector<double> values;

  double quantile(double q) const {
    if (values.empty()) throw DegenerateInputError("ErrorCdf: empty");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("ErrorCdf: quantile outside [0,1]");
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(values.size() - 1) + 0.5);
    return values[std::min(idx, values.size() - 1)];
  }
  double fraction_below(double x) const {
    if (values.empty()) throw DegenerateInputError("ErrorCdf: empty");
    const auto it = std::lower_bound(values.begin(), values.end(), x);
    return static_cast<double>(it - values.begin()) / static_cast<double>(values.size());
  }
};

inline ErrorCdf make_error_cdf(std::vector<double> values) {
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) throw DegenerateInputError("ErrorCdf: value outside [0,1]");
  std::sort(values.begin(), values.end());
  return ErrorCdf{std::move(values)};
}

struct StaticEvalReport {
  ErrorCdf top1, top2;
  double top1_index_accuracy = 0.0;
  double top2_index_accuracy = 0.0;
};

// Scores externally supplied top-2 candidates; the second choice is resolved
// by true channel gain, standing in for the small cell's own check.
inline StaticEvalReport evaluate_static_predictions(
    const std::vector<std::array<int, 2>>& top2, const StaticDataset& test,
    const std::unordered_set<std::uint64_t>& train_hashes) {
  if (top2.size() != test.records.size())
    throw std::invalid_argument("evaluate_static: prediction count mismatch");
  for (const StaticRecord& r : test.records)
    if (train_hashes.count(r.hash))
      throw std::invalid_argument("evaluate_static: test set overlaps training set");
  std::vector<double> e1, e2;
  int hit1 = 0, hit2 = 0;
  for (std::size_t i = 0; i < test.records.size(); ++i) {
    const StaticRecord& r = test.records[i];
    const auto [a, b] = top2[i];
    if (a < 0 || a >= test.target_codebook.size() || b < 0 || b >= test.target_codebook.size())
      throw std::invalid_argument("evaluate_static: candidate index out of range");
    e1.push_back(normalized_error(r.h_target, static_cast<std::size_t>(a), test.target_codebook));
    const double ga = beamforming_gain(r.h_target, test.target_codebook.codewords[static_cast<std::size_t>(a)]);
    const double gb = beamforming_gain(r.h_target, test.target_codebook.codewords[static_cast<std::size_t>(b)]);
    const int pick = gb > ga ? b : a;
    e2.push_back(normalized_error(r.h_target, static_cast<std::size_t>(pick), test.target_codebook));
    if (a == r.target) ++hit1;
    if (a == r.target || b == r.target) ++hit2;
  }
  StaticEvalReport rep;
  rep.top1 = make_error_cdf(std::move(e1));
  rep.top2 = make_error_cdf(std::move(e2));
  rep.top1_index_accuracy = static_cast<double>(hit1) / static_cast<double>(test.records.size());
  rep.top2_index_accuracy = static_cast<double>(hit2) / static_cast<double>(test.records.size());
  return rep;
}

inline StaticEvalReport evaluate_static(const MlpModel& model, const StaticDataset& test,
                                        const std::unordered_set<std::uint64_t>& train_hashes) {
  if (model.input_dim() != test.feature_dim)
    throw std::invalid_argument("evaluate_static: feature width mismatch");
  if (model.output_dim() != test.target_codebook.size())
    throw std::invalid_argument("evaluate_static: codebook size mismatch");
  std::vector<std::array<int, 2>> top2;
  for (const StaticRecord& r : test.records) {
    const std::vector<int> t = predict_topk(model, r.features, 2);
    top2.push_back({t[0], t[1]});
  }
  return evaluate_static_predictions(top2, test, train_hashes);
}

// Uniform-codeword selection baseline over the same records.
inline ErrorCdf random_codeword_cdf(const StaticDataset& test, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x726e64));
  std::vector<double> errs;
  for (const StaticRecord& r : test.records) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, test.target_codebook.size() - 1));
    errs.push_back(normalized_error(r.h_target, k, test.target_codebook));
  }
  return make_error_cdf(std::move(errs));
}

// Location-based beam choice assuming line of sight. noise_std is the total
// positioning error in meters (variance noise_std^2 split across both axes).
inline int lo_baseline(const Vec2& user_pos, double noise_std, const Site& target,
                       const Codebook& cb, Rng& rng) {
  if (noise_std < 0.0) throw std::invalid_argument("lo_baseline: negative noise std");
  Vec2 noisy = user_pos;
  if (noise_std > 0.0) {
    const double per_axis = noise_std / std::sqrt(2.0);
    noisy += Vec2{per_axis * rng.normal(), per_axis * rng.normal()};
  }
  double rel = wrap_angle(bearing(target.position, noisy) - target.array.orientation);
  const double lim = kPi / 2.0 - 1e-9;
  rel = std::clamp(rel, -lim, lim);
  const VecC steer = steering_vector(target.array, target.array.orientation + rel);
  return static_cast<int>(quantize(steer, cb));
}

// Delayed sequence inference. Decoder step s stands for slot t_last + s, so a
// record with delay d is scored at steps d .. d + l_out - 1.
struct SequenceConfig {
  EnsembleConfig ensemble;
  int l_in = 8;
  int l_out = 1;
  int delay_min = 1;
  int delay_max = 5;
  int trajectories = 1000;
  int windows = 1;  // unit-stride windows per trajectory
};

struct SequenceRecord {
  MatR inputs;                  // l_in x feature_dim
  std::vector<int> targets;     // codeword indices at the scored slots
  std::vector<VecC> h_targets;  // true channels at the scored slots
  int delay = 0;
  Vec2 measured_pos = Vec2::Zero();  // user position at the last input slot
  std::uint64_t hash = 0;
};

struct SequenceDataset {
  std::vector<SequenceRecord> records;
  Codebook target_codebook;
  Site target_site;
  int feature_dim = 0;
  int l_in = 0;
  int l_out = 0;
  int delay_min = 0;
  int delay_max = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  std::unordered_set<std::uint64_t> hashes() const {
    std::unordered_set<std::uint64_t> s;
    for (const SequenceRecord& r : records) s.insert(r.hash);
    return s;
  }
};

inline SequenceDataset build_sequence_dataset(const SequenceConfig& sc, std::uint64_t seed,
                                              int threads = 1) {
  if (sc.l_in < 1 || sc.l_out < 1)
    throw std::invalid_argument("build_sequence_dataset: window lengths must be >= 1");
  if (sc.delay_min < 0 || sc.delay_min > sc.delay_max)
    throw std::invalid_argument("build_sequence_dataset: bad delay range");
  if (sc.trajectories < 1 || sc.windows < 1)
    throw std::invalid_argument("build_sequence_dataset: need trajectories and windows");
  const Scene base = detail::ensemble_base(sc.ensemble, seed);
  SequenceDataset ds;
  ds.target_site = base.site(sc.ensemble.target_site);
  ds.target_codebook =
      build_dft_codebook(ds.target_site.array.num_elements, sc.ensemble.codebook_oversampling);
  ds.l_in = sc.l_in;
  ds.l_out = sc.l_out;
  ds.delay_min = sc.delay_min;
  ds.delay_max = sc.delay_max;
  ds.config_hash = detail::ensemble_hash(sc.ensemble);
  ds.seed = seed;

  const auto n = static_cast<std::size_t>(sc.trajectories) * static_cast<std::size_t>(sc.windows);
  ds.records.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::size_t traj = i / static_cast<std::size_t>(sc.windows);
    const int window = static_cast<int>(i % static_cast<std::size_t>(sc.windows));
    const Scene scene = detail::record_scene(base, sc.ensemble, seed, traj);
    Rng rng(derive_seed(seed, 0x646c79 ^ i));

    SequenceRecord rec;
    rec.inputs = MatR(sc.l_in, 0);
    for (int s = 0; s < sc.l_in; ++s) {
      const VecR f = detail::site_features(scene, sc.ensemble.input_sites, "u0", window + s);
      if (s == 0) rec.inputs = MatR(sc.l_in, f.size());
      rec.inputs.row(s) = f.transpose();
    }
    rec.delay = sc.delay_min +
                static_cast<int>(rng.uniform_int(0, static_cast<long>(sc.delay_max - sc.delay_min)));
    const int t_last = window + sc.l_in - 1;
    rec.measured_pos = scene.users[0].position + static_cast<double>(t_last) * scene.users[0].velocity;
    for (int j = 0; j < sc.l_out; ++j) {
      const CsiSample tgt = generate_channel(scene, sc.ensemble.target_site, "u0",
                                             t_last + rec.delay + j);
      rec.targets.push_back(static_cast<int>(quantize(tgt.h, ds.target_codebook)));
      rec.h_targets.push_back(tgt.h);
    }
    VecR flat(rec.inputs.size());
    Eigen::Index at = 0;
    for (int s = 0; s < sc.l_in; ++s) {
      flat.segment(at, rec.inputs.cols()) = rec.inputs.row(s).transpose();
      at += rec.inputs.cols();
    }
    rec.hash = detail::record_hash(flat, rec.measured_pos,
                                   {static_cast<double>(rec.delay),
                                    static_cast<double>(rec.targets.front())});
    ds.records[i] = std::move(rec);
  });
  ds.feature_dim = static_cast<int>(ds.records.front().inputs.cols());
  return ds;
}

inline std::vector<GruRecord> sequence_training_records(const SequenceDataset& ds) {
  std::vector<GruRecord> out;
  for (const SequenceRecord& r : ds.records) {
    GruRecord g;
    g.inputs = r.inputs;
    for (int j = 0; j < ds.l_out; ++j) g.steps.push_back(r.delay + j);
    g.labels = r.targets;
    g.horizon = r.delay + ds.l_out;
    out.push_back(std::move(g));
  }
  return out;
}

struct SequenceEvalOptions {
  double lo_noise_std = 1.0;
  std::uint64_t lo_seed = 1;
  const MlpModel* static_model = nullptr;  // per-slot classifier scored at the delayed slot
};

struct DelayBucket {
  int delay = 0;
  int count = 0;
  double gru_ratio = 0.0;
  double lo_ratio = 0.0;
  double static_ratio = 0.0;
};

struct SequenceEvalReport {
  std::vector<DelayBucket> buckets;  // ascending delay
  double overall_gru = 0.0;
  double overall_lo = 0.0;
  double overall_static = 0.0;
  // Paired per-record (gru - static) gain-ratio difference in the largest
  // delay bucket; ci95 is the half-width.
  double paired_mean = 0.0;
  double paired_ci95 = 0.0;
};

// Scores one beam index per record and scored slot; predictions[i] has l_out
// entries for record i.
inline SequenceEvalReport evaluate_sequence_predictions(
    const std::vector<std::vector<int>>& predictions, const SequenceDataset& ds,
    const SequenceEvalOptions& opt = {}) {
  if (ds.records.empty()) throw std::invalid_argument("evaluate_sequence: empty dataset");
  if (predictions.size() != ds.records.size())
    throw std::invalid_argument("evaluate_sequence: prediction count mismatch");
  if (opt.static_model != nullptr &&
      (opt.static_model->input_dim() != ds.feature_dim ||
       opt.static_model->output_dim() != ds.target_codebook.size()))
    throw std::invalid_argument("evaluate_sequence: static baseline shape mismatch");

  struct Acc {
    double gru = 0.0, lo = 0.0, stat = 0.0;
    int n = 0;
  };
  std::map<int, Acc> buckets;
  std::vector<double> paired;  // gru - static per record in the max-delay bucket
  double all_gru = 0.0, all_lo = 0.0, all_stat = 0.0;

  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const SequenceRecord& rec = ds.records[i];
    if (predictions[i].size() != static_cast<std::size_t>(ds.l_out))
      throw std::invalid_argument("evaluate_sequence: prediction width mismatch");
    Rng lo_rng(derive_seed(opt.lo_seed, i));
    const int lo_idx =
        lo_baseline(rec.measured_pos, opt.lo_noise_std, ds.target_site, ds.target_codebook, lo_rng);
    int static_idx = -1;
    if (opt.static_model != nullptr)
      static_idx = predict_topk(*opt.static_model, rec.inputs.row(ds.l_in - 1).transpose(), 1)[0];

    double r_gru = 0.0, r_lo = 0.0, r_stat = 0.0;
    for (int j = 0; j < ds.l_out; ++j) {
      const VecC& h = rec.h_targets[static_cast<std::size_t>(j)];
      const double g_opt = beamforming_gain(
          h, ds.target_codebook.codewords[static_cast<std::size_t>(quantize(h, ds.target_codebook))]);
      const int pred = predictions[i][static_cast<std::size_t>(j)];
      if (pred < 0 || pred >= ds.target_codebook.size())
        throw std::invalid_argument("evaluate_sequence: beam index out of range");
      const auto gain_of = [&](int idx) {
        return beamforming_gain(h, ds.target_codebook.codewords[static_cast<std::size_t>(idx)]) /
               g_opt;
      };
      r_gru += gain_of(pred) / ds.l_out;
      r_lo += gain_of(lo_idx) / ds.l_out;
      if (static_idx >= 0) r_stat += gain_of(static_idx) / ds.l_out;
    }
    Acc& a = buckets[rec.delay];
    a.gru += r_gru;
    a.lo += r_lo;
    a.stat += r_stat;
    ++a.n;
    all_gru += r_gru;
    all_lo += r_lo;
    all_stat += r_stat;
    if (opt.static_model != nullptr && rec.delay == ds.delay_max) paired.push_back(r_gru - r_stat);
  }

  SequenceEvalReport rep;
  const auto n = static_cast<double>(ds.records.size());
  rep.overall_gru = all_gru / n;
  rep.overall_lo = all_lo / n;
  rep.overall_static = opt.static_model != nullptr ? all_stat / n : 0.0;
  for (const auto& [delay, a] : buckets) {
    DelayBucket b;
    b.delay = delay;
    b.count = a.n;
    b.gru_ratio = a.gru / a.n;
    b.lo_ratio = a.lo / a.n;
    b.static_ratio = opt.static_model != nullptr ? a.stat / a.n : 0.0;
    rep.buckets.push_back(b);
  }
  if (paired.size() > 1) {
    double mean = 0.0;
    for (double d : paired) mean += d;
    mean /= static_cast<double>(paired.size());
    double var = 0.0;
    for (double d : paired) var += (d - mean) * (d - mean);
    var /= static_cast<double>(paired.size() - 1);
    rep.paired_mean = mean;
    rep.paired_ci95 = 1.96 * std::sqrt(var / static_cast<double>(paired.size()));
  }
  return rep;
}

inline SequenceEvalReport evaluate_sequence(const GruSeq2Seq& model, const SequenceDataset& ds,
                                            const SequenceEvalOptions& opt = {}) {
  if (ds.records.empty()) throw std::invalid_argument("evaluate_sequence: empty dataset");
  if (model.feature_dim() != ds.feature_dim)
    throw std::invalid_argument("evaluate_sequence: feature width mismatch");
  if (model.output_dim() != ds.target_codebook.size())
    throw std::invalid_argument("evaluate_sequence: codebook size mismatch");
  std::vector<std::vector<int>> preds;
  for (const SequenceRecord& rec : ds.records) {
    const MatR out = gru_forward(model, rec.inputs, rec.delay + ds.l_out);
    std::vector<int> p;
    for (int j = 0; j < ds.l_out; ++j) {
      Eigen::Index best = 0;
      out.row(rec.delay + j).maxCoeff(&best);
      p.push_back(static_cast<int>(best));
    }
    preds.push_back(std::move(p));
  }
  return evaluate_sequence_predictions(preds, ds, opt);
}

// Angular power spectrum pairs for the spectrum-inference task. Small-scale
// fading is averaged over per-subcarrier snapshots.
struct ApsConfig {
  EnsembleConfig ensemble;
  int snapshots = 8;
  int mbs_grid = 256;
  int sbs_grid = 1024;
};

struct ApsRecord {
  VecR mbs_aps;
  VecR sbs_aps;
  Vec2 user_pos = Vec2::Zero();
  std::uint64_t hash = 0;
};

struct ApsDataset {
  std::vector<ApsRecord> records;
  Site target_site;
  int mbs_grid = 0;
  int sbs_grid = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

inline ApsDataset build_aps_dataset(const ApsConfig& ac, int n_points, std::uint64_t seed,
                                    int threads = 1) {
  if (n_points < 1) throw std::invalid_argument("build_aps_dataset: n_points < 1");
  if (ac.snapshots < 1) throw std::invalid_argument("build_aps_dataset: snapshots < 1");
  const Scene base = detail::ensemble_base(ac.ensemble, seed);
  ApsDataset ds;
  ds.target_site = base.site(ac.ensemble.target_site);
  ds.mbs_grid = ac.mbs_grid;
  ds.sbs_grid = ac.sbs_grid;
  ds.config_hash = detail::ensemble_hash(ac.ensemble);
  ds.seed = seed;
  const std::string& mbs_id = ac.ensemble.input_sites.front();
  ds.records.resize(static_cast<std::size_t>(n_points));
  parallel_for(static_cast<std::size_t>(n_points), threads, [&](std::size_t i) {
    const Scene scene = detail::record_scene(base, ac.ensemble, seed, i);
    std::vector<VecC> mbs_snaps, sbs_snaps;
    for (int sub = 0; sub < ac.snapshots; ++sub) {
      mbs_snaps.push_back(generate_channel(scene, mbs_id, "u0", 0, sub).h);
      sbs_snaps.push_back(generate_channel(scene, ac.ensemble.target_site, "u0", 0, sub).h);
    }
    ApsRecord rec;
    rec.mbs_aps = compute_aps(mbs_snaps, scene.site(mbs_id).array, ac.mbs_grid).bins;
    rec.sbs_aps = compute_aps(sbs_snaps, ds.target_site.array, ac.sbs_grid).bins;
    rec.user_pos = scene.users[0].position;
    VecR both(rec.mbs_aps.size() + rec.sbs_aps.size());
    both << rec.mbs_aps, rec.sbs_aps;
    rec.hash = detail::record_hash(both, rec.user_pos, {});
    ds.records[i] = std::move(rec);
  });
  return ds;
}

// Training views: log-whitened inputs, floored log targets, and the inverse
// map applied to a spectrum-head prediction.
inline MatR aps_input_features(const ApsDataset& ds) {
  MatR x(static_cast<Eigen::Index>(ds.records.size()), ds.mbs_grid);
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = log_whiten_auto(ds.records[i].mbs_aps).transpose();
  return x;
}

inline VecR log_aps_target(const VecR& aps) {
  const double mx = aps.maxCoeff();
  const double floor = mx > 0 ? 1e-12 * mx : 1e-300;
  return aps.cwiseMax(floor).array().log().matrix();
}

inline MatR aps_log_targets(const ApsDataset& ds) {
  MatR y(static_cast<Eigen::Index>(ds.records.size()), ds.sbs_grid);
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    y.row(static_cast<Eigen::Index>(i)) = log_aps_target(ds.records[i].sbs_aps).transpose();
  return y;
}

inline VecR aps_from_prediction(const VecR& raw) { return raw.array().exp().matrix(); }

}  // namespace csilab
