#pragma once
// End-to-end pipelines behind the CLI: each experiment kind is a pure
// function of (config, seed) writing CSV reports, dataset files, and
// checkpoints. Timestamps go only to the sidecar log so reruns are
// byte-identical.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "csilab/config.hpp"
#include "csilab/dataset_io.hpp"
#include "csilab/dependence.hpp"
#include "csilab/model_io.hpp"
#include "csilab/scheduling.hpp"
#include "csilab/tasks.hpp"
#include "csilab/train.hpp"

namespace csilab {

/// Failure inside a pipeline, tagged with the stage that raised it.
struct PipelineError : std::runtime_error {
  std::string stage;
  PipelineError(const std::string& stage_name, const std::string& what)
      : std::runtime_error("stage '" + stage_name + "': " + what), stage(stage_name) {}
};

struct RunOptions {
  std::string out_dir = ".";
  unsigned threads = 1;
};

namespace detail {

template <typename F>
auto run_stage(const std::string& stage, F&& fn) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const ConfigError&) {
    throw;  // config problems keep their own category and exit code
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

/// Appends a wall-clock stage line to the sidecar log. Reports never carry
/// timestamps; this file is the only place they appear.
class RunLog {
 public:
  RunLog(const std::string& out_dir, const std::string& kind) {
    path_ = (std::filesystem::path(out_dir) / "run.log").string();
    note("start " + kind);
  }

  void note(const std::string& msg) {
    std::ofstream out(path_, std::ios::app);
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&tt));
    out << buf << " " << msg << "\n";
  }

 private:
  std::string path_;
};

inline std::string out_path(const RunOptions& opt, const std::string& name) {
  return (std::filesystem::path(opt.out_dir) / name).string();
}

inline void ensure_out_dir(const RunOptions& opt) {
  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + opt.out_dir + "': " + ec.message());
}

inline MatR feature_matrix(const StaticDataset& ds) {
  MatR x(static_cast<Eigen::Index>(ds.records.size()), ds.feature_dim);
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = ds.records[i].features;
  return x;
}

inline std::vector<int> label_vector(const StaticDataset& ds) {
  std::vector<int> y;
  y.reserve(ds.records.size());
  for (const StaticRecord& r : ds.records) y.push_back(r.target);
  return y;
}

inline std::vector<int> mlp_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims = {in};
  for (int h : hidden) dims.push_back(h);
  dims.push_back(out);
  return dims;
}

// Seed streams, one per role, all derived from the master seed.
inline constexpr std::uint64_t kTrainStream = 0x747261;
inline constexpr std::uint64_t kTestStream = 0x746573;
inline constexpr std::uint64_t kStaticBaselineStream = 0x737461;
inline constexpr std::uint64_t kInitStream = 0x696e6974;
inline constexpr std::uint64_t kShuffleStream = 0x7368666c;
inline constexpr std::uint64_t kBaselineInitStream = 0x62617365;
inline constexpr std::uint64_t kBaselineShuffleStream = 0x62736866;
inline constexpr std::uint64_t kRandomCdfStream = 0x726e64;
inline constexpr std::uint64_t kLoStream = 0x6c6f;
inline constexpr std::uint64_t kApsStream = 0x617073;
inline constexpr std::uint64_t kGroupingStream = 0x67727570;
inline constexpr std::uint64_t kDependenceStream = 0x646570;
inline constexpr std::uint64_t kBaseSceneStream = 0x626173;

}  // namespace detail

// ---------------------------------------------------------------------------
// dependence

/// Draws indices and stacked re/im features at two sites over a shared
/// environment with a re-placed user, then reports entropy, mutual
/// information, and average canonical correlation per sample count.
inline std::vector<std::string> run_dependence(const ExperimentConfig& cfg, const RunOptions& opt) {
  detail::ensure_out_dir(opt);
  detail::RunLog log(opt.out_dir, "dependence");
  const std::uint64_t chash = config_hash(cfg);

  const int n = cfg.dependence.samples;
  std::vector<std::size_t> idx_a(static_cast<std::size_t>(n)), idx_b(static_cast<std::size_t>(n));
  MatR xa, xb;
  std::size_t ka = 0, kb = 0;
  detail::run_stage("sample", [&] {
    SceneConfig sc = cfg.scene;
    sc.num_users = 1;
    const Scene base = sample_scene(sc, derive_seed(cfg.seed, detail::kBaseSceneStream));
    const Site& site_a = base.site(cfg.dependence.site_a);
    const Site& site_b = base.site(cfg.dependence.site_b);
    const Codebook cb_a =
        build_dft_codebook(site_a.array.num_elements, cfg.dependence.oversampling);
    const Codebook cb_b =
        build_dft_codebook(site_b.array.num_elements, cfg.dependence.oversampling);
    ka = static_cast<std::size_t>(cb_a.size());
    kb = static_cast<std::size_t>(cb_b.size());
    xa.resize(n, 2 * site_a.array.num_elements);
    xb.resize(n, 2 * site_b.array.num_elements);
    parallel_for(static_cast<std::size_t>(n), opt.threads, [&](std::size_t t) {
      Scene scene = base;
      Rng rng(derive_seed(cfg.seed, detail::kDependenceStream ^ t));
      scene.users[0] = sample_user(sc, "u0", rng);
      const VecC ha = generate_channel(scene, site_a.id, "u0", 0, 0).h;
      const VecC hb = generate_channel(scene, site_b.id, "u0", 0, 0).h;
      idx_a[t] = quantize(ha, cb_a);
      idx_b[t] = quantize(hb, cb_b);
      xa.row(static_cast<Eigen::Index>(t)) = stack_real_imag(ha);
      xb.row(static_cast<Eigen::Index>(t)) = stack_real_imag(hb);
    });
    return 0;
  });
  log.note("sampled " + std::to_string(n) + " draws");

  std::vector<int> counts = cfg.dependence.sample_counts;
  if (counts.empty()) counts = {n};
  std::string csv = report_stamp(chash, cfg.seed);
  csv += csv_row({"samples", "H_sbs_bits", "MI_bits", "avg_cca"});
  detail::run_stage("analyze", [&] {
    for (int c : counts) {
      const auto cc = static_cast<std::size_t>(c);
      const DiscreteJoint joint =
          make_joint(std::span<const std::size_t>(idx_a.data(), cc),
                     std::span<const std::size_t>(idx_b.data(), cc), ka, kb);
      const double hb = marginal_entropies(joint).second;
      const double mi = mutual_information(joint);
      const double cca =
          avg_canonical_correlation(xa.topRows(c), xb.topRows(c), cfg.dependence.cca_ridge);
      csv += csv_row({std::to_string(c), format_double(hb), format_double(mi),
                      format_double(cca)});
    }
    return 0;
  });
  write_file(detail::out_path(opt, "dependence.csv"), csv);
  log.note("wrote dependence.csv");
  return {"dependence.csv", "run.log"};
}

// ---------------------------------------------------------------------------
// static

namespace detail {

inline std::pair<StaticDataset, StaticDataset> static_datasets(const ExperimentConfig& cfg,
                                                               unsigned threads) {
  return run_stage("build-dataset", [&] {
    const EnsembleConfig ec = cfg.ensemble();
    return std::pair<StaticDataset, StaticDataset>{
        build_static_dataset(ec, cfg.static_task.train_points,
                             derive_seed(cfg.seed, kTrainStream), threads),
        build_static_dataset(ec, cfg.static_task.test_points,
                             derive_seed(cfg.seed, kTestStream), threads)};
  });
}

inline MlpModel train_static_model(const ExperimentConfig& cfg, const StaticDataset& train) {
  return run_stage("train", [&] {
    MlpModel model = make_mlp(
        mlp_dims(train.feature_dim, cfg.model.hidden, train.target_codebook.size()),
        OutputHead::kSoftmax, derive_seed(cfg.seed, kInitStream));
    TrainConfig tc = cfg.training.train;
    tc.seed = derive_seed(cfg.seed, kShuffleStream);
    const MatR x = feature_matrix(train);
    const std::vector<int> y = label_vector(train);
    if (tc.patience > 0) {
      const auto n_val =
          static_cast<Eigen::Index>(cfg.training.val_fraction * static_cast<double>(x.rows()));
      if (n_val < 1) throw ConfigError("patience > 0 needs val_fraction large enough for 1 row");
      const Eigen::Index n_fit = x.rows() - n_val;
      const MatR x_fit = x.topRows(n_fit);
      const MatR x_val = x.bottomRows(n_val);
      const std::vector<int> y_fit(y.begin(), y.begin() + n_fit);
      const std::vector<int> y_val(y.begin() + n_fit, y.end());
      train_mlp(model, x_fit, y_fit, tc, &x_val, &y_val);
    } else {
      train_mlp(model, x, y, tc);
    }
    return model;
  });
}

inline std::pair<StaticEvalReport, ErrorCdf> static_evaluate(const ExperimentConfig& cfg,
                                                             const MlpModel* model,
                                                             const StaticDataset& train,
                                                             const StaticDataset& test) {
  return run_stage("evaluate", [&] {
    StaticEvalReport rep;
    if (model == nullptr) {
      std::vector<std::array<int, 2>> oracle;
      for (const StaticRecord& r : test.records) oracle.push_back({r.target, r.target});
      rep = evaluate_static_predictions(oracle, test, train.hashes());
    } else {
      rep = evaluate_static(*model, test, train.hashes());
    }
    return std::pair<StaticEvalReport, ErrorCdf>{
        rep, random_codeword_cdf(test, derive_seed(cfg.seed, kRandomCdfStream))};
  });
}

inline void write_static_reports(const RunOptions& opt, std::uint64_t chash, std::uint64_t seed,
                                 const StaticEvalReport& rep, const ErrorCdf& random_cdf) {
  std::string cdf_csv = report_stamp(chash, seed);
  cdf_csv += csv_row({"quantile", "model_top1_error", "model_top2_error", "random_error"});
  for (int d = 0; d <= 10; ++d) {
    const double q = d / 10.0;
    cdf_csv += csv_row({format_double(q), format_double(rep.top1.quantile(q)),
                        format_double(rep.top2.quantile(q)),
                        format_double(random_cdf.quantile(q))});
  }
  write_file(out_path(opt, "static_cdf.csv"), cdf_csv);

  std::string sum_csv = report_stamp(chash, seed);
  sum_csv += csv_row({"metric", "value"});
  sum_csv += csv_row({"top1_index_accuracy", format_double(rep.top1_index_accuracy)});
  sum_csv += csv_row({"top2_index_accuracy", format_double(rep.top2_index_accuracy)});
  sum_csv += csv_row({"top1_frac_error_below_0.1", format_double(rep.top1.fraction_below(0.1))});
  sum_csv += csv_row({"top2_frac_error_below_0.1", format_double(rep.top2.fraction_below(0.1))});
  sum_csv +=
      csv_row({"random_frac_error_below_0.1", format_double(random_cdf.fraction_below(0.1))});
  write_file(out_path(opt, "static_summary.csv"), sum_csv);
}

}  // namespace detail

/// Beam-index inference from remote-site features: datasets, an MLP
/// classifier (or the oracle shortcut), and error-CDF reports.
inline std::vector<std::string> run_static(const ExperimentConfig& cfg, const RunOptions& opt) {
  detail::ensure_out_dir(opt);
  detail::RunLog log(opt.out_dir, "static");
  const std::uint64_t chash = config_hash(cfg);

  const auto [train, test] = detail::static_datasets(cfg, opt.threads);
  save_dataset(detail::out_path(opt, "static_train.dataset"), train);
  save_dataset(detail::out_path(opt, "static_test.dataset"), test);
  log.note("built datasets");
  std::vector<std::string> files = {"static_train.dataset", "static_test.dataset"};

  MlpModel model;
  const bool oracle = cfg.static_task.oracle_model;
  if (!oracle) {
    model = detail::train_static_model(cfg, train);
    save_model(detail::out_path(opt, "static_model.checkpoint"), model, cfg.seed, chash);
    files.push_back("static_model.checkpoint");
    log.note("trained model");
  }
  const auto [rep, random_cdf] =
      detail::static_evaluate(cfg, oracle ? nullptr : &model, train, test);
  detail::write_static_reports(opt, chash, cfg.seed, rep, random_cdf);
  log.note("wrote reports");
  files.push_back("static_cdf.csv");
  files.push_back("static_summary.csv");
  files.push_back("run.log");
  return files;
}

// ---------------------------------------------------------------------------
// sequence

namespace detail {

inline SequenceConfig sequence_config(const ExperimentConfig& cfg, int trajectories) {
  SequenceConfig sc;
  sc.ensemble = cfg.ensemble();
  sc.l_in = cfg.sequence.l_in;
  sc.l_out = cfg.sequence.l_out;
  sc.delay_min = cfg.sequence.delay_min;
  sc.delay_max = cfg.sequence.delay_max;
  sc.windows = cfg.sequence.windows;
  sc.trajectories = trajectories;
  return sc;
}

struct SequenceData {
  SequenceDataset train;
  SequenceDataset test;
  StaticDataset static_train;
};

inline SequenceData sequence_datasets(const ExperimentConfig& cfg, unsigned threads) {
  return run_stage("build-dataset", [&] {
    SequenceData d;
    d.train = build_sequence_dataset(sequence_config(cfg, cfg.sequence.train_trajectories),
                                     derive_seed(cfg.seed, kTrainStream), threads);
    d.test = build_sequence_dataset(sequence_config(cfg, cfg.sequence.test_trajectories),
                                    derive_seed(cfg.seed, kTestStream), threads);
    d.static_train = build_static_dataset(cfg.ensemble(), cfg.sequence.static_train_points,
                                          derive_seed(cfg.seed, kStaticBaselineStream), threads);
    return d;
  });
}

struct SequenceModels {
  GruSeq2Seq gru;
  MlpModel baseline;
};

inline SequenceModels train_sequence_models(const ExperimentConfig& cfg, const SequenceData& d) {
  return run_stage("train", [&] {
    SequenceModels m;
    m.gru = make_gru(d.train.feature_dim, cfg.sequence.hidden, d.train.target_codebook.size(),
                     OutputHead::kSoftmax, derive_seed(cfg.seed, kInitStream));
    TrainConfig tc = cfg.training.train;
    tc.seed = derive_seed(cfg.seed, kShuffleStream);
    std::vector<GruRecord> records = sequence_training_records(d.train);
    if (tc.patience > 0) {
      const auto n_val = static_cast<std::size_t>(cfg.training.val_fraction *
                                                  static_cast<double>(records.size()));
      if (n_val < 1) throw ConfigError("patience > 0 needs val_fraction large enough for 1 record");
      const std::vector<GruRecord> val(records.end() - static_cast<std::ptrdiff_t>(n_val),
                                       records.end());
      records.resize(records.size() - n_val);
      train_gru(m.gru, records, tc, &val);
    } else {
      train_gru(m.gru, records, tc);
    }

    m.baseline = make_mlp(mlp_dims(d.static_train.feature_dim, cfg.model.hidden,
                                   d.static_train.target_codebook.size()),
                          OutputHead::kSoftmax, derive_seed(cfg.seed, kBaselineInitStream));
    TrainConfig bc = cfg.training.train;
    bc.seed = derive_seed(cfg.seed, kBaselineShuffleStream);
    train_mlp(m.baseline, feature_matrix(d.static_train), label_vector(d.static_train), bc);
    return m;
  });
}

inline SequenceEvalReport sequence_evaluate(const ExperimentConfig& cfg, const GruSeq2Seq& gru,
                                            const MlpModel& baseline,
                                            const SequenceDataset& test) {
  return run_stage("evaluate", [&] {
    SequenceEvalOptions eo;
    eo.lo_noise_std = cfg.sequence.lo_noise_std;
    eo.lo_seed = derive_seed(cfg.seed, kLoStream);
    eo.static_model = &baseline;
    return evaluate_sequence(gru, test, eo);
  });
}

inline void write_sequence_reports(const RunOptions& opt, std::uint64_t chash, std::uint64_t seed,
                                   const SequenceEvalReport& rep) {
  std::string delays_csv = report_stamp(chash, seed);
  delays_csv += csv_row({"delay", "count", "gru_gain_ratio", "lo_gain_ratio", "static_gain_ratio"});
  for (const DelayBucket& b : rep.buckets)
    delays_csv += csv_row({std::to_string(b.delay), std::to_string(b.count),
                           format_double(b.gru_ratio), format_double(b.lo_ratio),
                           format_double(b.static_ratio)});
  write_file(out_path(opt, "sequence_delays.csv"), delays_csv);

  std::string sum_csv = report_stamp(chash, seed);
  sum_csv += csv_row({"metric", "value"});
  sum_csv += csv_row({"overall_gru_gain_ratio", format_double(rep.overall_gru)});
  sum_csv += csv_row({"overall_lo_gain_ratio", format_double(rep.overall_lo)});
  sum_csv += csv_row({"overall_static_gain_ratio", format_double(rep.overall_static)});
  sum_csv += csv_row({"max_delay_paired_gru_minus_static", format_double(rep.paired_mean)});
  sum_csv += csv_row({"max_delay_paired_ci95", format_double(rep.paired_ci95)});
  write_file(out_path(opt, "sequence_summary.csv"), sum_csv);
}

}  // namespace detail

/// Delay-compensating sequence inference: GRU seq2seq against the
/// location-only and per-slot classifier baselines.
inline std::vector<std::string> run_sequence(const ExperimentConfig& cfg, const RunOptions& opt) {
  detail::ensure_out_dir(opt);
  detail::RunLog log(opt.out_dir, "sequence");
  const std::uint64_t chash = config_hash(cfg);

  const detail::SequenceData data = detail::sequence_datasets(cfg, opt.threads);
  save_dataset(detail::out_path(opt, "sequence_train.dataset"), data.train);
  save_dataset(detail::out_path(opt, "sequence_test.dataset"), data.test);
  log.note("built datasets");

  const detail::SequenceModels models = detail::train_sequence_models(cfg, data);
  save_model(detail::out_path(opt, "sequence_model.checkpoint"), models.gru, cfg.seed, chash);
  save_model(detail::out_path(opt, "sequence_baseline.checkpoint"), models.baseline, cfg.seed,
             chash);
  log.note("trained models");

  const SequenceEvalReport rep =
      detail::sequence_evaluate(cfg, models.gru, models.baseline, data.test);
  detail::write_sequence_reports(opt, chash, cfg.seed, rep);
  log.note("wrote reports");
  return {"sequence_train.dataset", "sequence_test.dataset", "sequence_model.checkpoint",
          "sequence_baseline.checkpoint", "sequence_delays.csv", "sequence_summary.csv", "run.log"};
}

// ---------------------------------------------------------------------------
// grouping

namespace detail {

inline MlpModel train_aps_model(const ExperimentConfig& cfg, unsigned threads) {
  return run_stage("train", [&] {
    ApsConfig ac;
    ac.ensemble = cfg.ensemble();
    ac.snapshots = cfg.grouping.snapshots;
    ac.mbs_grid = cfg.grouping.feature_grid;
    ac.sbs_grid = cfg.grouping.serving_grid;
    const ApsDataset aps = build_aps_dataset(ac, cfg.grouping.aps_train_points,
                                             derive_seed(cfg.seed, kApsStream), threads);
    MlpModel model =
        make_mlp(mlp_dims(cfg.grouping.feature_grid, cfg.model.hidden, cfg.grouping.serving_grid),
                 OutputHead::kLogSpectrum, derive_seed(cfg.seed, kInitStream));
    TrainConfig tc = cfg.training.train;
    tc.seed = derive_seed(cfg.seed, kShuffleStream);
    train_mlp(model, aps_input_features(aps), aps_log_targets(aps), tc);
    return model;
  });
}

inline GroupingReport grouping_evaluate(const ExperimentConfig& cfg, const MlpModel& aps_model,
                                        unsigned threads) {
  return run_stage("evaluate", [&] {
    GroupingConfig gc;
    gc.ensemble = cfg.ensemble();
    gc.user_counts = cfg.grouping.user_counts;
    gc.scenes_per_count = cfg.grouping.scenes_per_count;
    gc.snapshots = cfg.grouping.snapshots;
    gc.serving_grid = cfg.grouping.serving_grid;
    gc.feature_grid = cfg.grouping.feature_grid;
    gc.snr_db = cfg.grouping.snr_db;
    gc.sinr_min = cfg.grouping.sinr_min;
    gc.tau = cfg.grouping.tau;
    return evaluate_grouping_experiment(
        gc,
        {GroupingMode::kInferredAps, GroupingMode::kTrueAps, GroupingMode::kAllAtOnce,
         GroupingMode::kOrthogonal},
        derive_seed(cfg.seed, kGroupingStream), &aps_model, threads);
  });
}

inline void write_grouping_report(const RunOptions& opt, std::uint64_t chash, std::uint64_t seed,
                                  const GroupingReport& rep) {
  std::string csv = report_stamp(chash, seed);
  csv += csv_row({"user_count", "mode", "tau", "mean_sum_rate", "ci95"});
  for (const GroupingCell& c : rep.cells)
    csv += csv_row({std::to_string(c.user_count), to_string(c.mode), format_double(c.tau),
                    format_double(c.mean_sum_rate), format_double(c.ci95)});
  write_file(out_path(opt, "grouping.csv"), csv);
}

}  // namespace detail

/// Spectrum-overlap user grouping against the serve-all and orthogonal
/// baselines, with the inferred-spectrum model trained in-pipeline.
inline std::vector<std::string> run_grouping(const ExperimentConfig& cfg, const RunOptions& opt) {
  detail::ensure_out_dir(opt);
  detail::RunLog log(opt.out_dir, "grouping");
  const std::uint64_t chash = config_hash(cfg);

  const MlpModel aps_model = detail::train_aps_model(cfg, opt.threads);
  save_model(detail::out_path(opt, "aps_model.checkpoint"), aps_model, cfg.seed, chash);
  log.note("trained spectrum model");

  const GroupingReport rep = detail::grouping_evaluate(cfg, aps_model, opt.threads);
  detail::write_grouping_report(opt, chash, cfg.seed, rep);
  log.note("wrote grouping.csv");
  return {"aps_model.checkpoint", "grouping.csv", "run.log"};
}

// ---------------------------------------------------------------------------
// scaling

/// Remote-bearing estimation error versus array size for the two-site and
/// single-site modes, with fitted log-log slopes.
inline std::vector<std::string> run_scaling(const ExperimentConfig& cfg, const RunOptions& opt) {
  detail::ensure_out_dir(opt);
  detail::RunLog log(opt.out_dir, "scaling");
  const std::uint64_t chash = config_hash(cfg);

  std::string csv = report_stamp(chash, cfg.seed);
  csv += csv_row({"mode", "elements", "mse", "fitted_slope"});
  detail::run_stage("analyze", [&] {
    for (AoaMode mode : {AoaMode::kTwoSite, AoaMode::kOneSite}) {
      AoaScalingConfig ac;
      ac.mode = mode;
      ac.m_values = cfg.scaling.m_values;
      ac.trials = static_cast<std::uint64_t>(cfg.scaling.trials);
      ac.snr_db = cfg.scaling.snr_db;
      ac.seed = derive_seed(cfg.seed, mode == AoaMode::kTwoSite ? 0x74776f : 0x6f6e65);
      const ScalingReport rep = remote_aoa_scaling(ac, opt.threads);
      const std::string name = mode == AoaMode::kTwoSite ? "two-site" : "one-site";
      for (std::size_t i = 0; i < rep.m_values.size(); ++i)
        csv += csv_row({name, std::to_string(rep.m_values[i]), format_double(rep.mse_values[i]),
                        format_double(rep.fitted_slope)});
      log.note(name + " slope " + format_double(rep.fitted_slope));
    }
    return 0;
  });
  write_file(detail::out_path(opt, "scaling.csv"), csv);
  log.note("wrote scaling.csv");
  return {"scaling.csv", "run.log"};
}

// ---------------------------------------------------------------------------
// stage commands and dispatch

/// Samples one scene from the config's scene family and writes it as text.
inline std::vector<std::string> run_scene_sample(const ExperimentConfig& cfg,
                                                 const RunOptions& opt) {
  detail::ensure_out_dir(opt);
  detail::RunLog log(opt.out_dir, "scene-sample");
  const Scene scene = detail::run_stage("sample", [&] {
    return sample_scene(cfg.scene, derive_seed(cfg.seed, detail::kBaseSceneStream));
  });

  TextNode root;
  for (const Site& s : scene.sites) {
    TextNode& n = root.add_block("site");
    n.add("id", s.id);
    n.add("x", s.position.x());
    n.add("y", s.position.y());
    n.add("elements", s.array.num_elements);
    n.add("spacing", s.array.spacing);
    n.add("orientation", s.array.orientation);
    n.add("wavelength", s.carrier_wavelength);
  }
  for (const Scatterer& s : scene.scatterers) {
    TextNode& n = root.add_block("scatterer");
    n.add("x", s.position.x());
    n.add("y", s.position.y());
    n.add("reflectivity_re", s.reflectivity.real());
    n.add("reflectivity_im", s.reflectivity.imag());
  }
  for (const User& u : scene.users) {
    TextNode& n = root.add_block("user");
    n.add("id", u.id);
    n.add("x", u.position.x());
    n.add("y", u.position.y());
    n.add("vx", u.velocity.x());
    n.add("vy", u.velocity.y());
  }
  root.add("pathloss_exponent", scene.pathloss_exponent);
  root.add("los_default", scene.los_enabled.default_enabled);
  root.add("noise_floor", scene.noise_floor);
  root.add("subcarrier_spacing", scene.subcarrier_spacing);

  const std::string text = report_stamp(config_hash(cfg), cfg.seed) + serialize_text(root);
  write_file(detail::out_path(opt, "scene.txt"), text);
  log.note("wrote scene.txt");
  return {"scene.txt", "run.log"};
}

/// Builds and saves the datasets of a static or sequence experiment without
/// training anything.
inline std::vector<std::string> run_dataset_build(const ExperimentConfig& cfg,
                                                  const RunOptions& opt) {
  if (cfg.kind == ExperimentKind::kStatic) {
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "dataset-build");
    const auto [train, test] = detail::static_datasets(cfg, opt.threads);
    save_dataset(detail::out_path(opt, "static_train.dataset"), train);
    save_dataset(detail::out_path(opt, "static_test.dataset"), test);
    log.note("built datasets");
    return {"static_train.dataset", "static_test.dataset", "run.log"};
  }
  if (cfg.kind == ExperimentKind::kSequence) {
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "dataset-build");
    const detail::SequenceData data = detail::sequence_datasets(cfg, opt.threads);
    save_dataset(detail::out_path(opt, "sequence_train.dataset"), data.train);
    save_dataset(detail::out_path(opt, "sequence_test.dataset"), data.test);
    log.note("built datasets");
    return {"sequence_train.dataset", "sequence_test.dataset", "run.log"};
  }
  throw ConfigError("dataset build supports kinds 'static' and 'sequence', got '" +
                    to_string(cfg.kind) + "'");
}

/// Trains and saves the model(s) of a static, sequence, or grouping
/// experiment; datasets are rebuilt deterministically from the config.
inline std::vector<std::string> run_train(const ExperimentConfig& cfg, const RunOptions& opt) {
  const std::uint64_t chash = config_hash(cfg);
  if (cfg.kind == ExperimentKind::kStatic) {
    if (cfg.static_task.oracle_model)
      throw ConfigError("kind 'static' with oracle_model has nothing to train");
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "train");
    const auto [train, test] = detail::static_datasets(cfg, opt.threads);
    const MlpModel model = detail::train_static_model(cfg, train);
    save_model(detail::out_path(opt, "static_model.checkpoint"), model, cfg.seed, chash);
    log.note("trained model");
    return {"static_model.checkpoint", "run.log"};
  }
  if (cfg.kind == ExperimentKind::kSequence) {
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "train");
    const detail::SequenceData data = detail::sequence_datasets(cfg, opt.threads);
    const detail::SequenceModels models = detail::train_sequence_models(cfg, data);
    save_model(detail::out_path(opt, "sequence_model.checkpoint"), models.gru, cfg.seed, chash);
    save_model(detail::out_path(opt, "sequence_baseline.checkpoint"), models.baseline, cfg.seed,
               chash);
    log.note("trained models");
    return {"sequence_model.checkpoint", "sequence_baseline.checkpoint", "run.log"};
  }
  if (cfg.kind == ExperimentKind::kGrouping) {
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "train");
    const MlpModel model = detail::train_aps_model(cfg, opt.threads);
    save_model(detail::out_path(opt, "aps_model.checkpoint"), model, cfg.seed, chash);
    log.note("trained spectrum model");
    return {"aps_model.checkpoint", "run.log"};
  }
  throw ConfigError("train supports kinds 'static', 'sequence', and 'grouping', got '" +
                    to_string(cfg.kind) + "'");
}

/// Evaluates checkpoints from the output directory against freshly rebuilt
/// datasets and writes the reports.
inline std::vector<std::string> run_eval(const ExperimentConfig& cfg, const RunOptions& opt) {
  const std::uint64_t chash = config_hash(cfg);
  if (cfg.kind == ExperimentKind::kStatic) {
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "eval");
    const auto [train, test] = detail::static_datasets(cfg, opt.threads);
    MlpModel model;
    const bool oracle = cfg.static_task.oracle_model;
    if (!oracle)
      model = detail::run_stage("load-model", [&] {
        return load_mlp(detail::out_path(opt, "static_model.checkpoint"));
      });
    const auto [rep, random_cdf] =
        detail::static_evaluate(cfg, oracle ? nullptr : &model, train, test);
    detail::write_static_reports(opt, chash, cfg.seed, rep, random_cdf);
    log.note("wrote reports");
    return {"static_cdf.csv", "static_summary.csv", "run.log"};
  }
  if (cfg.kind == ExperimentKind::kSequence) {
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "eval");
    const detail::SequenceData data = detail::sequence_datasets(cfg, opt.threads);
    const GruSeq2Seq gru = detail::run_stage("load-model", [&] {
      return load_gru(detail::out_path(opt, "sequence_model.checkpoint"));
    });
    const MlpModel baseline = detail::run_stage("load-model", [&] {
      return load_mlp(detail::out_path(opt, "sequence_baseline.checkpoint"));
    });
    const SequenceEvalReport rep = detail::sequence_evaluate(cfg, gru, baseline, data.test);
    detail::write_sequence_reports(opt, chash, cfg.seed, rep);
    log.note("wrote reports");
    return {"sequence_delays.csv", "sequence_summary.csv", "run.log"};
  }
  if (cfg.kind == ExperimentKind::kGrouping) {
    detail::ensure_out_dir(opt);
    detail::RunLog log(opt.out_dir, "eval");
    const MlpModel model = detail::run_stage("load-model", [&] {
      return load_mlp(detail::out_path(opt, "aps_model.checkpoint"));
    });
    const GroupingReport rep = detail::grouping_evaluate(cfg, model, opt.threads);
    detail::write_grouping_report(opt, chash, cfg.seed, rep);
    log.note("wrote grouping.csv");
    return {"grouping.csv", "run.log"};
  }
  throw ConfigError("eval supports kinds 'static', 'sequence', and 'grouping', got '" +
                    to_string(cfg.kind) + "'");
}

/// Dispatches the config's kind to its pipeline.
inline std::vector<std::string> run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  switch (cfg.kind) {
    case ExperimentKind::kDependence: return run_dependence(cfg, opt);
    case ExperimentKind::kStatic: return run_static(cfg, opt);
    case ExperimentKind::kSequence: return run_sequence(cfg, opt);
    case ExperimentKind::kGrouping: return run_grouping(cfg, opt);
    case ExperimentKind::kScaling: return run_scaling(cfg, opt);
  }
  throw std::invalid_argument("run_experiment: unknown kind");
}

}  // namespace csilab
