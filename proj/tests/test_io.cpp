#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "csilab/experiments.hpp"

namespace csilab {
namespace {

std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "csilab_io_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

void expect_bits_equal(const MatR& a, const MatR& b) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) EXPECT_EQ(a(i, j), b(i, j));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t at = 0;
  while (at < text.size()) {
    const std::size_t nl = text.find('\n', at);
    lines.push_back(text.substr(at, nl - at));
    if (nl == std::string::npos) break;
    at = nl + 1;
  }
  return lines;
}

// ---------------------------------------------------------------------------
// text format

TEST(TextFormat, RoundTripsNestedNodes) {
  TextNode root;
  root.add("alpha", 0.1);
  root.add("count", 42);
  root.add("name", "mbs");
  root.add("flag", true);
  TextNode& inner = root.add_block("inner");
  inner.add("x", -3.25);
  inner.add_block("deep").add("y", 1e-12);

  const std::string text = serialize_text(root);
  const TextNode back = parse_text(text);
  EXPECT_EQ(serialize_text(back), text);
  EXPECT_EQ(back.value("name"), "mbs");
  EXPECT_EQ(parse_double(back.block("inner").value("x")), -3.25);
  EXPECT_EQ(parse_double(back.block("inner").block("deep").value("y")), 1e-12);
}

TEST(TextFormat, SkipsCommentsAndBlankLines) {
  const std::string text =
      "# leading comment\n"
      "a 1\n"
      "\n"
      "# between\n"
      "b {\n"
      "  # inside\n"
      "  c 2\n"
      "}\n";
  const TextNode n = parse_text(text);
  EXPECT_EQ(parse_int(n.value("a")), 1);
  EXPECT_EQ(parse_int(n.block("b").value("c")), 2);
}

TEST(TextFormat, RejectsMalformedBraces) {
  EXPECT_THROW(parse_text("a {\n  b 1\n"), IoError);
  EXPECT_THROW(parse_text("}\n"), IoError);
  EXPECT_THROW(parse_text("a 1 {\n}\n"), IoError);
  try {
    parse_text("ok 1\nbad {\n");
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(TextFormat, PrintsDoublesAtShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.5), "-2.5");
  for (double v : {0.1, 1.0 / 3.0, 1e-12, 6.02214076e23, -0.0, 123456789.123456789}) {
    const double back = parse_double(format_double(v));
    EXPECT_EQ(back, v) << format_double(v);
  }
}

TEST(TextFormat, RejectsNonNumericText) {
  EXPECT_THROW(parse_double("0.1x"), IoError);
  EXPECT_THROW(parse_double(""), IoError);
  EXPECT_THROW(parse_int("7.5"), IoError);
  EXPECT_THROW(parse_u64("-3"), IoError);
  EXPECT_THROW(parse_hex64("xyz"), IoError);
  EXPECT_EQ(parse_hex64(format_hex64(0xdeadbeef12345678ull)), 0xdeadbeef12345678ull);
}

TEST(TextFormat, QuotesCsvFieldsOnlyWhenNeeded) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(csv_row({"a", "b,c"}), "a,\"b,c\"\n");
}

// ---------------------------------------------------------------------------
// config

TEST(ConfigParse, FillsDefaultsForMinimalStaticConfig) {
  const ExperimentConfig cfg = parse_config_text(
      "kind static\n"
      "seed 1\n"
      "ensemble {\n"
      "  codebook_oversampling 1\n"
      "}\n");
  EXPECT_EQ(cfg.kind, ExperimentKind::kStatic);
  EXPECT_EQ(cfg.seed, 1u);
  EXPECT_EQ(cfg.static_task.train_points, 20000);
  EXPECT_EQ(cfg.static_task.test_points, 5000);
  EXPECT_FALSE(cfg.static_task.oracle_model);
  ASSERT_EQ(cfg.scene.sites.size(), 2u);
  EXPECT_EQ(cfg.scene.sites[0].id, "mbs");
  EXPECT_EQ(cfg.scene.sites[1].id, "sbs");
  EXPECT_EQ(cfg.target_site, "sbs");
  EXPECT_EQ(cfg.training.train.epochs, 50);
}

TEST(ConfigParse, NamesUnknownKeysAndTheirSection) {
  try {
    parse_config_text(
        "kind dependence\n"
        "seed 1\n"
        "dependence {\n"
        "  samples 100\n"
        "  oversampling 1\n"
        "  tyop 3\n"
        "}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.issues.size(), 1u);
    EXPECT_EQ(e.issues[0], "unknown key 'tyop' in section 'dependence'");
  }
}

TEST(ConfigParse, CollectsEveryProblemInOnePass) {
  try {
    parse_config_text(
        "kind dependence\n"
        "dependence {\n"
        "  oversampling 0\n"
        "  wat 3\n"
        "}\n"
        "training {\n"
        "  learning_rate 0\n"
        "}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string all = e.what();
    EXPECT_GE(e.issues.size(), 4u);
    EXPECT_NE(all.find("missing required key 'seed'"), std::string::npos);
    EXPECT_NE(all.find("missing required key 'samples'"), std::string::npos);
    EXPECT_NE(all.find("unknown key 'wat' in section 'dependence'"), std::string::npos);
    EXPECT_NE(all.find("learning_rate must be > 0"), std::string::npos);
  }
}

TEST(ConfigParse, RefusesToDefaultSeedOversamplingOrSinrThreshold) {
  EXPECT_THROW(parse_config_text("kind static\nensemble {\n  codebook_oversampling 1\n}\n"),
               ConfigError);
  EXPECT_THROW(parse_config_text("kind static\nseed 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("kind grouping\nseed 1\n"
                                 "ensemble {\n  codebook_oversampling 1\n}\n"
                                 "grouping {\n  user_counts 4\n}\n"),
               ConfigError);
}

TEST(ConfigParse, CanonicalFormIsAFixedPoint) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::kGrouping;
  cfg.seed = 77;
  cfg.grouping.tau = 0.45;
  cfg.grouping.user_counts = {4, 8};
  cfg.model.hidden = {64, 32};
  const std::string canon = serialize_config(cfg);
  const ExperimentConfig back = parse_config_text(canon);
  EXPECT_EQ(serialize_config(back), canon);
  EXPECT_EQ(config_hash(back), config_hash(cfg));
}

TEST(ConfigParse, HashTracksContent) {
  ExperimentConfig a;
  a.kind = ExperimentKind::kStatic;
  a.seed = 5;
  ExperimentConfig b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 6;
  EXPECT_NE(config_hash(a), config_hash(b));
  b = a;
  b.grouping.tau = 0.9;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(ConfigParse, ValidatesApsGridsAgainstArraySizes) {
  try {
    parse_config_text(
        "kind grouping\n"
        "seed 1\n"
        "ensemble {\n  codebook_oversampling 1\n}\n"
        "grouping {\n  sinr_min 0.2\n  feature_grid 64\n  serving_grid 8\n}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string all = e.what();
    EXPECT_NE(all.find("feature_grid smaller"), std::string::npos);
    EXPECT_NE(all.find("serving_grid smaller"), std::string::npos);
  }
}

TEST(ConfigParse, MissingFileIsAConfigError) {
  EXPECT_THROW(parse_config("/nonexistent/surely/absent.cfg"), ConfigError);
}

// ---------------------------------------------------------------------------
// dataset files

EnsembleConfig tiny_ensemble() {
  EnsembleConfig ec;
  ec.scene = default_scene_config();
  ec.scene.sites[0].array.num_elements = 8;
  ec.scene.sites[1].array.num_elements = 6;
  return ec;
}

TEST(DatasetFiles, StaticRoundTripIsByteExact) {
  const std::string dir = scratch_dir("static_rt");
  const StaticDataset ds = build_static_dataset(tiny_ensemble(), 12, 99);
  const std::string p1 = dir + "/a.dataset";
  const std::string p2 = dir + "/b.dataset";
  save_dataset(p1, ds);
  const StaticDataset back = load_static_dataset(p1);
  save_dataset(p2, back);
  EXPECT_EQ(read_file(p1), read_file(p2));

  ASSERT_EQ(back.records.size(), ds.records.size());
  EXPECT_EQ(back.feature_dim, ds.feature_dim);
  EXPECT_EQ(back.config_hash, ds.config_hash);
  EXPECT_EQ(back.seed, ds.seed);
  EXPECT_EQ(back.target_codebook.size(), ds.target_codebook.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    EXPECT_EQ(back.records[i].target, ds.records[i].target);
    EXPECT_EQ(back.records[i].hash, ds.records[i].hash);
    for (Eigen::Index j = 0; j < ds.feature_dim; ++j)
      EXPECT_EQ(back.records[i].features[j], ds.records[i].features[j]);
    for (Eigen::Index j = 0; j < ds.records[i].h_target.size(); ++j)
      EXPECT_EQ(back.records[i].h_target[j], ds.records[i].h_target[j]);
    EXPECT_EQ(back.records[i].user_pos, ds.records[i].user_pos);
  }
}

TEST(DatasetFiles, SequenceRoundTripIsByteExact) {
  const std::string dir = scratch_dir("seq_rt");
  SequenceConfig sc;
  sc.ensemble = tiny_ensemble();
  sc.ensemble.scene.speed_min = 1.0;
  sc.ensemble.scene.speed_max = 2.0;
  sc.l_in = 3;
  sc.delay_min = 1;
  sc.delay_max = 2;
  sc.trajectories = 5;
  const SequenceDataset ds = build_sequence_dataset(sc, 7);
  const std::string p1 = dir + "/a.dataset";
  const std::string p2 = dir + "/b.dataset";
  save_dataset(p1, ds);
  const SequenceDataset back = load_sequence_dataset(p1);
  save_dataset(p2, back);
  EXPECT_EQ(read_file(p1), read_file(p2));

  ASSERT_EQ(back.records.size(), ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    EXPECT_EQ(back.records[i].delay, ds.records[i].delay);
    EXPECT_EQ(back.records[i].targets, ds.records[i].targets);
    EXPECT_EQ(back.records[i].hash, ds.records[i].hash);
    expect_bits_equal(back.records[i].inputs, ds.records[i].inputs);
  }
}

TEST(DatasetFiles, RejectsTruncatedFiles) {
  const std::string dir = scratch_dir("trunc");
  const StaticDataset ds = build_static_dataset(tiny_ensemble(), 6, 3);
  const std::string path = dir + "/d.dataset";
  save_dataset(path, ds);
  const std::string full = read_file(path);
  write_file(path, full.substr(0, full.size() * 3 / 5));
  EXPECT_THROW(load_static_dataset(path), IoError);
}

TEST(DatasetFiles, RejectsUnsupportedVersion) {
  const std::string dir = scratch_dir("ver");
  const StaticDataset ds = build_static_dataset(tiny_ensemble(), 3, 3);
  const std::string path = dir + "/d.dataset";
  save_dataset(path, ds);
  std::string text = read_file(path);
  text.replace(text.find(" v1"), 3, " v9");
  write_file(path, text);
  try {
    load_static_dataset(path);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported dataset version"), std::string::npos);
  }
}

TEST(DatasetFiles, RejectsKindMismatchAndTrailingContent) {
  const std::string dir = scratch_dir("kind");
  const StaticDataset ds = build_static_dataset(tiny_ensemble(), 3, 3);
  const std::string path = dir + "/d.dataset";
  save_dataset(path, ds);
  EXPECT_THROW(load_sequence_dataset(path), IoError);
  write_file(path, read_file(path) + "stray trailing line\n");
  EXPECT_THROW(load_static_dataset(path), IoError);
}

// ---------------------------------------------------------------------------
// checkpoints

TEST(Checkpoints, MlpReloadReproducesForwardOutputsBitExact) {
  const std::string dir = scratch_dir("mlp_ckpt");
  const MlpModel model = make_mlp({6, 9, 4}, OutputHead::kSoftmax, 42);
  const std::string path = dir + "/m.checkpoint";
  save_model(path, model, 1234, 0xabcd);

  std::uint64_t seed = 0;
  const MlpModel back = load_mlp(path, &seed);
  EXPECT_EQ(seed, 1234u);
  Rng rng(5);
  MatR x(7, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  expect_bits_equal(mlp_forward_batch(back, x), mlp_forward_batch(model, x));

  const std::string p2 = dir + "/m2.checkpoint";
  save_model(p2, back, 1234, 0xabcd);
  EXPECT_EQ(read_file(path), read_file(p2));
}

TEST(Checkpoints, GruReloadReproducesForwardOutputsBitExact) {
  const std::string dir = scratch_dir("gru_ckpt");
  const GruSeq2Seq model = make_gru(5, 8, 3, OutputHead::kSoftmax, 4);
  const std::string path = dir + "/g.checkpoint";
  save_model(path, model, 9, 0);

  const GruSeq2Seq back = load_gru(path);
  Rng rng(6);
  MatR inputs(4, 5);
  for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.normal();
  expect_bits_equal(gru_forward(back, inputs, 2), gru_forward(model, inputs, 2));
}

TEST(Checkpoints, RejectsCorruptFiles) {
  const std::string dir = scratch_dir("bad_ckpt");
  const MlpModel model = make_mlp({4, 5, 3}, OutputHead::kSoftmax, 1);
  const std::string path = dir + "/m.checkpoint";
  save_model(path, model, 1, 0);

  const std::string full = read_file(path);
  write_file(path, full.substr(0, full.size() / 2));
  EXPECT_THROW(load_mlp(path), IoError);

  std::string wrong_ver = full;
  wrong_ver.replace(wrong_ver.find(" v1"), 3, " v3");
  write_file(path, wrong_ver);
  EXPECT_THROW(load_mlp(path), IoError);

  write_file(path, full);
  EXPECT_THROW(load_gru(path), IoError);
}

// ---------------------------------------------------------------------------
// pipelines

ExperimentConfig tiny_dependence_config() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::kDependence;
  cfg.seed = 31;
  cfg.scene.sites[0].array.num_elements = 8;
  cfg.scene.sites[1].array.num_elements = 6;
  cfg.dependence.samples = 60;
  cfg.dependence.sample_counts = {30, 60};
  return cfg;
}

TEST(Pipelines, DependenceReportHasStampAndColumns) {
  RunOptions opt;
  opt.out_dir = scratch_dir("dep_report");
  run_dependence(tiny_dependence_config(), opt);
  const auto lines = split_lines(read_file(opt.out_dir + "/dependence.csv"));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0].rfind("# config_hash=", 0), 0u);
  EXPECT_NE(lines[0].find(" master_seed=31"), std::string::npos);
  EXPECT_EQ(lines[1], "samples,H_sbs_bits,MI_bits,avg_cca");
  EXPECT_EQ(lines[2].rfind("30,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("60,", 0), 0u);
}

TEST(Pipelines, RerunWritesIdenticalReportBytes) {
  RunOptions a, b;
  a.out_dir = scratch_dir("dep_a");
  b.out_dir = scratch_dir("dep_b");
  b.threads = 3;
  const ExperimentConfig cfg = tiny_dependence_config();
  run_dependence(cfg, a);
  run_dependence(cfg, b);
  EXPECT_EQ(read_file(a.out_dir + "/dependence.csv"), read_file(b.out_dir + "/dependence.csv"));
}

TEST(Pipelines, OracleStaticModelScoresZeroError) {
  RunOptions opt;
  opt.out_dir = scratch_dir("oracle_static");
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::kStatic;
  cfg.seed = 8;
  cfg.scene.sites[0].array.num_elements = 8;
  cfg.scene.sites[1].array.num_elements = 6;
  cfg.static_task.train_points = 20;
  cfg.static_task.test_points = 15;
  cfg.static_task.oracle_model = true;
  const auto files = run_static(cfg, opt);
  for (const std::string& f : {"static_cdf.csv", "static_summary.csv"})
    EXPECT_NE(std::find(files.begin(), files.end(), f), files.end());

  const auto lines = split_lines(read_file(opt.out_dir + "/static_cdf.csv"));
  ASSERT_EQ(lines.size(), 13u);
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto c1 = lines[i].find(',');
    const auto c2 = lines[i].find(',', c1 + 1);
    EXPECT_EQ(lines[i].substr(c1 + 1, c2 - c1 - 1), "0") << lines[i];
  }
  const std::string summary = read_file(opt.out_dir + "/static_summary.csv");
  EXPECT_NE(summary.find("top1_frac_error_below_0.1,1\n"), std::string::npos);
}

TEST(Pipelines, EvalWithoutCheckpointNamesTheStage) {
  RunOptions opt;
  opt.out_dir = scratch_dir("no_ckpt");
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::kStatic;
  cfg.seed = 8;
  cfg.scene.sites[0].array.num_elements = 8;
  cfg.scene.sites[1].array.num_elements = 6;
  cfg.static_task.train_points = 10;
  cfg.static_task.test_points = 5;
  try {
    run_eval(cfg, opt);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage, "load-model");
  }
}

TEST(Pipelines, StageCommandsRejectKindsWithoutThatStage) {
  RunOptions opt;
  opt.out_dir = scratch_dir("kind_gate");
  ExperimentConfig cfg = tiny_dependence_config();
  EXPECT_THROW(run_dataset_build(cfg, opt), ConfigError);
  EXPECT_THROW(run_train(cfg, opt), ConfigError);
  EXPECT_THROW(run_eval(cfg, opt), ConfigError);
}

TEST(Pipelines, SceneSampleWritesParseableText) {
  RunOptions opt;
  opt.out_dir = scratch_dir("scene_sample");
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::kStatic;
  cfg.seed = 4;
  cfg.scene.num_scatterers = 3;
  run_scene_sample(cfg, opt);
  const std::string text = read_file(opt.out_dir + "/scene.txt");
  const TextNode n = parse_text(text);
  EXPECT_EQ(n.count("site"), 2);
  EXPECT_EQ(n.count("scatterer"), 3);
  EXPECT_EQ(n.count("user"), 1);
  EXPECT_EQ(parse_double(n.value("pathloss_exponent")), 2.0);
}

TEST(Pipelines, TimestampsOnlyAppearInTheSidecarLog) {
  RunOptions opt;
  opt.out_dir = scratch_dir("sidecar");
  run_dependence(tiny_dependence_config(), opt);
  const auto looks_stamped = [](const std::string& line) {
    return line.size() >= 19 && line[4] == '-' && line[7] == '-' && line[10] == 'T';
  };
  const auto log_lines = split_lines(read_file(opt.out_dir + "/run.log"));
  ASSERT_FALSE(log_lines.empty());
  EXPECT_TRUE(looks_stamped(log_lines[0])) << log_lines[0];
  for (const std::string& line : split_lines(read_file(opt.out_dir + "/dependence.csv")))
    EXPECT_FALSE(looks_stamped(line)) << line;
}

}  // namespace
}  // namespace csilab
