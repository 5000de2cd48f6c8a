// Command-line front end. Subcommands map onto the pipelines in
// csilab/experiments.hpp; every command takes a config file plus optional
// seed/output/thread overrides and exits 0 on success, 2 on a config
// problem, 3 on a pipeline failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csilab/experiments.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string run_config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
};

csilab::ExperimentConfig load_config(const CliArgs& args, bool from_run) {
  const std::string& path = from_run ? args.run_config_path : args.config_path;
  if (path.empty()) throw csilab::ConfigError("no config file given (use --config)");
  csilab::ExperimentConfig cfg = csilab::parse_config(path);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

csilab::RunOptions run_options(const CliArgs& args, const csilab::ExperimentConfig& cfg) {
  csilab::RunOptions opt;
  opt.threads = args.threads == 0 ? 1 : args.threads;
  if (!args.out.empty()) {
    opt.out_dir = args.out;
  } else if (!cfg.out.empty()) {
    opt.out_dir = cfg.out;
  } else if (const char* env = std::getenv("CSILAB_OUT")) {
    opt.out_dir = env;
  } else {
    opt.out_dir = "out";
  }
  return opt;
}

void require_kind(const csilab::ExperimentConfig& cfg, csilab::ExperimentKind kind,
                  const std::string& command) {
  if (cfg.kind != kind)
    throw csilab::ConfigError("'" + command + "' needs kind '" + csilab::to_string(kind) +
                              "', config has kind '" + csilab::to_string(cfg.kind) + "'");
}

void report(const std::vector<std::string>& files, const csilab::RunOptions& opt) {
  for (const std::string& f : files) std::cout << opt.out_dir << "/" << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wireless channel-state simulation and inference lab"};
  app.require_subcommand(1);

  CliArgs args;
  app.add_option("--config", args.config_path, "experiment config file");
  auto* seed_opt = app.add_option("--seed", args.seed, "override the config's master seed");
  app.add_option("--out", args.out, "output directory (default: config 'out', then $CSILAB_OUT)");
  app.add_option("--threads", args.threads, "worker threads (default 1)");

  int action = -1;
  enum { kSceneSample, kDatasetBuild, kTrain, kEval, kAnalyzeDependence,
         kAnalyzeScaling, kGroupEval, kRun };

  auto* scene = app.add_subcommand("scene", "scene family commands");
  scene->require_subcommand(1);
  scene->fallthrough();
  auto* scene_sample = scene->add_subcommand("sample", "draw one scene and write it as text");
  scene_sample->fallthrough();
  scene_sample->callback([&] { action = kSceneSample; });

  auto* dataset = app.add_subcommand("dataset", "dataset commands");
  dataset->require_subcommand(1);
  dataset->fallthrough();
  auto* dataset_build = dataset->add_subcommand("build", "build and save the datasets");
  dataset_build->fallthrough();
  dataset_build->callback([&] { action = kDatasetBuild; });

  auto* train = app.add_subcommand("train", "train and save the model checkpoints");
  train->fallthrough();
  train->callback([&] { action = kTrain; });

  auto* eval = app.add_subcommand("eval", "evaluate saved checkpoints and write reports");
  eval->fallthrough();
  eval->callback([&] { action = kEval; });

  auto* analyze = app.add_subcommand("analyze", "closed-form analyses");
  analyze->require_subcommand(1);
  analyze->fallthrough();
  auto* analyze_dep = analyze->add_subcommand("dependence", "cross-site dependence report");
  analyze_dep->fallthrough();
  analyze_dep->callback([&] { action = kAnalyzeDependence; });
  auto* analyze_scal = analyze->add_subcommand("scaling", "bearing-error scaling report");
  analyze_scal->fallthrough();
  analyze_scal->callback([&] { action = kAnalyzeScaling; });

  auto* group = app.add_subcommand("group", "user grouping commands");
  group->require_subcommand(1);
  group->fallthrough();
  auto* group_eval = group->add_subcommand("eval", "train the spectrum model and run grouping");
  group_eval->fallthrough();
  group_eval->callback([&] { action = kGroupEval; });

  auto* run = app.add_subcommand("run", "run the experiment a config describes, end to end");
  run->add_option("config", args.run_config_path, "experiment config file")->required();
  run->fallthrough();
  run->callback([&] { action = kRun; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  args.seed_set = seed_opt->count() > 0;

  try {
    const csilab::ExperimentConfig cfg = load_config(args, action == kRun);
    const csilab::RunOptions opt = run_options(args, cfg);
    std::vector<std::string> files;
    switch (action) {
      case kSceneSample: files = csilab::run_scene_sample(cfg, opt); break;
      case kDatasetBuild: files = csilab::run_dataset_build(cfg, opt); break;
      case kTrain: files = csilab::run_train(cfg, opt); break;
      case kEval: files = csilab::run_eval(cfg, opt); break;
      case kAnalyzeDependence:
        require_kind(cfg, csilab::ExperimentKind::kDependence, "analyze dependence");
        files = csilab::run_dependence(cfg, opt);
        break;
      case kAnalyzeScaling:
        require_kind(cfg, csilab::ExperimentKind::kScaling, "analyze scaling");
        files = csilab::run_scaling(cfg, opt);
        break;
      case kGroupEval:
        require_kind(cfg, csilab::ExperimentKind::kGrouping, "group eval");
        files = csilab::run_grouping(cfg, opt);
        break;
      case kRun: files = csilab::run_experiment(cfg, opt); break;
      default: throw csilab::ConfigError("no command selected");
    }
    report(files, opt);
  } catch (const csilab::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const csilab::PipelineError& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
