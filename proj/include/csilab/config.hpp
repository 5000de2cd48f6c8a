#pragma once
// Experiment configuration: a strict text format with kind-specific sections.
// Parsing collects every problem (unknown keys, bad values, missing required
// fields) before failing, and serialization emits a canonical normal form.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "csilab/aoa.hpp"
#include "csilab/scene.hpp"
#include "csilab/scheduling.hpp"
#include "csilab/tasks.hpp"
#include "csilab/text_io.hpp"
#include "csilab/train.hpp"

namespace csilab {

enum class ExperimentKind { kDependence, kStatic, kSequence, kGrouping, kScaling };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kDependence: return "dependence";
    case ExperimentKind::kStatic: return "static";
    case ExperimentKind::kSequence: return "sequence";
    case ExperimentKind::kGrouping: return "grouping";
    case ExperimentKind::kScaling: return "scaling";
  }
  throw std::invalid_argument("to_string: unknown experiment kind");
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "dependence") return ExperimentKind::kDependence;
  if (s == "static") return ExperimentKind::kStatic;
  if (s == "sequence") return ExperimentKind::kSequence;
  if (s == "grouping") return ExperimentKind::kGrouping;
  if (s == "scaling") return ExperimentKind::kScaling;
  throw ConfigError("unknown kind '" + s +
                    "' (expected dependence, static, sequence, grouping, or scaling)");
}

struct DependenceSection {
  int samples = 20000;
  std::vector<int> sample_counts;  // report rows; empty means {samples}
  std::string site_a = "mbs";
  std::string site_b = "sbs";
  int oversampling = 1;
  double cca_ridge = 1e-9;
};

struct StaticSection {
  int train_points = 20000;
  int test_points = 5000;
  bool oracle_model = false;
};

struct SequenceSection {
  int l_in = 8;
  int l_out = 1;
  int delay_min = 1;
  int delay_max = 5;
  int train_trajectories = 1000;
  int test_trajectories = 200;
  int windows = 1;
  int hidden = 64;
  double lo_noise_std = 1.0;
  int static_train_points = 4000;  // matched single-snapshot baseline model
};

struct GroupingSection {
  std::vector<int> user_counts{4, 8, 16, 32};
  int scenes_per_count = 50;
  int snapshots = 4;
  int serving_grid = 256;
  int feature_grid = 256;
  double snr_db = 10.0;
  double sinr_min = 0.2;
  double tau = 0.3;
  int aps_train_points = 4000;
};

struct ScalingSection {
  std::vector<int> m_values{8, 16, 32, 64, 128};
  long long trials = 2000;
  double snr_db = 10.0;
};

struct ModelSection {
  std::vector<int> hidden{100, 100, 100};
};

struct TrainingSection {
  TrainConfig train;
  double val_fraction = 0.1;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kStatic;
  std::uint64_t seed = 0;
  std::string out;
  SceneConfig scene = default_scene_config();
  std::vector<std::string> input_sites = {"mbs"};
  std::string target_site = "sbs";
  int codebook_oversampling = 1;
  bool fixed_environment = true;

  DependenceSection dependence;
  StaticSection static_task;
  SequenceSection sequence;
  GroupingSection grouping;
  ScalingSection scaling;
  ModelSection model;
  TrainingSection training;

  EnsembleConfig ensemble() const {
    EnsembleConfig ec;
    ec.scene = scene;
    ec.input_sites = input_sites;
    ec.target_site = target_site;
    ec.codebook_oversampling = codebook_oversampling;
    ec.fixed_environment = fixed_environment;
    return ec;
  }
};

namespace detail {

/// Typed field access over one block; records every problem and every key it
/// touched so leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const TextNode& node, std::string section, std::vector<std::string>& issues)
      : node_(node), section_(std::move(section)), issues_(issues) {}

  bool has(const std::string& key) const { return node_.has(key); }

  std::string word(const std::string& key, const std::string& def) {
    const std::string* raw = take(key);
    if (raw == nullptr) return def;
    if (raw->empty() || raw->find_first_of(" \t") != std::string::npos) {
      complain(key, "expected a single word");
      return def;
    }
    return *raw;
  }

  std::string word_required(const std::string& key) {
    if (!node_.has(key)) {
      issues_.push_back("missing required key '" + key + "' in section '" + section_ + "'");
      return {};
    }
    return word(key, {});
  }

  double real(const std::string& key, double def) {
    const std::string* raw = take(key);
    if (raw == nullptr) return def;
    try {
      return parse_double(*raw);
    } catch (const IoError& e) {
      complain(key, e.what());
      return def;
    }
  }

  long long integer(const std::string& key, long long def) {
    const std::string* raw = take(key);
    if (raw == nullptr) return def;
    try {
      return parse_int(*raw);
    } catch (const IoError& e) {
      complain(key, e.what());
      return def;
    }
  }

  long long integer_required(const std::string& key) {
    if (!node_.has(key)) {
      issues_.push_back("missing required key '" + key + "' in section '" + section_ + "'");
      return 0;
    }
    return integer(key, 0);
  }

  std::uint64_t u64_required(const std::string& key) {
    if (!node_.has(key)) {
      issues_.push_back("missing required key '" + key + "' in section '" + section_ + "'");
      return 0;
    }
    const std::string* raw = take(key);
    try {
      return parse_u64(*raw);
    } catch (const IoError& e) {
      complain(key, e.what());
      return 0;
    }
  }

  double real_required(const std::string& key) {
    if (!node_.has(key)) {
      issues_.push_back("missing required key '" + key + "' in section '" + section_ + "'");
      return 0.0;
    }
    return real(key, 0.0);
  }

  bool boolean(const std::string& key, bool def) {
    const std::string* raw = take(key);
    if (raw == nullptr) return def;
    try {
      return parse_bool(*raw);
    } catch (const IoError& e) {
      complain(key, e.what());
      return def;
    }
  }

  std::vector<int> int_list(const std::string& key, std::vector<int> def) {
    const std::string* raw = take(key);
    if (raw == nullptr) return def;
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < raw->size()) {
      const std::size_t sp = raw->find_first_of(" \t", pos);
      const std::string tok = raw->substr(pos, sp == std::string::npos ? raw->size() - pos : sp - pos);
      pos = sp == std::string::npos ? raw->size() : raw->find_first_not_of(" \t", sp);
      if (tok.empty()) continue;
      try {
        out.push_back(static_cast<int>(parse_int(tok)));
      } catch (const IoError& e) {
        complain(key, e.what());
        return def;
      }
    }
    if (out.empty()) {
      complain(key, "empty list");
      return def;
    }
    return out;
  }

  std::vector<std::string> word_list(const std::string& key, std::vector<std::string> def) {
    const std::string* raw = take(key);
    if (raw == nullptr) return def;
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < raw->size()) {
      const std::size_t sp = raw->find_first_of(" \t", pos);
      out.push_back(raw->substr(pos, sp == std::string::npos ? raw->size() - pos : sp - pos));
      pos = sp == std::string::npos ? raw->size() : raw->find_first_not_of(" \t", sp);
    }
    if (out.empty()) {
      complain(key, "empty list");
      return def;
    }
    return out;
  }

  const TextNode* sub(const std::string& key) {
    known_.insert(key);
    for (const auto& e : node_.entries)
      if (e.key == key) {
        if (!e.is_block) {
          complain(key, "expected a block");
          return nullptr;
        }
        return &e.child;
      }
    return nullptr;
  }

  std::vector<const TextNode*> subs(const std::string& key) {
    known_.insert(key);
    return node_.blocks(key);
  }

  /// Flags every key this reader never asked about.
  void finish() {
    for (const auto& e : node_.entries)
      if (!known_.count(e.key))
        issues_.push_back("unknown key '" + e.key + "' in section '" + section_ + "'");
  }

  void complain(const std::string& key, const std::string& what) {
    issues_.push_back("key '" + key + "' in section '" + section_ + "': " + what);
  }

 private:
  const std::string* take(const std::string& key) {
    known_.insert(key);
    for (const auto& e : node_.entries)
      if (e.key == key) {
        if (e.is_block) {
          complain(key, "expected a value, found a block");
          return nullptr;
        }
        return &e.value;
      }
    return nullptr;
  }

  const TextNode& node_;
  std::string section_;
  std::vector<std::string>& issues_;
  std::set<std::string> known_;
};

inline RegionRect read_region(SectionReader& parent, const std::string& key, RegionRect def,
                              std::vector<std::string>& issues) {
  const TextNode* node = parent.sub(key);
  if (node == nullptr) return def;
  SectionReader r(*node, key, issues);
  RegionRect out;
  out.x0 = r.real("x0", def.x0);
  out.y0 = r.real("y0", def.y0);
  out.x1 = r.real("x1", def.x1);
  out.y1 = r.real("y1", def.y1);
  r.finish();
  if (!out.well_formed()) issues.push_back("section '" + key + "': x1 < x0 or y1 < y0");
  return out;
}

inline SceneConfig read_scene(const TextNode& node, std::vector<std::string>& issues) {
  SceneConfig def = default_scene_config();
  SceneConfig sc = def;
  SectionReader r(node, "scene", issues);
  if (!r.subs("site").empty()) sc.sites.clear();
  for (const TextNode* sn : node.blocks("site")) {
    SectionReader sr(*sn, "site", issues);
    Site s;
    s.id = sr.word_required("id");
    s.position = Vec2{sr.real("x", 0.0), sr.real("y", 0.0)};
    s.array.num_elements = static_cast<int>(sr.integer_required("elements"));
    s.array.spacing = sr.real("spacing", 0.5);
    s.array.orientation = sr.real("orientation", 0.0);
    s.carrier_wavelength = sr.real("wavelength", 0.1);
    sr.finish();
    sc.sites.push_back(s);
  }
  sc.num_users = static_cast<int>(r.integer("num_users", sc.num_users));
  sc.user_region = read_region(r, "user_region", sc.user_region, issues);
  sc.num_scatterers = static_cast<int>(r.integer("num_scatterers", sc.num_scatterers));
  const std::string placement =
      r.word("scatterer_placement",
             sc.scatterer_placement == ScattererPlacement::kRegion ? "region" : "around-users");
  if (placement == "region") sc.scatterer_placement = ScattererPlacement::kRegion;
  else if (placement == "around-users") sc.scatterer_placement = ScattererPlacement::kAroundUsers;
  else r.complain("scatterer_placement", "expected 'region' or 'around-users'");
  sc.scatterer_region = read_region(r, "scatterer_region", sc.scatterer_region, issues);
  sc.scatterer_radius = r.real("scatterer_radius", sc.scatterer_radius);
  sc.reflectivity_min = r.real("reflectivity_min", sc.reflectivity_min);
  sc.reflectivity_max = r.real("reflectivity_max", sc.reflectivity_max);
  sc.speed_min = r.real("speed_min", sc.speed_min);
  sc.speed_max = r.real("speed_max", sc.speed_max);
  sc.heading_fixed = r.boolean("heading_fixed", sc.heading_fixed);
  sc.heading = r.real("heading", sc.heading);
  sc.pathloss_exponent = r.real("pathloss_exponent", sc.pathloss_exponent);
  sc.los_default = r.boolean("los_default", sc.los_default);
  sc.noise_floor = r.real("noise_floor", sc.noise_floor);
  sc.subcarrier_spacing = r.real("subcarrier_spacing", sc.subcarrier_spacing);
  r.finish();

  if (sc.sites.empty()) issues.push_back("section 'scene': no sites");
  if (sc.num_users < 1) issues.push_back("section 'scene': num_users < 1");
  if (sc.num_scatterers < 0) issues.push_back("section 'scene': num_scatterers < 0");
  if (sc.reflectivity_min < 0.0 || sc.reflectivity_max > 1.0 ||
      sc.reflectivity_min > sc.reflectivity_max)
    issues.push_back("section 'scene': reflectivity range outside [0, 1]");
  if (sc.speed_min < 0.0 || sc.speed_min > sc.speed_max)
    issues.push_back("section 'scene': bad speed range");
  if (sc.pathloss_exponent <= 0.0) issues.push_back("section 'scene': pathloss_exponent <= 0");
  for (const auto& s : sc.sites) {
    if (s.array.num_elements < 1)
      issues.push_back("site '" + s.id + "': elements < 1");
    if (s.array.spacing <= 0.0) issues.push_back("site '" + s.id + "': spacing <= 0");
    if (s.carrier_wavelength <= 0.0) issues.push_back("site '" + s.id + "': wavelength <= 0");
  }
  return sc;
}

inline void read_training(const TextNode* node, TrainingSection& ts,
                          std::vector<std::string>& issues) {
  if (node == nullptr) return;
  SectionReader r(*node, "training", issues);
  ts.train.learning_rate = r.real("learning_rate", ts.train.learning_rate);
  ts.train.batch_size = static_cast<int>(r.integer("batch_size", ts.train.batch_size));
  ts.train.epochs = static_cast<int>(r.integer("epochs", ts.train.epochs));
  ts.train.patience = static_cast<int>(r.integer("patience", ts.train.patience));
  const std::string opt =
      r.word("optimizer", ts.train.optimizer == Optimizer::kAdam ? "adam" : "sgd");
  if (opt == "adam") ts.train.optimizer = Optimizer::kAdam;
  else if (opt == "sgd") ts.train.optimizer = Optimizer::kSgd;
  else r.complain("optimizer", "expected 'adam' or 'sgd'");
  ts.val_fraction = r.real("val_fraction", ts.val_fraction);
  r.finish();
  if (!(ts.train.learning_rate > 0.0))
    issues.push_back("section 'training': learning_rate must be > 0");
  if (ts.train.batch_size < 1) issues.push_back("section 'training': batch_size < 1");
  if (ts.train.epochs < 0) issues.push_back("section 'training': epochs < 0");
  if (ts.train.patience < 0) issues.push_back("section 'training': patience < 0");
  if (ts.val_fraction < 0.0 || ts.val_fraction >= 1.0)
    issues.push_back("section 'training': val_fraction outside [0, 1)");
}

}  // namespace detail

/// Parses and validates a config document, reporting every issue found.
inline ExperimentConfig parse_config_text(const std::string& text) {
  TextNode root;
  try {
    root = parse_text(text);
  } catch (const IoError& e) {
    throw ConfigError(std::string(e.what()));
  }

  std::vector<std::string> issues;
  detail::SectionReader top(root, "top level", issues);
  ExperimentConfig cfg;

  const std::string kind = top.word_required("kind");
  if (!kind.empty()) {
    try {
      cfg.kind = experiment_kind_from_string(kind);
    } catch (const ConfigError& e) {
      issues.insert(issues.end(), e.issues.begin(), e.issues.end());
    }
  }
  cfg.seed = top.u64_required("seed");
  cfg.out = top.word("out", "");

  if (const TextNode* sn = top.sub("scene")) cfg.scene = detail::read_scene(*sn, issues);

  const bool needs_ensemble = cfg.kind == ExperimentKind::kStatic ||
                              cfg.kind == ExperimentKind::kSequence ||
                              cfg.kind == ExperimentKind::kGrouping;
  if (const TextNode* en = top.sub("ensemble")) {
    detail::SectionReader r(*en, "ensemble", issues);
    cfg.input_sites = r.word_list("input_sites", cfg.input_sites);
    cfg.target_site = r.word("target_site", cfg.target_site);
    cfg.codebook_oversampling = static_cast<int>(r.integer_required("codebook_oversampling"));
    cfg.fixed_environment = r.boolean("fixed_environment", cfg.fixed_environment);
    r.finish();
    if (cfg.codebook_oversampling < 1)
      issues.push_back("section 'ensemble': codebook_oversampling < 1");
  } else if (needs_ensemble) {
    issues.push_back("kind '" + to_string(cfg.kind) +
                     "' requires an 'ensemble' section (codebook_oversampling has no default)");
  }

  if (const TextNode* dn = top.sub("dependence")) {
    detail::SectionReader r(*dn, "dependence", issues);
    cfg.dependence.samples = static_cast<int>(r.integer_required("samples"));
    cfg.dependence.sample_counts = r.int_list("sample_counts", {});
    cfg.dependence.site_a = r.word("site_a", cfg.dependence.site_a);
    cfg.dependence.site_b = r.word("site_b", cfg.dependence.site_b);
    cfg.dependence.oversampling = static_cast<int>(r.integer_required("oversampling"));
    cfg.dependence.cca_ridge = r.real("cca_ridge", cfg.dependence.cca_ridge);
    r.finish();
    if (cfg.dependence.samples < 2) issues.push_back("section 'dependence': samples < 2");
    if (cfg.dependence.oversampling < 1) issues.push_back("section 'dependence': oversampling < 1");
    for (int c : cfg.dependence.sample_counts)
      if (c < 2 || c > cfg.dependence.samples)
        issues.push_back("section 'dependence': sample_counts entry outside [2, samples]");
  } else if (cfg.kind == ExperimentKind::kDependence) {
    issues.push_back("kind 'dependence' requires a 'dependence' section "
                     "(samples and oversampling have no defaults)");
  }

  if (const TextNode* sn = top.sub("static")) {
    detail::SectionReader r(*sn, "static", issues);
    cfg.static_task.train_points = static_cast<int>(r.integer("train_points", 20000));
    cfg.static_task.test_points = static_cast<int>(r.integer("test_points", 5000));
    cfg.static_task.oracle_model = r.boolean("oracle_model", false);
    r.finish();
    if (cfg.static_task.train_points < 1) issues.push_back("section 'static': train_points < 1");
    if (cfg.static_task.test_points < 1) issues.push_back("section 'static': test_points < 1");
  }

  if (const TextNode* qn = top.sub("sequence")) {
    detail::SectionReader r(*qn, "sequence", issues);
    SequenceSection& s = cfg.sequence;
    s.l_in = static_cast<int>(r.integer("l_in", s.l_in));
    s.l_out = static_cast<int>(r.integer("l_out", s.l_out));
    s.delay_min = static_cast<int>(r.integer("delay_min", s.delay_min));
    s.delay_max = static_cast<int>(r.integer("delay_max", s.delay_max));
    s.train_trajectories = static_cast<int>(r.integer("train_trajectories", s.train_trajectories));
    s.test_trajectories = static_cast<int>(r.integer("test_trajectories", s.test_trajectories));
    s.windows = static_cast<int>(r.integer("windows", s.windows));
    s.hidden = static_cast<int>(r.integer("hidden", s.hidden));
    s.lo_noise_std = r.real("lo_noise_std", s.lo_noise_std);
    s.static_train_points = static_cast<int>(r.integer("static_train_points", s.static_train_points));
    r.finish();
    if (s.l_in < 1 || s.l_out < 1) issues.push_back("section 'sequence': l_in and l_out must be >= 1");
    if (s.delay_min < 0 || s.delay_max < s.delay_min)
      issues.push_back("section 'sequence': bad delay range");
    if (s.train_trajectories < 1 || s.test_trajectories < 1 || s.windows < 1)
      issues.push_back("section 'sequence': trajectory and window counts must be >= 1");
    if (s.hidden < 1) issues.push_back("section 'sequence': hidden < 1");
    if (s.lo_noise_std < 0.0) issues.push_back("section 'sequence': lo_noise_std < 0");
    if (s.static_train_points < 1) issues.push_back("section 'sequence': static_train_points < 1");
  }

  if (const TextNode* gn = top.sub("grouping")) {
    detail::SectionReader r(*gn, "grouping", issues);
    GroupingSection& g = cfg.grouping;
    g.user_counts = r.int_list("user_counts", g.user_counts);
    g.scenes_per_count = static_cast<int>(r.integer("scenes_per_count", g.scenes_per_count));
    g.snapshots = static_cast<int>(r.integer("snapshots", g.snapshots));
    g.serving_grid = static_cast<int>(r.integer("serving_grid", g.serving_grid));
    g.feature_grid = static_cast<int>(r.integer("feature_grid", g.feature_grid));
    g.snr_db = r.real("snr_db", g.snr_db);
    g.sinr_min = r.real_required("sinr_min");
    g.tau = r.real("tau", g.tau);
    g.aps_train_points = static_cast<int>(r.integer("aps_train_points", g.aps_train_points));
    r.finish();
    for (int u : g.user_counts)
      if (u < 1) issues.push_back("section 'grouping': user count < 1");
    if (g.scenes_per_count < 1) issues.push_back("section 'grouping': scenes_per_count < 1");
    if (g.snapshots < 1) issues.push_back("section 'grouping': snapshots < 1");
    if (g.sinr_min < 0.0) issues.push_back("section 'grouping': sinr_min < 0");
    if (!(g.tau >= 0.0 && g.tau <= 1.0)) issues.push_back("section 'grouping': tau outside [0, 1]");
    if (g.aps_train_points < 1) issues.push_back("section 'grouping': aps_train_points < 1");
  } else if (cfg.kind == ExperimentKind::kGrouping) {
    issues.push_back("kind 'grouping' requires a 'grouping' section (sinr_min has no default)");
  }

  if (const TextNode* an = top.sub("scaling")) {
    detail::SectionReader r(*an, "scaling", issues);
    cfg.scaling.m_values = r.int_list("m_values", cfg.scaling.m_values);
    cfg.scaling.trials = r.integer("trials", cfg.scaling.trials);
    cfg.scaling.snr_db = r.real("snr_db", cfg.scaling.snr_db);
    r.finish();
    for (int m : cfg.scaling.m_values)
      if (m < 2) issues.push_back("section 'scaling': m_values entry < 2");
    if (cfg.scaling.trials < 1) issues.push_back("section 'scaling': trials < 1");
  }

  if (const TextNode* mn = top.sub("model")) {
    detail::SectionReader r(*mn, "model", issues);
    cfg.model.hidden = r.int_list("hidden", cfg.model.hidden);
    r.finish();
    for (int h : cfg.model.hidden)
      if (h < 1) issues.push_back("section 'model': hidden width < 1");
  }

  detail::read_training(top.sub("training"), cfg.training, issues);
  top.finish();

  if (needs_ensemble && issues.empty()) {
    try {
      detail::check_ensemble(cfg.ensemble());
    } catch (const ConfigError& e) {
      issues.insert(issues.end(), e.issues.begin(), e.issues.end());
    }
  }
  if (cfg.kind == ExperimentKind::kDependence && issues.empty()) {
    bool a = false, b = false;
    for (const auto& s : cfg.scene.sites) {
      a = a || s.id == cfg.dependence.site_a;
      b = b || s.id == cfg.dependence.site_b;
    }
    if (!a) issues.push_back("section 'dependence': site_a not found in scene");
    if (!b) issues.push_back("section 'dependence': site_b not found in scene");
  }
  if (cfg.kind == ExperimentKind::kGrouping && issues.empty()) {
    for (const auto& s : cfg.scene.sites) {
      if (s.id == cfg.input_sites.front() && cfg.grouping.feature_grid < s.array.num_elements)
        issues.push_back("section 'grouping': feature_grid smaller than the " +
                         std::to_string(s.array.num_elements) + "-element input array");
      if (s.id == cfg.target_site && cfg.grouping.serving_grid < s.array.num_elements)
        issues.push_back("section 'grouping': serving_grid smaller than the " +
                         std::to_string(s.array.num_elements) + "-element target array");
    }
  }

  if (!issues.empty()) throw ConfigError(issues);
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string(e.what()));
  }
  return parse_config_text(text);
}

/// Canonical serialization: every field explicit, fixed order.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  TextNode root;
  root.add("kind", to_string(cfg.kind));
  root.add("seed", cfg.seed);
  if (!cfg.out.empty()) root.add("out", cfg.out);

  TextNode& sn = root.add_block("scene");
  for (const Site& s : cfg.scene.sites) {
    TextNode& n = sn.add_block("site");
    n.add("id", s.id);
    n.add("x", s.position.x());
    n.add("y", s.position.y());
    n.add("elements", s.array.num_elements);
    n.add("spacing", s.array.spacing);
    n.add("orientation", s.array.orientation);
    n.add("wavelength", s.carrier_wavelength);
  }
  sn.add("num_users", cfg.scene.num_users);
  TextNode& ur = sn.add_block("user_region");
  ur.add("x0", cfg.scene.user_region.x0);
  ur.add("y0", cfg.scene.user_region.y0);
  ur.add("x1", cfg.scene.user_region.x1);
  ur.add("y1", cfg.scene.user_region.y1);
  sn.add("num_scatterers", cfg.scene.num_scatterers);
  sn.add("scatterer_placement",
         std::string(cfg.scene.scatterer_placement == ScattererPlacement::kRegion
                         ? "region"
                         : "around-users"));
  TextNode& sr = sn.add_block("scatterer_region");
  sr.add("x0", cfg.scene.scatterer_region.x0);
  sr.add("y0", cfg.scene.scatterer_region.y0);
  sr.add("x1", cfg.scene.scatterer_region.x1);
  sr.add("y1", cfg.scene.scatterer_region.y1);
  sn.add("scatterer_radius", cfg.scene.scatterer_radius);
  sn.add("reflectivity_min", cfg.scene.reflectivity_min);
  sn.add("reflectivity_max", cfg.scene.reflectivity_max);
  sn.add("speed_min", cfg.scene.speed_min);
  sn.add("speed_max", cfg.scene.speed_max);
  sn.add("heading_fixed", cfg.scene.heading_fixed);
  sn.add("heading", cfg.scene.heading);
  sn.add("pathloss_exponent", cfg.scene.pathloss_exponent);
  sn.add("los_default", cfg.scene.los_default);
  sn.add("noise_floor", cfg.scene.noise_floor);
  sn.add("subcarrier_spacing", cfg.scene.subcarrier_spacing);

  TextNode& en = root.add_block("ensemble");
  std::string sites;
  for (const auto& s : cfg.input_sites) sites += (sites.empty() ? "" : " ") + s;
  en.add("input_sites", sites);
  en.add("target_site", cfg.target_site);
  en.add("codebook_oversampling", cfg.codebook_oversampling);
  en.add("fixed_environment", cfg.fixed_environment);

  TextNode& dn = root.add_block("dependence");
  dn.add("samples", cfg.dependence.samples);
  if (!cfg.dependence.sample_counts.empty()) {
    std::string counts;
    for (int c : cfg.dependence.sample_counts)
      counts += (counts.empty() ? "" : " ") + std::to_string(c);
    dn.add("sample_counts", counts);
  }
  dn.add("site_a", cfg.dependence.site_a);
  dn.add("site_b", cfg.dependence.site_b);
  dn.add("oversampling", cfg.dependence.oversampling);
  dn.add("cca_ridge", cfg.dependence.cca_ridge);

  TextNode& st = root.add_block("static");
  st.add("train_points", cfg.static_task.train_points);
  st.add("test_points", cfg.static_task.test_points);
  st.add("oracle_model", cfg.static_task.oracle_model);

  TextNode& qn = root.add_block("sequence");
  qn.add("l_in", cfg.sequence.l_in);
  qn.add("l_out", cfg.sequence.l_out);
  qn.add("delay_min", cfg.sequence.delay_min);
  qn.add("delay_max", cfg.sequence.delay_max);
  qn.add("train_trajectories", cfg.sequence.train_trajectories);
  qn.add("test_trajectories", cfg.sequence.test_trajectories);
  qn.add("windows", cfg.sequence.windows);
  qn.add("hidden", cfg.sequence.hidden);
  qn.add("lo_noise_std", cfg.sequence.lo_noise_std);
  qn.add("static_train_points", cfg.sequence.static_train_points);

  TextNode& gn = root.add_block("grouping");
  std::string counts;
  for (int c : cfg.grouping.user_counts) counts += (counts.empty() ? "" : " ") + std::to_string(c);
  gn.add("user_counts", counts);
  gn.add("scenes_per_count", cfg.grouping.scenes_per_count);
  gn.add("snapshots", cfg.grouping.snapshots);
  gn.add("serving_grid", cfg.grouping.serving_grid);
  gn.add("feature_grid", cfg.grouping.feature_grid);
  gn.add("snr_db", cfg.grouping.snr_db);
  gn.add("sinr_min", cfg.grouping.sinr_min);
  gn.add("tau", cfg.grouping.tau);
  gn.add("aps_train_points", cfg.grouping.aps_train_points);

  TextNode& an = root.add_block("scaling");
  std::string ms;
  for (int m : cfg.scaling.m_values) ms += (ms.empty() ? "" : " ") + std::to_string(m);
  an.add("m_values", ms);
  an.add("trials", cfg.scaling.trials);
  an.add("snr_db", cfg.scaling.snr_db);

  TextNode& mn = root.add_block("model");
  std::string hidden;
  for (int h : cfg.model.hidden) hidden += (hidden.empty() ? "" : " ") + std::to_string(h);
  mn.add("hidden", hidden);

  TextNode& tn = root.add_block("training");
  tn.add("learning_rate", cfg.training.train.learning_rate);
  tn.add("batch_size", cfg.training.train.batch_size);
  tn.add("epochs", cfg.training.train.epochs);
  tn.add("patience", cfg.training.train.patience);
  tn.add("optimizer",
         std::string(cfg.training.train.optimizer == Optimizer::kAdam ? "adam" : "sgd"));
  tn.add("val_fraction", cfg.training.val_fraction);

  return serialize_text(root);
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a(serialize_config(cfg));
}

}  // namespace csilab
