#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/rng.hpp"

namespace csilab {

/// Uniform linear array. `spacing` is in multiples of the owning site's
/// carrier wavelength; `orientation` is the boresight bearing in world
/// coordinates.
struct ArrayGeometry {
  int num_elements = 1;
  double spacing = 0.5;
  double orientation = 0.0;
};

struct Site {
  std::string id;
  Vec2 position = Vec2::Zero();
  ArrayGeometry array;
  double carrier_wavelength = 0.1;  // meters
};

struct Scatterer {
  Vec2 position = Vec2::Zero();
  cplx reflectivity = 1.0;  // |reflectivity| <= 1
};

struct User {
  std::string id;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();  // meters per slot
};

/// Per-link line-of-sight switch: a default plus (site, user) overrides.
struct LosPolicy {
  bool default_enabled = true;
  std::map<std::pair<std::string, std::string>, bool> overrides;

  bool enabled(const std::string& site_id, const std::string& user_id) const {
    auto it = overrides.find({site_id, user_id});
    return it == overrides.end() ? default_enabled : it->second;
  }
};

/// Complete world state. Channel generation is a pure function of a Scene and
/// the sample indices, so Scene values can be shared freely across threads.
struct Scene {
  std::vector<Site> sites;
  std::vector<Scatterer> scatterers;
  std::vector<User> users;
  double pathloss_exponent = 2.0;
  LosPolicy los_enabled;
  double noise_floor = 1e-12;      // linear power
  std::uint64_t rng_seed = 0;
  double subcarrier_spacing = 1e-4;  // fractional carrier offset per subcarrier index

  const Site& site(const std::string& id) const {
    for (const auto& s : sites)
      if (s.id == id) return s;
    throw std::invalid_argument("unknown site id: " + id);
  }
  const User& user(const std::string& id) const {
    for (const auto& u : users)
      if (u.id == id) return u;
    throw std::invalid_argument("unknown user id: " + id);
  }

  /// Checks the structural invariants; returns every violation found.
  std::vector<std::string> validate() const {
    std::vector<std::string> bad;
    std::map<std::string, int> site_ids, user_ids;
    for (const auto& s : sites) {
      if (++site_ids[s.id] > 1) bad.push_back("duplicate site id: " + s.id);
      if (s.array.num_elements < 1) bad.push_back("site " + s.id + ": num_elements < 1");
      if (s.array.spacing <= 0) bad.push_back("site " + s.id + ": spacing <= 0");
      if (s.array.orientation < -kPi || s.array.orientation >= kPi)
        bad.push_back("site " + s.id + ": orientation outside [-pi, pi)");
      if (s.carrier_wavelength <= 0) bad.push_back("site " + s.id + ": carrier_wavelength <= 0");
    }
    for (const auto& u : users)
      if (++user_ids[u.id] > 1) bad.push_back("duplicate user id: " + u.id);
    for (std::size_t i = 0; i < scatterers.size(); ++i)
      if (std::abs(scatterers[i].reflectivity) > 1.0 + 1e-12)
        bad.push_back("scatterer " + std::to_string(i) + ": |reflectivity| > 1");
    if (pathloss_exponent <= 0) bad.push_back("pathloss_exponent <= 0");
    return bad;
  }
};

/// One channel snapshot: complex vector over the site's array elements.
struct CsiSample {
  std::string site_id;
  std::string user_id;
  long slot = 0;
  int subcarrier = 0;
  VecC h;
};

/// ULA response at `angle` (world bearing). `freq_scale` is the ratio of the
/// evaluation frequency to the array's design frequency; element n carries
/// phase 2*pi*spacing*freq_scale*n*sin(angle - orientation). Only the front
/// hemisphere |angle - orientation| <= pi/2 is defined.
inline VecC steering_vector(const ArrayGeometry& arr, double angle, double freq_scale = 1.0) {
  const double rel = wrap_angle(angle - arr.orientation);
  if (std::abs(rel) > kPi / 2.0)
    throw std::domain_error("steering_vector: angle outside front hemisphere");
  const double step = 2.0 * kPi * arr.spacing * freq_scale * std::sin(rel);
  VecC a(arr.num_elements);
  for (int n = 0; n < arr.num_elements; ++n) a[n] = std::polar(1.0, step * n);
  return a;
}

/// Same response with the evaluation wavelength given in meters.
inline VecC steering_vector(const Site& site, double wavelength_m, double angle) {
  if (wavelength_m <= 0) throw std::invalid_argument("steering_vector: wavelength <= 0");
  return steering_vector(site.array, angle, site.carrier_wavelength / wavelength_m);
}

namespace detail {

inline void accumulate_path(VecC& h, const Site& site, double path_length, double angle,
                            cplx reflectivity, double pathloss_exponent, double delta) {
  if (path_length <= 0.0)
    throw DegenerateGeometryError("zero-length propagation path at site " + site.id);
  const double lambda = site.carrier_wavelength;
  const double amp = std::pow(lambda / (4.0 * kPi * path_length), pathloss_exponent / 2.0);
  const cplx gain =
      reflectivity * amp * std::polar(1.0, -2.0 * kPi * path_length * (1.0 + delta) / lambda);
  h += gain * steering_vector(site.array, angle, 1.0 + delta);
}

}  // namespace detail

/// Sums the line-of-sight path (when enabled for the link) and one
/// single-bounce path per scatterer. The user is advanced by slot * velocity,
/// so generate_channel(evolve(s, k), ..., 0, .) == generate_channel(s, ..., k, .).
inline CsiSample generate_channel(const Scene& scene, const std::string& site_id,
                                  const std::string& user_id, long slot, int subcarrier = 0) {
  if (slot < 0) throw std::invalid_argument("generate_channel: slot < 0");
  const Site& site = scene.site(site_id);
  const User& usr = scene.user(user_id);
  const Vec2 upos = usr.position + static_cast<double>(slot) * usr.velocity;
  const double delta = subcarrier * scene.subcarrier_spacing;

  VecC h = VecC::Zero(site.array.num_elements);
  if (scene.los_enabled.enabled(site_id, user_id)) {
    const double d = (upos - site.position).norm();
    detail::accumulate_path(h, site, d, bearing(site.position, upos), 1.0,
                            scene.pathloss_exponent, delta);
  }
  for (const auto& sc : scene.scatterers) {
    const double d1 = (sc.position - site.position).norm();
    const double d2 = (upos - sc.position).norm();
    if (d1 <= 0.0 || d2 <= 0.0)
      throw DegenerateGeometryError("scatterer co-located with site or user");
    detail::accumulate_path(h, site, d1 + d2, bearing(site.position, sc.position),
                            sc.reflectivity, scene.pathloss_exponent, delta);
  }
  return CsiSample{site_id, user_id, slot, subcarrier, std::move(h)};
}

/// Advances every user by velocity * dt_slots; sites and scatterers unchanged.
inline Scene evolve(Scene scene, long dt_slots) {
  if (dt_slots < 0) throw std::invalid_argument("evolve: dt_slots < 0");
  for (auto& u : scene.users) u.position += static_cast<double>(dt_slots) * u.velocity;
  return scene;
}

/// Axis-aligned sampling region. Degenerate extents are allowed (a segment or
/// a point), which is how road-like 1-D user layouts are configured.
struct RegionRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool well_formed() const { return x1 >= x0 && y1 >= y0; }
  bool contains(const Vec2& p, double tol = 1e-9) const {
    return p.x() >= x0 - tol && p.x() <= x1 + tol && p.y() >= y0 - tol && p.y() <= y1 + tol;
  }
  Vec2 sample(Rng& rng) const {
    const double x = rng.uniform(x0, x1);
    const double y = rng.uniform(y0, y1);
    return {x, y};
  }
};

enum class ScattererPlacement { kRegion, kAroundUsers };

/// Distribution parameters for sample_scene. The site layout is taken
/// verbatim; users and scatterers are drawn from the configured regions.
struct SceneConfig {
  std::vector<Site> sites;
  int num_users = 1;
  RegionRect user_region;
  int num_scatterers = 0;
  ScattererPlacement scatterer_placement = ScattererPlacement::kAroundUsers;
  RegionRect scatterer_region;
  double scatterer_radius = 50.0;  // meters, around a uniformly chosen user
  double reflectivity_min = 0.2;
  double reflectivity_max = 0.9;
  double speed_min = 0.0;  // meters per slot
  double speed_max = 0.0;
  bool heading_fixed = false;
  double heading = 0.0;
  double pathloss_exponent = 2.0;
  bool los_default = true;
  double noise_floor = 1e-12;
  double subcarrier_spacing = 1e-4;
};

/// Default two-site layout: a 100-element macro site at the origin and a
/// 20-element small site 500 m away on a separate carrier, both facing the
/// band between them.
inline SceneConfig default_scene_config() {
  SceneConfig cfg;
  cfg.sites = {
      Site{"mbs", Vec2{0.0, 0.0}, ArrayGeometry{100, 0.5, 0.0}, 0.10},
      Site{"sbs", Vec2{500.0, 0.0}, ArrayGeometry{20, 0.5, -kPi}, 0.12},
  };
  cfg.user_region = RegionRect{150.0, -100.0, 350.0, 100.0};
  return cfg;
}

/// Draws one user from the configured region and mobility ranges.
inline User sample_user(const SceneConfig& cfg, const std::string& id, Rng& rng) {
  User u;
  u.id = id;
  u.position = cfg.user_region.sample(rng);
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  const double heading = cfg.heading_fixed ? cfg.heading : rng.uniform(-kPi, kPi);
  u.velocity = speed * Vec2{std::cos(heading), std::sin(heading)};
  return u;
}

inline Scene sample_scene(const SceneConfig& cfg, std::uint64_t seed) {
  std::vector<std::string> bad;
  if (cfg.sites.empty()) bad.push_back("scene config: no sites");
  if (cfg.num_users < 0) bad.push_back("scene config: num_users < 0");
  if (cfg.num_scatterers < 0) bad.push_back("scene config: num_scatterers < 0");
  if (!cfg.user_region.well_formed()) bad.push_back("scene config: empty user_region");
  if (cfg.num_scatterers > 0 && cfg.scatterer_placement == ScattererPlacement::kRegion &&
      !cfg.scatterer_region.well_formed())
    bad.push_back("scene config: malformed scatterer_region");
  if (cfg.num_scatterers > 0 && cfg.scatterer_placement == ScattererPlacement::kAroundUsers &&
      cfg.num_users == 0)
    bad.push_back("scene config: scatterers around users but no users");
  if (cfg.reflectivity_min < 0 || cfg.reflectivity_max > 1.0 ||
      cfg.reflectivity_min > cfg.reflectivity_max)
    bad.push_back("scene config: reflectivity range outside [0, 1]");
  if (cfg.speed_min < 0 || cfg.speed_min > cfg.speed_max)
    bad.push_back("scene config: bad speed range");
  if (!bad.empty()) throw ConfigError(bad);

  Rng rng(seed);
  Scene scene;
  scene.sites = cfg.sites;
  scene.pathloss_exponent = cfg.pathloss_exponent;
  scene.los_enabled.default_enabled = cfg.los_default;
  scene.noise_floor = cfg.noise_floor;
  scene.subcarrier_spacing = cfg.subcarrier_spacing;
  scene.rng_seed = seed;

  for (int i = 0; i < cfg.num_users; ++i)
    scene.users.push_back(sample_user(cfg, "u" + std::to_string(i), rng));
  for (int i = 0; i < cfg.num_scatterers; ++i) {
    Scatterer sc;
    if (cfg.scatterer_placement == ScattererPlacement::kRegion) {
      sc.position = cfg.scatterer_region.sample(rng);
    } else {
      const auto& anchor = scene.users[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<long long>(scene.users.size()) - 1))];
      const double r = cfg.scatterer_radius * std::sqrt(rng.uniform());
      const double phi = rng.uniform(-kPi, kPi);
      sc.position = anchor.position + r * Vec2{std::cos(phi), std::sin(phi)};
    }
    const double mag = rng.uniform(cfg.reflectivity_min, cfg.reflectivity_max);
    sc.reflectivity = std::polar(mag, rng.uniform(-kPi, kPi));
    scene.scatterers.push_back(sc);
  }

  auto invalid = scene.validate();
  if (!invalid.empty()) throw ConfigError(invalid);
  return scene;
}

}  // namespace csilab
