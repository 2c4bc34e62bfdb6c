#pragma once

#include "sweep/funnel.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace sweep {

struct SolidSpec {
  std::string type = "sphere";  // sphere | ellipsoid | capsule | dumbbell | spline
  std::map<std::string, std::vector<double>> params;
  std::vector<std::string> spline_files;

  std::map<std::string, std::vector<double>> resolved() const;
  Solid build() const;
};

struct Sampling {
  int n_t = 16;
  int n_p = 32;
  int resolution = 128;
  int oracle_nt = 64;
  int time_samples = 512;
  int seed_degree = 3;
  int procedural_grid = 50;
};

struct Tolerances {
  double funnel = 1e-9;
  double classify_eps = 1e-6;
  double coincidence = 1e-8;
  double procedural = 1e-10;
  double membership = 1e-9;
  double boundary_margin = 1e-3;

  Tolerances scaled(double s) const;
};

struct SceneConfig {
  std::string name = "scene";
  SolidSpec solid;
  MotionFamily motion;
  std::vector<std::size_t> faces;
  Sampling sampling;
  Tolerances tol;
  int threads = 1;

  SweptScene build() const;
};

// Parse a JSON scene. Malformed input and schema violations throw Config errors
// whose message starts with "<source>:<line>:".
SceneConfig parse_scene_config(const std::string& text, const std::string& source = "<config>");
SceneConfig load_scene_config(const std::string& path);

// Full config with every default written out.
nlohmann::ordered_json to_json(const SceneConfig& cfg);

const std::vector<std::string>& golden_scene_names();
SceneConfig golden_scene(const std::string& name);

}  // namespace sweep
