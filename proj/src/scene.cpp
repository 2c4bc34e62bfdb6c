#include "sweep/scene.hpp"

#include "sweep/bspline.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sweep {

using json = nlohmann::json;
using ParamMap = std::map<std::string, std::vector<double>>;

namespace {

ParamMap solid_defaults(const std::string& type) {
  if (type == "sphere") return {{"center", {0, 0, 0}}, {"radius", {1}}, {"pole_axis", {0, 0, 1}}};
  if (type == "ellipsoid") return {{"center", {0, 0, 0}}, {"axes", {2, 1, 1}}, {"pole_axis", {0, 0, 1}}};
  if (type == "capsule") return {{"radius", {1}}, {"half_height", {0.5}}};
  if (type == "dumbbell") return {{"a", {1}}, {"c", {0.8}}};
  if (type == "spline") return {};
  throw SweepError(ErrorKind::Config, "unknown solid type '" + type + "'");
}

Vec3 v3(const ParamMap& p, const std::string& k) {
  const auto& v = p.at(k);
  if (v.size() != 3) throw SweepError(ErrorKind::Config, "solid parameter '" + k + "' needs 3 values");
  return {v[0], v[1], v[2]};
}

double s1(const ParamMap& p, const std::string& k) {
  const auto& v = p.at(k);
  if (v.size() != 1) throw SweepError(ErrorKind::Config, "solid parameter '" + k + "' needs 1 value");
  return v[0];
}

}  // namespace

ParamMap SolidSpec::resolved() const {
  ParamMap out = solid_defaults(type);
  for (const auto& [k, v] : params) {
    if (!out.count(k)) throw SweepError(ErrorKind::Config, "unknown parameter '" + k + "' for solid " + type);
    out[k] = v;
  }
  return out;
}

Solid SolidSpec::build() const {
  const ParamMap p = resolved();
  if (type == "sphere") return solids::sphere(v3(p, "center"), s1(p, "radius"), v3(p, "pole_axis"));
  if (type == "ellipsoid") return solids::ellipsoid(v3(p, "center"), v3(p, "axes"), v3(p, "pole_axis"));
  if (type == "capsule") return solids::capsule(s1(p, "radius"), s1(p, "half_height"));
  if (type == "dumbbell") return solids::dumbbell(s1(p, "a"), s1(p, "c"));
  // Spline faces carry no closed-form membership.
  if (spline_files.empty()) throw SweepError(ErrorKind::Config, "spline solid needs at least one face file");
  Solid s;
  s.name = "spline";
  for (const auto& f : spline_files) {
    auto surf = BSplineSurface::load(f);
    s.faces.push_back({f, surf, surf->domain()});
  }
  return s;
}

Tolerances Tolerances::scaled(double s) const {
  Tolerances t = *this;
  t.funnel *= s;
  t.coincidence *= s;
  t.procedural *= s;
  t.membership *= s;
  return t;
}

SweptScene SceneConfig::build() const { return SweptScene(solid.build(), motion.build(), faces); }

// ---------------------------------------------------------------------------
// Parsing

namespace {

int line_at(const std::string& text, std::size_t pos) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + std::min(pos, text.size()), '\n'));
}

// Line of the first `"key"` at or after `from`, or of `from` itself.
int line_of_key(const std::string& text, const std::string& key, std::size_t from = 0) {
  const auto pos = text.find('"' + key + '"', from);
  return line_at(text, pos == std::string::npos ? from : pos);
}

struct Parser {
  const std::string& text;
  const std::string& source;

  [[noreturn]] void fail(const std::string& key, const std::string& msg, std::size_t from = 0) const {
    std::ostringstream os;
    os << source << ":" << line_of_key(text, key, from) << ": " << msg;
    throw SweepError(ErrorKind::Config, os.str());
  }

  std::size_t pos_of(const std::string& key, std::size_t from = 0) const {
    const auto p = text.find('"' + key + '"', from);
    return p == std::string::npos ? from : p;
  }

  std::vector<double> numbers(const json& v, const std::string& key, std::size_t from) const {
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) {
      std::vector<double> out;
      for (const auto& x : v) {
        if (!x.is_number()) fail(key, "'" + key + "' must hold numbers", from);
        out.push_back(x.get<double>());
      }
      return out;
    }
    fail(key, "'" + key + "' must be a number or an array of numbers", from);
  }

  int integer(const json& v, const std::string& key, std::size_t from, int lo) const {
    if (!v.is_number_integer()) fail(key, "'" + key + "' must be an integer", from);
    const int x = v.get<int>();
    if (x < lo) fail(key, "'" + key + "' must be at least " + std::to_string(lo), from);
    return x;
  }

  double positive(const json& v, const std::string& key, std::size_t from) const {
    if (!v.is_number() || !(v.get<double>() > 0)) fail(key, "'" + key + "' must be a positive number", from);
    return v.get<double>();
  }
};

}  // namespace

SceneConfig parse_scene_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << line_at(text, e.byte > 0 ? e.byte - 1 : 0) << ": malformed JSON (" << e.what() << ")";
    throw SweepError(ErrorKind::Config, os.str());
  }
  Parser P{text, source};
  if (!doc.is_object()) P.fail("", "top level must be an object");
  SceneConfig cfg;
  static const std::set<std::string> top = {"name", "solid", "motion", "faces", "sampling", "tolerances", "threads"};
  for (const auto& [k, v] : doc.items()) {
    if (!top.count(k)) P.fail(k, "unknown key '" + k + "'");
  }
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) P.fail("name", "'name' must be a string");
    cfg.name = doc["name"].get<std::string>();
  }
  if (!doc.contains("solid")) P.fail("", "missing 'solid'");
  if (!doc.contains("motion")) P.fail("", "missing 'motion'");

  const std::size_t solid_pos = P.pos_of("solid");
  const json& js = doc["solid"];
  if (!js.is_object()) P.fail("solid", "'solid' must be an object");
  if (!js.contains("type") || !js["type"].is_string()) P.fail("solid", "'solid.type' must be a string");
  cfg.solid.type = js["type"].get<std::string>();
  try {
    solid_defaults(cfg.solid.type);
  } catch (const SweepError& e) {
    P.fail("type", e.what(), solid_pos);
  }
  for (const auto& [k, v] : js.items()) {
    if (k == "type") continue;
    if (k == "files" && cfg.solid.type == "spline") {
      if (!v.is_array()) P.fail(k, "'files' must be an array of paths", solid_pos);
      for (const auto& f : v) {
        if (!f.is_string()) P.fail(k, "'files' must be an array of paths", solid_pos);
        cfg.solid.spline_files.push_back(f.get<std::string>());
      }
      continue;
    }
    cfg.solid.params[k] = P.numbers(v, k, solid_pos);
  }
  try {
    (void)cfg.solid.resolved();
  } catch (const SweepError& e) {
    P.fail("solid", e.what());
  }

  const std::size_t motion_pos = P.pos_of("motion");
  const json& jm = doc["motion"];
  if (!jm.is_object()) P.fail("motion", "'motion' must be an object");
  if (!jm.contains("family") || !jm["family"].is_string()) P.fail("motion", "'motion.family' must be a string");
  try {
    cfg.motion.kind = motion_kind_from_string(jm["family"].get<std::string>());
    if (jm.contains("base")) {
      if (!jm["base"].is_string()) P.fail("base", "'base' must be a string", motion_pos);
      cfg.motion.base = motion_kind_from_string(jm["base"].get<std::string>());
    }
  } catch (const SweepError& e) {
    P.fail("family", e.what(), motion_pos);
  }
  for (const auto& [k, v] : jm.items()) {
    if (k == "family" || k == "base") continue;
    if (k == "interval") {
      const auto iv = P.numbers(v, k, motion_pos);
      if (iv.size() != 2 || !(iv[0] < iv[1])) P.fail(k, "'interval' must be [t0, t1] with t0 < t1", motion_pos);
      cfg.motion.interval = {iv[0], iv[1]};
      continue;
    }
    cfg.motion.params[k] = P.numbers(v, k, motion_pos);
  }
  try {
    (void)cfg.motion.resolved();
  } catch (const SweepError& e) {
    P.fail("motion", e.what());
  }

  if (doc.contains("faces")) {
    if (!doc["faces"].is_array()) P.fail("faces", "'faces' must be an array of face indices");
    for (const auto& f : doc["faces"]) cfg.faces.push_back(static_cast<std::size_t>(P.integer(f, "faces", 0, 0)));
  }
  if (doc.contains("sampling")) {
    const std::size_t at = P.pos_of("sampling");
    const json& s = doc["sampling"];
    if (!s.is_object()) P.fail("sampling", "'sampling' must be an object");
    for (const auto& [k, v] : s.items()) {
      if (k == "n_t") cfg.sampling.n_t = P.integer(v, k, at, 2);
      else if (k == "n_p") cfg.sampling.n_p = P.integer(v, k, at, 8);
      else if (k == "resolution") cfg.sampling.resolution = P.integer(v, k, at, 16);
      else if (k == "oracle_nt") cfg.sampling.oracle_nt = P.integer(v, k, at, 1);
      else if (k == "time_samples") cfg.sampling.time_samples = P.integer(v, k, at, 16);
      else if (k == "seed_degree") cfg.sampling.seed_degree = P.integer(v, k, at, 1);
      else if (k == "procedural_grid") cfg.sampling.procedural_grid = P.integer(v, k, at, 2);
      else P.fail(k, "unknown sampling key '" + k + "'", at);
    }
  }
  if (doc.contains("tolerances")) {
    const std::size_t at = P.pos_of("tolerances");
    const json& s = doc["tolerances"];
    if (!s.is_object()) P.fail("tolerances", "'tolerances' must be an object");
    for (const auto& [k, v] : s.items()) {
      if (k == "funnel") cfg.tol.funnel = P.positive(v, k, at);
      else if (k == "classify_eps") cfg.tol.classify_eps = P.positive(v, k, at);
      else if (k == "coincidence") cfg.tol.coincidence = P.positive(v, k, at);
      else if (k == "procedural") cfg.tol.procedural = P.positive(v, k, at);
      else if (k == "membership") cfg.tol.membership = P.positive(v, k, at);
      else if (k == "boundary_margin") cfg.tol.boundary_margin = P.positive(v, k, at);
      else P.fail(k, "unknown tolerance key '" + k + "'", at);
    }
  }
  if (doc.contains("threads")) cfg.threads = P.integer(doc["threads"], "threads", 0, 1);
  return cfg;
}

SceneConfig load_scene_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SweepError(ErrorKind::Config, path + ":1: cannot open file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scene_config(ss.str(), path);
}

nlohmann::ordered_json to_json(const SceneConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  nlohmann::ordered_json s;
  s["type"] = cfg.solid.type;
  for (const auto& [k, v] : cfg.solid.resolved()) s[k] = v;
  if (!cfg.solid.spline_files.empty()) s["files"] = cfg.solid.spline_files;
  j["solid"] = s;
  nlohmann::ordered_json m;
  m["family"] = to_string(cfg.motion.kind);
  if (cfg.motion.kind == MotionKind::ComposedRotation) m["base"] = to_string(cfg.motion.base);
  m["interval"] = {cfg.motion.interval.lo, cfg.motion.interval.hi};
  for (const auto& [k, v] : cfg.motion.resolved()) m[k] = v;
  j["motion"] = m;
  j["faces"] = cfg.faces;
  j["sampling"] = {{"n_t", cfg.sampling.n_t},
                   {"n_p", cfg.sampling.n_p},
                   {"resolution", cfg.sampling.resolution},
                   {"oracle_nt", cfg.sampling.oracle_nt},
                   {"time_samples", cfg.sampling.time_samples},
                   {"seed_degree", cfg.sampling.seed_degree},
                   {"procedural_grid", cfg.sampling.procedural_grid}};
  j["tolerances"] = {{"funnel", cfg.tol.funnel},
                     {"classify_eps", cfg.tol.classify_eps},
                     {"coincidence", cfg.tol.coincidence},
                     {"procedural", cfg.tol.procedural},
                     {"membership", cfg.tol.membership},
                     {"boundary_margin", cfg.tol.boundary_margin}};
  j["threads"] = cfg.threads;
  return j;
}

// ---------------------------------------------------------------------------
// Bundled scenes

const std::vector<std::string>& golden_scene_names() {
  static const std::vector<std::string> names = {"sphere_translate", "sphere_circle", "sphere_parabola", "ellipsoid_arc",
                                                 "capsule_helix",    "dumbbell_spin", "screw_demo"};
  return names;
}

SceneConfig golden_scene(const std::string& name) {
  SceneConfig c;
  c.name = name;
  if (name == "sphere_translate") {
    // Chart poles on the motion axis keep the contact circle on the chart equator.
    c.solid.type = "sphere";
    c.solid.params["pole_axis"] = {1, 0, 0};
    c.motion.kind = MotionKind::TranslationLine;
    c.motion.interval = {0, 1};
    c.motion.params["velocity"] = {1, 0, 0};
  } else if (name == "sphere_circle") {
    c.solid.type = "sphere";
    c.motion.kind = MotionKind::TranslationCircle;
    c.motion.interval = {0, 1};
    c.motion.params["radius"] = {0.5};
    c.motion.params["rate"] = {2};
  } else if (name == "sphere_parabola") {
    c.solid.type = "sphere";
    c.solid.params["pole_axis"] = {1, 0, 0};
    // Path (x, 2x², 0) for x in [-1, 1], traversed at half speed.
    c.motion.kind = MotionKind::TranslationParabola;
    c.motion.interval = {-2, 2};
    c.motion.params["speed"] = {0.5};
    c.motion.params["bend"] = {0.5};
  } else if (name == "ellipsoid_arc") {
    c.solid.type = "ellipsoid";
    c.solid.params["axes"] = {2, 1, 1};
    c.solid.params["pole_axis"] = {1, 0, 0};
    c.motion.kind = MotionKind::TranslationCircle;
    c.motion.interval = {-1, 1};
    c.motion.params["radius"] = {2};
    c.motion.params["rate"] = {1};
    c.motion.params["phase"] = {-kPi / 2};
  } else if (name == "capsule_helix") {
    c.solid.type = "capsule";
    c.solid.params["radius"] = {0.5};
    c.solid.params["half_height"] = {1.0};
    c.motion.kind = MotionKind::ComposedRotation;
    c.motion.base = MotionKind::Helix;
    // One and a half turns; slow enough that the λ second difference at
    // step 1e-3 resolves θ to well under 1e-4.
    c.motion.interval = {0, 7.5};
    c.motion.params["radius"] = {1.5};
    c.motion.params["rate"] = {0.4 * kPi};
    c.motion.params["rise"] = {0.24};
    c.motion.params["rot_axis"] = {0, 1, 0};
    c.motion.params["rot_rate"] = {0.05};
  } else if (name == "dumbbell_spin") {
    c.solid.type = "dumbbell";
    c.motion.kind = MotionKind::ComposedRotation;
    c.motion.base = MotionKind::TranslationLine;
    c.motion.interval = {0, 1};
    c.motion.params["velocity"] = {0, 1, 0};
    c.motion.params["rot_axis"] = {0, 1, 0};
    c.motion.params["rot_rate"] = {1};
  } else if (name == "screw_demo") {
    c.solid.type = "capsule";
    c.solid.params["radius"] = {0.5};
    c.solid.params["half_height"] = {0.5};
    c.motion.kind = MotionKind::Screw;
    c.motion.interval = {0, 4};
    c.motion.params["axis"] = {1, 0, 0};
    c.motion.params["rate"] = {0.25 * kPi};
    c.motion.params["pitch"] = {0.25};
    c.motion.params["offset"] = {0, 2, 0};
  } else {
    throw SweepError(ErrorKind::Config, "unknown bundled scene '" + name + "'");
  }
  return c;
}

}  // namespace sweep
