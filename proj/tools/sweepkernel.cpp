// sweepkernel: batch driver for the sweep envelope kernel.
//
// Exit status: 0 on success, 2 for a bad command line or config, 3 when a
// numerical stage fails.
#include "sweep/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace sweep;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Flags {
  std::string config, scene, out = "out";
  int threads = 0, resolution = 0, nt = 0, np = 0, seed_degree = 0;
  double tol_scale = 1.0;
};

void setup_logging() {
  auto log = spdlog::stderr_color_mt("sweepkernel");
  spdlog::set_default_logger(log);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SWEEPKERNEL_LOG")) {
    const std::string s = env;
    if (s == "error") spdlog::set_level(spdlog::level::err);
    else if (s == "warn") spdlog::set_level(spdlog::level::warn);
    else if (s == "info") spdlog::set_level(spdlog::level::info);
    else if (s == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("SWEEPKERNEL_LOG='{}' is not one of error, warn, info, debug", s);
  }
}

SceneConfig resolve_config(const Flags& f) {
  if (f.config.empty() == f.scene.empty())
    throw SweepError(ErrorKind::Config, "give exactly one of --config <path> or --scene <name>");
  // A --config that names no file but a bundled scene selects that scene.
  const std::string& name = f.scene.empty() && !std::filesystem::exists(f.config) ? f.config : f.scene;
  SceneConfig cfg = name.empty() ? load_scene_config(f.config) : golden_scene(name);
  if (f.threads > 0) cfg.threads = f.threads;
  if (f.resolution > 0) cfg.sampling.resolution = f.resolution;
  if (f.nt > 0) cfg.sampling.n_t = f.nt;
  if (f.np > 0) cfg.sampling.n_p = f.np;
  if (f.seed_degree > 0) cfg.sampling.seed_degree = f.seed_degree;
  if (!(f.tol_scale > 0)) throw SweepError(ErrorKind::Config, "--tol-scale must be positive");
  cfg.tol = cfg.tol.scaled(f.tol_scale);
  // Re-validate the overridden values through the schema.
  return parse_scene_config(dump_json(to_json(cfg)), "<resolved>");
}

std::string str(const auto& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

void run(const std::string& cmd, Pipeline& P, const std::string& out) {
  auto put = [&](const std::string& name, const std::string& content) {
    write_file(out, name, content);
    spdlog::info("wrote {}/{}", out, name);
  };
  write_file(out, "config.json", dump_json(to_json(P.config())));

  if (cmd == "classify") {
    put("classify.json", dump_json(P.classify_json()));
    put("funnel.csv", str([&](std::ostream& os) { write_funnel_csv(os, P.funnel(), &P.classification().theta); }));
    spdlog::info("verdict {}", to_string(P.classification().verdict));
  } else if (cmd == "envelope") {
    const TrimmedEnvelope& t = P.trimmed();
    put("envelope.obj", str([&](std::ostream& os) { write_obj(os, funnel_mesh(P.funnel(), &t.excised)); }));
    put("curves.csv", str([&](std::ostream& os) { write_trim_curves_csv(os, P.trim_curves()); }));
  } else if (cmd == "theta-zero") {
    put("theta_zero.csv", str([&](std::ostream& os) { write_zero_curves_csv(os, P.zero_curves()); }));
    put("phi_roots.csv", str([&](std::ostream& os) { write_phi_roots_csv(os, P.zero_curves()); }));
    put("theta_zero.json", dump_json(P.theta_zero_json()));
  } else if (cmd == "trim") {
    put("trim_curves.csv", str([&](std::ostream& os) { write_trim_curves_csv(os, P.trim_curves()); }));
    put("excision.csv", str([&](std::ostream& os) { write_funnel_csv(os, P.funnel(), nullptr, &P.trimmed().excised); }));
    put("trim.json", dump_json(P.trim_json()));
  } else if (cmd == "procedural") {
    put("procedural.json", dump_json(P.procedural_json()));
    for (const ProceduralComponent& c : P.procedural().components) {
      const std::string id = std::to_string(c.component);
      put("procedural_" + id + ".obj", str([&](std::ostream& os) { write_obj(os, c.mesh); }));
      put("seed_" + id + ".txt", c.seed.serialize());
    }
  } else if (cmd == "oracle") {
    put("oracle.json", dump_json(P.oracle_json()));
    put("occupancy.vox", str([&](std::ostream& os) { write_occupancy(os, P.oracle().volume); }));
    put("occupancy.obj", str([&](std::ostream& os) { write_occupancy_obj(os, P.oracle().volume); }));
  } else if (cmd == "report") {
    put("report.json", dump_json(P.report_json()));
  }
  // Wall-clock times live apart from the deterministic outputs.
  write_file(out, "timing.json", dump_json(P.timing_json()));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Solid sweep envelope kernel"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "Scene config (JSON)");
  app.add_option("--scene", f.scene, "Bundled scene name instead of --config");
  app.add_option("--out", f.out, "Output directory")->capture_default_str();
  app.add_option("--threads", f.threads, "Worker cap")->check(CLI::PositiveNumber);
  app.add_option("--tol-scale", f.tol_scale, "Multiplies all residual tolerances");
  app.add_option("--resolution", f.resolution, "Voxel resolution")->check(CLI::Range(16, 4096));
  app.add_option("--nt", f.nt, "Funnel slices")->check(CLI::Range(2, 100000));
  app.add_option("--np", f.np, "Nodes per slice curve")->check(CLI::Range(8, 100000));
  app.add_option("--seed-degree", f.seed_degree, "Seed spline degree")->check(CLI::Range(1, 7));
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"classify", "Funnel, theta and decomposability verdict"},
      {"envelope", "Trimmed envelope mesh and trim curves"},
      {"theta-zero", "F0 polylines and phi roots"},
      {"trim", "Trim curves and excision masks"},
      {"procedural", "Seed surfaces, dense evaluation and derivative audit"},
      {"oracle", "Voxelization and agreement report"},
      {"report", "Full run report"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    Pipeline P(resolve_config(f));
    spdlog::info("scene {} command {}", P.config().name, cmd);
    run(cmd, P, f.out);
    for (const auto& [stage, s] : P.timings()) spdlog::debug("stage {} {:.3f} s", stage, s);
  } catch (const SweepError& e) {
    spdlog::error("{}", e.what());
    return e.kind() == ErrorKind::Config ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  }
  return 0;
}
