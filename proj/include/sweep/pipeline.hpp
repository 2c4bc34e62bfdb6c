#pragma once

#include "sweep/io.hpp"
#include "sweep/oracle.hpp"
#include "sweep/procedural.hpp"
#include "sweep/scene.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sweep {

struct ProceduralComponent {
  int component = 0;
  SeedSurface seed;
  std::size_t evaluated = 0, failures = 0;
  int median_iterations = 0, max_iterations = 0;
  double max_f = 0.0, max_plane = 0.0;
  std::size_t fd_checked = 0, derivative_errors = 0;
  double max_fd_dp = 0.0, max_fd_dt = 0.0;
  std::size_t single_root_checked = 0, single_root_failures = 0;
  Mesh mesh;  // evaluation grid in world space
};

struct ProceduralReport {
  std::vector<ProceduralComponent> components;
  std::vector<std::string> skipped;  // components without a seed, with the reason
};

struct OracleReport {
  VoxelSweptVolume volume;
  int resolution = 0;
  std::string kernel;
  std::size_t retained = 0, retained_near = 0;
  std::size_t excised = 0, excised_interior = 0;
  BoundaryAudit audit;

  double retained_near_fraction() const { return retained ? double(retained_near) / double(retained) : 1.0; }
  double excised_interior_fraction() const { return excised ? double(excised_interior) / double(excised) : 1.0; }
};

// θ on component (i) of the sphere / circle scene against the two printed forms.
struct ThetaSignCheck {
  bool applicable = false;
  struct Row {
    double v = 0.0, literal = 0.0, printed = 0.0, computed = 0.0, fd = 0.0;
  };
  std::vector<Row> rows;
  double max_fd_vs_literal = 0.0;
  double min_fd_vs_printed = 0.0;  // over rows where the two forms differ by more than 1e-3
  bool sides_with_literal = false;
};

// Runs the stages on demand and caches their results. Stage failures are
// rethrown with the stage name prepended and the original error kind.
class Pipeline {
 public:
  explicit Pipeline(SceneConfig cfg);

  const SceneConfig& config() const { return cfg_; }
  const SweptScene& scene() const { return *scene_; }

  const Funnel& funnel();
  const SweepClassification& classification();
  double sep();
  const std::vector<ThetaZeroCurve>& zero_curves();
  const std::vector<TrimCurve>& singular_curves();
  const ElementaryTrimResult& elementary();
  std::vector<TrimCurve> trim_curves();
  const TrimmedEnvelope& trimmed();
  const ProceduralReport& procedural();
  const OracleReport& oracle();
  const ThetaSignCheck& theta_sign_check();

  const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }

  nlohmann::ordered_json classify_json();
  nlohmann::ordered_json theta_zero_json();
  nlohmann::ordered_json trim_json();
  nlohmann::ordered_json procedural_json();
  nlohmann::ordered_json oracle_json();
  nlohmann::ordered_json report_json();
  nlohmann::ordered_json timing_json() const;

 private:
  template <class F>
  auto stage(const char* name, F&& f);

  SceneConfig cfg_;
  std::unique_ptr<SweptScene> scene_;
  std::optional<Funnel> funnel_;
  std::optional<SweepClassification> cls_;
  std::optional<double> sep_;
  std::optional<std::vector<ThetaZeroCurve>> zero_;
  std::optional<std::vector<TrimCurve>> singular_;
  std::optional<ElementaryTrimResult> elementary_;
  std::optional<TrimmedEnvelope> trimmed_;
  std::optional<ProceduralReport> procedural_;
  std::optional<OracleReport> oracle_;
  std::optional<ThetaSignCheck> sign_;
  std::vector<std::pair<std::string, double>> timings_;
};

}  // namespace sweep
