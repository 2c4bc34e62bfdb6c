#pragma once

#include "sweep/trim.hpp"

#include <json.hpp>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace sweep {

// "%.17g"; non-finite values print as nan / inf / -inf.
std::string fmt17(double x);

// JSON with every float printed by fmt17 (non-finite floats become null), keys
// in insertion order, two-space indent.
void write_json(std::ostream& os, const nlohmann::ordered_json& j);
std::string dump_json(const nlohmann::ordered_json& j);

// Quad mesh; a quad with d == -1 is a triangle. Indices are 0-based here and
// written 1-based.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> faces;
};

void write_obj(std::ostream& os, const Mesh& mesh);

// Quads between consecutive slices of each funnel component (world σ). With a
// mask, quads touching an excised node are dropped.
Mesh funnel_mesh(const Funnel& funnel, const SampleMask* excised = nullptr);

// Curve CSVs, one row per node.
void write_trim_curves_csv(std::ostream& os, const std::vector<TrimCurve>& curves);
void write_zero_curves_csv(std::ostream& os, const std::vector<ThetaZeroCurve>& curves);
void write_phi_roots_csv(std::ostream& os, const std::vector<ThetaZeroCurve>& curves);
void write_funnel_csv(std::ostream& os, const Funnel& funnel, const ThetaField* theta = nullptr,
                      const SampleMask* excised = nullptr);

// Writes `content` to dir/name, creating dir. Throws Resource on failure.
void write_file(const std::string& dir, const std::string& name, const std::string& content);

}  // namespace sweep
