#include "sweep/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sweep {

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

void emit(std::ostream& os, const nlohmann::ordered_json& j, int depth) {
  using value_t = nlohmann::ordered_json::value_t;
  const std::string pad(2 * depth + 2, ' '), close(2 * depth, ' ');
  switch (j.type()) {
    case value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) os << ",\n";
        first = false;
        os << pad << nlohmann::ordered_json(k).dump() << ": ";
        emit(os, v, depth + 1);
      }
      os << '\n' << close << '}';
      return;
    }
    case value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const auto& v) { return v.is_primitive(); });
      os << '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << (flat ? ", " : ",");
        first = false;
        if (!flat) os << '\n' << pad;
        emit(os, v, depth + 1);
      }
      if (!flat) os << '\n' << close;
      os << ']';
      return;
    }
    case value_t::number_float: {
      const double x = j.get<double>();
      os << (std::isfinite(x) ? fmt17(x) : "null");
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace

void write_json(std::ostream& os, const nlohmann::ordered_json& j) {
  emit(os, j, 0);
  os << '\n';
}

std::string dump_json(const nlohmann::ordered_json& j) {
  std::ostringstream os;
  write_json(os, j);
  return os.str();
}

void write_obj(std::ostream& os, const Mesh& mesh) {
  for (const Vec3& v : mesh.vertices) os << "v " << fmt17(v.x()) << ' ' << fmt17(v.y()) << ' ' << fmt17(v.z()) << '\n';
  for (const auto& f : mesh.faces) {
    os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1;
    if (f[3] >= 0) os << ' ' << f[3] + 1;
    os << '\n';
  }
}

Mesh funnel_mesh(const Funnel& funnel, const SampleMask* excised) {
  Mesh m;
  // Vertex index of every node, [slice][curve][node].
  std::vector<std::vector<std::vector<int>>> id(funnel.slices.size());
  for (std::size_t i = 0; i < funnel.slices.size(); ++i) {
    const auto& curves = funnel.slices[i].curves;
    id[i].resize(curves.size());
    for (std::size_t j = 0; j < curves.size(); ++j)
      for (const FunnelPoint& p : curves[j].points) {
        id[i][j].push_back(static_cast<int>(m.vertices.size()));
        m.vertices.push_back(p.sigma);
      }
  }
  auto kept = [&](std::size_t i, std::size_t j, std::size_t k) { return !excised || !(*excised)[i][j][k]; };
  for (std::size_t i = 0; i + 1 < funnel.slices.size(); ++i) {
    const auto& A = funnel.slices[i].curves;
    const auto& B = funnel.slices[i + 1].curves;
    for (std::size_t a = 0; a < A.size(); ++a) {
      std::size_t b = 0;
      while (b < B.size() && B[b].component != A[a].component) ++b;
      if (b == B.size() || B[b].points.size() != A[a].points.size()) continue;
      const std::size_t n = A[a].points.size();
      const std::size_t segs = A[a].closed ? n : n - 1;
      for (std::size_t k = 0; k < segs; ++k) {
        const std::size_t k1 = (k + 1) % n;
        if (!(kept(i, a, k) && kept(i, a, k1) && kept(i + 1, b, k) && kept(i + 1, b, k1))) continue;
        m.faces.push_back({id[i][a][k], id[i][a][k1], id[i + 1][b][k1], id[i + 1][b][k]});
      }
    }
  }
  return m;
}

void write_trim_curves_csv(std::ostream& os, const std::vector<TrimCurve>& curves) {
  os << "curve,kind,node,x,y,z,u1,v1,t1,u2,v2,t2,residual,gap,angle,s\n";
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t k = 0; k < curves[c].nodes.size(); ++k) {
      const TrimNode& n = curves[c].nodes[k];
      os << c << ',' << to_string(curves[c].kind) << ',' << k << ',' << fmt17(n.world.x()) << ',' << fmt17(n.world.y())
         << ',' << fmt17(n.world.z()) << ',' << fmt17(n.p1.u) << ',' << fmt17(n.p1.v) << ',' << fmt17(n.p1.t) << ','
         << fmt17(n.p2.u) << ',' << fmt17(n.p2.v) << ',' << fmt17(n.p2.t) << ',' << fmt17(n.residual) << ','
         << fmt17(n.gap) << ',' << fmt17(n.angle) << ',' << fmt17(n.s) << '\n';
    }
}

void write_zero_curves_csv(std::ostream& os, const std::vector<ThetaZeroCurve>& curves) {
  os << "curve,node,u,v,t,x,y,z,theta,phi,s\n";
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t k = 0; k < curves[c].nodes.size(); ++k) {
      const ZeroNode& n = curves[c].nodes[k];
      const FunnelPoint& p = n.point;
      os << c << ',' << k << ',' << fmt17(p.u) << ',' << fmt17(p.v) << ',' << fmt17(p.t) << ',' << fmt17(p.sigma.x())
         << ',' << fmt17(p.sigma.y()) << ',' << fmt17(p.sigma.z()) << ',' << fmt17(n.theta) << ',' << fmt17(n.phi)
         << ',' << fmt17(n.s) << '\n';
    }
}

void write_phi_roots_csv(std::ostream& os, const std::vector<ThetaZeroCurve>& curves) {
  os << "curve,root,s,u,v,t,phi_prime,sign\n";
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t r = 0; r < curves[c].roots.size(); ++r) {
      const PhiRoot& q = curves[c].roots[r];
      os << c << ',' << r << ',' << fmt17(q.s) << ',' << fmt17(q.param.x()) << ',' << fmt17(q.param.y()) << ','
         << fmt17(q.param.z()) << ',' << fmt17(q.phi_prime) << ',' << q.sign << '\n';
    }
}

void write_funnel_csv(std::ostream& os, const Funnel& funnel, const ThetaField* theta, const SampleMask* excised) {
  os << "slice,curve,node,component,u,v,t,x,y,z";
  if (theta) os << ",theta";
  if (excised) os << ",excised";
  os << '\n';
  for (std::size_t i = 0; i < funnel.slices.size(); ++i)
    for (std::size_t j = 0; j < funnel.slices[i].curves.size(); ++j) {
      const ContactCurve& c = funnel.slices[i].curves[j];
      for (std::size_t k = 0; k < c.points.size(); ++k) {
        const FunnelPoint& p = c.points[k];
        os << i << ',' << j << ',' << k << ',' << c.component << ',' << fmt17(p.u) << ',' << fmt17(p.v) << ','
           << fmt17(p.t) << ',' << fmt17(p.sigma.x()) << ',' << fmt17(p.sigma.y()) << ',' << fmt17(p.sigma.z());
        if (theta) os << ',' << fmt17((*theta)[i][j][k]);
        if (excised) os << ',' << int((*excised)[i][j][k] != 0);
        os << '\n';
      }
    }
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw SweepError(ErrorKind::Resource, "cannot create '" + dir + "': " + ec.message());
  const std::filesystem::path path = std::filesystem::path(dir) / name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  if (!f) throw SweepError(ErrorKind::Resource, "cannot write '" + path.string() + "'");
}

}  // namespace sweep
