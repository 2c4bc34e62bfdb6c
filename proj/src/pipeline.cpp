#include "sweep/pipeline.hpp"

#include "sweep/simd/membership.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace sweep {

using ojson = nlohmann::ordered_json;

Pipeline::Pipeline(SceneConfig cfg) : cfg_(std::move(cfg)) {
  scene_ = std::make_unique<SweptScene>(cfg_.build());
}

template <class F>
auto Pipeline::stage(const char* name, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto r = f();
    timings_.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return r;
  } catch (const SweepError& e) {
    // Drop the kind prefix; the rethrown error adds it back.
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw SweepError(e.kind(), std::string("stage ") + name + ": " + msg);
  }
}

namespace {

TimeSetOptions time_set_options(const SceneConfig& c) {
  TimeSetOptions o;
  o.samples = c.sampling.time_samples;
  o.touch_tol = c.tol.membership;
  return o;
}

TrimOptions trim_options(const SceneConfig& c) {
  TrimOptions o;
  o.residual = c.tol.coincidence;
  return o;
}

double polyline_length(const TrimCurve& c) {
  double s = 0.0;
  for (std::size_t k = 1; k < c.nodes.size(); ++k) s += (c.nodes[k].world - c.nodes[k - 1].world).norm();
  if (c.closed && c.nodes.size() > 1) s += (c.nodes.front().world - c.nodes.back().world).norm();
  return s;
}

ojson vec(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

}  // namespace

const Funnel& Pipeline::funnel() {
  if (!funnel_) {
    funnel_ = stage("funnel", [&] {
      FunnelOptions o;
      o.threads = cfg_.threads;
      Funnel F = sample_funnel(scene(), cfg_.sampling.n_t, cfg_.sampling.n_p, o);
      double worst = 0.0;
      for (const auto& s : F.slices)
        for (const auto& c : s.curves)
          for (const auto& p : c.points) worst = std::max(worst, std::abs(p.f));
      if (worst > cfg_.tol.funnel)
        throw SweepError(ErrorKind::Tracing, "funnel residual " + fmt17(worst) + " exceeds " + fmt17(cfg_.tol.funnel));
      if (F.point_count() == 0) throw SweepError(ErrorKind::Tracing, "empty funnel");
      return F;
    });
  }
  return *funnel_;
}

double Pipeline::sep() {
  if (!sep_) {
    const Funnel& F = funnel();
    sep_ = stage("sep", [&] { return sep_estimate(scene(), F, time_set_options(cfg_), cfg_.threads); });
  }
  return *sep_;
}

const SweepClassification& Pipeline::classification() {
  if (!cls_) {
    const Funnel& F = funnel();
    SweepClassification c =
        stage("classify", [&] { return classify_sweep(scene(), F, cfg_.tol.classify_eps, cfg_.threads); });
    attach_partition_width(scene(), c, sep());
    cls_ = std::move(c);
  }
  return *cls_;
}

const std::vector<ThetaZeroCurve>& Pipeline::zero_curves() {
  if (!zero_) {
    const Funnel& F = funnel();
    zero_ = stage("theta-zero", [&] { return trace_theta_zero(scene(), F); });
  }
  return *zero_;
}

const std::vector<TrimCurve>& Pipeline::singular_curves() {
  if (!singular_) {
    const auto& Z = zero_curves();
    singular_ = stage("singular-trim", [&] { return singular_trim_curves(scene(), Z, trim_options(cfg_)); });
  }
  return *singular_;
}

const ElementaryTrimResult& Pipeline::elementary() {
  if (!elementary_) {
    const Funnel& F = funnel();
    const SweepClassification& c = classification();
    const auto& S = singular_curves();
    elementary_ = stage("elementary-trim", [&] {
      return elementary_trim_curves(scene(), F, c, S, time_set_options(cfg_), trim_options(cfg_), cfg_.threads);
    });
  }
  return *elementary_;
}

std::vector<TrimCurve> Pipeline::trim_curves() {
  std::vector<TrimCurve> out = singular_curves();
  const auto& e = elementary().curves;
  out.insert(out.end(), e.begin(), e.end());
  return out;
}

const TrimmedEnvelope& Pipeline::trimmed() {
  if (!trimmed_) {
    const std::vector<TrimCurve> curves = trim_curves();
    const auto& Z = zero_curves();
    trimmed_ = stage("excise", [&] {
      ExciseOptions o;
      o.time_set = time_set_options(cfg_);
      o.threads = cfg_.threads;
      return excise(scene(), funnel(), curves, Z, o);
    });
  }
  return *trimmed_;
}

// ---------------------------------------------------------------------------

namespace {

ProceduralComponent run_component(const SweptScene& sc, SeedSurface seed, const NewtonSettings& nr, int G) {
  ProceduralComponent r;
  r.component = seed.component;
  const ProceduralEnvelope env(sc, std::move(seed), nr);
  const SeedSurface& sd = env.seed();
  const Interval I = sd.interval;
  auto p_at = [&](int a) { return sd.closed ? double(a) / G : double(a) / (G - 1); };
  auto t_at = [&](int b) { return I.lo + I.length() * b / (G - 1); };
  const std::vector<double> breaks = sc.face(sd.face).surface->v_breaks();
  // About cbrt(eps). E is only C1 at seed knots (E_pp jumps there), so the
  // central-difference error is O(h) at those stencils.
  const double h = 1e-5;

  std::vector<int> iters;
  std::vector<int> vid(static_cast<std::size_t>(G) * G, -1);
  for (int b = 0; b < G; ++b)
    for (int a = 0; a < G; ++a) {
      const double p = p_at(a), t = t_at(b);
      ++r.evaluated;
      EnvelopePoint e;
      try {
        e = eval_envelope(env, p, t);
      } catch (const SweepError&) {
        ++r.failures;
        continue;
      }
      iters.push_back(e.iterations);
      r.max_f = std::max(r.max_f, e.f_residual);
      r.max_plane = std::max(r.max_plane, e.plane_residual);
      vid[static_cast<std::size_t>(b) * G + a] = static_cast<int>(r.mesh.vertices.size());
      r.mesh.vertices.push_back(e.world);

      ++r.single_root_checked;
      if (!check_single_root(env, p, t).ok) ++r.single_root_failures;

      if (t - h < I.lo || t + h > I.hi || (!sd.closed && (p - h < 0 || p + h > 1))) continue;
      try {
        const EnvelopeDerivatives d = eval_derivatives(env, p, t);
        const EnvelopePoint pm = eval_envelope(env, p - h, t), pp = eval_envelope(env, p + h, t);
        const EnvelopePoint tm = eval_envelope(env, p, t - h), tp = eval_envelope(env, p, t + h);
        // Central differences are meaningless across a C1 curvature break.
        bool straddles = false;
        for (double vb : breaks)
          straddles |= (pm.v - vb) * (pp.v - vb) <= 0 || (tm.v - vb) * (tp.v - vb) <= 0;
        if (straddles) continue;
        ++r.fd_checked;
        r.max_fd_dp = std::max(r.max_fd_dp, (d.dp - (pp.world - pm.world) / (2 * h)).norm());
        r.max_fd_dt = std::max(r.max_fd_dt, (d.dt - (tp.world - tm.world) / (2 * h)).norm());
      } catch (const SweepError&) {
        ++r.derivative_errors;
      }
    }
  if (!iters.empty()) {
    std::sort(iters.begin(), iters.end());
    r.median_iterations = iters[iters.size() / 2];
    r.max_iterations = iters.back();
  }
  const int cols = sd.closed ? G : G - 1;
  for (int b = 0; b + 1 < G; ++b)
    for (int a = 0; a < cols; ++a) {
      const int a1 = (a + 1) % G;
      const int q[4] = {vid[b * G + a], vid[b * G + a1], vid[(b + 1) * G + a1], vid[(b + 1) * G + a]};
      if (std::min({q[0], q[1], q[2], q[3]}) >= 0) r.mesh.faces.push_back({q[0], q[1], q[2], q[3]});
    }
  r.seed = env.seed();
  return r;
}

}  // namespace

const ProceduralReport& Pipeline::procedural() {
  if (!procedural_) {
    const Funnel& F = funnel();
    procedural_ = stage("procedural", [&] {
      ProceduralReport rep;
      NewtonSettings nr;
      nr.residual = cfg_.tol.procedural;
      for (int c = 0; c < F.n_components; ++c) {
        SeedOptions o;
        o.component = c;
        o.degree = cfg_.sampling.seed_degree;
        try {
          SeedSurface seed = build_seed(scene(), F, o);
          rep.components.push_back(run_component(scene(), std::move(seed), nr, cfg_.sampling.procedural_grid));
        } catch (const SweepError& e) {
          if (e.kind() != ErrorKind::SeedBuild) throw;
          rep.skipped.push_back("component " + std::to_string(c) + ": " + e.what());
        }
      }
      if (rep.components.empty()) throw SweepError(ErrorKind::SeedBuild, "no component admits a seed surface");
      return rep;
    });
  }
  return *procedural_;
}

const OracleReport& Pipeline::oracle() {
  if (!oracle_) {
    const TrimmedEnvelope& env = trimmed();
    const Funnel& F = funnel();
    oracle_ = stage("oracle", [&] {
      OracleReport r;
      r.resolution = cfg_.sampling.resolution;
      VoxelizeOptions vo;
      vo.threads = cfg_.threads;
      vo.tol = cfg_.tol.membership;
      const double h = voxelize(scene(), r.resolution, 1, vo).spacing;
      const int n_t = std::max(cfg_.sampling.oracle_nt, time_samples_for_spacing(scene(), h));
      r.volume = voxelize(scene(), r.resolution, n_t, vo);
      r.kernel = simd::row_kernel_name();
      for (std::size_t i = 0; i < F.slices.size(); ++i)
        for (std::size_t j = 0; j < F.slices[i].curves.size(); ++j)
          for (std::size_t k = 0; k < F.slices[i].curves[j].points.size(); ++k) {
            const VoxelClass c = classify_point(r.volume, F.slices[i].curves[j].points[k].sigma);
            if (env.excised[i][j][k]) {
              ++r.excised;
              r.excised_interior += c == VoxelClass::Interior;
            } else {
              ++r.retained;
              r.retained_near += c == VoxelClass::NearBoundary;
            }
          }
      BoundaryAuditOptions bo;
      bo.margin = cfg_.tol.boundary_margin;
      bo.threads = cfg_.threads;
      r.audit = endcap_ingress_egress_check(scene(), boundary_samples(r.volume), bo);
      return r;
    });
  }
  return *oracle_;
}

const ThetaSignCheck& Pipeline::theta_sign_check() {
  if (!sign_) {
    sign_ = stage("theta-sign", [&] {
      ThetaSignCheck s;
      // Applies to the unit sphere on the circle b(t) = (cos 2t, sin 2t, 0) / 2.
      const auto sp = cfg_.solid.resolved();
      const auto mp = cfg_.motion.resolved();
      s.applicable = cfg_.solid.type == "sphere" && cfg_.motion.kind == MotionKind::TranslationCircle &&
                     sp.at("radius")[0] == 1.0 && sp.at("center") == std::vector<double>{0, 0, 0} &&
                     mp.at("radius")[0] == 0.5 && mp.at("rate")[0] == 2.0 && mp.at("phase")[0] == 0.0 &&
                     mp.at("center") == std::vector<double>{0, 0, 0} && sp.at("pole_axis") == std::vector<double>{0, 0, 1};
      if (!s.applicable) return s;
      const double t = 0.5 * (scene().interval().lo + scene().interval().hi);
      s.min_fd_vs_printed = kInf;
      for (double v : {-1.2, -0.6, 0.0, 0.6, 1.2}) {
        const FunnelPoint p = make_funnel_point(scene(), 0, 2 * t - kPi, v, t);
        ThetaSignCheck::Row row;
        row.v = v;
        row.literal = 1.0 - 2.0 * std::cos(v);
        row.printed = 2.0 * std::cos(v) - 1.0;
        row.computed = theta(scene(), p);
        row.fd = theta_fd_check(scene(), p).lambda_second_fd;
        s.max_fd_vs_literal = std::max(s.max_fd_vs_literal, std::abs(row.fd - row.literal));
        if (std::abs(row.literal - row.printed) > 1e-3)
          s.min_fd_vs_printed = std::min(s.min_fd_vs_printed, std::abs(row.fd - row.printed));
        s.rows.push_back(row);
      }
      s.sides_with_literal = s.max_fd_vs_literal <= 1e-4 && s.min_fd_vs_printed > 1e-4;
      return s;
    });
  }
  return *sign_;
}

// ---------------------------------------------------------------------------
// JSON

ojson Pipeline::classify_json() {
  const SweepClassification& c = classification();
  ojson j;
  j["scene"] = cfg_.name;
  j["verdict"] = to_string(c.verdict);
  j["theta_min"] = c.theta_min;
  j["theta_max"] = c.theta_max;
  j["samples"] = {{"F_minus", c.n_minus}, {"F_zero", c.n_zero}, {"F_plus", c.n_plus}};
  j["sep"] = sep();
  j["delta"] = c.delta ? ojson(*c.delta) : ojson(nullptr);
  j["funnel"] = {{"slices", funnel().slices.size()},
                 {"components", funnel().n_components},
                 {"points", funnel().point_count()},
                 {"events", funnel().events.size()}};
  return j;
}

ojson Pipeline::theta_zero_json() {
  ojson curves = ojson::array();
  for (const ThetaZeroCurve& z : zero_curves()) {
    double vmin = kInf, vmax = -kInf, vsum = 0.0;
    for (const ZeroNode& n : z.nodes) {
      vmin = std::min(vmin, n.point.v);
      vmax = std::max(vmax, n.point.v);
      vsum += n.point.v;
    }
    ojson roots = ojson::array();
    for (const PhiRoot& r : z.roots)
      roots.push_back({{"s", r.s}, {"param", vec(r.param)}, {"phi_prime", r.phi_prime}, {"sign", r.sign}});
    curves.push_back({{"chart_face", z.chart_face},
                      {"nodes", z.nodes.size()},
                      {"closed", z.closed},
                      {"v_min", vmin},
                      {"v_max", vmax},
                      {"v_mean", z.nodes.empty() ? 0.0 : vsum / double(z.nodes.size())},
                      {"phi_vanishes", z.phi_vanishes},
                      {"phi_roots", roots},
                      {"diagnostics", z.diagnostics}});
  }
  ojson j;
  j["zero_curves"] = curves;
  const ThetaSignCheck& s = theta_sign_check();
  if (s.applicable) {
    ojson rows = ojson::array();
    for (const auto& r : s.rows)
      rows.push_back({{"v", r.v},
                      {"literal_1_minus_2cos_v", r.literal},
                      {"printed_2cos_v_minus_1", r.printed},
                      {"computed", r.computed},
                      {"lambda_second_fd", r.fd}});
    j["theta_sign_check"] = {{"component", "u = 2t - pi"},
                             {"rows", rows},
                             {"max_fd_vs_literal", s.max_fd_vs_literal},
                             {"min_fd_vs_printed", s.min_fd_vs_printed},
                             {"fd_sides_with_literal", s.sides_with_literal}};
  }
  return j;
}

ojson Pipeline::trim_json() {
  const ElementaryTrimResult& e = elementary();
  ojson curves = ojson::array();
  for (const TrimCurve& c : trim_curves()) {
    double rms = 0.0;
    for (const TrimNode& n : c.nodes) rms += n.residual * n.residual;
    rms = c.nodes.empty() ? 0.0 : std::sqrt(rms / double(c.nodes.size()));
    curves.push_back({{"kind", to_string(c.kind)},
                      {"nodes", c.nodes.size()},
                      {"closed", c.closed},
                      {"length", polyline_length(c)},
                      {"max_residual", c.max_residual},
                      {"rms_residual", rms},
                      {"min_gap", std::isfinite(c.min_gap) ? ojson(c.min_gap) : ojson(nullptr)},
                      {"transversal", c.transversal},
                      {"diagnostics", c.diagnostics}});
  }
  const TrimmedEnvelope& t = trimmed();
  ojson j;
  j["sep"] = std::isfinite(e.sep) ? ojson(e.sep) : ojson(nullptr);
  j["delta"] = std::isfinite(e.delta) ? ojson(e.delta) : ojson(nullptr);
  j["partition"] = e.partition.size();
  j["curves"] = curves;
  ojson triples = ojson::array();
  for (const TripleHit& h : e.triple_points) triples.push_back({{"world", vec(h.world)}, {"curves", {h.curve_a, h.curve_b}}});
  j["triple_points"] = triples;
  j["excision"] = {{"excised", t.n_excised},
                   {"retained", t.n_retained},
                   {"excised_fraction",
                    t.n_excised + t.n_retained ? double(t.n_excised) / double(t.n_excised + t.n_retained) : 0.0},
                   {"regions", t.regions},
                   {"consistent", t.consistent},
                   {"diagnostics", t.diagnostics}};
  j["diagnostics"] = e.diagnostics;
  return j;
}

ojson Pipeline::procedural_json() {
  const ProceduralReport& p = procedural();
  ojson comps = ojson::array();
  for (const ProceduralComponent& c : p.components) {
    comps.push_back({{"component", c.component},
                     {"face", c.seed.face},
                     {"closed", c.seed.closed},
                     {"n_t", c.seed.n_t},
                     {"n_p", c.seed.n_p},
                     {"seed_max_residual", c.seed.max_residual},
                     {"seed_rms_residual", c.seed.rms_residual},
                     {"seed_max_body_residual", c.seed.max_body_residual},
                     {"evaluated", c.evaluated},
                     {"failures", c.failures},
                     {"median_iterations", c.median_iterations},
                     {"max_iterations", c.max_iterations},
                     {"max_f", c.max_f},
                     {"max_plane_residual", c.max_plane},
                     {"fd_checked", c.fd_checked},
                     {"derivative_errors", c.derivative_errors},
                     {"max_fd_dp", c.max_fd_dp},
                     {"max_fd_dt", c.max_fd_dt},
                     {"single_root_checked", c.single_root_checked},
                     {"single_root_failures", c.single_root_failures}});
  }
  ojson j;
  j["grid"] = cfg_.sampling.procedural_grid;
  j["components"] = comps;
  j["skipped"] = p.skipped;
  return j;
}

ojson Pipeline::oracle_json() {
  const OracleReport& o = oracle();
  const VoxelSweptVolume& v = o.volume;
  const BoundaryAudit& a = o.audit;
  ojson j;
  j["resolution"] = o.resolution;
  j["dims"] = {v.dims[0], v.dims[1], v.dims[2]};
  j["origin"] = vec(v.origin);
  j["spacing"] = v.spacing;
  j["n_t"] = v.n_t;
  j["kernel"] = o.kernel;
  j["occupied_voxels"] = v.count();
  j["volume"] = v.occupied_volume();
  j["retained"] = {{"samples", o.retained}, {"near_boundary", o.retained_near}, {"fraction", o.retained_near_fraction()}};
  j["excised"] = {{"samples", o.excised}, {"interior", o.excised_interior}, {"fraction", o.excised_interior_fraction()}};
  j["boundary_audit"] = {{"samples", a.samples},  {"grazing", a.grazing},
                         {"ingress", a.ingress},  {"egress", a.egress},
                         {"interior", a.interior}, {"failed", a.failed},
                         {"max_grazing_g", a.max_grazing_g}, {"exact_distance", a.exact_distance},
                         {"passed", a.passed()}};
  return j;
}

ojson Pipeline::report_json() {
  ojson j;
  j["scene"] = cfg_.name;
  j["classification"] = classify_json();
  j["theta_zero"] = theta_zero_json();
  j["trim"] = trim_json();
  j["procedural"] = procedural_json();
  // Spline solids have no membership test, so the oracle cannot run.
  if (scene().solid().has_membership()) j["oracle"] = oracle_json();
  else j["oracle"] = nullptr;
  return j;
}

ojson Pipeline::timing_json() const {
  ojson j = ojson::object();
  for (const auto& [name, s] : timings_) j[name] = s;
  return j;
}

}  // namespace sweep
