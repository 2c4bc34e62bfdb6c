#include "sweep/funnel.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace sweep {

SweptScene::SweptScene(Solid solid, RigidMotion motion, std::vector<std::size_t> active_faces)
    : solid_(std::move(solid)), motion_(std::move(motion)), active_(std::move(active_faces)) {
  if (solid_.faces.empty()) throw SweepError(ErrorKind::Domain, "solid has no faces");
  if (active_.empty()) {
    active_.resize(solid_.faces.size());
    std::iota(active_.begin(), active_.end(), 0);
  }
  for (std::size_t f : active_) {
    if (f >= solid_.faces.size()) throw SweepError(ErrorKind::Domain, "face selection out of range");
  }
}

std::vector<std::size_t> SweptScene::chart_faces() const {
  std::vector<std::size_t> out;
  std::vector<const Surface*> seen;
  for (std::size_t f : active_) {
    const Surface* s = solid_.faces[f].surface.get();
    if (std::find(seen.begin(), seen.end(), s) == seen.end()) {
      seen.push_back(s);
      out.push_back(f);
    }
  }
  return out;
}

std::size_t SweptScene::face_at(std::size_t chart_face, double u, double v) const {
  const Surface* s = solid_.faces[chart_face].surface.get();
  for (std::size_t f : active_) {
    if (solid_.faces[f].surface.get() == s && solid_.faces[f].domain.contains(u, v)) return f;
  }
  return chart_face;
}

SweepJet sweep_jet(const SweptScene& scene, std::size_t face, double u, double v, double t, bool extrapolate) {
  SweepJet j;
  j.s = scene.face(face).surface->jet(u, v);
  j.d = differential(j.s);
  j.m = extrapolate ? scene.motion().jet_unchecked(t) : scene.motion().jet(t);
  const Mat3& A = j.m.A;
  j.sigma = A * j.s.S + j.m.b;
  j.sigma_u = A * j.s.Su;
  j.sigma_v = A * j.s.Sv;
  j.sigma_t = j.m.dA * j.s.S + j.m.db;
  j.N = A * j.d.N;
  const Vec3& V = j.sigma_t;
  j.f = j.N.dot(V);
  j.grad.x() = (A * j.d.Nu).dot(V) + j.N.dot(j.m.dA * j.s.Su);
  j.grad.y() = (A * j.d.Nv).dot(V) + j.N.dot(j.m.dA * j.s.Sv);
  j.grad.z() = (j.m.dA * j.d.N).dot(V) + j.N.dot(j.m.ddA * j.s.S + j.m.ddb);
  return j;
}

FunnelPoint make_funnel_point(const SweptScene& scene, std::size_t face, double u, double v, double t) {
  const SweepJet j = sweep_jet(scene, face, u, v, t);
  FunnelPoint p;
  p.face = face;
  p.u = u;
  p.v = v;
  p.t = t;
  p.f = j.f;
  p.grad = j.grad;
  p.sigma = j.sigma;
  p.normal = j.N;
  p.velocity = j.sigma_t;
  return p;
}

double f_value(const SweptScene& scene, std::size_t face, double u, double v, double t) {
  return sweep_jet(scene, face, u, v, t).f;
}

Vec3 grad_f(const SweptScene& scene, std::size_t face, double u, double v, double t) {
  return sweep_jet(scene, face, u, v, t).grad;
}

double jacobian_det(const SweptScene& scene, std::size_t face, double u, double v, double t) {
  const SweepJet j = sweep_jet(scene, face, u, v, t);
  Mat3 J;
  J << j.sigma_u, j.sigma_v, j.sigma_t;
  return J.determinant();
}

double g_value(const SweptScene& scene, const Vec3& x, double t, double tol) {
  double best = kInf;
  Vec3 n = Vec3::Zero();
  if (scene.solid().has_membership()) {
    best = std::abs(scene.solid().signed_measure(x));
    if (best <= tol) n = scene.solid().primitive.outward_normal(x);
  } else {
    for (std::size_t f : scene.chart_faces()) {
      const Surface& s = *scene.face(f).surface;
      const Vec2 seed = grid_seed(s, x);
      try {
        const Projection p = project_to_surface(s, x, seed.x(), seed.y());
        if (std::abs(p.signed_distance) < best) {
          best = std::abs(p.signed_distance);
          n = p.normal;
        }
      } catch (const SweepError&) {
      }
    }
  }
  if (!(best <= tol)) {
    std::ostringstream os;
    os << "point is " << best << " away from the solid boundary";
    throw SweepError(ErrorKind::Domain, os.str());
  }
  const MotionJet m = scene.motion().jet(t);
  return (m.A * n).dot(m.dA * x + m.db);
}

// ---------------------------------------------------------------------------
// Slice tracing

namespace {

struct SliceEval {
  double f;
  Vec2 g;
};

SliceEval slice_eval(const SweptScene& scene, std::size_t face, double u, double v, double t) {
  const SweepJet j = sweep_jet(scene, face, u, v, t);
  return {j.f, Vec2(j.grad.x(), j.grad.y())};
}

// Min-norm Newton at fixed t. Returns iterations used, or -1 on failure
// (including iterates that leave the chart's non-periodic range).
int newton_slice(const SweptScene& scene, std::size_t face, double t, Vec2& p, int max_iter) {
  const ParamRect dom = scene.face(face).surface->domain();
  auto inside = [&](const Vec2& q) { return dom.contains(q.x(), q.y()); };
  if (!inside(p)) return -1;
  for (int it = 0; it < max_iter; ++it) {
    const SliceEval e = slice_eval(scene, face, p.x(), p.y(), t);
    if (std::abs(e.f) <= 1e-14) return it;
    const double g2 = e.g.squaredNorm();
    if (g2 < 1e-16) return -1;
    const Vec2 step = -e.f * e.g / g2;
    p += step;
    if (!inside(p)) return -1;
    if (step.norm() < 1e-15) {
      return std::abs(slice_eval(scene, face, p.x(), p.y(), t).f) <= kFunnelTol ? it + 1 : -1;
    }
  }
  const double r = std::abs(slice_eval(scene, face, p.x(), p.y(), t).f);
  return r <= 1e-12 ? max_iter : -1;
}

double wrapped_distance(const ParamRect& d, const Vec2& a, const Vec2& b) {
  double du = a.x() - b.x();
  if (d.u_periodic) du -= d.u_period() * std::round(du / d.u_period());
  double dv = a.y() - b.y();
  if (d.v_periodic) dv -= d.v_period() * std::round(dv / d.v_period());
  return std::hypot(du, dv);
}

Vec2 unit_beta(const Vec3& grad) {
  const Vec2 b(-grad.y(), grad.x());
  return b / b.norm();
}

FunnelPoint checked_point(const SweptScene& scene, std::size_t chart_face, const Vec2& p, double t) {
  FunnelPoint fp = make_funnel_point(scene, chart_face, p.x(), p.y(), t);
  if (std::hypot(fp.grad.x(), fp.grad.y()) < 1e-8) {
    std::ostringstream os;
    os << "(f_u, f_v) vanishes at (" << p.x() << ", " << p.y() << ", " << t << ")";
    throw SweepError(ErrorKind::DegenerateSlice, os.str());
  }
  fp.face = scene.face_at(chart_face, p.x(), p.y());
  return fp;
}

// Solve f(u, vb, t) = 0 in u near u0 for a boundary-terminated curve.
std::optional<double> solve_on_boundary(const SweptScene& scene, std::size_t face, double t, double vb, double u0) {
  double u = u0;
  for (int it = 0; it < 30; ++it) {
    const SliceEval e = slice_eval(scene, face, u, vb, t);
    if (std::abs(e.f) <= 1e-13) return u;
    if (std::abs(e.g.x()) < 1e-14) return std::nullopt;
    u -= e.f / e.g.x();
  }
  if (std::abs(slice_eval(scene, face, u, vb, t).f) <= kFunnelTol) return u;
  return std::nullopt;
}

struct MarchResult {
  std::vector<FunnelPoint> points;  // excluding the start
  bool closed = false;
  int winding = 0;
};

MarchResult march(const SweptScene& scene, std::size_t face, double t, const FunnelPoint& start, double dir,
                  const TraceOptions& opt) {
  const Surface& surf = *scene.face(face).surface;
  const ParamRect dom = surf.domain();
  const std::vector<double> breaks = surf.v_breaks();
  auto crosses_break = [&](const Vec2& a, const Vec2& b) {
    for (double w : breaks)
      if ((a.y() - w) * (b.y() - w) <= 0.0) return true;
    return false;
  };
  // Break strictly crossed by the open segment a -> b, if any.
  auto break_between = [&](const Vec2& a, const Vec2& b) -> std::optional<double> {
    for (double w : breaks)
      if (std::abs(a.y() - w) > 1e-12 && (a.y() - w) * (b.y() - w) < 0.0) return w;
    return std::nullopt;
  };
  MarchResult out;
  Vec2 cur(start.u, start.v);
  Vec2 tan = dir * unit_beta(start.grad);
  const Vec2 origin = cur;
  double h = opt.h_init;
  double travelled = 0.0;
  for (;;) {
    if (out.points.size() >= opt.max_nodes) throw SweepError(ErrorKind::Tracing, "node budget exhausted");
    const Vec2 pred = cur + h * tan;
    // Leaving the chart through a non-periodic side ends the curve there.
    if (!dom.v_periodic && (pred.y() > dom.v1 || pred.y() < dom.v0)) {
      const double vb = pred.y() > dom.v1 ? dom.v1 : dom.v0;
      const double s = (vb - cur.y()) / (pred.y() - cur.y());
      if (auto ub = solve_on_boundary(scene, face, t, vb, cur.x() + s * (pred.x() - cur.x()))) {
        const Vec2 end(*ub, vb);
        if ((end - cur).norm() <= 2.0 * h) {
          if ((end - cur).norm() > 1e-12) out.points.push_back(checked_point(scene, face, end, t));
          return out;
        }
      }
      h *= 0.5;
      if (h < opt.h_min) {
        if (std::abs(cur.y() - vb) < 2.0 * opt.h_min) return out;
        throw SweepError(ErrorKind::Tracing, "could not terminate the curve on the chart boundary");
      }
      continue;
    }
    // At a C^1 junction the gradient of f jumps: land exactly on the junction,
    // then leave it along the far side's tangent.
    if (auto wb = break_between(cur, pred)) {
      const double s = (*wb - cur.y()) / (pred.y() - cur.y());
      if (auto uj = solve_on_boundary(scene, face, t, *wb, cur.x() + s * (pred.x() - cur.x()))) {
        const Vec2 junction(*uj, *wb);
        if ((junction - cur).norm() <= 1.5 * h) {
          const double side = pred.y() > *wb ? 1.0 : -1.0;
          const Vec3 g_far = sweep_jet(scene, face, junction.x(), *wb + side * 1e-9, t).grad;
          if (std::hypot(g_far.x(), g_far.y()) < 1e-8) {
            throw SweepError(ErrorKind::DegenerateSlice, "(f_u, f_v) vanishes at a face junction");
          }
          Vec2 far_tan = dir * unit_beta(g_far);
          if (far_tan.y() * side < 0.0) far_tan = -far_tan;
          travelled += (junction - cur).norm();
          if ((junction - cur).norm() > 1e-12) out.points.push_back(checked_point(scene, face, junction, t));
          cur = junction;
          tan = far_tan;
          continue;
        }
      }
      h *= 0.5;
      if (h < opt.h_min) throw SweepError(ErrorKind::Tracing, "could not cross a face junction");
      continue;
    }
    Vec2 next = pred;
    const int iters = newton_slice(scene, face, t, next, opt.max_newton);
    bool ok = iters >= 0 && (next - pred).norm() <= 0.5 * h;
    if (ok) {
      const Vec3 grad = sweep_jet(scene, face, next.x(), next.y(), t).grad;
      if (std::hypot(grad.x(), grad.y()) < 1e-8) {
        throw SweepError(ErrorKind::DegenerateSlice, "(f_u, f_v) vanishes along the slice");
      }
      const Vec2 new_tan = dir * unit_beta(grad);
      // Across a C^1 junction the parameter-space tangent may kink.
      ok = new_tan.dot(tan) > std::cos(0.35) || crosses_break(cur, next);
      if (ok) {
        travelled += (next - cur).norm();
        out.points.push_back(checked_point(scene, face, next, t));
        cur = next;
        tan = new_tan;
        if (iters <= 3) h = std::min(h * 1.5, opt.h_max);
        // Closure: back near the start after going a fair distance.
        if (travelled > 4.0 * opt.h_max) {
          Vec2 to_start = origin - cur;
          int k = 0;
          if (dom.u_periodic) {
            k = static_cast<int>(std::round(to_start.x() / dom.u_period()));
            to_start.x() -= k * dom.u_period();
          }
          if (to_start.norm() < 1.5 * h && to_start.dot(tan) > -0.25 * h) {
            out.closed = true;
            out.winding = -k;
            return out;
          }
        }
        continue;
      }
    }
    h *= 0.5;
    if (h < opt.h_min) {
      std::ostringstream os;
      os << "step size underflow near (" << cur.x() << ", " << cur.y() << ", t=" << t << ")";
      throw SweepError(ErrorKind::Tracing, os.str());
    }
  }
}

}  // namespace

Vec2 correct_to_slice(const SweptScene& scene, std::size_t face, double u, double v, double t,
                      const TraceOptions& opt) {
  Vec2 p(u, v);
  const int it = newton_slice(scene, face, t, p, opt.max_newton);
  if (it < 0) throw SweepError(ErrorKind::Tracing, "Newton correction onto the slice failed");
  if ((p - Vec2(u, v)).norm() > opt.basin) throw SweepError(ErrorKind::Tracing, "no root of f in the seed's basin");
  const ParamRect dom = scene.face(face).surface->domain();
  if (!dom.contains(p.x(), p.y())) throw SweepError(ErrorKind::Tracing, "corrected seed left the chart");
  return p;
}

ContactCurve trace_contact_curve(const SweptScene& scene, std::size_t face, double t, const Vec2& seed,
                                 const TraceOptions& opt) {
  const Vec2 p0 = correct_to_slice(scene, face, seed.x(), seed.y(), t, opt);
  const FunnelPoint start = checked_point(scene, face, p0, t);
  ContactCurve c;
  c.t = t;
  c.chart_face = face;
  MarchResult fwd = march(scene, face, t, start, 1.0, opt);
  if (fwd.closed) {
    c.points.push_back(start);
    c.points.insert(c.points.end(), fwd.points.begin(), fwd.points.end());
    c.closed = true;
    c.u_winding = fwd.winding;
    return c;
  }
  MarchResult bwd = march(scene, face, t, start, -1.0, opt);
  c.points.assign(bwd.points.rbegin(), bwd.points.rend());
  c.points.push_back(start);
  c.points.insert(c.points.end(), fwd.points.begin(), fwd.points.end());
  return c;
}

std::vector<Vec2> slice_seeds(const SweptScene& scene, std::size_t face, double t, int n) {
  const ParamRect d = scene.face(face).surface->domain();
  const int nu = d.u_periodic ? n : n + 1;
  std::vector<double> us(nu), vs(n + 1);
  for (int i = 0; i < nu; ++i) us[i] = d.u0 + d.u_period() * i / n;
  for (int k = 0; k <= n; ++k) vs[k] = d.v0 + (d.v1 - d.v0) * k / n;
  std::vector<double> f(static_cast<std::size_t>(nu) * (n + 1));
  auto at = [&](int i, int k) -> double& { return f[static_cast<std::size_t>(i) * (n + 1) + k]; };
  for (int i = 0; i < nu; ++i)
    for (int k = 0; k <= n; ++k) at(i, k) = f_value(scene, face, us[i], vs[k], t);

  std::vector<Vec2> seeds;
  auto bisect = [&](Vec2 a, Vec2 b, double fa) {
    for (int it = 0; it < 40; ++it) {
      const Vec2 m = 0.5 * (a + b);
      const double fm = f_value(scene, face, m.x(), m.y(), t);
      if ((fm < 0) == (fa < 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    seeds.push_back(0.5 * (a + b));
  };
  for (int i = 0; i < nu; ++i) {
    const int i1 = (i + 1) % nu;
    const bool wrap = i + 1 == nu;
    if (!d.u_periodic && wrap) continue;
    for (int k = 0; k <= n; ++k) {
      const double a = at(i, k), b = at(i1, k);
      if ((a < 0) != (b < 0)) bisect({us[i], vs[k]}, {wrap ? us[0] + d.u_period() : us[i1], vs[k]}, a);
      if (k < n) {
        const double c = at(i, k + 1);
        if ((a < 0) != (c < 0)) bisect({us[i], vs[k]}, {us[i], vs[k + 1]}, a);
      }
    }
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Resampling and funnel assembly

ContactCurve resample_curve(const SweptScene& scene, const ContactCurve& c, std::size_t n,
                            std::optional<Vec2> start_hint) {
  const ParamRect dom = scene.face(c.chart_face).surface->domain();
  std::vector<Vec2> poly;
  for (const auto& p : c.points) poly.emplace_back(p.u, p.v);
  if (c.closed) poly.push_back(poly.front() + Vec2(c.u_winding * dom.u_period(), 0.0));
  std::vector<double> s(poly.size(), 0.0);
  for (std::size_t i = 1; i < poly.size(); ++i) s[i] = s[i - 1] + (poly[i] - poly[i - 1]).norm();
  const double L = s.back();
  if (poly.size() < 2 || L <= 0) throw SweepError(ErrorKind::Tracing, "cannot resample a degenerate curve");

  auto point_at = [&](double q) {
    if (c.closed) {
      q = std::fmod(q, L);
      if (q < 0) q += L;
    }
    q = std::clamp(q, 0.0, L);
    const auto it = std::upper_bound(s.begin(), s.end(), q);
    std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - s.begin(), 1), s.size() - 1);
    const double w = (q - s[i - 1]) / std::max(s[i] - s[i - 1], 1e-300);
    return Vec2(poly[i - 1] + w * (poly[i] - poly[i - 1]));
  };

  double offset = 0.0;
  if (c.closed && start_hint) {
    // Arc-length position of the polyline point nearest to the hint.
    double best = kInf;
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
      const Vec2 a = poly[i], b = poly[i + 1];
      Vec2 h = *start_hint;
      if (dom.u_periodic) h.x() -= dom.u_period() * std::round((h.x() - a.x()) / dom.u_period());
      const Vec2 ab = b - a;
      const double w = std::clamp((h - a).dot(ab) / std::max(ab.squaredNorm(), 1e-300), 0.0, 1.0);
      const double dist = (a + w * ab - h).norm();
      if (dist < best) {
        best = dist;
        offset = s[i] + w * (s[i + 1] - s[i]);
      }
    }
  }

  ContactCurve out;
  out.t = c.t;
  out.chart_face = c.chart_face;
  out.closed = c.closed;
  out.component = c.component;
  out.u_winding = c.u_winding;
  const double span = c.closed ? L / n : L / (n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    Vec2 q = point_at(offset + span * k);
    // Keep u continuous along a closed curve that started past the seam.
    if (c.closed && offset + span * k >= L) q.x() += c.u_winding * dom.u_period();
    const Vec2 lin = q;
    int it = newton_slice(scene, c.chart_face, c.t, q, 30);
    if (it < 0 || (q - lin).norm() > 0.5) throw SweepError(ErrorKind::Tracing, "resampled node failed to correct");
    // Boundary endpoints stay on the chart boundary.
    if (!c.closed && (k == 0 || k + 1 == n)) {
      if (!dom.contains(q.x(), q.y())) {
        q.y() = std::clamp(q.y(), dom.v0, dom.v1);
        if (auto ub = solve_on_boundary(scene, c.chart_face, c.t, q.y(), q.x())) q.x() = *ub;
      }
    }
    out.points.push_back(checked_point(scene, c.chart_face, q, c.t));
  }
  return out;
}

const ContactCurve* Funnel::curve(std::size_t slice, int component) const {
  for (const auto& c : slices.at(slice).curves)
    if (c.component == component) return &c;
  return nullptr;
}

std::size_t Funnel::point_count() const {
  std::size_t n = 0;
  for (const auto& s : slices)
    for (const auto& c : s.curves) n += c.points.size();
  return n;
}

namespace {

double curve_distance(const ParamRect& dom, const ContactCurve& a, const ContactCurve& b) {
  // Mean over a's nodes of the nearest node of b.
  double total = 0.0;
  for (const auto& p : a.points) {
    double best = kInf;
    for (const auto& q : b.points) best = std::min(best, wrapped_distance(dom, {p.u, p.v}, {q.u, q.v}));
    total += best;
  }
  return total / std::max<std::size_t>(a.points.size(), 1);
}

bool covered(const ParamRect& dom, const std::vector<ContactCurve>& curves, const Vec2& p, double radius) {
  for (const auto& c : curves)
    for (const auto& q : c.points)
      if (wrapped_distance(dom, p, {q.u, q.v}) < radius) return true;
  return false;
}

double median_step(const ContactCurve& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.points.size(); ++i)
    d.push_back(std::hypot(c.points[i].u - c.points[i - 1].u, c.points[i].v - c.points[i - 1].v));
  if (d.empty()) return 0.0;
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

}  // namespace

Funnel sample_funnel(const SweptScene& scene, int n_t, int n_p, const FunnelOptions& opt) {
  if (n_t < 2) throw SweepError(ErrorKind::Domain, "sample_funnel needs n_t >= 2");
  if (n_p < 8) throw SweepError(ErrorKind::Domain, "sample_funnel needs n_p >= 8");
  const Interval I = scene.interval();
  Funnel F;
  F.n_p = static_cast<std::size_t>(n_p);
  F.slices.resize(n_t);
  for (int i = 0; i < n_t; ++i) F.slices[i].t = i + 1 == n_t ? I.hi : I.lo + I.length() * i / (n_t - 1);

  for (std::size_t face : scene.chart_faces()) {
    const ParamRect dom = scene.face(face).surface->domain();
    std::vector<ContactCurve> prev_raw;
    std::vector<ContactCurve> prev_sampled;
    for (int i = 0; i < n_t; ++i) {
      FunnelSlice& slice = F.slices[i];
      const double t = slice.t;
      std::vector<ContactCurve> raw;
      std::vector<std::pair<Vec2, std::string>> failed;
      auto try_seed = [&](const Vec2& s, bool report) {
        if (covered(dom, raw, s, 2.0 * opt.trace.h_max)) return;
        try {
          const Vec2 p = correct_to_slice(scene, face, s.x(), s.y(), t, opt.trace);
          if (covered(dom, raw, p, 2.0 * opt.trace.h_max)) return;
          raw.push_back(trace_contact_curve(scene, face, t, p, opt.trace));
        } catch (const SweepError& e) {
          if (e.kind() == ErrorKind::DegenerateSlice) throw;
          if (report) failed.emplace_back(s, e.what());
        }
      };
      // Previous slice first, then the sign grid to catch births.
      for (const auto& c : prev_raw) {
        const std::size_t stride = std::max<std::size_t>(1, c.points.size() / 8);
        for (std::size_t k = 0; k < c.points.size(); k += stride) try_seed({c.points[k].u, c.points[k].v}, false);
      }
      for (const Vec2& s : slice_seeds(scene, face, t, opt.seed_grid)) try_seed(s, true);
      // Previous-slice seeds may simply be far from this slice; only grid seeds
      // (bracketed sign changes) that stay uncovered are worth reporting.
      for (const auto& [s, msg] : failed) {
        if (covered(dom, raw, s, 4.0 * opt.trace.h_max)) continue;
        std::ostringstream os;
        os << msg << " [seed " << s.x() << ", " << s.y() << "]";
        slice.errors.push_back(os.str());
      }

      // Link to the previous slice by nearest curve.
      std::vector<ContactCurve> sampled;
      std::vector<bool> prev_used(prev_sampled.size(), false);
      for (auto& c : raw) {
        const double thresh = 10.0 * std::max(median_step(c), 1e-3) + 10.0 * opt.trace.h_max;
        int match = -1;
        double best = kInf;
        for (std::size_t k = 0; k < prev_sampled.size(); ++k) {
          if (prev_used[k]) continue;
          const double dist = curve_distance(dom, c, prev_sampled[k]);
          if (dist < best) {
            best = dist;
            match = static_cast<int>(k);
          }
        }
        std::optional<Vec2> hint;
        if (match >= 0 && best < thresh) {
          prev_used[match] = true;
          c.component = prev_sampled[match].component;
          hint = Vec2(prev_sampled[match].points.front().u, prev_sampled[match].points.front().v);
        } else {
          c.component = F.n_components++;
          if (i > 0) F.events.push_back({ComponentEvent::Kind::Birth, c.component, static_cast<std::size_t>(i)});
        }
        ContactCurve r = resample_curve(scene, c, n_p, hint);
        if (!r.closed && hint) {
          // Open curves run along beta from one chart boundary to the other;
          // nothing to rotate, but keep the orientation of the previous slice.
          const auto& pv = prev_sampled[match].points;
          const double same = wrapped_distance(dom, {r.points.front().u, r.points.front().v}, {pv.front().u, pv.front().v});
          const double flip = wrapped_distance(dom, {r.points.back().u, r.points.back().v}, {pv.front().u, pv.front().v});
          if (flip < same) std::reverse(r.points.begin(), r.points.end());
        }
        if (hint && dom.u_periodic) {
          const double k = std::round((hint->x() - r.points.front().u) / dom.u_period());
          if (k != 0)
            for (auto& p : r.points) p.u += k * dom.u_period();
        }
        sampled.push_back(std::move(r));
      }
      for (std::size_t k = 0; k < prev_sampled.size(); ++k) {
        if (!prev_used[k]) F.events.push_back({ComponentEvent::Kind::Death, prev_sampled[k].component, static_cast<std::size_t>(i)});
      }
      std::sort(sampled.begin(), sampled.end(), [](const auto& a, const auto& b) { return a.component < b.component; });
      for (const auto& c : sampled) slice.curves.push_back(c);
      prev_raw = std::move(raw);
      prev_sampled = std::move(sampled);
    }
  }
  return F;
}

bool classify_endcap(const SweptScene& scene, std::size_t face, double u, double v, EndCap which) {
  const Interval I = scene.interval();
  if (which == EndCap::Left) return f_value(scene, face, u, v, I.lo) <= kFunnelTol;
  return f_value(scene, face, u, v, I.hi) >= -kFunnelTol;
}

// ---------------------------------------------------------------------------
// Edges and vertices

double edge_f(const SweptScene& scene, const EdgeCurve& edge, double s, double t) {
  const Vec2 uv = edge.at(s);
  return f_value(scene, edge.face, uv.x(), uv.y(), t);
}

namespace {

Vec3 edge_eval(const SweptScene& scene, const EdgeCurve& e, double s, double t) {
  const Vec2 uv = e.at(s);
  const SweepJet j = sweep_jet(scene, e.face, uv.x(), uv.y(), t);
  return {j.f, j.grad.x() * e.direction.x() + j.grad.y() * e.direction.y(), j.grad.z()};
}

}  // namespace

std::vector<std::vector<Vec2>> trace_edge_funnel(const SweptScene& scene, const EdgeCurve& edge, int grid) {
  const Interval I = scene.interval();
  const Interval S = edge.s_range;
  const double sp = S.length();
  std::vector<std::vector<Vec2>> out;
  auto covered_2d = [&](const Vec2& p) {
    for (const auto& poly : out)
      for (const auto& q : poly) {
        double ds = p.x() - q.x();
        if (edge.periodic) ds -= sp * std::round(ds / sp);
        if (std::hypot(ds, p.y() - q.y()) < 0.02 * std::max(sp, I.length())) return true;
      }
    return false;
  };
  auto correct = [&](Vec2 p) -> std::optional<Vec2> {
    for (int it = 0; it < 30; ++it) {
      const Vec3 e = edge_eval(scene, edge, p.x(), p.y());
      if (std::abs(e.x()) <= 1e-13) return p;
      const Vec2 g(e.y(), e.z());
      if (g.squaredNorm() < 1e-20) {
        throw SweepError(ErrorKind::NonGeneric, "(f^e_s, f^e_t) vanishes on the edge funnel");
      }
      p -= e.x() * g / g.squaredNorm();
      p.y() = I.clamp(p.y());
    }
    if (std::abs(edge_eval(scene, edge, p.x(), p.y()).x()) <= kFunnelTol) return p;
    return std::nullopt;
  };
  const double h = 0.01 * std::max(sp, I.length());
  bool all_zero = true;
  for (int a = 0; a <= 4 && all_zero; ++a)
    for (int b = 0; b < grid && all_zero; ++b)
      all_zero = std::abs(edge_f(scene, edge, S.lo + sp * b / grid, I.lo + I.length() * a / 4)) <= 1e-12;
  if (all_zero) throw SweepError(ErrorKind::NonGeneric, "f^e vanishes identically (general position violated)");
  for (int a = 0; a < grid; ++a) {
    const double t = I.lo + I.length() * (a + 0.5) / grid;
    for (int b = 0; b < grid; ++b) {
      const double s0 = S.lo + sp * b / grid, s1 = S.lo + sp * (b + 1) / grid;
      const double f0 = edge_f(scene, edge, s0, t), f1 = edge_f(scene, edge, s1, t);
      if ((f0 < 0) == (f1 < 0)) continue;
      auto p0 = correct(Vec2(s0 - f0 * (s1 - s0) / (f1 - f0), t));
      if (!p0 || covered_2d(*p0)) continue;
      // March both ways along (-f_t, f_s).
      std::vector<Vec2> poly{*p0};
      for (double dir : {1.0, -1.0}) {
        std::vector<Vec2> part;
        Vec2 cur = *p0;
        for (int k = 0; k < 100000; ++k) {
          const Vec3 e = edge_eval(scene, edge, cur.x(), cur.y());
          Vec2 tan(-e.z(), e.y());
          tan = dir * tan.normalized();
          const Vec2 pred = cur + h * tan;
          if (pred.y() < I.lo || pred.y() > I.hi) {
            // Finish exactly on the end slice.
            const double tb = pred.y() < I.lo ? I.lo : I.hi;
            const double w = (tb - cur.y()) / (pred.y() - cur.y());
            double sb = cur.x() + w * (pred.x() - cur.x());
            for (int it = 0; it < 30; ++it) {
              const Vec3 e = edge_eval(scene, edge, sb, tb);
              if (std::abs(e.x()) <= 1e-13 || std::abs(e.y()) < 1e-14) break;
              sb -= e.x() / e.y();
            }
            if (std::abs(edge_f(scene, edge, sb, tb)) <= kFunnelTol) part.emplace_back(sb, tb);
            break;
          }
          if (!edge.periodic && (pred.x() < S.lo || pred.x() > S.hi)) break;
          auto next = correct(pred);
          if (!next) break;
          part.push_back(*next);
          cur = *next;
          double ds = cur.x() - p0->x();
          if (edge.periodic) ds -= sp * std::round(ds / sp);
          if (k > 4 && std::hypot(ds, cur.y() - p0->y()) < 1.5 * h) {
            dir = 2;  // closed
            break;
          }
        }
        if (dir > 1.5) {
          poly.insert(poly.end(), part.begin(), part.end());
          break;
        }
        if (dir > 0) poly.insert(poly.end(), part.begin(), part.end());
        else poly.insert(poly.begin(), part.rbegin(), part.rend());
      }
      out.push_back(std::move(poly));
    }
  }
  return out;
}

std::vector<double> vertex_times(const SweptScene& scene, const SolidVertex& vertex, int grid) {
  const Interval I = scene.interval();
  auto fz = [&](double t) { return f_value(scene, vertex.face, vertex.u, vertex.v, t); };
  std::vector<double> ts(grid + 1), fs(grid + 1);
  bool all_zero = true;
  for (int i = 0; i <= grid; ++i) {
    ts[i] = i == grid ? I.hi : I.lo + I.length() * i / grid;
    fs[i] = fz(ts[i]);
    if (std::abs(fs[i]) > 1e-12) all_zero = false;
  }
  if (all_zero) throw SweepError(ErrorKind::NonGeneric, "f^z vanishes identically (general position violated)");
  std::vector<double> roots;
  for (int i = 0; i < grid; ++i) {
    if (fs[i] == 0.0) {
      roots.push_back(ts[i]);
      continue;
    }
    if ((fs[i] < 0) == (fs[i + 1] < 0) || fs[i + 1] == 0.0) continue;
    double a = ts[i], b = ts[i + 1], fa = fs[i];
    while (b - a > 1e-10) {
      const double m = 0.5 * (a + b);
      const double fm = fz(m);
      if ((fm < 0) == (fa < 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  if (fs[grid] == 0.0) roots.push_back(ts[grid]);
  return roots;
}

}  // namespace sweep
