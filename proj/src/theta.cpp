#include "sweep/theta.hpp"

#include "sweep/parallel.hpp"

#include <algorithm>
#include <sstream>

namespace sweep {

namespace {

LM solve_lm(const SweepJet& j) {
  Mat2 G;
  G << j.sigma_u.dot(j.sigma_u), j.sigma_u.dot(j.sigma_v), j.sigma_v.dot(j.sigma_u), j.sigma_v.dot(j.sigma_v);
  const Vec2 r(j.sigma_u.dot(j.sigma_t), j.sigma_v.dot(j.sigma_t));
  const Vec2 x = G.fullPivLu().solve(r);
  LM out;
  out.l = x.x();
  out.m = x.y();
  out.residual = (j.sigma_t - out.l * j.sigma_u - out.m * j.sigma_v).norm();
  return out;
}

double theta_from(const SweepJet& j, const LM& lm) {
  return lm.l * j.grad.x() + lm.m * j.grad.y() - j.grad.z();
}

SweepJet jet_at(const SweptScene& scene, const FunnelPoint& p) { return sweep_jet(scene, p.face, p.u, p.v, p.t); }

void require_on_funnel(const LM& lm, const FunnelPoint& p) {
  if (lm.residual > 1e-7) {
    std::ostringstream os;
    os << "|σ_t - l σ_u - m σ_v| = " << lm.residual << " at (" << p.u << ", " << p.v << ", " << p.t << ")";
    throw SweepError(ErrorKind::NotOnFunnel, os.str());
  }
}

// Orthonormal pair spanning the plane orthogonal to n.
std::pair<Vec3, Vec3> plane_basis(const Vec3& n) {
  const Vec3 a = n.normalized();
  const Vec3 seed = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = (seed - seed.dot(a) * a).normalized();
  return {e1, a.cross(e1)};
}

}  // namespace

const char* to_string(ThetaRoute r) {
  switch (r) {
    case ThetaRoute::CoefficientForm: return "coefficient-form";
    case ThetaRoute::FrameDeterminant: return "frame-determinant";
    case ThetaRoute::FallbackFt: return "fallback-ft";
  }
  return "?";
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Decomposable: return "Decomposable";
    case Verdict::NonDecomposable: return "NonDecomposable";
    case Verdict::Marginal: return "Marginal";
  }
  return "?";
}

LM lm_coefficients(const SweptScene& scene, const FunnelPoint& p) {
  const LM lm = solve_lm(jet_at(scene, p));
  require_on_funnel(lm, p);
  return lm;
}

ThetaSample theta_sample(const SweptScene& scene, const FunnelPoint& p) {
  const SweepJet j = jet_at(scene, p);
  const LM lm = solve_lm(j);
  require_on_funnel(lm, p);
  ThetaSample s;
  s.point = p;
  s.l = lm.l;
  s.m = lm.m;
  if (std::hypot(j.grad.x(), j.grad.y()) < 1e-8) {
    s.theta = -j.grad.z();
    s.route = ThetaRoute::FallbackFt;
  } else {
    s.theta = theta_from(j, lm);
  }
  return s;
}

double theta(const SweptScene& scene, const FunnelPoint& p) { return theta_sample(scene, p).theta; }

FrameTheta theta_via_frames(const SweptScene& scene, const FunnelPoint& p) {
  const SweepJet j = jet_at(scene, p);
  require_on_funnel(solve_lm(j), p);
  const double fu = j.grad.x(), fv = j.grad.y(), ft = j.grad.z();
  const double q = fu * fu + fv * fv;
  if (std::sqrt(q) < 1e-8) throw SweepError(ErrorKind::DegenerateSlice, "(f_u, f_v) vanishes; use the -f_t route");
  const Vec3 alpha(-fu * ft, -fv * ft, q);
  const Vec3 beta(-fv, fu, 0.0);
  Eigen::Matrix<double, 3, 3> J;
  J << j.sigma_u, j.sigma_v, j.sigma_t;
  Eigen::Matrix<double, 3, 2> B;
  B << j.sigma_u, j.sigma_v;
  Eigen::Matrix<double, 3, 2> img;
  img << J * alpha, J * beta;
  FrameTheta out;
  out.D = (B.transpose() * B).fullPivLu().solve(B.transpose() * img);
  out.theta = out.D.determinant() / q;
  return out;
}

double theta_closed_form(const SweptScene& scene, const FunnelPoint& p) {
  const SweepJet j = jet_at(scene, p);
  const LM lm = solve_lm(j);
  require_on_funnel(lm, p);
  const Vec3& V = j.sigma_t;
  const Vec3 sigma_tt = j.m.ddA * j.s.S + j.m.ddb;
  // A'(t0) of the motion re-based to the identity at t0.
  const Mat3 dA0 = j.m.dA * j.m.A.transpose();
  const double kappa = normal_curvature(j.s, j.d, Vec2(lm.l, lm.m));
  return (-sigma_tt + 2.0 * dA0 * V).dot(j.N) + kappa * V.squaredNorm();
}

double theta_extended(const SweptScene& scene, std::size_t face, double u, double v, double t, bool extrapolate) {
  const SweepJet j = sweep_jet(scene, face, u, v, t, extrapolate);
  return theta_from(j, solve_lm(j));
}

Vec3 theta_gradient(const SweptScene& scene, std::size_t face, double u, double v, double t, double h) {
  auto th = [&](double a, double b, double c) { return theta_extended(scene, face, a, b, c, true); };
  return {(th(u + h, v, t) - th(u - h, v, t)) / (2 * h), (th(u, v + h, t) - th(u, v - h, t)) / (2 * h),
          (th(u, v, t + h) - th(u, v, t - h)) / (2 * h)};
}

Vec2 funnel_immersion_singular_values(const SweptScene& scene, const FunnelPoint& p) {
  const SweepJet j = jet_at(scene, p);
  const auto [e1, e2] = plane_basis(j.grad);
  Eigen::Matrix3d J;
  J << j.sigma_u, j.sigma_v, j.sigma_t;
  Eigen::Matrix<double, 3, 2> M;
  M << J * e1, J * e2;
  return Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>>(M).singularValues();
}

LambdaValue lambda_at(const SweptScene& scene, const FunnelPoint& p, double t, bool extrapolate) {
  const MotionJet m = extrapolate ? scene.motion().jet_unchecked(t) : scene.motion().jet(t);
  const Vec3 y_bar = m.A.transpose() * (p.sigma - m.b);
  const Surface& s = *scene.face(p.face).surface;
  const Projection pr = project_to_surface(s, y_bar, p.u, p.v);
  return {pr.signed_distance, Vec2(pr.u, pr.v)};
}

double lambda(const SweptScene& scene, const FunnelPoint& p, double t) { return lambda_at(scene, p, t).lambda; }

ThetaCheck theta_fd_check(const SweptScene& scene, const FunnelPoint& p, double h) {
  ThetaCheck c;
  const ThetaSample ts = theta_sample(scene, p);
  c.theta_analytic = ts.theta;
  c.theta_frames = std::hypot(p.grad.x(), p.grad.y()) < 1e-8 ? std::nan("") : theta_via_frames(scene, p).theta;
  c.theta_closed = theta_closed_form(scene, p);
  const LambdaValue lp = lambda_at(scene, p, p.t + h, true);
  const LambdaValue l0 = lambda_at(scene, p, p.t, true);
  const LambdaValue lm = lambda_at(scene, p, p.t - h, true);
  c.lambda_second_fd = (lp.lambda - 2.0 * l0.lambda + lm.lambda) / (h * h);
  for (double w : scene.face(p.face).surface->v_breaks()) {
    const double side = p.v - w;
    if (std::abs(side) < 1e-12 || (lp.foot.y() - w) * side <= 0 || (lm.foot.y() - w) * side <= 0) {
      c.smooth_stencil = false;
    }
  }
  c.abs_diff = std::max(std::abs(c.theta_analytic - c.lambda_second_fd), std::abs(c.theta_closed - c.lambda_second_fd));
  if (std::isfinite(c.theta_frames)) c.abs_diff = std::max(c.abs_diff, std::abs(c.theta_frames - c.lambda_second_fd));
  return c;
}

// ---------------------------------------------------------------------------
// F⁰ tracing

namespace {

struct ZeroEval {
  double f = 0.0, th = 0.0;
  Vec3 gf, gth;
};

ZeroEval zero_eval(const SweptScene& scene, std::size_t face, const Vec3& q, double h) {
  const SweepJet j = sweep_jet(scene, face, q.x(), q.y(), q.z(), true);
  ZeroEval e;
  e.f = j.f;
  e.th = theta_from(j, solve_lm(j));
  e.gf = j.grad;
  e.gth = theta_gradient(scene, face, q.x(), q.y(), q.z(), h);
  return e;
}

bool in_chart(const ParamRect& d, const Vec3& q) { return d.contains(q.x(), q.y()); }

// Min-norm Newton on (f, θ) = 0; `fixed_t` freezes t (2x2 solve in u, v).
int newton_zero(const SweptScene& scene, std::size_t face, Vec3& q, const ZeroTraceOptions& opt, bool fixed_t) {
  const ParamRect dom = scene.face(face).surface->domain();
  for (int it = 0; it < opt.max_newton; ++it) {
    if (!in_chart(dom, q)) return -1;
    const ZeroEval e = zero_eval(scene, face, q, opt.grad_step);
    if (!std::isfinite(e.f) || !std::isfinite(e.th)) return -1;
    if (std::abs(e.f) <= 1e-12 && std::abs(e.th) <= 1e-10) return it;
    Vec3 step;
    if (fixed_t) {
      Mat2 J;
      J << e.gf.x(), e.gf.y(), e.gth.x(), e.gth.y();
      if (std::abs(J.determinant()) < 1e-14) return -1;
      const Vec2 d = -J.inverse() * Vec2(e.f, e.th);
      step = Vec3(d.x(), d.y(), 0.0);
    } else {
      Eigen::Matrix<double, 2, 3> J;
      J.row(0) = e.gf.transpose();
      J.row(1) = e.gth.transpose();
      const Mat2 JJ = J * J.transpose();
      if (std::abs(JJ.determinant()) < 1e-20) return -1;
      step = -J.transpose() * JJ.inverse() * Vec2(e.f, e.th);
    }
    if (step.norm() > 0.5) step *= 0.5 / step.norm();
    q += step;
    if (step.norm() < 1e-15) break;
  }
  if (!in_chart(dom, q)) return -1;
  const SweepJet j = sweep_jet(scene, face, q.x(), q.y(), q.z(), true);
  const double th = theta_from(j, solve_lm(j));
  return std::abs(j.f) <= kFunnelTol && std::abs(th) <= 1e-8 ? opt.max_newton : -1;
}

Vec3 zero_tangent(const ZeroEval& e) {
  const Vec3 c = e.gf.cross(e.gth);
  if (c.norm() < 1e-7) {
    throw SweepError(ErrorKind::NonGeneric, "∇θ is parallel to ∇f (or vanishes) on F⁰");
  }
  return c.normalized();
}

ZeroNode make_node(const SweptScene& scene, std::size_t chart_face, const Vec3& q, const ZeroTraceOptions& opt) {
  ZeroNode n;
  const SweepJet j = sweep_jet(scene, chart_face, q.x(), q.y(), q.z(), true);
  const LM lm = solve_lm(j);
  n.point.face = scene.face_at(chart_face, q.x(), q.y());
  n.point.u = q.x();
  n.point.v = q.y();
  n.point.t = q.z();
  n.point.f = j.f;
  n.point.grad = j.grad;
  n.point.sigma = j.sigma;
  n.point.normal = j.N;
  n.point.velocity = j.sigma_t;
  n.l = lm.l;
  n.m = lm.m;
  n.theta = theta_from(j, lm);
  n.grad_theta = theta_gradient(scene, chart_face, q.x(), q.y(), q.z(), opt.grad_step);
  return n;
}

double phi_value(const ZeroNode& n) {
  return Vec3(n.l, n.m, -1.0).cross(n.tangent).dot(n.point.grad);
}

double wrapped_dist(const ParamRect& d, const Vec3& a, const Vec3& b) {
  Vec3 diff = a - b;
  if (d.u_periodic) diff.x() -= d.u_period() * std::round(diff.x() / d.u_period());
  return diff.norm();
}

struct ZeroMarch {
  std::vector<Vec3> points;
  bool closed = false;
};

ZeroMarch march_zero(const SweptScene& scene, std::size_t face, const Vec3& start, double dir,
                     const ZeroTraceOptions& opt) {
  const ParamRect dom = scene.face(face).surface->domain();
  const Interval I = scene.interval();
  ZeroMarch out;
  Vec3 cur = start;
  Vec3 tan = dir * zero_tangent(zero_eval(scene, face, cur, opt.grad_step));
  double h = opt.h_init, travelled = 0.0;
  while (out.points.size() < opt.max_nodes) {
    const Vec3 pred = cur + h * tan;
    if (!dom.v_periodic && (pred.y() < dom.v0 || pred.y() > dom.v1)) return out;
    if (pred.z() < I.lo || pred.z() > I.hi) {
      const double tb = pred.z() < I.lo ? I.lo : I.hi;
      Vec3 q = cur + (tb - cur.z()) / (pred.z() - cur.z()) * (pred - cur);
      q.z() = tb;
      if (newton_zero(scene, face, q, opt, true) >= 0 && (q - cur).norm() <= 2.0 * h) out.points.push_back(q);
      return out;
    }
    Vec3 next = pred;
    const int iters = newton_zero(scene, face, next, opt, false);
    bool ok = iters >= 0 && (next - pred).norm() <= 0.5 * h;
    Vec3 new_tan = tan;
    if (ok) {
      new_tan = zero_tangent(zero_eval(scene, face, next, opt.grad_step));
      if (new_tan.dot(tan) < 0) new_tan = -new_tan;
      ok = new_tan.dot(tan) > std::cos(0.35);
    }
    if (!ok) {
      h *= 0.5;
      if (h < opt.h_min) {
        std::ostringstream os;
        os << "F⁰ step underflow near (" << cur.x() << ", " << cur.y() << ", " << cur.z() << ")";
        throw SweepError(ErrorKind::Tracing, os.str());
      }
      continue;
    }
    travelled += (next - cur).norm();
    out.points.push_back(next);
    cur = next;
    tan = new_tan;
    if (travelled > 4.0 * opt.h_max && wrapped_dist(dom, cur, start) < 1.5 * h) {
      Vec3 to_start = start - cur;
      if (dom.u_periodic) to_start.x() -= dom.u_period() * std::round(to_start.x() / dom.u_period());
      if (to_start.dot(tan) > -1e-12) {
        out.closed = true;
        return out;
      }
    }
    if (iters <= 3) h = std::min(h * 1.5, opt.h_max);
  }
  throw SweepError(ErrorKind::Tracing, "F⁰ curve exceeded the node budget");
}

ThetaZeroCurve trace_zero_from(const SweptScene& scene, std::size_t face, const Vec3& q0,
                               const ZeroTraceOptions& opt) {
  ThetaZeroCurve c;
  c.chart_face = face;
  std::vector<Vec3> pts;
  ZeroMarch fwd = march_zero(scene, face, q0, 1.0, opt);
  if (fwd.closed) {
    pts.push_back(q0);
    pts.insert(pts.end(), fwd.points.begin(), fwd.points.end());
    c.closed = true;
  } else {
    ZeroMarch bwd = march_zero(scene, face, q0, -1.0, opt);
    pts.assign(bwd.points.rbegin(), bwd.points.rend());
    pts.push_back(q0);
    pts.insert(pts.end(), fwd.points.begin(), fwd.points.end());
  }
  double s = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    ZeroNode n = make_node(scene, face, pts[k], opt);
    if (k > 0) s += (pts[k] - pts[k - 1]).norm();
    n.s = s;
    n.tangent = zero_tangent({n.point.f, n.theta, n.point.grad, n.grad_theta});
    // Orient along the polyline.
    const Vec3 chord = k + 1 < pts.size() ? pts[k + 1] - pts[k] : pts[k] - pts[k - 1];
    if (n.tangent.dot(chord) < 0) n.tangent = -n.tangent;
    n.phi = phi_value(n);
    c.nodes.push_back(n);
  }
  return c;
}

// Point on the curve at arclength s: interpolated between nodes, then corrected.
ZeroNode curve_node_at(const SweptScene& scene, const ThetaZeroCurve& c, double s, const ZeroTraceOptions& opt) {
  const auto& nd = c.nodes;
  const ParamRect dom = scene.face(c.chart_face).surface->domain();
  const double total = nd.back().s;
  Vec3 a, b;
  double w = 0.0;
  if (c.closed && (s > total || s < 0.0)) {
    // Closing segment, last node to first node.
    Vec3 first = nd.front().point.param();
    const Vec3 last = nd.back().point.param();
    if (dom.u_periodic) first.x() += dom.u_period() * std::round((last.x() - first.x()) / dom.u_period());
    const double len = (first - last).norm();
    double r = s > total ? s - total : s + len;
    a = last;
    b = first;
    w = len > 0 ? std::clamp(r / len, 0.0, 1.0) : 0.0;
  } else {
    s = std::clamp(s, 0.0, total);
    auto it = std::upper_bound(nd.begin(), nd.end(), s, [](double x, const ZeroNode& n) { return x < n.s; });
    std::size_t k = it == nd.begin() ? 0 : static_cast<std::size_t>(it - nd.begin()) - 1;
    if (k + 1 >= nd.size()) k = nd.size() - 2;
    a = nd[k].point.param();
    b = nd[k + 1].point.param();
    const double len = nd[k + 1].s - nd[k].s;
    w = len > 0 ? (s - nd[k].s) / len : 0.0;
  }
  Vec3 q = a + w * (b - a);
  const Vec3 chord = b - a;
  if (newton_zero(scene, c.chart_face, q, opt, false) < 0) {
    throw SweepError(ErrorKind::Tracing, "could not evaluate the F⁰ curve between nodes");
  }
  ZeroNode n = make_node(scene, c.chart_face, q, opt);
  n.s = s;
  n.tangent = zero_tangent({n.point.f, n.theta, n.point.grad, n.grad_theta});
  if (n.tangent.dot(chord) < 0) n.tangent = -n.tangent;
  n.phi = phi_value(n);
  return n;
}

}  // namespace

std::optional<Vec3> correct_to_theta_zero(const SweptScene& scene, std::size_t face, const Vec3& q,
                                          const ZeroTraceOptions& opt) {
  Vec3 p = q;
  if (newton_zero(scene, face, p, opt, false) < 0) return std::nullopt;
  if (!scene.interval().contains(p.z(), 1e-12)) return std::nullopt;
  return p;
}

double phi(const SweptScene& scene, const ThetaZeroCurve& curve, double s) {
  return curve_node_at(scene, curve, s, {}).phi;
}

ZeroNode zero_curve_node(const SweptScene& scene, const ThetaZeroCurve& curve, double s) {
  return curve_node_at(scene, curve, s, {});
}

std::vector<PhiRoot> phi_roots(const SweptScene& scene, const ThetaZeroCurve& curve) {
  std::vector<PhiRoot> roots;
  const auto& nd = curve.nodes;
  if (nd.size() < 2) return roots;
  double scale = 0.0;
  for (const auto& n : nd) scale = std::max(scale, Vec3(n.l, n.m, -1.0).norm() * n.point.grad.norm());
  const double noise = 1e-9 * std::max(scale, 1.0);
  const ZeroTraceOptions opt;
  auto phi_at = [&](double s) { return curve_node_at(scene, curve, s, opt).phi; };
  const std::size_t segs = curve.closed ? nd.size() : nd.size() - 1;
  const double total = nd.back().s;
  double closing = 0.0;
  if (curve.closed) {
    const ParamRect dom = scene.face(curve.chart_face).surface->domain();
    closing = wrapped_dist(dom, nd.back().point.param(), nd.front().point.param());
  }
  for (std::size_t k = 0; k < segs; ++k) {
    const bool wrap = k + 1 == nd.size();
    const double pa = nd[k].phi, pb = wrap ? nd[0].phi : nd[k + 1].phi;
    if (!(pa * pb < 0) || std::max(std::abs(pa), std::abs(pb)) <= noise) continue;
    double a = nd[k].s, b = wrap ? total + closing : nd[k + 1].s, fa = pa;
    while (b - a > 1e-8) {
      const double m = 0.5 * (a + b);
      const double fm = phi_at(m);
      if ((fm < 0) == (fa < 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    PhiRoot r;
    r.s = 0.5 * (a + b);
    r.param = curve_node_at(scene, curve, r.s, opt).point.param();
    const Vec2 w = scene.face(curve.chart_face).surface->domain().wrap(r.param.x(), r.param.y());
    r.param.head<2>() = w;
    const double d = 1e-4;
    r.phi_prime = (phi_at(r.s + d) - phi_at(r.s - d)) / (2 * d);
    r.sign = r.phi_prime > 0 ? 1 : (r.phi_prime < 0 ? -1 : 0);
    roots.push_back(r);
  }
  return roots;
}

std::vector<ThetaZeroCurve> trace_theta_zero(const SweptScene& scene, const Funnel& funnel,
                                             const ZeroTraceOptions& opt) {
  const ThetaField th = theta_field(scene, funnel);
  // Seeds: θ sign changes between neighbouring funnel samples, within and across slices.
  std::vector<std::pair<std::size_t, Vec3>> seeds;
  auto add_seed = [&](const FunnelPoint& a, double ta, const FunnelPoint& b, double tb) {
    if (!(ta * tb < 0)) return;
    const double w = ta / (ta - tb);
    Vec3 pb = b.param();
    const ParamRect dom = scene.face(a.face).surface->domain();
    if (dom.u_periodic) pb.x() -= dom.u_period() * std::round((pb.x() - a.u) / dom.u_period());
    seeds.emplace_back(a.face, a.param() + w * (pb - a.param()));
  };
  for (std::size_t i = 0; i < funnel.slices.size(); ++i) {
    const auto& sl = funnel.slices[i];
    for (std::size_t c = 0; c < sl.curves.size(); ++c) {
      const auto& pts = sl.curves[c].points;
      for (std::size_t k = 0; k + 1 < pts.size(); ++k) add_seed(pts[k], th[i][c][k], pts[k + 1], th[i][c][k + 1]);
      if (sl.curves[c].closed && pts.size() > 2) add_seed(pts.back(), th[i][c].back(), pts[0], th[i][c][0]);
      if (i + 1 < funnel.slices.size()) {
        const auto& nx = funnel.slices[i + 1];
        for (std::size_t c2 = 0; c2 < nx.curves.size(); ++c2) {
          if (nx.curves[c2].component != sl.curves[c].component) continue;
          const auto& q = nx.curves[c2].points;
          for (std::size_t k = 0; k < std::min(pts.size(), q.size()); ++k)
            add_seed(pts[k], th[i][c][k], q[k], th[i + 1][c2][k]);
        }
      }
    }
  }
  std::vector<ThetaZeroCurve> curves;
  for (const auto& [face, seed] : seeds) {
    std::size_t chart = face;
    for (std::size_t cf : scene.chart_faces())
      if (scene.face(cf).surface == scene.face(face).surface) chart = cf;
    const ParamRect dom = scene.face(chart).surface->domain();
    auto q = correct_to_theta_zero(scene, chart, seed, opt);
    if (!q) continue;
    // Seeds on an end slice stay on it.
    const Interval I = scene.interval();
    if (q->z() < I.lo + 1e-9 || q->z() > I.hi - 1e-9) {
      Vec3 r = *q;
      r.z() = I.clamp(r.z());
      if (newton_zero(scene, chart, r, opt, true) < 0) continue;
      q = r;
    }
    bool covered = false;
    for (const auto& c : curves) {
      for (const auto& n : c.nodes) {
        if (wrapped_dist(dom, n.point.param(), *q) < 2.0 * opt.h_max) {
          covered = true;
          break;
        }
      }
      if (covered) break;
    }
    if (covered) continue;
    try {
      ThetaZeroCurve c = trace_zero_from(scene, chart, *q, opt);
      c.roots = phi_roots(scene, c);
      double phimax = 0.0, scale = 0.0;
      for (const auto& n : c.nodes) {
        phimax = std::max(phimax, std::abs(n.phi));
        scale = std::max(scale, Vec3(n.l, n.m, -1.0).norm() * n.point.grad.norm());
      }
      if (phimax <= 1e-9 * std::max(scale, 1.0)) {
        c.phi_vanishes = true;
        c.diagnostics.push_back("phi vanishes identically: the curve maps to a single cusp point");
      } else if (c.roots.empty()) {
        c.diagnostics.push_back("suspicious: no phi sign change on a curve bounding a theta < 0 region");
      }
      for (const auto& r : c.roots) {
        if (std::abs(r.phi_prime) < 1e-6) c.diagnostics.push_back("phi' ~ 0 at a root");
      }
      curves.push_back(std::move(c));
    } catch (const SweepError& e) {
      if (e.kind() == ErrorKind::NonGeneric) throw;
    }
  }
  return curves;
}

// ---------------------------------------------------------------------------

ThetaField theta_field(const SweptScene& scene, const Funnel& funnel, int threads) {
  ThetaField out(funnel.slices.size());
  parallel_for(funnel.slices.size(), threads, [&](std::size_t i) {
    const auto& sl = funnel.slices[i];
    out[i].resize(sl.curves.size());
    for (std::size_t c = 0; c < sl.curves.size(); ++c) {
      for (const auto& p : sl.curves[c].points) out[i][c].push_back(theta(scene, p));
    }
  });
  return out;
}

SweepClassification classify_sweep(const SweptScene& scene, const Funnel& funnel, double eps, int threads) {
  SweepClassification r;
  r.theta = theta_field(scene, funnel, threads);
  for (const auto& sl : r.theta)
    for (const auto& c : sl)
      for (double t : c) {
        r.theta_min = std::min(r.theta_min, t);
        r.theta_max = std::max(r.theta_max, t);
        if (t > eps) ++r.n_plus;
        else if (t < -eps) ++r.n_minus;
        else ++r.n_zero;
      }
  if (r.theta_min > eps) r.verdict = Verdict::Decomposable;
  else if (r.theta_min < -eps) r.verdict = Verdict::NonDecomposable;
  else r.verdict = Verdict::Marginal;
  return r;
}

}  // namespace sweep
