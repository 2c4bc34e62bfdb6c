#include "sweep/procedural.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace sweep {

namespace {

// Ē and its derivatives at (p, t).
struct SeedWorld {
  Vec3 E, Ep, Ept, Epp, Et;
};

SeedWorld seed_world(const ProceduralEnvelope& env, double p, double t) {
  const SeedSurface::Jet x = env.seed().jet(p, t);
  const MotionJet m = env.scene().motion().jet(t);
  SeedWorld w;
  w.E = m.A * x.X + m.b;
  w.Ep = m.A * x.Xp;
  w.Epp = m.A * x.Xpp;
  w.Et = m.dA * x.X + m.db + m.A * x.Xt;
  w.Ept = m.dA * x.Xp + m.A * x.Xpt;
  return w;
}

// Resamples a slice curve to n nodes evenly spaced in body arclength, starting
// at the point nearest the previous slice's start and running the same way.
// Parameter-space spacing is distorted near chart poles, which lets funnel node
// indices slide along the curve from one slice to the next.
std::vector<Vec2> realign(const SweptScene& scene, const ContactCurve& c, std::size_t n, const Vec3* prev_start,
                          const Vec3& prev_dir) {
  const Surface& surface = *scene.face(c.chart_face).surface;
  const ParamRect dom = surface.domain();
  TraceOptions fine;
  fine.h_max = 1e-2;
  fine.h_init = 5e-3;
  ContactCurve d;
  try {
    d = trace_contact_curve(scene, c.chart_face, c.t, Vec2(c.points[0].u, c.points[0].v), fine);
  } catch (const SweepError&) {
    d = c;
  }
  std::vector<Vec2> uv;
  for (const auto& q : d.points) uv.emplace_back(q.u, q.v);
  if (d.closed) uv.push_back(uv.front() + Vec2(d.u_winding * dom.u_period(), 0.0));
  std::vector<Vec3> X;
  for (const auto& q : uv) X.push_back(surface.jet(q.x(), q.y()).S);
  std::vector<double> s(X.size(), 0.0);
  for (std::size_t k = 1; k < X.size(); ++k) s[k] = s[k - 1] + (X[k] - X[k - 1]).norm();
  const double L = s.back();

  auto at = [&](double q) {
    if (d.closed) {
      q = std::fmod(q, L);
      if (q < 0) q += L;
    }
    q = std::clamp(q, 0.0, L);
    std::size_t k = std::upper_bound(s.begin(), s.end(), q) - s.begin();
    k = std::clamp<std::size_t>(k, 1, s.size() - 1);
    const double w = (q - s[k - 1]) / std::max(s[k] - s[k - 1], 1e-300);
    return std::pair<Vec2, Vec3>(uv[k - 1] + w * (uv[k] - uv[k - 1]), X[k - 1] + w * (X[k] - X[k - 1]));
  };

  double offset = 0.0;
  bool reverse = false;
  if (prev_start) {
    if (d.closed) {
      double best = kInf;
      for (std::size_t k = 0; k + 1 < X.size(); ++k) {
        const Vec3 ab = X[k + 1] - X[k];
        const double w = std::clamp((*prev_start - X[k]).dot(ab) / std::max(ab.squaredNorm(), 1e-300), 0.0, 1.0);
        const double dist = (X[k] + w * ab - *prev_start).norm();
        if (dist < best) {
          best = dist;
          offset = s[k] + w * (s[k + 1] - s[k]);
        }
      }
      reverse = (at(offset + 1e-3 * L).second - at(offset).second).dot(prev_dir) < 0;
    } else {
      reverse = (X.back() - *prev_start).norm() < (X.front() - *prev_start).norm();
    }
  }
  const double span = d.closed ? L / n : L / (n - 1);
  std::vector<Vec2> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double q = reverse ? offset - span * k : offset + span * k;
    if (!d.closed && reverse) q = L - span * k;
    Vec2 p = at(q).first;
    try {
      p = correct_to_slice(scene, c.chart_face, p.x(), p.y(), c.t);
    } catch (const SweepError&) {
    }
    out[k] = p;
  }
  return out;
}

void check_inside(const SeedSurface& sd, double p, double t) {
  if (!sd.interval.contains(t, 1e-12)) throw SweepError(ErrorKind::Domain, "t outside the seed interval");
  if (!sd.closed && (p < -1e-12 || p > 1 + 1e-12)) throw SweepError(ErrorKind::Domain, "p outside [0, 1]");
}

}  // namespace

SeedSurface::Jet SeedSurface::jet(double p, double t) const {
  const auto s = spline.jet(p, t);
  return {s.P, s.Pa, s.Pb, s.Paa, s.Pab};
}

Vec2 SeedSurface::gamma(const Surface& surface, double p, double t) const {
  const Vec3 X = spline.eval(p, t);
  double kp = closed ? p * n_p : p * (n_p - 1);
  int k = static_cast<int>(std::lround(kp));
  k = closed ? ((k % n_p) + n_p) % n_p : std::clamp(k, 0, n_p - 1);
  const int i = std::clamp(static_cast<int>(std::lround((t - interval.lo) / interval.length() * (n_t - 1))), 0, n_t - 1);
  const Vec2 near = samples_uv[static_cast<std::size_t>(k) * n_t + i];
  try {
    const Projection pr = project_to_surface(surface, X, near.x(), near.y());
    return {pr.u, pr.v};
  } catch (const SweepError&) {
    return near;
  }
}

std::string SeedSurface::serialize() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "seed-surface 2\n";
  os << "face " << face << " component " << component << " closed " << closed << "\n";
  os << "interval " << interval.lo << " " << interval.hi << "\n";
  os << "residual " << max_residual << " " << rms_residual << " " << max_body_residual << "\n";
  for (const BSplineBasis* b : {&spline.basis_a(), &spline.basis_b()}) {
    os << "basis " << b->degree() << " " << b->n_ctrl() << " " << b->periodic() << " " << b->lo() << " " << b->hi()
       << "\n";
  }
  for (const auto& c : spline.ctrl()) os << c.x() << " " << c.y() << " " << c.z() << "\n";
  os << "samples " << n_p << " " << n_t << "\n";
  for (const auto& q : samples_uv) os << q.x() << " " << q.y() << "\n";
  return os.str();
}

SeedSurface SeedSurface::parse(const std::string& text) {
  std::istringstream is(text);
  std::string word;
  int version = 0;
  SeedSurface s;
  auto expect = [&](const char* w) {
    if (!(is >> word) || word != w)
      throw SweepError(ErrorKind::Config, std::string("seed surface: expected '") + w + "'");
  };
  expect("seed-surface");
  is >> version;
  if (version != 2) throw SweepError(ErrorKind::Config, "seed surface: unsupported version");
  expect("face");
  is >> s.face;
  expect("component");
  is >> s.component;
  expect("closed");
  is >> s.closed;
  expect("interval");
  is >> s.interval.lo >> s.interval.hi;
  expect("residual");
  is >> s.max_residual >> s.rms_residual >> s.max_body_residual;
  BSplineBasis bases[2];
  for (auto& b : bases) {
    expect("basis");
    int deg = 0, n = 0;
    bool periodic = false;
    double lo = 0, hi = 0;
    is >> deg >> n >> periodic >> lo >> hi;
    if (!is) throw SweepError(ErrorKind::Config, "seed surface: bad basis line");
    b = periodic ? BSplineBasis::periodic_uniform(deg, n, lo, hi) : BSplineBasis::clamped_uniform(deg, n, lo, hi);
  }
  std::vector<Vec3> ctrl(static_cast<std::size_t>(bases[0].n_ctrl()) * bases[1].n_ctrl());
  for (auto& c : ctrl) is >> c.x() >> c.y() >> c.z();
  expect("samples");
  is >> s.n_p >> s.n_t;
  if (!is || s.n_p < 2 || s.n_t < 2) throw SweepError(ErrorKind::Config, "seed surface: bad sample grid");
  s.samples_uv.resize(static_cast<std::size_t>(s.n_p) * s.n_t);
  for (auto& q : s.samples_uv) is >> q.x() >> q.y();
  if (!is) throw SweepError(ErrorKind::Config, "seed surface: truncated");
  s.spline = TensorSpline<3>(bases[0], bases[1], std::move(ctrl));
  return s;
}

SeedSurface build_seed(const SweptScene& scene, const Funnel& funnel, const SeedOptions& opt) {
  const int comp = opt.component;
  if (funnel.slices.size() < 2) throw SweepError(ErrorKind::SeedBuild, "need at least two funnel slices");
  for (const auto& e : funnel.events)
    if (e.component == comp)
      throw SweepError(ErrorKind::SeedBuild, "component " + std::to_string(comp) + " changes topology at slice " +
                                                 std::to_string(e.slice));
  std::vector<const ContactCurve*> curves;
  for (std::size_t i = 0; i < funnel.slices.size(); ++i) {
    const ContactCurve* c = funnel.curve(i, comp);
    if (!c) throw SweepError(ErrorKind::SeedBuild, "component missing in slice " + std::to_string(i));
    curves.push_back(c);
  }
  const ContactCurve& c0 = *curves.front();
  for (const ContactCurve* c : curves) {
    if (c->chart_face != c0.chart_face || c->closed != c0.closed || c->points.size() != c0.points.size())
      throw SweepError(ErrorKind::SeedBuild, "component structure differs across slices");
  }

  SeedSurface sd;
  sd.face = c0.chart_face;
  sd.component = comp;
  sd.closed = c0.closed;
  sd.interval = {funnel.slices.front().t, funnel.slices.back().t};
  const Surface& surface = *scene.face(sd.face).surface;
  const ParamRect dom = surface.domain();

  const std::size_t n = c0.points.size();
  sd.n_p = static_cast<int>(n);
  sd.n_t = static_cast<int>(curves.size());
  std::vector<double> ps(n), ts(curves.size());
  for (std::size_t k = 0; k < n; ++k) ps[k] = sd.closed ? double(k) / n : double(k) / (n - 1);
  for (std::size_t i = 0; i < curves.size(); ++i) ts[i] = funnel.slices[i].t;

  std::vector<std::vector<Vec3>> values(n, std::vector<Vec3>(curves.size()));
  sd.samples_uv.resize(n * curves.size());
  Vec3 prev_start = Vec3::Zero(), prev_dir = Vec3::Zero();
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const std::vector<Vec2> uv = realign(scene, *curves[i], n, i == 0 ? nullptr : &prev_start, prev_dir);
    for (std::size_t k = 0; k < n; ++k) {
      values[k][i] = surface.jet(uv[k].x(), uv[k].y()).S;
      sd.samples_uv[k * curves.size() + i] = uv[k];
    }
    prev_start = values[0][i];
    prev_dir = values[1][i] - values[0][i];
  }

  const int dp = std::min(opt.degree, sd.n_p - 1), dt = std::min(opt.degree, sd.n_t - 1);
  if (dp < 1 || dt < 1) throw SweepError(ErrorKind::SeedBuild, "funnel grid too small for a spline seed");
  // A periodic even-degree basis sampled at its knots is singular; drop one control point.
  const int cp = sd.closed && dp % 2 == 0 ? sd.n_p - 1 : sd.n_p;
  const BSplineBasis bp =
      sd.closed ? BSplineBasis::periodic_uniform(dp, cp, 0.0, 1.0) : BSplineBasis::clamped_uniform(dp, cp, 0.0, 1.0);
  const BSplineBasis bt = BSplineBasis::clamped_uniform(dt, sd.n_t, sd.interval.lo, sd.interval.hi);
  sd.spline = fit_tensor_spline<3>(bp, bt, ps, ts, values);

  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < curves.size(); ++i) {
      sd.max_body_residual = std::max(sd.max_body_residual, (sd.spline.eval(ps[k], ts[i]) - values[k][i]).norm());
      Vec2 d = sd.gamma(surface, ps[k], ts[i]) - sd.samples_uv[k * curves.size() + i];
      if (dom.u_periodic) d.x() = std::remainder(d.x(), dom.u_period());
      const double r = d.norm();
      sd.max_residual = std::max(sd.max_residual, r);
      sum += r * r;
    }
  sd.rms_residual = std::sqrt(sum / double(n * curves.size()));
  if (sd.max_residual > 1e-3)
    throw SweepError(ErrorKind::SeedBuild, "seed fit residual " + std::to_string(sd.max_residual) + " exceeds 1e-3");
  return sd;
}

ProceduralEnvelope::ProceduralEnvelope(const SweptScene& scene, SeedSurface seed, NewtonSettings nr)
    : scene_(&scene), seed_(std::move(seed)), nr_(nr) {}

Vec3 ProceduralEnvelope::approximate(double p, double t) const {
  const Pose pose = scene_->motion().evaluate(t);
  return pose.apply(seed_.spline.eval(p, t));
}

Vec2 ProceduralEnvelope::gamma(double p, double t) const {
  return seed_.gamma(*scene_->face(seed_.face).surface, p, t);
}

EnvelopePoint eval_envelope(const ProceduralEnvelope& env, double p, double t) {
  check_inside(env.seed(), p, t);
  return eval_envelope(env, p, t, env.gamma(p, t));
}

EnvelopePoint eval_envelope(const ProceduralEnvelope& env, double p, double t, const Vec2& start) {
  check_inside(env.seed(), p, t);
  const NewtonSettings& nr = env.settings();
  const std::size_t face = env.seed().face;
  const SweptScene& scene = env.scene();
  const SeedWorld w = seed_world(env, p, t);

  auto residual = [&](const Vec2& x, SweepJet* out) {
    SweepJet j = sweep_jet(scene, face, x.x(), x.y(), t);
    const Vec2 F(j.f, (j.sigma - w.E).dot(w.Ep));
    if (out) *out = j;
    return F;
  };

  Vec2 x = start;
  SweepJet j;
  Vec2 F = residual(x, &j);
  EnvelopePoint out;
  out.t = t;
  auto done = [&](const Vec2& R) { return std::abs(R[0]) <= nr.residual && std::abs(R[1]) <= nr.residual; };
  int it = 0;
  while (!done(F)) {
    if (it >= nr.max_iter) {
      std::ostringstream os;
      os << "Newton did not converge at (p, t) = (" << p << ", " << t << "); last iterate (u, v) = (" << x.x() << ", "
         << x.y() << "), residual (" << F[0] << ", " << F[1] << ")";
      throw SweepError(ErrorKind::Evaluation, os.str());
    }
    ++it;
    Mat2 J;
    J << j.grad.x(), j.grad.y(), j.sigma_u.dot(w.Ep), j.sigma_v.dot(w.Ep);
    const Vec2 step = J.fullPivLu().solve(-F);
    if (!step.allFinite()) throw SweepError(ErrorKind::Evaluation, "singular Newton matrix");
    // Halve the step while the residual grows.
    double lam = 1.0;
    Vec2 xn = x + step;
    SweepJet jn;
    Vec2 Fn = residual(xn, &jn);
    for (int h = 0; h < nr.max_halving && Fn.norm() > F.norm(); ++h) {
      lam *= 0.5;
      xn = x + lam * step;
      Fn = residual(xn, &jn);
    }
    x = xn;
    j = jn;
    F = Fn;
    if (lam * step.norm() <= nr.step_tol) break;
  }
  if (!done(F)) {
    std::ostringstream os;
    os << "Newton stalled at (u, v) = (" << x.x() << ", " << x.y() << ") with residual (" << F[0] << ", " << F[1]
       << ")";
    throw SweepError(ErrorKind::Evaluation, os.str());
  }
  out.u = x.x();
  out.v = x.y();
  out.world = j.sigma;
  out.iterations = it;
  out.f_residual = std::abs(F[0]);
  out.plane_residual = std::abs(F[1]);
  return out;
}

EnvelopeDerivatives eval_derivatives(const ProceduralEnvelope& env, double p, double t) {
  const EnvelopePoint e = eval_envelope(env, p, t);
  const SeedWorld w = seed_world(env, p, t);
  const SweepJet j = sweep_jet(env.scene(), env.seed().face, e.u, e.v, t);
  const Vec3 d = j.sigma - w.E;
  Mat2 J;
  J << j.grad.x(), j.grad.y(), j.sigma_u.dot(w.Ep), j.sigma_v.dot(w.Ep);
  const Eigen::JacobiSVD<Mat2> svd(J);
  const double smax = svd.singularValues()[0], smin = svd.singularValues()[1];
  EnvelopeDerivatives out;
  out.condition = smin > 0 ? smax / smin : kInf;
  if (out.condition > 1e12) throw SweepError(ErrorKind::Derivative, "derivative system is singular");
  const auto lu = J.fullPivLu();
  out.uv_p = lu.solve(Vec2(0.0, w.Ep.squaredNorm() - d.dot(w.Epp)));
  out.uv_t = lu.solve(Vec2(-j.grad.z(), -(j.sigma_t - w.Et).dot(w.Ep) - d.dot(w.Ept)));
  out.dp = j.sigma_u * out.uv_p.x() + j.sigma_v * out.uv_p.y();
  out.dt = j.sigma_u * out.uv_t.x() + j.sigma_v * out.uv_t.y() + j.sigma_t;
  // Where θ = 0 the two partials are parallel and E is not an immersion.
  const double scale = out.dp.norm() * out.dt.norm();
  if (!(scale > 0) || out.dp.cross(out.dt).norm() <= 1e-9 * scale)
    throw SweepError(ErrorKind::Derivative, "envelope map is not an immersion at (p, t) = (" + std::to_string(p) +
                                                ", " + std::to_string(t) + ")");
  return out;
}

AssumptionCheck check_single_root(const ProceduralEnvelope& env, double p, double t, int samples) {
  const SeedSurface& sd = env.seed();
  const SeedWorld w = seed_world(env, p, t);
  AssumptionCheck out;
  double prev = 0.0;
  bool have = false;
  for (int k = 0; k < samples; ++k) {
    double q = p - 0.2 + 0.4 * k / (samples - 1);
    if (!sd.closed && (q < 0.0 || q > 1.0)) continue;
    if (std::abs(q - p) < 1e-12) continue;  // the root itself
    const double g = (env.approximate(q, t) - w.E).dot(w.Ep);
    if (have && (g > 0) != (prev > 0)) ++out.sign_changes;
    prev = g;
    have = true;
  }
  out.ok = out.sign_changes <= 1;
  return out;
}

}  // namespace sweep
