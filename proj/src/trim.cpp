#include "sweep/trim.hpp"

#include "sweep/parallel.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

namespace sweep {

double posed_measure(const SweptScene& scene, const Vec3& x, double t) {
  if (!scene.solid().has_membership()) {
    throw SweepError(ErrorKind::Domain, "solid '" + scene.solid().name + "' has no closed-form membership");
  }
  return scene.solid().signed_measure(scene.motion().inverse_trajectory_point(x, t));
}

double TimeSet::ell() const {
  double best = kInf;
  for (const Interval& iv : intervals) {
    if (iv.contains(t)) return 0.0;
    best = std::min(best, std::min(std::abs(iv.lo - t), std::abs(iv.hi - t)));
  }
  for (double h : hits) best = std::min(best, std::abs(h - t));
  return best;
}

TimeSet time_set(const SweptScene& scene, const FunnelPoint& p, const TimeSetOptions& opt) {
  const Interval I = scene.interval();
  const int n = std::max(opt.samples, 512);
  const Vec3 x = p.sigma;
  auto measure = [&](double t) { return posed_measure(scene, x, t); };
  auto status_of = [&](double m) {
    if (m < -opt.touch_tol) return Containment::Inside;
    if (m <= opt.touch_tol) return Containment::OnBoundary;
    return Containment::Outside;
  };

  TimeSet ts;
  ts.t = p.t;
  // Grid plus the two window edges; samples inside the window stand for t itself.
  std::vector<double> times;
  for (int k = 0; k <= n; ++k) {
    const double t = I.lo + I.length() * k / n;
    if (std::abs(t - p.t) >= opt.window) times.push_back(t);
  }
  const double wl = p.t - opt.window, wr = p.t + opt.window;
  if (wl >= I.lo) times.push_back(wl);
  if (wr <= I.hi) times.push_back(wr);
  std::sort(times.begin(), times.end());
  for (double t : times) {
    const double m = measure(t);
    ts.samples.push_back({t, m, status_of(m)});
  }
  const auto& S = ts.samples;
  const std::size_t N = S.size();
  auto in = [&](std::size_t k) { return S[k].measure < 0.0; };
  // Samples k and k + 1 straddle t itself.
  auto across_t = [&](std::size_t k) { return S[k].t < p.t && S[k + 1].t > p.t; };
  auto crossing = [&](double a, double b) {
    // a is outside, b inside.
    double lo = a, hi = b;
    while (std::abs(hi - lo) > opt.refine) {
      const double mid = 0.5 * (lo + hi);
      if (measure(mid) < 0.0) hi = mid;
      else lo = mid;
    }
    return 0.5 * (lo + hi);
  };

  for (std::size_t k = 0; k < N;) {
    if (!in(k)) {
      ++k;
      continue;
    }
    std::size_t e = k;
    while (e + 1 < N && in(e + 1) && !across_t(e)) ++e;
    Interval iv;
    if (k == 0) iv.lo = S[0].t <= I.lo ? I.lo : p.t;
    else if (across_t(k - 1)) iv.lo = p.t;
    else iv.lo = crossing(S[k - 1].t, S[k].t);
    if (e + 1 == N) iv.hi = S[e].t >= I.hi ? I.hi : p.t;
    else if (across_t(e)) iv.hi = p.t;
    else iv.hi = crossing(S[e + 1].t, S[e].t);
    ts.intervals.push_back(iv);
    k = e + 1;
  }

  // Grazing touches: refine local minima of the measure among outside samples.
  auto is_window = [&](std::size_t k) { return std::abs(std::abs(S[k].t - p.t) - opt.window) < 1e-15 * (1 + std::abs(p.t)); };
  for (std::size_t k = 0; k < N; ++k) {
    if (in(k) || is_window(k)) continue;
    const bool left_ok = k == 0 || (!in(k - 1) && S[k].measure <= S[k - 1].measure && !across_t(k - 1));
    const bool right_ok = k + 1 == N || (!in(k + 1) && S[k].measure <= S[k + 1].measure && !across_t(k));
    if (!left_ok || !right_ok) continue;
    double a = k == 0 ? S[k].t : S[k - 1].t, b = k + 1 == N ? S[k].t : S[k + 1].t;
    // Golden-section search for the minimum.
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = measure(c), fd = measure(d);
    while (b - a > 1e-10) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = measure(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = measure(d);
      }
    }
    const double tm = 0.5 * (a + b);
    const double mm = std::min(measure(tm), S[k].measure);
    if (mm > opt.touch_tol || std::abs(tm - p.t) < opt.window) continue;
    if (mm < 0.0) {
      const double lo = k == 0 ? S[k].t : S[k - 1].t, hi = k + 1 == N ? S[k].t : S[k + 1].t;
      ts.intervals.push_back({crossing(lo, tm), crossing(hi, tm)});
    } else {
      ts.hits.push_back(tm);
    }
  }
  std::sort(ts.intervals.begin(), ts.intervals.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::sort(ts.hits.begin(), ts.hits.end());
  return ts;
}

double ell(const SweptScene& scene, const FunnelPoint& p, const TimeSetOptions& opt) {
  return time_set(scene, p, opt).ell();
}

EllField ell_field(const SweptScene& scene, const Funnel& funnel, const TimeSetOptions& opt, int threads) {
  EllField out(funnel.slices.size());
  parallel_for(funnel.slices.size(), threads, [&](std::size_t i) {
    const auto& sl = funnel.slices[i];
    out[i].resize(sl.curves.size());
    for (std::size_t c = 0; c < sl.curves.size(); ++c)
      for (const auto& p : sl.curves[c].points) out[i][c].push_back(ell(scene, p, opt));
  });
  return out;
}

double sep_estimate(const SweptScene& scene, const Funnel& funnel, const TimeSetOptions& opt, int threads) {
  double sep = kInf;
  for (const auto& sl : ell_field(scene, funnel, opt, threads))
    for (const auto& c : sl)
      for (double l : c) sep = std::min(sep, l);
  return sep;
}

void attach_partition_width(const SweptScene& scene, SweepClassification& classification, double sep) {
  if (classification.verdict != Verdict::Decomposable || !(sep > 0)) {
    classification.delta.reset();
    return;
  }
  classification.delta = std::min(0.5 * sep, scene.interval().length());
}

const char* to_string(TrimKind k) {
  switch (k) {
    case TrimKind::Elementary: return "Elementary";
    case TrimKind::Singular: return "Singular";
    case TrimKind::EndCap: return "EndCap";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Coincidence system σ(p1) = σ(p2), f(p1) = f(p2) = 0 in X = (p1, p2).

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat56 = Eigen::Matrix<double, 5, 6>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct SampleId {
  std::size_t slice, curve, node;
};

template <class Fn>
void for_each_edge(const Funnel& F, Fn&& fn) {
  for (std::size_t i = 0; i < F.slices.size(); ++i) {
    const auto& sl = F.slices[i];
    for (std::size_t c = 0; c < sl.curves.size(); ++c) {
      const std::size_t n = sl.curves[c].points.size();
      for (std::size_t k = 0; k + 1 < n; ++k) fn(SampleId{i, c, k}, SampleId{i, c, k + 1});
      if (sl.curves[c].closed && n > 2) fn(SampleId{i, c, n - 1}, SampleId{i, c, 0});
      if (i + 1 == F.slices.size()) continue;
      const auto& nx = F.slices[i + 1];
      for (std::size_t c2 = 0; c2 < nx.curves.size(); ++c2) {
        if (nx.curves[c2].component != sl.curves[c].component) continue;
        const std::size_t m = std::min(n, nx.curves[c2].points.size());
        for (std::size_t k = 0; k < m; ++k) fn(SampleId{i, c, k}, SampleId{i + 1, c2, k});
      }
    }
  }
}

const FunnelPoint& sample(const Funnel& F, const SampleId& id) {
  return F.slices[id.slice].curves[id.curve].points[id.node];
}

std::size_t chart_of(const SweptScene& scene, std::size_t face) {
  for (std::size_t cf : scene.chart_faces())
    if (scene.face(cf).surface == scene.face(face).surface) return cf;
  return face;
}

// Parameter distance with u measured modulo the period.
double pdist(const ParamRect& d, const Vec3& a, const Vec3& b) {
  Vec3 diff = a - b;
  if (d.u_periodic) diff.x() -= d.u_period() * std::round(diff.x() / d.u_period());
  if (d.v_periodic) diff.y() -= d.v_period() * std::round(diff.y() / d.v_period());
  return diff.norm();
}

FunnelPoint funnel_point(const SweptScene& scene, std::size_t chart, const Vec3& q) {
  const Vec2 w = scene.face(chart).surface->domain().wrap(q.x(), q.y());
  return make_funnel_point(scene, scene.face_at(chart, w.x(), w.y()), w.x(), w.y(), q.z());
}

// With a finite `cap_t` the second point is an end-cap point: f(p2) = 0 is
// replaced by t2 = cap_t.
struct PairSystem {
  const SweptScene& scene;
  std::size_t c1, c2;
  ParamRect d1, d2;
  double cap_t = std::nan("");

  PairSystem(const SweptScene& s, std::size_t a, std::size_t b, double cap = std::nan(""))
      : scene(s), c1(a), c2(b), d1(s.face(a).surface->domain()), d2(s.face(b).surface->domain()), cap_t(cap) {}

  bool is_cap() const { return std::isfinite(cap_t); }

  bool inside(const Vec6& X) const {
    const Interval I = scene.interval();
    return d1.contains(X[0], X[1]) && d2.contains(X[3], X[4]) && I.contains(X[2], 1e-12) && I.contains(X[5], 1e-12);
  }

  void eval(const Vec6& X, Eigen::Matrix<double, 5, 1>& F, Mat56& J) const {
    const SweepJet a = sweep_jet(scene, c1, X[0], X[1], X[2], true);
    const SweepJet b = sweep_jet(scene, c2, X[3], X[4], X[5], true);
    F.head<3>() = a.sigma - b.sigma;
    F[3] = a.f;
    F[4] = b.f;
    J.setZero();
    J.block<3, 1>(0, 0) = a.sigma_u;
    J.block<3, 1>(0, 1) = a.sigma_v;
    J.block<3, 1>(0, 2) = a.sigma_t;
    J.block<3, 1>(0, 3) = -b.sigma_u;
    J.block<3, 1>(0, 4) = -b.sigma_v;
    J.block<3, 1>(0, 5) = -b.sigma_t;
    J.block<1, 3>(3, 0) = a.grad.transpose();
    J.block<1, 3>(4, 3) = b.grad.transpose();
    if (is_cap()) {
      F[4] = X[5] - cap_t;
      J.block<1, 3>(4, 3) = Vec3(0, 0, 1).transpose();
    }
  }

  // Min-norm Newton, or a square solve when `extra` adds a sixth equation
  // extra.dot(X) = target. Returns iterations used, -1 on failure.
  int correct(Vec6& X, int max_iter, double tol, const Vec6* extra = nullptr, double target = 0.0) const {
    Eigen::Matrix<double, 5, 1> F;
    Mat56 J;
    for (int it = 0; it <= max_iter; ++it) {
      if (!inside(X)) return -1;
      eval(X, F, J);
      const double ex = extra ? extra->dot(X) - target : 0.0;
      if (!F.allFinite()) return -1;
      if (F.cwiseAbs().maxCoeff() <= 1e-13 && std::abs(ex) <= 1e-13) return it;
      if (it == max_iter) break;
      Vec6 step;
      if (extra) {
        Mat6 A;
        A.topRows<5>() = J;
        A.row(5) = extra->transpose();
        Vec6 r;
        r.head<5>() = F;
        r[5] = ex;
        Eigen::FullPivLU<Mat6> lu(A);
        if (!lu.isInvertible()) return -1;
        step = -lu.solve(r);
      } else {
        const Eigen::Matrix<double, 5, 5> JJ = J * J.transpose();
        Eigen::LDLT<Eigen::Matrix<double, 5, 5>> ldlt(JJ);
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-24) return -1;
        step = -J.transpose() * ldlt.solve(F);
      }
      if (!step.allFinite()) return -1;
      if (step.norm() > 0.5) step *= 0.5 / step.norm();
      X += step;
      if (step.norm() < 1e-15) break;
    }
    if (!inside(X)) return -1;
    eval(X, F, J);
    const double ex = extra ? std::abs(extra->dot(X) - target) : 0.0;
    return F.cwiseAbs().maxCoeff() <= tol && ex <= tol ? max_iter : -1;
  }

  // Unit kernel vector of J and the smallest nonzero singular value.
  std::pair<Vec6, double> tangent(const Vec6& X) const {
    Eigen::Matrix<double, 5, 1> F;
    Mat56 J;
    eval(X, F, J);
    Mat6 A = Mat6::Zero();
    A.topRows<5>() = J;
    Eigen::JacobiSVD<Mat6> svd(A, Eigen::ComputeFullV);
    return {svd.matrixV().col(5).normalized(), svd.singularValues()[4]};
  }

  TrimNode node(const Vec6& X) const {
    TrimNode n;
    n.p1 = funnel_point(scene, c1, X.head<3>());
    n.p2 = funnel_point(scene, c2, X.tail<3>());
    n.world = 0.5 * (n.p1.sigma + n.p2.sigma);
    n.residual = (n.p1.sigma - n.p2.sigma).norm();
    n.gap = std::abs(X[2] - X[5]);
    n.angle = std::asin(std::min(1.0, n.p1.normal.cross(n.p2.normal).norm()));
    return n;
  }

  double pair_separation(const Vec6& X) const {
    return c1 == c2 && !is_cap() ? pdist(d1, X.head<3>(), X.tail<3>()) : kInf;
  }

  double dist6(const Vec6& A, const Vec6& B) const {
    return std::hypot(pdist(d1, A.head<3>(), B.head<3>()), pdist(d2, A.tail<3>(), B.tail<3>()));
  }
};

Vec6 swapped(const Vec6& X) {
  Vec6 Y;
  Y << X.tail<3>(), X.head<3>();
  return Y;
}

enum class StopReason { Closed, Boundary, Chart, Collapse, Gap, NonTransversal, Budget };

struct MarchResult {
  std::vector<Vec6> points;
  StopReason reason = StopReason::Budget;
  std::string note;
};

MarchResult march_pair(const PairSystem& sys, const Vec6& start, const Vec6& dir0, const TrimOptions& opt,
                       bool stop_on_collapse) {
  MarchResult out;
  const Interval I = sys.scene.interval();
  Vec6 cur = start;
  const Vec6 t0 = sys.tangent(cur).first;
  Vec6 tan = t0.dot(dir0) < 0 ? Vec6(-t0) : t0;
  double h = opt.h_init, travelled = 0.0;
  double last_sep = sys.pair_separation(start);
  auto describe = [](const Vec6& X) {
    std::ostringstream os;
    os << "(" << X[0] << ", " << X[1] << ", " << X[2] << " | " << X[3] << ", " << X[4] << ", " << X[5] << ")";
    return os.str();
  };
  while (out.points.size() < opt.max_nodes) {
    Vec6 pred = cur + h * tan;
    if (sys.is_cap()) pred[5] = sys.cap_t;
    const bool v_out = (!sys.d1.v_periodic && (pred[1] < sys.d1.v0 || pred[1] > sys.d1.v1)) ||
                       (!sys.d2.v_periodic && (pred[4] < sys.d2.v0 || pred[4] > sys.d2.v1));
    if (v_out) {
      out.reason = StopReason::Chart;
      out.note = "left the chart near " + describe(cur);
      return out;
    }
    int leave = -1;
    double tb = 0.0;
    for (int k : {2, 5}) {
      if (k == 5 && sys.is_cap()) continue;
      if (pred[k] < I.lo || pred[k] > I.hi) {
        leave = k;
        tb = pred[k] < I.lo ? I.lo : I.hi;
      }
    }
    if (leave >= 0) {
      Vec6 q = cur + (tb - cur[leave]) / (pred[leave] - cur[leave]) * (pred - cur);
      q[leave] = tb;
      Vec6 e = Vec6::Zero();
      e[leave] = 1.0;
      if (sys.correct(q, opt.max_newton, opt.residual, &e, tb) >= 0 && sys.dist6(q, cur) <= 2.0 * h) {
        out.points.push_back(q);
      }
      out.reason = StopReason::Boundary;
      return out;
    }
    Vec6 next = pred;
    const int iters = sys.correct(next, opt.max_newton, opt.residual);
    bool ok = iters >= 0 && sys.dist6(next, pred) <= 0.5 * h;
    Vec6 new_tan = tan;
    if (ok) {
      const Vec6 t1 = sys.tangent(next).first;
      new_tan = t1.dot(tan) < 0 ? Vec6(-t1) : t1;
      ok = new_tan.dot(tan) > std::cos(0.35);
    }
    if (!ok) {
      h *= 0.5;
      if (h < opt.h_min) {
        out.reason = StopReason::Gap;
        out.note = "Newton divergence; gap after " + describe(cur);
        return out;
      }
      continue;
    }
    travelled += sys.dist6(next, cur);
    out.points.push_back(next);
    cur = next;
    tan = new_tan;
    const TrimNode nd = sys.node(cur);
    if (nd.angle < opt.min_angle && !stop_on_collapse) {
      out.reason = StopReason::NonTransversal;
      out.note = "sheets meet at " + std::to_string(nd.angle) + " rad near " + describe(cur);
      return out;
    }
    if (stop_on_collapse) {
      // Closing in on another singular trim point: the pair separation shrinks towards zero.
      const double sep_now = sys.pair_separation(cur);
      if (sep_now < last_sep && sep_now < std::max(2.0 * h, 4.0 * opt.h_min)) {
        out.reason = StopReason::Collapse;
        return out;
      }
      last_sep = sep_now;
    }
    if (travelled > 4.0 * opt.h_max) {
      for (const Vec6& S : {start, swapped(start)}) {
        if (sys.dist6(cur, S) < 1.5 * h) {
          out.reason = StopReason::Closed;
          return out;
        }
      }
    }
    if (iters <= 3) h = std::min(h * 1.5, opt.h_max);
  }
  out.reason = StopReason::Budget;
  out.note = "node budget exhausted";
  return out;
}

void finish_curve(const PairSystem& sys, TrimCurve& c, const std::vector<Vec6>& X) {
  double s = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    TrimNode n = sys.node(X[k]);
    if (k > 0) s += (n.world - c.nodes.back().world).norm();
    n.s = s;
    c.max_residual = std::max(c.max_residual, n.residual);
    c.min_gap = std::min(c.min_gap, n.gap);
    c.nodes.push_back(n);
  }
}

const char* reason_text(StopReason r) {
  switch (r) {
    case StopReason::Closed: return "closed";
    case StopReason::Boundary: return "reached an end slice";
    case StopReason::Chart: return "left the chart";
    case StopReason::Collapse: return "pair collapsed";
    case StopReason::Gap: return "gap";
    case StopReason::NonTransversal: return "non-transversal";
    case StopReason::Budget: return "budget";
  }
  return "?";
}

// Traces both ways from X0 and joins the halves.
TrimCurve trace_pair_curve(const PairSystem& sys, const Vec6& X0, const TrimOptions& opt) {
  TrimCurve c;
  c.chart1 = sys.c1;
  c.chart2 = sys.c2;
  const Vec6 dir = sys.tangent(X0).first;
  MarchResult fwd = march_pair(sys, X0, dir, opt, true);
  std::vector<Vec6> pts;
  auto note = [&](const MarchResult& m) {
    if (m.reason == StopReason::Gap) c.diagnostics.push_back(m.note);
    if (m.reason == StopReason::NonTransversal) {
      c.transversal = false;
      c.diagnostics.push_back("flagged for singular handling: " + m.note);
    }
    if (m.reason == StopReason::Chart || m.reason == StopReason::Budget) c.diagnostics.push_back(m.note);
    if (m.reason == StopReason::Collapse) c.diagnostics.push_back("pair collapsed: the curve runs into a singular trim point");
  };
  note(fwd);
  if (fwd.reason == StopReason::Closed) {
    c.closed = true;
    pts.push_back(X0);
    pts.insert(pts.end(), fwd.points.begin(), fwd.points.end());
  } else {
    MarchResult bwd = march_pair(sys, X0, -dir, opt, true);
    note(bwd);
    pts.assign(bwd.points.rbegin(), bwd.points.rend());
    pts.push_back(X0);
    pts.insert(pts.end(), fwd.points.begin(), fwd.points.end());
  }
  finish_curve(sys, c, pts);
  return c;
}

bool near_curve(const SweptScene& scene, const std::vector<TrimCurve>& curves, std::size_t chart, const Vec3& q,
                double r) {
  const ParamRect d = scene.face(chart).surface->domain();
  for (const auto& c : curves) {
    for (const auto& n : c.nodes) {
      if (c.chart1 == chart && pdist(d, n.p1.param(), q) < r) return true;
      if (c.chart2 == chart && pdist(d, n.p2.param(), q) < r) return true;
    }
  }
  return false;
}

// Partner point on the solid boundary for σ(p) at time t'.
std::optional<std::pair<std::size_t, Vec3>> partner(const SweptScene& scene, const Vec3& x, double t) {
  const Vec3 y = scene.motion().inverse_trajectory_point(x, t);
  std::optional<std::pair<std::size_t, Vec3>> best;
  double best_d = kInf;
  for (std::size_t cf : scene.chart_faces()) {
    const Surface& s = *scene.face(cf).surface;
    const Vec2 g = grid_seed(s, y);
    try {
      const Projection pr = project_to_surface(s, y, g.x(), g.y());
      if (std::abs(pr.signed_distance) < best_d) {
        best_d = std::abs(pr.signed_distance);
        best = std::make_pair(cf, Vec3(pr.u, pr.v, t));
      }
    } catch (const SweepError&) {
    }
  }
  return best;
}

}  // namespace

ElementaryTrimResult elementary_trim_curves(const SweptScene& scene, const Funnel& funnel,
                                            const SweepClassification& classification,
                                            const std::vector<TrimCurve>& known, const TimeSetOptions& ts,
                                            const TrimOptions& opt, int threads) {
  ElementaryTrimResult res;
  const Interval I = scene.interval();
  // Time sets at every sample.
  std::vector<std::vector<std::vector<TimeSet>>> sets(funnel.slices.size());
  parallel_for(funnel.slices.size(), threads, [&](std::size_t i) {
    const auto& sl = funnel.slices[i];
    sets[i].resize(sl.curves.size());
    for (std::size_t c = 0; c < sl.curves.size(); ++c)
      for (const auto& p : sl.curves[c].points) sets[i][c].push_back(time_set(scene, p, ts));
  });
  auto set_of = [&](const SampleId& id) -> const TimeSet& { return sets[id.slice][id.curve][id.node]; };
  auto theta_of = [&](const SampleId& id) {
    return classification.theta.empty() ? 1.0 : classification.theta[id.slice][id.curve][id.node];
  };

  // Away from F⁻ only intervals detached from t count towards sep.
  double sep = kInf;
  bool local = false;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t c = 0; c < sets[i].size(); ++c)
      for (std::size_t k = 0; k < sets[i][c].size(); ++k) {
        const double l = sets[i][c][k].ell();
        if (l == 0.0 && classification.verdict != Verdict::Decomposable) {
          local = true;
          continue;
        }
        sep = std::min(sep, l);
      }
  if (local) res.diagnostics.push_back("sweep is not decomposable; sep taken away from the theta <= 0 region");
  res.sep = sep;
  if (!std::isfinite(sep)) {
    res.partition = {I};
    return res;
  }
  if (sep <= 0.0) {
    res.diagnostics.push_back("sep vanishes; no partition exists");
    return res;
  }
  res.delta = 0.5 * sep;
  const int parts = static_cast<int>(std::ceil(I.length() / res.delta - 1e-12));
  for (int k = 0; k < parts; ++k)
    res.partition.push_back({I.lo + I.length() * k / parts, I.lo + I.length() * (k + 1) / parts});

  // Seeds at sample-graph edges where L(p) gains a detached interval.
  struct Seed {
    std::size_t c1, c2;
    Vec6 X;
    double cap = std::nan("");
  };
  std::vector<Seed> seeds;
  for_each_edge(funnel, [&](const SampleId& a, const SampleId& b) {
    const TimeSet& sa = set_of(a);
    const TimeSet& sb = set_of(b);
    auto detached = [](const TimeSet& s) {
      for (const auto& iv : s.intervals)
        if (!iv.contains(s.t)) return true;
      return false;
    };
    const bool da = detached(sa), db = detached(sb);
    if (da == db) return;
    const SampleId& id = da ? a : b;
    if (theta_of(id) <= 0.0) return;
    const FunnelPoint& p = sample(funnel, id);
    for (const auto& iv : set_of(id).intervals) {
      if (iv.contains(p.t)) continue;
      const auto q = partner(scene, p.sigma, 0.5 * (iv.lo + iv.hi));
      if (!q) continue;
      Seed s;
      s.c1 = chart_of(scene, p.face);
      s.c2 = q->first;
      s.X << p.u, p.v, p.t, q->second;
      seeds.push_back(s);
      // An interval running into an end of I is cut off by the posed end cap.
      for (double te : {I.lo, I.hi}) {
        if (std::abs((te == I.lo ? iv.lo : iv.hi) - te) > 1e-12) continue;
        const auto qc = partner(scene, p.sigma, te);
        if (!qc) continue;
        Seed sc;
        sc.c1 = s.c1;
        sc.c2 = qc->first;
        sc.X << p.u, p.v, p.t, qc->second;
        sc.cap = te;
        seeds.push_back(sc);
      }
    }
  });

  auto covered = [&](std::size_t chart, const Vec3& q) {
    return near_curve(scene, res.curves, chart, q, 2.0 * opt.h_max) || near_curve(scene, known, chart, q, 2.0 * opt.h_max);
  };
  for (Seed s : seeds) {
    if (std::isfinite(s.cap)) {
      if (covered(s.c1, s.X.head<3>())) continue;
      const PairSystem sys(scene, s.c1, s.c2, s.cap);
      if (sys.correct(s.X, opt.max_newton, 1e-10) < 0 || covered(s.c1, s.X.head<3>())) continue;
      // A funnel point on the end slice itself meets its own cap.
      if (std::abs(s.X[2] - s.cap) < 0.5 * std::min(res.delta, 1.0)) continue;
      TrimCurve c = trace_pair_curve(sys, s.X, opt);
      c.kind = TrimKind::EndCap;
      res.curves.push_back(std::move(c));
      continue;
    }
    if (covered(s.c1, s.X.head<3>()) || covered(s.c2, s.X.tail<3>())) continue;
    if (PairSystem(scene, s.c1, s.c2).correct(s.X, opt.max_newton, 1e-10) < 0) continue;
    if (std::abs(s.X[2] - s.X[5]) < 0.5 * res.delta) continue;
    // Order the pair by time.
    if (s.X[2] > s.X[5]) {
      s.X = swapped(s.X);
      std::swap(s.c1, s.c2);
    }
    const PairSystem sys(scene, s.c1, s.c2);
    if (covered(s.c1, s.X.head<3>()) || covered(s.c2, s.X.tail<3>())) continue;
    TrimCurve c = trace_pair_curve(sys, s.X, opt);
    c.kind = TrimKind::Elementary;
    if (c.min_gap < 0.5 * res.delta) {
      c.diagnostics.push_back("node time gap below delta/2; reported as singular");
      c.kind = TrimKind::Singular;
    }
    res.curves.push_back(std::move(c));
  }

  // Triple points: nodes of different curves meeting in space.
  for (std::size_t a = 0; a < res.curves.size(); ++a)
    for (std::size_t b = a + 1; b < res.curves.size(); ++b) {
      if (res.curves[a].kind == TrimKind::EndCap || res.curves[b].kind == TrimKind::EndCap) continue;
      for (const auto& na : res.curves[a].nodes)
        for (const auto& nb : res.curves[b].nodes) {
          if ((na.world - nb.world).norm() >= opt.h_max) continue;
          bool dup = false;
          for (const auto& tp : res.triple_points)
            if ((tp.world - na.world).norm() < 4.0 * opt.h_max) dup = true;
          if (!dup) res.triple_points.push_back({0.5 * (na.world + nb.world), a, b});
        }
    }
  return res;
}

// ---------------------------------------------------------------------------
// Singular trim curves

namespace {

// Pair with σ(p1) = σ(p2) and t1 - t2 fixed, started at p0 ± h T.
std::optional<Vec6> singular_pair(const PairSystem& sys, const Vec3& p0, const Vec3& T, double h,
                                  const TrimOptions& opt) {
  Vec6 X;
  X << p0 + h * T, p0 - h * T;
  Vec6 e = Vec6::Zero();
  e[2] = 1.0;
  e[5] = -1.0;
  const double target = 2.0 * h * T.z();
  if (sys.correct(X, opt.max_newton, 1e-10, &e, target) < 0) return std::nullopt;
  if (sys.pair_separation(X) < 0.5 * h) return std::nullopt;
  return X;
}

}  // namespace

std::vector<TrimCurve> singular_trim_curves(const SweptScene& scene, const std::vector<ThetaZeroCurve>& zero_curves,
                                            const TrimOptions& opt) {
  std::vector<TrimCurve> out;
  std::vector<Vec3> all_roots;
  for (const auto& zc : zero_curves)
    for (const auto& r : zc.roots) all_roots.push_back(r.param);
  for (const auto& zc : zero_curves) {
    const ParamRect dom = scene.face(zc.chart_face).surface->domain();
    PairSystem sys(scene, zc.chart_face, zc.chart_face);
    for (const auto& r : zc.roots) {
      bool done = false;
      for (const auto& c : out)
        for (const auto& sp : c.singular_points)
          if (pdist(dom, sp, r.param) < 1e-3) done = true;
      if (done) continue;
      const ZeroNode n0 = zero_curve_node(scene, zc, r.s);
      const Vec3 p0 = n0.point.param();
      std::optional<Vec6> seed;
      for (double h : {1e-3, 1e-2}) {
        seed = singular_pair(sys, p0, n0.tangent, h, opt);
        if (seed) break;
      }
      if (!seed) {
        std::ostringstream os;
        os << "no coincident pair near the singular trim point (" << p0.x() << ", " << p0.y() << ", " << p0.z() << ")";
        throw SweepError(ErrorKind::SingularSeed, os.str());
      }
      // March away from the root: the pair separation must grow.
      const Vec6 T = sys.tangent(*seed).first;
      const Vec6 sep_dir = *seed - swapped(*seed);
      const Vec6 dir = (T.head<3>() - T.tail<3>()).dot(sep_dir.head<3>()) >= 0 ? T : Vec6(-T);
      MarchResult m = march_pair(sys, *seed, dir, opt, true);

      TrimCurve c;
      c.kind = TrimKind::Singular;
      c.chart1 = c.chart2 = zc.chart_face;
      c.singular_points.push_back(r.param);
      std::vector<Vec6> pts;
      Vec6 root;
      root << p0, p0;
      pts.push_back(root);
      pts.push_back(*seed);
      pts.insert(pts.end(), m.points.begin(), m.points.end());
      if (m.reason == StopReason::Collapse) {
        const Vec6& last = pts.back();
        const Vec3 mid = 0.5 * (last.head<3>() + last.tail<3>());
        double best = kInf;
        Vec3 hit = Vec3::Zero();
        for (const Vec3& q : all_roots) {
          const double d = pdist(dom, q, mid);
          if (d < best) {
            best = d;
            hit = q;
          }
        }
        if (best < 5e-2) {
          Vec6 end;
          end << hit, hit;
          pts.push_back(end);
          c.singular_points.push_back(hit);
        } else {
          c.diagnostics.push_back("pair collapsed away from any known singular trim point");
        }
      } else if (m.reason != StopReason::Boundary) {
        c.diagnostics.push_back(std::string("march stopped: ") + reason_text(m.reason) + (m.note.empty() ? "" : "; " + m.note));
      }
      finish_curve(sys, c, pts);
      out.push_back(std::move(c));
    }
  }
  return out;
}

ContactFit singular_contact(const SweptScene& scene, const TrimCurve& curve, const ThetaZeroCurve& zero,
                            std::size_t root) {
  if (root >= curve.singular_points.size()) throw SweepError(ErrorKind::Domain, "no such singular point");
  const ParamRect dom = scene.face(zero.chart_face).surface->domain();
  const PhiRoot* pr = nullptr;
  for (const auto& r : zero.roots)
    if (pdist(dom, r.param, curve.singular_points[root]) < 1e-3) pr = &r;
  if (!pr) throw SweepError(ErrorKind::Domain, "singular point is not a root of this F⁰ curve");
  const ZeroNode n0 = zero_curve_node(scene, zero, pr->s);
  const Vec3 p0 = n0.point.param();
  const PairSystem sys(scene, zero.chart_face, zero.chart_face);
  const TrimOptions opt;

  ContactFit fit;
  // Tangent from the chord of a tight pair.
  for (double h : {1e-4, 3e-4, 1e-3}) {
    if (auto X = singular_pair(sys, p0, n0.tangent, h, opt)) {
      const Vec3 chord = (X->head<3>() - X->tail<3>()).normalized();
      fit.tangent_angle = std::acos(std::min(1.0, std::abs(chord.dot(n0.tangent))));
      break;
    }
    fit.tangent_angle = kPi / 2;
  }
  // log d against log s over pairs at growing offsets; d = |θ| / |∇θ along the funnel|.
  std::vector<double> xs, ys;
  for (int k = 0; k < 10; ++k) {
    const double h = 2e-3 * std::pow(10.0, 1.2 * k / 9.0);
    const auto X = singular_pair(sys, p0, n0.tangent, h, opt);
    if (!X) continue;
    for (const Vec3& q : {Vec3(X->head<3>()), Vec3(X->tail<3>())}) {
      const SweepJet j = sweep_jet(scene, zero.chart_face, q.x(), q.y(), q.z(), true);
      const double th = theta_extended(scene, zero.chart_face, q.x(), q.y(), q.z(), true);
      const Vec3 g = theta_gradient(scene, zero.chart_face, q.x(), q.y(), q.z());
      const Vec3 nf = j.grad.normalized();
      const double gt = (g - g.dot(nf) * nf).norm();
      const double s = pdist(dom, q, p0);
      const double d = std::abs(th) / gt;
      if (s > 0 && d > 0) {
        xs.push_back(std::log(s));
        ys.push_back(std::log(d));
      }
    }
  }
  fit.points = xs.size();
  if (xs.size() >= 3) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Excision

TrimmedEnvelope excise(const SweptScene& scene, const Funnel& funnel, const std::vector<TrimCurve>& trim_curves,
                       const std::vector<ThetaZeroCurve>& zero_curves, const ExciseOptions& opt) {
  TrimmedEnvelope env;
  env.trim_curves = trim_curves;
  env.left_cap_slice = 0;
  env.right_cap_slice = funnel.slices.empty() ? 0 : funnel.slices.size() - 1;
  const ThetaField th = theta_field(scene, funnel, opt.threads);
  env.excised.resize(funnel.slices.size());
  parallel_for(funnel.slices.size(), opt.threads, [&](std::size_t i) {
    const auto& sl = funnel.slices[i];
    env.excised[i].resize(sl.curves.size());
    for (std::size_t c = 0; c < sl.curves.size(); ++c)
      for (std::size_t k = 0; k < sl.curves[c].points.size(); ++k) {
        // θ < 0 puts a sample in the p-trim set outright; otherwise ask L(p) for an interval.
        const bool in = th[i][c][k] < 0.0 || time_set(scene, sl.curves[c].points[k], opt.time_set).has_interval();
        env.excised[i][c].push_back(in ? 1 : 0);
      }
  });
  auto mask = [&](const SampleId& id) { return env.excised[id.slice][id.curve][id.node] != 0; };
  for (const auto& sl : env.excised)
    for (const auto& c : sl)
      for (char m : c) (m ? env.n_excised : env.n_retained)++;

  // Excised regions: connected components over the sample graph (union-find,
  // so the labelling does not depend on visiting order).
  std::vector<std::pair<SampleId, SampleId>> edges;
  for_each_edge(funnel, [&](const SampleId& a, const SampleId& b) { edges.emplace_back(a, b); });
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> base(funnel.slices.size());
  for (std::size_t i = 0; i < funnel.slices.size(); ++i)
    for (std::size_t c = 0; c < funnel.slices[i].curves.size(); ++c) {
      base[i].push_back(total);
      total += funnel.slices[i].curves[c].points.size();
    }
  std::vector<std::size_t> parent(total);
  for (std::size_t k = 0; k < total; ++k) parent[k] = k;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto flat = [&](const SampleId& id) { return base[id.slice][id.curve] + id.node; };
  std::size_t unexplained = 0, boundary = 0;
  std::vector<std::string> unexplained_at;
  for (const auto& [a, b] : edges) {
    if (mask(a) && mask(b)) parent[find(flat(a))] = find(flat(b));
    if (mask(a) == mask(b)) continue;
    ++boundary;
    const FunnelPoint& pa = sample(funnel, a);
    const FunnelPoint& pb = sample(funnel, b);
    const std::size_t chart = chart_of(scene, pa.face);
    const ParamRect d = scene.face(chart).surface->domain();
    Vec3 qb = pb.param();
    if (d.u_periodic) qb.x() -= d.u_period() * std::round((qb.x() - pa.u) / d.u_period());
    const Vec3 mid = 0.5 * (pa.param() + qb);
    const double r = (qb - pa.param()).norm() + 2.0 * TrimOptions{}.h_max;
    if (near_curve(scene, trim_curves, chart, mid, r)) continue;
    bool along_zero = false;
    for (const auto& z : zero_curves) {
      if (!z.phi_vanishes || z.chart_face != chart) continue;
      for (const auto& n : z.nodes)
        if (pdist(d, n.point.param(), mid) < r) along_zero = true;
    }
    if (along_zero) continue;
    const double ta = th[a.slice][a.curve][a.node], tb = th[b.slice][b.curve][b.node];
    bool jump = false;
    for (double w : scene.face(chart).surface->v_breaks())
      if ((pa.v - w) * (pb.v - w) < 0 && ta * tb < 0) jump = true;
    if (jump) continue;
    ++unexplained;
    if (unexplained_at.size() < 8) {
      std::ostringstream os;
      os << "unexplained boundary between (" << pa.u << ", " << pa.v << ", " << pa.t << ") and (" << pb.u << ", "
         << pb.v << ", " << pb.t << ")";
      unexplained_at.push_back(os.str());
    }
  }
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < funnel.slices.size(); ++i)
    for (std::size_t c = 0; c < funnel.slices[i].curves.size(); ++c)
      for (std::size_t k = 0; k < funnel.slices[i].curves[c].points.size(); ++k)
        if (env.excised[i][c][k]) roots.push_back(find(flat({i, c, k})));
  std::sort(roots.begin(), roots.end());
  env.regions = static_cast<std::size_t>(std::unique(roots.begin(), roots.end()) - roots.begin());
  if (unexplained > 0) {
    env.consistent = false;
    std::ostringstream os;
    os << unexplained << " of " << boundary << " region-boundary edges have no trim curve nearby";
    env.diagnostics.push_back(os.str());
    env.diagnostics.insert(env.diagnostics.end(), unexplained_at.begin(), unexplained_at.end());
    if (opt.strict) throw SweepError(ErrorKind::Excision, os.str());
  }
  return env;
}

}  // namespace sweep
