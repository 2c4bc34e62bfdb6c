#include "sweep/motion.hpp"

#include <sstream>

namespace sweep {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Regularity: return "regularity error";
    case ErrorKind::Tracing: return "tracing error";
    case ErrorKind::DegenerateSlice: return "degenerate slice";
    case ErrorKind::NotOnFunnel: return "not on funnel";
    case ErrorKind::Projection: return "projection error";
    case ErrorKind::NonGeneric: return "non-generic configuration";
    case ErrorKind::SingularSeed: return "singular seed error";
    case ErrorKind::Evaluation: return "evaluation error";
    case ErrorKind::Derivative: return "derivative error";
    case ErrorKind::SeedBuild: return "seed build error";
    case ErrorKind::Excision: return "excision error";
    case ErrorKind::Resource: return "resource error";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

RigidMotion::RigidMotion(Interval interval, JetFn jet, std::string description)
    : interval_(interval), jet_(std::move(jet)), description_(std::move(description)) {
  if (!(interval_.lo < interval_.hi)) {
    throw SweepError(ErrorKind::Domain, "motion interval must satisfy t0 < t1");
  }
}

void RigidMotion::check_time(double t) const {
  // Admit round-off at the endpoints.
  const double slack = 1e-12 * std::max(1.0, interval_.length());
  if (!interval_.contains(t, slack)) {
    std::ostringstream os;
    os << "time " << t << " outside [" << interval_.lo << ", " << interval_.hi << "]";
    throw SweepError(ErrorKind::Domain, os.str());
  }
}

Pose RigidMotion::evaluate(double t) const {
  check_time(t);
  return jet_(t).pose();
}

MotionJet RigidMotion::jet(double t) const {
  check_time(t);
  return jet_(t);
}

Vec3 RigidMotion::velocity(const Vec3& x, double t) const {
  const MotionJet j = jet(t);
  return j.dA * x + j.db;
}

Vec3 RigidMotion::inverse_trajectory_point(const Vec3& x, double t) const {
  return evaluate(t).apply_inverse(x);
}

RigidMotion RigidMotion::inverse() const {
  JetFn base = jet_;
  return RigidMotion(
      interval_,
      [base](double t) {
        const MotionJet j = base(t);
        MotionJet r;
        r.A = j.A.transpose();
        r.dA = j.dA.transpose();
        r.ddA = j.ddA.transpose();
        r.b = -r.A * j.b;
        r.db = -(r.dA * j.b + r.A * j.db);
        r.ddb = -(r.ddA * j.b + 2.0 * r.dA * j.db + r.A * j.ddb);
        return r;
      },
      "inverse(" + description_ + ")");
}

RigidMotion RigidMotion::rebased(double t0) const {
  const Pose p0 = evaluate(t0);
  const Mat3 A0t = p0.A.transpose();
  const Vec3 b0 = p0.b;
  JetFn base = jet_;
  std::ostringstream os;
  os << "rebased(" << description_ << ", t0=" << t0 << ")";
  return RigidMotion(
      interval_,
      [base, A0t, b0](double t) {
        // x -> A(t) A0^T (x - b0) + b(t)
        const MotionJet j = base(t);
        MotionJet r;
        r.A = j.A * A0t;
        r.dA = j.dA * A0t;
        r.ddA = j.ddA * A0t;
        r.b = j.b - r.A * b0;
        r.db = j.db - r.dA * b0;
        r.ddb = j.ddb - r.ddA * b0;
        return r;
      },
      os.str());
}

RigidMotion RigidMotion::with_interval(Interval interval) const {
  return RigidMotion(interval, jet_, description_);
}

RigidMotion compose(const RigidMotion& outer, const RigidMotion& inner) {
  RigidMotion::JetFn f1 = [outer](double t) { return outer.jet_unchecked(t); };
  RigidMotion::JetFn f2 = [inner](double t) { return inner.jet_unchecked(t); };
  return RigidMotion(
      outer.interval(),
      [f1, f2](double t) {
        const MotionJet a = f1(t);
        const MotionJet c = f2(t);
        MotionJet r;
        r.A = a.A * c.A;
        r.dA = a.dA * c.A + a.A * c.dA;
        r.ddA = a.ddA * c.A + 2.0 * a.dA * c.dA + a.A * c.ddA;
        r.b = a.A * c.b + a.b;
        r.db = a.dA * c.b + a.A * c.db + a.db;
        r.ddb = a.ddA * c.b + 2.0 * a.dA * c.db + a.A * c.ddb + a.ddb;
        return r;
      },
      outer.description() + " o " + inner.description());
}

Mat3 axis_rotation(const Vec3& axis, double angle) {
  const Mat3 k = hat(axis.normalized());
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

namespace motions {

RigidMotion identity(Interval interval) {
  return RigidMotion(interval, [](double) { return MotionJet{}; }, "identity");
}

RigidMotion constant(Interval interval, const Mat3& A, const Vec3& b) {
  return RigidMotion(
      interval,
      [A, b](double) {
        MotionJet j;
        j.A = A;
        j.b = b;
        return j;
      },
      "constant");
}

RigidMotion translation_line(Interval interval, const Vec3& origin, const Vec3& velocity) {
  return RigidMotion(
      interval,
      [origin, velocity](double t) {
        MotionJet j;
        j.b = origin + t * velocity;
        j.db = velocity;
        return j;
      },
      "translation-line");
}

RigidMotion translation_circle(Interval interval, const Vec3& center, double radius, double rate,
                               double phase) {
  return RigidMotion(
      interval,
      [=](double t) {
        const double a = rate * t + phase;
        const double c = std::cos(a), s = std::sin(a);
        MotionJet j;
        j.b = center + radius * Vec3(c, s, 0.0);
        j.db = radius * rate * Vec3(-s, c, 0.0);
        j.ddb = -radius * rate * rate * Vec3(c, s, 0.0);
        return j;
      },
      "translation-circle");
}

RigidMotion translation_parabola(Interval interval, const Vec3& origin, const Vec3& dir,
                                 const Vec3& normal, double speed, double bend) {
  return RigidMotion(
      interval,
      [=](double t) {
        MotionJet j;
        j.b = origin + speed * t * dir + bend * t * t * normal;
        j.db = speed * dir + 2.0 * bend * t * normal;
        j.ddb = 2.0 * bend * normal;
        return j;
      },
      "translation-parabola");
}

RigidMotion helix(Interval interval, double radius, double rate, double rise) {
  return RigidMotion(
      interval,
      [=](double t) {
        const double a = rate * t;
        const double c = std::cos(a), s = std::sin(a);
        MotionJet j;
        j.b = Vec3(radius * c, radius * s, rise * t);
        j.db = Vec3(-radius * rate * s, radius * rate * c, rise);
        j.ddb = Vec3(-radius * rate * rate * c, -radius * rate * rate * s, 0.0);
        return j;
      },
      "helix");
}

RigidMotion rotation(Interval interval, const Vec3& axis, double rate, double phase) {
  const Mat3 k = hat(axis.normalized());
  const Mat3 k2 = k * k;
  return RigidMotion(
      interval,
      [=](double t) {
        const double a = rate * t + phase;
        const double c = std::cos(a), s = std::sin(a);
        MotionJet j;
        j.A = Mat3::Identity() + s * k + (1.0 - c) * k2;
        j.dA = rate * (c * k + s * k2);
        j.ddA = rate * rate * (-s * k + c * k2);
        return j;
      },
      "rotation");
}

RigidMotion screw(Interval interval, const Vec3& axis, double rate, double pitch) {
  const Vec3 n = axis.normalized();
  RigidMotion spin = rotation(interval, n, rate);
  RigidMotion advance = translation_line(interval, Vec3::Zero(), pitch * n);
  RigidMotion m = compose(advance, spin);
  return RigidMotion(interval, [m](double t) { return m.jet_unchecked(t); }, "screw");
}

}  // namespace motions

const char* to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::TranslationLine: return "translation-line";
    case MotionKind::TranslationCircle: return "translation-circle";
    case MotionKind::TranslationParabola: return "translation-parabola";
    case MotionKind::Helix: return "helix";
    case MotionKind::Screw: return "screw";
    case MotionKind::ComposedRotation: return "composed-rotation";
  }
  return "?";
}

MotionKind motion_kind_from_string(const std::string& name) {
  for (MotionKind k : {MotionKind::TranslationLine, MotionKind::TranslationCircle,
                       MotionKind::TranslationParabola, MotionKind::Helix, MotionKind::Screw,
                       MotionKind::ComposedRotation}) {
    if (name == to_string(k)) return k;
  }
  throw SweepError(ErrorKind::Config, "unknown motion kind '" + name + "'");
}

namespace {

using ParamMap = std::map<std::string, std::vector<double>>;

ParamMap defaults_for(MotionKind kind) {
  switch (kind) {
    case MotionKind::TranslationLine:
      return {{"origin", {0, 0, 0}}, {"velocity", {1, 0, 0}}};
    case MotionKind::TranslationCircle:
      return {{"center", {0, 0, 0}}, {"radius", {0.5}}, {"rate", {2.0}}, {"phase", {0.0}}};
    case MotionKind::TranslationParabola:
      return {{"origin", {0, 0, 0}}, {"dir", {1, 0, 0}}, {"normal", {0, 1, 0}},
              {"speed", {1.0}},      {"bend", {1.0}}};
    case MotionKind::Helix:
      return {{"radius", {1.5}}, {"rate", {2.0 * kPi}}, {"rise", {4.0}}};
    case MotionKind::Screw:
      return {{"axis", {0, 0, 1}}, {"rate", {kPi}}, {"pitch", {1.0}}};
    case MotionKind::ComposedRotation:
      return {};
  }
  return {};
}

Vec3 vec3(const ParamMap& p, const std::string& key) {
  const auto& v = p.at(key);
  if (v.size() != 3) throw SweepError(ErrorKind::Config, "parameter '" + key + "' needs 3 values");
  return {v[0], v[1], v[2]};
}

double scalar(const ParamMap& p, const std::string& key) {
  const auto& v = p.at(key);
  if (v.size() != 1) throw SweepError(ErrorKind::Config, "parameter '" + key + "' needs 1 value");
  return v[0];
}

RigidMotion build_basic(MotionKind kind, Interval I, const ParamMap& p) {
  switch (kind) {
    case MotionKind::TranslationLine:
      return motions::translation_line(I, vec3(p, "origin"), vec3(p, "velocity"));
    case MotionKind::TranslationCircle:
      return motions::translation_circle(I, vec3(p, "center"), scalar(p, "radius"),
                                         scalar(p, "rate"), scalar(p, "phase"));
    case MotionKind::TranslationParabola:
      return motions::translation_parabola(I, vec3(p, "origin"), vec3(p, "dir").normalized(),
                                           vec3(p, "normal").normalized(), scalar(p, "speed"),
                                           scalar(p, "bend"));
    case MotionKind::Helix:
      return motions::helix(I, scalar(p, "radius"), scalar(p, "rate"), scalar(p, "rise"));
    case MotionKind::Screw:
      return motions::screw(I, vec3(p, "axis"), scalar(p, "rate"), scalar(p, "pitch"));
    case MotionKind::ComposedRotation:
      break;
  }
  throw SweepError(ErrorKind::Config, "composed-rotation cannot be a base family");
}

}  // namespace

ParamMap MotionFamily::resolved() const {
  ParamMap out = kind == MotionKind::ComposedRotation ? defaults_for(base) : defaults_for(kind);
  if (kind == MotionKind::ComposedRotation) {
    out["rot_axis"] = {0, 1, 0};
    out["rot_rate"] = {0.25};
    out["rot_phase"] = {0.0};
  }
  out["offset"] = {0, 0, 0};
  for (const auto& [key, value] : params) {
    if (!out.count(key)) {
      throw SweepError(ErrorKind::Config,
                       "unknown parameter '" + key + "' for motion " + to_string(kind));
    }
    out[key] = value;
  }
  return out;
}

RigidMotion MotionFamily::build() const {
  const ParamMap p = resolved();
  RigidMotion m = [&] {
    if (kind != MotionKind::ComposedRotation) return build_basic(kind, interval, p);
    RigidMotion b = build_basic(base, interval, p);
    RigidMotion r = motions::rotation(interval, vec3(p, "rot_axis"), scalar(p, "rot_rate"),
                                      scalar(p, "rot_phase"));
    return compose(b, r);
  }();
  const Vec3 offset = vec3(p, "offset");
  if (offset.norm() > 0.0) {
    m = compose(m, motions::constant(interval, Mat3::Identity(), offset));
  }
  return m;
}

}  // namespace sweep
