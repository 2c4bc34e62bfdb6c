#include "sweep/shape.hpp"

#include <algorithm>
#include <sstream>

namespace sweep {

bool ParamRect::contains(double u, double v, double slack) const {
  const bool u_ok = u_periodic || (u >= u0 - slack && u <= u1 + slack);
  const bool v_ok = v_periodic || (v >= v0 - slack && v <= v1 + slack);
  return u_ok && v_ok;
}

Vec2 ParamRect::wrap(double u, double v) const {
  auto wrap1 = [](double x, double a, double b) {
    const double p = b - a;
    double y = std::fmod(x - a, p);
    if (y < 0) y += p;
    return a + y;
  };
  return {u_periodic ? wrap1(u, u0, u1) : u, v_periodic ? wrap1(v, v0, v1) : v};
}

Differential differential(const SurfaceJet& j) {
  const Vec3 n = j.Su.cross(j.Sv);
  const double area = n.norm();
  if (area < kRegularityFloor) {
    std::ostringstream os;
    os << "|S_u x S_v| = " << area << " below " << kRegularityFloor;
    throw SweepError(ErrorKind::Regularity, os.str());
  }
  Differential d;
  d.area = area;
  d.N = n / area;
  Mat2 I;
  I << j.Su.dot(j.Su), j.Su.dot(j.Sv), j.Su.dot(j.Sv), j.Sv.dot(j.Sv);
  Mat2 II;
  II << d.N.dot(j.Suu), d.N.dot(j.Suv), d.N.dot(j.Suv), d.N.dot(j.Svv);
  d.first_form = I;
  // Weingarten: N_u, N_v are tangent and <N_u, S_u> = -<N, S_uu>, etc.
  d.W = -I.inverse() * II;
  d.Nu = d.W(0, 0) * j.Su + d.W(1, 0) * j.Sv;
  d.Nv = d.W(0, 1) * j.Su + d.W(1, 1) * j.Sv;
  return d;
}

Vec3 normal(const Surface& s, double u, double v) { return differential(s.jet(u, v)).N; }

Mat2 shape_operator(const Surface& s, double u, double v) { return differential(s.jet(u, v)).W; }

double normal_curvature(const SurfaceJet& j, const Differential& d, const Vec2& dir) {
  (void)j;
  const double num = (d.first_form * (d.W * dir)).dot(dir);
  const double den = (d.first_form * dir).dot(dir);
  return num / den;
}

// ---------------------------------------------------------------------------

namespace {

struct DirJet {
  Vec3 d, du, dv, duu, duv, dvv;
};

DirJet direction_jet(double u, double v) {
  const double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
  DirJet j;
  j.d = {cv * cu, cv * su, sv};
  j.du = {-cv * su, cv * cu, 0.0};
  j.dv = {-sv * cu, -sv * su, cv};
  j.duu = {-cv * cu, -cv * su, 0.0};
  j.duv = {sv * su, -sv * cu, 0.0};
  j.dvv = {-cv * cu, -cv * su, -sv};
  return j;
}

ParamRect sphere_like_domain() {
  ParamRect r;
  r.u0 = -kPi;
  r.u1 = kPi;
  r.v0 = -kPi / 2 + kPoleMargin;
  r.v1 = kPi / 2 - kPoleMargin;
  r.u_periodic = true;
  return r;
}

}  // namespace

RadialChart::RadialChart(Vec3 center, Mat3 frame, Vec3 axis, RadialProfile profile)
    : center_(std::move(center)), frame_(std::move(frame)), axis_(axis.normalized()),
      profile_(std::move(profile)) {}

SurfaceJet RadialChart::jet(double u, double v) const {
  const DirJet dj = direction_jet(u, v);
  // Work in the chart frame and rotate at the end.
  const Vec3 a = frame_.transpose() * axis_;
  const double s = dj.d.dot(a);
  const double su = dj.du.dot(a), sv = dj.dv.dot(a);
  const double suu = dj.duu.dot(a), suv = dj.duv.dot(a), svv = dj.dvv.dot(a);
  const auto [r, r1, r2] = profile_.eval(s);

  SurfaceJet j;
  j.S = r * dj.d;
  j.Su = r1 * su * dj.d + r * dj.du;
  j.Sv = r1 * sv * dj.d + r * dj.dv;
  j.Suu = (r2 * su * su + r1 * suu) * dj.d + 2.0 * r1 * su * dj.du + r * dj.duu;
  j.Svv = (r2 * sv * sv + r1 * svv) * dj.d + 2.0 * r1 * sv * dj.dv + r * dj.dvv;
  j.Suv = (r2 * su * sv + r1 * suv) * dj.d + r1 * su * dj.dv + r1 * sv * dj.du + r * dj.duv;

  j.S = center_ + frame_ * j.S;
  j.Su = frame_ * j.Su;
  j.Sv = frame_ * j.Sv;
  j.Suu = frame_ * j.Suu;
  j.Suv = frame_ * j.Suv;
  j.Svv = frame_ * j.Svv;
  return j;
}

ParamRect RadialChart::domain() const { return sphere_like_domain(); }

EllipsoidChart::EllipsoidChart(Vec3 center, Vec3 axes, Mat3 frame)
    : center_(std::move(center)), axes_(std::move(axes)), frame_(std::move(frame)) {}

SurfaceJet EllipsoidChart::jet(double u, double v) const {
  const DirJet dj = direction_jet(u, v);
  const Mat3 D = axes_.asDiagonal() * frame_;
  return {center_ + D * dj.d, D * dj.du, D * dj.dv, D * dj.duu, D * dj.duv, D * dj.dvv};
}

ParamRect EllipsoidChart::domain() const { return sphere_like_domain(); }

CapsuleChart::CapsuleChart(double radius, double half_height) : radius_(radius), half_height_(half_height) {
  if (radius <= 0 || half_height < 0) throw SweepError(ErrorKind::Domain, "capsule needs r > 0, h >= 0");
}

SurfaceJet CapsuleChart::jet(double u, double w) const {
  const double r = radius_, hh = half_height_;
  const double cu = std::cos(u), su = std::sin(u);
  SurfaceJet j;
  if (std::abs(w) <= hh) {
    j.S = {r * cu, r * su, w};
    j.Su = {-r * su, r * cu, 0.0};
    j.Sv = {0.0, 0.0, 1.0};
    j.Suu = {-r * cu, -r * su, 0.0};
    j.Suv = Vec3::Zero();
    j.Svv = Vec3::Zero();
    return j;
  }
  const double z0 = w > 0 ? hh : -hh;
  const double b = (w - z0) / r;
  const double cb = std::cos(b), sb = std::sin(b);
  j.S = {r * cb * cu, r * cb * su, z0 + r * sb};
  j.Su = {-r * cb * su, r * cb * cu, 0.0};
  j.Sv = {-sb * cu, -sb * su, cb};
  j.Suu = {-r * cb * cu, -r * cb * su, 0.0};
  j.Suv = {sb * su, -sb * cu, 0.0};
  j.Svv = Vec3(cb * cu, cb * su, sb) * (-1.0 / r);
  return j;
}

ParamRect CapsuleChart::domain() const {
  ParamRect d;
  const double reach = half_height_ + radius_ * (kPi / 2 - kPoleMargin);
  d.u0 = -kPi;
  d.u1 = kPi;
  d.v0 = -reach;
  d.v1 = reach;
  d.u_periodic = true;
  return d;
}

// ---------------------------------------------------------------------------

Vec2 ChartMap::apply(const Vec2& ab) const {
  return M * ab + c + Vec2(e.x() * std::sin(ab.y()), e.y() * std::sin(ab.x()));
}

Mat2 ChartMap::jacobian(const Vec2& ab) const {
  Mat2 J = M;
  J(0, 1) += e.x() * std::cos(ab.y());
  J(1, 0) += e.y() * std::cos(ab.x());
  return J;
}

Vec2 ChartMap::invert(const Vec2& uv, const Vec2& guess) const {
  Vec2 ab = guess;
  for (int it = 0; it < 60; ++it) {
    const Vec2 r = apply(ab) - uv;
    if (r.norm() < 1e-15 * (1.0 + uv.norm())) return ab;
    ab -= jacobian(ab).partialPivLu().solve(r);
  }
  if ((apply(ab) - uv).norm() > 1e-10) throw SweepError(ErrorKind::Domain, "chart map inversion failed");
  return ab;
}

ReparamSurface::ReparamSurface(SurfacePtr base, ChartMap map) : base_(std::move(base)), map_(std::move(map)) {
  if (std::abs(map_.M.determinant()) < 1e-6) throw SweepError(ErrorKind::Domain, "singular chart map");
}

SurfaceJet ReparamSurface::jet(double a, double b) const {
  const Vec2 ab(a, b);
  const Vec2 uv = map_.apply(ab);
  const SurfaceJet s = base_->jet(uv.x(), uv.y());
  const Mat2 J = map_.jacobian(ab);
  // Second derivatives of phi: only the sine terms contribute.
  const Vec2 phi_aa(0.0, -map_.e.y() * std::sin(a));
  const Vec2 phi_bb(-map_.e.x() * std::sin(b), 0.0);
  const Vec3 Sa = s.Su * J(0, 0) + s.Sv * J(1, 0);
  const Vec3 Sb = s.Su * J(0, 1) + s.Sv * J(1, 1);
  auto second = [&](int i, int k, const Vec2& phi_ik) {
    const double ui = J(0, i), vi = J(1, i), uk = J(0, k), vk = J(1, k);
    return Vec3(s.Suu * ui * uk + s.Suv * (ui * vk + vi * uk) + s.Svv * vi * vk + s.Su * phi_ik.x() +
                s.Sv * phi_ik.y());
  };
  return {s.S, Sa, Sb, second(0, 0, phi_aa), second(0, 1, Vec2::Zero()), second(1, 1, phi_bb)};
}

ParamRect ReparamSurface::domain() const {
  // The image of the rectangle is not a rectangle; callers choose (a, b) by
  // inverting the map from base-chart points.
  ParamRect d;
  d.u0 = d.v0 = -1e9;
  d.u1 = d.v1 = 1e9;
  return d;
}

Mat3 pole_frame(const Vec3& axis) {
  const Vec3 z = axis.normalized();
  if ((z - Vec3::UnitZ()).norm() < 1e-15) return Mat3::Identity();
  // Pick x orthogonal to z, leaning on whichever world axis is least aligned.
  Vec3 helper = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  if (std::abs(z.z()) < 0.9 && std::abs(z.x()) >= 0.9) helper = Vec3::UnitZ();
  const Vec3 x = (helper - helper.dot(z) * z).normalized();
  Mat3 R;
  R << x, z.cross(x), z;
  return R;
}

SurfacePtr make_sphere_chart(const Vec3& center, double radius, const Mat3& frame) {
  RadialProfile p{[radius](double) { return std::array<double, 3>{radius, 0.0, 0.0}; }, "sphere"};
  return std::make_shared<RadialChart>(center, frame, Vec3::UnitZ(), std::move(p));
}

SurfacePtr make_cassini_chart(double a, double c) {
  const double k = std::pow(a, 4) - std::pow(c, 4);
  if (!(a > c && c >= 0)) throw SweepError(ErrorKind::Domain, "dumbbell needs a > c >= 0");
  const double c2 = c * c;
  // rho^2 = -c^2 C + sqrt(c^4 C^2 + k),  C = 1 - 2 s^2, s = cos of angle to the x axis.
  RadialProfile p{[c2, k](double s) {
                    const double C = 1.0 - 2.0 * s * s;
                    const double Cs = -4.0 * s, Css = -4.0;
                    const double q = std::sqrt(c2 * c2 * C * C + k);
                    const double qC = c2 * c2 * C / q;
                    const double qCC = c2 * c2 * k / (q * q * q);
                    const double g = -c2 * C + q;  // rho^2 as a function of C
                    const double gC = -c2 + qC;
                    const double gCC = qCC;
                    const double gs = gC * Cs;
                    const double gss = gCC * Cs * Cs + gC * Css;
                    const double rho = std::sqrt(g);
                    const double rs = gs / (2.0 * rho);
                    const double rss = gss / (2.0 * rho) - gs * gs / (4.0 * g * rho);
                    return std::array<double, 3>{rho, rs, rss};
                  },
                  "dumbbell"};
  // Columns are the world images of the chart axes; the chart poles land on -+y.
  Mat3 R;
  R << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  return std::make_shared<RadialChart>(Vec3::Zero(), R, Vec3::UnitX(), std::move(p));
}

// ---------------------------------------------------------------------------

double Primitive::signed_measure(const Vec3& x) const {
  const Vec3 q = frame.transpose() * (x - center);
  switch (kind) {
    case PrimitiveKind::Sphere:
      return q.norm() - p[0];
    case PrimitiveKind::Ellipsoid: {
      const Vec3 a2(p[0] * p[0], p[1] * p[1], p[2] * p[2]);
      const double F = q.x() * q.x() / a2.x() + q.y() * q.y() / a2.y() + q.z() * q.z() / a2.z() - 1.0;
      const Vec3 g(2 * q.x() / a2.x(), 2 * q.y() / a2.y(), 2 * q.z() / a2.z());
      return F / std::max(g.norm(), 1e-300);
    }
    case PrimitiveKind::Capsule: {
      const double zc = std::clamp(q.z(), -p[1], p[1]);
      return Vec3(q.x(), q.y(), q.z() - zc).norm() - p[0];
    }
    case PrimitiveKind::Cassini: {
      const double a = p[0], c = p[1];
      const double c2 = c * c, r2 = q.squaredNorm();
      const double F = r2 * r2 - 2.0 * c2 * (q.x() * q.x() - q.y() * q.y() - q.z() * q.z()) -
                       (a * a * a * a - c2 * c2);
      const Vec3 g = 4.0 * r2 * q - 4.0 * c2 * Vec3(q.x(), -q.y(), -q.z());
      return F / std::max(g.norm(), 1e-12);
    }
    case PrimitiveKind::None:
      break;
  }
  throw SweepError(ErrorKind::Domain, "solid has no closed-form membership");
}

Vec3 Primitive::outward_normal(const Vec3& x) const {
  const Vec3 q = frame.transpose() * (x - center);
  Vec3 g;
  switch (kind) {
    case PrimitiveKind::Sphere:
      g = q;
      break;
    case PrimitiveKind::Ellipsoid:
      g = Vec3(q.x() / (p[0] * p[0]), q.y() / (p[1] * p[1]), q.z() / (p[2] * p[2]));
      break;
    case PrimitiveKind::Capsule:
      g = Vec3(q.x(), q.y(), q.z() - std::clamp(q.z(), -p[1], p[1]));
      break;
    case PrimitiveKind::Cassini:
      g = q.squaredNorm() * q - p[1] * p[1] * Vec3(q.x(), -q.y(), -q.z());
      break;
    case PrimitiveKind::None:
      throw SweepError(ErrorKind::Domain, "solid has no closed-form membership");
  }
  const double n = g.norm();
  if (n < 1e-300) throw SweepError(ErrorKind::Regularity, "implicit gradient vanishes");
  return frame * (g / n);
}

double Primitive::bounding_radius() const {
  switch (kind) {
    case PrimitiveKind::Sphere: return p[0];
    case PrimitiveKind::Ellipsoid: return std::max({p[0], p[1], p[2]});
    case PrimitiveKind::Capsule: return p[0] + p[1];
    case PrimitiveKind::Cassini: return std::sqrt(p[0] * p[0] + p[1] * p[1]);
    case PrimitiveKind::None: break;
  }
  throw SweepError(ErrorKind::Domain, "solid has no closed-form membership");
}

const char* to_string(Containment c) {
  switch (c) {
    case Containment::Inside: return "Inside";
    case Containment::OnBoundary: return "OnBoundary";
    case Containment::Outside: return "Outside";
  }
  return "?";
}

double Solid::signed_measure(const Vec3& x) const { return primitive.signed_measure(x); }

Containment Solid::contains(const Vec3& x, double tol) const {
  const double m = signed_measure(x);
  if (std::abs(m) <= tol) return Containment::OnBoundary;
  return m < 0 ? Containment::Inside : Containment::Outside;
}

namespace solids {

Solid sphere(const Vec3& center, double radius, const Vec3& pole_axis) {
  Solid s;
  s.name = "sphere";
  auto surf = make_sphere_chart(center, radius, pole_frame(pole_axis));
  s.faces.push_back({"sphere", surf, surf->domain()});
  s.primitive.kind = PrimitiveKind::Sphere;
  s.primitive.center = center;
  s.primitive.p = {radius, 0, 0, 0};
  return s;
}

Solid ellipsoid(const Vec3& center, const Vec3& axes, const Vec3& pole_axis) {
  Solid s;
  s.name = "ellipsoid";
  auto surf = std::make_shared<EllipsoidChart>(center, axes, pole_frame(pole_axis));
  s.faces.push_back({"ellipsoid", surf, surf->domain()});
  s.primitive.kind = PrimitiveKind::Ellipsoid;
  s.primitive.center = center;
  s.primitive.p = {axes.x(), axes.y(), axes.z(), 0};
  return s;
}

Solid capsule(double radius, double half_height) {
  Solid s;
  s.name = "capsule";
  auto surf = std::make_shared<CapsuleChart>(radius, half_height);
  const ParamRect full = surf->domain();
  ParamRect bottom = full, side = full, top = full;
  bottom.v1 = -half_height;
  side.v0 = -half_height;
  side.v1 = half_height;
  top.v0 = half_height;
  s.faces.push_back({"cap_bottom", surf, bottom});
  s.faces.push_back({"cylinder", surf, side});
  s.faces.push_back({"cap_top", surf, top});
  s.edges.push_back({"rim_bottom", 1, Vec2(0.0, -half_height), Vec2::UnitX(), {-kPi, kPi}, true});
  s.edges.push_back({"rim_top", 1, Vec2(0.0, half_height), Vec2::UnitX(), {-kPi, kPi}, true});
  s.primitive.kind = PrimitiveKind::Capsule;
  s.primitive.p = {radius, half_height, 0, 0};
  return s;
}

Solid dumbbell(double a, double c) {
  Solid s;
  s.name = "dumbbell";
  auto surf = make_cassini_chart(a, c);
  s.faces.push_back({"dumbbell", surf, surf->domain()});
  s.primitive.kind = PrimitiveKind::Cassini;
  s.primitive.p = {a, c, 0, 0};
  return s;
}

}  // namespace solids

// ---------------------------------------------------------------------------

Projection project_to_surface(const Surface& s, const Vec3& x, double u_seed, double v_seed, int max_iter) {
  const ParamRect dom = s.domain();
  Vec2 p(u_seed, v_seed);
  int it = 0;
  for (; it < max_iter; ++it) {
    const SurfaceJet j = s.jet(p.x(), p.y());
    const Vec3 r = j.S - x;
    const Vec2 g(r.dot(j.Su), r.dot(j.Sv));
    Mat2 H;
    H << j.Su.dot(j.Su) + r.dot(j.Suu), j.Su.dot(j.Sv) + r.dot(j.Suv), j.Su.dot(j.Sv) + r.dot(j.Suv),
        j.Sv.dot(j.Sv) + r.dot(j.Svv);
    Mat2 Hgn;
    Hgn << j.Su.dot(j.Su), j.Su.dot(j.Sv), j.Su.dot(j.Sv), j.Sv.dot(j.Sv);
    Eigen::LDLT<Mat2> ldlt(H);
    Vec2 step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && H.determinant() > 1e-14) {
      step = -ldlt.solve(g);
    } else {
      step = -Hgn.ldlt().solve(g);
    }
    // Keep single steps modest so the iterate stays in the seed's basin.
    const double sn = step.norm();
    if (sn > 0.5) step *= 0.5 / sn;
    p += step;
    if (!dom.v_periodic) p.y() = std::clamp(p.y(), dom.v0, dom.v1);
    if (!dom.u_periodic) p.x() = std::clamp(p.x(), dom.u0, dom.u1);
    if (step.norm() < 1e-14 * (1.0 + p.norm())) break;
  }
  const SurfaceJet j = s.jet(p.x(), p.y());
  const Vec3 r = x - j.S;
  const Differential d = differential(j);
  const Vec3 tangential = r - r.dot(d.N) * d.N;
  if (tangential.norm() > 1e-9 * (1.0 + r.norm())) {
    std::ostringstream os;
    os << "projection did not converge (tangential residual " << tangential.norm() << ")";
    throw SweepError(ErrorKind::Projection, os.str());
  }
  Projection out;
  out.u = p.x();
  out.v = p.y();
  out.point = j.S;
  out.normal = d.N;
  out.signed_distance = r.dot(d.N);
  out.iterations = it;
  return out;
}

Vec2 grid_seed(const Surface& s, const Vec3& x, int n) {
  const ParamRect d = s.domain();
  Vec2 best(0.5 * (d.u0 + d.u1), 0.5 * (d.v0 + d.v1));
  double best_d = kInf;
  for (int i = 0; i < n; ++i) {
    const double u = d.u0 + (d.u1 - d.u0) * (i + 0.5) / n;
    for (int k = 0; k < n; ++k) {
      const double v = d.v0 + (d.v1 - d.v0) * (k + 0.5) / n;
      const double dist = (s.eval(u, v) - x).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = {u, v};
      }
    }
  }
  return best;
}

}  // namespace sweep
