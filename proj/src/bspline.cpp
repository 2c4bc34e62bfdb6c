#include "sweep/bspline.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace sweep {

BSplineBasis BSplineBasis::clamped_uniform(int degree, int n_ctrl, double lo, double hi) {
  if (degree < 1 || degree > 7 || n_ctrl < degree + 1) throw SweepError(ErrorKind::SeedBuild, "bad clamped basis size");
  BSplineBasis b;
  b.degree_ = degree;
  b.n_ctrl_ = n_ctrl;
  b.lo_ = lo;
  b.hi_ = hi;
  const int interior = n_ctrl - degree - 1;
  for (int i = 0; i <= degree; ++i) b.knots_.push_back(lo);
  for (int i = 1; i <= interior; ++i) b.knots_.push_back(lo + (hi - lo) * i / (interior + 1));
  for (int i = 0; i <= degree; ++i) b.knots_.push_back(hi);
  return b;
}

BSplineBasis BSplineBasis::periodic_uniform(int degree, int n_ctrl, double lo, double hi) {
  if (degree < 1 || degree > 7 || n_ctrl < degree + 1) throw SweepError(ErrorKind::SeedBuild, "bad periodic basis size");
  BSplineBasis b;
  b.degree_ = degree;
  b.n_ctrl_ = n_ctrl;
  b.periodic_ = true;
  b.lo_ = lo;
  b.hi_ = hi;
  const double step = (hi - lo) / n_ctrl;
  for (int i = 0; i <= n_ctrl + 2 * degree; ++i) b.knots_.push_back(lo + (i - degree) * step);
  return b;
}

BSplineBasis BSplineBasis::from_knots(int degree, std::vector<double> knots) {
  BSplineBasis b;
  b.degree_ = degree;
  b.n_ctrl_ = static_cast<int>(knots.size()) - degree - 1;
  if (degree < 1 || degree > 7 || b.n_ctrl_ < degree + 1) throw SweepError(ErrorKind::Domain, "bad knot vector length");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (knots[i] < knots[i - 1]) throw SweepError(ErrorKind::Domain, "knots must be nondecreasing");
  b.knots_ = std::move(knots);
  b.lo_ = b.knots_[degree];
  b.hi_ = b.knots_[b.n_ctrl_];
  return b;
}

void BSplineBasis::evaluate(double x, int nd, int& first, double ders[3][8]) const {
  const int p = degree_;
  const std::vector<double>& U = knots_;
  int span;
  if (periodic_) {
    const double P = hi_ - lo_;
    x = lo_ + std::fmod(x - lo_, P);
    if (x < lo_) x += P;
    const double step = P / n_ctrl_;
    span = p + std::min(n_ctrl_ - 1, static_cast<int>(std::floor((x - lo_) / step)));
  } else {
    x = std::clamp(x, lo_, hi_);
    span = n_ctrl_ - 1;
    if (x < hi_) {
      span = static_cast<int>(std::upper_bound(U.begin() + p, U.begin() + n_ctrl_ + 1, x) - U.begin()) - 1;
    }
  }
  first = span - p;

  // Derivatives of the basis functions (Piegl & Tiller, A2.3).
  double ndu[8][8], left[8], right[8], a[2][8];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= nd; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  int r = p;
  for (int k = 1; k <= nd; ++k) {
    for (int j = 0; j <= p; ++j) ders[k][j] *= r;
    r *= (p - k);
  }
  for (int k = nd + 1; k < 3; ++k)
    for (int j = 0; j <= p; ++j) ders[k][j] = 0.0;
}

Eigen::MatrixXd collocation_matrix(const BSplineBasis& basis, const std::vector<double>& xs) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()), basis.n_ctrl());
  double N[3][8];
  int first = 0;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    basis.evaluate(xs[r], 0, first, N);
    for (int i = 0; i <= basis.degree(); ++i) B(static_cast<Eigen::Index>(r), basis.wrap(first + i)) += N[0][i];
  }
  return B;
}

template <int Dim>
TensorSpline<Dim> fit_tensor_spline(const BSplineBasis& a, const BSplineBasis& b, const std::vector<double>& xs,
                                    const std::vector<double>& ys,
                                    const std::vector<std::vector<Eigen::Matrix<double, Dim, 1>>>& values) {
  const Eigen::MatrixXd Ba = collocation_matrix(a, xs);
  const Eigen::MatrixXd Bb = collocation_matrix(b, ys);
  const auto qa = Ba.colPivHouseholderQr();
  const auto qb = Bb.colPivHouseholderQr();
  if (qa.rank() < a.n_ctrl() || qb.rank() < b.n_ctrl())
    throw SweepError(ErrorKind::SeedBuild, "too few samples for the requested spline");
  std::vector<Eigen::Matrix<double, Dim, 1>> ctrl(static_cast<std::size_t>(a.n_ctrl()) * b.n_ctrl());
  for (int d = 0; d < Dim; ++d) {
    Eigen::MatrixXd Y(xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j) Y(i, j) = values[i][j][d];
    // C = Ba^+ Y (Bb^+)^T
    const Eigen::MatrixXd T = qa.solve(Y);                        // n_a x |ys|
    const Eigen::MatrixXd C = qb.solve(T.transpose()).transpose();  // n_a x n_b
    for (int i = 0; i < a.n_ctrl(); ++i)
      for (int j = 0; j < b.n_ctrl(); ++j) ctrl[static_cast<std::size_t>(i) * b.n_ctrl() + j][d] = C(i, j);
  }
  return TensorSpline<Dim>(a, b, std::move(ctrl));
}

template TensorSpline<2> fit_tensor_spline<2>(const BSplineBasis&, const BSplineBasis&, const std::vector<double>&,
                                              const std::vector<double>&,
                                              const std::vector<std::vector<Eigen::Matrix<double, 2, 1>>>&);
template TensorSpline<3> fit_tensor_spline<3>(const BSplineBasis&, const BSplineBasis&, const std::vector<double>&,
                                              const std::vector<double>&,
                                              const std::vector<std::vector<Eigen::Matrix<double, 3, 1>>>&);

// ---------------------------------------------------------------------------

BSplineSurface::BSplineSurface(TensorSpline<3> spline, std::string name)
    : spline_(std::move(spline)), name_(std::move(name)) {}

std::shared_ptr<BSplineSurface> BSplineSurface::parse(const std::string& text, const std::string& name) {
  std::istringstream lines(text);
  std::ostringstream clean;
  std::string line;
  while (std::getline(lines, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    clean << line << '\n';
  }
  std::istringstream in(clean.str());
  int pu = 0, pv = 0, nu = 0, nv = 0;
  if (!(in >> pu >> pv >> nu >> nv)) throw SweepError(ErrorKind::Config, name + ": missing degrees or control counts");
  auto read_knots = [&](int n, int p) {
    std::vector<double> k(static_cast<std::size_t>(n + p + 1));
    for (auto& x : k)
      if (!(in >> x)) throw SweepError(ErrorKind::Config, name + ": truncated knot vector");
    return k;
  };
  const auto ku = read_knots(nu, pu);
  const auto kv = read_knots(nv, pv);
  std::vector<Vec3> ctrl(static_cast<std::size_t>(nu) * nv);
  for (auto& c : ctrl)
    if (!(in >> c.x() >> c.y() >> c.z())) throw SweepError(ErrorKind::Config, name + ": truncated control net");
  double extra;
  if (in >> extra) throw SweepError(ErrorKind::Config, name + ": trailing data after control net");
  return std::make_shared<BSplineSurface>(
      TensorSpline<3>(BSplineBasis::from_knots(pu, ku), BSplineBasis::from_knots(pv, kv), std::move(ctrl)), name);
}

std::shared_ptr<BSplineSurface> BSplineSurface::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SweepError(ErrorKind::Config, "cannot open spline file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

std::string BSplineSurface::serialize() const {
  std::ostringstream os;
  os << std::setprecision(17);
  const auto& a = spline_.basis_a();
  const auto& b = spline_.basis_b();
  os << a.degree() << ' ' << b.degree() << '\n' << a.n_ctrl() << ' ' << b.n_ctrl() << '\n';
  for (double k : a.knots()) os << k << ' ';
  os << '\n';
  for (double k : b.knots()) os << k << ' ';
  os << '\n';
  for (const auto& c : spline_.ctrl()) os << c.x() << ' ' << c.y() << ' ' << c.z() << '\n';
  return os.str();
}

SurfaceJet BSplineSurface::jet(double u, double v) const {
  const auto j = spline_.jet(u, v);
  return {j.P, j.Pa, j.Pb, j.Paa, j.Pab, j.Pbb};
}

ParamRect BSplineSurface::domain() const {
  ParamRect d;
  d.u0 = spline_.basis_a().lo();
  d.u1 = spline_.basis_a().hi();
  d.v0 = spline_.basis_b().lo();
  d.v1 = spline_.basis_b().hi();
  return d;
}

}  // namespace sweep
