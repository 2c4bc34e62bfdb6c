#pragma once

#include "sweep/shape.hpp"

#include <string>
#include <vector>

namespace sweep {

// B-spline basis over a knot vector. Periodic bases use a uniform knot vector
// on [0, 1) and wrap control indices modulo the control count.
class BSplineBasis {
 public:
  static BSplineBasis clamped_uniform(int degree, int n_ctrl, double lo = 0.0, double hi = 1.0);
  static BSplineBasis periodic_uniform(int degree, int n_ctrl, double lo = 0.0, double hi = 1.0);
  static BSplineBasis from_knots(int degree, std::vector<double> knots);

  int degree() const { return degree_; }
  int n_ctrl() const { return n_ctrl_; }
  bool periodic() const { return periodic_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& knots() const { return knots_; }

  // Nonzero basis values and up to `nd` derivatives at x. `first` receives the
  // control index of ders[0][0] (before wrapping for periodic bases).
  void evaluate(double x, int nd, int& first, double ders[3][8]) const;
  int wrap(int i) const { return periodic_ ? ((i % n_ctrl_) + n_ctrl_) % n_ctrl_ : i; }

 private:
  int degree_ = 3;
  int n_ctrl_ = 0;
  bool periodic_ = false;
  double lo_ = 0.0, hi_ = 1.0;
  std::vector<double> knots_;
};

// Tensor-product spline with Dim-dimensional control points, indexed [i][j]
// with i along the first parameter.
template <int Dim>
class TensorSpline {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  struct Jet {
    Point P, Pa, Pb, Paa, Pab, Pbb;
  };

  TensorSpline() = default;
  TensorSpline(BSplineBasis a, BSplineBasis b, std::vector<Point> ctrl)
      : a_(std::move(a)), b_(std::move(b)), ctrl_(std::move(ctrl)) {
    if (ctrl_.size() != static_cast<std::size_t>(a_.n_ctrl()) * b_.n_ctrl())
      throw SweepError(ErrorKind::Domain, "control net size does not match the bases");
  }

  const BSplineBasis& basis_a() const { return a_; }
  const BSplineBasis& basis_b() const { return b_; }
  const std::vector<Point>& ctrl() const { return ctrl_; }
  const Point& at(int i, int j) const { return ctrl_[static_cast<std::size_t>(i) * b_.n_ctrl() + j]; }

  Jet jet(double x, double y) const {
    double Na[3][8], Nb[3][8];
    int fa = 0, fb = 0;
    a_.evaluate(x, 2, fa, Na);
    b_.evaluate(y, 2, fb, Nb);
    Jet j;
    j.P = j.Pa = j.Pb = j.Paa = j.Pab = j.Pbb = Point::Zero();
    for (int i = 0; i <= a_.degree(); ++i) {
      for (int k = 0; k <= b_.degree(); ++k) {
        const Point& c = at(a_.wrap(fa + i), b_.wrap(fb + k));
        j.P += Na[0][i] * Nb[0][k] * c;
        j.Pa += Na[1][i] * Nb[0][k] * c;
        j.Pb += Na[0][i] * Nb[1][k] * c;
        j.Paa += Na[2][i] * Nb[0][k] * c;
        j.Pab += Na[1][i] * Nb[1][k] * c;
        j.Pbb += Na[0][i] * Nb[2][k] * c;
      }
    }
    return j;
  }

  Point eval(double x, double y) const { return jet(x, y).P; }

 private:
  BSplineBasis a_, b_;
  std::vector<Point> ctrl_;
};

// Least-squares fit of a tensor-product spline to gridded samples values[i][j]
// at (xs[i], ys[j]). The design matrix is a Kronecker product, so the fit is two
// separable one-dimensional least-squares solves.
template <int Dim>
TensorSpline<Dim> fit_tensor_spline(const BSplineBasis& a, const BSplineBasis& b, const std::vector<double>& xs,
                                    const std::vector<double>& ys,
                                    const std::vector<std::vector<Eigen::Matrix<double, Dim, 1>>>& values);

Eigen::MatrixXd collocation_matrix(const BSplineBasis& basis, const std::vector<double>& xs);

/// Surface from a control net, read from the text format
///   degree_u degree_v
///   n_u n_v
///   knots_u (n_u + degree_u + 1 values)
///   knots_v (n_v + degree_v + 1 values)
///   n_u * n_v lines "x y z", row-major (u index outer)
/// '#' starts a comment.
class BSplineSurface final : public Surface {
 public:
  explicit BSplineSurface(TensorSpline<3> spline, std::string name = "bspline");
  static std::shared_ptr<BSplineSurface> parse(const std::string& text, const std::string& name = "bspline");
  static std::shared_ptr<BSplineSurface> load(const std::string& path);
  std::string serialize() const;

  SurfaceJet jet(double u, double v) const override;
  ParamRect domain() const override;
  std::string name() const override { return name_; }

 private:
  TensorSpline<3> spline_;
  std::string name_;
};

}  // namespace sweep
