#include "gamma_elliptic/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "gamma_elliptic/errors.hpp"

namespace gamma_elliptic {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDegeneracyRatio = 1e-10;
constexpr double kBoxSlack = 1e-12;

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

Matrix drop_row(const Matrix& m, Eigen::Index row) {
  Matrix out(m.rows() - 1, m.cols());
  for (Eigen::Index i = 0, r = 0; i < m.rows(); ++i) {
    if (i == row) continue;
    out.row(r++) = m.row(i);
  }
  return out;
}

// Column j of the result is d(chi)/(dy_i dy_j) stacked over i, i.e. dJ/dy_j.
Matrix jacobian_derivative(const SecondDerivatives& second, Eigen::Index j, Eigen::Index d) {
  const auto n = static_cast<Eigen::Index>(second.size());
  Matrix s(n, d);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < d; ++i) s(k, i) = second[static_cast<std::size_t>(k)](i, j);
  }
  return s;
}

// Unnormalized normal sum_k det(e_k, J) e_k times the orientation flag.
Vector minor_normal(const Matrix& jac, int orientation) {
  const auto n = jac.rows();
  Vector normal(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    normal[k] = sign * drop_row(jac, k).determinant();
  }
  return static_cast<double>(orientation) * normal;
}

// Derivative of minor_normal along y_j, using multilinearity of det in columns.
Vector minor_normal_derivative(const Matrix& jac, const Matrix& djac, int orientation) {
  const auto n = jac.rows();
  const auto d = jac.cols();
  Vector out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const Matrix base = drop_row(jac, k);
    const Matrix dbase = drop_row(djac, k);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      Matrix m = base;
      m.col(i) = dbase.col(i);
      sum += m.determinant();
    }
    out[k] = sign * sum;
  }
  return static_cast<double>(orientation) * out;
}

}  // namespace

Chart::Chart(std::string label, ParameterBox box, MapFn map, JacobianFn jacobian,
             HessianFn hessian, int orientation, InverseFn inverse)
    : label_(std::move(label)),
      box_(std::move(box)),
      map_(std::move(map)),
      jacobian_(std::move(jacobian)),
      hessian_(std::move(hessian)),
      orientation_(orientation >= 0 ? 1 : -1),
      inverse_(std::move(inverse)) {
  if (box_.lower.size() != box_.upper.size() ||
      box_.periodic.size() != static_cast<std::size_t>(box_.lower.size())) {
    throw ContractError("chart '" + label_ + "': inconsistent parameter box");
  }
}

bool Chart::contains(const Vector& y) const {
  if (y.size() != box_.lower.size()) return false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (box_.periodic[static_cast<std::size_t>(i)]) continue;
    const double slack = kBoxSlack * std::max(1.0, std::abs(box_.upper[i] - box_.lower[i]));
    if (!(y[i] >= box_.lower[i] - slack && y[i] <= box_.upper[i] + slack)) return false;
  }
  return y.allFinite();
}

Vector Chart::wrap(const Vector& y) const {
  if (!contains(y)) {
    throw DomainError("chart '" + label_ + "': parameter outside the chart domain");
  }
  Vector w = y;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!box_.periodic[static_cast<std::size_t>(i)]) continue;
    const double period = box_.upper[i] - box_.lower[i];
    double t = std::fmod(y[i] - box_.lower[i], period);
    if (t < 0.0) t += period;
    w[i] = box_.lower[i] + t;
  }
  return w;
}

Vector Chart::point(const Vector& y) const { return map_(wrap(y)); }

Matrix Chart::jacobian(const Vector& y) const { return jacobian_(wrap(y)); }

SecondDerivatives Chart::second_derivatives(const Vector& y) const {
  if (hessian_) return hessian_(wrap(y));
  return finite_difference_second_derivatives(y);
}

SecondDerivatives Chart::finite_difference_second_derivatives(const Vector& y) const {
  const Vector base = wrap(y);
  const auto d = base.size();
  const auto n = d + 1;
  const double step = std::cbrt(std::numeric_limits<double>::epsilon());
  SecondDerivatives second(static_cast<std::size_t>(n), Matrix::Zero(d, d));
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = step * std::max(1.0, std::abs(base[j]));
    Vector yp = base, ym = base;
    yp[j] += h;
    ym[j] -= h;
    // The closures are analytic, so evaluating slightly past the box is fine.
    const Matrix djac = (jacobian_(yp) - jacobian_(ym)) / (2.0 * h);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index i = 0; i < d; ++i) second[static_cast<std::size_t>(k)](i, j) = djac(k, i);
    }
  }
  for (auto& block : second) block = (0.5 * (block + block.transpose())).eval();
  return second;
}

Vector Chart::inverse(const Vector& x) const {
  if (!inverse_) throw CapabilityError("chart '" + label_ + "' has no inverse map");
  return inverse_(x);
}

Chart Chart::without_second_derivatives() const {
  return Chart(label_ + "-fd", box_, map_, jacobian_, {}, orientation_, inverse_);
}

Atlas::Atlas(std::vector<Chart> charts, ProjectorFn projector, std::string name)
    : charts_(std::move(charts)), projector_(std::move(projector)), name_(std::move(name)) {
  if (charts_.empty()) throw ContractError("atlas needs at least one chart");
  if (!projector_) throw ContractError("atlas needs a projector");
}

Atlas::Location Atlas::locate(const Vector& x) const {
  const Vector p = project(x);
  std::optional<Location> best;
  double best_quality = -1.0;
  for (std::size_t c = 0; c < charts_.size(); ++c) {
    const Chart& chart = charts_[c];
    if (!chart.has_inverse()) continue;
    const Vector y = chart.inverse(p);
    if (!chart.contains(y)) continue;
    const Eigen::JacobiSVD<Matrix> svd(chart.jacobian(y));
    const auto& s = svd.singularValues();
    const double quality = s[s.size() - 1] / s[0];
    if (quality > best_quality) {
      best_quality = quality;
      best = Location{c, chart.wrap(y)};
    }
  }
  if (!best || best_quality < kDegeneracyRatio) {
    throw DomainError("atlas '" + name_ + "': no chart covers the point");
  }
  return *best;
}

Chart make_plane_chart() {
  ParameterBox box{Vector::Constant(2, -10.0), Vector::Constant(2, 10.0), {false, false}};
  auto map = [](const Vector& y) { return Vector{{y[0], y[1], 0.0}}; };
  auto jac = [](const Vector&) {
    Matrix j = Matrix::Zero(3, 2);
    j(0, 0) = 1.0;
    j(1, 1) = 1.0;
    return j;
  };
  auto hess = [](const Vector&) { return SecondDerivatives(3, Matrix::Zero(2, 2)); };
  auto inv = [](const Vector& x) { return Vector{{x[0], x[1]}}; };
  return Chart("plane", box, map, jac, hess, 1, inv);
}

Chart make_sphere_polar_chart(double radius, int axis) {
  if (!(radius > 0.0)) throw ContractError("sphere radius must be positive");
  if (axis < 0 || axis > 2) throw ContractError("sphere chart axis must be 0, 1 or 2");
  // Cyclic relabelling of the standard chart keeps the orientation.
  const int i0 = (axis + 1) % 3;
  const int i1 = (axis + 2) % 3;
  const int i2 = axis;
  auto place = [=](double a, double b, double c) {
    Vector v(3);
    v[i0] = a;
    v[i1] = b;
    v[i2] = c;
    return v;
  };
  ParameterBox box{Vector{{0.0, 0.0}}, Vector{{std::numbers::pi, kTwoPi}}, {false, true}};
  auto map = [=](const Vector& y) {
    const double st = std::sin(y[0]), ct = std::cos(y[0]);
    const double sp = std::sin(y[1]), cp = std::cos(y[1]);
    return (radius * place(st * cp, st * sp, ct)).eval();
  };
  auto jac = [=](const Vector& y) {
    const double st = std::sin(y[0]), ct = std::cos(y[0]);
    const double sp = std::sin(y[1]), cp = std::cos(y[1]);
    Matrix j(3, 2);
    j.col(0) = radius * place(ct * cp, ct * sp, -st);
    j.col(1) = radius * place(-st * sp, st * cp, 0.0);
    return j;
  };
  auto hess = [=](const Vector& y) {
    const double st = std::sin(y[0]), ct = std::cos(y[0]);
    const double sp = std::sin(y[1]), cp = std::cos(y[1]);
    const Vector tt = radius * place(-st * cp, -st * sp, -ct);
    const Vector tp = radius * place(-ct * sp, ct * cp, 0.0);
    const Vector pp = radius * place(-st * cp, -st * sp, 0.0);
    SecondDerivatives h(3, Matrix(2, 2));
    for (int k = 0; k < 3; ++k) {
      h[static_cast<std::size_t>(k)] << tt[k], tp[k], tp[k], pp[k];
    }
    return h;
  };
  auto inv = [=](const Vector& x) {
    const double norm = x.norm();
    const double c = std::clamp(x[i2] / norm, -1.0, 1.0);
    return Vector{{std::acos(c), wrap_angle(std::atan2(x[i1], x[i0]))}};
  };
  const char* names[] = {"sphere-polar-x1", "sphere-polar-x2", "sphere-polar-x3"};
  return Chart(names[axis], box, map, jac, hess, 1, inv);
}

Chart make_torus_chart(double major_radius, double minor_radius) {
  const double big = major_radius;
  const double small = minor_radius;
  if (!(big > small && small > 0.0)) throw ContractError("torus requires R > r > 0");
  ParameterBox box{Vector{{0.0, 0.0}}, Vector{{kTwoPi, kTwoPi}}, {true, true}};
  auto map = [=](const Vector& y) {
    const double ring = big + small * std::cos(y[0]);
    return Vector{{ring * std::cos(y[1]), ring * std::sin(y[1]), small * std::sin(y[0])}};
  };
  auto jac = [=](const Vector& y) {
    const double st = std::sin(y[0]), ct = std::cos(y[0]);
    const double sp = std::sin(y[1]), cp = std::cos(y[1]);
    const double ring = big + small * ct;
    Matrix j(3, 2);
    j << -small * st * cp, -ring * sp,
         -small * st * sp, ring * cp,
         small * ct, 0.0;
    return j;
  };
  auto hess = [=](const Vector& y) {
    const double st = std::sin(y[0]), ct = std::cos(y[0]);
    const double sp = std::sin(y[1]), cp = std::cos(y[1]);
    const double ring = big + small * ct;
    SecondDerivatives h(3, Matrix(2, 2));
    h[0] << -small * ct * cp, small * st * sp, small * st * sp, -ring * cp;
    h[1] << -small * ct * sp, -small * st * cp, -small * st * cp, -ring * sp;
    h[2] << -small * st, 0.0, 0.0, 0.0;
    return h;
  };
  auto inv = [=](const Vector& x) {
    const double rho = std::hypot(x[0], x[1]);
    return Vector{{wrap_angle(std::atan2(x[2], rho - big)), wrap_angle(std::atan2(x[1], x[0]))}};
  };
  // d(chi)/d(theta) x d(chi)/d(phi) points inward, hence the flipped flag.
  return Chart("torus", box, map, jac, hess, -1, inv);
}

Atlas make_sphere_atlas(double radius) {
  auto projector = [radius](const Vector& x) {
    const double n = x.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ContractError("sphere projector: point at the centre has no closest point");
    }
    return (radius / n * x).eval();
  };
  return Atlas({make_sphere_polar_chart(radius, 2), make_sphere_polar_chart(radius, 0)}, projector,
               "sphere");
}

Atlas make_torus_atlas(double major_radius, double minor_radius) {
  const Chart chart = make_torus_chart(major_radius, minor_radius);
  auto projector = [major_radius, minor_radius](const Vector& x) {
    const double rho = std::hypot(x[0], x[1]);
    if (!(rho > 0.0) || !std::isfinite(rho)) {
      throw ContractError("torus projector: point on the symmetry axis has no unique closest point");
    }
    const Vector centre{{major_radius * x[0] / rho, major_radius * x[1] / rho, 0.0}};
    const Vector offset = x - centre;
    const double dist = offset.norm();
    if (!(dist > 0.0)) {
      throw ContractError("torus projector: point on the core circle has no unique closest point");
    }
    return (centre + minor_radius / dist * offset).eval();
  };
  return Atlas({chart}, projector, "torus");
}

ParametricScalarField pull_back(const Chart& chart, const AmbientScalarField& field) {
  ParametricScalarField out;
  out.value = [chart, field](const Vector& y) { return field.value(chart.point(y)); };
  if (field.has_gradient()) {
    out.gradient = [chart, field](const Vector& y) {
      return (chart.jacobian(y).transpose() * field.gradient(chart.point(y))).eval();
    };
  }
  if (field.has_gradient() && field.has_hessian()) {
    out.hessian = [chart, field](const Vector& y) {
      const Vector x = chart.point(y);
      const Matrix jac = chart.jacobian(y);
      const Vector grad = field.gradient(x);
      Matrix h = jac.transpose() * field.hessian(x) * jac;
      const SecondDerivatives second = chart.second_derivatives(y);
      for (std::size_t k = 0; k < second.size(); ++k) h += grad[static_cast<Eigen::Index>(k)] * second[k];
      return h;
    };
  }
  return out;
}

ParametricVectorField pull_back(const Chart& chart, const AmbientVectorField& field) {
  ParametricVectorField out;
  out.value = [chart, field](const Vector& y) { return field.value(chart.point(y)); };
  if (field.has_jacobian()) {
    out.jacobian = [chart, field](const Vector& y) {
      return (field.jacobian(chart.point(y)) * chart.jacobian(y)).eval();
    };
  }
  return out;
}

LocalFrame local_frame(const Chart& chart, const Vector& y) {
  LocalFrame f;
  f.jacobian = chart.jacobian(y);
  const Eigen::JacobiSVD<Matrix> svd(f.jacobian);
  const auto& s = svd.singularValues();
  if (!(s[s.size() - 1] >= kDegeneracyRatio * s[0]) || !(s[0] > 0.0)) {
    throw DegeneracyError("chart '" + chart.label() + "': Jacobian is rank deficient");
  }
  f.metric = f.jacobian.transpose() * f.jacobian;
  f.metric_inverse = f.metric.inverse();
  f.area_element = std::sqrt(f.metric.determinant());
  const Vector n = minor_normal(f.jacobian, chart.orientation());
  f.normal = n / n.norm();
  return f;
}

Matrix metric_tensor(const Chart& chart, const Vector& y) { return local_frame(chart, y).metric; }

double area_element(const Chart& chart, const Vector& y) { return local_frame(chart, y).area_element; }

Vector unit_normal(const Chart& chart, const Vector& y) { return local_frame(chart, y).normal; }

Matrix tangential_projection(const Chart& chart, const Vector& y) {
  const Vector n = unit_normal(chart, y);
  return Matrix::Identity(n.size(), n.size()) - n * n.transpose();
}

Matrix tangential_projection_parametric(const Chart& chart, const Vector& y) {
  const LocalFrame f = local_frame(chart, y);
  return f.jacobian * f.metric_inverse * f.jacobian.transpose();
}

Vector surface_gradient(const Chart& chart, const ParametricScalarField& field, const Vector& y) {
  if (!field.gradient) throw ContractError("surface_gradient: field has no parametric gradient");
  const LocalFrame f = local_frame(chart, y);
  return f.jacobian * (f.metric_inverse * field.gradient(chart.wrap(y)));
}

double surface_divergence(const Chart& chart, const ParametricVectorField& field, const Vector& y) {
  if (!field.jacobian) throw ContractError("surface_divergence: field has no parametric Jacobian");
  const LocalFrame f = local_frame(chart, y);
  // sum_ij g^{ij} d_i chi . d_j v
  return (f.metric_inverse * f.jacobian.transpose() * field.jacobian(chart.wrap(y))).trace();
}

double laplace_beltrami_apply(const Chart& chart, const ParametricScalarField& field,
                              const Vector& y) {
  if (!field.gradient || !field.hessian) {
    throw CapabilityError("laplace_beltrami_apply: field has no parametric second derivatives");
  }
  const Vector yw = chart.wrap(y);
  const LocalFrame f = local_frame(chart, yw);
  const SecondDerivatives second = chart.second_derivatives(yw);
  const auto d = f.jacobian.cols();
  const Matrix& ginv = f.metric_inverse;
  const Vector grad = field.gradient(yw);
  const Vector contravariant = ginv * grad;

  // (1/a) d_j (a g^{ij} d_i v) = g^{ij} d_ij v + d_j(g^{ij}) d_i v + (d_j a / a) g^{ij} d_i v
  double value = (ginv * field.hessian(yw)).trace();
  for (Eigen::Index j = 0; j < d; ++j) {
    const Matrix djac = jacobian_derivative(second, j, d);
    const Matrix dmetric = djac.transpose() * f.jacobian + f.jacobian.transpose() * djac;
    const Vector dginv_grad = -ginv * dmetric * contravariant;
    const double dlog_area = 0.5 * (ginv * dmetric).trace();
    value += dginv_grad[j] + dlog_area * contravariant[j];
  }
  return value;
}

Matrix normal_derivatives(const Chart& chart, const Vector& y) {
  const Vector yw = chart.wrap(y);
  const LocalFrame f = local_frame(chart, yw);
  const SecondDerivatives second = chart.second_derivatives(yw);
  const auto d = f.jacobian.cols();
  const auto n = f.jacobian.rows();
  const Vector raw = minor_normal(f.jacobian, chart.orientation());
  const double len = raw.norm();
  const Matrix proj = Matrix::Identity(n, n) - f.normal * f.normal.transpose();
  Matrix out(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Matrix djac = jacobian_derivative(second, j, d);
    out.col(j) = proj * minor_normal_derivative(f.jacobian, djac, chart.orientation()) / len;
  }
  return out;
}

Matrix shape_operator(const Chart& chart, const Vector& y) {
  const LocalFrame f = local_frame(chart, y);
  return normal_derivatives(chart, y) * f.metric_inverse * f.jacobian.transpose();
}

Vector tangential_components(const Chart& chart, const Vector& v, const Vector& y) {
  const LocalFrame f = local_frame(chart, y);
  const Vector normal_part = f.normal.dot(v) * f.normal;
  if (normal_part.norm() > 1e-8 * std::max(1.0, v.norm())) {
    throw ContractError("tangential_components: vector is not tangential");
  }
  return f.metric_inverse * (f.jacobian.transpose() * v);
}

}  // namespace gamma_elliptic
