#include "halo/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace halo {

void ManifoldParams::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("manifold curvature c must be positive");
  }
  if (!(eps > 0.0 && eps < 1e-3)) {
    throw std::invalid_argument("manifold eps must lie in (0, 1e-3)");
  }
}

double ManifoldParams::sqrt_c() const { return std::sqrt(c); }

double ManifoldParams::max_norm() const { return (1.0 - eps) / std::sqrt(c); }

namespace detail {

double safe_atanh(double x) {
  constexpr double kLimit = 1.0 - 1e-15;
  if (x > kLimit) x = kLimit;
  if (x < -kLimit) x = -kLimit;
  return std::atanh(x);
}

double radius_from_norm(double norm, const ManifoldParams& m) {
  const double sc = m.sqrt_c();
  return 2.0 / sc * safe_atanh(sc * norm);
}

}  // namespace detail

namespace {

// In-place rescale onto the margin sphere.
void clamp_norm(Vec& x, const ManifoldParams& m) {
  const double limit = m.max_norm();
  const double n = x.norm();
  if (n > limit) x *= limit / n;
}

}  // namespace

double conformal_factor(const BallPoint& x, const ManifoldParams& m) {
  return 2.0 / (1.0 - m.c * x.coords.squaredNorm());
}

BallPoint mobius_add(const BallPoint& h, const BallPoint& w, const ManifoldParams& m) {
  const double c = m.c;
  const double hw = h.coords.dot(w.coords);
  const double hh = h.coords.squaredNorm();
  const double ww = w.coords.squaredNorm();
  const double denom = 1.0 + 2.0 * c * hw + c * c * hh * ww;
  Vec out = ((1.0 + 2.0 * c * hw + c * ww) * h.coords + (1.0 - c * hh) * w.coords) / denom;
  clamp_norm(out, m);
  return BallPoint(std::move(out));
}

BallPoint exp_map(const BallPoint& x, const Vec& v, const ManifoldParams& m) {
  const double vn = v.norm();
  if (vn == 0.0) return x;
  const double sc = m.sqrt_c();
  const double lambda = conformal_factor(x, m);
  Vec step = std::tanh(sc * lambda * vn / 2.0) / (sc * vn) * v;
  clamp_norm(step, m);
  return mobius_add(x, BallPoint(std::move(step)), m);
}

BallPoint exp_map(const TangentVector& v, const ManifoldParams& m) {
  return exp_map(v.anchor, v.coords, m);
}

TangentVector log_map(const BallPoint& x, const BallPoint& y, const ManifoldParams& m) {
  TangentVector out{Vec::Zero(x.dim()), x};
  if (x.coords == y.coords) return out;
  const BallPoint diff = mobius_add(BallPoint(-x.coords), y, m);
  const double dn = diff.coords.norm();
  if (dn == 0.0) return out;
  const double sc = m.sqrt_c();
  const double lambda = conformal_factor(x, m);
  out.coords = (2.0 / (sc * lambda)) * detail::safe_atanh(sc * dn) / dn * diff.coords;
  return out;
}

double poincare_distance(const BallPoint& x, const BallPoint& y, const ManifoldParams& m) {
  if (x.coords == y.coords) return 0.0;
  // ||-x (+)_c y|| through the gyro-norm identity
  //   ||-x (+) y||^2 = ||x - y||^2 / (1 - 2c<x,y> + c^2 ||x||^2 ||y||^2),
  // whose terms are symmetric in x and y.
  const double c = m.c;
  const double xy = x.coords.dot(y.coords);
  const double nx = x.coords.squaredNorm();
  const double ny = y.coords.squaredNorm();
  const double diff2 = (x.coords - y.coords).squaredNorm();
  const double denom = 1.0 - 2.0 * c * xy + c * c * (nx * ny);
  const double gyro_norm = std::sqrt(diff2 / denom);
  return detail::radius_from_norm(gyro_norm, m);
}

double hyperbolic_radius(const BallPoint& h, const ManifoldParams& m) {
  return detail::radius_from_norm(h.coords.norm(), m);
}

BallPoint project_to_ball(const Vec& x, const ManifoldParams& m) {
  if (!x.allFinite()) throw std::invalid_argument("non-finite coordinates");
  Vec out = x;
  clamp_norm(out, m);
  return BallPoint(std::move(out));
}

}  // namespace halo
