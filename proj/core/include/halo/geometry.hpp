#pragma once

// Poincare-ball primitives. Everything here is computed in double precision
// and every manifold-valued result is re-projected so that
// ||x|| <= (1 - eps) / sqrt(c).

#include <Eigen/Core>

namespace halo {

using Vec = Eigen::VectorXd;

/// Curvature magnitude and boundary margin of the ball (curvature is -c).
struct ManifoldParams {
  double c = 1.0;
  double eps = 1e-5;

  /// Throws std::invalid_argument unless c > 0 and 0 < eps < 1e-3.
  void validate() const;

  double sqrt_c() const;
  /// Largest norm a stored point may have: (1 - eps) / sqrt(c).
  double max_norm() const;
};

/// A point strictly inside the ball. Construct through project_to_ball or
/// the operations below to keep the norm invariant.
struct BallPoint {
  Vec coords;

  BallPoint() = default;
  explicit BallPoint(Vec v) : coords(std::move(v)) {}

  Eigen::Index dim() const { return coords.size(); }
  static BallPoint origin(Eigen::Index dim) { return BallPoint(Vec::Zero(dim)); }
};

/// A tangent vector attached to an anchor point.
struct TangentVector {
  Vec coords;
  BallPoint anchor;
};

/// lambda_x = 2 / (1 - c ||x||^2).
double conformal_factor(const BallPoint& x, const ManifoldParams& m);

/// Gyrovector addition h (+)_c w.
BallPoint mobius_add(const BallPoint& h, const BallPoint& w, const ManifoldParams& m);

/// Exponential map at x. A zero tangent vector returns x exactly.
BallPoint exp_map(const BallPoint& x, const Vec& v, const ManifoldParams& m);
BallPoint exp_map(const TangentVector& v, const ManifoldParams& m);

/// Logarithmic map at x; inverse of exp_map. log_map(x, x) is the zero vector.
TangentVector log_map(const BallPoint& x, const BallPoint& y, const ManifoldParams& m);

/// Geodesic distance (2/sqrt(c)) atanh(sqrt(c) ||-x (+)_c y||).
double poincare_distance(const BallPoint& x, const BallPoint& y, const ManifoldParams& m);

/// Distance from the origin: (2/sqrt(c)) atanh(sqrt(c) ||h||).
double hyperbolic_radius(const BallPoint& h, const ManifoldParams& m);

/// Rescales x onto the margin sphere if it lies outside it; throws
/// std::invalid_argument("non-finite coordinates") on NaN/inf input.
BallPoint project_to_ball(const Vec& x, const ManifoldParams& m);

namespace detail {
/// Radius from a raw Euclidean norm; shared by radius maps over raw buffers.
double radius_from_norm(double norm, const ManifoldParams& m);
/// atanh with its argument clamped just below 1.
double safe_atanh(double x);
}  // namespace detail

}  // namespace halo
