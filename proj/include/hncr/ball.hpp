#pragma once

// Poincare-ball gyrovector operations.
//
// Points live in the open ball { x : c |x|^2 < 1 } of radius 1/sqrt(c). Every
// operation that returns a point projects it so that sqrt(c) |x| <= 1 - kBallEps.
// Curvature c = 0 is accepted and degrades every operation to its Euclidean limit.

#include <cstddef>
#include <span>
#include <vector>

namespace hncr::ball {

/// Boundary margin used for projection and atanh clamping.
inline constexpr double kBallEps = 1e-5;

class Curvature {
 public:
  explicit Curvature(double c);

  double value() const noexcept { return c_; }
  double sqrt() const noexcept { return sqrt_c_; }
  bool euclidean() const noexcept { return c_ == 0.0; }

  friend bool operator==(Curvature a, Curvature b) noexcept { return a.c_ == b.c_; }

 private:
  double c_;
  double sqrt_c_;
};

/// A point strictly inside the ball. Only constructible through projection.
class BallPoint {
 public:
  /// Projects `coords` into the ball (see project_to_ball).
  BallPoint(std::vector<double> coords, Curvature c);

  static BallPoint origin(std::size_t dim, Curvature c);

  std::span<const double> coords() const noexcept { return coords_; }
  Curvature curvature() const noexcept { return c_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }

 private:
  std::vector<double> coords_;
  Curvature c_;
};

/// Element of the tangent space at `base`; any finite vector.
struct TangentVector {
  std::vector<double> coords;
  BallPoint base;
};

class ConformalFactor {
 public:
  explicit ConformalFactor(double v) : value_(v) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

// Typed API. Dimension or curvature mismatches throw hncr::InputError.

BallPoint mobius_add(const BallPoint& x, const BallPoint& y);
BallPoint mobius_neg(const BallPoint& x);
BallPoint mobius_scalar_mul(double r, const BallPoint& x);
/// `m` is row-major with `rows` rows and x.dim() columns.
BallPoint mobius_matvec(std::span<const double> m, std::size_t rows, const BallPoint& x);
BallPoint exp_map(const TangentVector& v);
TangentVector log_map(const BallPoint& x, const BallPoint& y);
double hyperbolic_distance(const BallPoint& x, const BallPoint& y);
ConformalFactor conformal_factor(const BallPoint& x);
BallPoint project_to_ball(std::vector<double> x, Curvature c);
std::vector<double> riemannian_rescale(const BallPoint& theta, std::span<const double> g_euclid);

// Raw kernels over plain coordinate spans. They assume matching sizes and do
// not validate; the typed API above and the model code are their callers.
namespace raw {

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double sq_norm(std::span<const double> a) noexcept;
double norm(std::span<const double> a) noexcept;

/// Clip in place so that sqrt(c)|x| <= 1 - kBallEps. Returns true if clipped.
bool project(std::span<double> x, double c) noexcept;

void mobius_add(std::span<const double> x, std::span<const double> y, double c,
                std::span<double> out) noexcept;
void mobius_scalar_mul(double r, std::span<const double> x, double c, std::span<double> out) noexcept;
void mobius_matvec(std::span<const double> m, std::size_t rows, std::span<const double> x, double c,
                   std::span<double> out) noexcept;
void exp_map(std::span<const double> x, std::span<const double> v, double c, std::span<double> out) noexcept;
void log_map(std::span<const double> x, std::span<const double> y, double c, std::span<double> out) noexcept;
void exp0(std::span<const double> v, double c, std::span<double> out) noexcept;
void log0(std::span<const double> y, double c, std::span<double> out) noexcept;
double distance(std::span<const double> x, std::span<const double> y, double c) noexcept;
double distance_to_origin(std::span<const double> x, double c) noexcept;
double conformal_factor(std::span<const double> x, double c) noexcept;
/// (1 - c|theta|^2)^2 / 4, the inverse metric scale.
double riemannian_scale(std::span<const double> theta, double c) noexcept;
/// atanh with its argument clamped to [-(1 - kBallEps), 1 - kBallEps].
double clamped_atanh(double z) noexcept;

}  // namespace raw

}  // namespace hncr::ball
