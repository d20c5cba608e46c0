#include "hncr/ball.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hncr/error.hpp"

namespace hncr::ball {

namespace raw {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sq_norm(std::span<const double> a) noexcept { return dot(a, a); }

double norm(std::span<const double> a) noexcept { return std::sqrt(sq_norm(a)); }

double clamped_atanh(double z) noexcept {
  constexpr double kMax = 1.0 - kBallEps;
  return std::atanh(std::clamp(z, -kMax, kMax));
}

bool project(std::span<double> x, double c) noexcept {
  if (c <= 0.0) return false;
  const double max_norm = (1.0 - kBallEps) / std::sqrt(c);
  const double n = norm(x);
  if (n <= max_norm) return false;
  const double s = max_norm / n;
  for (double& v : x) v *= s;
  return true;
}

void mobius_add(std::span<const double> x, std::span<const double> y, double c,
                std::span<double> out) noexcept {
  const double xy = dot(x, y);
  const double x2 = sq_norm(x);
  const double y2 = sq_norm(y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (a * x[i] + b * y[i]) / den;
  project(out, c);
}

void mobius_scalar_mul(double r, std::span<const double> x, double c, std::span<double> out) noexcept {
  const double n = norm(x);
  if (n == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  if (c == 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = r * x[i];
    return;
  }
  const double sc = std::sqrt(c);
  const double mag = std::tanh(r * clamped_atanh(sc * n)) / sc;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = mag * x[i] / n;
  project(out, c);
}

void mobius_matvec(std::span<const double> m, std::size_t rows, std::span<const double> x, double c,
                   std::span<double> out) noexcept {
  const std::size_t cols = x.size();
  double mx2 = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < cols; ++k) s += m[r * cols + k] * x[k];
    out[r] = s;
    mx2 += s * s;
  }
  if (c == 0.0) return;
  const double xn = norm(x);
  const double mxn = std::sqrt(mx2);
  if (mxn == 0.0 || xn == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double sc = std::sqrt(c);
  const double mag = std::tanh(mxn / xn * clamped_atanh(sc * xn)) / sc;
  for (std::size_t r = 0; r < rows; ++r) out[r] *= mag / mxn;
  project(out, c);
}

double conformal_factor(std::span<const double> x, double c) noexcept {
  return 2.0 / (1.0 - c * sq_norm(x));
}

void exp_map(std::span<const double> x, std::span<const double> v, double c, std::span<double> out) noexcept {
  const double vn = norm(v);
  if (vn == 0.0) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  if (c == 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = x[i] + v[i];
    return;
  }
  const double sc = std::sqrt(c);
  const double lambda = conformal_factor(x, c);
  const double mag = std::tanh(sc * lambda * vn / 2.0) / (sc * vn);
  std::vector<double> step(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) step[i] = mag * v[i];
  project(step, c);
  mobius_add(x, step, c, out);
}

void log_map(std::span<const double> x, std::span<const double> y, double c, std::span<double> out) noexcept {
  if (std::equal(x.begin(), x.end(), y.begin())) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  std::vector<double> neg_x(x.begin(), x.end());
  for (double& v : neg_x) v = -v;
  std::vector<double> w(x.size());
  mobius_add(neg_x, y, c, w);
  const double wn = norm(w);
  if (wn == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  if (c == 0.0) {
    std::copy(w.begin(), w.end(), out.begin());
    return;
  }
  const double sc = std::sqrt(c);
  const double lambda = conformal_factor(x, c);
  const double mag = 2.0 / (sc * lambda) * clamped_atanh(sc * wn) / wn;
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = mag * w[i];
}

void exp0(std::span<const double> v, double c, std::span<double> out) noexcept {
  const double vn = norm(v);
  if (vn == 0.0 || c == 0.0) {
    std::copy(v.begin(), v.end(), out.begin());
    return;
  }
  const double sc = std::sqrt(c);
  const double mag = std::tanh(sc * vn) / (sc * vn);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = mag * v[i];
  project(out, c);
}

void log0(std::span<const double> y, double c, std::span<double> out) noexcept {
  const double yn = norm(y);
  if (yn == 0.0 || c == 0.0) {
    std::copy(y.begin(), y.end(), out.begin());
    return;
  }
  const double sc = std::sqrt(c);
  const double mag = clamped_atanh(sc * yn) / (sc * yn);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = mag * y[i];
}

double distance(std::span<const double> x, std::span<const double> y, double c) noexcept {
  if (std::equal(x.begin(), x.end(), y.begin())) return 0.0;
  // |(-x) (+) y| evaluated coordinate-wise; no temporary is materialized.
  const double xy = -dot(x, y);
  const double x2 = sq_norm(x);
  const double y2 = sq_norm(y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  double w2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = (-a * x[i] + b * y[i]) / den;
    w2 += w * w;
  }
  const double wn = std::sqrt(w2);
  if (c == 0.0) return 2.0 * wn;
  const double sc = std::sqrt(c);
  return 2.0 / sc * clamped_atanh(sc * wn);
}

double distance_to_origin(std::span<const double> x, double c) noexcept {
  const double n = norm(x);
  if (c == 0.0) return 2.0 * n;
  const double sc = std::sqrt(c);
  return 2.0 / sc * clamped_atanh(sc * n);
}

double riemannian_scale(std::span<const double> theta, double c) noexcept {
  const double s = 1.0 - c * sq_norm(theta);
  return s * s / 4.0;
}

}  // namespace raw

namespace {

void require_same(const BallPoint& x, const BallPoint& y, const char* op) {
  if (x.dim() != y.dim()) {
    throw InputError(std::string(op) + ": dimension mismatch (" + std::to_string(x.dim()) + " vs " +
                     std::to_string(y.dim()) + ")");
  }
  if (!(x.curvature() == y.curvature())) throw InputError(std::string(op) + ": curvature mismatch");
}

}  // namespace

Curvature::Curvature(double c) : c_(c), sqrt_c_(0.0) {
  if (!std::isfinite(c) || c < 0.0) throw InputError("curvature must be finite and non-negative");
  sqrt_c_ = std::sqrt(c);
}

BallPoint::BallPoint(std::vector<double> coords, Curvature c) : coords_(std::move(coords)), c_(c) {
  for (double v : coords_) {
    if (!std::isfinite(v)) throw InputError("ball point coordinates must be finite");
  }
  raw::project(coords_, c_.value());
}

BallPoint BallPoint::origin(std::size_t dim, Curvature c) { return BallPoint(std::vector<double>(dim, 0.0), c); }

BallPoint project_to_ball(std::vector<double> x, Curvature c) { return BallPoint(std::move(x), c); }

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  require_same(x, y, "mobius_add");
  std::vector<double> out(x.dim());
  raw::mobius_add(x.coords(), y.coords(), x.curvature().value(), out);
  return BallPoint(std::move(out), x.curvature());
}

BallPoint mobius_neg(const BallPoint& x) {
  std::vector<double> out(x.coords().begin(), x.coords().end());
  for (double& v : out) v = -v;
  return BallPoint(std::move(out), x.curvature());
}

BallPoint mobius_scalar_mul(double r, const BallPoint& x) {
  std::vector<double> out(x.dim());
  raw::mobius_scalar_mul(r, x.coords(), x.curvature().value(), out);
  return BallPoint(std::move(out), x.curvature());
}

BallPoint mobius_matvec(std::span<const double> m, std::size_t rows, const BallPoint& x) {
  if (rows == 0 || m.size() != rows * x.dim()) {
    throw InputError("mobius_matvec: matrix has " + std::to_string(m.size()) + " entries, expected " +
                     std::to_string(rows) + " x " + std::to_string(x.dim()));
  }
  std::vector<double> out(rows);
  raw::mobius_matvec(m, rows, x.coords(), x.curvature().value(), out);
  return BallPoint(std::move(out), x.curvature());
}

BallPoint exp_map(const TangentVector& v) {
  if (v.coords.size() != v.base.dim()) throw InputError("exp_map: dimension mismatch");
  std::vector<double> out(v.base.dim());
  raw::exp_map(v.base.coords(), v.coords, v.base.curvature().value(), out);
  return BallPoint(std::move(out), v.base.curvature());
}

TangentVector log_map(const BallPoint& x, const BallPoint& y) {
  require_same(x, y, "log_map");
  std::vector<double> out(x.dim());
  raw::log_map(x.coords(), y.coords(), x.curvature().value(), out);
  return TangentVector{std::move(out), x};
}

double hyperbolic_distance(const BallPoint& x, const BallPoint& y) {
  require_same(x, y, "hyperbolic_distance");
  return raw::distance(x.coords(), y.coords(), x.curvature().value());
}

ConformalFactor conformal_factor(const BallPoint& x) {
  return ConformalFactor(raw::conformal_factor(x.coords(), x.curvature().value()));
}

std::vector<double> riemannian_rescale(const BallPoint& theta, std::span<const double> g_euclid) {
  if (g_euclid.size() != theta.dim()) throw InputError("riemannian_rescale: dimension mismatch");
  const double s = raw::riemannian_scale(theta.coords(), theta.curvature().value());
  std::vector<double> out(g_euclid.begin(), g_euclid.end());
  for (double& v : out) v *= s;
  return out;
}

}  // namespace hncr::ball
