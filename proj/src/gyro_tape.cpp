#include "hncr/gyro_tape.hpp"

#include <cmath>

#include "hncr/ball.hpp"

namespace hncr::ad::gyro {

using ball::kBallEps;

Var project(Var x, double c) {
  if (c <= 0.0) return x;
  Tape& t = x.tape();
  const double max_norm = (1.0 - kBallEps) / std::sqrt(c);
  Var n = t.norm(x);
  if (n.scalar() <= max_norm) return x;
  return x * (max_norm / n);
}

Var mobius_add(Var x, Var y, double c) {
  Tape& t = x.tape();
  Var xy = t.dot(x, y);
  Var x2 = t.sq_norm(x);
  Var y2 = t.sq_norm(y);
  Var a = t.affine(2.0 * c * xy + c * y2, 1.0, 1.0);
  Var b = 1.0 - c * x2;
  Var den = (2.0 * c * xy + (c * c) * (x2 * y2)) + 1.0;
  return project((x * a + y * b) / den, c);
}

Var mobius_scalar_mul(double r, Var x, double c) {
  if (c == 0.0) return r * x;
  Tape& t = x.tape();
  const double sc = std::sqrt(c);
  // r (x) x = r * AR(sqrt(c)|x|) * TR(r sqrt(c)|x| AR(sqrt(c)|x|)) * x
  Var z = sc * t.norm(x);
  Var ar = t.atanh_ratio(z, kBallEps);
  Var tr = t.tanh_ratio(r * (z * ar));
  return project(x * (r * (ar * tr)), c);
}

Var mobius_matvec(Var m, Var x, std::size_t rows, double c) {
  Tape& t = x.tape();
  Var mx = t.matvec(m, x, rows);
  if (c == 0.0) return mx;
  const double sc = std::sqrt(c);
  // M (x) x = AR(sqrt(c)|x|) * TR(sqrt(c)|Mx| AR(sqrt(c)|x|)) * Mx
  Var ar = t.atanh_ratio(sc * t.norm(x), kBallEps);
  Var tr = t.tanh_ratio(sc * (t.norm(mx) * ar));
  return project(mx * (ar * tr), c);
}

Var exp_map(Var x, Var v, double c) {
  Tape& t = x.tape();
  if (c == 0.0) return x + v;
  const double sc = std::sqrt(c);
  // half conformal factor lambda_x / 2 = 1 / (1 - c|x|^2)
  Var half_lambda = t.div(t.scalar(1.0), 1.0 - c * t.sq_norm(x));
  Var tr = t.tanh_ratio(sc * (half_lambda * t.norm(v)));
  Var step = project(v * (half_lambda * tr), c);
  return mobius_add(x, step, c);
}

Var log_map(Var x, Var y, double c) {
  Tape& t = x.tape();
  if (c == 0.0) return y - x;
  const double sc = std::sqrt(c);
  Var w = mobius_add(-x, y, c);
  // 2 / lambda_x = 1 - c|x|^2
  Var inv_half_lambda = 1.0 - c * t.sq_norm(x);
  Var ar = t.atanh_ratio(sc * t.norm(w), kBallEps);
  return w * (inv_half_lambda * ar);
}

Var exp0(Var v, double c) {
  if (c == 0.0) return v;
  Tape& t = v.tape();
  Var tr = t.tanh_ratio(std::sqrt(c) * t.norm(v));
  return project(v * tr, c);
}

Var log0(Var y, double c) {
  if (c == 0.0) return y;
  Tape& t = y.tape();
  return y * t.atanh_ratio(std::sqrt(c) * t.norm(y), kBallEps);
}

Var distance(Var x, Var y, double c) {
  Tape& t = x.tape();
  Var wn = t.norm(mobius_add(-x, y, c));
  if (c == 0.0) return 2.0 * wn;
  const double sc = std::sqrt(c);
  return (2.0 / sc) * t.atanh(sc * wn, kBallEps);
}

Var leaky_relu(Var x, double slope, double c) {
  Tape& t = x.tape();
  return exp0(t.leaky_relu(log0(x, c), slope), c);
}

}  // namespace hncr::ad::gyro
