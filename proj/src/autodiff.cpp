#include "hncr/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace hncr::ad {

namespace {

// Below this |z| the ratio functions and their derivatives use Taylor series;
// the closed forms lose precision to cancellation near zero.
constexpr double kSeriesCutoff = 1e-2;

double tanh_ratio_value(double z) {
  if (std::abs(z) < kSeriesCutoff) {
    const double z2 = z * z;
    return 1.0 + z2 * (-1.0 / 3 + z2 * (2.0 / 15 + z2 * (-17.0 / 315 + z2 * (62.0 / 2835))));
  }
  return std::tanh(z) / z;
}

double tanh_ratio_deriv(double z) {
  if (std::abs(z) < kSeriesCutoff) {
    const double z2 = z * z;
    return z * (-2.0 / 3 + z2 * (8.0 / 15 + z2 * (-102.0 / 315 + z2 * (496.0 / 2835))));
  }
  const double t = std::tanh(z);
  return ((1.0 - t * t) - t / z) / z;
}

double atanh_ratio_value(double z, double eps) {
  const double zmax = 1.0 - eps;
  if (std::abs(z) > zmax) return std::atanh(std::copysign(zmax, z)) / z;
  if (std::abs(z) < kSeriesCutoff) {
    const double z2 = z * z;
    return 1.0 + z2 * (1.0 / 3 + z2 * (1.0 / 5 + z2 * (1.0 / 7 + z2 * (1.0 / 9))));
  }
  return std::atanh(z) / z;
}

double atanh_ratio_deriv(double z, double value, double eps) {
  const double zmax = 1.0 - eps;
  // Past the clamp the numerator is constant, leaving d/dz (k / z).
  if (std::abs(z) > zmax) return -value / z;
  if (std::abs(z) < kSeriesCutoff) {
    const double z2 = z * z;
    return z * (2.0 / 3 + z2 * (4.0 / 5 + z2 * (6.0 / 7 + z2 * (8.0 / 9))));
  }
  return (1.0 / (1.0 - z * z) - value) / z;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool ok, const char* what) {
  if (!ok) throw InputError(std::string("tape: ") + what);
}

}  // namespace

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAffine: return "affine";
    case Op::kDiv: return "div";
    case Op::kDot: return "dot";
    case Op::kSqNorm: return "sq_norm";
    case Op::kNorm: return "norm";
    case Op::kTanh: return "tanh";
    case Op::kAtanh: return "atanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanhRatio: return "tanh_ratio";
    case Op::kAtanhRatio: return "atanh_ratio";
    case Op::kClamp: return "clamp";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kMatVec: return "matvec";
    case Op::kStack: return "stack";
    case Op::kSoftmax: return "softmax";
    case Op::kWeightedSum: return "weighted_sum";
    case Op::kSum: return "sum";
  }
  return "unknown";
}

std::size_t Var::size() const { return tape_->node_size(*this); }
std::span<const double> Var::value() const { return tape_->value(*this); }
double Var::scalar() const {
  auto v = value();
  if (v.size() != 1) throw InputError("Var::scalar on a node of size " + std::to_string(v.size()));
  return v[0];
}

Var Tape::push(Op op, std::size_t size, std::uint32_t a, std::uint32_t b, double p0, double p1,
               std::uint32_t list_begin, std::uint32_t list_len) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  const auto offset = static_cast<std::uint32_t>(values_.size());
  nodes_.push_back(Node{op, offset, static_cast<std::uint32_t>(size), a, b, list_begin, list_len, p0, p1});
  values_.resize(values_.size() + size);
  if (op != Op::kLeaf && op != Op::kConstant) compute(id);
  return Var(this, id);
}

Var Tape::leaf(ParamId id, std::span<const double> value) {
  if (auto it = leaf_index_.find(id); it != leaf_index_.end()) return Var(this, it->second);
  Var v = push(Op::kLeaf, value.size(), 0, 0);
  std::copy(value.begin(), value.end(), val(v.id()));
  for (double x : value) {
    if (!std::isfinite(x)) throw NonFiniteError("leaf");
  }
  leaf_index_.emplace(id, v.id());
  leaves_.emplace_back(id, v);
  return v;
}

Var Tape::constant(std::span<const double> value) {
  Var v = push(Op::kConstant, value.size(), 0, 0);
  std::copy(value.begin(), value.end(), val(v.id()));
  return v;
}

Var Tape::scalar(double v) { return constant(std::span<const double>(&v, 1)); }

Var Tape::zeros(std::size_t n) { return push(Op::kConstant, n, 0, 0); }

Var Tape::add(Var a, Var b) {
  require(a.size() == b.size(), "add: size mismatch");
  return push(Op::kAdd, a.size(), a.id(), b.id());
}
Var Tape::sub(Var a, Var b) {
  require(a.size() == b.size(), "sub: size mismatch");
  return push(Op::kSub, a.size(), a.id(), b.id());
}
Var Tape::mul(Var a, Var b) {
  require(a.size() == b.size(), "mul: size mismatch");
  return push(Op::kMul, a.size(), a.id(), b.id());
}
Var Tape::scale(Var v, Var s) {
  require(s.size() == 1, "scale: factor must be scalar");
  return push(Op::kScale, v.size(), v.id(), s.id());
}
Var Tape::affine(Var x, double alpha, double beta) { return push(Op::kAffine, x.size(), x.id(), 0, alpha, beta); }
Var Tape::div(Var a, Var b) {
  require(a.size() == b.size(), "div: size mismatch");
  return push(Op::kDiv, a.size(), a.id(), b.id());
}
Var Tape::dot(Var a, Var b) {
  require(a.size() == b.size(), "dot: size mismatch");
  return push(Op::kDot, 1, a.id(), b.id());
}
Var Tape::sq_norm(Var a) { return push(Op::kSqNorm, 1, a.id(), 0); }
Var Tape::norm(Var a) { return push(Op::kNorm, 1, a.id(), 0); }
Var Tape::tanh(Var a) { return push(Op::kTanh, a.size(), a.id(), 0); }
Var Tape::atanh(Var a, double eps) { return push(Op::kAtanh, a.size(), a.id(), 0, eps); }
Var Tape::exp(Var a) { return push(Op::kExp, a.size(), a.id(), 0); }
Var Tape::log(Var a) { return push(Op::kLog, a.size(), a.id(), 0); }
Var Tape::sigmoid(Var a) { return push(Op::kSigmoid, a.size(), a.id(), 0); }
Var Tape::tanh_ratio(Var a) { return push(Op::kTanhRatio, a.size(), a.id(), 0); }
Var Tape::atanh_ratio(Var a, double eps) { return push(Op::kAtanhRatio, a.size(), a.id(), 0, eps); }
Var Tape::clamp(Var a, double lo, double hi) { return push(Op::kClamp, a.size(), a.id(), 0, lo, hi); }
Var Tape::leaky_relu(Var a, double slope) { return push(Op::kLeakyRelu, a.size(), a.id(), 0, slope); }

Var Tape::matvec(Var m, Var x, std::size_t rows) {
  require(rows > 0 && m.size() == rows * x.size(), "matvec: shape mismatch");
  return push(Op::kMatVec, rows, m.id(), x.id());
}

Var Tape::stack(std::span<const Var> scalars) {
  const auto begin = static_cast<std::uint32_t>(lists_.size());
  for (Var s : scalars) {
    require(s.size() == 1, "stack: inputs must be scalars");
    lists_.push_back(s.id());
  }
  return push(Op::kStack, scalars.size(), 0, 0, 0.0, 0.0, begin, static_cast<std::uint32_t>(scalars.size()));
}

Var Tape::softmax(Var a) { return push(Op::kSoftmax, a.size(), a.id(), 0); }

Var Tape::weighted_sum(Var weights, std::span<const Var> vectors) {
  require(!vectors.empty(), "weighted_sum: no inputs");
  require(weights.size() == vectors.size(), "weighted_sum: weight count mismatch");
  const auto begin = static_cast<std::uint32_t>(lists_.size());
  for (Var v : vectors) {
    require(v.size() == vectors.front().size(), "weighted_sum: size mismatch");
    lists_.push_back(v.id());
  }
  return push(Op::kWeightedSum, vectors.front().size(), weights.id(), 0, 0.0, 0.0, begin,
              static_cast<std::uint32_t>(vectors.size()));
}

Var Tape::sum(std::span<const Var> terms) {
  require(!terms.empty(), "sum: no inputs");
  const auto begin = static_cast<std::uint32_t>(lists_.size());
  for (Var v : terms) {
    require(v.size() == terms.front().size(), "sum: size mismatch");
    lists_.push_back(v.id());
  }
  return push(Op::kSum, terms.front().size(), 0, 0, 0.0, 0.0, begin, static_cast<std::uint32_t>(terms.size()));
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = nodes_[v.id()];
  return {values_.data() + n.offset, n.size};
}

std::span<const double> Tape::adjoint(Var v) const {
  const Node& n = nodes_[v.id()];
  if (adjoints_.size() != values_.size()) return {};
  return {adjoints_.data() + n.offset, n.size};
}

void Tape::compute(std::uint32_t id) {
  const Node& n = nodes_[id];
  double* out = val(id);
  const std::size_t sz = n.size;
  const double* a = (n.op == Op::kStack || n.op == Op::kSum) ? nullptr : val(n.a);
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      return;
    case Op::kAdd: {
      const double* b = val(n.b);
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] + b[i];
      break;
    }
    case Op::kSub: {
      const double* b = val(n.b);
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] - b[i];
      break;
    }
    case Op::kMul: {
      const double* b = val(n.b);
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] * b[i];
      break;
    }
    case Op::kScale: {
      const double s = *val(n.b);
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] * s;
      break;
    }
    case Op::kAffine:
      for (std::size_t i = 0; i < sz; ++i) out[i] = n.p0 * a[i] + n.p1;
      break;
    case Op::kDiv: {
      const double* b = val(n.b);
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] / b[i];
      break;
    }
    case Op::kDot: {
      const double* b = val(n.b);
      const std::size_t m = nodes_[n.a].size;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i] * b[i];
      out[0] = s;
      break;
    }
    case Op::kSqNorm:
    case Op::kNorm: {
      const std::size_t m = nodes_[n.a].size;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i] * a[i];
      out[0] = n.op == Op::kNorm ? std::sqrt(s) : s;
      break;
    }
    case Op::kTanh:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::tanh(a[i]);
      break;
    case Op::kAtanh: {
      const double zmax = 1.0 - n.p0;
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::atanh(std::clamp(a[i], -zmax, zmax));
      break;
    }
    case Op::kExp:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::exp(a[i]);
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::log(a[i]);
      break;
    case Op::kSigmoid:
      for (std::size_t i = 0; i < sz; ++i) out[i] = stable_sigmoid(a[i]);
      break;
    case Op::kTanhRatio:
      for (std::size_t i = 0; i < sz; ++i) out[i] = tanh_ratio_value(a[i]);
      break;
    case Op::kAtanhRatio:
      for (std::size_t i = 0; i < sz; ++i) out[i] = atanh_ratio_value(a[i], n.p0);
      break;
    case Op::kClamp:
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::clamp(a[i], n.p0, n.p1);
      break;
    case Op::kLeakyRelu:
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] > 0.0 ? a[i] : n.p0 * a[i];
      break;
    case Op::kMatVec: {
      const double* x = val(n.b);
      const std::size_t cols = nodes_[n.b].size;
      for (std::size_t r = 0; r < sz; ++r) {
        double s = 0.0;
        const double* row = a + r * cols;
        for (std::size_t k = 0; k < cols; ++k) s += row[k] * x[k];
        out[r] = s;
      }
      break;
    }
    case Op::kStack:
      for (std::size_t i = 0; i < n.list_len; ++i) out[i] = *val(lists_[n.list_begin + i]);
      break;
    case Op::kSoftmax: {
      const double mx = *std::max_element(a, a + sz);
      double z = 0.0;
      for (std::size_t i = 0; i < sz; ++i) {
        out[i] = std::exp(a[i] - mx);
        z += out[i];
      }
      for (std::size_t i = 0; i < sz; ++i) out[i] /= z;
      break;
    }
    case Op::kWeightedSum: {
      std::fill(out, out + sz, 0.0);
      for (std::size_t j = 0; j < n.list_len; ++j) {
        const double w = a[j];
        const double* v = val(lists_[n.list_begin + j]);
        for (std::size_t i = 0; i < sz; ++i) out[i] += w * v[i];
      }
      break;
    }
    case Op::kSum: {
      std::fill(out, out + sz, 0.0);
      for (std::size_t j = 0; j < n.list_len; ++j) {
        const double* v = val(lists_[n.list_begin + j]);
        for (std::size_t i = 0; i < sz; ++i) out[i] += v[i];
      }
      break;
    }
  }
  for (std::size_t i = 0; i < sz; ++i) {
    if (!std::isfinite(out[i])) throw NonFiniteError(op_name(n.op));
  }
}

void Tape::propagate(std::uint32_t id) {
  const Node& n = nodes_[id];
  const double* g = adj(id);
  const double* out = val(id);
  const std::size_t sz = n.size;
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      return;
    case Op::kAdd: {
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i];
      double* gb = adj(n.b);
      for (std::size_t i = 0; i < sz; ++i) gb[i] += g[i];
      break;
    }
    case Op::kSub: {
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i];
      double* gb = adj(n.b);
      for (std::size_t i = 0; i < sz; ++i) gb[i] -= g[i];
      break;
    }
    case Op::kMul: {
      const double* a = val(n.a);
      const double* b = val(n.b);
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * b[i];
      double* gb = adj(n.b);
      for (std::size_t i = 0; i < sz; ++i) gb[i] += g[i] * a[i];
      break;
    }
    case Op::kScale: {
      const double* a = val(n.a);
      const double s = *val(n.b);
      double* ga = adj(n.a);
      double gs = 0.0;
      for (std::size_t i = 0; i < sz; ++i) {
        ga[i] += g[i] * s;
        gs += g[i] * a[i];
      }
      *adj(n.b) += gs;
      break;
    }
    case Op::kAffine: {
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += n.p0 * g[i];
      break;
    }
    case Op::kDiv: {
      const double* a = val(n.a);
      const double* b = val(n.b);
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] / b[i];
      double* gb = adj(n.b);
      for (std::size_t i = 0; i < sz; ++i) gb[i] -= g[i] * a[i] / (b[i] * b[i]);
      break;
    }
    case Op::kDot: {
      const double* a = val(n.a);
      const double* b = val(n.b);
      const std::size_t m = nodes_[n.a].size;
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[0] * b[i];
      double* gb = adj(n.b);
      for (std::size_t i = 0; i < m; ++i) gb[i] += g[0] * a[i];
      break;
    }
    case Op::kSqNorm: {
      const double* a = val(n.a);
      const std::size_t m = nodes_[n.a].size;
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] += 2.0 * g[0] * a[i];
      break;
    }
    case Op::kNorm: {
      if (out[0] == 0.0) break;
      const double* a = val(n.a);
      const std::size_t m = nodes_[n.a].size;
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[0] * a[i] / out[0];
      break;
    }
    case Op::kTanh: {
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
      break;
    }
    case Op::kAtanh: {
      const double* a = val(n.a);
      const double zmax = 1.0 - n.p0;
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) {
        if (std::abs(a[i]) < zmax) ga[i] += g[i] / (1.0 - a[i] * a[i]);
      }
      break;
    }
    case Op::kExp: {
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * out[i];
      break;
    }
    case Op::kLog: {
      const double* a = val(n.a);
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] / a[i];
      break;
    }
    case Op::kSigmoid: {
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
      break;
    }
    case Op::kTanhRatio: {
      const double* a = val(n.a);
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * tanh_ratio_deriv(a[i]);
      break;
    }
    case Op::kAtanhRatio: {
      const double* a = val(n.a);
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * atanh_ratio_deriv(a[i], out[i], n.p0);
      break;
    }
    case Op::kClamp: {
      const double* a = val(n.a);
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) {
        if (a[i] >= n.p0 && a[i] <= n.p1) ga[i] += g[i];
      }
      break;
    }
    case Op::kLeakyRelu: {
      const double* a = val(n.a);
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += a[i] > 0.0 ? g[i] : n.p0 * g[i];
      break;
    }
    case Op::kMatVec: {
      const double* m = val(n.a);
      const double* x = val(n.b);
      const std::size_t cols = nodes_[n.b].size;
      double* gm = adj(n.a);
      double* gx = adj(n.b);
      for (std::size_t r = 0; r < sz; ++r) {
        const double gr = g[r];
        const double* row = m + r * cols;
        double* grow = gm + r * cols;
        for (std::size_t k = 0; k < cols; ++k) {
          grow[k] += gr * x[k];
          gx[k] += gr * row[k];
        }
      }
      break;
    }
    case Op::kStack:
      for (std::size_t i = 0; i < n.list_len; ++i) *adj(lists_[n.list_begin + i]) += g[i];
      break;
    case Op::kSoftmax: {
      double gy = 0.0;
      for (std::size_t i = 0; i < sz; ++i) gy += g[i] * out[i];
      double* ga = adj(n.a);
      for (std::size_t i = 0; i < sz; ++i) ga[i] += out[i] * (g[i] - gy);
      break;
    }
    case Op::kWeightedSum: {
      const double* w = val(n.a);
      double* gw = adj(n.a);
      for (std::size_t j = 0; j < n.list_len; ++j) {
        const std::uint32_t vid = lists_[n.list_begin + j];
        const double* v = val(vid);
        double* gv = adj(vid);
        double s = 0.0;
        for (std::size_t i = 0; i < sz; ++i) {
          s += g[i] * v[i];
          gv[i] += w[j] * g[i];
        }
        gw[j] += s;
      }
      break;
    }
    case Op::kSum:
      for (std::size_t j = 0; j < n.list_len; ++j) {
        double* gv = adj(lists_[n.list_begin + j]);
        for (std::size_t i = 0; i < sz; ++i) gv[i] += g[i];
      }
      break;
  }
}

void Tape::backward(Var output) {
  require(output.size() == 1, "backward: output must be scalar");
  adjoints_.assign(values_.size(), 0.0);
  adj(output.id())[0] = 1.0;
  for (std::uint32_t id = output.id() + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    const double* g = adj(id);
    bool any = false;
    for (std::size_t i = 0; i < n.size; ++i) {
      if (!std::isfinite(g[i])) throw NonFiniteError(std::string(op_name(n.op)) + " (adjoint)");
      any = any || g[i] != 0.0;
    }
    if (any) propagate(id);
  }
}

void Tape::set_leaf_value(ParamId id, std::span<const double> value) {
  auto it = leaf_index_.find(id);
  if (it == leaf_index_.end()) throw InputError("set_leaf_value: parameter not on tape");
  require(value.size() == nodes_[it->second].size, "set_leaf_value: size mismatch");
  std::copy(value.begin(), value.end(), val(it->second));
}

void Tape::replay() {
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) compute(id);
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  adjoints_.clear();
  lists_.clear();
  leaves_.clear();
  leaf_index_.clear();
}

Var operator+(Var a, Var b) { return a.tape().add(a, b); }
Var operator-(Var a, Var b) { return a.tape().sub(a, b); }
Var operator*(Var a, Var b) {
  if (a.size() == b.size()) return a.tape().mul(a, b);
  if (b.size() == 1) return a.tape().scale(a, b);
  if (a.size() == 1) return a.tape().scale(b, a);
  throw InputError("tape: operator* size mismatch");
}
Var operator/(Var a, Var b) {
  if (a.size() == b.size()) return a.tape().div(a, b);
  if (b.size() == 1) {
    Tape& t = a.tape();
    return t.scale(a, t.div(t.scalar(1.0), b));
  }
  throw InputError("tape: operator/ size mismatch");
}
Var operator*(double k, Var a) { return a.tape().affine(a, k, 0.0); }
Var operator/(double k, Var a) {
  if (a.size() != 1) throw InputError("tape: scalar / vector is undefined");
  Tape& t = a.tape();
  return t.div(t.scalar(k), a);
}
Var operator+(Var a, double k) { return a.tape().affine(a, 1.0, k); }
Var operator-(double k, Var a) { return a.tape().affine(a, -1.0, k); }
Var operator-(Var a) { return a.tape().affine(a, -1.0, 0.0); }

void GradientSet::accumulate(ParamId id, std::span<const double> g) {
  auto [it, inserted] = blocks_.try_emplace(id, g.begin(), g.end());
  if (inserted) return;
  if (it->second.size() != g.size()) throw InputError("GradientSet: block size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  for (const auto& [id, g] : other.blocks_) accumulate(id, g);
  return *this;
}

const std::vector<double>* GradientSet::find(ParamId id) const {
  auto it = blocks_.find(id);
  return it == blocks_.end() ? nullptr : &it->second;
}

bool GradientSet::all_finite() const {
  for (const auto& [id, g] : blocks_) {
    for (double v : g) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

GradientSet gradient(Tape& tape, Var loss, std::span<const ParamShape> params) {
  tape.backward(loss);
  std::unordered_map<ParamId, Var, ParamIdHash> on_tape;
  for (const auto& [id, v] : tape.leaves()) on_tape.emplace(id, v);
  GradientSet out;
  for (const ParamShape& p : params) {
    if (auto it = on_tape.find(p.id); it != on_tape.end()) {
      if (it->second.size() != p.size) throw InputError("gradient: parameter shape mismatch");
      out.accumulate(p.id, tape.adjoint(it->second));
    } else {
      out.accumulate(p.id, std::vector<double>(p.size, 0.0));
    }
  }
  return out;
}

GradientSet gradient(Tape& tape, Var loss) {
  tape.backward(loss);
  GradientSet out;
  for (const auto& [id, v] : tape.leaves()) out.accumulate(id, tape.adjoint(v));
  return out;
}

GradientCheckReport check_gradient(const LossFn& loss_fn, std::span<const ParamBlock> params, double h, double tol) {
  std::vector<ParamShape> shapes;
  shapes.reserve(params.size());
  for (const ParamBlock& p : params) shapes.push_back({p.id, p.values.size()});

  Tape tape;
  const GradientSet analytic = gradient(tape, loss_fn(tape), shapes);

  auto evaluate = [&]() {
    tape.clear();
    return loss_fn(tape).scalar();
  };

  GradientCheckReport report;
  for (const ParamBlock& p : params) {
    const std::vector<double>& g = *analytic.find(p.id);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double saved = p.values[i];
      p.values[i] = saved + h;
      const double fp = evaluate();
      p.values[i] = saved - h;
      const double fm = evaluate();
      p.values[i] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double err = std::abs(g[i] - fd) / std::max(1e-8, std::abs(g[i]) + std::abs(fd));
      report.max_rel_error = std::max(report.max_rel_error, err);
      ++report.coords_checked;
      if (err > tol) report.failures.push_back({p.id, i, g[i], fd, err});
    }
  }
  return report;
}

}  // namespace hncr::ad
