#pragma once

// Reverse-mode differentiation over a small set of vector/scalar primitives.
//
// A Tape records every primitive as it is evaluated (eager forward pass), so
// values are available immediately. backward() walks the record in reverse and
// accumulates adjoints. Scalars are nodes of size 1.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hncr/error.hpp"

namespace hncr::ad {

/// Identifies a parameter block (e.g. one embedding row, one layer matrix).
struct ParamId {
  std::uint32_t group = 0;
  std::uint32_t index = 0;
  friend auto operator<=>(const ParamId&, const ParamId&) = default;
};

struct ParamIdHash {
  std::size_t operator()(const ParamId& p) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{p.group} << 32) | p.index);
  }
};

/// Raised when a primitive produces a non-finite value or adjoint.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& primitive)
      : Error("non-finite value produced by primitive '" + primitive + "'"), primitive_(primitive) {}
  const std::string& primitive() const noexcept { return primitive_; }

 private:
  std::string primitive_;
};

enum class Op : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kScale,       // vector * scalar node
  kAffine,      // alpha * x + beta, constants
  kDiv,         // elementwise, same size
  kDot,
  kSqNorm,
  kNorm,
  kTanh,
  kAtanh,       // argument clamped to +-(1 - eps)
  kExp,
  kLog,
  kSigmoid,
  kTanhRatio,   // tanh(z) / z, 1 at 0
  kAtanhRatio,  // atanh(min(z, 1 - eps)) / z, 1 at 0
  kClamp,
  kLeakyRelu,
  kMatVec,
  kStack,
  kSoftmax,
  kWeightedSum,
  kSum,
};

const char* op_name(Op op) noexcept;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t size() const;
  std::span<const double> value() const;
  /// Value of a size-1 node.
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Parameter leaf. Registering the same id twice returns the first node.
  Var leaf(ParamId id, std::span<const double> value);
  Var constant(std::span<const double> value);
  Var scalar(double v);
  Var zeros(std::size_t n);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var v, Var s);
  Var affine(Var x, double alpha, double beta);
  Var div(Var a, Var b);
  Var dot(Var a, Var b);
  Var sq_norm(Var a);
  Var norm(Var a);
  Var tanh(Var a);
  Var atanh(Var a, double eps);
  Var exp(Var a);
  Var log(Var a);
  Var sigmoid(Var a);
  Var tanh_ratio(Var a);
  Var atanh_ratio(Var a, double eps);
  Var clamp(Var a, double lo, double hi);
  Var leaky_relu(Var a, double slope);
  /// `m` holds a rows x x.size() row-major matrix.
  Var matvec(Var m, Var x, std::size_t rows);
  /// Concatenate scalar nodes into a vector.
  Var stack(std::span<const Var> scalars);
  Var softmax(Var a);
  /// sum_i weights[i] * vectors[i]; `weights` is a vector node of size vectors.size().
  Var weighted_sum(Var weights, std::span<const Var> vectors);
  /// Sum of equally sized nodes.
  Var sum(std::span<const Var> terms);

  std::span<const double> value(Var v) const;
  std::span<const double> adjoint(Var v) const;
  std::size_t node_size(Var v) const { return nodes_[v.id()].size; }

  /// Seeds d(output)/d(output) = 1 and propagates adjoints to every node.
  /// Throws NonFiniteError if an adjoint becomes non-finite.
  void backward(Var output);

  /// Overwrite the value of a registered parameter leaf (for replay).
  void set_leaf_value(ParamId id, std::span<const double> value);
  /// Recompute every non-leaf node in recording order.
  void replay();

  /// Parameter leaves in registration order.
  const std::vector<std::pair<ParamId, Var>>& leaves() const noexcept { return leaves_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Op op;
    std::uint32_t offset;
    std::uint32_t size;
    std::uint32_t a;
    std::uint32_t b;
    std::uint32_t list_begin;
    std::uint32_t list_len;
    double p0;
    double p1;
  };

  Var push(Op op, std::size_t size, std::uint32_t a, std::uint32_t b, double p0 = 0.0, double p1 = 0.0,
           std::uint32_t list_begin = 0, std::uint32_t list_len = 0);
  void compute(std::uint32_t id);
  void propagate(std::uint32_t id);
  double* val(std::uint32_t id) { return values_.data() + nodes_[id].offset; }
  const double* val(std::uint32_t id) const { return values_.data() + nodes_[id].offset; }
  double* adj(std::uint32_t id) { return adjoints_.data() + nodes_[id].offset; }

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<std::uint32_t> lists_;
  std::vector<std::pair<ParamId, Var>> leaves_;
  std::unordered_map<ParamId, std::uint32_t, ParamIdHash> leaf_index_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise when sizes match; scalar broadcast when either side has size 1.
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator*(double k, Var a);
/// k / a for a size-1 node.
Var operator/(double k, Var a);
Var operator+(Var a, double k);
Var operator-(double k, Var a);
Var operator-(Var a);

/// Euclidean gradients, one dense block per parameter id.
class GradientSet {
 public:
  void accumulate(ParamId id, std::span<const double> g);
  GradientSet& operator+=(const GradientSet& other);

  const std::vector<double>* find(ParamId id) const;
  const std::map<ParamId, std::vector<double>>& blocks() const noexcept { return blocks_; }
  std::size_t size() const noexcept { return blocks_.size(); }
  bool all_finite() const;

 private:
  std::map<ParamId, std::vector<double>> blocks_;
};

struct ParamShape {
  ParamId id;
  std::size_t size = 0;
};

/// Mutable view of a parameter block's storage.
struct ParamBlock {
  ParamId id;
  std::span<double> values;
};

/// Runs backward from `loss` and returns d loss / d p for each requested parameter.
/// Parameters absent from the tape get zero blocks.
GradientSet gradient(Tape& tape, Var loss, std::span<const ParamShape> params);
/// Same, for every parameter leaf on the tape.
GradientSet gradient(Tape& tape, Var loss);

/// Builds a scalar loss on a fresh tape, reading parameters from their current storage.
using LossFn = std::function<Var(Tape&)>;

struct GradientMismatch {
  ParamId id;
  std::size_t coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::vector<GradientMismatch> failures;
  bool passed() const noexcept { return failures.empty(); }
};

/// Compares reverse-mode gradients with central finite differences. Per-coordinate
/// error is |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
GradientCheckReport check_gradient(const LossFn& loss_fn, std::span<const ParamBlock> params, double h = 1e-5,
                                   double tol = 1e-4);

}  // namespace hncr::ad
