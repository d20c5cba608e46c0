#pragma once

// Differentiable gyrovector operations built from tape primitives.
//
// The closed forms are rewritten with the smooth ratio functions
// tanh(z)/z and atanh(z)/z, so the zero-vector cases need no branches and
// carry the correct limiting derivative.

#include <cstddef>

#include "hncr/autodiff.hpp"

namespace hncr::ad::gyro {

/// Clip to the ball; differentiable through the rescaling when active.
Var project(Var x, double c);
Var mobius_add(Var x, Var y, double c);
Var mobius_scalar_mul(double r, Var x, double c);
Var mobius_matvec(Var m, Var x, std::size_t rows, double c);
Var exp_map(Var x, Var v, double c);
Var log_map(Var x, Var y, double c);
Var exp0(Var v, double c);
Var log0(Var y, double c);
Var distance(Var x, Var y, double c);
/// exp0(LeakyReLU(log0(x))).
Var leaky_relu(Var x, double slope, double c);

}  // namespace hncr::ad::gyro
