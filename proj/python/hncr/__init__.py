"""Hyperbolic neighbor-aware collaborative recommendation."""

from ._hncr import (
    BALL_EPS,
    InputError,
    accuracy,
    auc,
    conformal_factor,
    distance,
    exp_map,
    fermi_dirac,
    log_map,
    mobius_add,
    mobius_matvec,
    mobius_scalar_mul,
    project,
    riemannian_scale,
    run_cli,
    two_block,
    write_two_block,
)

__all__ = [
    "BALL_EPS",
    "InputError",
    "accuracy",
    "auc",
    "conformal_factor",
    "distance",
    "exp_map",
    "fermi_dirac",
    "log_map",
    "mobius_add",
    "mobius_matvec",
    "mobius_scalar_mul",
    "project",
    "riemannian_scale",
    "run_cli",
    "two_block",
    "write_two_block",
]
