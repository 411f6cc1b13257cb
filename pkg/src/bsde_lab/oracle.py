"""Closed-form reference solutions for validating the numerical solver."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import lp_norm_arrays
from .paths import PathEnsemble

_ORACLE_KINDS = ("martingale_coordinate", "martingale_square", "linear_drift")


@dataclass(frozen=True)
class OracleInstance:
    """A driver/terminal pair with a known discrete solution.

    martingale_coordinate: g = 0, xi = B_T^(j)   -> y = B_t^(j), z = e_j
    martingale_square:     g = 0, xi = |B_T|^2, d = 1 -> y = B_t^2 + (T - t), z = 2 B_t
    linear_drift:          g = a y + c, xi = v deterministic -> y deterministic, z = 0
    """

    kind: str
    T: float
    j: int = 0
    a: float = 0.0
    c: float = 0.0
    v: float = 1.0

    def __post_init__(self):
        if self.kind not in _ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind '{self.kind}'")
        if self.T <= 0.0:
            raise ValueError("oracle horizon must be positive")


def _drift_value(inst: OracleInstance, tau: float) -> float:
    if abs(inst.a) < 1e-12:
        return inst.v + inst.c * tau
    growth = math.exp(inst.a * tau)
    return growth * inst.v + inst.c / inst.a * (growth - 1.0)


def oracle_solution(inst: OracleInstance, t: float, brownian_state):
    """Exact (y, z) at time t given the Brownian value; y (1,), z (1, d)."""
    if not 0.0 <= t <= inst.T:
        raise ValueError("time outside [0, T]")
    b = np.atleast_1d(np.asarray(brownian_state, dtype=float))
    d = b.size
    if inst.kind == "martingale_coordinate":
        if inst.j >= d:
            raise ValueError("coordinate index out of range")
        z = np.zeros((1, d))
        z[0, inst.j] = 1.0
        return np.array([b[inst.j]]), z
    if inst.kind == "martingale_square":
        if d != 1:
            raise ValueError("the squared-norm oracle is one-dimensional")
        return np.array([b[0] ** 2 + (inst.T - t)]), np.array([[2.0 * b[0]]])
    return np.array([_drift_value(inst, inst.T - t)]), np.zeros((1, d))


def oracle_paths(inst: OracleInstance, ens: PathEnsemble):
    """Oracle evaluated along every path: y (M, N+1, 1), z (M, N, 1, d)."""
    grid = ens.grid
    if abs(grid.T - inst.T) > 1e-12:
        raise ValueError("ensemble horizon disagrees with the oracle")
    m, d = ens.M, ens.d
    if inst.kind == "martingale_coordinate":
        y = ens.values[:, :, [inst.j]]
        z = np.zeros((m, grid.N, 1, d))
        z[:, :, 0, inst.j] = 1.0
        return y, z
    if inst.kind == "martingale_square":
        if d != 1:
            raise ValueError("the squared-norm oracle is one-dimensional")
        y = ens.values[:, :, [0]] ** 2 + (grid.T - grid.times)[None, :, None]
        z = 2.0 * ens.values[:, :-1, None, :]
        return y, z
    vals = np.array([_drift_value(inst, grid.T - t) for t in grid.times])
    y = np.tile(vals[None, :, None], (m, 1, 1))
    return y, np.zeros((m, grid.N, 1, d))


@dataclass(frozen=True)
class OracleErrors:
    sp_error: float
    z_rms_error: float


def compare_to_oracle(sol, inst: OracleInstance, ens: PathEnsemble,
                      p: float) -> OracleErrors:
    """S^p norm of the pathwise y error plus RMS of the z error over path, step."""
    y_ref, z_ref = oracle_paths(inst, ens)
    if sol.y.shape != y_ref.shape or sol.z.shape != z_ref.shape:
        raise ValueError("solution shape disagrees with the oracle/ensemble")
    sp_err, _ = lp_norm_arrays(sol.y - y_ref, sol.z - z_ref, sol.grid.dt, p)
    dz = sol.z - z_ref
    z_rms = float(np.sqrt(np.mean(np.sum(dz * dz, axis=(2, 3)))))
    return OracleErrors(sp_error=sp_err, z_rms_error=z_rms)
