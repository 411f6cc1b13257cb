"""Backward regression Monte Carlo solver wrapped in a frozen-argument
fixed-point iteration, with optional horizon splitting.

Each sweep solves the linearized equation whose y argument is frozen at the
previous iterate: backward in time, z comes from regressing the martingale
increment of the next value against polynomial features of the Brownian
state, then y is the regressed continuation plus an explicit driver step.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg

from . import analysis
from .generator import GeneratorSpec, analytic_lipschitz_z, eval_generator_batch
from .paths import PathEnsemble, TimeGrid

_TERMINAL_KINDS = ("coordinate", "square_norm", "constant", "custom")

REGISTERED_TERMINALS: dict = {}


def register_terminal(name: str, fn) -> None:
    """Register fn(B_T (M,d)) -> (M,k) for custom terminal conditions."""
    REGISTERED_TERMINALS[name] = fn


class SingularRegressionError(RuntimeError):
    pass


class PicardDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TerminalSpec:
    kind: str
    k: int = 1
    j: int = 0
    value: tuple = (0.0,)
    name: str = ""

    def __post_init__(self):
        if self.kind not in _TERMINAL_KINDS:
            raise ValueError(f"unknown terminal kind '{self.kind}'")


def coordinate_terminal(j: int = 0) -> TerminalSpec:
    return TerminalSpec("coordinate", k=1, j=j)


def square_norm_terminal() -> TerminalSpec:
    return TerminalSpec("square_norm", k=1)


def constant_terminal(value, k: int | None = None) -> TerminalSpec:
    vals = (float(value),) if np.isscalar(value) else tuple(float(v) for v in value)
    return TerminalSpec("constant", k=k if k is not None else len(vals), value=vals)


def custom_terminal(name: str, k: int = 1) -> TerminalSpec:
    if name not in REGISTERED_TERMINALS:
        raise ValueError(f"no registered terminal named '{name}'")
    return TerminalSpec("custom", k=k, name=name)


def terminal_values(term: TerminalSpec, ens: PathEnsemble) -> np.ndarray:
    """Evaluate xi as a function of B_T, shaped (M, k)."""
    b_T = ens.values[:, -1, :]
    if term.kind == "coordinate":
        if term.j >= ens.d:
            raise ValueError("terminal coordinate index out of range")
        return b_T[:, [term.j]]
    if term.kind == "square_norm":
        return np.sum(b_T * b_T, axis=1, keepdims=True)
    if term.kind == "constant":
        vals = np.asarray(term.value, dtype=float)
        if vals.size == 1:
            return np.full((ens.M, term.k), vals[0])
        return np.tile(vals, (ens.M, 1))
    out = np.asarray(REGISTERED_TERMINALS[term.name](b_T), dtype=float)
    if out.shape != (ens.M, term.k):
        raise ValueError("custom terminal returned wrong shape")
    return out


@dataclass(frozen=True)
class BasisSpec:
    """Total-degree polynomial basis in the d Brownian coordinates.

    ridge=None picks the default 1e-10 * M at solve time; the basis holds
    C(d + degree, degree) monomials.
    """

    degree: int = 3
    ridge: float | None = None

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("basis degree must be >= 0")
        if self.ridge is not None and self.ridge < 0.0:
            raise ValueError("ridge must be nonnegative")

    def size(self, d: int) -> int:
        return comb(d + self.degree, self.degree)

    def ridge_for(self, m: int) -> float:
        return 1e-10 * m if self.ridge is None else self.ridge


def _monomial_exponents(d: int, degree: int) -> list[tuple[int, ...]]:
    exps = [e for e in itertools.product(range(degree + 1), repeat=d)
            if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), e))
    return exps


def polynomial_features(state: np.ndarray, degree: int) -> np.ndarray:
    state = np.atleast_2d(state)
    m, d = state.shape
    exps = _monomial_exponents(d, degree)
    feats = np.empty((m, len(exps)))
    # per-coordinate power table up to degree, reused across monomials
    powers = [np.vander(state[:, i], degree + 1, increasing=True) for i in range(d)]
    for col, e in enumerate(exps):
        f = np.ones(m)
        for i, ei in enumerate(e):
            if ei:
                f = f * powers[i][:, ei]
        feats[:, col] = f
    return feats


def _normal_matrix(feats: np.ndarray, deterministic: bool,
                   block: int = 8192) -> np.ndarray:
    if not deterministic:
        return feats.T @ feats
    n = feats.shape[1]
    gram = np.zeros((n, n))
    for lo in range(0, feats.shape[0], block):
        chunk = feats[lo:lo + block]
        gram += chunk.T @ chunk
    return gram


def _cross_moment(feats: np.ndarray, targets: np.ndarray, deterministic: bool,
                  block: int = 8192) -> np.ndarray:
    if not deterministic:
        return feats.T @ targets
    out = np.zeros((feats.shape[1], targets.shape[1]))
    for lo in range(0, feats.shape[0], block):
        out += feats[lo:lo + block].T @ targets[lo:lo + block]
    return out


def _factorize(gram: np.ndarray, ridge: float):
    try:
        return scipy.linalg.cho_factor(gram + ridge * np.eye(gram.shape[0]))
    except scipy.linalg.LinAlgError as exc:
        raise SingularRegressionError(
            "normal equations are singular; pass a ridge > 0") from exc


def regress_conditional_expectation(targets: np.ndarray, state: np.ndarray,
                                    basis: BasisSpec,
                                    deterministic: bool = True):
    """Ridge-regularized least-squares projection of targets on state polynomials.

    targets (M, m) and state (M, d); returns (fitted (M, m), coefficients
    (n_basis, m)).  Requires more samples than basis functions.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[0] == 1 and targets.size > 1:
        targets = targets.T
    state = np.atleast_2d(np.asarray(state, dtype=float))
    if state.shape[0] == 1 and state.size > 1:
        state = state.T
    m = state.shape[0]
    if targets.shape[0] != m:
        raise ValueError("targets and state must share the sample axis")
    if m <= basis.size(state.shape[1]):
        raise ValueError("need more samples than basis functions")
    feats = polynomial_features(state, basis.degree)
    gram = _normal_matrix(feats, deterministic)
    factor = _factorize(gram, basis.ridge_for(m))
    coeffs = scipy.linalg.cho_solve(factor, _cross_moment(feats, targets, deterministic))
    return feats @ coeffs, coeffs


@dataclass
class DiscreteSolution:
    """Pathwise (y, z) on the grid: y (M, N+1, k), z (M, N, k, d)."""

    y: np.ndarray
    z: np.ndarray
    grid: TimeGrid

    @property
    def k(self) -> int:
        return self.y.shape[2]


@dataclass(frozen=True)
class PicardEntry:
    window: int
    iteration: int
    dist_y: float
    dist_z: float
    sp_norm: float


@dataclass
class PicardReport:
    iterations: int
    converged: bool
    tol: float
    entries: list[PicardEntry] = field(default_factory=list)
    windows: list[tuple[int, int]] = field(default_factory=list)

    @property
    def dist_y(self) -> list[float]:
        return [e.dist_y for e in self.entries]

    @property
    def dist_z(self) -> list[float]:
        return [e.dist_z for e in self.entries]

    @property
    def sp_norms(self) -> list[float]:
        return [e.sp_norm for e in self.entries]


def _backward_sweep(gen: GeneratorSpec, frozen_y: np.ndarray,
                    terminal: np.ndarray, ens: PathEnsemble, basis: BasisSpec,
                    i_lo: int, i_hi: int, deterministic: bool):
    """One frozen-argument sweep on grid indices [i_lo, i_hi]."""
    grid = ens.grid
    m, k, d = ens.M, terminal.shape[1], ens.d
    dt = grid.dt
    steps = i_hi - i_lo
    y = np.empty((m, steps + 1, k))
    z = np.empty((m, steps, k, d))
    y[:, steps] = terminal
    ridge = basis.ridge_for(m)

    for i in range(i_hi - 1, i_lo - 1, -1):
        local = i - i_lo
        y_next = y[:, local + 1]
        feats = polynomial_features(ens.values[:, i, :], basis.degree)
        gram = _normal_matrix(feats, deterministic)
        factor = _factorize(gram, ridge)
        coef_y = scipy.linalg.cho_solve(
            factor, _cross_moment(feats, y_next, deterministic))
        cont = feats @ coef_y
        # martingale residual keeps the z targets mean-zero given the state
        resid = y_next - cont
        z_targets = (resid[:, :, None] * ens.increments[:, i, None, :] / dt)
        coef_z = scipy.linalg.cho_solve(
            factor, _cross_moment(feats, z_targets.reshape(m, k * d), deterministic))
        z_i = (feats @ coef_z).reshape(m, k, d)
        g = eval_generator_batch(gen, grid.times[i], ens.values[:, i, :],
                                 frozen_y[:, i], z_i)
        y_i = cont + g * dt
        if not np.all(np.isfinite(y_i)):
            raise RuntimeError(f"non-finite solution values at time index {i}")
        y[:, local] = y_i
        z[:, local] = z_i
    return y, z


def solve_frozen_bsde(gen: GeneratorSpec, frozen_y: np.ndarray | None,
                      terminal: TerminalSpec, ens: PathEnsemble,
                      basis: BasisSpec,
                      deterministic: bool = True) -> DiscreteSolution:
    """Solve one linearized equation with the driver's y argument frozen.

    frozen_y is the previous iterate shaped (M, N+1, k); None means the zero
    field (the first sweep of the fixed-point iteration).
    """
    xi = terminal_values(terminal, ens)
    k = xi.shape[1]
    if frozen_y is None:
        frozen_y = np.zeros((ens.M, ens.grid.N + 1, k))
    if frozen_y.shape != (ens.M, ens.grid.N + 1, k):
        raise ValueError("frozen_y must be shaped (M, N+1, k)")
    if gen.k != k or gen.d != ens.d:
        raise ValueError("generator dims disagree with terminal/ensemble")
    y, z = _backward_sweep(gen, frozen_y, xi, ens, basis, 0, ens.grid.N,
                           deterministic)
    return DiscreteSolution(y=y, z=z, grid=ens.grid)


def _window_indices(grid: TimeGrid, t_split: float) -> list[tuple[int, int]]:
    """Backward partition of [0, N] into windows of length about T - t_split."""
    width = grid.T - t_split
    if width <= 0.0:
        raise ValueError("horizon split needs T1 < T")
    step = max(1, round(width / grid.dt))
    bounds = list(range(grid.N, 0, -step))
    if bounds[-1] != 0:
        bounds.append(0)
    return [(lo, hi) for hi, lo in zip(bounds[:-1], bounds[1:])]


def picard_solve(gen: GeneratorSpec, terminal: TerminalSpec, ens: PathEnsemble,
                 basis: BasisSpec, p: float = 2.0, tol: float = 1e-4,
                 max_iter: int = 25, init=None, split: float | None = None,
                 deterministic: bool = True):
    """Iterate frozen-argument sweeps until the iterate distance falls below tol.

    dist_y(n) estimates E[sup_t |y^(n+1) - y^n|^p] on the common ensemble; the
    loop stops once it reaches tol or max_iter distances have been measured.
    Exhausting max_iter returns the best iterate with converged=False, while a
    distance growing fivefold on two consecutive measurements aborts.  init is
    None for the zero field or a constant (scalar or length-k) starting field.
    With split = T1, windows of length T - T1 are processed backward from T,
    each chained to the previous window's boundary values.

    Returns (DiscreteSolution, PicardReport).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    xi = terminal_values(terminal, ens)
    k = xi.shape[1]
    if gen.k != k or gen.d != ens.d:
        raise ValueError("generator dims disagree with terminal/ensemble")

    c_lip = analytic_lipschitz_z(gen)
    if c_lip is not None and ens.grid.dt * c_lip > 0.5:
        warnings.warn("explicit z step may be unstable: dt * C > 0.5",
                      RuntimeWarning)

    grid = ens.grid
    if init is None:
        frozen = np.zeros((ens.M, grid.N + 1, k))
    else:
        vals = np.asarray(init, dtype=float).reshape(-1)
        if vals.size == 1:
            vals = np.full(k, vals[0])
        if vals.size != k:
            raise ValueError("constant initial field must have length k")
        frozen = np.tile(vals, (ens.M, grid.N + 1, 1))

    windows = [(0, grid.N)] if split is None else _window_indices(grid, split)
    y_full = frozen.copy()
    z_full = np.zeros((ens.M, grid.N, k, ens.d))
    report = PicardReport(iterations=0, converged=True, tol=tol,
                          windows=windows)

    boundary = xi
    for w_idx, (i_lo, i_hi) in enumerate(windows):
        frozen_w = frozen.copy()
        prev_y = None
        prev_z = None
        window_ok = False
        growth_streak = 0
        dists: list[float] = []
        while True:
            y_w, z_w = _backward_sweep(gen, frozen_w, boundary, ens, basis,
                                       i_lo, i_hi, deterministic)
            if prev_y is not None:
                dy, dz = analysis.iterate_distance_arrays(
                    y_w, prev_y, z_w, prev_z, grid.dt, p)
                sp, _ = analysis.lp_norm_arrays(y_w, z_w, grid.dt, p)
                dists.append(dy)
                report.iterations += 1
                report.entries.append(PicardEntry(w_idx, report.iterations,
                                                  dy, dz, sp))
                if not math.isfinite(dy):
                    raise PicardDivergenceError(
                        f"iterate distance became non-finite in window {w_idx}")
                if len(dists) >= 2 and dy > 5.0 * dists[-2]:
                    growth_streak += 1
                    if growth_streak >= 2:
                        raise PicardDivergenceError(
                            f"iterate distance grew fivefold twice in a row "
                            f"(window {w_idx}, dist_y={dy:.3e})")
                else:
                    growth_streak = 0
                prev_y, prev_z = y_w, z_w
                if dy <= tol:
                    window_ok = True
                    break
                if len(dists) >= max_iter:
                    break
            else:
                prev_y, prev_z = y_w, z_w
            frozen_w[:, i_lo:i_hi + 1] = y_w
        report.converged = report.converged and window_ok
        y_full[:, i_lo:i_hi + 1] = prev_y
        z_full[:, i_lo:i_hi] = prev_z
        boundary = y_full[:, i_lo]

    return DiscreteSolution(y=y_full, z=z_full, grid=grid), report


def save_solution_csv(sol: DiscreteSolution, path) -> None:
    """Columns path,step,t,y_1..y_k,z_11..z_kd; z rows at the terminal step are 0."""
    m, n_plus, k = sol.y.shape
    d = sol.z.shape[3]
    times = sol.grid.times
    header = (["path", "step", "t"]
              + [f"y_{i + 1}" for i in range(k)]
              + [f"z_{i + 1}{j + 1}" for i in range(k) for j in range(d)])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        zeros = [0.0] * (k * d)
        for pth in range(m):
            for step in range(n_plus):
                zvals = sol.z[pth, step].reshape(-1) if step < n_plus - 1 else zeros
                row = [str(pth), str(step), f"{times[step]:.17g}"]
                row += [f"{v:.17g}" for v in sol.y[pth, step]]
                row += [f"{v:.17g}" for v in zvals]
                fh.write(",".join(row) + "\n")


def save_picard_report_csv(report: PicardReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("iter,dist_y,dist_z,sp_norm,converged\n")
        for e in report.entries:
            fh.write(f"{e.iteration},{e.dist_y:.17g},{e.dist_z:.17g},"
                     f"{e.sp_norm:.17g},{str(report.converged).lower()}\n")
