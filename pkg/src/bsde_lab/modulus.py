"""Moduli of continuity: evaluation, shape checks, Osgood classification, transforms.

A modulus here is a nonnegative function on [0, U] with value 0 at 0, used to
bound increments of a BSDE driver in its y argument.  Four families are
supported:

* ``linear``      rho(u) = mu * u
* ``power``       rho(u) = c * u**alpha, alpha in (0, 2]
* ``example1h``   h(x) = x * |ln x|**(1/p) on (0, delta], continued by its
                  tangent line beyond delta
* ``tabulated``   piecewise-linear through breakpoints (u_i, v_i) with
                  u_0 = v_0 = 0, extended linearly past the last breakpoint
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

DIVERGENT = "divergent"
CONVERGENT = "convergent"
INCONCLUSIVE = "inconclusive"

_FAMILIES = ("linear", "power", "example1h", "tabulated")


@dataclass(frozen=True)
class ModulusSpec:
    """One modulus of continuity.  Use the factory helpers below."""

    family: str
    domain_cap: float = 1.0
    mu: float = 0.0
    c: float = 1.0
    alpha: float = 1.0
    p: float = 2.0
    delta: float = math.exp(-2.0)
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown modulus family '{self.family}'")
        if not (self.domain_cap > 0.0 and math.isfinite(self.domain_cap)):
            raise ValueError("domain_cap must be a positive finite real")


def linear_modulus(mu: float, domain_cap: float = 1.0) -> ModulusSpec:
    if mu < 0.0:
        raise ValueError("linear modulus needs mu >= 0")
    return ModulusSpec("linear", domain_cap=domain_cap, mu=float(mu))


def power_modulus(c: float, alpha: float, domain_cap: float = 1.0) -> ModulusSpec:
    if c <= 0.0:
        raise ValueError("power modulus needs c > 0")
    if not 0.0 < alpha <= 2.0:
        raise ValueError("power modulus needs alpha in (0, 2]")
    return ModulusSpec("power", domain_cap=domain_cap, c=float(c), alpha=float(alpha))


def example1_h_modulus(p: float, delta: float | None = None,
                       domain_cap: float = 1.0) -> ModulusSpec:
    """h(x) = x|ln x|^(1/p) below delta, tangent-line continuation above.

    delta must satisfy delta <= exp(-1/p); otherwise h would decrease just
    below delta and the modulus would fail the shape check.
    """
    if p <= 1.0:
        raise ValueError("example1h modulus needs p > 1")
    if delta is None:
        delta = math.exp(-2.0)
    if not 0.0 < delta < 1.0:
        raise ValueError("example1h modulus needs delta in (0, 1)")
    if delta > math.exp(-1.0 / p):
        raise ValueError("example1h modulus needs delta <= exp(-1/p) "
                         "to stay nondecreasing")
    return ModulusSpec("example1h", domain_cap=domain_cap, p=float(p),
                       delta=float(delta))


def tabulated_modulus(breakpoints, domain_cap: float | None = None) -> ModulusSpec:
    """Piecewise-linear modulus through (u_i, v_i); first point must be (0, 0)."""
    pts = [(float(u), float(v)) for u, v in breakpoints]
    if len(pts) < 2:
        raise ValueError("tabulated modulus needs at least 2 breakpoints")
    us = [u for u, _ in pts]
    vs = [v for _, v in pts]
    if us[0] != 0.0 or vs[0] != 0.0:
        raise ValueError("tabulated modulus must start at (0, 0)")
    if any(b <= a for a, b in zip(us, us[1:])):
        raise ValueError("tabulated breakpoints must be strictly ascending in u")
    if any(v < 0.0 for v in vs) or not all(map(math.isfinite, us + vs)):
        raise ValueError("tabulated breakpoints must be finite and nonnegative")
    cap = us[-1] if domain_cap is None else float(domain_cap)
    return ModulusSpec("tabulated", domain_cap=cap, breakpoints=tuple(pts))


def _example1_slope(p: float, delta: float) -> float:
    ln = -math.log(delta)
    return ln ** (1.0 / p) - (1.0 / p) * ln ** (1.0 / p - 1.0)


@lru_cache(maxsize=128)
def _breakpoint_arrays(breakpoints: tuple):
    us = np.array([b[0] for b in breakpoints])
    vs = np.array([b[1] for b in breakpoints])
    return us, vs


def _eval_array(mod: ModulusSpec, u: np.ndarray) -> np.ndarray:
    if mod.family == "linear":
        return mod.mu * u
    if mod.family == "power":
        return mod.c * u ** mod.alpha
    if mod.family == "example1h":
        out = np.zeros_like(u)
        small = (u > 0.0) & (u <= mod.delta)
        big = u > mod.delta
        if np.any(small):
            x = u[small]
            out[small] = x * (-np.log(x)) ** (1.0 / mod.p)
        if np.any(big):
            h_delta = mod.delta * (-math.log(mod.delta)) ** (1.0 / mod.p)
            out[big] = _example1_slope(mod.p, mod.delta) * (u[big] - mod.delta) + h_delta
        return out
    us, vs = _breakpoint_arrays(mod.breakpoints)
    out = np.interp(u, us, vs)
    beyond = u > us[-1]
    if np.any(beyond):
        slope = (vs[-1] - vs[-2]) / (us[-1] - us[-2])
        out[beyond] = vs[-1] + slope * (u[beyond] - us[-1])
    return out


def eval_modulus(mod: ModulusSpec, u):
    """Evaluate the modulus at u >= 0 (scalar or array)."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("modulus argument must be nonnegative")
    out = _eval_array(mod, np.atleast_1d(arr).copy())
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _shape_grid(cap: float, n: int) -> np.ndarray:
    """Geometric-plus-uniform grid over (0, cap]."""
    n_geo = n // 2
    n_uni = n - n_geo
    geo = np.geomspace(cap * 1e-9, cap, n_geo)
    uni = np.linspace(0.0, cap, n_uni + 1)[1:]
    return np.unique(np.concatenate([geo, uni]))


@dataclass(frozen=True)
class ShapeReport:
    """Defects are signed so that defect <= tol means the flag passes;
    worst_violation = max defect - tol, hence <= 0 when every flag is true."""

    is_nondecreasing: bool
    is_concave: bool
    zero_at_zero: bool
    positive_on_positive: bool
    worst_violation: float
    grid_size: int

    @property
    def all_ok(self) -> bool:
        return (self.is_nondecreasing and self.is_concave
                and self.zero_at_zero and self.positive_on_positive)


def check_shape(mod: ModulusSpec, grid_size: int = 10_000,
                tol: float = 1e-9) -> ShapeReport:
    """Scan for monotonicity and midpoint concavity on a geometric-plus-uniform grid."""
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    grid = _shape_grid(mod.domain_cap, grid_size)
    vals = eval_modulus(mod, grid)
    v0 = eval_modulus(mod, 0.0)

    d_zero = abs(v0)
    d_mono = max(float(np.max(vals[:-1] - vals[1:])), v0 - float(vals[0]))
    mids = 0.5 * (grid[:-1] + grid[1:])
    d_conc = float(np.max(0.5 * (vals[:-1] + vals[1:]) - eval_modulus(mod, mids)))
    d_pos = float(np.max(-vals))

    worst = max(d_zero, d_mono, d_conc, d_pos) - tol
    return ShapeReport(
        is_nondecreasing=d_mono <= tol,
        is_concave=d_conc <= tol,
        zero_at_zero=d_zero <= tol,
        positive_on_positive=d_pos <= tol,
        worst_violation=worst,
        grid_size=grid.size,
    )


@dataclass(frozen=True)
class OsgoodReport:
    classification: str
    rule: str
    eps: np.ndarray
    integrals: np.ndarray
    increments: np.ndarray
    integrand_unbounded: bool


def _analytic_osgood(mod: ModulusSpec, w: float) -> str | None:
    if mod.family == "linear":
        return DIVERGENT if mod.mu > 0.0 else None
    if mod.family == "power":
        # integrand ~ u^(w(1-alpha)-1) near 0
        return CONVERGENT if mod.alpha < 1.0 else DIVERGENT
    if mod.family == "example1h":
        # integrand ~ 1/(u |ln u|^(w/p)) near 0
        return CONVERGENT if w > mod.p else DIVERGENT
    return None


def _scalar_evaluator(mod: ModulusSpec):
    """Low-overhead scalar evaluator for quadrature inner loops."""
    if mod.family == "linear":
        mu = mod.mu
        return lambda u: mu * u
    if mod.family == "power":
        c, alpha = mod.c, mod.alpha
        return lambda u: c * u ** alpha
    if mod.family == "example1h":
        p, delta = mod.p, mod.delta
        h_delta = delta * (-math.log(delta)) ** (1.0 / p)
        slope = _example1_slope(p, delta)

        def h(u):
            if u <= 0.0:
                return 0.0
            if u <= delta:
                return u * (-math.log(u)) ** (1.0 / p)
            return slope * (u - delta) + h_delta

        return h
    us, vs = _breakpoint_arrays(mod.breakpoints)
    u_last, v_last = us[-1], vs[-1]
    tail = (vs[-1] - vs[-2]) / (us[-1] - us[-2])

    def tab(u):
        if u > u_last:
            return v_last + tail * (u - u_last)
        return float(np.interp(u, us, vs))

    return tab


def _decade_integral(mod: ModulusSpec, w: float, a: float, b: float) -> float:
    rho = _scalar_evaluator(mod)

    def f(u):
        return u ** (w - 1.0) / rho(u) ** w

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, a, b, limit=200)
    return val


def osgood_classify(mod: ModulusSpec, weight_exponent: float = 1.0,
                    u0: float | None = None, eps_decades: int = 8,
                    analytic_override: bool = True,
                    slope_fraction: float = 0.1,
                    geometric_ratio: float = 0.9) -> OsgoodReport:
    """Decide whether the weighted integral of 1/mod**w diverges at 0+.

    Computes I(eps) = int_eps^u0 u^(w-1)/mod(u)^w du on eps = u0 * 10^-j and
    classifies from the per-decade increments: bounded-below increments over
    the last half of the decades mean divergence, geometrically shrinking
    increments mean convergence.  Builtin analytic families carry an exact
    override (enabled by default); the sample curve is returned either way.
    """
    w = float(weight_exponent)
    if w < 1.0:
        raise ValueError("weight_exponent must be >= 1")
    if u0 is None:
        u0 = mod.domain_cap
    if not 0.0 < u0 <= mod.domain_cap:
        raise ValueError("u0 must lie in (0, domain_cap]")
    if eps_decades < 3:
        raise ValueError("eps_decades must be >= 3")

    eps = u0 * 10.0 ** (-np.arange(1, eps_decades + 1))
    probe = np.concatenate([np.geomspace(e / 10.0, e, 32) for e in [u0]] +
                           [np.geomspace(e, e * 10.0, 32) for e in eps])
    unbounded = bool(np.any(eval_modulus(mod, probe) <= 0.0))

    increments = np.full(eps_decades, np.inf)
    if not unbounded:
        hi = u0
        for j in range(eps_decades):
            lo = u0 * 10.0 ** (-(j + 1))
            increments[j] = _decade_integral(mod, w, lo, hi)
            hi = lo
        if not np.all(np.isfinite(increments)):
            unbounded = True
    integrals = np.cumsum(increments)

    classification, rule = INCONCLUSIVE, "none"
    if unbounded:
        classification, rule = DIVERGENT, "unbounded-integrand"
    elif analytic_override and (exact := _analytic_osgood(mod, w)) is not None:
        classification, rule = exact, "analytic"
    else:
        first = increments[0]
        half = increments[eps_decades // 2:]
        ratios = increments[1:] / np.maximum(increments[:-1], 1e-300)
        tail_ratios = ratios[(len(ratios)) // 2:]
        # ratios creeping up toward 1 are the signature of a slowly divergent
        # integrand; only a stable geometric decay counts as Cauchy
        rising = bool(np.all(np.diff(tail_ratios) > 1e-3))
        if first > 0.0 and np.min(half) >= slope_fraction * first:
            classification, rule = DIVERGENT, "slope"
        elif first > 0.0 and np.all(tail_ratios <= geometric_ratio) and not rising:
            classification, rule = CONVERGENT, "geometric"

    return OsgoodReport(classification, rule, eps, integrals, increments, unbounded)


def linear_growth_coefficient(mod: ModulusSpec, grid_size: int = 10_000) -> float:
    """Smallest grid-measured A with mod(u) <= A (u + 1) on [0, domain_cap].

    A concave nondecreasing modulus with mod(0) = 0 grows at most linearly,
    so the ratio mod(u)/(u+1) is bounded; non-concave input is rejected.
    """
    rep = check_shape(mod, grid_size=grid_size, tol=1e-9)
    if not (rep.is_concave and rep.is_nondecreasing and rep.zero_at_zero):
        raise ValueError("linear growth coefficient requires a concave, "
                         "nondecreasing modulus with value 0 at 0")
    grid = _shape_grid(mod.domain_cap, grid_size)
    return float(np.max(eval_modulus(mod, grid) / (grid + 1.0)))


def concave_majorant(samples) -> ModulusSpec:
    """Least concave nondecreasing majorant of the sample set.

    Upper convex hull of the points, with any decreasing tail flattened at the
    running maximum.  The output dominates the input pointwise and is a fixed
    point of this operation.
    """
    pts = [(float(u), float(v)) for u, v in samples]
    if len(pts) < 2:
        raise ValueError("concave majorant needs at least 2 samples")
    if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
        raise ValueError("samples must be strictly ascending in u")
    if any(u < 0.0 or v < 0.0 for u, v in pts):
        raise ValueError("samples must be nonnegative")
    if pts[0] != (0.0, 0.0):
        raise ValueError("samples must start at (0, 0)")

    def upper_hull(points):
        hull: list[tuple[float, float]] = []
        for u, v in points:
            # pop while the previous vertex lies on or below the chord
            # (non-concave turn); equality drops collinear vertices
            while len(hull) >= 2:
                (u1, v1), (u2, v2) = hull[-2], hull[-1]
                if (v2 - v1) * (u - u2) <= (v - v2) * (u2 - u1):
                    hull.pop()
                else:
                    break
            hull.append((u, v))
        return hull

    hull = upper_hull(pts)
    flat: list[tuple[float, float]] = [hull[0]]
    for u, v in hull[1:]:
        if v < flat[-1][1]:
            flat.append((pts[-1][0], flat[-1][1]))
            break
        flat.append((u, v))
    if len(flat) == 1:
        flat.append((pts[-1][0], flat[0][1]))
    return tabulated_modulus(upper_hull(flat), domain_cap=pts[-1][0])


POWER_ROOT = "power_root"
H1STAR_TO_H1 = "h1star_to_h1"
H1PP_TO_H1 = "h1pp_to_h1"


@dataclass(frozen=True)
class DominationReport:
    """Measured domination rho_bar(u) <= K 2^p kappa(u^(q/p))^(p/q)
    with K = 1 + 1/rho2(1)^p, reported on the sampling grid."""

    skipped: bool
    max_defect: float
    holds: bool
    note: str


@dataclass(frozen=True)
class TransformResult:
    modulus: ModulusSpec
    domination: DominationReport | None = None
    rho2_over_rho1_sup: float | None = None


def _tabulation_grid(cap: float, points_per_decade: int = 64, decades: int = 12,
                     uniform_points: int = 256) -> np.ndarray:
    geo = np.geomspace(cap * 10.0 ** (-decades), cap, points_per_decade * decades + 1)
    uni = np.linspace(0.0, cap, uniform_points + 1)[1:]
    return np.unique(np.concatenate([geo, uni]))


def _sample_to_tabulated(xs: np.ndarray, vals: np.ndarray, cap: float) -> ModulusSpec:
    keep = np.isfinite(vals)
    xs, vals = xs[keep], np.maximum(vals[keep], 0.0)
    if xs.size < 3:
        raise ValueError("transform grid degenerated to fewer than 3 samples")
    pts = [(0.0, 0.0)] + list(zip(xs.tolist(), vals.tolist()))
    return tabulated_modulus(pts, domain_cap=cap)


def transform_modulus(mod: ModulusSpec, kind: str, r: float | None = None,
                      p: float | None = None, q: float | None = None) -> TransformResult:
    """Map a modulus through one of the hypothesis-hierarchy transforms.

    power_root(r):    u -> mod(u^(1/r))^r, sampled onto a tabulated modulus.
    h1star_to_h1(p):  u -> mod(u^(1/p))^p, the power-root with r = p.
    h1pp_to_h1(p, q): rho1(u) = mod(u^q)^(1/q), rho2 = concave majorant of
                      rho1, output rho_bar(u) = rho2(u^(1/p))^p + u, together
                      with the measured domination report.
    """
    if kind == POWER_ROOT or kind == H1STAR_TO_H1:
        if kind == H1STAR_TO_H1:
            if p is None or p <= 1.0:
                raise ValueError("h1star_to_h1 needs p > 1")
            r = p
        if r is None or r <= 0.0:
            raise ValueError("power_root needs r > 0")
        cap = mod.domain_cap ** r
        xs = _tabulation_grid(cap)
        vals = eval_modulus(mod, xs ** (1.0 / r)) ** r
        return TransformResult(_sample_to_tabulated(xs, vals, cap))

    if kind == H1PP_TO_H1:
        if p is None or p <= 1.0:
            raise ValueError("h1pp_to_h1 needs p > 1")
        if q is None or q < p:
            raise ValueError("h1pp_to_h1 needs q >= p")
        cap1 = mod.domain_cap ** (1.0 / q)
        xs1 = _tabulation_grid(cap1)
        rho1 = eval_modulus(mod, xs1 ** q) ** (1.0 / q)
        rho2 = concave_majorant([(0.0, 0.0)] + list(zip(xs1.tolist(), rho1.tolist())))
        positive = rho1 > 0.0
        sup_ratio = float(np.max(eval_modulus(rho2, xs1[positive]) / rho1[positive])) \
            if np.any(positive) else math.nan

        cap = cap1 ** p
        xs = _tabulation_grid(cap)
        rho_bar = eval_modulus(rho2, xs ** (1.0 / p)) ** p + xs
        out = _sample_to_tabulated(xs, rho_bar, cap)

        rho2_at_1 = eval_modulus(rho2, 1.0)
        if rho2_at_1 <= 1e-12:
            domination = DominationReport(True, math.nan, False,
                              "rho2(1) ~ 0: rho_bar(u) ~ u and the integral "
                              "diverges harmonically; domination not applicable")
        else:
            big_k = 1.0 + 1.0 / rho2_at_1 ** p
            rhs = big_k * 2.0 ** p * eval_modulus(mod, xs ** (q / p)) ** (p / q)
            defect = float(np.max(rho_bar - rhs))
            domination = DominationReport(False, defect, defect <= 1e-9 * max(1.0, float(np.max(rhs))),
                              f"K={big_k:.6g}")
        return TransformResult(out, domination, sup_ratio)

    raise ValueError(f"unknown transform kind '{kind}'")


def save_tabulated_csv(mod: ModulusSpec, path) -> None:
    if mod.family != "tabulated":
        raise ValueError("only tabulated moduli serialize to CSV")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v"])
        for u, v in mod.breakpoints:
            writer.writerow([f"{u:.17g}", f"{v:.17g}"])


def load_tabulated_csv(path, domain_cap: float | None = None) -> ModulusSpec:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["u", "v"]:
            raise ValueError("tabulated modulus CSV must have header 'u,v'")
        pts = [(float(row[0]), float(row[1])) for row in reader if row]
    return tabulated_modulus(pts, domain_cap=domain_cap)
