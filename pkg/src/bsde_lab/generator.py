"""BSDE generators g(t, B_t, y, z) and sampled checks of the driver hypotheses.

Randomness in a generator enters only through the current Brownian value, so
every builtin family is a deterministic function of (t, B_t, y, z).  Custom
drivers register by name and must accept batched arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modulus import ModulusSpec, check_shape, eval_modulus, example1_h_modulus, transform_modulus, H1STAR_TO_H1
from .paths import PathEnsemble

_GEN_FAMILIES = ("zero", "linear", "example1", "custom")

REGISTERED_GENERATORS: dict = {}


def register_generator(name: str, fn) -> None:
    """Register a batched callback fn(t, brownian (M,d), y (M,k), z (M,k,d)) -> (M,k)."""
    REGISTERED_GENERATORS[name] = fn


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    k: int = 1
    d: int = 1
    a: float | tuple = 0.0
    b: float = 0.0
    c: float | tuple = 0.0
    p: float = 2.0
    delta: float = math.exp(-2.0)
    name: str = ""

    def __post_init__(self):
        if self.family not in _GEN_FAMILIES:
            raise ValueError(f"unknown generator family '{self.family}'")
        if self.k < 1 or self.d < 1:
            raise ValueError("generator dims must be >= 1")


def zero_generator(k: int = 1, d: int = 1) -> GeneratorSpec:
    return GeneratorSpec("zero", k=k, d=d)


def linear_generator(a=0.0, b: float = 0.0, c=0.0, k: int = 1,
                     d: int = 1) -> GeneratorSpec:
    """g = a y + b |z| + c with scalar or k-by-k a and constant c in R^k."""
    if not np.isscalar(a):
        a = tuple(tuple(float(x) for x in row) for row in np.asarray(a, dtype=float))
        if np.asarray(a).shape != (k, k):
            raise ValueError("matrix coefficient a must be k-by-k")
    else:
        a = float(a)
    if not np.isscalar(c):
        c = tuple(float(x) for x in np.asarray(c, dtype=float))
        if len(c) != k:
            raise ValueError("constant term c must live in R^k")
    else:
        c = float(c)
    return GeneratorSpec("linear", k=k, d=d, a=a, b=float(b), c=c)


def example1_generator(p: float = 2.0, delta: float | None = None,
                       d: int = 1) -> GeneratorSpec:
    """g = h(|y|) + |z| + |B_t| with the logarithmic modulus h; scalar (k = 1)."""
    h = example1_h_modulus(p, delta)  # validates (p, delta)
    return GeneratorSpec("example1", k=1, d=d, p=h.p, delta=h.delta)


def custom_generator(name: str, k: int = 1, d: int = 1) -> GeneratorSpec:
    if name not in REGISTERED_GENERATORS:
        raise ValueError(f"no registered generator named '{name}'")
    return GeneratorSpec("custom", k=k, d=d, name=name)


def _frobenius(z: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(z * z, axis=(1, 2)))


def eval_generator_batch(gen: GeneratorSpec, t, brownian: np.ndarray,
                         y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vectorized driver evaluation over a batch of states.

    brownian (M, d), y (M, k), z (M, k, d) -> (M, k).  t may be a scalar or an
    (M,) array; builtin families do not depend on it directly.
    """
    m = brownian.shape[0]
    if brownian.shape != (m, gen.d) or y.shape != (m, gen.k) or z.shape != (m, gen.k, gen.d):
        raise ValueError("dimension mismatch between generator and batch arrays")
    if gen.family == "zero":
        return np.zeros((m, gen.k))
    if gen.family == "linear":
        if np.isscalar(gen.a):
            out = gen.a * y
        else:
            out = y @ np.asarray(gen.a).T
        out = out + gen.b * _frobenius(z)[:, None]
        return out + np.asarray(gen.c, dtype=float)
    if gen.family == "example1":
        h = example1_h_modulus(gen.p, gen.delta)
        val = (eval_modulus(h, np.abs(y[:, 0])) + _frobenius(z)
               + np.linalg.norm(brownian, axis=1))
        return val[:, None]
    fn = REGISTERED_GENERATORS.get(gen.name)
    if fn is None:
        raise ValueError(f"no registered generator named '{gen.name}'")
    out = np.asarray(fn(t, brownian, y, z), dtype=float)
    if out.shape != (m, gen.k):
        raise ValueError("custom generator returned wrong shape")
    return out


def eval_generator(gen: GeneratorSpec, t: float, brownian_state, y, z) -> np.ndarray:
    """Single-state driver value: brownian (d,), y (k,), z (k, d) -> (k,)."""
    b = np.atleast_1d(np.asarray(brownian_state, dtype=float))
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    zv = np.asarray(z, dtype=float)
    if zv.ndim == 1 and zv.size == gen.k * gen.d:
        zv = zv.reshape(gen.k, gen.d)
    if b.shape != (gen.d,) or yv.shape != (gen.k,) or zv.shape != (gen.k, gen.d):
        raise ValueError("dimension mismatch in generator evaluation")
    return eval_generator_batch(gen, t, b[None], yv[None], zv[None])[0]


def analytic_lipschitz_z(gen: GeneratorSpec) -> float | None:
    """Exact z-Lipschitz constant for builtin families, None for custom."""
    if gen.family == "zero":
        return 0.0
    if gen.family == "linear":
        return abs(gen.b) * math.sqrt(gen.k)
    if gen.family == "example1":
        return 1.0
    return None


@dataclass(frozen=True)
class SamplerConfig:
    """Uniform sampling box [0,T] x [-s sqrt(T), s sqrt(T)]^d x [-R, R]^k x [-R, R]^(k d)."""

    count: int = 4096
    seed: int = 0
    horizon: float = 1.0
    radius: float = 5.0
    brownian_scale: float = 3.0


def _draw_box(sampler: SamplerConfig, gen: GeneratorSpec, rng):
    n = sampler.count
    t = rng.uniform(0.0, sampler.horizon, n)
    b_half = sampler.brownian_scale * math.sqrt(sampler.horizon)
    brownian = rng.uniform(-b_half, b_half, (n, gen.d))
    return t, brownian


def _auto_tol(gen: GeneratorSpec, mod: ModulusSpec | None) -> float:
    if mod is not None and mod.family == "tabulated":
        # piecewise-linear chords undercut a strictly concave modulus by ~1e-4
        return 1e-3
    if gen.family != "custom":
        return 1e-9
    return 1e-6


@dataclass(frozen=True)
class H1Report:
    max_ratio: float
    witness: dict
    passed: bool
    tol: float


def check_h1(gen: GeneratorSpec, mod: ModulusSpec, p: float,
             sampler: SamplerConfig = SamplerConfig(),
             tol: float | None = None) -> H1Report:
    """Sampled test of |g(y1,z) - g(y2,z)|^p <= mod(|y1 - y2|^p).

    Returns the largest observed ratio and its witness; a vanishing modulus
    against a nonzero numerator reports ratio = +inf.
    """
    if p <= 1.0:
        raise ValueError("check_h1 needs p > 1")
    if tol is None:
        tol = _auto_tol(gen, mod)
    rng = np.random.default_rng(np.random.Philox(key=sampler.seed))
    t, brownian = _draw_box(sampler, gen, rng)
    n = sampler.count
    y1 = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k))
    y2 = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k))
    z = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k, gen.d))

    g1 = eval_generator_batch(gen, t, brownian, y1, z)
    g2 = eval_generator_batch(gen, t, brownian, y2, z)
    num = np.linalg.norm(g1 - g2, axis=1) ** p
    dy = np.linalg.norm(y1 - y2, axis=1)
    den = eval_modulus(mod, dy ** p)

    valid = dy > 0.0
    ratio = np.zeros(n)
    pos = valid & (den > 0.0)
    ratio[pos] = num[pos] / den[pos]
    ratio[valid & (den <= 0.0) & (num > 0.0)] = np.inf

    i = int(np.argmax(ratio))
    witness = {"t": float(t[i]), "brownian": brownian[i].copy(), "y1": y1[i].copy(),
               "y2": y2[i].copy(), "z": z[i].copy(), "ratio": float(ratio[i])}
    max_ratio = float(ratio[i])
    return H1Report(max_ratio, witness, max_ratio <= 1.0 + tol, tol)


@dataclass(frozen=True)
class LipschitzZReport:
    sampled: float
    analytic: float | None


def estimate_lipschitz_z(gen: GeneratorSpec,
                         sampler: SamplerConfig = SamplerConfig()) -> LipschitzZReport:
    """Sampled max of |g(y,z1) - g(y,z2)| / |z1 - z2|, plus the exact builtin constant."""
    rng = np.random.default_rng(np.random.Philox(key=sampler.seed))
    t, brownian = _draw_box(sampler, gen, rng)
    n = sampler.count
    y = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k))
    z1 = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k, gen.d))
    z2 = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k, gen.d))

    g1 = eval_generator_batch(gen, t, brownian, y, z1)
    g2 = eval_generator_batch(gen, t, brownian, y, z2)
    dz = _frobenius(z1 - z2)
    valid = dz > 0.0
    ratio = np.linalg.norm(g1 - g2, axis=1)[valid] / dz[valid]
    sampled = float(np.max(ratio)) if ratio.size else 0.0
    return LipschitzZReport(sampled, analytic_lipschitz_z(gen))


@dataclass(frozen=True)
class H3Report:
    """Monte Carlo estimate of E[(int_0^T |g(t, 0, 0)| dt)^p].

    Finiteness cannot be certified by sampling; `unstable` flags estimates
    that move by more than half when the ensemble is cut to its first half.
    """

    estimate: float
    standard_error: float
    half_estimate: float
    unstable: bool


def check_h3(gen: GeneratorSpec, ens: PathEnsemble, p: float) -> H3Report:
    grid = ens.grid
    vals = np.empty((ens.M, grid.N + 1))
    y0 = np.zeros((ens.M, gen.k))
    z0 = np.zeros((ens.M, gen.k, gen.d))
    for i, t in enumerate(grid.times):
        g = eval_generator_batch(gen, t, ens.values[:, i, :], y0, z0)
        vals[:, i] = np.linalg.norm(g, axis=1)
    if not np.all(np.isfinite(vals)):
        raise ValueError("generator produced non-finite values at (y, z) = 0")
    per_path = np.trapezoid(vals, dx=grid.dt, axis=1) ** p
    estimate = float(np.mean(per_path))
    se = float(np.std(per_path) / math.sqrt(ens.M))
    half = float(np.mean(per_path[: max(1, ens.M // 2)]))
    unstable = not math.isfinite(estimate) or \
        abs(half - estimate) > 0.5 * max(abs(estimate), 1e-300)
    return H3Report(estimate, se, half, unstable)


_PROCESS_KINDS = ("zero", "constant", "abs_brownian_coordinate",
                  "modulus_of_frozen_path")


@dataclass(frozen=True)
class ProcessSpec:
    """Descriptor for the nonnegative envelope processes phi_t and f_t."""

    kind: str = "zero"
    value: float = 0.0
    index: int = 0
    mod: ModulusSpec | None = None
    exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in _PROCESS_KINDS:
            raise ValueError(f"unknown process kind '{self.kind}'")
        if self.kind == "constant" and self.value < 0.0:
            raise ValueError("constant process must be nonnegative")
        if self.kind == "modulus_of_frozen_path" and self.mod is None:
            raise ValueError("modulus_of_frozen_path needs a modulus")


def eval_process(spec: ProcessSpec, path_idx: np.ndarray, t_idx: np.ndarray,
                 ens: PathEnsemble, frozen: np.ndarray | None = None) -> np.ndarray:
    if spec.kind == "zero":
        return np.zeros(len(path_idx))
    if spec.kind == "constant":
        return np.full(len(path_idx), spec.value)
    if spec.kind == "abs_brownian_coordinate":
        if spec.index >= ens.d:
            raise ValueError("brownian coordinate index out of range")
        return np.abs(ens.values[path_idx, t_idx, spec.index])
    if frozen is None:
        raise ValueError("modulus_of_frozen_path needs the frozen path array")
    v = np.linalg.norm(frozen[path_idx, t_idx, :], axis=1)
    return eval_modulus(spec.mod, v ** spec.exponent) ** (1.0 / spec.exponent)


@dataclass(frozen=True)
class EnvelopeA:
    """Growth envelope |g| <= psi^(1/p)(|y|^p) + lam |z| + phi_t + f_t."""

    psi: ModulusSpec
    lam: float
    phi: ProcessSpec = ProcessSpec()
    f: ProcessSpec = ProcessSpec()

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("envelope coefficient lambda must be >= 0")


@dataclass(frozen=True)
class EnvelopeReport:
    max_defect: float
    witness: dict
    passed: bool
    tol: float


def verify_envelope(gen: GeneratorSpec, env: EnvelopeA, p: float,
                    ens: PathEnsemble, sampler: SamplerConfig = SamplerConfig(),
                    tol: float | None = None,
                    frozen: np.ndarray | None = None) -> EnvelopeReport:
    """Sampled defect |g| - [psi^(1/p)(|y|^p) + lam |z| + phi + f], max over draws."""
    shape = check_shape(env.psi, grid_size=4096, tol=1e-9)
    if not (shape.is_concave and shape.is_nondecreasing and shape.zero_at_zero):
        raise ValueError("envelope psi must be concave, nondecreasing, 0 at 0")
    if tol is None:
        tol = _auto_tol(gen, env.psi)
    rng = np.random.default_rng(np.random.Philox(key=sampler.seed))
    n = sampler.count
    path_idx = rng.integers(0, ens.M, n)
    t_idx = rng.integers(0, ens.grid.N + 1, n)
    y = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k))
    z = rng.uniform(-sampler.radius, sampler.radius, (n, gen.k, gen.d))

    t = ens.grid.times[t_idx]
    brownian = ens.values[path_idx, t_idx, :]
    g = np.linalg.norm(eval_generator_batch(gen, t, brownian, y, z), axis=1)
    bound = (eval_modulus(env.psi, np.linalg.norm(y, axis=1) ** p) ** (1.0 / p)
             + env.lam * _frobenius(z)
             + eval_process(env.phi, path_idx, t_idx, ens, frozen)
             + eval_process(env.f, path_idx, t_idx, ens, frozen))
    defect = g - bound
    i = int(np.argmax(defect))
    witness = {"t": float(t[i]), "path": int(path_idx[i]), "y": y[i].copy(),
               "z": z[i].copy(), "defect": float(defect[i])}
    return EnvelopeReport(float(defect[i]), witness, float(defect[i]) <= tol, tol)


def auto_envelope(gen: GeneratorSpec, p: float, radius: float = 5.0) -> EnvelopeA:
    """Canonical envelope for a builtin generator family."""
    from .modulus import linear_modulus  # local to keep module top uncluttered

    if gen.family == "zero":
        return EnvelopeA(psi=linear_modulus(0.0, domain_cap=radius ** p), lam=0.0)
    if gen.family == "linear":
        a_norm = abs(gen.a) if np.isscalar(gen.a) else \
            float(np.linalg.norm(np.asarray(gen.a), 2))
        c_norm = abs(gen.c) if np.isscalar(gen.c) else \
            float(np.linalg.norm(np.asarray(gen.c)))
        return EnvelopeA(psi=linear_modulus(a_norm ** p, domain_cap=radius ** p),
                         lam=abs(gen.b) * math.sqrt(gen.k),
                         phi=ProcessSpec("constant", value=c_norm))
    if gen.family == "example1":
        if gen.d != 1:
            raise ValueError("auto envelope for example1 assumes d = 1")
        h = example1_h_modulus(gen.p, gen.delta, domain_cap=radius)
        psi = transform_modulus(h, H1STAR_TO_H1, p=p).modulus
        return EnvelopeA(psi=psi, lam=1.0,
                         f=ProcessSpec("abs_brownian_coordinate", index=0))
    raise ValueError("auto envelope is only defined for builtin families")
