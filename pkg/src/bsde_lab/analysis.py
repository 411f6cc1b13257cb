"""Solution-space norms, iterate distances, derived constants, the nonlinear
integral recursion, and Monte Carlo checks of the a-priori inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .generator import EnvelopeA, GeneratorSpec, eval_generator_batch, eval_process
from .modulus import ModulusSpec, check_shape, eval_modulus
from .paths import PathEnsemble


class BihariOrderingError(RuntimeError):
    """The recursion lost its pointwise ordering beyond quadrature tolerance."""


def lp_norm_arrays(y: np.ndarray, z: np.ndarray, dt: float, p: float):
    """(sp, mp) norm estimates from raw arrays y (M,N+1,k), z (M,N,k,d)."""
    sup_p = np.max(np.linalg.norm(y, axis=2), axis=1) ** p
    sp = float(np.mean(sup_p) ** (1.0 / p))
    zsq = np.sum(z * z, axis=(2, 3))
    mp = float(np.mean((np.sum(zsq, axis=1) * dt) ** (p / 2.0)) ** (1.0 / p))
    return sp, mp


def iterate_distance_arrays(y_a, y_b, z_a, z_b, dt: float, p: float):
    """Raw p-power distances: (E[sup |dy|^p], E[(int |dz|^2 dt)^(p/2)])."""
    dy = float(np.mean(np.max(np.linalg.norm(y_a - y_b, axis=2), axis=1) ** p))
    dzsq = np.sum((z_a - z_b) ** 2, axis=(2, 3))
    dz = float(np.mean((np.sum(dzsq, axis=1) * dt) ** (p / 2.0)))
    return dy, dz


@dataclass(frozen=True)
class NormReport:
    sp: float
    mp: float


def lp_norms(sol, p: float) -> NormReport:
    """S^p norm of y and M^p norm of z for a discrete solution."""
    if not np.all(np.isfinite(sol.y)) or not np.all(np.isfinite(sol.z)):
        raise ValueError("solution contains non-finite values")
    sp, mp = lp_norm_arrays(sol.y, sol.z, sol.grid.dt, p)
    return NormReport(sp=sp, mp=mp)


@dataclass(frozen=True)
class DistanceReport:
    dy: float
    dz: float


def picard_distance(a, b, p: float) -> DistanceReport:
    """Pathwise sup/integral statistics of the difference of two solutions."""
    if a.y.shape != b.y.shape or a.z.shape != b.z.shape:
        raise ValueError("solutions have mismatched shapes")
    if a.grid.N != b.grid.N or a.grid.T != b.grid.T:
        raise ValueError("solutions live on different grids")
    dy, dz = iterate_distance_arrays(a.y, b.y, a.z, b.z, a.grid.dt, p)
    return DistanceReport(dy=dy, dz=dz)


@dataclass(frozen=True)
class BihariCurve:
    """phi_n sampled on [T1, T]; row n of values is phi_n."""

    times: np.ndarray
    values: np.ndarray  # (n_max + 1, len(times))


def bihari_recursion(mod: ModulusSpec, m_bound: float, horizon: float,
                     t_split: float, n_max: int,
                     quad_steps: int = 2048) -> BihariCurve:
    """Iterate phi_{n+1}(t) = int_t^T mod(phi_n(s)) ds from phi_0 = (T-t) mod(M).

    Composite trapezoid on quad_steps panels; the pointwise ordering
    0 <= phi_{n+1} <= phi_n <= M is enforced and its violation beyond
    quadrature tolerance raises BihariOrderingError.
    """
    rep = check_shape(mod, grid_size=4096, tol=1e-9)
    if not (rep.is_concave and rep.is_nondecreasing and rep.zero_at_zero):
        raise ValueError("recursion needs a concave nondecreasing modulus")
    if not t_split < horizon:
        raise ValueError("needs T1 < T")
    if m_bound < 0.0:
        raise ValueError("the uniform bound must be nonnegative")
    if n_max < 0 or quad_steps < 2:
        raise ValueError("n_max >= 0 and quad_steps >= 2 required")

    times = np.linspace(t_split, horizon, quad_steps + 1)
    h = (horizon - t_split) / quad_steps
    rows = np.empty((n_max + 1, times.size))
    rows[0] = (horizon - times) * eval_modulus(mod, m_bound)
    tol = 1e-9 * max(1.0, float(rows[0].max()))
    if rows[0].max() > m_bound + tol:
        raise BihariOrderingError(
            "phi_0 exceeds the uniform bound: (T - T1) mod(M) > M")
    for n in range(n_max):
        vals = eval_modulus(mod, rows[n])
        panel = 0.5 * h * (vals[:-1] + vals[1:])
        nxt = np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]])
        if np.any(nxt > rows[n] + tol):
            raise BihariOrderingError(
                f"ordering phi_{n + 1} <= phi_{n} violated beyond tolerance")
        rows[n + 1] = np.minimum(nxt, rows[n])
    return BihariCurve(times=times, values=rows)


@dataclass(frozen=True)
class ConstantsBundle:
    p: float
    lam: float
    T: float
    A: float
    k_prime_p: float
    k_doubleprime_p: float
    c2: float
    theta: float
    c_p: float
    c_lambda_p_T: float
    d_lambda_p_theta: float
    c1: float
    c3: float
    mu0: float
    m_bound: float
    t1: float


def compute_constants(p: float, lam: float, horizon: float, growth_a: float,
                      k_prime_p: float = 2.0, k_doubleprime_p: float = 2.0,
                      c1: float | None = None, c3: float | None = None,
                      c2: float | None = None, terminal_moment: float = 0.0,
                      h3_moment: float = 0.0) -> ConstantsBundle:
    """Fill every derived constant by direct substitution.

    c(p) = p [(p-1) ^ 1] / 2, the z-bound prefactor 2^(p+4)(3 + 2 lam^2 T + T^p),
    theta = 2^(p+2) k'_p, d = (p-1) theta^(1/(p-1)) + p lam^2 / [1 ^ (p-1)],
    mu0 = c2 e^(c3 T) (E|xi|^p + E[(int |g(t,0,0)| dt)^p]), M = 2 mu0 + 2 A T,
    T1 = max(T - ln2/c1, T - ln2/c3, T - 1/(2A), 0).  The growth-exponent
    proxies default to c1 = c3 = 2 k'_p d and c2 = 2 k'_p; all are overridable.
    """
    if p <= 1.0:
        raise ValueError("needs p > 1")
    if lam < 0.0 or growth_a < 0.0 or horizon <= 0.0:
        raise ValueError("lambda, A must be >= 0 and T > 0")
    c_p = p * min(p - 1.0, 1.0) / 2.0
    c_lambda_p_t = 2.0 ** (p + 4.0) * (3.0 + 2.0 * lam ** 2 * horizon + horizon ** p)
    theta = 2.0 ** (p + 2.0) * k_prime_p
    d_lpt = (p - 1.0) * theta ** (1.0 / (p - 1.0)) + p * lam ** 2 / min(1.0, p - 1.0)
    if c1 is None:
        c1 = 2.0 * k_prime_p * d_lpt
    if c3 is None:
        c3 = 2.0 * k_prime_p * d_lpt
    if c1 <= 0.0 or c3 <= 0.0:
        raise ValueError("c1 and c3 must be positive")
    if c2 is None:
        c2 = 2.0 * k_prime_p
    mu0 = c2 * math.exp(c3 * horizon) * (terminal_moment + h3_moment)
    if not math.isfinite(mu0):
        raise ValueError("mu0 overflowed; reduce c3 or the horizon")
    m_bound = 2.0 * mu0 + 2.0 * growth_a * horizon
    candidates = [horizon - math.log(2.0) / c1, horizon - math.log(2.0) / c3, 0.0]
    if growth_a > 0.0:
        candidates.append(horizon - 1.0 / (2.0 * growth_a))
    t1 = max(candidates)
    return ConstantsBundle(p=p, lam=lam, T=horizon, A=growth_a,
                           k_prime_p=k_prime_p, k_doubleprime_p=k_doubleprime_p,
                           c2=c2, theta=theta, c_p=c_p,
                           c_lambda_p_T=c_lambda_p_t, d_lambda_p_theta=d_lpt,
                           c1=c1, c3=c3, mu0=mu0, m_bound=m_bound, t1=t1)


def _power_indicator(y_norm: np.ndarray, p: float) -> np.ndarray:
    """|y|^(p-2) 1_{y != 0}, safe at zero for any p > 1."""
    out = np.zeros_like(y_norm)
    pos = y_norm > 0.0
    out[pos] = y_norm[pos] ** (p - 2.0)
    return out


@dataclass(frozen=True)
class Lemma1Report:
    lhs: float
    rhs: float
    slack: float
    standard_error: float
    t_index: int


def check_lemma1(sol, gen: GeneratorSpec, p: float, t_index: int,
                 ens: PathEnsemble) -> Lemma1Report:
    """Expectation form of the energy inequality at one grid time.

    LHS = E|y_t|^p + c(p) E[int_t^T |y|^(p-2) 1 |z|^2 ds], RHS = E|xi|^p +
    p E[int_t^T |y|^(p-2) 1 <y, g> ds]; the stochastic-integral term has zero
    mean and drops out.  Left-endpoint sums match the solver's adapted,
    piecewise-constant z.  slack = RHS - LHS with its pathwise standard error.
    """
    grid = sol.grid
    if not 0 <= t_index <= grid.N:
        raise ValueError("t_index out of range")
    c_p = p * min(p - 1.0, 1.0) / 2.0
    dt = grid.dt
    m = sol.y.shape[0]

    y_norm = np.linalg.norm(sol.y, axis=2)
    weight = _power_indicator(y_norm, p)
    zsq = np.sum(sol.z ** 2, axis=(2, 3))

    inner = np.zeros((m, grid.N))
    for i in range(t_index, grid.N):
        g = eval_generator_batch(gen, grid.times[i], ens.values[:, i, :],
                                 sol.y[:, i], sol.z[:, i])
        inner[:, i] = np.sum(sol.y[:, i] * g, axis=1)

    rng = slice(t_index, grid.N)
    lhs_path = (y_norm[:, t_index] ** p
                + c_p * np.sum(weight[:, rng] * zsq[:, rng], axis=1) * dt)
    rhs_path = (y_norm[:, -1] ** p
                + p * np.sum(weight[:, rng] * inner[:, rng], axis=1) * dt)
    slack_path = rhs_path - lhs_path
    return Lemma1Report(lhs=float(np.mean(lhs_path)), rhs=float(np.mean(rhs_path)),
                        slack=float(np.mean(slack_path)),
                        standard_error=float(np.std(slack_path) / math.sqrt(m)),
                        t_index=t_index)


@dataclass(frozen=True)
class AprioriReport:
    """Both sides of the two a-priori moment bounds, advisory only: the true
    prefactors depend on martingale-moment constants the caller supplies."""

    prop1_lhs: float
    prop1_rhs: float
    prop1_holds: bool
    prop2_lhs: float
    prop2_rhs: float
    prop2_holds: bool


def check_apriori_bounds(sol, env: EnvelopeA, cb: ConstantsBundle, p: float,
                         t_index: int, ens: PathEnsemble,
                         frozen: np.ndarray | None = None) -> AprioriReport:
    grid = sol.grid
    if not 0 <= t_index <= grid.N:
        raise ValueError("t_index out of range")
    dt = grid.dt
    m = sol.y.shape[0]
    rng = slice(t_index, grid.N)
    steps = np.arange(t_index, grid.N)

    all_paths = np.arange(m)
    phi = np.empty((m, grid.N))
    f_proc = np.empty((m, grid.N))
    for i in steps:
        t_idx = np.full(m, i)
        phi[:, i] = eval_process(env.phi, all_paths, t_idx, ens, frozen)
        f_proc[:, i] = eval_process(env.f, all_paths, t_idx, ens, frozen)

    y_norm = np.linalg.norm(sol.y, axis=2)
    sup_tail = np.max(y_norm[:, t_index:], axis=1) ** p
    e_sup = float(np.mean(sup_tail))
    zsq = np.sum(sol.z ** 2, axis=(2, 3))
    int_phi_p = float(np.mean(np.sum(phi[:, rng] ** p, axis=1) * dt))
    int_f_pow = float(np.mean((np.sum(f_proc[:, rng], axis=1) * dt) ** p))

    prop1_lhs = float(np.mean((np.sum(zsq[:, rng], axis=1) * dt) ** (p / 2.0)))
    prop1_rhs = cb.c_lambda_p_T * (e_sup + eval_modulus(env.psi, e_sup)
                                   + int_phi_p + int_f_pow)

    xi_moment = float(np.mean(y_norm[:, -1] ** p))
    mean_y_p = np.mean(y_norm ** p, axis=0)
    psi_of_mean = eval_modulus(env.psi, mean_y_p[t_index:grid.N])
    int_psi = float(np.sum(psi_of_mean) * dt)
    m_p = 2.0 * cb.k_prime_p
    big_k = 2.0 * cb.k_prime_p * cb.d_lambda_p_theta
    prop2_lhs = e_sup
    prop2_rhs = math.exp(big_k * (grid.T - grid.times[t_index])) * (
        m_p * xi_moment + m_p * int_f_pow + 0.5 * int_phi_p + 0.5 * int_psi)

    return AprioriReport(prop1_lhs=prop1_lhs, prop1_rhs=prop1_rhs,
                         prop1_holds=prop1_lhs <= prop1_rhs,
                         prop2_lhs=prop2_lhs, prop2_rhs=prop2_rhs,
                         prop2_holds=prop2_lhs <= prop2_rhs)
