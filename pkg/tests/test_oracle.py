import math

import numpy as np
import pytest

import bsde_lab as bl
from bsde_lab.oracle import OracleInstance, oracle_paths


def test_martingale_coordinate_terminal_pinning():
    inst = OracleInstance("martingale_coordinate", T=1.0, j=0)
    y, z = bl.oracle_solution(inst, 1.0, np.array([0.7]))
    assert y[0] == 0.7
    assert np.array_equal(z, [[1.0]])


def test_martingale_square_at_origin():
    inst = OracleInstance("martingale_square", T=1.0)
    y, z = bl.oracle_solution(inst, 0.0, np.array([0.0]))
    assert y[0] == 1.0
    assert z[0, 0] == 0.0


def test_linear_drift_value():
    inst = OracleInstance("linear_drift", T=1.0, a=0.5, c=0.0, v=1.0)
    y, z = bl.oracle_solution(inst, 0.0, np.array([0.0]))
    assert y[0] == pytest.approx(math.exp(0.5), rel=1e-14)
    assert np.all(z == 0.0)


def test_linear_drift_zero_a_limit():
    inst = OracleInstance("linear_drift", T=2.0, a=0.0, c=0.3, v=1.0)
    y, _ = bl.oracle_solution(inst, 0.5, np.array([0.0]))
    assert y[0] == pytest.approx(1.0 + 0.3 * 1.5, rel=1e-14)


def test_time_domain_validated():
    inst = OracleInstance("martingale_coordinate", T=1.0)
    with pytest.raises(ValueError):
        bl.oracle_solution(inst, 1.5, np.array([0.0]))
    with pytest.raises(ValueError):
        bl.oracle_solution(inst, -0.1, np.array([0.0]))


@pytest.mark.parametrize("kind,params", [
    ("martingale_coordinate", {}),
    ("martingale_square", {}),
    ("linear_drift", {"a": 0.5, "c": 0.2, "v": 1.0}),
])
def test_discrete_residual_has_small_conditional_mean(kind, params,
                                                      small_ensemble):
    """The one-step equation y_i = y_{i+1} + g dt - z_i dB_i should hold with
    a residual whose mean is O(dt^2) per step."""
    ens = small_ensemble
    inst = OracleInstance(kind, T=ens.grid.T, **params)
    y, z = oracle_paths(inst, ens)
    dt = ens.grid.dt
    if kind == "linear_drift":
        g = params["a"] * y[:, :-1, 0] + params["c"]
    else:
        g = 0.0
    resid = (y[:, 1:, 0] - y[:, :-1, 0] + g * dt
             - np.sum(z[:, :, 0, :] * ens.increments, axis=2))
    mean_abs = np.abs(resid.mean(axis=0))
    se = resid.std(axis=0) / math.sqrt(ens.M) + dt ** 2
    assert np.all(mean_abs <= 5.0 * se + 5.0 * dt ** 2)


def test_compare_identical_is_zero(small_ensemble):
    inst = OracleInstance("martingale_square", T=1.0)
    y, z = oracle_paths(inst, small_ensemble)
    sol = bl.DiscreteSolution(y=y, z=z, grid=small_ensemble.grid)
    errs = bl.compare_to_oracle(sol, inst, small_ensemble, p=2.0)
    assert errs.sp_error == 0.0
    assert errs.z_rms_error == 0.0


def test_compare_constant_shift(small_ensemble):
    inst = OracleInstance("martingale_coordinate", T=1.0)
    y, z = oracle_paths(inst, small_ensemble)
    sol = bl.DiscreteSolution(y=y + 0.25, z=z, grid=small_ensemble.grid)
    errs = bl.compare_to_oracle(sol, inst, small_ensemble, p=2.0)
    assert errs.sp_error == pytest.approx(0.25, rel=1e-12)
    assert errs.z_rms_error == 0.0


def test_compare_shape_mismatch(small_ensemble):
    inst = OracleInstance("martingale_coordinate", T=1.0)
    y, z = oracle_paths(inst, small_ensemble)
    sol = bl.DiscreteSolution(y=y[:, :-1], z=z, grid=small_ensemble.grid)
    with pytest.raises(ValueError):
        bl.compare_to_oracle(sol, inst, small_ensemble, p=2.0)


def test_square_oracle_requires_one_dimension(small_ensemble_2d):
    inst = OracleInstance("martingale_square", T=1.0)
    with pytest.raises(ValueError):
        oracle_paths(inst, small_ensemble_2d)
