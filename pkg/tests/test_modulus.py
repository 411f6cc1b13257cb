import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import bsde_lab as bl
from bsde_lab.modulus import CONVERGENT, DIVERGENT

from conftest import random_concave_tabulated


# ---------------------------------------------------------------- evaluation

def test_linear_eval():
    mod = bl.linear_modulus(3.0, domain_cap=10.0)
    assert bl.eval_modulus(mod, 2.0) == 6.0


def test_example1h_eval_inner_branch():
    mod = bl.example1_h_modulus(2.0, delta=math.exp(-2))
    assert bl.eval_modulus(mod, math.exp(-4)) == pytest.approx(
        2.0 * math.exp(-4), rel=1e-14)


def test_example1h_eval_tangent_branch():
    p, delta = 2.0, math.exp(-2)
    mod = bl.example1_h_modulus(p, delta=delta)
    h_delta = delta * math.sqrt(2.0)
    slope = math.sqrt(2.0) - 0.5 / math.sqrt(2.0)  # h'(delta-) at p=2
    x = 2.0 * delta
    assert bl.eval_modulus(mod, x) == pytest.approx(
        slope * (x - delta) + h_delta, rel=1e-14)


@pytest.mark.parametrize("mod", [
    bl.linear_modulus(2.5),
    bl.power_modulus(1.3, 0.5),
    bl.example1_h_modulus(3.0),
    bl.tabulated_modulus([(0.0, 0.0), (0.5, 0.4), (1.0, 0.6)]),
])
def test_zero_maps_to_zero(mod):
    assert bl.eval_modulus(mod, 0.0) == 0.0


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        bl.eval_modulus(bl.linear_modulus(1.0), -0.1)


def test_tabulated_exact_at_breakpoints_and_linear_beyond():
    mod = bl.tabulated_modulus([(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)])
    assert bl.eval_modulus(mod, 1.0) == 2.0
    assert bl.eval_modulus(mod, 2.0) == 3.0
    # final slope is 1, extended past the last breakpoint
    assert bl.eval_modulus(mod, 3.5) == pytest.approx(4.5, rel=1e-14)


def test_eval_vectorized_matches_scalar():
    mod = bl.example1_h_modulus(2.0)
    us = np.linspace(0.0, 0.9, 17)
    vec = bl.eval_modulus(mod, us)
    assert vec.shape == us.shape
    for u, v in zip(us, vec):
        assert v == bl.eval_modulus(mod, float(u))


def test_example1h_delta_validation():
    with pytest.raises(ValueError):
        bl.example1_h_modulus(2.0, delta=0.9)  # above exp(-1/p)
    with pytest.raises(ValueError):
        bl.example1_h_modulus(0.9)


def test_tabulated_validation():
    with pytest.raises(ValueError):
        bl.tabulated_modulus([(0.0, 0.0)])
    with pytest.raises(ValueError):
        bl.tabulated_modulus([(0.1, 0.0), (1.0, 1.0)])
    with pytest.raises(ValueError):
        bl.tabulated_modulus([(0.0, 0.0), (0.5, -1.0)])
    with pytest.raises(ValueError):
        bl.tabulated_modulus([(0.0, 0.0), (0.5, 1.0), (0.5, 2.0)])


# --------------------------------------------------------------- shape check

def test_shape_linear_all_flags():
    rep = bl.check_shape(bl.linear_modulus(1.0, domain_cap=10.0))
    assert rep.all_ok
    assert rep.worst_violation <= 0.0


def test_shape_square_fails_concavity():
    rep = bl.check_shape(bl.power_modulus(1.0, 2.0, domain_cap=10.0))
    assert not rep.is_concave
    assert rep.worst_violation > 0.0


def test_shape_example1h_on_fine_grid():
    rep = bl.check_shape(bl.example1_h_modulus(2.0, delta=math.exp(-2)),
                         grid_size=10_000)
    assert rep.all_ok


def test_shape_parameter_validation():
    with pytest.raises(ValueError):
        bl.check_shape(bl.linear_modulus(1.0), grid_size=2)
    with pytest.raises(ValueError):
        bl.check_shape(bl.linear_modulus(1.0), tol=0.0)


def test_shape_worst_violation_sign_contract():
    # decreasing tail: fails monotonicity with a positive worst_violation
    mod = bl.tabulated_modulus([(0.0, 0.0), (0.5, 1.0), (1.0, 0.2)])
    rep = bl.check_shape(mod)
    assert not rep.is_nondecreasing
    assert rep.worst_violation > 0.0


# ------------------------------------------------------ osgood classification

def test_osgood_truth_table_builtin():
    assert bl.osgood_classify(bl.linear_modulus(1.0)).classification == DIVERGENT
    assert bl.osgood_classify(
        bl.power_modulus(1.0, 0.5)).classification == CONVERGENT
    h = bl.example1_h_modulus(2.0)
    assert bl.osgood_classify(h, weight_exponent=2.0).classification == DIVERGENT
    assert bl.osgood_classify(h, weight_exponent=3.0).classification == CONVERGENT


def test_osgood_numeric_rules_on_tabulated():
    lin_tab = bl.transform_modulus(bl.linear_modulus(1.0, 4.0),
                                   bl.POWER_ROOT, r=1.0).modulus
    rep = bl.osgood_classify(lin_tab)
    assert rep.classification == DIVERGENT and rep.rule == "slope"
    sqrt_tab = bl.transform_modulus(bl.power_modulus(1.0, 0.5, 4.0),
                                    bl.POWER_ROOT, r=1.0).modulus
    rep = bl.osgood_classify(sqrt_tab)
    assert rep.classification == CONVERGENT and rep.rule == "geometric"


def test_osgood_vanishing_modulus_flags_unbounded():
    rep = bl.osgood_classify(bl.linear_modulus(0.0))
    assert rep.classification == DIVERGENT
    assert rep.integrand_unbounded


def test_osgood_sample_curve_monotone():
    rep = bl.osgood_classify(bl.linear_modulus(1.0, 8.0))
    assert rep.eps.shape == rep.integrals.shape == (8,)
    assert np.all(np.diff(rep.integrals) > 0.0)
    # harmonic integral: every decade contributes ln 10
    assert np.allclose(rep.increments, math.log(10.0), rtol=1e-6)


def test_osgood_validation():
    mod = bl.linear_modulus(1.0)
    with pytest.raises(ValueError):
        bl.osgood_classify(mod, weight_exponent=0.5)
    with pytest.raises(ValueError):
        bl.osgood_classify(mod, u0=2.0)
    with pytest.raises(ValueError):
        bl.osgood_classify(mod, eps_decades=2)


def test_h1star_equivalence_on_builtins():
    """Classification of kappa at weight p agrees with the transformed
    modulus at weight 1."""
    p = 2.0
    for kappa in (bl.linear_modulus(1.0), bl.power_modulus(1.0, 0.5),
                  bl.power_modulus(1.0, 1.5), bl.example1_h_modulus(2.0)):
        lhs = bl.osgood_classify(kappa, weight_exponent=p).classification
        rho = bl.transform_modulus(kappa, bl.H1STAR_TO_H1, p=p).modulus
        rhs = bl.osgood_classify(rho, weight_exponent=1.0).classification
        assert lhs == rhs, kappa.family


# ------------------------------------------------------- linear growth bound

def test_linear_growth_examples():
    assert bl.linear_growth_coefficient(
        bl.linear_modulus(1.0, domain_cap=10.0)) == pytest.approx(10.0 / 11.0)
    assert bl.linear_growth_coefficient(
        bl.power_modulus(1.0, 0.5, domain_cap=10.0)) == pytest.approx(0.5, abs=1e-5)
    assert bl.linear_growth_coefficient(bl.linear_modulus(0.0)) == 0.0


def test_linear_growth_bound_holds_on_grid():
    mod = bl.example1_h_modulus(2.0, domain_cap=5.0)
    a = bl.linear_growth_coefficient(mod)
    us = np.linspace(0.0, 5.0, 1000)
    assert np.all(bl.eval_modulus(mod, us) <= a * (us + 1.0) + 1e-12)


def test_linear_growth_rejects_convex():
    with pytest.raises(ValueError):
        bl.linear_growth_coefficient(bl.power_modulus(1.0, 2.0))


# ------------------------------------------------------------ concave majorant

def test_majorant_of_square_is_chord():
    samples = [(u / 10.0, (u / 10.0) ** 2) for u in range(11)]
    out = bl.concave_majorant(samples)
    assert out.breakpoints == ((0.0, 0.0), (1.0, 1.0))


def test_majorant_of_hinge_is_chord():
    samples = [(u / 10.0, max(0.0, 2.0 * (u / 10.0 - 0.5))) for u in range(11)]
    out = bl.concave_majorant(samples)
    assert out.breakpoints == ((0.0, 0.0), (1.0, 1.0))


def test_majorant_identical_on_concave_input():
    pts = [(0.0, 0.0), (0.25, 0.6), (0.5, 1.0), (1.0, 1.5)]
    out = bl.concave_majorant(pts)
    assert out.breakpoints == tuple(pts)


def test_majorant_flattens_decreasing_tail():
    out = bl.concave_majorant([(0.0, 0.0), (1.0, 5.0), (2.0, 1.0)])
    assert out.breakpoints == ((0.0, 0.0), (1.0, 5.0), (2.0, 5.0))
    rep = bl.check_shape(out)
    assert rep.is_concave and rep.is_nondecreasing


def test_majorant_validation():
    with pytest.raises(ValueError):
        bl.concave_majorant([(0.0, 0.0)])
    with pytest.raises(ValueError):
        bl.concave_majorant([(0.5, 0.0), (0.2, 1.0)])
    with pytest.raises(ValueError):
        bl.concave_majorant([(0.0, 0.0), (1.0, -0.5)])
    with pytest.raises(ValueError):
        bl.concave_majorant([(0.0, 0.1), (1.0, 0.5)])


@given(st.lists(st.tuples(st.floats(0.01, 10.0), st.floats(0.0, 5.0)),
                min_size=2, max_size=30))
def test_majorant_dominates_and_is_idempotent(raw):
    us = np.unique([u for u, _ in raw])
    if us.size < 1:
        return
    samples = [(0.0, 0.0)] + [(float(u), float(v)) for u, (_, v)
                              in zip(us, raw[: us.size])]
    out = bl.concave_majorant(samples)
    for u, v in samples:
        assert bl.eval_modulus(out, u) >= v - 1e-12
    again = bl.concave_majorant(list(out.breakpoints))
    assert again.breakpoints == out.breakpoints


# ------------------------------------------------------------------ transforms

def test_power_root_identity_outcome():
    out = bl.transform_modulus(bl.linear_modulus(1.0), bl.POWER_ROOT, r=2.0).modulus
    us = np.linspace(0.0, 1.0, 50)
    assert np.allclose(bl.eval_modulus(out, us), us, atol=1e-12)


def test_h1star_on_linear_is_identity():
    out = bl.transform_modulus(bl.linear_modulus(1.0), bl.H1STAR_TO_H1, p=2.0).modulus
    us = np.linspace(0.0, 1.0, 50)
    assert np.allclose(bl.eval_modulus(out, us), us, atol=1e-12)


def test_h1pp_chain_on_linear():
    res = bl.transform_modulus(bl.linear_modulus(1.0), bl.H1PP_TO_H1,
                               p=2.0, q=2.0)
    us = np.linspace(0.0, 1.0, 50)
    assert np.allclose(bl.eval_modulus(res.modulus, us), 2.0 * us, atol=1e-12)
    assert res.domination is not None and not res.domination.skipped
    assert res.domination.holds
    assert res.rho2_over_rho1_sup == pytest.approx(1.0, abs=1e-9)


def test_h1pp_skips_domination_when_rho2_vanishes_at_one():
    # identically zero kappa forces rho2(1) = 0; rho_bar degenerates to u
    # and the domination report is skipped with a note
    kappa = bl.tabulated_modulus([(0.0, 0.0), (3.0, 0.0)], domain_cap=3.0)
    res = bl.transform_modulus(kappa, bl.H1PP_TO_H1, p=2.0, q=2.0)
    assert res.domination is not None and res.domination.skipped
    us = np.linspace(0.0, 1.0, 20)
    assert np.allclose(bl.eval_modulus(res.modulus, us), us, atol=1e-12)


def test_transform_parameter_validation():
    mod = bl.linear_modulus(1.0)
    with pytest.raises(ValueError):
        bl.transform_modulus(mod, bl.POWER_ROOT, r=0.0)
    with pytest.raises(ValueError):
        bl.transform_modulus(mod, bl.H1STAR_TO_H1, p=1.0)
    with pytest.raises(ValueError):
        bl.transform_modulus(mod, bl.H1PP_TO_H1, p=2.0, q=1.5)
    with pytest.raises(ValueError):
        bl.transform_modulus(mod, "no_such_kind")


@pytest.mark.parametrize("r", [1.5, 2.0, 3.0])
def test_power_root_preserves_shape(r):
    rng = np.random.default_rng(42)
    for _ in range(5):
        mod = random_concave_tabulated(rng)
        out = bl.transform_modulus(mod, bl.POWER_ROOT, r=r).modulus
        assert bl.check_shape(out, tol=1e-9).all_ok


@pytest.mark.parametrize("r", [0.5, 0.75])
def test_power_root_preserves_divergence(r):
    rng = np.random.default_rng(43)
    for _ in range(5):
        mod = random_concave_tabulated(rng)
        assert bl.osgood_classify(mod).classification == DIVERGENT
        out = bl.transform_modulus(mod, bl.POWER_ROOT, r=r).modulus
        assert bl.osgood_classify(out).classification == DIVERGENT


# -------------------------------------------------------------- serialization

def test_tabulated_csv_round_trip(tmp_path):
    mod = bl.tabulated_modulus([(0.0, 0.0), (0.5, 0.7), (1.5, 1.1)],
                               domain_cap=2.0)
    target = tmp_path / "mod.csv"
    bl.modulus.save_tabulated_csv(mod, target)
    back = bl.modulus.load_tabulated_csv(target, domain_cap=2.0)
    assert back.breakpoints == mod.breakpoints
    assert target.read_text().splitlines()[0] == "u,v"


def test_tabulated_csv_header_required(tmp_path):
    target = tmp_path / "bad.csv"
    target.write_text("a,b\n0,0\n1,1\n")
    with pytest.raises(ValueError):
        bl.modulus.load_tabulated_csv(target)
