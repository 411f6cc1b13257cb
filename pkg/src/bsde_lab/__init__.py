"""Numerical laboratory for multidimensional BSDEs with Osgood-type
non-Lipschitz drivers: hypothesis checkers, a regression Monte Carlo
fixed-point solver, and desk-scale analysis of the associated constants
and integral recursions."""

from .analysis import (
    BihariCurve,
    ConstantsBundle,
    bihari_recursion,
    check_apriori_bounds,
    check_lemma1,
    compute_constants,
    lp_norms,
    picard_distance,
)
from .generator import (
    EnvelopeA,
    GeneratorSpec,
    ProcessSpec,
    SamplerConfig,
    auto_envelope,
    check_h1,
    check_h3,
    custom_generator,
    estimate_lipschitz_z,
    eval_generator,
    example1_generator,
    linear_generator,
    register_generator,
    verify_envelope,
    zero_generator,
)
from .modulus import (
    H1PP_TO_H1,
    H1STAR_TO_H1,
    POWER_ROOT,
    ModulusSpec,
    ShapeReport,
    check_shape,
    concave_majorant,
    eval_modulus,
    example1_h_modulus,
    linear_modulus,
    linear_growth_coefficient,
    osgood_classify,
    power_modulus,
    tabulated_modulus,
    transform_modulus,
)
from .oracle import OracleInstance, compare_to_oracle, oracle_solution
from .paths import PathEnsemble, TimeGrid, generate_ensemble, load_ensemble, save_ensemble
from .solver import (
    BasisSpec,
    DiscreteSolution,
    PicardReport,
    TerminalSpec,
    constant_terminal,
    coordinate_terminal,
    custom_terminal,
    picard_solve,
    regress_conditional_expectation,
    register_terminal,
    solve_frozen_bsde,
    square_norm_terminal,
)

__all__ = [name for name in dir() if not name.startswith("_")]
