"""coinfactory: exact Bernoulli factory sampling for power-series functions.

Given i.i.d. Bernoulli(p) inputs with unknown p, samplers here produce a single
exact Bernoulli(f(p)) output for targets f(p) = 1 - sum c_k (1-p)^k with
non-negative coefficients summing to one, plus the analysis and Monte Carlo
harness used to verify the sampling laws and cost formulas.
"""

from .analysis import (
    EvalResult,
    cramer_rao_bound,
    eval_f,
    eval_f_prime,
    expected_inputs_alg1,
    expected_inputs_alg2,
)
from .expr import build_factory, build_series, parse_expression, print_expression
from .factory import (
    AlgorithmOneFactory,
    FactoryOutcome,
    SimulatedCoin,
    TwoPhaseBaselineFactory,
    UniformSource,
    sample_algorithm1,
    sample_two_phase_baseline,
    source_pair,
    transform_input_complement,
    transform_output_complement,
    transform_product,
    transform_scale,
)
from .harness import ExperimentSpec, RunReport, run, sweep_optimality, test_joint_law
from .nonrand import (
    AlgorithmTwoFactory,
    DigitOracle,
    NonRandOutcome,
    digit_oracle_from,
    sample_algorithm2,
    von_neumann_bit,
)
from .series import (
    CoefficientSeries,
    StoppingSequence,
    catalog,
    coefficients_from_stopping,
    compose,
    convex_combination,
    product_complement,
    stopping_from_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmOneFactory",
    "AlgorithmTwoFactory",
    "CoefficientSeries",
    "DigitOracle",
    "EvalResult",
    "ExperimentSpec",
    "FactoryOutcome",
    "NonRandOutcome",
    "RunReport",
    "SimulatedCoin",
    "StoppingSequence",
    "TwoPhaseBaselineFactory",
    "UniformSource",
    "build_factory",
    "build_series",
    "catalog",
    "coefficients_from_stopping",
    "compose",
    "convex_combination",
    "cramer_rao_bound",
    "digit_oracle_from",
    "eval_f",
    "eval_f_prime",
    "expected_inputs_alg1",
    "expected_inputs_alg2",
    "parse_expression",
    "print_expression",
    "product_complement",
    "run",
    "sample_algorithm1",
    "sample_algorithm2",
    "sample_two_phase_baseline",
    "source_pair",
    "stopping_from_coefficients",
    "sweep_optimality",
    "test_joint_law",
    "transform_input_complement",
    "transform_output_complement",
    "transform_product",
    "transform_scale",
    "von_neumann_bit",
    "__version__",
]
