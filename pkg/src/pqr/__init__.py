"""Polynomial feedback laws and value functions for polynomial-quadratic
regulator problems, computed degree by degree in Kronecker form."""

from .albrekht import (
    FeedbackLaw,
    PolynomialSystem,
    QuadraticCost,
    ValueFunction,
    assemble_rhs,
    compute_gain,
    eval_feedback,
    eval_value,
    hjb_residual,
    pqr,
    value_gradient,
)
from .kron import (
    ModeVector,
    entry_budget,
    kron_apply,
    kron_dense,
    lyap_sum_apply,
    monomial,
    set_entry_budget,
    unvec,
    vec,
)
from .models import BenchmarkInstance, burgers_fem, lorenz, vdp_ring
from .nway import SchurForm, lyap2_solve, nway_solve, schur_decompose
from .riccati import AreSolution, care_residual, care_solve
from .sim import Trajectory, closed_loop_cost, integrate, open_loop_cost

__version__ = "0.1.0"

__all__ = [
    "AreSolution",
    "BenchmarkInstance",
    "FeedbackLaw",
    "ModeVector",
    "PolynomialSystem",
    "QuadraticCost",
    "SchurForm",
    "Trajectory",
    "ValueFunction",
    "assemble_rhs",
    "burgers_fem",
    "care_residual",
    "care_solve",
    "closed_loop_cost",
    "compute_gain",
    "entry_budget",
    "eval_feedback",
    "eval_value",
    "hjb_residual",
    "integrate",
    "kron_apply",
    "kron_dense",
    "lorenz",
    "lyap2_solve",
    "lyap_sum_apply",
    "monomial",
    "nway_solve",
    "open_loop_cost",
    "pqr",
    "schur_decompose",
    "set_entry_budget",
    "unvec",
    "value_gradient",
    "vdp_ring",
    "vec",
]
