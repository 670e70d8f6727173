"""Estimate a hidden utility of a normal-form game from observed repeated play."""

from .errors import GameInverseError, UninformativeDataError
from .estimators import (
    METHODS,
    EstimateResult,
    GridCurve,
    estimate,
    estimate_ase,
    estimate_ibe,
    estimate_ne,
    estimate_pse,
    estimate_qr,
    estimate_qre,
)
from .evaluation import EvalReport, EvalTask, metrics, run_eval, run_evals, wilcoxon_paired
from .game import (
    Cell,
    EmpiricalFrequencies,
    GameSpec,
    MaskedGame,
    MethodConfig,
    MixedProfile,
    SessionData,
    frequencies,
    impulses,
    security_level,
    transform,
)
from .solvers import (
    SolveReport,
    simulate,
    solve_ase_2x2,
    solve_ibe_2x2,
    solve_ne_2x2,
    solve_pse_2x2,
    solve_qre,
)

__version__ = "0.1.0"
