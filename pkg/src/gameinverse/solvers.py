"""Forward equilibrium solvers and a seeded play simulator.

The 2x2 sampling and logit concepts are solved on the reduced map
``p_L -> resp_col(resp_row(p_L))``: its fixed points are scanned on a fine
grid and refined where the residual changes sign. Response functions here
are written on own-perspective tables (see :mod:`gameinverse.game`) so the
same code serves both players; the estimators reuse them to evaluate the
equilibrium equations as functions of a hidden utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, softmax

from .errors import (
    IndeterminateEquilibriumError,
    NoInteriorBalanceError,
    NoMixedEquilibriumError,
    NonConvergenceError,
)
from .game import GameSpec, MixedProfile, SessionData, impulses, transform

SCAN_STEP = 1e-4
# sample payoffs this close (relative) count as a tie; decimal ties would
# otherwise be broken by binary rounding
TIE_RTOL = 1e-9
QRE_MAX_ITER = 100_000
QRE_TOL = 1e-12


@dataclass(frozen=True)
class SolveReport:
    """Result of a forward solve.

    ``roots`` lists every equilibrium found, ordered by ``p_U``; ``profile``
    is the first of them. ``residual`` is the worst violation of the defining
    equations over all returned roots.
    """

    profile: MixedProfile
    residual: float
    iterations: int
    roots: tuple[MixedProfile, ...] = ()

    def __post_init__(self):
        if not self.roots:
            object.__setattr__(self, "roots", (self.profile,))

    @property
    def multiplicity(self) -> int:
        return len(self.roots)


# -- response functions ------------------------------------------------------


@lru_cache(maxsize=None)
def _binom_coefficients(n: int) -> np.ndarray:
    return np.array([math.comb(n, k) for k in range(n + 1)], dtype=np.float64)


def binomial_pmf(n: int, p) -> np.ndarray:
    """Binomial(n, p) probabilities of 0..n successes; broadcasts over ``p``."""
    p = np.asarray(p, dtype=np.float64)[..., None]
    k = np.arange(n + 1)
    return _binom_coefficients(n) * p**k * (1.0 - p) ** (n - k)


def _corners(own):
    """Split own-perspective tables (``(..., 2, 2)``) into their four entries."""
    own = np.asarray(own, dtype=np.float64)
    return own[..., 0, 0], own[..., 0, 1], own[..., 1, 0], own[..., 1, 1]


def _choice(lhs, rhs) -> np.ndarray:
    """1 where ``lhs`` wins, 0.5 on a tie, 0 where ``rhs`` wins."""
    tie = np.abs(lhs - rhs) <= TIE_RTOL * (1.0 + np.abs(lhs) + np.abs(rhs))
    return np.where(tie, 0.5, np.where(lhs > rhs, 1.0, 0.0))


def ase_alpha(own, n: int) -> np.ndarray:
    """Probability of playing own action 0 after a sample of ``n`` opponent
    actions containing ``k`` copies of the opponent's action 0, for k=0..n.

    Ties between the two sample best responses split 1/2 each. Accepts a
    stack of tables and returns shape ``(..., n + 1)``.
    """
    u00, u01, u10, u11 = (c[..., None] for c in _corners(own))
    k = np.arange(n + 1)
    return _choice(k * (u00 - u10), (n - k) * (u11 - u01))


def pse_alpha(own, n: int) -> np.ndarray:
    """Probability of own action 0 given the payoff samples of both own
    actions; axis -2 counts opponent action 0 in the sample for own action 0,
    axis -1 the same for own action 1."""
    u00, u01, u10, u11 = (c[..., None, None] for c in _corners(own))
    k0 = np.arange(n + 1)[:, None]
    k1 = np.arange(n + 1)[None, :]
    sum0 = k0 * u00 + (n - k0) * u01
    sum1 = k1 * u10 + (n - k1) * u11
    return _choice(sum0, sum1)


def ase_response(own, n: int, q) -> np.ndarray:
    """Right-hand side of the action-sampling equation for own action 0 when
    the opponent plays her action 0 with probability ``q``."""
    return np.sum(ase_alpha(own, n) * binomial_pmf(n, q), axis=-1)


def pse_response(own, n: int, q) -> np.ndarray:
    b = binomial_pmf(n, q)
    return np.einsum("...i,...ij,...j->...", b, pse_alpha(own, n), b)


def logit_response(own, lam: float, q) -> np.ndarray:
    u00, u01, u10, u11 = _corners(own)
    q = np.asarray(q, dtype=np.float64)
    advantage = q * (u00 - u10) + (1.0 - q) * (u01 - u11)
    return expit(lam * advantage)


# -- reduced-map root finding ------------------------------------------------

Response = Callable[[np.ndarray], np.ndarray]


def _fixed_points_2x2(resp_row: Response, resp_col: Response) -> tuple[list[MixedProfile], float, int]:
    """All fixed points of ``p_L = resp_col(resp_row(p_L))`` found on the scan grid."""

    def h(q):
        return resp_col(resp_row(q)) - q

    qs = np.linspace(0.0, 1.0, int(round(1 / SCAN_STEP)) + 1)
    hs = h(qs)
    found: list[float] = []
    evaluations = len(qs)
    for i in range(len(qs)):
        if hs[i] == 0.0:
            found.append(float(qs[i]))
        elif i + 1 < len(qs) and hs[i] * hs[i + 1] < 0:
            root, info = brentq(
                lambda t: float(h(t)), qs[i], qs[i + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps,
                full_output=True,
            )
            evaluations += info.function_calls
            found.append(float(root))
    if not found:
        # a tangential root can slip between scan points; take the closest approach
        found.append(float(qs[np.argmin(np.abs(hs))]))

    roots: list[float] = []
    for q in sorted(found):
        if not roots or q - roots[-1] > 1e-9:
            roots.append(q)

    profiles = []
    residual = 0.0
    for q in roots:
        p = float(resp_row(q))
        residual = max(residual, abs(float(resp_col(p)) - q))
        profiles.append(MixedProfile.from_2x2(p, q))
    profiles.sort(key=lambda prof: prof.p_U)
    return profiles, residual, evaluations


def _report(profiles: list[MixedProfile], residual: float, iterations: int) -> SolveReport:
    return SolveReport(profiles[0], residual, iterations, tuple(profiles))


# -- concepts ----------------------------------------------------------------


def _indifference_gap(own: np.ndarray, q: np.ndarray) -> float:
    eu = own @ q
    return float(np.max(eu) - np.min(eu))


def solve_ne_2x2(game: GameSpec) -> SolveReport:
    """Completely mixed Nash equilibrium of a 2x2 game."""
    game.require_2x2("solve_ne_2x2")
    (a, b), (c, d) = game.u_row
    (e, f), (g, h) = game.u_col
    den_L = a - c + d - b
    den_U = e - f + h - g
    if den_L == 0 or den_U == 0:
        raise NoMixedEquilibriumError("indifference equations are degenerate")
    p_L = (d - b) / den_L
    p_U = (h - g) / den_U
    if not (0 < p_L < 1 and 0 < p_U < 1):
        raise NoMixedEquilibriumError(f"no completely mixed equilibrium (p_U={p_U:.4g}, p_L={p_L:.4g})")
    profile = MixedProfile.from_2x2(p_U, p_L)
    residual = max(
        _indifference_gap(game.u_row, profile.p_col),
        _indifference_gap(game.u_col.T, profile.p_row),
    )
    return SolveReport(profile, residual, 0)


def qre_residual(game: GameSpec, profile: MixedProfile, lam: float) -> float:
    br_row = softmax(lam * (game.u_row @ profile.p_col))
    br_col = softmax(lam * (game.u_col.T @ profile.p_row))
    return float(max(np.max(np.abs(br_row - profile.p_row)), np.max(np.abs(br_col - profile.p_col))))


def _qre_damped(game: GameSpec, lam: float) -> SolveReport:
    p_row = np.full(game.rows, 1.0 / game.rows)
    p_col = np.full(game.cols, 1.0 / game.cols)
    step = 0.5
    prev = np.inf
    best = np.inf
    for it in range(1, QRE_MAX_ITER + 1):
        br_row = softmax(lam * (game.u_row @ p_col))
        br_col = softmax(lam * (game.u_col.T @ p_row))
        res = float(max(np.max(np.abs(br_row - p_row)), np.max(np.abs(br_col - p_col))))
        best = min(best, res)
        if res <= QRE_TOL:
            return SolveReport(MixedProfile(p_row, p_col), res, it)
        # shrink the step while the residual grows; recover slowly otherwise
        step = max(step * 0.5, 1e-4) if res > prev else min(1.0, step * 1.05)
        prev = res
        p_row = p_row + step * (br_row - p_row)
        p_col = p_col + step * (br_col - p_col)
        p_row /= p_row.sum()
        p_col /= p_col.sum()
    raise NonConvergenceError(f"QRE iteration did not converge in {QRE_MAX_ITER} steps", best)


def solve_qre(game: GameSpec, lam: float) -> SolveReport:
    """Logit quantal-response equilibrium.

    2x2 games are solved on the reduced one-dimensional map, which also
    finds every equilibrium when there are several. Larger games use damped
    fixed-point iteration.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if not game.is_2x2():
        return _qre_damped(game, lam)
    own_row, own_col = game.u_row, game.u_col.T
    profiles, _, evals = _fixed_points_2x2(
        lambda q: logit_response(own_row, lam, q),
        lambda p: logit_response(own_col, lam, p),
    )
    residual = max(qre_residual(game, prof, lam) for prof in profiles)
    return _report(profiles, residual, evals)


def solve_ase_2x2(game: GameSpec, n_s: int) -> SolveReport:
    """Action-sampling equilibrium with sample size ``n_s``."""
    game.require_2x2("solve_ase_2x2")
    if n_s < 1:
        raise ValueError("n_s must be at least 1")
    own_row, own_col = game.u_row, game.u_col.T
    profiles, residual, evals = _fixed_points_2x2(
        lambda q: ase_response(own_row, n_s, q),
        lambda p: ase_response(own_col, n_s, p),
    )
    return _report(profiles, residual, evals)


def solve_pse_2x2(game: GameSpec, n_s: int) -> SolveReport:
    """Payoff-sampling equilibrium with ``n_s`` draws per own action."""
    game.require_2x2("solve_pse_2x2")
    if n_s < 1:
        raise ValueError("n_s must be at least 1")
    own_row, own_col = game.u_row, game.u_col.T
    profiles, residual, evals = _fixed_points_2x2(
        lambda q: pse_response(own_row, n_s, q),
        lambda p: pse_response(own_col, n_s, p),
    )
    return _report(profiles, residual, evals)


def balance_gap(imp_own: np.ndarray, q: float) -> float:
    """Expected impulse away from own action 0 minus the impulse toward it,
    when the opponent plays her action 0 with probability ``q``."""
    weights = np.array([q, 1.0 - q])
    return float(imp_own[0] @ weights - imp_own[1] @ weights)


def _balance_point(imp_own: np.ndarray, who: str) -> float:
    if not np.any(imp_own > 0):
        raise IndeterminateEquilibriumError(f"{who} player has no impulses; balance is vacuous")
    # gap(q) = q * d0 + (1 - q) * d1 is linear in q
    d0 = imp_own[0, 0] - imp_own[1, 0]
    d1 = imp_own[0, 1] - imp_own[1, 1]
    if d0 == d1:
        raise NoInteriorBalanceError(f"{who} player's impulses never balance")
    q = d1 / (d1 - d0)
    if not 0.0 <= q <= 1.0:
        raise NoInteriorBalanceError(f"{who} player's balance needs opponent probability {q:.4g}")
    return float(q)


def solve_ibe_2x2(game: GameSpec) -> SolveReport:
    """Impulse-balance equilibrium on the loss-weighted transformed game.

    Each player's balance condition involves only the opponent's mixing
    probability, so the row condition fixes ``p_L`` and the column
    condition fixes ``p_U``.
    """
    game.require_2x2("solve_ibe_2x2")
    imp = impulses(transform(game))
    own_row, own_col = imp.imp_row, imp.imp_col.T
    p_L = _balance_point(own_row, "row")
    p_U = _balance_point(own_col, "column")
    residual = max(abs(balance_gap(own_row, p_L)), abs(balance_gap(own_col, p_U)))
    return SolveReport(MixedProfile.from_2x2(p_U, p_L), residual, 0)


def solve(game: GameSpec, concept: str, *, lambda_qre: float = 1.05, n_ase: int = 12, n_pse: int = 6) -> SolveReport:
    """Dispatch by concept tag (``ne``, ``qre``, ``ase``, ``pse``, ``ibe``)."""
    concept = concept.lower()
    if concept == "ne":
        return solve_ne_2x2(game)
    if concept == "qre":
        return solve_qre(game, lambda_qre)
    if concept == "ase":
        return solve_ase_2x2(game, n_ase)
    if concept == "pse":
        return solve_pse_2x2(game, n_pse)
    if concept == "ibe":
        return solve_ibe_2x2(game)
    raise ValueError(f"unknown concept {concept!r}")


# -- simulation --------------------------------------------------------------


def simulate(
    profile: MixedProfile,
    T: int,
    seed: int | tuple[int, ...],
    *,
    session_id: str = "",
    game: str = "",
) -> SessionData:
    """Draw ``T`` i.i.d. joint plays from ``profile``.

    Uses numpy's PCG64 generator seeded from ``seed`` alone, so output is
    reproducible across platforms.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.random((T, 2))
    cdf_row = np.cumsum(profile.p_row)
    cdf_col = np.cumsum(profile.p_col)
    rows = np.minimum(np.searchsorted(cdf_row, draws[:, 0], side="right"), len(cdf_row) - 1)
    cols = np.minimum(np.searchsorted(cdf_col, draws[:, 1], side="right"), len(cdf_col) - 1)
    return SessionData(np.column_stack([rows, cols]), session_id=session_id, game=game)
