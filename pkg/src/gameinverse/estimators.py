"""Inverse methods: estimate a single hidden utility from observed play.

Every estimator works from the hidden cell owner's point of view. The
owner's equilibrium condition is written as a function of the hidden value
``x`` with the opponent's behaviour fixed at its observed frequencies, and
inverted either in closed form (NE, QRE, IBE) or on the candidate grid
(ASE, PSE, QR).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import UninformativeDataError, UnsupportedShapeError
from .game import (
    EmpiricalFrequencies,
    MaskedGame,
    MethodConfig,
    SessionData,
    impulses_own,
    transform_own,
)
from .solvers import ase_response, balance_gap, pse_response

METHODS = ("NE", "QRE", "ASE", "PSE", "IBE", "QR")

# objective values this close to the minimum count as attaining it
ARGMIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GridCurve:
    """Objective evaluated on the candidate grid.

    ``ys`` is the quantity minimised (ASE/PSE) or the regret (QR);
    ``model`` holds the model-implied choice probability where there is one.
    """

    xs: np.ndarray
    ys: np.ndarray
    model: np.ndarray | None = None


@dataclass(frozen=True)
class EstimateResult:
    method: str
    estimate: float
    sub_estimates: tuple[float, ...]
    dispersion: float = 0.0
    clamped: bool = False
    diagnostics: dict[str, Any] = field(default_factory=dict)
    curve: GridCurve | None = None

    def record(self) -> str:
        """Single-line ``key=value`` rendering."""
        subs = ";".join(repr(float(s)) for s in self.sub_estimates)
        notes = ";".join(f"{k}:{v}" for k, v in sorted(self.diagnostics.items()))
        return (
            f"method={self.method} estimate={self.estimate!r} sub_estimates={subs} "
            f"dispersion={self.dispersion!r} clamped={str(self.clamped).lower()} diagnostics={notes}"
        )


def _finish(method, subs, cfg: MethodConfig, diagnostics=None, curve=None) -> EstimateResult:
    subs = tuple(float(s) for s in subs)
    raw = math.fsum(subs) / len(subs)
    estimate, clamped = cfg.clamp(raw)
    diagnostics = dict(diagnostics or {})
    if clamped:
        diagnostics["unclamped"] = raw
    dispersion = float(np.std(subs)) if len(subs) > 1 else 0.0
    return EstimateResult(method, float(estimate), subs, dispersion, clamped, diagnostics, curve)


def _owner_inputs(masked: MaskedGame, freqs: EmpiricalFrequencies):
    view, pos = masked.owner_view()
    p_own = freqs.of(masked.owner)
    q = freqs.opponent_of(masked.owner)
    if p_own.size != view.shape[0] or q.size != view.shape[1]:
        raise ValueError("frequencies do not match the game's action counts")
    return view, pos, p_own, q


def _require_2x2(masked: MaskedGame, method: str) -> None:
    if masked.shape != (2, 2):
        raise UnsupportedShapeError(f"{method} estimation requires a 2x2 game")


def _with_x(view: np.ndarray, pos: tuple[int, int], xs) -> np.ndarray:
    """Stack of own tables, one per candidate value in ``xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    tables = np.broadcast_to(view, xs.shape + view.shape).copy()
    tables[(...,) + pos] = xs
    return tables


# -- closed forms ------------------------------------------------------------


def estimate_ne(masked: MaskedGame, freqs: EmpiricalFrequencies, cfg: MethodConfig) -> EstimateResult:
    """Solve the owner's indifference condition for the hidden utility."""
    _require_2x2(masked, "NE")
    view, (i, j), _, q = _owner_inputs(masked, freqs)
    coef = (1.0 if i == 0 else -1.0) * q[j]
    if coef == 0:
        raise UninformativeDataError(
            "opponent never played the hidden cell's column", reason="zero-opponent-frequency"
        )
    diff = np.nan_to_num(view[0]) - np.nan_to_num(view[1])
    x = -float(diff @ q) / coef
    return _finish("NE", [x], cfg)


def estimate_qre(masked: MaskedGame, freqs: EmpiricalFrequencies, cfg: MethodConfig) -> EstimateResult:
    """Invert the logit choice ratios of the owner.

    Each alternative own action gives one log-ratio equation in ``x``; their
    solutions are averaged.
    """
    view, (i, j), p_own, q = _owner_inputs(masked, freqs)
    lam = cfg.lambda_qre
    if q[j] == 0:
        raise UninformativeDataError("hidden utility has zero weight in expected payoff", reason="pole")
    if p_own[i] == 0:
        raise UninformativeDataError("hidden action never played; log-ratio undefined", reason="degenerate-frequency")
    eu = np.nan_to_num(view) @ q  # hidden cell contributes 0 here
    subs = []
    for a in range(view.shape[0]):
        if a == i or p_own[a] == 0:
            continue
        log_ratio = math.log(p_own[i] / p_own[a])
        subs.append((log_ratio / lam + eu[a] - eu[i]) / q[j])
    if not subs:
        raise UninformativeDataError("only the hidden action was played; log-ratio undefined", reason="degenerate-frequency")
    return _finish("QRE", subs, cfg)


# -- grid methods ------------------------------------------------------------


def _argmin_runs(ys: np.ndarray) -> list[tuple[int, int]]:
    hit = ys <= ys.min() + ARGMIN_TOL
    edges = np.flatnonzero(np.diff(np.concatenate([[0], hit.astype(np.int8), [0]])))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def argmin_set(curve: GridCurve) -> np.ndarray:
    """Grid points attaining the minimum of a curve's objective."""
    return curve.xs[curve.ys <= curve.ys.min() + ARGMIN_TOL]


def _sampling_estimate(method, masked, freqs, cfg, response, n) -> EstimateResult:
    _require_2x2(masked, method)
    view, pos, p_own, q = _owner_inputs(masked, freqs)
    xs = cfg.grid()
    model = response(_with_x(view, pos, xs), n, q[0])
    ys = np.abs(model - p_own[0])
    runs = _argmin_runs(ys)
    lo, hi = runs[0]
    diagnostics = {
        "argmin_lo": float(xs[lo]),
        "argmin_hi": float(xs[hi]),
        "argmin_width": float(xs[hi] - xs[lo]),
        "min_objective": float(ys.min()),
    }
    if len(runs) > 1:
        diagnostics["discontiguous_runs"] = len(runs)
    if np.all(model == model[0]):
        diagnostics["constant_model"] = True
    estimate = 0.5 * (xs[lo] + xs[hi])
    return _finish(method, [estimate], cfg, diagnostics, GridCurve(xs, ys, model))


def estimate_ase(masked: MaskedGame, freqs: EmpiricalFrequencies, cfg: MethodConfig) -> EstimateResult:
    """Grid point whose action-sampling prediction best matches the owner's
    observed frequency; the middle of the minimising range on ties."""
    return _sampling_estimate("ASE", masked, freqs, cfg, ase_response, cfg.n_ase)


def estimate_pse(masked: MaskedGame, freqs: EmpiricalFrequencies, cfg: MethodConfig) -> EstimateResult:
    return _sampling_estimate("PSE", masked, freqs, cfg, pse_response, cfg.n_pse)


# -- impulse balance ---------------------------------------------------------

_FLAT = 1e-12


def _pieces(points):
    pts = [-math.inf] + sorted(set(points)) + [math.inf]
    return list(zip(pts[:-1], pts[1:]))


def _probes(a: float, b: float) -> tuple[float, float]:
    if math.isinf(a) and math.isinf(b):
        return 0.0, 1.0
    if math.isinf(a):
        return b - 2.0, b - 1.0
    if math.isinf(b):
        return a + 1.0, a + 2.0
    return a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0


def _linear_on(f, a: float, b: float) -> tuple[float, float]:
    """Slope and intercept of ``f``, assumed affine on ``(a, b)``."""
    p1, p2 = _probes(a, b)
    f1, f2 = f(p1), f(p2)
    slope = (f2 - f1) / (p2 - p1)
    return slope, f1 - slope * p1


def _crossings(funcs, points) -> list[float]:
    out = []
    for a, b in _pieces(points):
        if b - a < 1e-12:
            continue
        for f in funcs:
            m, c = _linear_on(f, a, b)
            if abs(m) > _FLAT:
                r = -c / m
                if a < r < b:
                    out.append(r)
    return out


def estimate_ibe(masked: MaskedGame, freqs: EmpiricalFrequencies, cfg: MethodConfig) -> EstimateResult:
    """Solve the owner's impulse-balance condition for the hidden utility.

    The balance gap is continuous and piecewise affine in ``x``: the
    security level, the transformation branch of every cell and the sign
    of every impulse can only change where ``x`` crosses another utility or
    where one of these affine pieces crosses zero. Those breakpoints split
    the line into cases; inside each case the gap is affine and its root is
    kept if it lies in the case.
    """
    _require_2x2(masked, "IBE")
    view, pos, _, q = _owner_inputs(masked, freqs)
    q0 = float(q[0])

    def table(x):
        return _with_x(view, pos, x)

    def security(x):
        return transform_own(table(x))[1]

    def cell_minus_security(a, b):
        return lambda x: table(x)[a, b] - security(x)

    def tr_gap(b):
        return lambda x: transform_own(table(x))[0][1, b] - transform_own(table(x))[0][0, b]

    def gap(x):
        return balance_gap(impulses_own(transform_own(table(x))[0]), q0)

    known = view[~np.isnan(view)]
    points = list(known)
    points += _crossings([cell_minus_security(a, b) for a in range(2) for b in range(2)], points)
    points += _crossings([tr_gap(0), tr_gap(1)], points)
    points = sorted(set(float(p) for p in points))

    scale = max(1.0, float(np.max(np.abs(known))))
    consistent: list[tuple[float, tuple[float, float]]] = []
    stray: list[float] = []
    flat: list[tuple[float, float]] = []
    informative = False
    for a, b in _pieces(points):
        if b - a < 1e-12:
            continue
        m, c = _linear_on(gap, a, b)
        if abs(m) > _FLAT * scale:
            informative = True
            r = -c / m
            tol = 1e-9 * (1.0 + abs(r))
            if a - tol <= r <= b + tol:
                r = min(max(r, a), b)
                # prefer an exact breakpoint when the root sits on one
                near = min(points, key=lambda p: abs(p - r)) if points else r
                if abs(near - r) <= tol and abs(gap(near)) <= abs(gap(r)):
                    r = near
                consistent.append((float(r), (float(a), float(b))))
            else:
                stray.append(r)
        elif abs(c + m * _probes(a, b)[0]) <= _FLAT * scale:
            flat.append((a, b))
    if not informative:
        raise UninformativeDataError(
            "balance condition does not depend on the hidden utility", reason="balance-independent-of-x"
        )

    roots: list[tuple[float, tuple[float, float]]] = []
    for r, case in sorted(consistent):
        if roots and abs(r - roots[-1][0]) <= 1e-9 * (1.0 + abs(r)):
            continue
        roots.append((r, case))

    inside = [(r, case) for r, case in roots if cfg.grid_lo <= r <= cfg.grid_hi]
    subs = [r for r, _ in inside]
    cases = [case for _, case in inside]
    for a, b in flat:
        lo, hi = max(a, cfg.grid_lo), min(b, cfg.grid_hi)
        if lo <= hi:
            subs.append(0.5 * (lo + hi))
            cases.append((float(a), float(b)))

    diagnostics: dict[str, Any] = {"breakpoints": len(points)}
    if subs:
        diagnostics["cases"] = cases
        if len(subs) > 1:
            diagnostics["multiplicity"] = len(subs)
        return _finish("IBE", subs, cfg, diagnostics)

    def distance(x):
        return max(cfg.grid_lo - x, 0.0, x - cfg.grid_hi)

    if roots:
        candidates = [r for r, _ in roots]
        diagnostics["out_of_range"] = True
    else:
        candidates = stray
        diagnostics["no_consistent_case"] = True
    if not candidates:
        raise UninformativeDataError("no case yields a balance solution", reason="no-balance-solution")
    best = min(candidates, key=lambda x: (distance(x), abs(gap(cfg.clamp(x)[0]))))
    return _finish("IBE", [best], cfg, diagnostics)


# -- quantal regret ----------------------------------------------------------


def regret_curve(masked: MaskedGame, session: SessionData, xs: np.ndarray) -> np.ndarray:
    """Average regret of the hidden cell's owner for each candidate value."""
    session.validate_for(masked.base)
    view, (i, j) = masked.owner_view()
    own_col, opp_col = (0, 1) if masked.owner == "row" else (1, 0)
    joint = np.zeros(view.shape)
    np.add.at(joint, (session.plays[:, own_col], session.plays[:, opp_col]), 1.0)
    opp_counts = joint.sum(axis=0)
    known = np.nan_to_num(view)
    xs = np.asarray(xs, dtype=np.float64)

    fixed = np.broadcast_to(known @ opp_counts, xs.shape + (view.shape[0],)).copy()
    fixed[:, i] += opp_counts[j] * xs
    realized = float(np.sum(joint * known)) + joint[i, j] * xs
    return (fixed.max(axis=1) - realized) / session.T


def estimate_qr(masked: MaskedGame, session: SessionData, cfg: MethodConfig) -> EstimateResult:
    """Posterior-mean estimate under weights ``exp(-lambda * regret)``."""
    xs = cfg.grid()
    regret = regret_curve(masked, session, xs)
    weights = np.exp(-cfg.lambda_qr * (regret - regret.min()))
    estimate = math.fsum(weights * xs) / math.fsum(weights)
    diagnostics = {"min_regret": float(regret.min())}
    return _finish("QR", [estimate], cfg, diagnostics, GridCurve(xs, regret))


# -- dispatch ----------------------------------------------------------------

_FREQUENCY_METHODS = {
    "NE": estimate_ne,
    "QRE": estimate_qre,
    "ASE": estimate_ase,
    "PSE": estimate_pse,
    "IBE": estimate_ibe,
}


def estimate(
    method: str,
    masked: MaskedGame,
    cfg: MethodConfig,
    *,
    freqs: EmpiricalFrequencies | None = None,
    session: SessionData | None = None,
) -> EstimateResult:
    """Run one estimator by tag. QR needs ``session``; the rest ``freqs``."""
    method = method.upper()
    if method == "QR":
        if session is None:
            raise ValueError("QR estimation needs the play sequence")
        return estimate_qr(masked, session, cfg)
    if method not in _FREQUENCY_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if freqs is None:
        raise ValueError(f"{method} estimation needs empirical frequencies")
    return _FREQUENCY_METHODS[method](masked, freqs, cfg)
