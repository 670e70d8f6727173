"""Evaluation harness: hide each utility in turn, estimate it with every
method, and score the estimates."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import (
    EmptyTaskError,
    GameInverseError,
    InsufficientDataError,
    UndefinedMetricsError,
    UninformativeDataError,
)
from .estimators import METHODS, estimate
from .game import GameSpec, MethodConfig, SessionData, average_frequencies, frequencies
from .solvers import simulate, solve

logger = logging.getLogger(__name__)

HIST_BIN_WIDTH = 0.5
EXACT_WILCOXON_MAX_N = 25


# -- metrics -----------------------------------------------------------------


class Metrics(NamedTuple):
    n: int
    rmse: float
    mean: float
    std: float
    hit_rate: float


def metrics(errors: Sequence[float], hit_radius: float = 3.0) -> Metrics:
    """RMSE, mean, population standard deviation and the fraction of errors
    no larger than ``hit_radius``."""
    errs = np.asarray(errors, dtype=np.float64)
    if errs.size == 0:
        raise UndefinedMetricsError("metrics of an empty error list are undefined")
    if np.any(errs < 0) or not np.all(np.isfinite(errs)):
        raise ValueError("errors must be finite and non-negative")
    return Metrics(
        n=int(errs.size),
        rmse=math.sqrt(math.fsum(errs**2) / errs.size),
        mean=math.fsum(errs) / errs.size,
        std=float(np.std(errs)),
        hit_rate=float(np.mean(errs <= hit_radius)),
    )


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float


def _exact_signed_rank_cdf(ranks: np.ndarray) -> tuple[np.ndarray, int]:
    """Null distribution of the positive-rank sum, on doubled (integer) ranks."""
    doubled = np.rint(2 * ranks).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts / counts.sum(), total


def wilcoxon_paired(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test of paired samples.

    Zero differences are dropped and tied absolute differences get mid-ranks.
    The statistic is the sum of ranks of positive differences ``a - b``.
    Up to 25 non-zero pairs the p-value comes from the exact permutation
    distribution of the (mid-)ranks; beyond that from the normal
    approximation with tie-corrected variance and no continuity correction.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n < 5:
        raise InsufficientDataError(f"only {n} non-zero differences; need at least 5")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        pmf, _ = _exact_signed_rank_cdf(ranks)
        w2 = int(round(2 * w_plus))
        lower = pmf[: w2 + 1].sum()
        upper = pmf[w2:].sum()
        p = min(1.0, 2.0 * min(lower, upper))
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
        z = (w_plus - mean) / math.sqrt(var)
        p = min(1.0, 2.0 * float(norm.sf(abs(z))))
    return WilcoxonResult(w_plus, float(p))


# -- harness -----------------------------------------------------------------


@dataclass
class EvalTask:
    game: GameSpec
    sessions: list[SessionData]
    methods: tuple[str, ...] = METHODS
    cfg: MethodConfig = field(default_factory=MethodConfig)


@dataclass(frozen=True)
class EvalRecord:
    game: str
    session: str
    cell: str
    method: str
    estimate: float
    true_value: float
    error: float
    status: str = "ok"


@dataclass(frozen=True)
class MethodSummary:
    n: int
    rmse: float
    mean_error: float
    std_error: float
    hit_rate_3: float
    n_missing: int
    n_excluded: int


@dataclass(frozen=True)
class PairTest:
    method_a: str
    method_b: str
    n: int
    statistic: float
    p_value: float
    status: str = "ok"


@dataclass
class EvalReport:
    records: list[EvalRecord]
    summaries: dict[str, MethodSummary]
    histogram: dict[str, np.ndarray]
    bin_edges: np.ndarray
    pairwise_tests: list[PairTest]


def _units(sessions: list[SessionData], per_player: bool) -> list[tuple[str, list[SessionData]]]:
    """Group streams into evaluation units (sessions, or single streams)."""
    if per_player:
        return [(f"{s.session_id}/{k}", [s]) for k, s in enumerate(sessions)]
    grouped: dict[str, list[SessionData]] = {}
    for s in sessions:
        grouped.setdefault(s.session_id, []).append(s)
    return list(grouped.items())


def _estimate_unit(method, masked, streams, freqs, cfg) -> float:
    if method == "QR":
        # regret is defined per play stream; average the per-stream estimates
        return math.fsum(estimate("QR", masked, cfg, session=s).estimate for s in streams) / len(streams)
    return estimate(method, masked, cfg, freqs=freqs).estimate


def evaluate_records(task: EvalTask, *, per_player: bool = False) -> list[EvalRecord]:
    """Estimate every cell of ``task.game`` in every session with every method."""
    if not task.sessions:
        raise EmptyTaskError("evaluation task has no sessions")
    methods = tuple(m.upper() for m in task.methods)
    cfg = task.cfg
    game = task.game
    for s in task.sessions:
        s.validate_for(game)

    records = []
    for unit_id, streams in _units(task.sessions, per_player):
        freqs = average_frequencies([frequencies(s, game) for s in streams])
        for cell in game.cells():
            truth = game.value(cell)
            masked = game.hide(cell)
            in_range = cfg.grid_lo <= truth <= cfg.grid_hi
            for method in methods:
                if not in_range:
                    records.append(EvalRecord(game.name, unit_id, cell.label(), method, math.nan, truth, math.nan, "truth-out-of-range"))
                    continue
                try:
                    est = _estimate_unit(method, masked, streams, freqs, cfg)
                except UninformativeDataError as exc:
                    status = exc.reason
                except GameInverseError as exc:
                    status = type(exc).__name__
                else:
                    records.append(EvalRecord(game.name, unit_id, cell.label(), method, est, truth, abs(est - truth)))
                    continue
                logger.debug("%s %s %s %s: missing (%s)", game.name, unit_id, cell.label(), method, status)
                records.append(EvalRecord(game.name, unit_id, cell.label(), method, math.nan, truth, math.nan, status))
    return records


def summarize(records: list[EvalRecord], methods: Sequence[str], cfg: MethodConfig) -> EvalReport:
    """Per-method metrics, error histograms and pairwise session-RMSE tests,
    all derived from ``records`` alone."""
    methods = tuple(m.upper() for m in methods)
    n_bins = max(1, int(math.ceil(cfg.grid_span / HIST_BIN_WIDTH - 1e-9)))
    edges = np.arange(n_bins + 1) * HIST_BIN_WIDTH

    summaries = {}
    histogram = {}
    for method in methods:
        mine = [r for r in records if r.method == method]
        ok = [r.error for r in mine if r.status == "ok"]
        excluded = sum(r.status == "truth-out-of-range" for r in mine)
        missing = len(mine) - len(ok) - excluded
        if ok:
            m = metrics(ok, cfg.hit_radius)
            summaries[method] = MethodSummary(m.n, m.rmse, m.mean, m.std, m.hit_rate, missing, excluded)
        else:
            summaries[method] = MethodSummary(0, math.nan, math.nan, math.nan, math.nan, missing, excluded)
        histogram[method] = np.histogram(np.asarray(ok, dtype=float), bins=edges)[0]

    session_rmse: dict[str, dict[tuple[str, str], float]] = {}
    for method in methods:
        per_unit: dict[tuple[str, str], list[float]] = {}
        for r in records:
            if r.method == method and r.status == "ok":
                per_unit.setdefault((r.game, r.session), []).append(r.error)
        session_rmse[method] = {k: metrics(v).rmse for k, v in per_unit.items()}

    tests = []
    for a, b in itertools.combinations(methods, 2):
        shared = sorted(set(session_rmse[a]) & set(session_rmse[b]))
        xa = [session_rmse[a][k] for k in shared]
        xb = [session_rmse[b][k] for k in shared]
        try:
            stat, p = wilcoxon_paired(xa, xb)
        except InsufficientDataError:
            tests.append(PairTest(a, b, len(shared), math.nan, math.nan, "insufficient-data"))
        else:
            tests.append(PairTest(a, b, len(shared), stat, p))
    return EvalReport(records, summaries, histogram, edges, tests)


def run_eval(task: EvalTask, *, per_player: bool = False) -> EvalReport:
    records = evaluate_records(task, per_player=per_player)
    return summarize(records, task.methods, task.cfg)


def run_evals(tasks: Sequence[EvalTask], *, per_player: bool = False) -> EvalReport:
    """Evaluate several games and pool their records into one report.

    All tasks must share methods and configuration.
    """
    if not tasks:
        raise EmptyTaskError("no evaluation tasks")
    records = []
    for task in tasks:
        if task.cfg != tasks[0].cfg or tuple(task.methods) != tuple(tasks[0].methods):
            raise ValueError("pooled tasks must share methods and configuration")
        records.extend(evaluate_records(task, per_player=per_player))
    return summarize(records, tasks[0].methods, tasks[0].cfg)


# -- synthetic data ----------------------------------------------------------


def _interior_unique(report, margin: float) -> bool:
    p = report.profile
    return report.multiplicity == 1 and margin <= p.p_U <= 1 - margin and margin <= p.p_L <= 1 - margin


def is_completely_mixed(game: GameSpec, cfg: MethodConfig = MethodConfig(), margin: float = 0.01) -> bool:
    """Whether every concept has a unique equilibrium with both players
    mixing at least ``margin`` on each action."""
    for concept in ("ne", "qre", "ase", "pse", "ibe"):
        try:
            rep = solve(game, concept, lambda_qre=cfg.lambda_qre, n_ase=cfg.n_ase, n_pse=cfg.n_pse)
        except GameInverseError:
            return False
        if not _interior_unique(rep, margin):
            return False
    return True


def random_completely_mixed_game(
    rng: np.random.Generator,
    cfg: MethodConfig = MethodConfig(),
    *,
    decimals: int = 2,
    margin: float = 0.01,
    name: str = "",
    max_tries: int = 100_000,
) -> GameSpec:
    """Rejection-sample a 2x2 game with utilities on the grid range."""
    for _ in range(max_tries):
        tables = np.round(rng.uniform(cfg.grid_lo, cfg.grid_hi, size=(2, 2, 2)), decimals)
        game = GameSpec(tables[0], tables[1], name)
        if is_completely_mixed(game, cfg, margin):
            return game
    raise RuntimeError("could not draw a completely mixed game")


def synthetic_benchmark(
    n_games: int = 12,
    n_sessions: int = 6,
    T: int = 200,
    *,
    concept: str = "qre",
    seed: int = 0,
    cfg: MethodConfig = MethodConfig(),
    methods: Sequence[str] = METHODS,
) -> list[EvalTask]:
    """Random completely mixed games with i.i.d. play drawn from one concept's
    equilibrium profile."""
    rng = np.random.default_rng(seed)
    tasks = []
    for g in range(n_games):
        game = random_completely_mixed_game(rng, cfg, name=f"game{g + 1}")
        profile = solve(game, concept, lambda_qre=cfg.lambda_qre, n_ase=cfg.n_ase, n_pse=cfg.n_pse).profile
        sessions = [
            simulate(profile, T, (seed, g, k), session_id=f"s{k + 1}", game=game.name)
            for k in range(n_sessions)
        ]
        tasks.append(EvalTask(game, sessions, tuple(methods), cfg))
    return tasks
