"""Command-line entry point: ``simulate``, ``estimate`` and ``evaluate``.

Exit codes: 0 success, 2 bad input (argument or file parse errors), 3 an
estimator found the data uninformative in ``estimate``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import GameInverseError, ParseError, UninformativeDataError
from .estimators import METHODS, estimate
from .evaluation import EvalTask, run_evals
from .fileio import (
    read_game,
    read_session,
    serialize_session,
    summary_rows,
    write_curves,
    write_histogram,
    write_records,
    write_tests,
    SUMMARY_HEADER,
)
from .game import GameSpec, MaskedGame, MethodConfig, frequencies
from .solvers import simulate, solve

logger = logging.getLogger("gameinverse")

EXIT_PARSE = 2
EXIT_UNINFORMATIVE = 3
OUT_DIR_ENV = "GAMEINVERSE_OUT_DIR"


class _InputError(Exception):
    pass


def _grid(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be LO:HI:STEP, got {text!r}") from None
    return lo, hi, step


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = MethodConfig()
    p.add_argument("--lambda-qre", type=float, default=d.lambda_qre)
    p.add_argument("--n-ase", type=int, default=d.n_ase)
    p.add_argument("--n-pse", type=int, default=d.n_pse)
    p.add_argument("--lambda-qr", type=float, default=d.lambda_qr)
    p.add_argument("--grid", type=_grid, default=(d.grid_lo, d.grid_hi, d.grid_step), metavar="LO:HI:STEP")


def _config(args) -> MethodConfig:
    lo, hi, step = args.grid
    try:
        return MethodConfig(
            lambda_qre=args.lambda_qre,
            n_ase=args.n_ase,
            n_pse=args.n_pse,
            lambda_qr=args.lambda_qr,
            grid_lo=lo,
            grid_hi=hi,
            grid_step=step,
            hit_radius=getattr(args, "radius", MethodConfig.hit_radius),
        )
    except ValueError as exc:
        raise _InputError(f"invalid configuration: {exc}") from None


def _log_config(cfg: MethodConfig) -> None:
    logger.info("effective config: %s", json.dumps(cfg.as_dict(), sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gameinverse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="forward-solve a game and sample session files")
    p.add_argument("--game", required=True, type=Path)
    p.add_argument("--concept", required=True, choices=["ne", "qre", "ase", "pse", "ibe"])
    p.add_argument("--periods", required=True, type=int)
    p.add_argument("--sessions", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_DIR_ENV} or .)")
    _add_config_flags(p)

    p = sub.add_parser("estimate", help="estimate the hidden utility of a game file")
    p.add_argument("--game", required=True, type=Path)
    p.add_argument("--session", required=True, type=Path)
    p.add_argument("--method", required=True, choices=[m.lower() for m in METHODS] + ["all"])
    p.add_argument("--curve", type=Path, default=None, help="write the grid objective to this CSV")
    _add_config_flags(p)

    p = sub.add_parser("evaluate", help="hide-one-at-a-time evaluation over directories of files")
    p.add_argument("--games", required=True, type=Path)
    p.add_argument("--sessions", required=True, type=Path)
    p.add_argument("--methods", default=",".join(m.lower() for m in METHODS))
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--hist", type=Path, default=None)
    p.add_argument("--tests", type=Path, default=None)
    p.add_argument("--radius", type=float, default=MethodConfig.hit_radius)
    p.add_argument("--per-player", action="store_true", help="score each play stream separately")
    _add_config_flags(p)
    return parser


def _load_game(path: Path):
    try:
        return read_game(path)
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc}") from None
    except ParseError as exc:
        raise _InputError(f"{path}: {exc}") from None


def _cmd_simulate(args) -> int:
    cfg = _config(args)
    _log_config(cfg)
    game = _load_game(args.game)
    if isinstance(game, MaskedGame):
        if game.true_value is None:
            raise _InputError(f"{args.game}: cannot simulate a game with an unknown utility")
        game = game.base
    if args.periods < 1 or args.sessions < 1:
        raise _InputError("--periods and --sessions must be positive")
    report = solve(game, args.concept, lambda_qre=cfg.lambda_qre, n_ase=cfg.n_ase, n_pse=cfg.n_pse)
    if report.multiplicity > 1:
        logger.warning("%d equilibria found; sampling from the first", report.multiplicity)
    name = game.name or args.game.stem
    out = args.out or Path(os.environ.get(OUT_DIR_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.sessions):
        session = simulate(report.profile, args.periods, (args.seed, k), session_id=f"s{k + 1}", game=name)
        path = out / f"{name}_s{k + 1}.session"
        path.write_text(serialize_session(session, game))
        print(path)
    return 0


def _cmd_estimate(args) -> int:
    cfg = _config(args)
    _log_config(cfg)
    masked = _load_game(args.game)
    if not isinstance(masked, MaskedGame):
        raise _InputError(f"{args.game}: no 'hidden' field; nothing to estimate")
    try:
        session = read_session(args.session, masked.base)
    except OSError as exc:
        raise _InputError(f"cannot read {args.session}: {exc}") from None
    except ParseError as exc:
        raise _InputError(f"{args.session}: {exc}") from None
    freqs = frequencies(session, masked.base)
    methods = METHODS if args.method == "all" else (args.method.upper(),)

    results = []
    failed = 0
    for method in methods:
        try:
            res = estimate(method, masked, cfg, freqs=freqs, session=session)
        except UninformativeDataError as exc:
            print(f"{method}: uninformative data ({exc.reason}): {exc}", file=sys.stderr)
            failed = failed or EXIT_UNINFORMATIVE
            continue
        except GameInverseError as exc:
            print(f"{method}: {exc}", file=sys.stderr)
            failed = 1
            continue
        results.append(res)
        print(res.record())
    if args.curve is not None:
        write_curves(args.curve, results)
    return failed


def _cmd_evaluate(args) -> int:
    cfg = _config(args)
    _log_config(cfg)
    methods = tuple(m.strip().upper() for m in args.methods.split(",") if m.strip())
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise _InputError(f"unknown methods: {', '.join(unknown) or '(none)'}")
    if not args.games.is_dir() or not args.sessions.is_dir():
        raise _InputError("--games and --sessions must be directories")

    games: dict[str, GameSpec] = {}
    for path in sorted(args.games.glob("*.game")):
        game = _load_game(path)
        if isinstance(game, MaskedGame):
            if game.true_value is None:
                logger.warning("%s: unknown utility; skipped", path)
                continue
            game = game.base
        name = game.name or path.stem
        games[name] = GameSpec(game.u_row, game.u_col, name)

    sessions: dict[str, list] = {name: [] for name in games}
    for path in sorted(args.sessions.glob("*.session")):
        try:
            raw = read_session(path)
        except ParseError as exc:
            raise _InputError(f"{path}: {exc}") from None
        if raw.game not in games:
            logger.warning("%s: no game named %r; skipped", path, raw.game)
            continue
        try:
            raw.validate_for(games[raw.game])
        except GameInverseError as exc:
            raise _InputError(f"{path}: {exc}") from None
        sessions[raw.game].append(raw)

    tasks = [EvalTask(games[name], sessions[name], methods, cfg) for name in games if sessions[name]]
    if not tasks:
        raise _InputError("no game has any session files")
    report = run_evals(tasks, per_player=args.per_player)
    write_records(args.out, report)
    if args.hist is not None:
        write_histogram(args.hist, report)
    if args.tests is not None:
        write_tests(args.tests, report)
    print(",".join(SUMMARY_HEADER))
    for row in summary_rows(report):
        print(",".join(row))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    handler = {"simulate": _cmd_simulate, "estimate": _cmd_estimate, "evaluate": _cmd_evaluate}[args.command]
    try:
        return handler(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GameInverseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
