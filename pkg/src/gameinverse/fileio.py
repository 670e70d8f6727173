"""Text formats for games and play sessions, and CSV writers for reports.

Game file::

    # optional comments
    name: game1
    rows: 2
    cols: 2
    u_row: 10 0 9 10
    u_col: 8 18 9 8
    hidden: row,0,0

Tables are row-major. ``hidden`` is optional; the hidden entry may be
written as ``x`` when its true value is unknown.

Session file::

    game: game1
    session: s1
    T: 3
    plays:
    0,1
    1,0
    0,0
    p_row: 0.6666666666666666 0.3333333333333333
    p_col: 0.6666666666666666 0.3333333333333333

``p_row``/``p_col`` are optional and must agree with the recount of the
plays to within 1e-9.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import MalformedSessionError, ParseError
from .estimators import EstimateResult
from .evaluation import EvalReport
from .game import Cell, GameSpec, MaskedGame, SessionData

GAME_FIELDS = ("name", "rows", "cols", "u_row", "u_col", "hidden")
SESSION_FIELDS = ("game", "session", "T")
FREQUENCY_FIELDS = ("p_row", "p_col")
PLACEHOLDER = "x"

RECORD_HEADER = ("game", "session", "cell", "method", "estimate", "true_value", "error", "status")
SUMMARY_HEADER = ("method", "n", "rmse", "mean_error", "std_error", "hit_rate_3", "n_missing", "n_excluded")
HIST_HEADER = ("method", "bin_lo", "bin_hi", "count")
TESTS_HEADER = ("method_a", "method_b", "n", "statistic", "p_value", "status")
CURVE_HEADER = ("method", "x", "objective", "model")


def _text(data: str | bytes) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8 text: {exc}") from None
    return data


def _fmt(x: float) -> str:
    return repr(float(x))


def _key_value(line: str, lineno: int) -> tuple[str, str]:
    if ":" not in line:
        raise ParseError("expected 'key: value'", line=lineno)
    key, value = line.split(":", 1)
    return key.strip(), value.strip()


def _int_field(value: str, lineno: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"expected an integer, got {value!r}", line=lineno, field=key) from None


def _float(token: str, lineno: int, key: str) -> float:
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"expected a real number, got {token!r}", line=lineno, field=key) from None
    if not np.isfinite(v):
        raise ParseError("utilities must be finite", line=lineno, field=key)
    return v


# -- games -------------------------------------------------------------------


def parse_game(data: str | bytes) -> GameSpec | MaskedGame:
    fields: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(_text(data).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, value = _key_value(line, lineno)
        if key not in GAME_FIELDS:
            raise ParseError("unknown field", line=lineno, field=key)
        if key in fields:
            raise ParseError("duplicate field", line=lineno, field=key)
        fields[key] = (value, lineno)
    for key in GAME_FIELDS[:-1]:
        if key not in fields:
            raise ParseError("missing required field", field=key)

    rows = _int_field(*fields["rows"], "rows")
    cols = _int_field(*fields["cols"], "cols")
    if rows < 2 or cols < 2:
        raise ParseError("each player needs at least two actions", line=fields["rows"][1], field="rows")

    hidden = None
    if "hidden" in fields:
        value, lineno = fields["hidden"]
        try:
            hidden = Cell.parse(value)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, field="hidden") from None
        if hidden.row >= rows or hidden.col >= cols:
            raise ParseError("hidden cell outside the game", line=lineno, field="hidden")

    tables = {}
    placeholder_used = False
    for player in ("row", "col"):
        key = f"u_{player}"
        value, lineno = fields[key]
        tokens = value.split()
        if len(tokens) != rows * cols:
            raise ParseError(f"expected {rows * cols} values, got {len(tokens)}", line=lineno, field=key)
        table = np.empty(rows * cols)
        for k, tok in enumerate(tokens):
            if tok == PLACEHOLDER:
                cell = Cell(player, k // cols, k % cols)
                if cell != hidden:
                    raise ParseError(f"placeholder '{PLACEHOLDER}' only allowed at the hidden cell", line=lineno, field=key)
                table[k] = 0.0
                placeholder_used = True
            else:
                table[k] = _float(tok, lineno, key)
        tables[player] = table.reshape(rows, cols)

    game = GameSpec(tables["row"], tables["col"], fields["name"][0])
    if hidden is None:
        return game
    truth = None if placeholder_used else game.value(hidden)
    return MaskedGame(game, hidden, truth)


def serialize_game(obj: GameSpec | MaskedGame) -> str:
    if isinstance(obj, MaskedGame):
        game, hidden, truth = obj.base, obj.hidden, obj.true_value
    else:
        game, hidden, truth = obj, None, None

    def render(player):
        out = []
        for r in range(game.rows):
            for c in range(game.cols):
                if hidden == Cell(player, r, c) and truth is None:
                    out.append(PLACEHOLDER)
                elif hidden == Cell(player, r, c):
                    out.append(_fmt(truth))
                else:
                    out.append(_fmt(game.table(player)[r, c]))
        return " ".join(out)

    lines = [
        f"name: {game.name}",
        f"rows: {game.rows}",
        f"cols: {game.cols}",
        f"u_row: {render('row')}",
        f"u_col: {render('col')}",
    ]
    if hidden is not None:
        lines.append(f"hidden: {hidden.label()}")
    return "\n".join(lines) + "\n"


# -- sessions ----------------------------------------------------------------


def parse_session(data: str | bytes, game: GameSpec | None = None) -> SessionData:
    lines = _text(data).splitlines()
    header: dict[str, tuple[str, int]] = {}
    idx = 0
    while idx < len(lines):
        lineno = idx + 1
        line = lines[idx].strip()
        idx += 1
        if not line or line.startswith("#"):
            continue
        if line == "plays:":
            break
        if ":" not in line and "," in line:
            raise ParseError("play line before 'plays:'", line=lineno, field="plays")
        key, value = _key_value(line, lineno)
        if key not in SESSION_FIELDS:
            raise ParseError("unknown field", line=lineno, field=key)
        if key in header:
            raise ParseError("duplicate field", line=lineno, field=key)
        header[key] = (value, lineno)
    else:
        raise ParseError("missing 'plays:' block", field="plays")
    for key in SESSION_FIELDS:
        if key not in header:
            raise ParseError("missing required field", field=key)
    T = _int_field(*header["T"], "T")
    if T < 1:
        raise ParseError("T must be at least 1", line=header["T"][1], field="T")

    plays = []
    while idx < len(lines) and len(plays) < T:
        lineno = idx + 1
        line = lines[idx].strip()
        idx += 1
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'row,col', got {line!r}", line=lineno, field="plays")
        try:
            r, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"expected integer actions, got {line!r}", line=lineno, field="plays") from None
        if r < 0 or c < 0:
            raise ParseError("action indices must be non-negative", line=lineno, field="plays")
        plays.append((r, c))
    if len(plays) < T:
        raise ParseError(f"expected {T} plays, found {len(plays)}", field="plays")

    declared: dict[str, tuple[np.ndarray, int]] = {}
    for k in range(idx, len(lines)):
        lineno = k + 1
        line = lines[k].strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ParseError("more play lines than T", line=lineno, field="plays")
        key, value = _key_value(line, lineno)
        if key not in FREQUENCY_FIELDS:
            raise ParseError("unknown field", line=lineno, field=key)
        if key in declared:
            raise ParseError("duplicate field", line=lineno, field=key)
        declared[key] = (np.array([_float(t, lineno, key) for t in value.split()]), lineno)

    session = SessionData(np.array(plays), header["session"][0], header["game"][0])
    if game is not None:
        try:
            session.validate_for(game)
        except MalformedSessionError as exc:
            raise ParseError(str(exc), field="plays") from None
    for key, (vec, lineno) in declared.items():
        column = 0 if key == "p_row" else 1
        actions = session.plays[:, column]
        if actions.max() >= vec.size:
            raise ParseError("frequency vector shorter than the action range", line=lineno, field=key)
        recount = np.bincount(actions, minlength=vec.size) / T
        if np.max(np.abs(recount - vec)) > 1e-9:
            raise ParseError("declared frequencies disagree with the plays", line=lineno, field=key)
    return session


def serialize_session(session: SessionData, game: GameSpec | None = None) -> str:
    """Session text; with ``game`` the frequency block is included."""
    lines = [f"game: {session.game}", f"session: {session.session_id}", f"T: {session.T}", "plays:"]
    lines += [f"{r},{c}" for r, c in session.plays]
    if game is not None:
        p_row = np.bincount(session.plays[:, 0], minlength=game.rows) / session.T
        p_col = np.bincount(session.plays[:, 1], minlength=game.cols) / session.T
        lines.append("p_row: " + " ".join(_fmt(v) for v in p_row))
        lines.append("p_col: " + " ".join(_fmt(v) for v in p_col))
    return "\n".join(lines) + "\n"


def read_game(path: str | Path) -> GameSpec | MaskedGame:
    return parse_game(Path(path).read_bytes())


def read_session(path: str | Path, game: GameSpec | None = None) -> SessionData:
    return parse_session(Path(path).read_bytes(), game)


# -- CSV output --------------------------------------------------------------


def _write_csv(path: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    return str(v)


def record_rows(report: EvalReport):
    for r in report.records:
        yield [_cell(getattr(r, k)) for k in RECORD_HEADER]


def summary_rows(report: EvalReport):
    for method, s in report.summaries.items():
        yield [method] + [_cell(getattr(s, k)) for k in SUMMARY_HEADER[1:]]


def write_records(path, report: EvalReport) -> None:
    _write_csv(path, RECORD_HEADER, record_rows(report))


def write_summary(path, report: EvalReport) -> None:
    _write_csv(path, SUMMARY_HEADER, summary_rows(report))


def write_histogram(path, report: EvalReport) -> None:
    rows = []
    edges = report.bin_edges
    for method, counts in report.histogram.items():
        for k, n in enumerate(counts):
            rows.append([method, _fmt(edges[k]), _fmt(edges[k + 1]), int(n)])
    _write_csv(path, HIST_HEADER, rows)


def write_tests(path, report: EvalReport) -> None:
    rows = [
        [t.method_a, t.method_b, t.n, _fmt(t.statistic), _fmt(t.p_value), t.status]
        for t in report.pairwise_tests
    ]
    _write_csv(path, TESTS_HEADER, rows)


def write_curves(path, results: Iterable[EstimateResult]) -> None:
    rows = []
    for res in results:
        if res.curve is None:
            continue
        model = res.curve.model
        for k, (x, y) in enumerate(zip(res.curve.xs, res.curve.ys)):
            rows.append([res.method, _fmt(x), _fmt(y), "" if model is None else _fmt(model[k])])
    _write_csv(path, CURVE_HEADER, rows)
