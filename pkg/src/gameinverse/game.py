"""Core game types: bimatrix games, masked games, play data and the
security-level / transformed-game / impulse constructions.

Action indices are 0-based. Row action 0 is ``U`` and column action 0 is
``L``, so ``u_row[0, 0]`` is the row player's utility at ``(U, L)``.

Many helpers work on an *own-perspective* table: a player's utilities laid
out with her own actions on axis 0 and the opponent's actions on axis 1.
For the row player this is ``u_row``; for the column player it is
``u_col.T``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .errors import HiddenCellError, MalformedSessionError, UnsupportedShapeError

Player = Literal["row", "col"]
PLAYERS: tuple[Player, Player] = ("row", "col")


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d table, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_player(player: str) -> None:
    if player not in PLAYERS:
        raise ValueError(f"player must be 'row' or 'col', got {player!r}")


@dataclass(frozen=True)
class Cell:
    """Identity of one utility entry: whose utility, at which profile."""

    player: Player
    row: int
    col: int

    def __post_init__(self):
        _check_player(self.player)
        if self.row < 0 or self.col < 0:
            raise ValueError("cell indices must be non-negative")

    def own_position(self) -> tuple[int, int]:
        """(own action, opponent action) of this cell for its owner."""
        if self.player == "row":
            return self.row, self.col
        return self.col, self.row

    def label(self) -> str:
        return f"{self.player},{self.row},{self.col}"

    @classmethod
    def parse(cls, text: str) -> "Cell":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"cell spec must be 'player,row,col', got {text!r}")
        return cls(parts[0], int(parts[1]), int(parts[2]))  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A two-player normal-form game given by two utility tables."""

    u_row: np.ndarray
    u_col: np.ndarray
    name: str = ""

    def __post_init__(self):
        u_row = _frozen_array(self.u_row, "u_row")
        u_col = _frozen_array(self.u_col, "u_col")
        if u_row.shape != u_col.shape:
            raise ValueError(f"utility tables differ in shape: {u_row.shape} vs {u_col.shape}")
        if u_row.shape[0] < 2 or u_row.shape[1] < 2:
            raise ValueError("each player needs at least two actions")
        if not (np.all(np.isfinite(u_row)) and np.all(np.isfinite(u_col))):
            raise ValueError("utilities must be finite")
        object.__setattr__(self, "u_row", u_row)
        object.__setattr__(self, "u_col", u_col)

    @property
    def rows(self) -> int:
        return self.u_row.shape[0]

    @property
    def cols(self) -> int:
        return self.u_row.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u_row.shape

    def is_2x2(self) -> bool:
        return self.shape == (2, 2)

    def require_2x2(self, what: str) -> None:
        if not self.is_2x2():
            raise UnsupportedShapeError(f"{what} requires a 2x2 game, got {self.rows}x{self.cols}")

    def table(self, player: Player) -> np.ndarray:
        _check_player(player)
        return self.u_row if player == "row" else self.u_col

    def own_view(self, player: Player) -> np.ndarray:
        _check_player(player)
        return self.u_row if player == "row" else self.u_col.T

    def value(self, cell: Cell) -> float:
        if cell.row >= self.rows or cell.col >= self.cols:
            raise ValueError(f"cell {cell.label()} outside a {self.rows}x{self.cols} game")
        return float(self.table(cell.player)[cell.row, cell.col])

    def with_value(self, cell: Cell, x: float) -> "GameSpec":
        tables = {"row": self.u_row.copy(), "col": self.u_col.copy()}
        tables[cell.player][cell.row, cell.col] = x
        return GameSpec(tables["row"], tables["col"], self.name)

    def cells(self) -> list[Cell]:
        """All utility cells, row player's first, each in row-major order."""
        return [
            Cell(p, r, c) for p in PLAYERS for r in range(self.rows) for c in range(self.cols)
        ]

    def hide(self, cell: Cell) -> "MaskedGame":
        """Mask one cell, keeping its value as the evaluation truth."""
        return MaskedGame(self, cell, self.value(cell))

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.u_row, other.u_row)
            and np.array_equal(self.u_col, other.u_col)
        )

    def __hash__(self):
        return hash((self.name, self.u_row.tobytes(), self.u_col.tobytes()))


@dataclass(frozen=True)
class MaskedGame:
    """A game with exactly one utility hidden.

    ``base`` holds a placeholder at the hidden position; it must never be
    read through this object. ``true_value`` is only set in evaluation mode.
    """

    base: GameSpec
    hidden: Cell
    true_value: float | None = None

    def __post_init__(self):
        if self.hidden.row >= self.base.rows or self.hidden.col >= self.base.cols:
            raise ValueError(f"hidden cell {self.hidden.label()} outside a {self.base.rows}x{self.base.cols} game")

    @property
    def shape(self) -> tuple[int, int]:
        return self.base.shape

    @property
    def owner(self) -> Player:
        return self.hidden.player

    def utility(self, player: Player, row: int, col: int) -> float:
        if Cell(player, row, col) == self.hidden:
            raise HiddenCellError(f"cell {self.hidden.label()} is hidden")
        return float(self.base.table(player)[row, col])

    def known(self, player: Player) -> np.ndarray:
        """Copy of a player's table with NaN at the hidden position."""
        table = self.base.table(player).copy()
        if player == self.hidden.player:
            table[self.hidden.row, self.hidden.col] = np.nan
        return table

    def substitute(self, x: float) -> GameSpec:
        return self.base.with_value(self.hidden, x)

    def owner_view(self) -> tuple[np.ndarray, tuple[int, int]]:
        """Owner's own-perspective table (NaN at the hidden cell) and the
        hidden cell's (own action, opponent action) position in it."""
        known = self.known(self.owner)
        view = known if self.owner == "row" else known.T
        return view, self.hidden.own_position()


@dataclass(frozen=True, eq=False)
class SessionData:
    """The joint-action sequence of one play stream.

    ``plays`` has shape ``(T, 2)``: column 0 the row player's action, column
    1 the column player's. Streams sharing a ``session_id`` belong to the
    same experimental session.
    """

    plays: np.ndarray
    session_id: str = ""
    game: str = ""

    def __post_init__(self):
        plays = np.array(self.plays, dtype=np.int64)
        if plays.ndim != 2 or plays.shape[1] != 2:
            raise MalformedSessionError(f"plays must have shape (T, 2), got {plays.shape}")
        if plays.shape[0] < 1:
            raise MalformedSessionError("a session needs at least one period")
        if np.any(plays < 0):
            raise MalformedSessionError("action indices must be non-negative")
        plays.setflags(write=False)
        object.__setattr__(self, "plays", plays)

    @property
    def T(self) -> int:
        return self.plays.shape[0]

    def validate_for(self, game: GameSpec) -> None:
        if self.plays[:, 0].max() >= game.rows or self.plays[:, 1].max() >= game.cols:
            raise MalformedSessionError(
                f"session {self.session_id!r} has actions outside a {game.rows}x{game.cols} game"
            )

    def shuffled(self, seed: int) -> "SessionData":
        order = np.random.default_rng(seed).permutation(self.T)
        return SessionData(self.plays[order], self.session_id, self.game)

    def __eq__(self, other):
        if not isinstance(other, SessionData):
            return NotImplemented
        return (
            self.session_id == other.session_id
            and self.game == other.game
            and np.array_equal(self.plays, other.plays)
        )


def _simplex(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{name} must be a probability vector")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} is not on the probability simplex: {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class _Profile:
    p_row: np.ndarray
    p_col: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_row", _simplex(self.p_row, "p_row"))
        object.__setattr__(self, "p_col", _simplex(self.p_col, "p_col"))

    @property
    def p_U(self) -> float:
        return float(self.p_row[0])

    @property
    def p_L(self) -> float:
        return float(self.p_col[0])

    def of(self, player: Player) -> np.ndarray:
        return self.p_row if player == "row" else self.p_col

    def opponent_of(self, player: Player) -> np.ndarray:
        return self.p_col if player == "row" else self.p_row

    @classmethod
    def from_2x2(cls, p_U: float, p_L: float):
        return cls(np.array([p_U, 1.0 - p_U]), np.array([p_L, 1.0 - p_L]))

    def __eq__(self, other):
        if not isinstance(other, _Profile):
            return NotImplemented
        return np.array_equal(self.p_row, other.p_row) and np.array_equal(self.p_col, other.p_col)

    def __repr__(self):
        return f"{type(self).__name__}(p_row={self.p_row.tolist()}, p_col={self.p_col.tolist()})"


class EmpiricalFrequencies(_Profile):
    """Observed action frequencies of both players."""


class MixedProfile(_Profile):
    """A model-generated mixed-strategy profile."""


def frequencies(session: SessionData, game: GameSpec) -> EmpiricalFrequencies:
    session.validate_for(game)
    T = session.T
    p_row = np.bincount(session.plays[:, 0], minlength=game.rows) / T
    p_col = np.bincount(session.plays[:, 1], minlength=game.cols) / T
    return EmpiricalFrequencies(p_row, p_col)


def average_frequencies(freqs: list[EmpiricalFrequencies]) -> EmpiricalFrequencies:
    p_row = np.mean([f.p_row for f in freqs], axis=0)
    p_col = np.mean([f.p_col for f in freqs], axis=0)
    # re-normalise away the rounding of the mean
    return EmpiricalFrequencies(p_row / p_row.sum(), p_col / p_col.sum())


# -- security levels, transformed game, impulses -----------------------------


def security_level_of(own: np.ndarray) -> float:
    """Pure maximin of an own-perspective table."""
    return float(np.max(np.min(own, axis=1)))


def transform_own(own: np.ndarray) -> tuple[np.ndarray, float]:
    """Halve every gain above the security level; losses keep full weight."""
    s = security_level_of(own)
    return np.where(own <= s, own, 0.5 * (s + own)), s


def impulses_own(tr_own: np.ndarray) -> np.ndarray:
    """Foregone transformed payoff toward the other own action.

    ``result[a, b]`` is the impulse felt after playing ``a`` against ``b``.
    """
    if tr_own.shape[0] != 2:
        raise UnsupportedShapeError(
            f"impulses are defined for two own actions, got {tr_own.shape[0]}"
        )
    return np.maximum(0.0, tr_own[::-1] - tr_own)


def security_level(game: GameSpec, player: Player) -> float:
    return security_level_of(game.own_view(player))


@dataclass(frozen=True, eq=False)
class TransformedGame:
    u_tr_row: np.ndarray
    u_tr_col: np.ndarray
    s_row: float
    s_col: float


@dataclass(frozen=True, eq=False)
class ImpulseMatrix:
    """Impulses at each joint profile ``(row action, col action)``."""

    imp_row: np.ndarray
    imp_col: np.ndarray


def transform(game: GameSpec) -> TransformedGame:
    tr_row, s_row = transform_own(game.u_row)
    tr_col_own, s_col = transform_own(game.u_col.T)
    return TransformedGame(tr_row, tr_col_own.T, s_row, s_col)


def impulses(tgame: TransformedGame) -> ImpulseMatrix:
    if tgame.u_tr_row.shape != (2, 2):
        raise UnsupportedShapeError(
            f"impulse matrices need two actions per player, got {tgame.u_tr_row.shape}"
        )
    imp_row = impulses_own(tgame.u_tr_row)
    imp_col = impulses_own(tgame.u_tr_col.T).T
    return ImpulseMatrix(imp_row, imp_col)


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class MethodConfig:
    """Estimator parameters. Defaults are the standard evaluation preset."""

    lambda_qre: float = 1.05
    n_ase: int = 12
    n_pse: int = 6
    lambda_qr: float = 3.0
    grid_lo: float = 0.0
    grid_hi: float = 22.0
    grid_step: float = 0.01
    hit_radius: float = 3.0

    def __post_init__(self):
        if not self.lambda_qre > 0:
            raise ValueError("lambda_qre must be positive")
        if self.n_ase < 1 or self.n_pse < 1:
            raise ValueError("sample sizes must be at least 1")
        if not self.lambda_qr >= 0:
            raise ValueError("lambda_qr must be non-negative")
        if not self.grid_lo < self.grid_hi:
            raise ValueError("grid_lo must be below grid_hi")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if self.grid_size < 2:
            raise ValueError("grid needs at least two points")

    @property
    def grid_size(self) -> int:
        return int(np.floor((self.grid_hi - self.grid_lo) / self.grid_step + 1e-9)) + 1

    @property
    def grid_span(self) -> float:
        return self.grid_hi - self.grid_lo

    def grid(self) -> np.ndarray:
        """Candidate values of the hidden utility, rounded so that decimal
        steps land on the nearest double of their decimal value."""
        xs = self.grid_lo + self.grid_step * np.arange(self.grid_size)
        return np.round(xs, 12)

    def clamp(self, x: float) -> tuple[float, bool]:
        if x < self.grid_lo:
            return self.grid_lo, True
        if x > self.grid_hi:
            return self.grid_hi, True
        return x, False

    def as_dict(self) -> dict:
        return asdict(self)
