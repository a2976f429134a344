"""Delay-advance phase response functions.

A PRF is stored as two continuous branches: the delay branch on ``[0, pi]``
and the advance branch on ``[pi, 2*pi]``. At exactly ``x = pi`` both branch
values are admissible; ``pi_selection`` picks one so a simulation run stays
single-valued.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

TWO_PI = 2.0 * math.pi

Branch = Callable[[float], float]


class PiSelection(enum.Enum):
    DELAY = "delay"
    ADVANCE = "advance"


class BuiltinPrfId(enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


class PrfDomainError(ValueError):
    """Raised when a PRF is evaluated outside ``[0, 2*pi]``."""


@dataclass(frozen=True)
class PhaseResponseFunction:
    delay_branch: Branch
    advance_branch: Branch
    pi_selection: PiSelection = PiSelection.DELAY
    name: str = "custom"

    def __call__(self, x: float) -> float:
        return prf_eval(self, x)

    def with_pi_selection(self, selection: PiSelection) -> "PhaseResponseFunction":
        return replace(self, pi_selection=selection)


def prf_eval(prf: PhaseResponseFunction, x: float) -> float:
    if not (0.0 <= x <= TWO_PI):
        raise PrfDomainError(f"phase {x!r} outside [0, 2pi]")
    if x < math.pi:
        return prf.delay_branch(x)
    if x > math.pi:
        return prf.advance_branch(x)
    if prf.pi_selection is PiSelection.DELAY:
        return prf.delay_branch(x)
    return prf.advance_branch(x)


@dataclass(frozen=True)
class Violation:
    branch: str
    x: float
    value: float
    reason: str


def _check_delay(x: float, y: float) -> str | None:
    if not math.isfinite(y):
        return "non-finite value"
    if x == 0.0:
        return None if y == 0.0 else "delay branch must vanish at 0"
    if y < -x:
        return "delay exceeds phase (value < -x)"
    if y >= 0.0:
        return "delay branch must be negative on (0, pi]"
    return None


def _check_advance(x: float, y: float) -> str | None:
    if not math.isfinite(y):
        return "non-finite value"
    if x == TWO_PI:
        return None if y == 0.0 else "advance branch must vanish at 2pi"
    if y > TWO_PI - x:
        return "advance overshoots 2pi (value > 2pi - x)"
    if y <= 0.0:
        return "advance branch must be positive on [pi, 2pi)"
    return None


def _safe(branch: Branch, x: float) -> float:
    try:
        return float(branch(x))
    except (ArithmeticError, ValueError):
        return math.nan


def validate_prf(prf: PhaseResponseFunction, grid_points: int = 1000) -> list[Violation]:
    """Check sign, bound and continuity constraints on a uniform grid per branch.

    Returns every violation found; an empty list means the PRF is accepted.
    Continuity is a heuristic: adjacent grid values may not differ by more
    than ``10 * 2pi / grid_points + 1e-6``.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    jump_limit = 10.0 * TWO_PI / grid_points + 1e-6
    report: list[Violation] = []
    for name, branch, lo, hi, check in (
        ("delay", prf.delay_branch, 0.0, math.pi, _check_delay),
        ("advance", prf.advance_branch, math.pi, TWO_PI, _check_advance),
    ):
        xs = [lo + (hi - lo) * k / (grid_points - 1) for k in range(grid_points)]
        xs[-1] = hi
        ys = [_safe(branch, x) for x in xs]
        for x, y in zip(xs, ys):
            reason = check(x, y)
            if reason is not None:
                report.append(Violation(name, x, y, reason))
        for k in range(grid_points - 1):
            a, b = ys[k], ys[k + 1]
            if math.isfinite(a) and math.isfinite(b) and abs(b - a) > jump_limit:
                report.append(Violation(name, xs[k + 1], b, f"discontinuity: jump {abs(b - a):.3g}"))
    return report


# Built-in closed forms.

def _a_delay(x: float) -> float:
    return -0.6 * x


def _a_advance(x: float) -> float:
    return 0.6 * (TWO_PI - x)


def _b_delay(x: float) -> float:
    return -0.7 * x if x < 0.5 * math.pi else -0.35 * math.pi


def _b_advance(x: float) -> float:
    return 0.35 * math.pi if x <= 1.5 * math.pi else 0.7 * (TWO_PI - x)


def _c_delay(x: float) -> float:
    return -1.5 * math.sin(0.5 * x)


def _c_advance(x: float) -> float:
    if x == TWO_PI:
        return 0.0  # sin(pi) is 1.2e-16 in floating point
    return 1.5 * math.sin(0.5 * x)


def _d_delay(x: float) -> float:
    return -(x**3) / math.pi**2 + x**2 / math.pi - 0.75 * x


def _d_advance(x: float) -> float:
    if x == TWO_PI:
        return 0.0
    return -(x**3) / math.pi**2 + 5.0 * x**2 / math.pi - 8.75 * x + 5.5 * math.pi


_BUILTINS: dict[BuiltinPrfId, tuple[Branch, Branch]] = {
    BuiltinPrfId.A: (_a_delay, _a_advance),
    BuiltinPrfId.B: (_b_delay, _b_advance),
    BuiltinPrfId.C: (_c_delay, _c_advance),
    BuiltinPrfId.D: (_d_delay, _d_advance),
}


def builtin_prf(
    prf_id: BuiltinPrfId | str, pi_selection: PiSelection = PiSelection.DELAY
) -> PhaseResponseFunction:
    prf_id = BuiltinPrfId(prf_id)
    delay, advance = _BUILTINS[prf_id]
    return PhaseResponseFunction(delay, advance, pi_selection, name=prf_id.value)


# Declarative piecewise branches (used by config files).

@dataclass(frozen=True)
class SineTerm:
    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, x: float) -> float:
        return self.amplitude * math.sin(self.frequency * x + self.phase)


@dataclass(frozen=True)
class Piece:
    """``sum(poly[k] * x**k) + sum(sine terms)`` on ``[lo, hi]``."""

    lo: float
    hi: float
    poly: tuple[float, ...] = ()
    sines: tuple[SineTerm, ...] = ()

    def __call__(self, x: float) -> float:
        value = 0.0
        for coef in reversed(self.poly):
            value = value * x + coef
        for term in self.sines:
            value += term(x)
        return value


@dataclass(frozen=True)
class PiecewiseBranch:
    pieces: tuple[Piece, ...]
    # snap the value at these abscissae to exactly zero (branch endpoints)
    zero_at: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.pieces:
            raise ValueError("a branch needs at least one piece")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if not math.isclose(left.hi, right.lo, rel_tol=0.0, abs_tol=1e-12):
                raise ValueError(f"pieces not contiguous at {left.hi} / {right.lo}")
        for p in self.pieces:
            if not p.lo < p.hi:
                raise ValueError(f"empty piece [{p.lo}, {p.hi}]")

    def __call__(self, x: float) -> float:
        if x in self.zero_at:
            return 0.0
        for piece in self.pieces:
            if x <= piece.hi:
                return piece(x)
        return self.pieces[-1](x)


def piecewise_prf(
    delay_pieces: Sequence[Piece],
    advance_pieces: Sequence[Piece],
    pi_selection: PiSelection = PiSelection.DELAY,
    name: str = "custom",
) -> PhaseResponseFunction:
    """Build a PRF from piece lists covering ``[0, pi]`` and ``[pi, 2pi]``.

    The branch values at 0 and 2pi are pinned to zero so that closed-form
    pieces such as ``sin(x / 2)`` do not leak rounding noise into the
    endpoint constraint.
    """
    delay = PiecewiseBranch(tuple(delay_pieces), zero_at=(0.0,))
    advance = PiecewiseBranch(tuple(advance_pieces), zero_at=(TWO_PI,))
    if not (math.isclose(delay.pieces[0].lo, 0.0, abs_tol=1e-12)
            and math.isclose(delay.pieces[-1].hi, math.pi, abs_tol=1e-12)):
        raise ValueError("delay pieces must cover [0, pi]")
    if not (math.isclose(advance.pieces[0].lo, math.pi, abs_tol=1e-12)
            and math.isclose(advance.pieces[-1].hi, TWO_PI, abs_tol=1e-12)):
        raise ValueError("advance pieces must cover [pi, 2pi]")
    return PhaseResponseFunction(delay, advance, pi_selection, name=name)
