"""Random delay-advance PRFs, couplings and initial phases for property tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .prf import TWO_PI, PhaseResponseFunction, PiSelection


@dataclass(frozen=True)
class CappedLinearDelay:
    """``-min(slope * x, cap)`` on ``[0, pi]``."""

    slope: float
    cap: float

    def __call__(self, x: float) -> float:
        return -min(self.slope * x, self.cap)


@dataclass(frozen=True)
class CappedLinearAdvance:
    """``min(slope * (2pi - x), cap)`` on ``[pi, 2pi]``."""

    slope: float
    cap: float

    def __call__(self, x: float) -> float:
        return min(self.slope * (TWO_PI - x), self.cap)


@dataclass(frozen=True)
class SineDelay:
    amplitude: float

    def __call__(self, x: float) -> float:
        return -self.amplitude * math.sin(0.5 * x)


@dataclass(frozen=True)
class SineAdvance:
    amplitude: float

    def __call__(self, x: float) -> float:
        if x == TWO_PI:
            return 0.0
        return self.amplitude * math.sin(0.5 * (TWO_PI - x))


def random_prf(rng: np.random.Generator, min_slope: float = 0.3,
               pi_selection: PiSelection = PiSelection.DELAY) -> PhaseResponseFunction:
    """Draw independent delay and advance branches from two families.

    Capped-linear branches have slope in ``[min_slope, 1]`` near the
    endpoints and a plateau somewhere below ``slope * pi``; sine lobes have
    amplitude in ``[2 * min_slope, 2]``. Both families satisfy the
    delay-advance sign and bound constraints by construction.
    """
    def branch(kind_delay: bool):
        if rng.random() < 0.5:
            slope = rng.uniform(min_slope, 1.0)
            cap = slope * math.pi * rng.uniform(0.3, 1.0)
            return (CappedLinearDelay if kind_delay else CappedLinearAdvance)(slope, cap)
        amp = rng.uniform(2.0 * min_slope, 2.0)
        return (SineDelay if kind_delay else SineAdvance)(amp)

    return PhaseResponseFunction(branch(True), branch(False), pi_selection, name="random")


def random_couplings(rng: np.random.Generator, n: int, low: float = 0.05,
                     high: float = 0.95) -> list[float]:
    return [float(v) for v in rng.uniform(low, high, n)]


def random_phases(rng: np.random.Generator, n: int) -> list[float]:
    return [float(v) for v in rng.uniform(0.0, TWO_PI, n)]
