"""Pitch discretization and the coordinate <-> game-state bijection.

Coordinates live in the normalized unit square: x in [0, 1] runs from the
own goal line (0) to the attacking goal line (1), y in [0, 1] across the
pitch. States are numbered row-major with x fastest, so state 0 is the
corner cell at the own goal line and state M-1 the far attacking corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class PitchPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class PitchGrid:
    """Rectangular discretization with ``m_x * m_y`` game states."""

    m_x: int
    m_y: int

    def __post_init__(self) -> None:
        if self.m_x < 1 or self.m_y < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.m_x}x{self.m_y}")

    @property
    def m(self) -> int:
        """Number of game states M = m_x * m_y."""
        return self.m_x * self.m_y

    def __str__(self) -> str:
        return f"{self.m_x}x{self.m_y}"

    @classmethod
    def parse(cls, text: str) -> "PitchGrid":
        """Parse a ``MXxMY`` string such as ``16x12``."""
        parts = text.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"expected a grid like '16x12', got {text!r}")
        try:
            return cls(int(parts[0]), int(parts[1]))
        except ValueError as exc:
            raise ValueError(f"expected a grid like '16x12', got {text!r}") from exc


def state_of(grid: PitchGrid, p: PitchPoint | tuple[float, float]) -> int:
    """Map a normalized pitch point to its state index.

    Points on the far edges (x == 1 or y == 1) clamp into the last cell so
    the unit square partitions into exactly M states.
    """
    x, y = p
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point ({x}, {y}) outside the unit square; clamp at ingestion")
    ix = min(grid.m_x - 1, math.floor(x * grid.m_x))
    iy = min(grid.m_y - 1, math.floor(y * grid.m_y))
    return ix + grid.m_x * iy


def cell_center(grid: PitchGrid, state: int) -> PitchPoint:
    """Center point of the rectangle for ``state``."""
    if not 0 <= state < grid.m:
        raise ValueError(f"state {state} out of range [0, {grid.m})")
    ix = state % grid.m_x
    iy = state // grid.m_x
    return PitchPoint((ix + 0.5) / grid.m_x, (iy + 0.5) / grid.m_y)


def clamp_unit(v: float) -> float:
    """Clamp a raw coordinate into [0, 1]; used by every data adapter."""
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else v
