"""Score parameters and opinion states shared by the theory and dynamics code."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GameScores:
    """Feedback scores ``a, b, c, d`` (A-A, A-B, B-A, B-B) and basic scores."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    delta_A: float = 0.0
    delta_B: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValidationError(f"score {name} must be finite, got {value!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.delta_A, self.delta_B], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "GameScores":
        return cls(*(float(x) for x in v))

    def scaled(self, factor: float) -> "GameScores":
        return GameScores.from_vector(self.vector * factor)

    def __add__(self, other: "GameScores") -> "GameScores":
        return GameScores.from_vector(self.vector + other.vector)

    def sign_warnings(self) -> list:
        """Departures from the usual sign pattern (a, d > 0; b, c < 0).

        Zero is allowed everywhere since the special cases switch whole
        groups of scores off.
        """
        out = []
        if self.a < 0:
            out.append("a is negative (matching A-A feedback is usually positive)")
        if self.d < 0:
            out.append("d is negative (matching B-B feedback is usually positive)")
        if self.b > 0:
            out.append("b is positive (conflicting feedback is usually negative)")
        if self.c > 0:
            out.append("c is positive (conflicting feedback is usually negative)")
        for msg in out:
            log.warning("scores: %s", msg)
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def as_state(s, n: int) -> np.ndarray:
    """Validate a binary opinion vector (1 = A, 0 = B) of length ``n``."""
    arr = np.asarray(s)
    if arr.shape != (n,):
        raise ValidationError(f"state must have length {n}, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValidationError("state entries must be 0 or 1")
    return arr.astype(np.int64)
