"""Online measurement-noise variance estimation from the innovation sequence.

The raw estimate is the innovation second moment minus the part of it explained
by parameter uncertainty, ``R_hat = l0 - X P X^T``.  It is clamped to
``[R_floor, R_ceil]`` and blended into the running value with a learning factor::

    R_next = lam * R + (1 - lam) * R_hat
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .errors import RangeError


@dataclass
class NoiseAdapter:
    lam: float = 0.99
    gamma: float = 0.01
    R_current: float = 1.0
    R_floor: float = 1e-8
    R_ceil: float = 1e3
    warmup: int = 50
    moment: str = "ewma"
    window: int = 100
    l0_hat: float = field(default=None)
    n_updates: int = 0
    clamp_count: int = 0
    last_R_hat: float = math.nan
    last_clamped: bool = False
    _buf: deque = field(default=None, repr=False)

    def __post_init__(self):
        if self.l0_hat is None:
            self.l0_hat = self.R_current
        if self.moment == "window" and self._buf is None:
            self._buf = deque(maxlen=self.window)

    def _clamp(self, x: float) -> tuple[float, bool]:
        if math.isnan(x) or x < self.R_floor:
            return self.R_floor, True
        if x > self.R_ceil:
            return self.R_ceil, True
        return x, False

    def update(self, innovation: float, xpx: float) -> float:
        """Feed one innovation and its predicted parameter-uncertainty share.

        Returns the noise variance to use for the next filter step.
        """
        e2 = innovation * innovation
        if self.moment == "window":
            self._buf.append(e2)
            self.l0_hat = math.fsum(self._buf) / len(self._buf)
        else:
            self.l0_hat = (1.0 - self.gamma) * self.l0_hat + self.gamma * e2

        R_hat, hit = self._clamp(self.l0_hat - xpx)
        self.last_R_hat = R_hat
        self.n_updates += 1
        if self.n_updates <= self.warmup:
            self.last_clamped = False
            return self.R_current

        R_next, hit2 = self._clamp(self.lam * self.R_current + (1.0 - self.lam) * R_hat)
        self.last_clamped = hit or hit2
        if self.last_clamped:
            self.clamp_count += 1
        self.R_current = R_next
        return R_next

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam, "gamma": self.gamma, "R_floor": self.R_floor,
            "R_ceil": self.R_ceil, "warmup": self.warmup, "moment": self.moment,
            "window": self.window,
        }


def init_adapter(lam: float = 0.99, gamma: float = 0.01, R0: float = 1.0,
                 R_floor: float = 1e-8, R_ceil: float = 1e3, warmup: int = 50,
                 moment: str = "ewma", window: int = 100) -> NoiseAdapter:
    if not 0.0 < lam < 1.0:
        raise RangeError(f"lambda must lie in (0, 1), got {lam}")
    if not 0.0 < gamma <= 1.0:
        raise RangeError(f"gamma must lie in (0, 1], got {gamma}")
    if not 0.0 < R_floor <= R0 <= R_ceil:
        raise RangeError(f"need 0 < R_floor <= R0 <= R_ceil, got {R_floor}, {R0}, {R_ceil}")
    if warmup < 0:
        raise RangeError(f"warmup must be nonnegative, got {warmup}")
    if moment not in ("ewma", "window"):
        raise RangeError(f"moment estimator must be 'ewma' or 'window', got {moment!r}")
    if window < 1:
        raise RangeError(f"window must be positive, got {window}")
    return NoiseAdapter(lam=lam, gamma=gamma, R_current=R0, R_floor=R_floor,
                        R_ceil=R_ceil, warmup=warmup, moment=moment, window=window)
