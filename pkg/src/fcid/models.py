"""Semi-empirical PEMFC polarization models written as regression models.

Both models map stack current ``i`` [A] to voltage [V].  Each exposes
``predict(theta, i)`` and ``regressors(theta, i)``; for the linear-in-parameters
Squadrito model the regressor vector does not depend on ``theta``, for the Kim
model it is the gradient of the prediction with respect to ``theta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, RangeError

# exp() of anything beyond this is treated as a diverged estimate
EXP_LIMIT = 700.0


class LogBase(str, enum.Enum):
    TEN = "ten"
    NATURAL = "natural"

    def log(self, x: float) -> float:
        return math.log10(x) if self is LogBase.TEN else math.log(x)


def _log_base(value) -> LogBase:
    if isinstance(value, LogBase):
        return value
    try:
        return LogBase(str(value).lower())
    except ValueError:
        raise RangeError(f"unknown log base {value!r}") from None


@dataclass(frozen=True)
class SquadritoParams:
    V0: float
    b: float
    r: float
    alpha: float

    def as_array(self) -> np.ndarray:
        return np.array([self.V0, self.b, self.r, self.alpha], dtype=float)


@dataclass(frozen=True)
class KimParams:
    V0: float
    b: float
    r: float
    m: float
    n: float

    def as_array(self) -> np.ndarray:
        return np.array([self.V0, self.b, self.r, self.m, self.n], dtype=float)


@dataclass(frozen=True)
class SquadritoConstants:
    """Known shape constants of the Squadrito model.

    ``k`` is the mass-transport exponent and ``beta`` the inverse limiting
    current.  Neither is identified.
    """

    k: float = 2.0
    beta: float = 1.0 / 37.5
    log_base: LogBase = LogBase.TEN

    def __post_init__(self):
        object.__setattr__(self, "log_base", _log_base(self.log_base))
        if not 1.0 <= self.k <= 4.0:
            raise RangeError(f"k must lie in [1, 4], got {self.k}")
        if not self.beta > 0.0:
            raise RangeError(f"beta must be positive, got {self.beta}")

    @classmethod
    def from_limiting_current(cls, i_limit: float, k: float = 2.0, log_base=LogBase.TEN):
        if not i_limit > 0:
            raise RangeError(f"limiting current must be positive, got {i_limit}")
        return cls(k=k, beta=1.0 / i_limit, log_base=log_base)


def _as_theta(p, dim: int) -> np.ndarray:
    if isinstance(p, (SquadritoParams, KimParams)):
        theta = p.as_array()
    else:
        theta = np.asarray(p, dtype=float)
    if theta.shape != (dim,):
        raise DimensionError(f"expected {dim} parameters, got shape {theta.shape}")
    return theta


def _check_squadrito_domain(c: SquadritoConstants, i: float) -> None:
    if not i > 0.0:
        raise DomainError(f"current must be positive, got {i}")
    if not c.beta * i < 1.0:
        raise DomainError(f"current {i} at or beyond limiting current {1.0 / c.beta}")


def squadrito_regressors(c: SquadritoConstants, i: float) -> np.ndarray:
    """Regressor vector ``[1, -log i, -i, i**k * log(1 - beta*i)]``."""
    _check_squadrito_domain(c, i)
    log = c.log_base.log
    return np.array([1.0, -log(i), -i, i ** c.k * log(1.0 - c.beta * i)])


def squadrito_predict(p, c: SquadritoConstants, i: float) -> float:
    # the dot product keeps predict == <X, theta> bit for bit
    return float(squadrito_regressors(c, i) @ _as_theta(p, 4))


def _check_kim_domain(theta: np.ndarray, i: float) -> float:
    if not i > 0.0:
        raise DomainError(f"current must be positive, got {i}")
    ni = theta[4] * i
    if not abs(ni) <= EXP_LIMIT:
        raise OverflowError(f"exponent n*i = {ni:.6g} exceeds {EXP_LIMIT}")
    return math.exp(ni)


def kim_predict(p, i: float, log_base=LogBase.TEN) -> float:
    theta = _as_theta(p, 5)
    e = _check_kim_domain(theta, i)
    V0, b, r, m, _ = theta
    return float(V0 - b * _log_base(log_base).log(i) - r * i - m * e)


def kim_jacobian(p, i: float, log_base=LogBase.TEN) -> np.ndarray:
    """Gradient of the Kim voltage with respect to ``[V0, b, r, m, n]``."""
    theta = _as_theta(p, 5)
    e = _check_kim_domain(theta, i)
    m = theta[3]
    return np.array([1.0, -_log_base(log_base).log(i), -i, -e, -m * i * e])


class RegressionModel:
    """Common surface consumed by the filter and the harness."""

    name: str = ""
    param_names: tuple = ()
    linear: bool = False

    @property
    def dim(self) -> int:
        return len(self.param_names)

    def predict(self, theta, i: float) -> float:
        raise NotImplementedError

    def regressors(self, theta, i: float) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, theta, i: float) -> bool:
        try:
            self.regressors(theta, i)
        except (DomainError, OverflowError):
            return False
        return True

    def to_dict(self) -> dict:
        raise NotImplementedError


class SquadritoModel(RegressionModel):
    name = "squadrito"
    param_names = ("V0", "b", "r", "alpha")
    linear = True

    def __init__(self, constants: SquadritoConstants | None = None):
        self.constants = constants or SquadritoConstants()

    @property
    def log_base(self) -> LogBase:
        return self.constants.log_base

    def predict(self, theta, i):
        return squadrito_predict(theta, self.constants, i)

    def regressors(self, theta, i):
        return squadrito_regressors(self.constants, i)

    def to_dict(self):
        c = self.constants
        return {"model": self.name, "k": c.k, "beta": c.beta, "log_base": c.log_base.value}

    def __repr__(self):
        c = self.constants
        return f"SquadritoModel(k={c.k}, beta={c.beta}, log_base={c.log_base.value})"


class KimModel(RegressionModel):
    name = "kim"
    param_names = ("V0", "b", "r", "m", "n")
    linear = False

    def __init__(self, log_base=LogBase.TEN):
        self.log_base = _log_base(log_base)

    def predict(self, theta, i):
        return kim_predict(theta, i, self.log_base)

    def regressors(self, theta, i):
        return kim_jacobian(theta, i, self.log_base)

    def to_dict(self):
        return {"model": self.name, "log_base": self.log_base.value}

    def __repr__(self):
        return f"KimModel(log_base={self.log_base.value})"


def make_model(name: str, k: float = 2.0, beta: float | None = None,
               i_limit: float | None = None, log_base=LogBase.TEN) -> RegressionModel:
    name = name.lower()
    if name == "squadrito":
        if beta is None:
            beta = 1.0 / i_limit if i_limit else SquadritoConstants.beta
        return SquadritoModel(SquadritoConstants(k=k, beta=beta, log_base=log_base))
    if name == "kim":
        return KimModel(log_base)
    raise RangeError(f"unknown model {name!r} (expected 'squadrito' or 'kim')")
