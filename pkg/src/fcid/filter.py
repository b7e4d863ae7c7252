"""Kalman / extended Kalman filter used as an online parameter identifier.

The parameters follow a random walk ``theta(t+1) = theta(t) + w(t)`` and the
measurement is the scalar cell or stack voltage ``y = h(theta; i) + n``.  One
step is::

    P- = P + W
    X  = regressors(theta, i)          # Jacobian row for nonlinear models
    S  = X P- X^T + R
    K  = P- X / S
    e  = y - h(theta, i)
    theta+ = theta + K e
    P+ = (I - K X^T) P-,  then symmetrised

With ``W = 0`` and constant ``R`` this is recursive least squares with
forgetting factor one.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, DomainError, EmptyDataError, NotPositiveError, NumericalError, OrderError, RangeError
from .models import RegressionModel
from .noise_adapt import NoiseAdapter

SYM_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class FilterState:
    theta_hat: np.ndarray
    P: np.ndarray
    R: float
    W: np.ndarray
    step: int = 0


@dataclass(frozen=True)
class StepResult:
    theta_hat: np.ndarray
    innovation: float
    predicted_voltage: float
    gain: np.ndarray
    xpx: float


def check_psd(P: np.ndarray, name: str = "P") -> None:
    """Raise NotPositiveError unless ``P`` is symmetric positive semidefinite."""
    scale = float(np.max(np.abs(P))) if P.size else 0.0
    if scale == 0.0:
        return
    if np.max(np.abs(P - P.T)) > SYM_TOL * scale:
        raise NotPositiveError(f"{name} is not symmetric")
    eig_min = float(np.linalg.eigvalsh(P)[0])
    if eig_min < -PSD_TOL * max(float(np.trace(P)), scale):
        raise NotPositiveError(f"{name} has negative eigenvalue {eig_min:.3g}")


def _as_cov(x, d: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = float(a) * np.eye(d)
    elif a.ndim == 1:
        a = np.diag(a)
    if a.shape != (d, d):
        raise DimensionError(f"{name} must be {d}x{d}, got shape {a.shape}")
    return a


def init(model: RegressionModel, theta0, P0=100.0, R0: float = 1.0, W=1e-8) -> FilterState:
    """Build the initial identifier state.

    ``P0`` and ``W`` accept a scalar (times identity), a diagonal vector, or a
    full matrix.  ``W = 0`` means the parameters are treated as constant.
    """
    d = model.dim
    theta0 = np.asarray(theta0, dtype=float).copy()
    if theta0.shape != (d,):
        raise DimensionError(f"{model.name} expects {d} parameters, got shape {theta0.shape}")
    if not np.all(np.isfinite(theta0)):
        raise RangeError("theta0 must be finite")
    P0 = _as_cov(P0, d, "P0")
    check_psd(P0, "P0")
    W = _as_cov(W, d, "W")
    if np.any(W != np.diag(np.diag(W))):
        raise DimensionError("W must be diagonal")
    if np.any(np.diag(W) < 0):
        raise NotPositiveError("W entries must be nonnegative")
    if not (R0 > 0 and math.isfinite(R0)):
        raise NotPositiveError(f"R0 must be positive, got {R0}")
    return FilterState(theta_hat=theta0, P=P0.copy(), R=float(R0), W=W, step=0)


def step(s: FilterState, model: RegressionModel, i: float, y: float,
         mode: str = "auto") -> tuple[FilterState, StepResult]:
    """Process one ``(current, voltage)`` measurement.

    ``mode`` selects how the predicted voltage is formed: ``"kf"`` uses the
    regressor dot product (linear models only), ``"ekf"`` evaluates the model,
    ``"auto"`` picks by ``model.linear``.
    """
    theta = s.theta_hat
    X = model.regressors(theta, i)
    if mode == "auto":
        mode = "kf" if model.linear else "ekf"
    if mode == "kf":
        if not model.linear:
            raise RangeError(f"{model.name} is not linear in its parameters; use mode='ekf'")
        y_hat = float(X @ theta)
    else:
        y_hat = float(model.predict(theta, i))

    # overflow is detected explicitly below, so numpy's warnings add nothing
    with np.errstate(over="ignore", invalid="ignore"):
        P_prior = s.P + s.W
        PX = P_prior @ X
        xpx = float(X @ PX)
        S = xpx + s.R
        if not (S > 0 and math.isfinite(S)):
            raise NumericalError(f"innovation variance S = {S!r} is not positive", step=s.step)
        K = PX / S
        e = y - y_hat
        theta_new = theta + K * e
        P_new = P_prior - np.outer(K, PX)
        P_new = 0.5 * (P_new + P_new.T)
        # any inf or nan entry makes the sum non-finite
        if not math.isfinite(float(theta_new.sum()) + float(P_new.sum())):
            raise NumericalError("state became non-finite", step=s.step)

    new = FilterState(theta_hat=theta_new, P=P_new, R=s.R, W=s.W, step=s.step + 1)
    return new, StepResult(theta_hat=theta_new, innovation=e, predicted_voltage=y_hat,
                           gain=K, xpx=xpx)


def trace_columns(d: int) -> list[str]:
    return (["step", "t", "i", "v", "v_hat", "innovation"]
            + [f"theta_{j + 1}" for j in range(d)]
            + [f"K_{j + 1}" for j in range(d)]
            + ["xpx", "R_hat", "R", "clamped", "skipped"])


@dataclass
class Trace:
    """Per-step record of an identification run (column arrays)."""

    param_names: tuple
    step: np.ndarray
    t: np.ndarray
    i: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray
    innovation: np.ndarray
    theta: np.ndarray
    K: np.ndarray
    xpx: np.ndarray
    R_hat: np.ndarray
    R: np.ndarray
    clamped: np.ndarray
    skipped: np.ndarray
    meta: dict = field(default_factory=dict)
    final_state: FilterState | None = None

    def __len__(self):
        return len(self.step)

    @property
    def dim(self) -> int:
        return len(self.param_names)

    @property
    def columns(self) -> list[str]:
        return trace_columns(self.dim)

    def rows(self):
        for k in range(len(self)):
            yield ([int(self.step[k]), self.t[k], self.i[k], self.v[k], self.v_hat[k],
                    self.innovation[k]] + list(self.theta[k]) + list(self.K[k])
                   + [self.xpx[k], self.R_hat[k], self.R[k], int(self.clamped[k]),
                      int(self.skipped[k])])


def run(s: FilterState, model: RegressionModel, samples, adapter: NoiseAdapter | None = None,
        on_domain_error: str = "skip", mode: str = "auto", monitor=None) -> Trace:
    """Run the identifier over ``samples`` (iterable of ``(t, i, v)``).

    After each step the adapter, if given, turns ``(innovation, xpx)`` into the
    noise variance used by the next step.  Samples outside the model domain at
    the current estimate are skipped and flagged (``on_domain_error="skip"``)
    or re-raised with ``sample_index`` set (``"abort"``).  The adapter is copied;
    the caller's instance is left untouched.  ``monitor(k, state)`` is called
    after every processed sample, once the next ``R`` is installed.
    """
    if on_domain_error not in ("skip", "abort"):
        raise RangeError(f"on_domain_error must be 'skip' or 'abort', got {on_domain_error!r}")
    samples = [(float(t), float(i), float(v)) for t, i, v in samples]
    if not samples:
        raise EmptyDataError("no samples to process")
    for k in range(1, len(samples)):
        if not samples[k][0] > samples[k - 1][0]:
            raise OrderError(f"timestamps not strictly increasing at sample {k}")

    adapter = copy.deepcopy(adapter)
    n, d = len(samples), model.dim
    v_hat = np.full(n, np.nan)
    innov = np.full(n, np.nan)
    thetas = np.empty((n, d))
    gains = np.full((n, d), np.nan)
    xpxs = np.full(n, np.nan)
    R_hats = np.full(n, np.nan)
    Rs = np.empty(n)
    clamped = np.zeros(n, dtype=np.int8)
    skipped = np.zeros(n, dtype=np.int8)

    for k, (_, i, v) in enumerate(samples):
        Rs[k] = s.R
        try:
            s, res = step(s, model, i, v, mode=mode)
        except (DomainError, OverflowError) as exc:
            if on_domain_error == "abort":
                exc.sample_index = k
                raise
            skipped[k] = 1
            thetas[k] = s.theta_hat
            s = replace(s, step=s.step + 1)
            continue
        except NumericalError as exc:
            exc.sample_index = k
            raise
        v_hat[k] = res.predicted_voltage
        innov[k] = res.innovation
        thetas[k] = res.theta_hat
        gains[k] = res.gain
        xpxs[k] = res.xpx
        if adapter is not None:
            R_next = adapter.update(res.innovation, res.xpx)
            R_hats[k] = adapter.last_R_hat
            clamped[k] = adapter.last_clamped
            s = FilterState(s.theta_hat, s.P, R_next, s.W, s.step)  # replace() is slow here
        if monitor is not None:
            monitor(k, s)

    arr = np.array(samples)
    meta = {"model": model.to_dict(), "adaptive": adapter is not None,
            "on_domain_error": on_domain_error}
    if adapter is not None:
        meta["adapter"] = adapter.to_dict()
        meta["clamp_count"] = adapter.clamp_count
    return Trace(param_names=tuple(model.param_names), step=np.arange(n), t=arr[:, 0],
                 i=arr[:, 1], v=arr[:, 2], v_hat=v_hat, innovation=innov, theta=thetas,
                 K=gains, xpx=xpxs, R_hat=R_hats, R=Rs, clamped=clamped, skipped=skipped,
                 meta=meta, final_state=s)
