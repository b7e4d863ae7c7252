"""Experiment runner: constant-R versus adaptive-R identification.

A run loads or simulates one dataset, feeds the identical sample sequence to
each requested arm, and scores each arm by the mean squared one-step prediction
error over all samples and over the samples after the initial transient.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as fdata
from . import filter as kf
from .errors import ConfigError, EmptyDataError, FcidError, RangeError
from .models import LogBase, RegressionModel, SquadritoConstants, SquadritoModel, KimModel
from .noise_adapt import init_adapter

log = logging.getLogger(__name__)

ARMS = ("constant", "adaptive")

# Synthetic 36-cell stack, currents up to 30 A.  These are made-up but
# plausible magnitudes chosen so every parameter is identifiable from 5000
# samples at 10 mV noise; they are not measured values.
DEFAULT_TRUTH = {
    "squadrito": (34.2, 2.16, 0.108, 0.016),
    "kim": (34.2, 2.16, 0.108, 0.006, 0.25),
}
DEFAULT_THETA0 = {
    "squadrito": (0.0, 0.0, 0.0, 0.0),
    "kim": (32.0, 2.0, 0.1, 0.005, 0.23),
}
# slow degradation used by the comparison suite: V0 falls, r rises [per s]
DEFAULT_DRIFT = {
    "squadrito": (-3.4e-4, 0.0, 1.1e-5, 0.0),
    "kim": (-3.4e-4, 0.0, 1.1e-5, 0.0, 0.0),
}


@dataclass
class ExperimentConfig:
    model: str = "squadrito"
    log_base: str = "ten"
    k: float = 2.0
    i_limit: float | None = None          # default 1.25 * i_max

    # data source: a samples CSV, or the synthetic generator when None
    data: str | None = None
    n: int = 5000
    dt: float = 0.101
    sigma: float = 0.01
    noise_schedule: list | None = None
    truth: list | None = None
    drift: list | str | None = "default"  # "default", None (static) or per-second rates
    profile: str = "steps"
    segments: list | None = None
    i_min: float = 0.5
    i_max: float = 30.0

    theta0: list | None = None
    P0: float | list | None = None        # Kim default: diag(theta0**2)
    W: float | list | None = None         # default (W_rel * reference scale)**2
    W_rel: float = 1e-5

    r0: float = 1.0
    adaptive: bool = False
    lam: float = 0.99
    gamma: float = 0.01
    R_floor: float = 1e-8
    R_ceil: float = 1e3
    warmup: int = 50
    moment: str = "ewma"
    window: int = 100

    transient_cut: float = 0.1            # fraction in [0, 1) or sample index >= 1
    on_domain_error: str = "skip"
    out_dir: str | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        aliases = {"lambda": "lam", "transient-cut": "transient_cut", "out-dir": "out_dir"}
        clean = {}
        for key, value in d.items():
            key = aliases.get(key, key)
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
            clean[key] = value
        cfg = cls(**clean)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            d = json.loads(text)
        except json.JSONDecodeError:
            d = _parse_key_values(text)
        if not isinstance(d, dict):
            raise ConfigError("config file must hold an object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.model not in DEFAULT_TRUTH:
            raise ConfigError(f"model must be 'squadrito' or 'kim', got {self.model!r}")
        try:
            LogBase(self.log_base)
        except ValueError:
            raise ConfigError(f"log_base must be 'ten' or 'natural', got {self.log_base!r}") from None
        if self.n < 1 or not self.dt > 0 or not self.sigma > 0:
            raise ConfigError("n, dt and sigma must be positive")
        tc = self.transient_cut
        if tc < 0 or (tc >= 1 and tc != int(tc)):
            raise ConfigError(f"transient_cut must be a fraction in [0, 1) or an index, got {tc}")
        if self.on_domain_error not in ("skip", "abort"):
            raise ConfigError("on_domain_error must be 'skip' or 'abort'")
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.r0 > 0:
            raise ConfigError(f"r0 must be positive, got {self.r0}")
        if self.W_rel < 0:
            raise ConfigError("W_rel must be nonnegative")
        d = len(DEFAULT_TRUTH[self.model])
        for name in ("truth", "theta0"):
            val = getattr(self, name)
            if val is not None and len(val) != d:
                raise ConfigError(f"{name} needs {d} entries for the {self.model} model")
        if isinstance(self.drift, str) and self.drift != "default":
            raise ConfigError(f"drift must be 'default', null or a list, got {self.drift!r}")
        if isinstance(self.drift, list) and len(self.drift) != d:
            raise ConfigError(f"drift needs {d} entries for the {self.model} model")

    # resolved values -----------------------------------------------------

    @property
    def truth_vector(self) -> np.ndarray:
        return np.array(self.truth if self.truth is not None else DEFAULT_TRUTH[self.model], float)

    @property
    def drift_vector(self) -> np.ndarray | None:
        if self.drift is None:
            return None
        if isinstance(self.drift, str):
            return np.array(DEFAULT_DRIFT[self.model], float)
        return np.array(self.drift, float)

    @property
    def theta0_vector(self) -> np.ndarray:
        return np.array(self.theta0 if self.theta0 is not None else DEFAULT_THETA0[self.model], float)

    @property
    def P0_value(self):
        if self.P0 is not None:
            return self.P0
        if self.model == "kim":
            return self.theta0_vector ** 2
        return 100.0

    @property
    def W_value(self):
        if self.W is not None:
            return self.W
        scale = np.abs(np.array(DEFAULT_TRUTH[self.model], float))
        return (self.W_rel * scale) ** 2


def _parse_key_values(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def build_model(cfg: ExperimentConfig) -> RegressionModel:
    base = LogBase(cfg.log_base)
    if cfg.model == "kim":
        return KimModel(base)
    i_limit = cfg.i_limit if cfg.i_limit is not None else 1.25 * cfg.i_max
    try:
        return SquadritoModel(SquadritoConstants.from_limiting_current(i_limit, k=cfg.k, log_base=base))
    except RangeError as exc:
        raise ConfigError(str(exc)) from exc


def build_dataset(cfg: ExperimentConfig, model: RegressionModel | None = None) -> fdata.Dataset:
    """Load ``cfg.data`` or simulate the configured synthetic dataset."""
    if cfg.data is not None:
        samples = fdata.read_samples(cfg.data)
        arr = np.array(samples, dtype=float)
        return fdata.Dataset(t=arr[:, 0], i=arr[:, 1], v=arr[:, 2],
                             manifest={"source": str(cfg.data)})
    model = model or build_model(cfg)
    profile = fdata.CurrentProfile(
        kind=cfg.profile,
        segments=[tuple(s) for s in cfg.segments] if cfg.segments else fdata.default_segments(),
        i_min=cfg.i_min, i_max=cfg.i_max)
    noise = fdata.NoiseSpec(sigma=cfg.sigma, seed=cfg.seed, schedule=cfg.noise_schedule)
    try:
        return fdata.generate(model, cfg.truth_vector, profile, noise, dt=cfg.dt, n=cfg.n,
                              drift=cfg.drift_vector)
    except RangeError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_cut(transient_cut, n: int) -> int:
    if transient_cut < 1:
        return int(math.floor(transient_cut * n))
    cut = int(transient_cut)
    if cut >= n:
        raise ConfigError(f"transient cut {cut} is not below the sample count {n}")
    return cut


def mse(trace, cut_index: int) -> tuple[float, float]:
    """Mean squared prediction error over all steps and over steps >= cut_index.

    Skipped samples carry no prediction and are left out of both means.
    """
    e = np.asarray(trace.innovation, dtype=float)
    n = len(e)
    if n == 0:
        raise EmptyDataError("empty trace")
    if not 0 <= cut_index < n:
        raise RangeError(f"cut index {cut_index} outside [0, {n})")
    ok = np.asarray(trace.skipped) == 0
    all_e, post_e = e[ok], e[cut_index:][ok[cut_index:]]
    if len(all_e) == 0 or len(post_e) == 0:
        raise EmptyDataError("no usable (non-skipped) samples in the requested range")
    return float(np.mean(all_e ** 2)), float(np.mean(post_e ** 2))


@dataclass
class ArmResult:
    arm: str
    mse_all: float
    mse_post: float
    final_theta: dict
    final_R: float
    clamp_count: int
    skip_count: int
    trace_file: str | None = None
    trace: kf.Trace | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("trace")
        return d


@dataclass
class Report:
    model: str
    dataset_sha256: str
    n_samples: int
    cut_index: int
    arms: dict
    config: dict
    truth: dict | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dataset_sha256": self.dataset_sha256,
            "n_samples": self.n_samples,
            "transient_cut": {"index": self.cut_index, "requested": self.config["transient_cut"]},
            "truth": self.truth,
            "arms": {name: a.to_dict() for name, a in self.arms.items()},
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        """Plain-text comparison table, one row per model, two MSE columns per arm."""
        arms = [a for a in ARMS if a in self.arms]
        algo = "KF" if self.model == "squadrito" else "EKF"
        params = "[" + ", ".join(next(iter(self.arms.values())).final_theta) + "]"
        head1 = f"{'':10s} {'':9s} {'':22s}" + "".join(
            f" {('Constant R' if a == 'constant' else 'Estimating R'):^27s}" for a in arms)
        head2 = f"{'Model':10s} {'Algorithm':9s} {'Parameters':22s}" + " {:>13s} {:>13s}".format(
            "MSE (1)", "MSE (2)") * len(arms)
        row = f"{self.model.capitalize():10s} {algo:9s} {params:22s}" + "".join(
            f" {self.arms[a].mse_all:13.4e} {self.arms[a].mse_post:13.4e}" for a in arms)
        rule = "=" * len(head2)
        foot = (f"MSE (1): all {self.n_samples} samples; MSE (2): samples from index "
                f"{self.cut_index} on.  Dataset sha256 {self.dataset_sha256[:16]}.")
        return "\n".join([rule, head1, head2, rule, row, "-" * len(head2), foot]) + "\n"


def run_arm(cfg: ExperimentConfig, model: RegressionModel, samples, arm: str,
            monitor=None) -> kf.Trace:
    if arm not in ARMS:
        raise ConfigError(f"unknown arm {arm!r}")
    state = kf.init(model, cfg.theta0_vector, cfg.P0_value, cfg.r0, cfg.W_value)
    adapter = None
    if arm == "adaptive":
        adapter = init_adapter(cfg.lam, cfg.gamma, cfg.r0, cfg.R_floor, cfg.R_ceil,
                               cfg.warmup, cfg.moment, cfg.window)
    try:
        return kf.run(state, model, samples, adapter=adapter,
                      on_domain_error=cfg.on_domain_error, monitor=monitor)
    except FcidError as exc:
        exc.arm = arm
        raise


def run_experiment(cfg: ExperimentConfig, arms=None, dataset: fdata.Dataset | None = None,
                   write: bool = True) -> Report:
    """Run the requested arms on one shared dataset and score them.

    ``arms`` defaults to the single arm selected by ``cfg.adaptive``.  Traces,
    ``report.json`` and ``report.txt`` go to ``cfg.out_dir`` when ``write`` is
    set and an output directory is configured.
    """
    if arms is None:
        arms = ("adaptive",) if cfg.adaptive else ("constant",)
    model = build_model(cfg)
    if dataset is None:
        dataset = build_dataset(cfg, model)
    samples = dataset.samples
    cut = resolve_cut(cfg.transient_cut, len(samples))
    digest = dataset.digest()
    out = Path(cfg.out_dir) if (write and cfg.out_dir) else None

    results = {}
    for arm in arms:
        log.info("running %s arm on %d samples", arm, len(samples))
        tr = run_arm(cfg, model, samples, arm)
        m_all, m_post = mse(tr, cut)
        trace_file = None
        if out is not None:
            trace_file = f"trace_{cfg.model}_{arm}.csv"
            fdata.write_trace(out / trace_file, tr)
        results[arm] = ArmResult(
            arm=arm, mse_all=m_all, mse_post=m_post,
            final_theta=dict(zip(model.param_names, tr.final_state.theta_hat.tolist())),
            final_R=float(tr.final_state.R), clamp_count=int(tr.clamped.sum()),
            skip_count=int(tr.skipped.sum()), trace_file=trace_file, trace=tr)

    truth = None
    if cfg.data is None:
        truth = dataset.manifest.get("truth")
    report = Report(model=cfg.model, dataset_sha256=digest, n_samples=len(samples), cut_index=cut,
                    arms=results, config=dict(cfg.to_dict(), model_constants=model.to_dict()),
                    truth=truth)
    if out is not None:
        fdata.write_text(out / "report.json", report.to_json())
        fdata.write_text(out / "report.txt", report.table())
    return report


def sweep_lambda(cfg: ExperimentConfig, lambdas, write: bool = True) -> list[dict]:
    """Adaptive-arm runs over several learning factors on one shared dataset."""
    lambdas = sorted(float(x) for x in lambdas)
    if not lambdas:
        raise RangeError("no lambda values given")
    for lam in lambdas:
        if not 0.0 < lam < 1.0:
            raise RangeError(f"lambda must lie in (0, 1), got {lam}")
    dataset = build_dataset(cfg)
    rows = []
    for lam in lambdas:
        rep = run_experiment(cfg.replace(lam=lam), arms=("adaptive",), dataset=dataset, write=False)
        a = rep.arms["adaptive"]
        rows.append({"lambda": lam, "mse_all": a.mse_all, "mse_post": a.mse_post,
                     "final_R": a.final_R, "dataset_sha256": rep.dataset_sha256})
    if write and cfg.out_dir:
        out = Path(cfg.out_dir)
        fdata.write_text(out / "sweep.json", json.dumps(rows, indent=2, sort_keys=True) + "\n")
        lines = ["lambda,mse_all,mse_post,final_R"]
        lines += [",".join(fdata.fmt(r[k]) for k in ("lambda", "mse_all", "mse_post", "final_R"))
                  for r in rows]
        fdata.write_text(out / "sweep.csv", "\n".join(lines) + "\n")
    return rows
