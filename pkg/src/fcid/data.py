"""Synthetic polarization datasets and the CSV/JSON file formats.

Samples CSV::

    t,i,v

Trace CSV::

    step,t,i,v,v_hat,innovation,theta_1..theta_d,K_1..K_d,xpx,R_hat,R,clamped,skipped

Floats are written with 17 significant digits so files round-trip exactly and
identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DomainError, EmptyDataError, OrderError, ParseError, RangeError
from .filter import Trace, trace_columns
from .models import RegressionModel

SAMPLE_COLUMNS = ("t", "i", "v")


class Sample(NamedTuple):
    t: float
    i: float
    v: float


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


# Ladder of stack currents [A] with a few large jumps: sudden load changes are
# where the prediction error peaks.
DEFAULT_LEVELS = (0.5, 1, 2, 4, 7, 10, 13, 16, 19, 21, 23, 25, 26, 27, 28, 29, 30)
DEFAULT_JUMPS = (2, 28, 1, 29, 5, 27, 0.5, 30, 10, 26)
DEFAULT_DWELL = 5.05  # s, 50 samples at dt = 0.101 s


def default_segments(dwell: float = DEFAULT_DWELL) -> list[tuple[float, float]]:
    targets = list(DEFAULT_LEVELS) + list(DEFAULT_JUMPS) + list(DEFAULT_LEVELS[::-1])
    return [(dwell, float(x)) for x in targets]


@dataclass
class CurrentProfile:
    """Current demand over time, built from ``(duration [s], target [A])`` segments.

    ``steps`` holds each target for its duration; ``ramp`` moves linearly from
    the previous target and lands on the target at the segment's last sample;
    ``load_cycle`` plays the segments forward then backward; ``replay`` uses
    ``currents`` verbatim.  Segment lists repeat until ``n`` samples are filled.
    """

    kind: str = "steps"
    segments: list = field(default_factory=default_segments)
    i_min: float = 0.5
    i_max: float = 30.0
    currents: list | None = None

    def validate(self) -> None:
        if self.kind not in ("steps", "ramp", "load_cycle", "replay"):
            raise RangeError(f"unknown profile kind {self.kind!r}")
        if not 0.0 < self.i_min <= self.i_max:
            raise RangeError(f"need 0 < i_min <= i_max, got {self.i_min}, {self.i_max}")
        if self.kind == "replay":
            if not self.currents:
                raise RangeError("replay profile needs a current sequence")
            return
        if not self.segments:
            raise RangeError("profile has no segments")
        for dur, target in self.segments:
            if not dur > 0:
                raise RangeError(f"segment duration must be positive, got {dur}")
            if not 0.0 < target <= self.i_max:
                raise RangeError(f"segment target {target} outside (0, {self.i_max}]")

    def currents_for(self, n: int, dt: float) -> np.ndarray:
        self.validate()
        if self.kind == "replay":
            cur = np.asarray(self.currents, dtype=float)
            if len(cur) < n:
                raise RangeError(f"replay profile has {len(cur)} currents, {n} requested")
            return cur[:n].copy()

        segs = [(max(1, int(round(d / dt))), float(x)) for d, x in self.segments]
        if self.kind == "load_cycle":
            segs = segs + segs[-2:0:-1]
        out: list[float] = []
        prev = segs[0][1]
        while len(out) < n:
            for count, target in segs:
                if self.kind == "ramp":
                    ramp = prev + (target - prev) * (np.arange(1, count + 1) / count)
                    ramp[-1] = target  # land exactly despite rounding
                    out.extend(ramp)
                else:
                    out.extend([target] * count)
                prev = target
                if len(out) >= n:
                    break
        return np.array(out[:n])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "i_min": self.i_min, "i_max": self.i_max}
        if self.kind == "replay":
            d["n_currents"] = len(self.currents or [])
        else:
            d["segments"] = [list(s) for s in self.segments]
        return d


@dataclass
class NoiseSpec:
    """White Gaussian voltage noise.

    ``schedule`` is an optional list of ``(t_start, sigma)`` pairs overriding
    ``sigma`` from ``t_start`` onward.
    """

    sigma: float = 0.01
    seed: int = 0
    schedule: list | None = None

    def validate(self) -> None:
        sigmas = [self.sigma] + [s for _, s in (self.schedule or [])]
        if not all(s > 0 for s in sigmas):
            raise RangeError("noise sigma must be positive")

    def sigma_at(self, t: np.ndarray) -> np.ndarray:
        out = np.full(len(t), float(self.sigma))
        for t_start, s in sorted(self.schedule or []):
            out[t >= t_start] = s
        return out

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "seed": self.seed,
                "schedule": [list(p) for p in self.schedule] if self.schedule else None}


@dataclass
class Dataset:
    t: np.ndarray
    i: np.ndarray
    v: np.ndarray
    manifest: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def samples(self) -> list[Sample]:
        return [Sample(*row) for row in zip(self.t.tolist(), self.i.tolist(), self.v.tolist())]

    def to_csv(self) -> str:
        return samples_to_csv(self.samples)

    def digest(self) -> str:
        return dataset_hash(self.samples)


def generate(model: RegressionModel, truth, profile: CurrentProfile, noise: NoiseSpec,
             dt: float = 0.101, n: int = 5000, drift=None) -> Dataset:
    """Simulate ``v = h(truth(t); i(t)) + noise``.

    ``drift`` is an optional per-second rate for each parameter, so the truth
    at time ``t`` is ``truth + drift * t``.
    """
    if n < 1:
        raise RangeError(f"sample count must be positive, got {n}")
    if not dt > 0:
        raise RangeError(f"sampling interval must be positive, got {dt}")
    noise.validate()
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (model.dim,):
        raise RangeError(f"{model.name} truth needs {model.dim} parameters")
    drift_arr = np.zeros(model.dim) if drift is None else np.asarray(drift, dtype=float)
    if drift_arr.shape != (model.dim,):
        raise RangeError(f"drift needs {model.dim} entries")

    t = np.arange(n) * dt
    i = profile.currents_for(n, dt)
    clean = np.empty(n)
    for k in range(n):
        theta = truth + drift_arr * t[k] if drift is not None else truth
        try:
            clean[k] = model.predict(theta, i[k])
        except (DomainError, OverflowError) as exc:
            raise DomainError(f"profile leaves the {model.name} model domain at sample {k}: {exc}") from exc

    rng = np.random.default_rng(noise.seed)
    v = clean + noise.sigma_at(t) * rng.standard_normal(n)
    manifest = {
        "model": model.to_dict(),
        "truth": dict(zip(model.param_names, truth.tolist())),
        "truth_note": "synthetic default values, not measured",
        "drift_per_s": dict(zip(model.param_names, drift_arr.tolist())),
        "noise": noise.to_dict(),
        "profile": profile.to_dict(),
        "seed": noise.seed,
        "dt": dt,
        "n": n,
    }
    return Dataset(t=t, i=i, v=v, manifest=manifest)


def samples_to_csv(samples) -> str:
    buf = io.StringIO()
    buf.write("t,i,v\n")
    for t, i, v in samples:
        buf.write(f"{fmt(t)},{fmt(i)},{fmt(v)}\n")
    return buf.getvalue()


def dataset_hash(samples) -> str:
    return hashlib.sha256(samples_to_csv(samples).encode()).hexdigest()


def write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def write_samples(path, samples) -> None:
    write_text(path, samples_to_csv(samples))


def write_manifest(path, manifest: dict) -> None:
    write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_dataset(directory, ds: Dataset, stem: str = "samples") -> tuple[Path, Path]:
    directory = Path(directory)
    csv_path, man_path = directory / f"{stem}.csv", directory / f"{stem}.manifest.json"
    write_samples(csv_path, ds.samples)
    manifest = dict(ds.manifest, sha256=ds.digest())
    write_manifest(man_path, manifest)
    return csv_path, man_path


def _parse_float(text: str, line: int, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"field {name!r}: cannot parse {text!r} as a number", line) from None


def read_samples(path) -> list[Sample]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"{path}: empty file")
        if [h.strip() for h in header] != list(SAMPLE_COLUMNS):
            raise ParseError(f"expected header 't,i,v', got {','.join(header)!r}", 1)
        out: list[Sample] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", line)
            s = Sample(*(_parse_float(x, line, n) for x, n in zip(row, SAMPLE_COLUMNS)))
            if out and not s.t > out[-1].t:
                raise OrderError(f"line {line}: timestamp {s.t} does not increase")
            out.append(s)
    if not out:
        raise EmptyDataError(f"{path}: no data rows")
    return out


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(",".join(trace.columns) + "\n")
    for row in trace.rows():
        buf.write(",".join(str(x) if isinstance(x, int) else fmt(x) for x in row) + "\n")
    return buf.getvalue()


def write_trace(path, trace: Trace) -> None:
    if len(trace) == 0:
        raise EmptyDataError("cannot write an empty trace")
    write_text(path, trace_to_csv(trace))


def read_trace(path) -> Trace:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"{path}: empty file")
        rows = []
        for row in reader:
            if row:
                try:
                    rows.append([float(x) for x in row])
                except ValueError as exc:
                    raise ParseError(str(exc), reader.line_num) from None
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    thetas = [h for h in header if h.startswith("theta_")]
    d = len(thetas)
    if header != trace_columns(d):
        raise ParseError(f"unexpected trace header {','.join(header)!r}", 1)
    a = np.array(rows)
    col = {h: a[:, j] for j, h in enumerate(header)}
    return Trace(
        param_names=tuple(thetas),
        step=col["step"].astype(int), t=col["t"], i=col["i"], v=col["v"],
        v_hat=col["v_hat"], innovation=col["innovation"],
        theta=a[:, 6:6 + d], K=a[:, 6 + d:6 + 2 * d],
        xpx=col["xpx"], R_hat=col["R_hat"], R=col["R"],
        clamped=col["clamped"].astype(np.int8), skipped=col["skipped"].astype(np.int8),
    )
