"""Fitting model constants from characterisation logs.

Logs are small CSVs with one commanded input per row (channel power in W, or
tendon pull in mm) and the measured steady-state displacement. Repeated
measurements share the input value and differ in the repeat column.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DegenerateData
from .geometry import FiberGeometry
from .kinematics import calibrate_moment_arm, lateral_displacement

EXPECTED_HEADER = ("input", "displacement_mm", "repeat")


@dataclass(frozen=True)
class CharacterizationSet:
    """Parsed characterisation log."""

    name: str
    inputs: np.ndarray
    displacements: np.ndarray
    repeats: np.ndarray

    def __len__(self) -> int:
        return len(self.inputs)

    def subset(self, mask: np.ndarray) -> "CharacterizationSet":
        return CharacterizationSet(self.name, self.inputs[mask],
                                   self.displacements[mask],
                                   self.repeats[mask])


def parse_characterization_csv(source, name: str | None = None) -> CharacterizationSet:
    """Parse a characterisation CSV from a path or file-like object.

    Lines starting with '#' are comments. The header must name the three
    expected columns. Raises DegenerateData on a malformed file or when no
    data rows remain.
    """
    if hasattr(source, "read"):
        text = source.read()
        label = name or "<stream>"
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        label = name or str(source)
    lines = [ln for ln in text.splitlines() if ln.strip() and
             not ln.lstrip().startswith("#")]
    if not lines:
        raise DegenerateData(f"{label}: no content")
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = tuple(h.strip() for h in next(reader))
    if header != EXPECTED_HEADER:
        raise DegenerateData(
            f"{label}: header {header} != {EXPECTED_HEADER}")
    inputs, disps, reps = [], [], []
    for row_num, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise DegenerateData(f"{label}: row {row_num} has {len(row)} fields")
        try:
            inputs.append(float(row[0]))
            disps.append(float(row[1]))
            reps.append(int(row[2]))
        except ValueError as exc:
            raise DegenerateData(f"{label}: row {row_num}: {exc}") from exc
    if not inputs:
        raise DegenerateData(f"{label}: no data rows")
    return CharacterizationSet(label, np.asarray(inputs), np.asarray(disps),
                               np.asarray(reps, dtype=int))


def bundled_dataset(name: str) -> CharacterizationSet:
    """Load one of the packaged characterisation logs by stem name."""
    ref = resources.files("fiberctl").joinpath(f"data/{name}.csv")
    with ref.open("r", encoding="utf-8") as fh:
        return parse_characterization_csv(fh, name=name)


@dataclass(frozen=True)
class FitReport:
    gain: float
    r_squared: float
    rms_residual: float
    n_used: int
    input_max: float | None

    def to_dict(self) -> dict:
        return {"gain": self.gain, "r_squared": self.r_squared,
                "rms_residual": self.rms_residual, "n_used": self.n_used,
                "input_max": self.input_max}


def fit_gain(dataset: CharacterizationSet,
             input_max: float | None = None) -> FitReport:
    """Origin-constrained least-squares slope of displacement vs input.

    The physical models pass through the origin (no drive, no deflection),
    so the fit is y = k x with k = sum(xy) / sum(x^2). r^2 is reported
    against the mean-centred total variance of the rows used.
    """
    x = dataset.inputs
    y = dataset.displacements
    if input_max is not None:
        keep = x <= input_max + 1e-12
        x, y = x[keep], y[keep]
    if len(x) < 2 or float(np.sum(x * x)) < 1e-12:
        raise DegenerateData("not enough informative rows for a slope fit")
    k = float(np.sum(x * y) / np.sum(x * x))
    resid = y - k * x
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return FitReport(k, r2, float(np.sqrt(ss_res / len(x))), len(x), input_max)


def fit_alpha(dataset: CharacterizationSet,
              linear_max: float = 0.8) -> FitReport:
    """Deflection-per-watt gain from the linear-regime rows only."""
    return fit_gain(dataset, input_max=linear_max)


@dataclass(frozen=True)
class LinearityReport:
    gain: float
    linear_max: float
    max_rel_dev_linear: float
    max_rel_dev_above: float | None
    is_linear: bool
    has_superlinear_tail: bool

    def to_dict(self) -> dict:
        return {"gain": self.gain, "linear_max": self.linear_max,
                "max_rel_dev_linear": self.max_rel_dev_linear,
                "max_rel_dev_above": self.max_rel_dev_above,
                "is_linear": self.is_linear,
                "has_superlinear_tail": self.has_superlinear_tail}


def check_linearity(dataset: CharacterizationSet, linear_max: float = 0.8,
                    rel_tol: float = 0.05) -> LinearityReport:
    """Test proportionality below linear_max and flag departure above it.

    Relative deviation is |measured - k*x| / (k*x) per nonzero-input row.
    """
    report = fit_alpha(dataset, linear_max)
    k = report.gain
    x, y = dataset.inputs, dataset.displacements
    nz = x > 1e-12
    rel = np.abs(y[nz] - k * x[nz]) / (k * x[nz])
    below = x[nz] <= linear_max + 1e-12
    dev_lin = float(rel[below].max()) if below.any() else 0.0
    dev_above = float(rel[~below].max()) if (~below).any() else None
    return LinearityReport(
        gain=k, linear_max=linear_max, max_rel_dev_linear=dev_lin,
        max_rel_dev_above=dev_above,
        is_linear=dev_lin <= rel_tol,
        has_superlinear_tail=dev_above is not None and dev_above > rel_tol)


def fit_moment_arm(geom: FiberGeometry,
                   dataset: CharacterizationSet) -> FitReport:
    """Effective tendon moment arm from a pull/displacement log."""
    d_eff, rms = calibrate_moment_arm(geom, dataset.inputs,
                                      dataset.displacements)
    keep = dataset.inputs > 0.0
    x, y = dataset.inputs[keep], dataset.displacements[keep]
    pred = np.array([lateral_displacement(geom, p / d_eff) for p in x])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitReport(d_eff, r2, rms, int(keep.sum()), None)
