"""Theory-versus-experiment comparison at chosen confidence levels.

Two views are supported: theoretical bands against experimental crosses,
and theory-minus-experiment differences against confidence intervals
[-Xi(a), Xi(a)].  Half-widths are given at 95% and rescaled to 70% either
by 0.95/0.70 (uniformly distributed errors) or by a factor 2 (normal).
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from .errors import AlignmentError, ConfigurationError, ParseError, ValidationError

UNIFORM = "uniform"
NORMAL = "normal"
LEVELS = (0.95, 0.70)
UNIFORM_FACTOR = 0.95 / 0.70
NORMAL_FACTOR = 2.0
DEFAULT_BAND_FRACTION = 0.005
DEFAULT_DELTA_A_NM = 0.6
RSS = "rss"
LINEAR = "linear-sum"


@dataclass(frozen=True)
class ConfidenceSpec:
    level: float = 0.95
    distribution: str = NORMAL

    def __post_init__(self):
        level = _canonical_level(self.level)
        object.__setattr__(self, "level", level)
        if self.distribution not in (UNIFORM, NORMAL):
            raise ConfigurationError(f"unknown error distribution {self.distribution!r}")

    @property
    def key(self):
        return f"{self.level:.2f}"

    @property
    def factor(self):
        """Xi_0.95 / Xi_level."""
        if self.level == 0.95:
            return 1.0
        return UNIFORM_FACTOR if self.distribution == UNIFORM else NORMAL_FACTOR


def _canonical_level(level):
    for known in LEVELS:
        if math.isclose(float(level), known, abs_tol=1e-12):
            return known
    raise ConfigurationError(f"unsupported confidence level {level!r}; use 0.95 or 0.70")


def scale_half_width(xi95, spec):
    """Half-width at ``spec.level`` from the 95% half-width."""
    xi95 = np.asarray(xi95, dtype=float)
    if np.any(~(xi95 > 0)):
        raise ValidationError("95% half-width must be > 0")
    out = xi95 / spec.factor
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ExperimentDataset:
    """Mean measured pressures with 95% half-widths on ascending separations."""

    a_nm: np.ndarray
    pressure_mPa: np.ndarray
    xi95_mPa: np.ndarray
    temperature_K: Optional[float] = None
    delta_a_nm: float = DEFAULT_DELTA_A_NM
    provenance: str = ""

    def __post_init__(self):
        a = np.asarray(self.a_nm, dtype=float)
        p = np.asarray(self.pressure_mPa, dtype=float)
        x = np.asarray(self.xi95_mPa, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValidationError("experiment dataset is empty")
        if p.shape != a.shape or x.shape != a.shape:
            raise ValidationError("experiment columns have different lengths")
        if np.any(np.diff(a) <= 0):
            raise ValidationError("experiment separations must be strictly ascending")
        if np.any(~(x > 0)):
            raise ValidationError("experimental half-widths must be > 0")
        if not self.delta_a_nm >= 0:
            raise ValidationError("delta_a must be >= 0")
        for name, arr in (("a_nm", a), ("pressure_mPa", p), ("xi95_mPa", x)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.a_nm.size


def read_experiment(path):
    """Parse ``a_nm,P_mPa,Xi95_mPa`` rows.

    ``#`` lines are comments; ``# temperature_K: 300`` or
    ``# delta_a_nm = 0.6`` style lines set metadata.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read experiment file: {exc}", path) from exc
    meta = {}
    rows = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            for sep in (":", "="):
                if sep in body:
                    key, _, value = body.partition(sep)
                    key = key.strip()
                    if key in ("temperature_K", "delta_a_nm"):
                        try:
                            meta[key] = float(value)
                        except ValueError:
                            raise ParseError(f"bad metadata value for {key}", path, lineno) from None
                    break
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if not header_seen:
            header_seen = True
            if [c.lower() for c in cells] == ["a_nm", "p_mpa", "xi95_mpa"]:
                continue
            raise ParseError("header must be a_nm,P_mPa,Xi95_mPa", path, lineno)
        if len(cells) != 3:
            raise ParseError(f"expected 3 columns, got {len(cells)}", path, lineno)
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", path, lineno) from None
        if len(rows) > 1 and rows[-1][0] <= rows[-2][0]:
            raise ParseError("separations must be strictly ascending", path, lineno)
    if not rows:
        raise ParseError("experiment file has no data rows", path)
    data = np.array(rows)
    try:
        return ExperimentDataset(data[:, 0], data[:, 1], data[:, 2],
                                 meta.get("temperature_K"),
                                 meta.get("delta_a_nm", DEFAULT_DELTA_A_NM), path.name)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc


def _aligned(theory_a, dataset, atol=1e-9):
    theory_a = np.asarray(theory_a, dtype=float)
    if theory_a.shape == dataset.a_nm.shape and np.allclose(theory_a, dataset.a_nm, rtol=0, atol=atol):
        return
    missing = [float(a) for a in dataset.a_nm if not np.any(np.isclose(theory_a, a, rtol=0, atol=atol))]
    extra = [float(a) for a in theory_a if not np.any(np.isclose(dataset.a_nm, a, rtol=0, atol=atol))]
    raise AlignmentError(
        f"theory and experiment separations differ; unmatched experiment separations "
        f"{missing}, unmatched theory separations {extra}", unmatched=missing + extra)


def combine_half_widths(xi_exp, theory_half, rule=RSS):
    if rule == RSS:
        return np.hypot(xi_exp, theory_half)
    if rule == LINEAR:
        return xi_exp + theory_half
    raise ConfigurationError(f"unknown combination rule {rule!r}")


def _interp_linear(x, xp, fp):
    """Piecewise-linear interpolation with linear extrapolation at both ends."""
    if xp.size == 1:
        return np.full_like(np.asarray(x, dtype=float), fp[0])
    out = np.interp(x, xp, fp)
    lo_slope = (fp[1] - fp[0]) / (xp[1] - xp[0])
    hi_slope = (fp[-1] - fp[-2]) / (xp[-1] - xp[-2])
    out = np.where(x < xp[0], fp[0] + (x - xp[0]) * lo_slope, out)
    return np.where(x > xp[-1], fp[-1] + (x - xp[-1]) * hi_slope, out)


@dataclass(frozen=True)
class OverlapRecord:
    a_nm: float
    band_low: float
    band_high: float
    cross_low: float
    cross_high: float
    overlap: bool


def band_cross_overlap(theory_a, theory_p, dataset, spec=ConfidenceSpec(),
                       band_fraction=DEFAULT_BAND_FRACTION, delta_a_nm=None):
    """Does each experimental cross touch the theoretical band?

    The band is P(a) +/- band_fraction |P(a)| and the cross arms are the
    95% half-widths, both rescaled to ``spec.level``.  The band is swept
    over [a - delta_a, a + delta_a] using linear interpolation of the
    theory between grid points.  Intervals are closed, so touching counts
    as overlap.
    """
    theory_a = np.asarray(theory_a, dtype=float)
    theory_p = np.asarray(theory_p, dtype=float)
    _aligned(theory_a, dataset)
    da = (dataset.delta_a_nm if delta_a_nm is None else delta_a_nm) / spec.factor
    frac = band_fraction / spec.factor
    arms = dataset.xi95_mPa / spec.factor
    records = []
    for a, p_exp, arm in zip(dataset.a_nm, dataset.pressure_mPa, arms):
        inside = theory_a[(theory_a > a - da) & (theory_a < a + da)]
        xs = np.concatenate([[a - da, a + da], inside])
        ps = _interp_linear(xs, theory_a, theory_p)
        lo = float(np.min(ps - frac * np.abs(ps)))
        hi = float(np.max(ps + frac * np.abs(ps)))
        c_lo, c_hi = p_exp - arm, p_exp + arm
        records.append(OverlapRecord(float(a), lo, hi, float(c_lo), float(c_hi),
                                     bool(c_lo <= hi and lo <= c_hi)))
    return records


def exclusion_intervals(a_nm, outside):
    """Maximal runs of consecutive outside flags as (a_first, a_last) pairs."""
    runs = []
    start = None
    for i, flag in enumerate(outside):
        if flag and start is None:
            start = i
        if not flag and start is not None:
            runs.append((float(a_nm[start]), float(a_nm[i - 1])))
            start = None
    if start is not None:
        runs.append((float(a_nm[start]), float(a_nm[len(outside) - 1])))
    return runs


@dataclass(frozen=True)
class LevelResult:
    spec: ConfidenceSpec
    half_width: np.ndarray
    outside: np.ndarray
    intervals: List[Tuple[float, float]]

    @property
    def verdict(self):
        return "excluded" if np.any(self.outside) else "consistent"


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    a_nm: np.ndarray
    theory_mPa: np.ndarray
    experiment_mPa: np.ndarray
    difference_mPa: np.ndarray
    levels: Dict[str, LevelResult]
    band_fraction: float
    combination: str
    model_tag: str = ""
    metadata: dict = field(default_factory=dict)

    def records(self):
        rows = []
        for i, a in enumerate(self.a_nm):
            row = {"a_nm": float(a), "theory_mPa": float(self.theory_mPa[i]),
                   "experiment_mPa": float(self.experiment_mPa[i]),
                   "difference_mPa": float(self.difference_mPa[i])}
            for key, lev in self.levels.items():
                row[f"xi_{key}_mPa"] = float(lev.half_width[i])
                row[f"outside_{key}"] = bool(lev.outside[i])
            rows.append(row)
        return rows

    def to_dict(self):
        return {
            "model": self.model_tag,
            "band_fraction": self.band_fraction,
            "combination": self.combination,
            "levels": {
                key: {"level": lev.spec.level, "distribution": lev.spec.distribution,
                      "verdict": lev.verdict,
                      "exclusion_intervals_nm": [list(iv) for iv in lev.intervals],
                      "points_outside": int(np.count_nonzero(lev.outside))}
                for key, lev in self.levels.items()
            },
            "points": self.records(),
            **({"metadata": self.metadata} if self.metadata else {}),
        }


def difference_analysis(theory_p, dataset, specs=(ConfidenceSpec(0.95), ConfidenceSpec(0.70)),
                        band_fraction=DEFAULT_BAND_FRACTION, combination=RSS,
                        theory_a=None, model_tag=""):
    """Differences P_theory - P_expt against +/- Xi at each requested level.

    The 95% half-width combines the experimental Xi95 with the theoretical
    band ``band_fraction * |P_theory|`` (root-sum-square by default) and is
    then rescaled per level.  A point is outside only if |difference| > Xi
    strictly.
    """
    if len(dataset) == 0:
        raise ValidationError("experiment dataset is empty")
    theory_p = np.asarray(theory_p, dtype=float)
    if theory_a is not None:
        _aligned(theory_a, dataset)
    if theory_p.shape != dataset.a_nm.shape:
        raise AlignmentError(
            f"{theory_p.size} theory values for {len(dataset)} experimental separations")
    if not band_fraction >= 0:
        raise ValidationError("band fraction must be >= 0")
    diff = theory_p - dataset.pressure_mPa
    xi95 = combine_half_widths(dataset.xi95_mPa, band_fraction * np.abs(theory_p), combination)
    levels = {}
    for spec in specs:
        xi = xi95 / spec.factor
        outside = np.abs(diff) > xi
        levels[spec.key] = LevelResult(spec, xi, outside, exclusion_intervals(dataset.a_nm, outside))
    return ComparisonReport(dataset.a_nm, theory_p, dataset.pressure_mPa, diff, levels,
                            band_fraction, combination, model_tag)


@dataclass(frozen=True)
class NormalityDiagnostic:
    n: int
    skewness: float
    excess_kurtosis: float
    normal_compatible: bool


def normality_probe(differences, window=None):
    """Skewness and excess kurtosis of differences about their mean.

    With ``window`` set, a centred running mean of that many points is
    subtracted instead of the global mean.
    """
    d = np.asarray(differences, dtype=float)
    if d.size < 20:
        raise ValidationError(f"normality probe needs >= 20 points, got {d.size}")
    if window is None:
        resid = d - d.mean()
    else:
        kernel = np.ones(int(window)) / int(window)
        padded = np.pad(d, (int(window) // 2, (int(window) - 1) // 2), mode="edge")
        resid = d - np.convolve(padded, kernel, mode="valid")
    if np.allclose(resid, 0.0, atol=1e-300) or np.std(resid) == 0:
        raise ValidationError("differences have zero variance")
    skew = float(stats.skew(resid, bias=False))
    kurt = float(stats.kurtosis(resid, fisher=True, bias=False))
    return NormalityDiagnostic(d.size, skew, kurt, abs(skew) < 0.5 and abs(kurt) < 1.0)


@dataclass(frozen=True)
class PatchCheck:
    patch_area_um2: float
    effective_area_um2: float
    small_patch_regime: bool


def patch_area_check(grain_diameter_nm, sphere_radius_um, a_nm, threshold=0.01):
    """Grain patch area pi D^2 / 4 against the effective area 2 pi R a."""
    d_um = float(grain_diameter_nm) * 1e-3
    a_um = float(a_nm) * 1e-3
    r_um = float(sphere_radius_um)
    if d_um < 0 or not r_um > 0 or not a_um > 0:
        raise ValidationError("need D >= 0, R > 0 and a > 0")
    s_p = math.pi * d_um ** 2 / 4.0
    s_eff = 2.0 * math.pi * r_um * a_um
    return PatchCheck(s_p, s_eff, s_p < threshold * s_eff)
