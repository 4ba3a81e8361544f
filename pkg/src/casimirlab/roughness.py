"""Geometric averaging of the smooth-plate pressure over surface roughness.

Each body is described by (fractional area, height) pairs.  The rough
pressure is the area-weighted average of the smooth pressure over all
combinations of local separations, measured from the zero-roughness levels.
Diffraction-type roughness corrections are not modelled.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Tuple

import numpy as np

from .errors import DomainError, ParseError, ValidationError

AREA_SUM_TOL = 1e-6


def zero_level(pairs):
    """Zero-roughness level H = sum v_i h_i (nm) of (v, h) pairs."""
    v = np.array([p[0] for p in pairs], dtype=float)
    h = np.array([p[1] for p in pairs], dtype=float)
    if v.size == 0:
        raise ValidationError("roughness profile is empty")
    if abs(v.sum() - 1.0) > AREA_SUM_TOL:
        raise ValidationError(f"fractional areas sum to {v.sum():.12g}, not 1")
    return float(np.dot(v, h))


@dataclass(frozen=True)
class RoughnessProfile:
    """Fractional-area / height (nm) pairs of one surface."""

    pairs: Tuple[Tuple[float, float], ...]
    label: str = ""
    zero_level: float = field(init=False)

    def __post_init__(self):
        pairs = tuple((float(v), float(h)) for v, h in self.pairs)
        if any(not v > 0 for v, _ in pairs):
            raise ValidationError("fractional areas must be > 0")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "zero_level", zero_level(pairs))

    @classmethod
    def flat(cls, height=0.0):
        return cls(((1.0, height),), "flat")

    @property
    def fractions(self):
        return np.array([v for v, _ in self.pairs])

    @property
    def heights(self):
        return np.array([h for _, h in self.pairs])

    def offsets(self):
        """H - h_i for every level."""
        return self.zero_level - self.heights


def rough_pressure(a_nm, plate, sphere, smooth: Callable[[float], float]):
    """Area-weighted pressure sum_i sum_j v_j v_i P(a + H_s + H_p - h_j - h_i).

    ``smooth`` maps a separation in nm to a pressure.  It is called once per
    distinct shifted separation.
    """
    w = np.outer(sphere.fractions, plate.fractions)
    shifts = sphere.offsets()[:, None] + plate.offsets()[None, :]
    local = a_nm + shifts
    if np.any(local <= 0):
        j, i = np.argwhere(local <= 0)[0]
        raise DomainError(
            f"shifted separation {local[j, i]:.6g} nm <= 0 for sphere level {j} "
            f"(h={sphere.heights[j]:g} nm) and plate level {i} (h={plate.heights[i]:g} nm)")
    cache = {}
    total = 0.0
    for sep, weight in zip(local.ravel(), w.ravel()):
        key = float(sep)
        if key not in cache:
            cache[key] = float(smooth(key))
        total += weight * cache[key]
    return total


def read_roughness_profile(path, label=None):
    """CSV of ``v,h_nm`` rows with optional header and ``#`` comments."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read roughness profile: {exc}", path) from exc
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if [c.lower() for c in cells] == ["v", "h_nm"]:
            continue
        if len(cells) != 2:
            raise ParseError("expected two columns v,h_nm", path, lineno)
        try:
            pairs.append((float(cells[0]), float(cells[1])))
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", path, lineno) from None
    try:
        return RoughnessProfile(tuple(pairs), path.name if label is None else label)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc
