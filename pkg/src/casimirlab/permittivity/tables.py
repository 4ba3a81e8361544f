"""Tabulated optical data and its extension to the whole real axis."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ParseError, ValidationError
from .models import DrudeParams, drude_im_eps_real

log = logging.getLogger(__name__)

TAIL_POWER_LAW = "power-law"
TAIL_CUTOFF = "cutoff"
TAIL_EXPONENT_RANGE = (2.0, 5.0)


@dataclass(frozen=True, eq=False)
class OpticalTable:
    """Im eps (and optionally Re eps) on an ascending grid of photon energies.

    Im eps is interpolated linearly in (log omega, log Im eps); segments
    touching a zero value fall back to linear interpolation in Im eps.
    Re eps, which changes sign, is interpolated linearly in log omega.
    """

    omega: np.ndarray
    im_eps: np.ndarray
    re_eps: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        im = np.asarray(self.im_eps, dtype=float)
        if omega.ndim != 1 or omega.size < 2:
            raise ValidationError("optical table needs at least two rows")
        if im.shape != omega.shape:
            raise ValidationError("omega and im_eps lengths differ")
        if np.any(~(omega > 0)):
            raise ValidationError("table frequencies must be > 0")
        if np.any(np.diff(omega) <= 0):
            raise ValidationError("table frequencies must be strictly ascending")
        if np.any(~(im >= 0)):
            raise ValidationError("Im eps must be non-negative")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "im_eps", im)
        if self.re_eps is not None:
            re = np.asarray(self.re_eps, dtype=float)
            if re.shape != omega.shape:
                raise ValidationError("omega and re_eps lengths differ")
            object.__setattr__(self, "re_eps", re)
        for arr in (self.omega, self.im_eps, self.re_eps):
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_nk(cls, omega, n, k, label=""):
        n = np.asarray(n, dtype=float)
        k = np.asarray(k, dtype=float)
        return cls(omega, 2.0 * n * k, n ** 2 - k ** 2, label)

    @property
    def omega_min(self):
        return float(self.omega[0])

    @property
    def omega_max(self):
        return float(self.omega[-1])

    @property
    def has_real_part(self):
        return self.re_eps is not None

    def segment_coefficients(self):
        """Per-segment (log-slope, log-mode) data for Im eps interpolation."""
        lo, hi = self.im_eps[:-1], self.im_eps[1:]
        logmode = (lo > 0) & (hi > 0)
        du = np.diff(np.log(self.omega))
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(logmode, (np.log(hi) - np.log(lo)) / du, 0.0)
        return logmode, slope

    def interp_im(self, omega):
        """Im eps inside the table range; values outside are clipped to the ends."""
        w = np.clip(np.asarray(omega, dtype=float), self.omega[0], self.omega[-1])
        u = np.log(w)
        knots = np.log(self.omega)
        idx = np.clip(np.searchsorted(knots, u, side="right") - 1, 0, knots.size - 2)
        t = (u - knots[idx]) / (knots[idx + 1] - knots[idx])
        lo, hi = self.im_eps[idx], self.im_eps[idx + 1]
        logmode = (lo > 0) & (hi > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = np.exp(np.log(lo) + t * (np.log(hi) - np.log(lo)))
        return np.where(logmode, geo, lo + t * (hi - lo))

    def interp_re(self, omega):
        if self.re_eps is None:
            raise ValidationError("table carries no Re eps column")
        w = np.clip(np.asarray(omega, dtype=float), self.omega[0], self.omega[-1])
        return np.interp(np.log(w), np.log(self.omega), self.re_eps)


def read_optical_table(path, label=None):
    """Read a CSV with header ``omega_eV,n,k`` or ``omega_eV,im_eps[,re_eps]``.

    Lines starting with ``#`` are comments.  Errors carry the file line.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read optical table: {exc}", path) from exc
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if header is None:
            header = [c.lower() for c in cells]
            if header not in (["omega_ev", "n", "k"], ["omega_ev", "im_eps"],
                              ["omega_ev", "im_eps", "re_eps"]):
                raise ParseError(
                    "header must be omega_eV,n,k or omega_eV,im_eps[,re_eps]",
                    path, lineno)
            continue
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(cells)}",
                             path, lineno)
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", path, lineno) from None
        if rows and values[0] <= rows[-1][1][0]:
            raise ParseError("rows must be strictly ascending in omega", path, lineno)
        rows.append((lineno, values))
    if header is None or len(rows) < 2:
        raise ParseError("optical table needs a header and at least two rows", path)
    data = np.array([v for _, v in rows])
    label = path.name if label is None else label
    try:
        if header[1] == "n":
            return OpticalTable.from_nk(data[:, 0], data[:, 1], data[:, 2], label)
        re = data[:, 2] if len(header) == 3 else None
        return OpticalTable(data[:, 0], data[:, 1], re, label)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc


def _fit_tail(table):
    """Power-law exponent s of Im eps ~ omega^-s over the top decade."""
    top = table.omega >= table.omega_max / 10.0
    if np.count_nonzero(top) < 2:
        top = np.zeros_like(top)
        top[-2:] = True
    w, im = table.omega[top], table.im_eps[top]
    if np.any(im <= 0):
        return TAIL_EXPONENT_RANGE[1], 0.0
    slope = np.polyfit(np.log(w), np.log(im), 1)[0]
    s = float(np.clip(-slope, *TAIL_EXPONENT_RANGE))
    amplitude = float(table.im_eps[-1] * table.omega_max ** s)
    return s, amplitude


@dataclass(frozen=True, eq=False)
class MergedSpectrum:
    """Optical table extended to (0, inf).

    Below the lowest tabulated frequency Im eps follows the Drude model (or
    vanishes when ``drude`` is None); above the highest it follows a power
    law fitted over the top decade, or vanishes with ``tail="cutoff"``.  No
    continuity is enforced at the low junction; the jump is reported.
    """

    table: OpticalTable
    drude: Optional[DrudeParams] = None
    tail: str = TAIL_POWER_LAW
    tail_exponent: float = field(init=False, default=0.0)
    tail_amplitude: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.tail not in (TAIL_POWER_LAW, TAIL_CUTOFF):
            raise ValidationError(f"unknown tail policy {self.tail!r}")
        if self.tail == TAIL_POWER_LAW:
            s, amp = _fit_tail(self.table)
            object.__setattr__(self, "tail_exponent", s)
            object.__setattr__(self, "tail_amplitude", amp)
        jump = self.junction_jump()
        if jump is not None and jump["relative"] > 1e-3:
            log.info("Drude extension meets table at %.6g eV with relative jump %.3g",
                     self.omega_min, jump["relative"])

    @property
    def omega_min(self):
        return self.table.omega_min

    @property
    def omega_max(self):
        return self.table.omega_max

    def junction_jump(self):
        """Im eps(table) - Im eps(Drude) at the lowest tabulated frequency."""
        if self.drude is None:
            return None
        tab = float(self.table.im_eps[0])
        model = drude_im_eps_real(self.omega_min, self.drude)
        rel = abs(tab - model) / max(abs(tab), abs(model)) if (tab or model) else 0.0
        return {"omega_eV": self.omega_min, "table": tab, "drude": model,
                "absolute": tab - model, "relative": rel}

    def im_eps(self, omega):
        """Im eps on the whole positive real axis."""
        w = np.asarray(omega, dtype=float)
        out = self.table.interp_im(w)
        below = w < self.omega_min
        above = w > self.omega_max
        if np.any(below):
            if self.drude is None:
                out = np.where(below, 0.0, out)
            else:
                safe = np.where(below, w, 1.0)
                out = np.where(below, drude_im_eps_real(safe, self.drude), out)
        if np.any(above):
            if self.tail == TAIL_CUTOFF:
                out = np.where(above, 0.0, out)
            else:
                out = np.where(above, self.tail_amplitude * w ** -self.tail_exponent, out)
        return float(out) if np.ndim(omega) == 0 else out

    def describe(self):
        return {
            "table": self.table.label,
            "omega_min_eV": self.omega_min,
            "omega_max_eV": self.omega_max,
            "drude": None if self.drude is None else vars(self.drude),
            "tail": self.tail,
            "tail_exponent": self.tail_exponent if self.tail == TAIL_POWER_LAW else None,
            "junction_jump": self.junction_jump(),
        }

