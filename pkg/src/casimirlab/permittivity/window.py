"""Window-function form of the Kramers-Kronig relation.

Multiplying eps - 1 by an analytic window f(omega) with f(-omega*) = f*(omega)
gives

    eps(i xi) = 1 + 2 / (pi f(i xi)) * integral_0^inf omega / (omega^2 + xi^2)
                * {Im f(omega) [Re eps(omega) - 1] + Re f(omega) Im eps(omega)} d omega

which uses both Re eps and Im eps, and breaks down near the roots of
f(i xi).  The breakdown is detected and raised, never clamped.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..errors import AccuracyError, DomainError, NearRootError, ValidationError
from .kk import MAX_REFINE, _TableRule
from .models import PermittivityModel, _positive

DEFAULT_GUARD = 1e-3
_POLE_TOL = 1e-12


@dataclass(frozen=True)
class WindowParams:
    """f(z) = z^(2p+1) [(z - Omega)^-(2q+1) + (z + Omega*)^-(2q+1)]."""

    omega_c: complex
    p: int
    q: int

    def __post_init__(self):
        object.__setattr__(self, "omega_c", complex(self.omega_c))
        if not self.omega_c.imag < 0:
            raise ValidationError("window centre must have negative imaginary part")
        if int(self.p) != self.p or int(self.q) != self.q:
            raise ValidationError("window exponents must be integers")
        if self.p < 0 or self.q < 0:
            raise ValidationError("window exponents must be non-negative")
        if not self.p < self.q:
            raise ValidationError("window exponents must satisfy p < q")


def window_function(z, params):
    """Evaluate the window at complex photon energy ``z`` (eV)."""
    z = np.asarray(z, dtype=complex)
    omega = params.omega_c
    d1 = z - omega
    d2 = z + omega.conjugate()
    scale = max(1.0, abs(omega))
    if np.any(np.abs(d1) <= _POLE_TOL * scale) or np.any(np.abs(d2) <= _POLE_TOL * scale):
        raise DomainError(f"window evaluated at a pole (Omega={omega})")
    n = 2 * params.q + 1
    out = z ** (2 * params.p + 1) * (d1 ** -n + d2 ** -n)
    return complex(out) if out.ndim == 0 else out


def window_on_imaginary_axis(xi, params):
    """f(i xi), which is real for real xi."""
    return np.real(window_function(1j * np.asarray(xi, dtype=float), params))


def find_window_roots(params, xi_range, samples=4000):
    """Sign changes of f(i xi) on ``xi_range`` refined to better than 1e-6 eV."""
    lo, hi = (float(v) for v in xi_range)
    if not (0 < lo < hi and np.isfinite(hi)):
        raise DomainError(f"xi range must be positive and finite, got {xi_range!r}")
    grid = np.geomspace(lo, hi, samples)
    vals = window_on_imaginary_axis(grid, params)
    roots = []
    for i in np.flatnonzero(vals == 0.0):
        roots.append(float(grid[i]))
    for i in np.flatnonzero(vals[:-1] * vals[1:] < 0):
        r = brentq(lambda x: float(window_on_imaginary_axis(x, params)),
                   grid[i], grid[i + 1], xtol=1e-12, rtol=4 * np.finfo(float).eps)
        roots.append(float(r))
    return sorted(roots)


def window_guard_threshold(params, xi_range, guard=DEFAULT_GUARD, samples=4000):
    """``guard`` times the largest |f(i xi)| over ``xi_range``."""
    grid = np.geomspace(float(xi_range[0]), float(xi_range[1]), samples)
    return guard * float(np.max(np.abs(window_on_imaginary_axis(grid, params))))


class WindowedKK:
    """Windowed dispersion relation bound to one optical table.

    The integral runs over the tabulated window only.  ``guard_range``
    defaults to the table's frequency span and fixes the reference maximum
    of |f(i xi)| for the near-root guard.  With ``bypass=True`` the window
    is replaced by f = 1, which reduces to the plain transform of the table.
    """

    def __init__(self, table, params, guard=DEFAULT_GUARD, guard_range=None,
                 rtol=1e-9, bypass=False):
        if not bypass and not table.has_real_part:
            raise ValidationError("windowed transform needs Re eps in the table")
        self.table = table
        self.params = params
        self.bypass = bypass
        self.rtol = rtol
        self.guard = guard
        if guard_range is None:
            guard_range = (table.omega_min, table.omega_max)
        self.guard_range = tuple(float(v) for v in guard_range)
        self.threshold = 0.0 if bypass else window_guard_threshold(params, self.guard_range, guard)
        self._rules = {}

    def _numerator(self, omega, im, re):
        if self.bypass:
            return omega ** 2 * im
        f = window_function(omega.astype(complex), self.params)
        return omega ** 2 * (f.imag * (re - 1.0) + f.real * im)

    def _rule(self, refine):
        if refine not in self._rules:
            self._rules[refine] = _TableRule(self.table, refine, self._numerator)
        return self._rules[refine]

    def window_at(self, xi):
        if self.bypass:
            return np.ones_like(np.asarray(xi, dtype=float))
        return window_on_imaginary_axis(xi, self.params)

    def check(self, xi):
        """Raise :class:`NearRootError` for the first xi inside the guard band."""
        x = np.atleast_1d(np.asarray(xi, dtype=float))
        fx = np.atleast_1d(self.window_at(x))
        bad = np.flatnonzero(~(np.abs(fx) >= self.threshold) | (fx == 0.0))
        if bad.size:
            i = int(bad[0])
            raise NearRootError(
                f"|f(i xi)| = {abs(fx[i]):.3g} at xi = {x[i]:.6g} eV is below the "
                f"guard threshold {self.threshold:.3g}",
                xi=float(x[i]), window_value=float(fx[i]), threshold=self.threshold)
        return fx

    def evaluate(self, xi):
        x = np.atleast_1d(_positive(xi, "xi")).astype(float).ravel()
        fx = self.check(x)
        pending = np.arange(x.size)
        total = np.zeros(x.size)
        for refine in range(MAX_REFINE + 1):
            val, err, scale = self._rule(refine).integrate(x[pending])
            total[pending] = val
            ok = err <= self.rtol * scale
            pending = pending[~ok]
            if pending.size == 0:
                break
        else:
            raise AccuracyError(
                f"windowed integral at xi={x[pending[0]]:.6g} eV did not reach "
                f"rtol={self.rtol:g}", estimate=1.0 + 2.0 / (np.pi * fx) * total)
        return 1.0 + 2.0 / (np.pi * fx) * total


def windowed_kk(table, params, xi, guard=DEFAULT_GUARD, guard_range=None,
                bypass=False, rtol=1e-9):
    """eps(i xi) from Re eps and Im eps on the table window.

    Raises :class:`NearRootError` when |f(i xi)| is below ``guard`` times
    its maximum over ``guard_range``.  Negative or sub-unity results are
    returned as computed.
    """
    out = WindowedKK(table, params, guard, guard_range, rtol, bypass).evaluate(xi)
    return float(out[0]) if np.ndim(xi) == 0 else out.reshape(np.shape(xi))


class WindowedModel(PermittivityModel):
    """eps(i xi) from the windowed relation; unusable at finite temperature."""

    name = "windowed-kk"

    def __init__(self, table, params, guard=DEFAULT_GUARD, guard_range=None, rtol=1e-9):
        self.engine = WindowedKK(table, params, guard, guard_range, rtol)

    def eps_imag(self, xi):
        out = self.engine.evaluate(xi)
        return float(out[0]) if np.ndim(xi) == 0 else out.reshape(np.shape(xi))

    def describe(self):
        p = self.engine.params
        return {"kind": self.name, "table": self.engine.table.label,
                "omega_c_eV": [p.omega_c.real, p.omega_c.imag], "p": p.p, "q": p.q,
                "guard": self.engine.guard}
