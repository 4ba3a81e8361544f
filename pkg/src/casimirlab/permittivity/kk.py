"""Kramers-Kronig transform of Im eps(omega) to eps(i xi).

eps(i xi) = 1 + (2/pi) * integral_0^inf omega Im eps(omega) / (xi^2 + omega^2) d omega

The tabulated part is integrated in u = log(omega) with a composite
Gauss-Kronrod rule whose panels are the table segments, so the
piecewise-power-law interpolant is smooth on every panel.  Panels are
uniformly subdivided until the Kronrod error estimate meets the tolerance.
The Drude extension below the table and the power-law tail above it are
integrated in closed form.
"""

import numpy as np
from scipy.special import hyp2f1

from ..errors import AccuracyError
from ..quadrature import NODES, kronrod_panels
from .models import PermittivityModel, DRUDE, _positive
from .tables import MergedSpectrum, OpticalTable, TAIL_CUTOFF, TAIL_POWER_LAW

MAX_REFINE = 6
_CHUNK_CELLS = 600_000


def _low_drude_part(xi, w_min, params):
    """integral_0^w_min omega Im eps_Drude / (xi^2 + omega^2) d omega, exact."""
    wp2, g = params.plasma_frequency ** 2, params.relaxation
    if g == 0.0:
        return np.zeros_like(xi)
    near = np.abs(xi - g) < 1e-7 * g
    xs = np.where(near, 2.0 * g, xi)
    generic = (np.arctan(w_min / g) / g - np.arctan(w_min / xs) / xs) / (xs ** 2 - g ** 2)
    # xi -> gamma limit of the divided difference
    limit = (w_min / (g * (g ** 2 + w_min ** 2)) + np.arctan(w_min / g) / g ** 2) / (2.0 * g)
    return wp2 * g * np.where(near, limit, generic)


def _tail_part(xi, spectrum):
    """integral_W^inf omega * A omega^-s / (xi^2 + omega^2) d omega via 2F1."""
    if spectrum.tail != TAIL_POWER_LAW or spectrum.tail_amplitude == 0.0:
        return np.zeros_like(xi)
    s = spectrum.tail_exponent
    w = spectrum.omega_max
    z = -(xi / w) ** 2
    return spectrum.tail_amplitude * w ** -s / s * hyp2f1(1.0, s / 2.0, s / 2.0 + 1.0, z)


def kk_numerator(omega, im, re):
    return omega ** 2 * im


class _TableRule:
    """Precomputed nodes of the composite rule at one refinement level.

    ``numerator(omega, im_eps, re_eps)`` gives the xi-independent factor of
    the integrand in u = log(omega); the rule integrates
    numerator / (xi^2 + omega^2) du over the table window.
    """

    def __init__(self, table, refine, numerator=kk_numerator):
        m = 2 ** refine
        knots = np.log(table.omega)
        du = np.diff(knots)
        logmode, slope = table.segment_coefficients()
        lo, hi = table.im_eps[:-1], table.im_eps[1:]
        # panel-relative positions of the Kronrod nodes of each sub-panel
        t = ((np.arange(m)[:, None] + 0.5 * (NODES[None, :] + 1.0)) / m).ravel()
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = np.exp(np.log(lo)[:, None] + t[None, :] * (slope * du)[:, None])
        lin = lo[:, None] + t[None, :] * (hi - lo)[:, None]
        im = np.where(logmode[:, None], geo, lin)
        re = None
        if table.re_eps is not None:
            rlo, rhi = table.re_eps[:-1], table.re_eps[1:]
            re = rlo[:, None] + t[None, :] * (rhi - rlo)[:, None]
        omega = np.exp(knots[:-1, None] + du[:, None] * t[None, :])
        self.weight = numerator(omega, im, re).reshape(-1, 21)
        self.omega2 = (omega ** 2).reshape(-1, 21)
        edges = knots[:-1, None] + du[:, None] * (np.arange(m + 1) / m)[None, :]
        self.a = edges[:, :-1].ravel()
        self.b = edges[:, 1:].ravel()

    def integrate(self, xi):
        """Integral over the table window for each xi.

        Returns the values, their error estimates and the sum of absolute
        panel contributions (the scale used for relative tolerances).
        """
        xi = np.asarray(xi, dtype=float)
        values = np.empty(xi.size)
        errors = np.empty(xi.size)
        scale = np.empty(xi.size)
        per = max(1, _CHUNK_CELLS // self.weight.size)
        for start in range(0, xi.size, per):
            x2 = xi[start:start + per, None, None] ** 2
            f = self.weight[None] / (x2 + self.omega2[None])
            k = f.shape[0]
            v, e = kronrod_panels(np.tile(self.a, k), np.tile(self.b, k), f.reshape(-1, 21))
            values[start:start + k] = v.reshape(k, -1).sum(axis=1)
            errors[start:start + k] = e.reshape(k, -1).sum(axis=1)
            scale[start:start + k] = np.abs(v).reshape(k, -1).sum(axis=1)
        return values, errors, scale


class KKIntegrator:
    """Reusable Kramers-Kronig evaluator for one extended spectrum."""

    def __init__(self, spectrum, rtol=1e-9):
        if isinstance(spectrum, OpticalTable):
            spectrum = MergedSpectrum(spectrum, None, TAIL_CUTOFF)
        self.spectrum = spectrum
        self.rtol = rtol
        self._rules = {}

    def _rule(self, refine):
        if refine not in self._rules:
            self._rules[refine] = _TableRule(self.spectrum.table, refine)
        return self._rules[refine]

    def evaluate(self, xi):
        """eps(i xi) and an absolute error estimate, both arrays."""
        x = np.atleast_1d(_positive(xi, "xi")).astype(float).ravel()
        sp = self.spectrum
        fixed = _tail_part(x, sp)
        if sp.drude is not None:
            fixed = fixed + _low_drude_part(x, sp.omega_min, sp.drude)
        pending = np.arange(x.size)
        table = np.zeros(x.size)
        error = np.zeros(x.size)
        for refine in range(MAX_REFINE + 1):
            val, err, scale = self._rule(refine).integrate(x[pending])
            table[pending] = val
            error[pending] = err
            ok = err <= self.rtol * (scale + np.abs(fixed[pending]))
            pending = pending[~ok]
            if pending.size == 0:
                break
        else:
            eps = 1.0 + 2.0 / np.pi * (table + fixed)
            bad = pending[0]
            raise AccuracyError(
                f"Kramers-Kronig integral at xi={x[bad]:.6g} eV did not reach "
                f"rtol={self.rtol:g}", estimate=eps, error=2.0 / np.pi * error)
        eps = 1.0 + 2.0 / np.pi * (table + fixed)
        return eps, 2.0 / np.pi * error


def kk_transform(spectrum, xi, rtol=1e-9):
    """eps(i xi) from Im eps on the real axis; scalar in, scalar out.

    ``spectrum`` is a :class:`MergedSpectrum`, or a bare
    :class:`OpticalTable` which is then used without any extension.
    """
    eps, _ = KKIntegrator(spectrum, rtol).evaluate(xi)
    return float(eps[0]) if np.ndim(xi) == 0 else eps.reshape(np.shape(xi))


class TabulatedModel(PermittivityModel):
    """eps(i xi) obtained from an extended optical table by Kramers-Kronig."""

    name = "tabulated-kk"

    def __init__(self, spectrum, rtol=1e-9):
        self.integrator = KKIntegrator(spectrum, rtol)
        self.spectrum = self.integrator.spectrum
        if self.spectrum.drude is not None:
            self.zero_mode = DRUDE
            self.plasma_frequency = self.spectrum.drude.plasma_frequency

    def eps_imag(self, xi):
        eps, _ = self.integrator.evaluate(xi)
        return float(eps[0]) if np.ndim(xi) == 0 else eps.reshape(np.shape(xi))

    @property
    def junction_jump(self):
        return self.spectrum.junction_jump()

    def describe(self):
        return {"kind": self.name, **self.spectrum.describe()}
