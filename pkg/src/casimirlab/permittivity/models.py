"""Closed-form dielectric functions and the model objects built on them.

All frequencies are photon energies in eV.  ``xi`` denotes a point on the
imaginary frequency axis (omega = i xi), ``omega`` a real frequency.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError, ValidationError

# Zero-frequency conventions used by the Matsubara sum.
DRUDE = "drude"
PLASMA = "plasma"
DIELECTRIC = "dielectric"


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be > 0, got {x!r}")
    return arr


def _scalar_or_array(result, like):
    return float(result) if np.ndim(like) == 0 else result


@dataclass(frozen=True)
class DrudeParams:
    """Plasma frequency and relaxation parameter, both in eV."""

    plasma_frequency: float
    relaxation: float

    def __post_init__(self):
        if not self.plasma_frequency > 0:
            raise ValidationError("plasma frequency must be > 0")
        if not self.relaxation >= 0:
            raise ValidationError("relaxation parameter must be >= 0")


@dataclass(frozen=True)
class Oscillator:
    """One Lorentz term g / (w0^2 - w^2 - i gamma w); strength in eV^2."""

    strength: float
    frequency: float
    width: float

    def __post_init__(self):
        if not self.strength >= 0:
            raise ValidationError("oscillator strength must be >= 0")
        if not self.frequency > 0:
            raise ValidationError("oscillator frequency must be > 0")
        if not self.width >= 0:
            raise ValidationError("oscillator width must be >= 0")


@dataclass(frozen=True)
class PlasmaLikeParams:
    """Dissipationless conduction term plus core-electron oscillators.

    A zero plasma frequency is accepted so that pure oscillator media can be
    described with the same type.
    """

    plasma_frequency: float
    oscillators: Sequence[Oscillator] = ()

    def __post_init__(self):
        if not self.plasma_frequency >= 0:
            raise ValidationError("plasma frequency must be >= 0")
        object.__setattr__(self, "oscillators", tuple(self.oscillators))
        for osc in self.oscillators:
            if not isinstance(osc, Oscillator):
                raise ValidationError("oscillators must be Oscillator instances")


def _oscillator_sum_imag(xi, oscillators):
    total = np.zeros_like(xi)
    for osc in oscillators:
        total = total + osc.strength / (osc.frequency ** 2 + xi ** 2 + osc.width * xi)
    return total


def drude_eps_imag(xi, params):
    """Drude permittivity on the imaginary axis, 1 + wp^2 / (xi (xi + gamma))."""
    x = _positive(xi, "xi")
    wp, g = params.plasma_frequency, params.relaxation
    return _scalar_or_array(1.0 + wp ** 2 / (x * (x + g)), xi)


def drude_im_eps_real(omega, params):
    """Imaginary part of the Drude permittivity on the real axis.

    Used to extend a measured Im eps table below its lowest frequency.
    """
    w = _positive(omega, "omega")
    wp, g = params.plasma_frequency, params.relaxation
    return _scalar_or_array(wp ** 2 * g / (w * (w ** 2 + g ** 2)), omega)


def plasma_like_eps_imag(xi, params):
    x = _positive(xi, "xi")
    out = 1.0 + params.plasma_frequency ** 2 / x ** 2
    out = out + _oscillator_sum_imag(x, params.oscillators)
    return _scalar_or_array(out, xi)


def oscillator_eps_real(omega, params, oscillators=()):
    """Complex Drude-plus-oscillators permittivity at real frequency ``omega``.

    eps(w) = 1 - wp^2 / (w (w + i gamma)) + sum_j g_j / (w_j^2 - w^2 - i gamma_j w)
    """
    w = _positive(omega, "omega").astype(complex)
    out = 1.0 - params.plasma_frequency ** 2 / (w * (w + 1j * params.relaxation))
    for osc in oscillators:
        out = out + osc.strength / (osc.frequency ** 2 - w ** 2 - 1j * osc.width * w)
    return complex(out) if np.ndim(omega) == 0 else out


class PermittivityModel:
    """Something that can evaluate eps(i xi) on arrays of xi in eV.

    ``zero_mode`` tells the Matsubara sum how to treat the xi = 0 term;
    ``None`` means the model cannot be used at finite temperature.
    """

    zero_mode = None
    plasma_frequency = 0.0
    static_permittivity = None
    name = "model"

    def eps_imag(self, xi):
        raise NotImplementedError

    def __call__(self, xi):
        return self.eps_imag(xi)

    def describe(self):
        return {"kind": self.name}


class DrudeModel(PermittivityModel):
    """Drude conduction term, optionally with Lorentz oscillators (Drude-like)."""

    zero_mode = DRUDE
    name = "drude"

    def __init__(self, params, oscillators=()):
        self.params = params
        self.oscillators = tuple(oscillators)
        self.plasma_frequency = params.plasma_frequency

    def eps_imag(self, xi):
        x = _positive(xi, "xi")
        out = 1.0 + self.params.plasma_frequency ** 2 / (x * (x + self.params.relaxation))
        out = out + _oscillator_sum_imag(x, self.oscillators)
        return _scalar_or_array(out, xi)

    def describe(self):
        return {
            "kind": self.name,
            "plasma_frequency_eV": self.params.plasma_frequency,
            "relaxation_eV": self.params.relaxation,
            "oscillators": [vars(o) for o in self.oscillators],
        }


class PlasmaLikeModel(PermittivityModel):
    """Generalized plasma-like permittivity: wp^2/xi^2 plus oscillators."""

    zero_mode = PLASMA
    name = "plasma-like"

    def __init__(self, params):
        self.params = params
        self.plasma_frequency = params.plasma_frequency

    def eps_imag(self, xi):
        return plasma_like_eps_imag(xi, self.params)

    def describe(self):
        return {
            "kind": self.name,
            "plasma_frequency_eV": self.params.plasma_frequency,
            "oscillators": [vars(o) for o in self.params.oscillators],
        }


class ConstantModel(PermittivityModel):
    """Frequency-independent permittivity; eps = 1 is vacuum."""

    zero_mode = DIELECTRIC
    name = "constant"

    def __init__(self, eps=1.0):
        if not eps >= 1.0:
            raise ValidationError("constant permittivity must be >= 1")
        self.eps = float(eps)
        self.static_permittivity = self.eps

    def eps_imag(self, xi):
        x = _positive(xi, "xi")
        return _scalar_or_array(np.full_like(x, self.eps), xi)

    def describe(self):
        return {"kind": self.name, "eps": self.eps}
