"""Casimir pressure between two identical parallel plates (Lifshitz theory).

With q = (k_perp^2 + xi^2/c^2)^(1/2) and the substitutions y = 2 a q,
zeta = 2 a xi / c the zero-temperature pressure becomes

    P(a) = -hbar c / (32 pi^2 a^4) * int_0^inf d zeta int_zeta^inf dy
           y^2 sum_alpha r_alpha^2 e^-y / (1 - r_alpha^2 e^-y)

and at temperature T the zeta integral is replaced by a Matsubara sum with
spacing 2 a (2 pi k_B T / hbar) / c, the zero-frequency term taking half
weight.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constants import C, HBAR, HBAR_EV, K_B, K_B_EV, MPA, NM
from .errors import AccuracyError, CasimirError, ConfigurationError, DomainError, ValidationError
from .permittivity.models import DIELECTRIC, DRUDE, PLASMA
from .quadrature import integrate_batch


@dataclass(frozen=True)
class QuadratureSettings:
    """Numerical knobs of the pressure kernel.

    ``xi_cutoff`` is the upper limit of the scaled frequency 2 a xi / c,
    i.e. a multiple of c / 2a.  The Matsubara sum stops once three
    consecutive terms are below ``matsubara_rtol`` of the running total
    and at least ``matsubara_min_terms`` terms were added.
    """

    rtol_inner: float = 1e-7
    rtol_outer: float = 1e-6
    y_max: float = 80.0
    xi_cutoff: float = 50.0
    matsubara_rtol: float = 1e-9
    matsubara_min_terms: int = 50
    workers: int = 1

    def __post_init__(self):
        for name in ("rtol_inner", "rtol_outer"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValidationError(f"{name} must lie in (0, 1e-2], got {v}")
        if not self.y_max >= 40:
            raise ValidationError("y_max must be >= 40")
        if not self.xi_cutoff > 0:
            raise ValidationError("xi_cutoff must be > 0")
        if not 0 < self.matsubara_rtol < 1:
            raise ValidationError("matsubara_rtol must lie in (0, 1)")
        if self.matsubara_min_terms < 1 or self.workers < 1:
            raise ValidationError("matsubara_min_terms and workers must be >= 1")

    def halved(self):
        return QuadratureSettings(self.rtol_inner / 2, self.rtol_outer / 2, self.y_max,
                                  self.xi_cutoff, self.matsubara_rtol,
                                  self.matsubara_min_terms, self.workers)


@dataclass(frozen=True)
class PressurePoint:
    separation_nm: float
    pressure_mPa: float
    error_mPa: float
    temperature_K: float = 0.0
    terms: int = 0


def reflection_coefficients(xi, k_perp, eps):
    """(r_TM, r_TE) at imaginary frequency ``xi`` (eV) and k_perp (1/m).

    Written in the cancellation-free forms
    r_TM = (eps-1)((eps+1) q^2 - xi^2/c^2) / (eps q + k)^2 and
    r_TE = -(eps-1)(xi/c)^2 / (q + k)^2.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(~(xi > 0)):
        raise DomainError("xi must be > 0")
    if np.any(~(np.asarray(k_perp) >= 0)):
        raise DomainError("k_perp must be >= 0")
    if np.any(~(np.asarray(eps) >= 1)):
        raise DomainError("reflection coefficients need eps >= 1")
    kc = xi / HBAR_EV / C
    return _reflection(np.sqrt(np.asarray(k_perp, dtype=float) ** 2 + kc ** 2), kc, eps)


def _reflection(q, kc, eps):
    """Reflection amplitudes in any consistent units of wavenumber."""
    em1 = eps - 1.0
    k = np.sqrt(q ** 2 + em1 * kc ** 2)
    r_tm = em1 * ((eps + 1.0) * q ** 2 - kc ** 2) / (eps * q + k) ** 2
    r_te = -em1 * kc ** 2 / (q + k) ** 2
    return r_tm, r_te


def _mode_sum(y, r_tm, r_te):
    """y^2 sum_alpha r^2 e^-y / (1 - r^2 e^-y) with a stable denominator."""
    out = np.zeros_like(y)
    with np.errstate(divide="ignore"):
        for r in (r_tm, r_te):
            r2 = r * r
            x = np.log(r2) - y
            out = out + np.where(r2 > 0, np.exp(x) / -np.expm1(x), 0.0)
    return y * y * out


def _scaled_frequency_to_ev(zeta, a_m):
    return zeta * C / (2.0 * a_m) * HBAR_EV


def _check_eps(eps, xi_ev):
    bad = ~(eps >= 1.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(
            f"model returned eps(i xi) = {eps.flat[i]:.6g} < 1 at xi = {xi_ev.flat[i]:.6g} eV")


def _inner_integrals(zeta, eps, settings):
    """int_zeta^upper h(y) dy for every (zeta, eps) pair; values and errors."""
    zeta = np.asarray(zeta, dtype=float).ravel()
    eps = np.asarray(eps, dtype=float).ravel()
    upper = np.maximum(settings.y_max, zeta + 40.0)

    def h(y, owner):
        z = zeta[owner][:, None]
        e = eps[owner][:, None]
        r_tm, r_te = _reflection(y, z, e)
        return _mode_sum(y, r_tm, r_te)

    res = integrate_batch(h, zeta, upper, rtol=settings.rtol_inner, atol=1e-300)
    res.raise_if_failed("inner wavenumber integral")
    return res.value, res.error


def _zero_mode_integral(model, a_m, settings):
    """Inner integral at xi = 0 according to the model's declared convention."""
    mode = model.zero_mode
    if mode is None or mode not in (DRUDE, PLASMA, DIELECTRIC):
        raise ConfigurationError(
            f"model {model.name!r} declares no zero-frequency behaviour; "
            "finite-temperature pressure is undefined")
    if mode == DIELECTRIC:
        e0 = float(model.static_permittivity)
        r_tm0 = (e0 - 1.0) / (e0 + 1.0)
    else:
        r_tm0 = 1.0
    omega_p = 2.0 * a_m * model.plasma_frequency / HBAR_EV / C

    def h(y, _owner):
        r_tm = np.full_like(y, r_tm0)
        if mode == PLASMA:
            k = np.sqrt(y * y + omega_p ** 2)
            r_te = -omega_p ** 2 / (y + k) ** 2
        else:
            r_te = np.zeros_like(y)
        return _mode_sum(y, r_tm, r_te)

    res = integrate_batch(h, [0.0], [settings.y_max], rtol=settings.rtol_inner,
                          atol=1e-300, breakpoints=4)
    res.raise_if_failed("zero-frequency integral")
    return float(res.value[0]), float(res.error[0])


def _validate_separation(a_nm):
    a_nm = float(a_nm)
    if not a_nm > 0:
        raise DomainError(f"separation must be > 0 nm, got {a_nm}")
    return a_nm


def _prefactor_mpa(a_m):
    return -HBAR * C / (32.0 * np.pi ** 2 * a_m ** 4) / MPA


def pressure_T0(a_nm, model, settings=QuadratureSettings()):
    """Zero-temperature Lifshitz pressure in mPa (negative = attraction)."""
    a_nm = _validate_separation(a_nm)
    a_m = a_nm * NM
    inner_rel = [0.0]

    def outer(zeta, _owner):
        z = zeta.ravel()
        xi_ev = _scaled_frequency_to_ev(z, a_m)
        eps = np.asarray(model.eps_imag(xi_ev), dtype=float)
        _check_eps(eps, xi_ev)
        val, err = _inner_integrals(z, eps, settings)
        nz = val != 0
        if np.any(nz):
            inner_rel[0] = max(inner_rel[0], float(np.max(err[nz] / np.abs(val[nz]))))
        return val.reshape(zeta.shape)

    cut = settings.xi_cutoff
    res = integrate_batch(outer, [0.0], [cut], rtol=settings.rtol_outer,
                          atol=1e-300, breakpoints=4)
    total = float(res.value[0])
    err = float(res.error[0])
    converged = bool(res.converged[0])
    # extend the frequency range until the integrand is negligible
    for _ in range(8):
        edge = float(outer(np.array([[cut]]), None)[0, 0])
        if edge <= 1e-12 * abs(total) or edge == 0.0:
            break
        more = integrate_batch(outer, [cut], [2 * cut], rtol=settings.rtol_outer,
                               atol=1e-300, breakpoints=2)
        total += float(more.value[0])
        err += float(more.error[0])
        converged &= bool(more.converged[0])
        cut *= 2
    pref = _prefactor_mpa(a_m)
    p = pref * total
    p_err = abs(pref) * (err + inner_rel[0] * abs(total))
    if not converged:
        raise AccuracyError(f"frequency integral did not converge at a = {a_nm} nm",
                            estimate=p, error=p_err)
    return PressurePoint(a_nm, p, p_err)


def matsubara_frequency(l, temperature_K):
    """l-th Matsubara frequency 2 pi k_B T l / hbar, in eV."""
    return 2.0 * np.pi * K_B_EV * temperature_K * l


def pressure_matsubara(a_nm, temperature_K, model, settings=QuadratureSettings()):
    """Finite-temperature Lifshitz pressure in mPa via the Matsubara sum."""
    a_nm = _validate_separation(a_nm)
    t = float(temperature_K)
    if not t > 0:
        raise DomainError(f"temperature must be > 0 K, got {temperature_K}")
    a_m = a_nm * NM
    step = 2.0 * a_m * (2.0 * np.pi * K_B * t / HBAR) / C
    zero, zero_err = _zero_mode_integral(model, a_m, settings)
    total = 0.5 * zero
    err = 0.5 * zero_err
    l_next = 1
    small_run = 0
    chunk = 32
    upper = max(settings.y_max, 0.0)
    done = False
    while not done:
        ls = np.arange(l_next, l_next + chunk)
        zeta = ls * step
        zeta = zeta[zeta < upper]
        if zeta.size == 0:
            break
        xi_ev = _scaled_frequency_to_ev(zeta, a_m)
        eps = np.asarray(model.eps_imag(xi_ev), dtype=float)
        _check_eps(eps, xi_ev)
        vals, errs = _inner_integrals(zeta, eps, settings)
        for v, e in zip(vals, errs):
            total += v
            err += e
            small_run = small_run + 1 if abs(v) < settings.matsubara_rtol * abs(total) else 0
            l_next += 1
            if small_run >= 3 and l_next - 1 >= settings.matsubara_min_terms:
                done = True
                break
        chunk = min(2 * chunk, 4096)
    pref = _prefactor_mpa(a_m)
    p = pref * step * total
    p_err = abs(pref) * step * err
    return PressurePoint(a_nm, float(p), float(p_err), t, l_next - 1)


def _point(args):
    a, model, settings, temperature = args
    if temperature:
        return pressure_matsubara(a, temperature, model, settings)
    return pressure_T0(a, model, settings)


def pressure_curve(grid_nm, model, settings=QuadratureSettings(), temperature_K=0.0):
    """Pressure at every separation of an ascending grid.

    Points are independent; with ``settings.workers > 1`` they are spread
    over worker processes and reassembled by index, so the result does not
    depend on scheduling.  Errors carry the failing ``grid_index``.
    """
    grid = [float(a) for a in grid_nm]
    if not grid:
        raise ValidationError("separation grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("separation grid must be strictly ascending")
    jobs = [(a, model, settings, temperature_K) for a in grid]
    out = [None] * len(grid)
    if settings.workers == 1 or len(grid) == 1:
        for i, job in enumerate(jobs):
            out[i] = _run_indexed(i, job)
    else:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            futures = [pool.submit(_run_indexed, i, job) for i, job in enumerate(jobs)]
            for i, fut in enumerate(futures):
                out[i] = fut.result()
    return out


def _run_indexed(i, job):
    try:
        return _point(job)
    except CasimirError as exc:
        exc.grid_index = i
        if exc.args:
            exc.args = (f"grid index {i} (a = {job[0]:g} nm): {exc.args[0]}",) + exc.args[1:]
        raise


def ideal_metal_pressure(a_nm):
    """-pi^2 hbar c / (240 a^4) in mPa."""
    a_m = np.asarray(a_nm, dtype=float) * NM
    return -np.pi ** 2 * HBAR * C / (240.0 * a_m ** 4) / MPA
