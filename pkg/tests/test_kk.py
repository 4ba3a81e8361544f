import time

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from casimirlab.errors import AccuracyError, DomainError
from casimirlab.permittivity import kk
from casimirlab.permittivity.kk import KKIntegrator, TabulatedModel, kk_transform
from casimirlab.permittivity.models import (DrudeParams, Oscillator, drude_eps_imag,
                                            oscillator_eps_real)
from casimirlab.permittivity.tables import MergedSpectrum, OpticalTable

from conftest import DRUDE, per_decade


def test_drude_round_trip(drude_table):
    xi = np.geomspace(0.05, 50, 50)
    eps = kk_transform(MergedSpectrum(drude_table, DRUDE), xi)
    np.testing.assert_allclose(eps, drude_eps_imag(xi, DRUDE), rtol=2e-3)
    # the realised accuracy is far better than the acceptance bound
    np.testing.assert_allclose(eps, drude_eps_imag(xi, DRUDE), rtol=2e-5)


def test_drude_extensions_close_the_spectrum(drude_table):
    w = drude_table.omega
    keep = (w >= 0.05) & (w <= 200)
    cut = OpticalTable(w[keep], drude_table.im_eps[keep])
    xi = np.array([0.01, 0.1, 1.0, 10.0])
    eps = kk_transform(MergedSpectrum(cut, DRUDE), xi)
    np.testing.assert_allclose(eps, drude_eps_imag(xi, DRUDE), rtol=1e-4)


def test_lorentz_round_trip():
    osc = Oscillator(1.0, 2.0, 0.1)
    w = per_decade(1e-3, 1e4, 200)
    im = oscillator_eps_real(w, DrudeParams(1e-300, 0.0), [osc]).imag
    eps = kk_transform(OpticalTable(w, im), 1.0)
    assert eps == pytest.approx(1 + 1 / 5.1, rel=2e-3)


def test_vacuum_table_gives_exactly_one():
    t = OpticalTable(np.geomspace(0.1, 10, 30), np.zeros(30))
    assert kk_transform(t, np.array([0.3, 3.0])).tolist() == [1.0, 1.0]


def test_scalar_and_shape():
    t = OpticalTable(np.geomspace(0.1, 10, 30), np.ones(30))
    assert isinstance(kk_transform(t, 1.0), float)
    assert kk_transform(t, np.ones((2, 3))).shape == (2, 3)
    with pytest.raises(DomainError):
        kk_transform(t, 0.0)


def test_accuracy_error_carries_estimate(monkeypatch, drude_table):
    monkeypatch.setattr(kk, "MAX_REFINE", 0)
    with pytest.raises(AccuracyError) as info:
        KKIntegrator(MergedSpectrum(drude_table, DRUDE), rtol=1e-15).evaluate(1.0)
    assert info.value.estimate[0] == pytest.approx(drude_eps_imag(1.0, DRUDE), rel=1e-3)


def test_tabulated_model(drude_table):
    w = drude_table.omega
    keep = (w >= 0.1)
    m = TabulatedModel(MergedSpectrum(OpticalTable(w[keep], drude_table.im_eps[keep]), DRUDE))
    assert m.zero_mode == "drude"
    assert m.junction_jump["relative"] < 1e-12
    assert m.describe()["kind"] == "tabulated-kk"
    bare = TabulatedModel(MergedSpectrum(OpticalTable(w[keep], drude_table.im_eps[keep])))
    assert bare.zero_mode is None


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 50.0), min_size=8, max_size=8), st.floats(-1.5, 1.5))
@example([0.0] * 7 + [5e-324], 0.0)
@example([1e-300, 50.0, 1.0, 2.2e-308, 1.0, 1.0, 2.2e-308, 50.0], 0.0)
def test_positive_spectrum_gives_eps_above_one_and_decreasing(values, log_xi):
    t = OpticalTable(np.geomspace(0.1, 100, 8), values)
    x = 10.0 ** log_xi
    e1, e2 = kk_transform(t, np.array([x, 1.5 * x]))
    assert np.isfinite([e1, e2]).all()
    assert e1 >= e2 >= 1.0
    if max(values) > 1e-6:
        assert e1 > e2


def test_runtime_budget(drude_table):
    xi = np.geomspace(0.05, 50, 50)
    t0 = time.perf_counter()
    kk_transform(MergedSpectrum(drude_table, DRUDE), xi)
    assert time.perf_counter() - t0 < 10.0
