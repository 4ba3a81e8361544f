import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casimirlab.comparison import (NORMAL, UNIFORM, ConfidenceSpec, ExperimentDataset,
                                   band_cross_overlap, combine_half_widths, difference_analysis,
                                   exclusion_intervals, normality_probe, patch_area_check,
                                   read_experiment, scale_half_width)
from casimirlab.errors import (AlignmentError, ConfigurationError, ParseError,
                               ValidationError)

from conftest import OFFSET_BAND, OFFSET_GRID


def dataset(a, p, xi, **kw):
    return ExperimentDataset(np.asarray(a, float), np.asarray(p, float), np.asarray(xi, float), **kw)


# ---------------------------------------------------------------- scaling

def test_scaling_identity_at_95():
    for dist in (UNIFORM, NORMAL):
        assert scale_half_width(1.0, ConfidenceSpec(0.95, dist)) == 1.0


def test_scaling_to_70():
    uniform = scale_half_width(1.0, ConfidenceSpec(0.70, UNIFORM))
    assert abs(uniform - 0.70 / 0.95) < 1e-12
    assert round(uniform, 4) == 0.7368
    assert abs(scale_half_width(1.0, ConfidenceSpec(0.70, NORMAL)) - 0.5) < 1e-12
    assert ConfidenceSpec(0.7, UNIFORM).factor == pytest.approx(1.357, abs=5e-4)


def test_unsupported_level():
    with pytest.raises(ConfigurationError):
        ConfidenceSpec(0.90)
    with pytest.raises(ConfigurationError):
        ConfidenceSpec(0.95, "lognormal")
    with pytest.raises(ValidationError):
        scale_half_width(0.0, ConfidenceSpec())


def test_combination_rules():
    assert combine_half_widths(3.0, 4.0) == 5.0
    assert combine_half_widths(3.0, 4.0, "linear-sum") == 7.0
    with pytest.raises(ConfigurationError):
        combine_half_widths(3.0, 4.0, "max")


# ------------------------------------------------------------- band/cross

def test_cross_inside_band_overlaps():
    ds = dataset([300.0], [-100.0], [1.0])
    (rec,) = band_cross_overlap([300.0], [-100.2], ds, band_fraction=0.005)
    assert rec.overlap


def test_touching_counts_as_overlap():
    # band [-100.5, -99.5]; cross arm reaches exactly -99.5 from above
    ds = dataset([300.0], [-98.5], [1.0], delta_a_nm=0.0)
    (rec,) = band_cross_overlap([300.0], [-100.0], ds, band_fraction=0.005)
    assert rec.band_high == pytest.approx(-99.5, abs=1e-12)
    assert rec.cross_low == -99.5
    assert rec.overlap


def test_one_percent_offset_is_resolved_at_95():
    # experiment sits 1% of the theory value below it in magnitude
    a = np.array([300.0, 400.0, 500.0])
    theory = np.array([-100.0, -30.0, -12.0])
    expt = 0.99 * theory
    ds = dataset(a, expt, 0.005 * np.abs(expt), delta_a_nm=0.0)
    recs = band_cross_overlap(a, theory, ds, ConfidenceSpec(0.95), band_fraction=0.005)
    assert not any(r.overlap for r in recs)


def test_delta_a_widens_band():
    a = np.array([300.0, 301.0, 302.0])
    theory = -1e9 / a ** 4
    ds = dataset(a, theory * 1.006, 1e-6 * np.ones(3), delta_a_nm=0.0)
    narrow = band_cross_overlap(a, theory, ds, band_fraction=0.005)
    wide = band_cross_overlap(a, theory, ds, band_fraction=0.005, delta_a_nm=1.0)
    assert not narrow[1].overlap and wide[1].overlap


def test_misaligned_grids():
    ds = dataset([300.0, 400.0], [-1.0, -0.5], [0.1, 0.1])
    with pytest.raises(AlignmentError) as info:
        band_cross_overlap([300.0, 410.0], [-1.0, -0.5], ds)
    assert 400.0 in info.value.unmatched and 410.0 in info.value.unmatched


# ------------------------------------------------------------- differences

def test_identical_theory_is_consistent():
    ds = dataset([300, 350, 400], [-10, -6, -4], [0.5, 0.4, 0.3])
    rep = difference_analysis(ds.pressure_mPa, ds)
    assert all(lev.verdict == "consistent" for lev in rep.levels.values())


def test_strict_threshold_single_interval():
    ds = dataset([300, 310, 320], [0, 0, 0], [2, 2, 2])
    rep = difference_analysis([3.0, 3.0, 3.0], ds, [ConfidenceSpec(0.95)], band_fraction=0.0)
    assert rep.levels["0.95"].intervals == [(300.0, 320.0)]
    on_edge = difference_analysis([2.0, 2.0, 2.0], ds, [ConfidenceSpec(0.95)], band_fraction=0.0)
    assert on_edge.levels["0.95"].verdict == "consistent"


def test_empty_dataset():
    with pytest.raises(ValidationError):
        dataset([], [], [])


@pytest.mark.parametrize("dist", [UNIFORM, NORMAL])
def test_offset_band_topology(offset_theory, offset_experiment, dist):
    ds = read_experiment(offset_experiment)
    specs = [ConfidenceSpec(0.95, dist), ConfidenceSpec(0.70, dist)]
    rep = difference_analysis(offset_theory, ds, specs, theory_a=OFFSET_GRID)
    assert rep.levels["0.95"].verdict == "consistent"
    assert rep.levels["0.70"].intervals == [OFFSET_BAND]


def test_exclusion_intervals():
    a = [1.0, 2.0, 3.0, 4.0, 5.0]
    assert exclusion_intervals(a, [True, False, True, True, False]) == [(1.0, 1.0), (3.0, 4.0)]
    assert exclusion_intervals(a, [False] * 5) == []
    assert exclusion_intervals(a, [True] * 5) == [(1.0, 5.0)]


arrays = st.integers(3, 12).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-5, 5), min_size=n, max_size=n),
    st.lists(st.floats(0.01, 3), min_size=n, max_size=n)))


@settings(max_examples=150, deadline=None)
@given(arrays, st.sampled_from([UNIFORM, NORMAL]), st.floats(0.0, 0.05),
       st.sampled_from(["rss", "linear-sum"]))
def test_verdict_monotonicity(data, dist, band, rule):
    diff, xi = data
    n = len(diff)
    a = 300.0 + 10.0 * np.arange(n)
    expt = -np.linspace(50.0, 10.0, n)
    ds = dataset(a, expt, xi)
    rep = difference_analysis(expt + np.array(diff), ds,
                              [ConfidenceSpec(0.95, dist), ConfidenceSpec(0.70, dist)],
                              band_fraction=band, combination=rule)
    out95, out70 = rep.levels["0.95"].outside, rep.levels["0.70"].outside
    assert np.all(out70[out95])
    if rep.levels["0.95"].verdict == "excluded":
        assert rep.levels["0.70"].verdict == "excluded"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(-20, 20))
def test_shift_invariance_without_theory_band(diff, c):
    a = np.array([300.0, 310.0, 320.0, 330.0])
    expt = np.array([-40.0, -30.0, -20.0, -10.0])
    ds = dataset(a, expt, np.ones(4))
    shifted = dataset(a, expt + c, np.ones(4))
    r1 = difference_analysis(expt + diff, ds, band_fraction=0.0)
    r2 = difference_analysis(expt + c + np.array(diff), shifted, band_fraction=0.0)
    for k in r1.levels:
        np.testing.assert_array_equal(r1.levels[k].outside, r2.levels[k].outside)


def test_report_serialisation():
    ds = dataset([300, 310], [-10, -9], [0.1, 0.1])
    rep = difference_analysis([-10.5, -9.0], ds, model_tag="drude")
    d = rep.to_dict()
    assert d["model"] == "drude"
    assert d["levels"]["0.95"]["exclusion_intervals_nm"] == [[300.0, 300.0]]
    assert rep.records()[0]["outside_0.70"] is True


# -------------------------------------------------------------- normality

def test_normal_sample_compatible():
    rng = np.random.default_rng(20240501)
    diag = normality_probe(rng.normal(0.0, 1.0, 200))
    assert diag.normal_compatible


def test_uniform_sample_flagged():
    rng = np.random.default_rng(7)
    diag = normality_probe(rng.uniform(-1.0, 1.0, 200))
    assert diag.excess_kurtosis == pytest.approx(-1.2, abs=0.25)
    assert not diag.normal_compatible


def test_normality_errors():
    with pytest.raises(ValidationError):
        normality_probe(np.ones(50))
    with pytest.raises(ValidationError):
        normality_probe(np.arange(10.0))


def test_running_mean_removes_trend():
    rng = np.random.default_rng(3)
    x = np.linspace(0, 1, 400)
    d = 5.0 * x + rng.normal(0, 0.1, 400)
    assert normality_probe(d, window=21).normal_compatible


# ------------------------------------------------------------------ patch

def test_patch_check_values():
    res = patch_area_check(300.0, 150.0, 160.0)
    assert res.patch_area_um2 == pytest.approx(0.0707, rel=1e-3)
    assert res.effective_area_um2 == pytest.approx(150.80, rel=1e-3)
    assert res.effective_area_um2 == pytest.approx(150.72, rel=1e-3)
    assert res.small_patch_regime


def test_patch_edge_cases():
    zero = patch_area_check(0.0, 150.0, 160.0)
    assert zero.patch_area_um2 == 0.0 and zero.small_patch_regime
    big = patch_area_check(1000.0, 0.1, 100.0)
    assert big.patch_area_um2 > big.effective_area_um2 and not big.small_patch_regime
    with pytest.raises(ValidationError):
        patch_area_check(300.0, 0.0, 160.0)


# ------------------------------------------------------------------- files

def test_read_experiment_metadata(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("# temperature_K: 300\n# delta_a_nm = 0.4\na_nm,P_mPa,Xi95_mPa\n"
                 "160,-1100,7\n170,-900,6\n")
    ds = read_experiment(p)
    assert ds.temperature_K == 300.0 and ds.delta_a_nm == 0.4
    assert len(ds) == 2 and ds.provenance == "e.csv"


@pytest.mark.parametrize("body, line", [
    ("a,P,X\n1,2,3\n", 1),
    ("a_nm,P_mPa,Xi95_mPa\n160,-1,1\n150,-2,1\n", 3),
    ("a_nm,P_mPa,Xi95_mPa\n160,-1\n", 2),
    ("a_nm,P_mPa,Xi95_mPa\n160,-1,q\n", 2),
])
def test_read_experiment_errors(tmp_path, body, line):
    p = tmp_path / "e.csv"
    p.write_text(body)
    with pytest.raises(ParseError) as info:
        read_experiment(p)
    assert info.value.line == line


def test_read_experiment_rejects_bad_half_width(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("a_nm,P_mPa,Xi95_mPa\n160,-1,0\n")
    with pytest.raises(ParseError):
        read_experiment(p)
