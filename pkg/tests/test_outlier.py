import json
import warnings

import numpy as np
import pytest
from scipy import stats

from icsfree.bayes_spline import SplineSpaceSpec
from icsfree.eucspace import DimensionError
from icsfree.ics import solve_ics
from icsfree.outlier import (
    KappaRule,
    batched_ics_scores,
    dagostino_pvalue,
    detect,
    ics_distance,
    monte_carlo_cutoff,
    param_grid_sweep,
    select_components,
)
from icsfree.scatter import CoordinateSample, mahalanobis_norms
from conftest import mixture


def test_ics_distance_examples():
    z = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]])
    np.testing.assert_array_equal(ics_distance(z, 1), [1.0, 0.0])
    np.testing.assert_array_equal(ics_distance(z, 2), [5.0, 1.0])
    np.testing.assert_array_equal(ics_distance(z, 3), [14.0, 1.25])
    with pytest.raises(ValueError):
        ics_distance(z, 0)
    with pytest.raises(ValueError):
        ics_distance(z, 4)


def test_full_distance_is_mahalanobis(rng):
    x, _ = mixture(rng, 300, 5)
    sol = solve_ics(CoordinateSample.euclidean(x))
    np.testing.assert_allclose(ics_distance(sol.scores, 5), mahalanobis_norms(x) ** 2, rtol=1e-8, atol=1e-8)


def test_kappa_rule_parse():
    assert KappaRule.parse("fixed:2") == KappaRule.fixed(2)
    assert KappaRule.parse("3") == KappaRule.fixed(3)
    assert KappaRule.parse("dagostino") == KappaRule.dagostino(0.05)
    assert KappaRule.parse("dagostino:0.01").level == 0.01
    assert KappaRule.parse("scree:2").mode == "scree"
    assert KappaRule.parse(str(KappaRule.dagostino(0.1))) == KappaRule.dagostino(0.1)
    for bad in ("fixed:0", "bogus", "fixed"):
        with pytest.raises(ValueError):
            KappaRule.parse(bad)


def test_dagostino_calibration():
    rng = np.random.default_rng(3)
    p = dagostino_pvalue(rng.standard_normal((200, 2000)), axis=0)
    assert 0.035 <= np.mean(p < 0.05) <= 0.065


def test_dagostino_properties(rng):
    bimodal = np.r_[rng.normal(-3, 1, 100), rng.normal(3, 1, 100)]
    assert dagostino_pvalue(bimodal) < 1e-6
    x = rng.standard_normal(100)
    assert dagostino_pvalue(3.7 * x - 11) == pytest.approx(dagostino_pvalue(x), rel=1e-10)
    assert dagostino_pvalue(x) == pytest.approx(stats.normaltest(x).pvalue, rel=1e-14)
    with pytest.raises(DimensionError):
        dagostino_pvalue(x[:19])


def test_select_components_examples():
    rng = np.random.default_rng(0)
    n = 400
    z = rng.standard_normal((n, 4))
    z[:, 0] = np.r_[rng.normal(-3, 1, n // 2), rng.normal(3, 1, n // 2)]
    z[:, 1] = rng.standard_exponential(n)
    sel = select_components(z, KappaRule.dagostino())
    assert sel.kappa == 2 and not sel.no_structure and sel.pvalues.shape == (4,)
    # the run stops at the first accepted component, later rejections do not count
    z2 = z[:, [0, 2, 1, 3]]
    assert select_components(z2).kappa == 1
    assert select_components(z, KappaRule.fixed(3)).kappa == 3
    with pytest.raises(ValueError):
        select_components(z, KappaRule.fixed(5))


def test_select_nothing_on_gaussian():
    z = np.random.default_rng(4).standard_normal((200, 3))
    sel = select_components(z)
    assert sel.kappa == 0 and sel.no_structure


@pytest.mark.xfail(strict=True, reason="ordered ICS components of Gaussian data are not Gaussian "
                   "enough for the unadjusted sequential test; see README")
def test_gaussian_selects_nothing_most_of_the_time():
    hits = 0
    for s in range(100):
        x = np.random.default_rng([77, s]).standard_normal((200, 6))
        z = solve_ics(CoordinateSample.euclidean(x)).scores
        hits += select_components(z).kappa == 0
    assert hits >= 90


def test_batched_scores_match_solver():
    x = np.stack([np.random.default_rng([5, r]).standard_normal((60, 4)) for r in range(4)])
    z, lam, ok = batched_ics_scores(x)
    assert ok.all()
    for r in range(4):
        sol = solve_ics(CoordinateSample.euclidean(x[r]))
        np.testing.assert_allclose(lam[r], sol.spectrum, rtol=1e-10)
        np.testing.assert_allclose(np.abs(z[r]), np.abs(sol.scores), atol=1e-9)


def test_cutoff_deterministic_and_chunk_free():
    a = monte_carlo_cutoff(50, 3, 2, reps=300, seed=9, chunk=64)
    b = monte_carlo_cutoff(50, 3, 2, reps=300, seed=9, chunk=300)
    assert a == b
    assert monte_carlo_cutoff(50, 3, 2, reps=300, seed=10) != a


def test_cutoff_monotone_in_kappa_and_level():
    cuts = [monte_carlo_cutoff(80, 4, k, reps=400, seed=1) for k in range(1, 5)]
    assert all(np.diff(cuts) > 0)
    assert monte_carlo_cutoff(80, 4, 2, level=0.99, reps=400, seed=1) > cuts[1]
    # kappa = p is the Mahalanobis cutoff, bounded by (n-1)^2/n
    assert cuts[-1] < 79 ** 2 / 80


def test_cutoff_meta_and_errors():
    cut, meta = monte_carlo_cutoff(40, 3, KappaRule.dagostino(), reps=200, seed=2, full_output=True)
    assert meta["reps"] == 200 and meta["kappa_rule"] == "dagostino:0.05"
    assert 0 <= meta["replicates_used"] <= 200
    with pytest.raises(DimensionError):
        monte_carlo_cutoff(3, 3, 1)
    with pytest.raises(ValueError):
        monte_carlo_cutoff(30, 3, 4)
    with pytest.raises(ValueError):
        monte_carlo_cutoff(30, 3, 1, level=1.0)


def test_detect_mixture():
    rng = np.random.default_rng(12)
    x, truth = mixture(rng, 500, 6, frac=0.02, shift=6.0)
    rep = detect(x, reps=2000, seed=1)
    assert rep.kappa >= 1
    assert set(np.flatnonzero(truth)) <= set(rep.flagged)
    assert rep.flags.sum() <= 10 + 0.05 * 490


def test_detect_gaussian_null_flag_rate():
    rates = []
    for s in range(20):
        x = np.random.default_rng([31, s]).standard_normal((200, 6))
        rates.append(detect(x, KappaRule.fixed(2), reps=2000, seed=0).flags.mean())
    assert 0.015 <= np.mean(rates) <= 0.035


def test_detect_uniform_among_gaussians(rng):
    from icsfree.bayes_spline import DensitySpline, zb_basis
    from icsfree.mpl import smooth_clr_spline
    spec = SplineSpaceSpec.equally_spaced((-3.0, 3.0), 3, 3)
    t = np.linspace(-3, 3, 301)
    mus = rng.normal(0, 0.3, 99)
    sds = np.exp(rng.normal(0, 0.1, 99))
    clr = -((t[None, :] - mus[:, None]) / sds[:, None]) ** 2 / 2
    clr += 0.1 * rng.standard_normal((99, spec.dim)) @ zb_basis(spec).evaluate(t).T
    dens = smooth_clr_spline(t, clr, spec) + [DensitySpline(spec, np.zeros(spec.dim))]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = detect(dens, KappaRule.fixed(1), reps=1000)
    assert np.argmax(rep.distances) == 99 and rep.flags[99]


def test_detect_affine_invariance(rng):
    x, _ = mixture(rng, 200, 4)
    a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    r1 = detect(x, KappaRule.fixed(2), reps=500)
    r2 = detect(x @ a.T + 3.0, KappaRule.fixed(2), reps=500)
    np.testing.assert_allclose(r1.distances, r2.distances, rtol=1e-6, atol=1e-8)
    np.testing.assert_array_equal(r1.flags, r2.flags)


def test_detect_errors_and_no_structure():
    with pytest.raises(DimensionError, match="10 times"):
        detect(np.random.default_rng(0).standard_normal((4, 4)))
    x = np.random.default_rng(4).standard_normal((200, 3))
    with pytest.warns(UserWarning, match="nothing is flagged"):
        rep = detect(x, reps=100)
    if rep.no_structure:
        assert not rep.flags.any() and rep.cutoff == np.inf


def test_report_schema(rng):
    rep = detect(mixture(rng, 200, 3)[0], KappaRule.fixed(2), reps=300, seed=5, unit_ids=[f"u{i}" for i in range(200)])
    d = json.loads(rep.to_json())
    assert d["schema"] == "ics-outlier/1"
    assert d["kappa"] == 2 and d["selection_mode"] == "fixed"
    assert d["mc_meta"]["reps"] == 300 and d["mc_meta"]["seed"] == 5
    assert len(d["distances"]) == len(d["flags"]) == 200
    assert d["unit_ids"][3] == "u3" and d["bonferroni_schedule"] == "level/j"


def _toy_units(seed=0, n_in=40, n_out=3):
    rng = np.random.default_rng(seed)
    units = {f"in{i:02d}": rng.normal(rng.normal(0, 0.2), 1.0, 150) for i in range(n_in)}
    for j in range(n_out):
        units[f"out{j}"] = np.r_[rng.normal(0, 1.0, 100), rng.normal(3.0, 0.3, 50)]
    return {k: np.clip(v, -5, 5) for k, v in units.items()}


def test_sweep_bookkeeping():
    units = _toy_units()
    res = param_grid_sweep(units, [1, 3, 25], [1e-2, 1.0, 1e8], placements=("quantile", "equally_spaced"),
                           kappa_rule=KappaRule.fixed(1), degree=3, penalty_order=2,
                           interval=(-5, 5), reps=300)
    assert len(res.cells) == 18
    keys = {(c.placement, c.n_knots, c.lam) for c in res.cells}
    assert len(keys) == 18
    failed = [c for c in res.cells if not c.ok]
    assert all(c.error for c in failed)
    assert any(c.n_knots == 25 for c in failed)
    run = sum(c.ok for c in res.cells)
    assert np.all(res.cells_run == run)
    assert np.all(res.cells_flagged <= run)
    rows = list(res.frequency_rows())
    assert rows[0][0] == "in00" and len(rows) == 43
    freq = res.frequency
    assert min(freq[-3:]) > max(freq[:-3])
