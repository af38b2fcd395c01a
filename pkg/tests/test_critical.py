import numpy as np
import pytest
from scipy.spatial import ConvexHull

from lemlab.critical import (
    CriticalSet,
    annulus_mask,
    hausdorff_multiset,
    oracle_critical_points,
    pairing_statistics,
    solve_critical_points,
)
from lemlab.ensembles import EnsembleSpec, SeedPolicy, sample_polynomial
from lemlab.errors import DegreeTooLargeError, MultipleRootError, NoConvergenceError, ValidationError

from conftest import poly


def vieta_error(p, cps):
    n = p.degree
    s = p.roots.sum()
    return abs(cps.points.sum() - (n - 1) / n * s) / (1 + abs(s))


def test_two_roots():
    cps = solve_critical_points(poly(1, -1))
    assert cps.points.size == 1 and abs(cps.points[0]) < 1e-14


def test_triple_critical_point():
    cps = solve_critical_points(poly(1, 1j, -1, -1j))
    assert cps.points.size == 3
    # a triple point is determined only to about residual**(1/3)
    assert np.max(np.abs(cps.points)) < 1e-3
    assert abs(cps.points.sum()) < 1e-9
    assert vieta_error(poly(1, 1j, -1, -1j), cps) < 1e-8


def test_matches_oracle_degree_12_disk():
    worst = 0.0
    for t in range(200):
        p = sample_polynomial(EnsembleSpec("disk", 1.0, 12), SeedPolicy(77, t))
        worst = max(worst, hausdorff_multiset(solve_critical_points(p).points, oracle_critical_points(p).points))
    assert worst < 1e-8


def test_residual_and_order():
    p = sample_polynomial(EnsembleSpec("circle", 1.0, 300), SeedPolicy(5))
    cps = solve_critical_points(p)
    assert cps.all_converged and cps.points.size == 299
    order = np.lexsort((cps.points.imag, cps.points.real))
    assert np.array_equal(order, np.arange(299))
    assert vieta_error(p, cps) < 1e-8


@pytest.mark.parametrize("family", ["disk", "circle"])
def test_vieta_degree_2048(family):
    p = sample_polynomial(EnsembleSpec(family, 1.0, 2048), SeedPolicy(2048))
    assert vieta_error(p, solve_critical_points(p)) < 1e-8


def test_gauss_lucas():
    for t in range(10):
        p = sample_polynomial(EnsembleSpec("disk" if t % 2 else "circle", 1.0, 60), SeedPolicy(8, t))
        cps = solve_critical_points(p)
        hull = ConvexHull(np.column_stack([p.roots.real, p.roots.imag]))
        pts = np.column_stack([cps.points.real, cps.points.imag])
        # signed distance to each facet: <= 0 inside
        dist = pts @ hull.equations[:, :2].T + hull.equations[:, 2]
        assert dist.max() <= 1e-8


def test_deterministic():
    p = sample_polynomial(EnsembleSpec("disk", 1.0, 100), SeedPolicy(2))
    a, b = solve_critical_points(p), solve_critical_points(p)
    assert np.array_equal(a.points, b.points)


def test_rejects_multiple_roots_and_degree_one():
    with pytest.raises(MultipleRootError):
        solve_critical_points(poly(0.5, 0.5 + 1e-12, 2))
    with pytest.raises(ValidationError):
        solve_critical_points(poly(1))


def test_no_convergence_reports_indices():
    p = sample_polynomial(EnsembleSpec("circle", 1.0, 200), SeedPolicy(1))
    with pytest.raises(NoConvergenceError) as exc:
        solve_critical_points(p, max_sweeps=1)
    assert len(exc.value.indices) > 0
    cs = solve_critical_points(p, max_sweeps=1, raise_on_failure=False)
    assert not cs.all_converged


def test_critical_set_round_trip():
    cps = solve_critical_points(poly(1, -1, 2j))
    back = CriticalSet.from_dict(cps.to_dict())
    assert np.array_equal(back.points, cps.points)
    assert set(cps.to_dict()) >= {"critical_points", "residuals"}


def test_oracle_examples():
    assert np.allclose(oracle_critical_points(poly(0, 0)).points, [0])
    assert np.allclose(oracle_critical_points(poly(2, 0)).points, [1])
    cps = oracle_critical_points(poly(1, -1, 2j))
    assert cps.points.size == 2
    assert cps.points.sum() == pytest.approx(2 / 3 * 2j, abs=1e-12)


def test_oracle_degree_limit():
    with pytest.raises(DegreeTooLargeError):
        oracle_critical_points(poly(*np.arange(25)))


def test_pairing_two_roots():
    p = poly(1, -1)
    rep = pairing_statistics(p, solve_critical_points(p))
    np.testing.assert_allclose(rep.nearest_distance, [1, 1])
    assert not rep.unique_within_rn.any()
    assert rep.r_n == pytest.approx(2 ** -0.75)


def test_annulus_definition():
    n = 10_000
    lo, hi = 3 * n ** -0.25, 1 - n ** -0.5
    z = np.array([lo - 1e-9, lo + 1e-9, hi - 1e-9, hi + 1e-9])
    np.testing.assert_array_equal(annulus_mask(z, n), [False, True, True, False])
    # for n = 2 the annulus is empty
    assert 3 * 2 ** -0.25 > 1 - 2 ** -0.5


def test_pairing_fraction_high_at_n1000():
    fr = []
    for t in range(5):
        p = sample_polynomial(EnsembleSpec("disk", 1.0, 1000), SeedPolicy(1000, t))
        fr.append(pairing_statistics(p, solve_critical_points(p)).annulus_fraction)
    assert np.mean(fr) >= 0.8


def test_hausdorff_multiset():
    assert hausdorff_multiset([0, 1], [1, 0]) == 0
    assert hausdorff_multiset([0, 0, 1], [0, 1, 1]) == pytest.approx(1.0)
    assert hausdorff_multiset([0], [0, 1]) == np.inf
