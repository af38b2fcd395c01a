import math

import numpy as np
import pytest

from lemlab import potential as pot
from lemlab.ensembles import EnsembleSpec, SeedPolicy, sample_roots
from lemlab.errors import DegenerateVarianceError, QuadratureFailure, UnsupportedPError, ValidationError

DISK = EnsembleSpec("disk", 1.0, 1)
CIRCLE = EnsembleSpec("circle", 1.0, 1)


def test_circle_potential_examples():
    assert pot.potential_circle(0.5, 1) == 0.0
    assert pot.potential_circle(2, 1) == pytest.approx(math.log(2))
    assert pot.potential_circle(0.5, 0.9) == pytest.approx(math.log(0.9))
    assert pot.potential_circle(0.5, 0.9) == pytest.approx(-0.1054, abs=1e-4)


def test_disk_potential_examples():
    assert pot.potential_disk(0, 1) == pytest.approx(-0.5)
    assert pot.potential_disk(1j, 1) == pytest.approx(0.0, abs=1e-15)
    assert pot.potential_disk(0.6, 1) == pytest.approx(-0.32)


def test_disk_potential_monte_carlo_at_06():
    x = sample_roots("disk", 1.0, 1_000_000, SeedPolicy(6).generator())
    v = np.log(np.abs(0.6 - x))
    assert abs(v.mean() - (-0.32)) < 3 * v.std() / 1000


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_potentials_continuous_and_asymptotic(r):
    for f in (pot.potential_disk, pot.potential_circle):
        assert f(r * (1 - 1e-12), r) == pytest.approx(f(r * (1 + 1e-12), r), abs=1e-9)
        assert f(1e6, r) == pytest.approx(math.log(1e6), abs=r * r / 1e12 + 1e-12)


def test_disk_potential_matches_quadrature():
    for z in (0.0, 0.35, 0.8 + 0.1j):
        # both moments come from quadrature, so U^2 = F_2 - Var checks the closed form
        var = pot.centered_abs_moment(z, 2, DISK)
        assert pot.moment_F_p(z, 2, DISK) - var == pytest.approx(pot.potential_disk(z) ** 2, abs=1e-9)


def test_cauchy_examples():
    assert pot.cauchy_transform(0.3 + 0.4j, DISK) == pytest.approx(0.3 - 0.4j)
    assert pot.cauchy_transform(0.5, CIRCLE) == 0
    assert pot.cauchy_transform(1.25, CIRCLE) == pytest.approx(0.8)
    assert pot.cauchy_transform(1.25, DISK) == pytest.approx(0.8)


def test_cauchy_exterior_by_quadrature():
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    assert np.mean(1 / (1.25 - np.exp(1j * th))) == pytest.approx(0.8, abs=1e-12)


def test_cauchy_is_potential_gradient():
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(10):
        z = 0.9 * math.sqrt(rng.uniform()) * complex(np.exp(2j * np.pi * rng.uniform()))
        ux = (pot.potential_disk(z + h) - pot.potential_disk(z - h)) / (2 * h)
        uy = (pot.potential_disk(z + 1j * h) - pot.potential_disk(z - 1j * h)) / (2 * h)
        f = pot.cauchy_transform(z, DISK)
        assert abs(complex(ux, -uy) - f) < 1e-4


def test_moment_examples():
    assert pot.moment_F_p(0, 2, CIRCLE) == pytest.approx(0.0, abs=1e-14)
    assert pot.moment_F_p(0, 1, DISK) == pytest.approx(0.5, abs=1e-10)
    assert pot.moment_F_p(0, 1, DISK) == pytest.approx(-pot.potential_disk(0), abs=1e-10)
    # E log^2|1 - e^{i theta}| = pi^2 / 12
    assert pot.moment_F_p(1, 2, CIRCLE) == pytest.approx(math.pi ** 2 / 12, abs=1e-9)


def test_moment_bracket(thresholds):
    rng = np.random.default_rng(50)
    br = thresholds["disk_log_moment_bracket"]
    for _ in range(50):
        z = math.sqrt(rng.uniform()) * complex(np.exp(2j * np.pi * rng.uniform()))
        for p in (1, 2, 3):
            lo, hi = br[str(p)]
            assert lo <= pot.moment_F_p(z, p, DISK) <= hi


def test_moment_monte_carlo():
    x = sample_roots("disk", 1.0, 400_000, SeedPolicy(12).generator())
    for z in (0.2, 0.7j, -0.95):
        v = np.abs(np.log(np.abs(z - x))) ** 3
        assert abs(v.mean() - pot.moment_F_p(z, 3, DISK)) < 4 * v.std() / math.sqrt(x.size)


def test_moment_preconditions(monkeypatch):
    with pytest.raises(ValidationError):
        pot.moment_F_p(1.5, 2, DISK)
    with pytest.raises(ValidationError):
        pot.moment_F_p(0.5, 0.5, DISK)
    with pytest.raises(ValidationError):
        pot.moment_F_p(0.5, 2, EnsembleSpec("disk", 2.0, 1))
    monkeypatch.setattr(pot, "QUAD_TOL", 1e-30)
    with pytest.raises(QuadratureFailure):
        pot.moment_F_p(0.999, 3, CIRCLE)


def test_inverse_moment_examples():
    assert pot.inverse_moment(0, 1) == pytest.approx(2.0, abs=1e-10)
    assert pot.inverse_moment(0, 1.5) == pytest.approx(4.0, abs=1e-9)
    for a in np.linspace(0, 2 * np.pi, 7):
        v = pot.inverse_moment(complex(np.exp(1j * a)), 1)
        assert math.isfinite(v) and v <= 2.5


def test_inverse_moment_bound_and_growth():
    for p in (0.5, 1.0, 1.5, 1.9):
        for z in (0, 0.5, 0.9j, 1):
            assert pot.inverse_moment(z, p) <= pot.inverse_moment_bound(p)
    assert pot.inverse_moment(0, 1.9) > pot.inverse_moment(0, 1.5)
    with pytest.raises(UnsupportedPError):
        pot.inverse_moment(0, 2)


@pytest.mark.parametrize("t", [0.3, 0.6, 0.9])
def test_circle_inverse_square(t):
    assert abs(pot.circle_inverse_square_moment(t) - 1 / (1 - t * t)) < 1e-8


def test_profile_handles():
    prof = pot.profile(EnsembleSpec("disk", 1.0, 5))
    assert prof.U(0) == pytest.approx(-0.5)
    assert prof.cauchy(0.1j) == pytest.approx(-0.1j)
    assert prof.sigma2(0) == pytest.approx(0.25, abs=1e-10)
    assert pot.profile(CIRCLE).sigma2(0) == pytest.approx(0.0, abs=1e-14)


def test_clt_degenerate():
    with pytest.raises(DegenerateVarianceError):
        pot.clt_diagnostic(CIRCLE, 0, 100, 100)


def test_clt_small_run_reports_budget():
    d = pot.clt_diagnostic(DISK, 0.5, 50, 500, seed=3)
    assert d.budget > 0 and d.noise == pytest.approx(1.358 / math.sqrt(500))
    assert 0 <= d.ks <= 1 and d.within_budget
