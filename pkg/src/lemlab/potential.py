"""Logarithmic potentials, Cauchy transforms and log-moments of the two ensembles.

Disk integrals are done in polar coordinates centred at the evaluation point,
so the logarithmic singularity sits at the origin of the radial integral.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from .ensembles import EnsembleSpec, Family, SeedPolicy, sample_roots
from .errors import DegenerateVarianceError, NumericalError, QuadratureFailure, UnsupportedPError, ValidationError

QUAD_TOL = 1e-8
_LIMIT = 400


def potential_circle(z, r=1.0) -> float:
    """``E log|z - X|`` for ``X`` uniform on the circle of radius ``r``."""
    a = abs(complex(z))
    return math.log(a) if a >= r else math.log(r)


def potential_disk(z, r=1.0) -> float:
    """``E log|z - X|`` for ``X`` uniform on the disk of radius ``r``."""
    a = abs(complex(z))
    if a >= r:
        return math.log(a)
    return 0.5 * (a * a / (r * r) - 1.0) + math.log(r)


def _family_and_r(spec, r=None):
    if isinstance(spec, EnsembleSpec):
        return spec.family, spec.r
    return Family.parse(spec), 1.0 if r is None else float(r)


def potential(z, spec, r=None) -> float:
    family, r = _family_and_r(spec, r)
    return potential_disk(z, r) if family is Family.DISK else potential_circle(z, r)


def cauchy_transform(z, spec, r=None) -> complex:
    """``E[1/(z - X)]``; on the circle itself the principal value ``1/(2z)`` is returned."""
    family, r = _family_and_r(spec, r)
    z = complex(z)
    a = abs(z)
    if family is Family.DISK:
        return z.conjugate() / (r * r) if a < r else 1.0 / z
    if a < r:
        return 0j
    if a == r:
        return 0.5 / z
    return 1.0 / z


# --- quadrature -----------------------------------------------------------------


def _quad(f, a, b, points=None):
    kw = dict(epsabs=QUAD_TOL * 1e-2, epsrel=1e-12, limit=_LIMIT)
    if points is not None:
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = sorted(pts)
    val, err = integrate.quad(f, a, b, **kw)
    if not np.isfinite(val) or err > QUAD_TOL:
        raise QuadratureFailure(f"quadrature error estimate {err:.2e} exceeds {QUAD_TOL:.0e}")
    return val


def _exit_radius(z, phi):
    """Distance from ``z`` (inside the unit disk) to the unit circle along direction ``phi``."""
    c = z.real * math.cos(phi) + z.imag * math.sin(phi)
    return max(0.0, -c + math.sqrt(max(0.0, 1.0 - abs(z) ** 2 + c * c)))


def _disk_kinks(z):
    # for |z| = 1 the exit radius vanishes on a half circle; its ends are kinks
    a = math.atan2(z.imag, z.real)
    return [(a + math.pi / 2) % (2 * math.pi), (a + 3 * math.pi / 2) % (2 * math.pi)]


def _radial_abslog(R, p, center):
    """``int_0^R rho |log rho - center|^p d rho``."""
    if R <= 0.0:
        return 0.0
    if center == 0.0:
        lo = min(R, 1.0)
        # rho = exp(-t/2) turns the [0, lo] part into an upper incomplete gamma
        t0 = -2.0 * math.log(lo)
        val = 2.0 ** (-p - 1.0) * special.gamma(p + 1.0) * special.gammaincc(p + 1.0, t0)
        if R > 1.0:
            val += _quad(lambda s: s * math.log(s) ** p, 1.0, R)
        return val
    brk = math.exp(center)
    return _quad(lambda s: s * abs(math.log(s) - center) ** p if s > 0 else 0.0, 0.0, R, points=[brk])


def _check_unit(family, r, z):
    if r != 1.0:
        raise ValidationError("log-moment quadrature is implemented for r = 1")
    if abs(z) > 1.0 + 1e-15:
        raise ValidationError("z must lie in the closed unit disk")


def _abs_log_moment(z, p, family, center=0.0):
    z = complex(z)
    if family is Family.CIRCLE:
        alpha = math.atan2(z.imag, z.real)

        def f(t):
            d = abs(z - complex(math.cos(t), math.sin(t)))
            return abs(math.log(d) - center) ** p if d > 0 else math.inf

        return _quad(f, alpha, alpha + 2 * math.pi) / (2 * math.pi)

    def g(phi):
        return _radial_abslog(_exit_radius(z, phi), p, center)

    return _quad(g, 0.0, 2 * math.pi, points=_disk_kinks(z)) / math.pi


def moment_F_p(z, p, spec, r=None) -> float:
    """``F_p(z) = E |log|z - X||^p`` by adaptive quadrature (``r = 1`` only)."""
    family, r = _family_and_r(spec, r)
    if p < 1:
        raise ValidationError("p must be >= 1")
    _check_unit(family, r, complex(z))
    return _abs_log_moment(z, float(p), family)


def centered_abs_moment(z, p, spec, r=None) -> float:
    """``E |log|z - X| - U(z)|^p``."""
    family, r = _family_and_r(spec, r)
    _check_unit(family, r, complex(z))
    return _abs_log_moment(z, float(p), family, center=potential(z, family, r))


def inverse_moment_bound(p) -> float:
    return 2.0 + p / (2.0 - p) * 2.0 ** ((p - 2.0) / p)


def inverse_moment(z, p) -> float:
    """``E[1/|z - X|^p]`` for ``X`` uniform on the unit disk, ``0 < p < 2``."""
    if not 0 < p < 2:
        raise UnsupportedPError(f"inverse moment is finite only for 0 < p < 2, got {p}")
    z = complex(z)
    _check_unit(Family.DISK, 1.0, z)
    q = 2.0 - p
    val = _quad(lambda phi: _exit_radius(z, phi) ** q / q, 0.0, 2 * math.pi, points=_disk_kinks(z)) / math.pi
    if val > inverse_moment_bound(p) * (1 + 1e-9):
        raise NumericalError(f"inverse moment {val} exceeds its a-priori bound {inverse_moment_bound(p)}")
    return val


def circle_inverse_square_moment(t) -> float:
    """``E[1/|t - X|^2]`` for ``X`` uniform on the unit circle and ``0 <= t < 1``."""
    t = float(t)
    if not 0 <= t < 1:
        raise ValidationError("t must lie in [0, 1)")
    return _quad(lambda th: 1.0 / (1.0 - 2.0 * t * math.cos(th) + t * t), 0.0, 2 * math.pi) / (2 * math.pi)


def sigma2(z, spec, r=None) -> float:
    """Variance of ``log|z - X|``."""
    family, r = _family_and_r(spec, r)
    U = potential(z, family, r)
    return max(0.0, moment_F_p(z, 2, family, r) - U * U)


@dataclass(frozen=True)
class PotentialProfile:
    ensemble: EnsembleSpec
    U: Callable
    cauchy: Callable
    sigma2: Callable


def profile(spec: EnsembleSpec) -> PotentialProfile:
    fam, r = spec.family, spec.r
    return PotentialProfile(
        spec,
        lambda z: potential(z, fam, r),
        lambda z: cauchy_transform(z, fam, r),
        lambda z: sigma2(z, fam, r),
    )


# --- CLT diagnostic -------------------------------------------------------------


@dataclass(frozen=True)
class CLTDiagnostic:
    ks: float
    budget: float
    noise: float
    sigma: float
    rho: float
    n: int
    trials: int

    @property
    def within_budget(self) -> bool:
        return self.ks <= self.budget + 2.0 * self.noise


def ks_noise(trials: int) -> float:
    """95% quantile of the one-sample KS statistic under the null."""
    return 1.358 / math.sqrt(trials)


def clt_diagnostic(spec, z, n: int, trials: int, seed: int = 0, r=None) -> CLTDiagnostic:
    """KS distance of normalised log-sums ``sum(log|z - X_i| - U)/(sigma sqrt n)`` from N(0, 1).

    Also reports the Berry-Esseen budget ``3 rho / (sigma^3 sqrt n)``.
    """
    family, r = _family_and_r(spec, r)
    z = complex(z)
    U = potential(z, family, r)
    s2 = centered_abs_moment(z, 2, family, r)
    if s2 < 1e-12:
        raise DegenerateVarianceError(f"log|z - X| is a.s. constant at z={z}")
    rho = centered_abs_moment(z, 3, family, r)
    sigma = math.sqrt(s2)
    rng = SeedPolicy(seed, 0).generator()
    sums = np.empty(trials)
    for t in range(trials):
        x = sample_roots(family, r, n, rng)
        with np.errstate(divide="ignore"):
            sums[t] = np.sum(np.log(np.abs(z - x)) - U)
    stat = stats.kstest(sums / (sigma * math.sqrt(n)), "norm").statistic
    return CLTDiagnostic(float(stat), 3.0 * rho / (sigma ** 3 * math.sqrt(n)), ks_noise(trials), sigma, rho, n, trials)
