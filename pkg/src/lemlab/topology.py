"""Counting lemniscate components and certifying individual roots.

The production count uses the critical-value characterisation: the number of
components of ``{|P| < 1}`` is one more than the number of critical points
with ``|P(beta)| >= 1``. A grid flood fill is kept as an independent oracle for
small degree.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from .critical import CriticalSet, pairing_statistics
from .errors import UnconvergedCriticalError, ValidationError
from .poly import (
    RootedPolynomial,
    check_simple,
    eval_quotient_at_root,
    log_abs_many,
    log_derivative_at_roots,
    nearest_neighbor_distances,
    reciprocal_gaps,
)

DEGENERACY_TOL = 1e-9
GRID_MARGIN = 1.05
GRID_START = 256
K_MAX = 64
# inverse first-moment bound 2 + p/(2 - p) 2^((p - 2)/p) at p = 1
GOOD_ROOT_CONSTANT = 2.0 + 1.0 * 2.0 ** -1.0


@dataclass
class ComponentReport:
    count: int
    method: str
    degenerate: bool = False
    critical_values_log: np.ndarray = field(default_factory=lambda: np.zeros(0))
    unstable: bool = False
    resolution: Optional[int] = None
    history: tuple = ()

    @property
    def n_critical_ge_one(self) -> int:
        if self.method == "exact":
            return int(np.sum(self.critical_values_log >= 0))
        return self.count - 1

    def to_dict(self) -> dict:
        return {
            "count": int(self.count),
            "method": self.method,
            "degenerate": bool(self.degenerate),
            "n_critical_ge_one": self.n_critical_ge_one,
        }


def count_components_exact(poly: RootedPolynomial, cps: Optional[CriticalSet] = None,
                           tol: float = DEGENERACY_TOL) -> ComponentReport:
    """``1 + #{beta : log|P(beta)| >= 0}`` over the critical points.

    ``degenerate`` is set when a critical value lies within ``tol`` of the
    level (in log scale); such counts flip under tiny perturbations.
    """
    if tol < 0:
        raise ValidationError("tol must be non-negative")
    if poly.degree == 1:
        return ComponentReport(1, "exact")
    if cps is None:
        from .critical import solve_critical_points

        cps = solve_critical_points(poly)
    if not cps.all_converged:
        raise UnconvergedCriticalError("critical set contains unconverged points")
    vals = log_abs_many(poly, cps.points)
    count = 1 + int(np.sum(vals >= 0))
    degenerate = bool(np.any(np.abs(vals) < tol))
    return ComponentReport(count, "exact", degenerate, vals)


# --- grid oracle --------------------------------------------------------------


@numba.njit(cache=True)
def _inside_mask(roots, lo, h, res):
    """``|P| < 1`` at cell centres, accumulating the modulus in blocks of 16 factors."""
    n = roots.size
    out = np.zeros((res, res), dtype=np.bool_)
    for iy in range(res):
        y = lo + (iy + 0.5) * h
        for ix in range(res):
            x = lo + (ix + 0.5) * h
            lg = 0.0
            j = 0
            while j < n:
                prod = 1.0
                stop = min(n, j + 16)
                for q in range(j, stop):
                    dx = x - roots[q].real
                    dy = y - roots[q].imag
                    prod *= dx * dx + dy * dy
                if prod == 0.0:
                    lg = -np.inf
                    break
                lg += math.log(prod)
                j = stop
            out[iy, ix] = lg < 0.0
    return out


def grid_bounds(poly: RootedPolynomial) -> float:
    """Half-width of the square box; ``Lambda`` lies in ``B(0, max|X| + 1)``."""
    return float(np.max(np.abs(poly.roots))) + GRID_MARGIN


def _grid_count(poly, res):
    R = grid_bounds(poly)
    h = 2.0 * R / res
    inside = _inside_mask(poly.roots, -R, h, res)
    labels, _ = ndimage.label(inside)
    ix = np.clip(((poly.roots.real + R) / h).astype(np.int64), 0, res - 1)
    iy = np.clip(((poly.roots.imag + R) / h).astype(np.int64), 0, res - 1)
    seeds = set()
    for a, b in zip(iy, ix):
        lab = labels[a, b]
        # a root whose cell centre is outside has a sub-cell component
        seeds.add(int(lab) if lab > 0 else (-1 - int(a) * res - int(b)))
    return len(seeds)


def count_components_grid(poly: RootedPolynomial, target_resolution: int = 2048,
                          start: int = GRID_START) -> ComponentReport:
    """Flood-fill count of root-seeded components on successively finer grids.

    The resolution doubles from ``start`` until two consecutive refinements
    leave the count unchanged; if ``target_resolution`` is exceeded first the
    report is marked unstable (and degenerate).
    """
    history = []
    res = start
    while True:
        history.append((res, _grid_count(poly, res)))
        if len(history) >= 3 and history[-1][1] == history[-2][1] == history[-3][1]:
            return ComponentReport(history[-1][1], "grid", False, resolution=res, history=tuple(history))
        if res * 2 > target_resolution:
            return ComponentReport(history[-1][1], "grid", True, unstable=True, resolution=res,
                                   history=tuple(history))
        res *= 2


# --- certificates -------------------------------------------------------------


class Condition(str, enum.Enum):
    DERIVATIVE_LOWER = "DerivativeLower"
    TAYLOR_RATIO = "TaylorRatio"
    ROOT_SEPARATION = "RootSeparation"
    DERIVATIVE_UPPER = "DerivativeUpper"
    UNIQUE_CRITICAL = "UniqueCritical"
    NONE = "None"


@dataclass(frozen=True)
class CertificateOutcome:
    holds: bool
    failed_condition: Condition
    radius_used: float


def _log_binom(N, m):
    return gammaln(N + 1) - gammaln(m + 1) - gammaln(N - m + 1)


def _log_esym_all(values):
    """``log|e_m|`` for ``m = 1..N`` via the product expansion in extended precision."""
    v = np.asarray(values, dtype=np.clongdouble)
    mu = np.mean(np.abs(v)) if v.size else 1.0
    if mu == 0:
        return np.full(v.size, -np.inf)
    w = v / mu
    e = np.zeros(v.size + 1, dtype=np.clongdouble)
    e[0] = 1
    for x in w:
        e[1:] = e[1:] + x * e[:-1]
    with np.errstate(divide="ignore"):
        out = np.log(np.abs(e[1:]).astype(np.longdouble)) + np.arange(1, v.size + 1) * np.log(mu)
    return out.astype(np.float64)


def _taylor_ratios_small(b, n):
    """All ``|e_m(b)| < 1/(2 n^2)``, with ``b`` the gaps scaled by the radius."""
    N = b.size
    if N == 0:
        return True
    thresh = -math.log(2.0 * n * n)
    M = min(N, K_MAX)
    e = np.zeros(M + 1, dtype=np.complex128)
    e[0] = 1.0
    for x in b:
        e[1:] = e[1:] + x * e[:-1]
    with np.errstate(divide="ignore"):
        head = np.log(np.abs(e[1:]))
    if np.any(head >= thresh):
        return False
    if M == N:
        return True
    # Maclaurin: |e_m| <= C(N, m) mu^m; decreasing in m once (N - m) mu < m + 1
    mu = float(np.mean(np.abs(b)))
    m = M + 1
    if mu == 0.0:
        return True
    if (N - m) * mu < m + 1 and _log_binom(N, m) + m * math.log(mu) < thresh:
        return True
    full = _log_esym_all(b)
    return bool(np.all(full < thresh))


def isolated_certificate(poly: RootedPolynomial, i: int, r: float) -> CertificateOutcome:
    """Sufficient condition for ``X_i`` to sit alone in its own component inside ``B(X_i, r)``.

    Checks root separation ``> r``, ``|P'(X_i)| r / 2 >= 1`` and
    ``|P^(k)(X_i)| r^(k-1) / (k! |P'(X_i)|) < 1/(2 n^2)`` for ``k = 2..n``.
    """
    n = poly.degree
    check_simple(poly, index=i)
    r = float(r)
    if n > 1:
        sep = float(np.min(np.abs(np.delete(poly.roots, i) - poly.roots[i])))
        if not sep > r:
            return CertificateOutcome(False, Condition.ROOT_SEPARATION, r)
    lp = eval_quotient_at_root(poly, i).log_abs
    if not lp + math.log(r / 2.0) >= 0.0:
        return CertificateOutcome(False, Condition.DERIVATIVE_LOWER, r)
    if n > 1 and not _taylor_ratios_small(reciprocal_gaps(poly, i) * r, n):
        return CertificateOutcome(False, Condition.TAYLOR_RATIO, r)
    return CertificateOutcome(True, Condition.NONE, r)


def isolated_mask(poly: RootedPolynomial, r: Optional[float] = None) -> np.ndarray:
    """Vectorised ``isolated_certificate(...).holds`` over all roots."""
    n = poly.degree
    r = float(n ** -6.0) if r is None else float(r)
    if n == 1:
        return np.array([r >= 2.0])
    check_simple(poly)
    ok = nearest_neighbor_distances(poly.roots) > r
    ok &= log_derivative_at_roots(poly) + math.log(r / 2.0) >= 0.0
    for i in np.flatnonzero(ok):
        ok[i] = _taylor_ratios_small(reciprocal_gaps(poly, i) * r, n)
    return ok


def count_isolated(poly: RootedPolynomial, r: Optional[float] = None) -> int:
    """Number of roots certified isolated at radius ``r`` (default ``n**-6``)."""
    return int(np.sum(isolated_mask(poly, r)))


def _good_ratio_ok(gaps, n, r, const):
    # |e_m(gaps)| r^m < n^2 C(N, m) (const n^-3/4)^m for all m
    b = gaps * (r / (const * n ** -0.75))
    N = b.size
    if N == 0:
        return True
    mu = float(np.mean(np.abs(b)))
    if mu <= 1.0:
        return True
    m = np.arange(1, N + 1)
    lhs = _log_esym_all(b)
    return bool(np.all(lhs < 2.0 * math.log(n) + _log_binom(N, m)))


def _unique_critical(cps, x, r):
    if cps is None or cps.points.size == 0:
        return False
    return int(np.sum(np.abs(cps.points - x) < r)) == 1


def good_root_certificate(poly: RootedPolynomial, cps: Optional[CriticalSet], i: int,
                          r: Optional[float] = None,
                          ratio_constant: float = GOOD_ROOT_CONSTANT) -> CertificateOutcome:
    """Sufficient condition for ``B(X_i, r)`` to lie in the lemniscate around a unique critical point.

    Checks separation ``> 3r``, ``|P'(X_i)| < exp(-sqrt(n)/2)``, the
    higher-derivative ratio bounds and exactly one critical point in ``B(X_i, r)``.
    """
    n = poly.degree
    r = float(n ** -0.75) if r is None else float(r)
    if n == 1:
        return CertificateOutcome(False, Condition.UNIQUE_CRITICAL, r)
    check_simple(poly, index=i)
    if cps is not None and not cps.all_converged:
        raise UnconvergedCriticalError("critical set contains unconverged points")
    x = poly.roots[i]
    if not float(np.min(np.abs(np.delete(poly.roots, i) - x))) > 3.0 * r:
        return CertificateOutcome(False, Condition.ROOT_SEPARATION, r)
    if not eval_quotient_at_root(poly, i).log_abs < -math.sqrt(n) / 2.0:
        return CertificateOutcome(False, Condition.DERIVATIVE_UPPER, r)
    if not _good_ratio_ok(reciprocal_gaps(poly, i), n, r, ratio_constant):
        return CertificateOutcome(False, Condition.TAYLOR_RATIO, r)
    if not _unique_critical(cps, x, r):
        return CertificateOutcome(False, Condition.UNIQUE_CRITICAL, r)
    return CertificateOutcome(True, Condition.NONE, r)


def good_root_mask(poly: RootedPolynomial, cps: CriticalSet, r: Optional[float] = None,
                   ratio_constant: float = GOOD_ROOT_CONSTANT) -> np.ndarray:
    """Vectorised ``good_root_certificate(...).holds`` over all roots."""
    n = poly.degree
    r = float(n ** -0.75) if r is None else float(r)
    if n == 1:
        return np.zeros(1, dtype=bool)
    check_simple(poly)
    if not cps.all_converged:
        raise UnconvergedCriticalError("critical set contains unconverged points")
    ok = nearest_neighbor_distances(poly.roots) > 3.0 * r
    ok &= log_derivative_at_roots(poly) < -math.sqrt(n) / 2.0
    rep = pairing_statistics(poly, cps)
    counts_one = _unique_counts(poly, cps, r) if r != rep.r_n else rep.unique_within_rn
    ok &= counts_one
    for i in np.flatnonzero(ok):
        ok[i] = _good_ratio_ok(reciprocal_gaps(poly, i), n, r, ratio_constant)
    return ok


def _unique_counts(poly, cps, r):
    d = np.abs(poly.roots[:, None] - cps.points[None, :])
    return np.sum(d < r, axis=1) == 1
