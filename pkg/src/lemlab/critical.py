"""Critical points of root-form polynomials.

The production solver runs Ehrlich-Aberth iteration on ``P'`` without ever
forming coefficients: the Newton ratio ``P'/P''`` is ``S1/(S1**2 - S2)`` where
``S1, S2`` are the first two power sums of ``1/(z - X_i)``. A slow coefficient
based solver is kept as an independent check for small degree.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .errors import DegreeTooLargeError, NoConvergenceError, UnconvergedCriticalError, ValidationError
from .poly import RootedPolynomial, check_simple

RESIDUAL_TOL = 1e-10
MAX_SWEEPS = 500
POLE_GUARD = 1e-13
POLE_KICK = 1e-6
MAX_KICKS = 10
ORACLE_MAX_DEGREE = 24
SIMPLE_INPUT_TOL = 1e-10
CLUSTER_RADIUS = 1e-3
CLUSTER_NODES = 128

_EPS = np.finfo(np.float64).eps
_GOLDEN = 0.6180339887498949


@dataclass
class CriticalSet:
    """Critical points of a polynomial, counted with multiplicity."""

    points: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: np.ndarray
    method: str = "aberth"

    def __len__(self):
        return int(self.points.size)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def to_dict(self) -> dict:
        return {
            "critical_points": [[float(z.real), float(z.imag)] for z in self.points],
            "residuals": [float(r) for r in self.residuals],
            "converged": [bool(c) for c in self.converged],
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_dict(cls, doc) -> "CriticalSet":
        pts = np.array([complex(a, b) for a, b in doc["critical_points"]], dtype=np.complex128)
        res = np.asarray(doc.get("residuals", np.zeros(pts.size)), dtype=float)
        conv = np.asarray(doc.get("converged", np.ones(pts.size, bool)), dtype=bool)
        return cls(pts, res, int(doc.get("iterations", 0)), conv)


def _hashed_direction(k):
    return np.exp(2j * np.pi * ((k * _GOLDEN) % 1.0))


@numba.njit(cache=True)
def _root_sums(roots):
    """``A_i = sum_{j != i} 1/(X_i - X_j)`` and ``sum_{j != i} log|X_i - X_j|``."""
    n = roots.size
    a = np.zeros(n, dtype=np.complex128)
    lg = np.zeros(n)
    for i in range(n):
        s = 0j
        t = 0.0
        for j in range(n):
            if j != i:
                d = roots[i] - roots[j]
                s += 1.0 / d
                t += math.log(abs(d))
        a[i] = s
        lg[i] = t
    return a, lg


@numba.njit(cache=True)
def _aberth_sweeps(roots, z, max_sweeps, tol, kick_dirs):
    n = roots.size
    m = z.size
    converged = np.zeros(m, dtype=np.bool_)
    resid = np.full(m, np.inf)
    kicks = np.zeros(m, dtype=np.int64)
    failed = np.zeros(m, dtype=np.bool_)
    eps = 2.220446049250313e-16
    sweeps = 0
    for sweep in range(max_sweeps + 1):
        active = 0
        for k in range(m):
            if converged[k] or failed[k]:
                continue
            b = z[k]
            dmin = np.inf
            for j in range(n):
                d = abs(b - roots[j])
                if d < dmin:
                    dmin = d
            if dmin < POLE_GUARD:
                kicks[k] += 1
                if kicks[k] > MAX_KICKS:
                    failed[k] = True
                    continue
                z[k] = b + POLE_KICK * kick_dirs[k]
                active += 1
                continue
            s1 = 0j
            s2 = 0j
            a1 = 0.0
            a2 = 0.0
            for j in range(n):
                w = 1.0 / (b - roots[j])
                s1 += w
                s2 += w * w
                aw = abs(w)
                a1 += aw
                a2 += aw * aw
            r = abs(s1) / a1
            resid[k] = r
            # residual floor: evaluation error at the nearest representable point
            floor = 16.0 * eps * (1.0 + abs(b) * a2 / a1)
            if r < tol or r <= floor:
                converged[k] = True
                continue
            if sweep == max_sweeps:
                continue
            active += 1
            den = s1 * s1 - s2
            if den == 0:
                kicks[k] += 1
                z[k] = b + POLE_KICK * kick_dirs[k]
                continue
            newton = s1 / den
            acc = 0j
            for j in range(m):
                if j != k:
                    dz = b - z[j]
                    if dz != 0:
                        acc += 1.0 / dz
            corr = 1.0 - newton * acc
            if corr == 0 or not np.isfinite(corr.real) or not np.isfinite(corr.imag):
                step = newton
            else:
                step = newton / corr
            z[k] = b - step
        sweeps = sweep
        if active == 0:
            break
    return z, resid, converged, sweeps


def initial_guesses(poly: RootedPolynomial) -> np.ndarray:
    """One seed per root except the one with the largest ``|P'|``.

    Each seed is the zero of the local model ``1/(z - X_i) + A_i`` of ``P'/P``
    near ``X_i``, pulled back to at most half the nearest-neighbour distance.
    """
    from .poly import nearest_neighbor_distances

    roots = poly.roots
    n = roots.size
    a, lg = _root_sums(roots)
    nn = nearest_neighbor_distances(roots)
    drop = int(np.argmax(lg))
    idx = np.array([i for i in range(n) if i != drop], dtype=np.int64)
    dirs = _hashed_direction(np.arange(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(a != 0, -1.0 / a, 0.5 * nn * dirs)
    lim = 0.5 * nn
    big = np.abs(off) > lim
    off[big] = off[big] / np.abs(off[big]) * lim[big]
    bad = ~np.isfinite(off) | (off == 0)
    off[bad] = 0.5 * nn[bad] * dirs[bad]
    return (roots + off)[idx]


def _sorted_order(points):
    return np.lexsort((points.imag, points.real))


def solve_critical_points(
    poly: RootedPolynomial,
    max_sweeps: int = MAX_SWEEPS,
    tol: float = RESIDUAL_TOL,
    raise_on_failure: bool = True,
) -> CriticalSet:
    """All ``n - 1`` critical points by simultaneous Ehrlich-Aberth iteration.

    Raises
    ------
    MultipleRootError
        Two roots closer than ``1e-10``.
    NoConvergenceError
        Some iterate failed to converge within ``max_sweeps`` sweeps.
    """
    n = poly.degree
    if n < 2:
        raise ValidationError("a polynomial of degree < 2 has no critical points")
    check_simple(poly, tol=SIMPLE_INPUT_TOL)
    z0 = initial_guesses(poly)
    kick = _hashed_direction(np.arange(1, n))
    z, resid, conv, sweeps = _aberth_sweeps(poly.roots, z0.copy(), int(max_sweeps), float(tol), kick)
    if np.all(conv):
        z, resid = _refine_clusters(poly.roots, z, resid)
    order = _sorted_order(z)
    cs = CriticalSet(z[order], resid[order], int(sweeps), conv[order])
    if raise_on_failure and not cs.all_converged:
        raise NoConvergenceError(np.flatnonzero(~cs.converged))
    return cs


def _normalized_residual(roots, z):
    w = 1.0 / (z[:, None] - roots[None, :])
    return np.abs(w.sum(axis=1)) / np.abs(w).sum(axis=1)


def _refine_clusters(roots, z, resid, radius=CLUSTER_RADIUS, nodes=CLUSTER_NODES):
    """Re-centre groups of nearly coincident critical points.

    Each point of an m-fold cluster is only determined to about ``eps**(1/m)``,
    but the cluster's sum is well conditioned. It is recovered as the contour
    integral of ``z P''/P' / (2 pi i)`` on a circle around the cluster (trapezoid
    rule, ``P''/P' = S1 - S2/S1``) and the group is translated to match.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    from scipy.spatial import cKDTree

    if z.size < 2:
        return z, resid
    pts = np.column_stack([z.real, z.imag])
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if pairs.size == 0:
        return z, resid
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(z.size, z.size))
    ncomp, lab = connected_components(g, directed=False)
    z = z.copy()
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    for c in range(ncomp):
        idx = np.flatnonzero(lab == c)
        if idx.size < 2:
            continue
        centre = z[idx].mean()
        diam = np.abs(z[idx] - centre).max()
        others = np.delete(z, idx)
        D = np.abs(others - centre).min() if others.size else np.inf
        rho = min(0.5 * D, max(8.0 * diam, 0.5 * np.abs(roots - centre).min()))
        if not rho > 4.0 * diam:
            continue
        u = rho * np.exp(1j * theta)
        w = 1.0 / ((centre + u)[:, None] - roots[None, :])
        s1 = w.sum(axis=1)
        h = s1 - (w * w).sum(axis=1) / s1
        count = np.mean(u * h)
        if abs(count - idx.size) > 1e-3:
            continue
        shift = np.mean(u * u * h) / idx.size
        z[idx] += centre + shift - z[idx].mean()
    moved = np.flatnonzero(np.isin(lab, [c for c in range(ncomp) if np.sum(lab == c) > 1]))
    resid = resid.copy()
    resid[moved] = _normalized_residual(roots, z[moved])
    return z, resid


# --- coefficient oracle -------------------------------------------------------


def expand_coefficients(roots) -> np.ndarray:
    """Coefficients of ``prod(z - X_i)``, lowest degree first, by convolution."""
    c = np.array([1.0 + 0j])
    for x in np.asarray(roots, dtype=np.complex128):
        c = np.convolve(c, np.array([-x, 1.0]))
    return c


def _horner(c, z):
    """Value and derivative of the ascending-coefficient polynomial ``c`` at ``z``."""
    p = np.zeros_like(z) + c[-1]
    dp = np.zeros_like(z)
    for a in c[-2::-1]:
        dp = dp * z + p
        p = p * z + a
    return p, dp


def _newton_many(c, starts, iters=200):
    z = starts.astype(np.complex128).copy()
    with np.errstate(all="ignore"):
        for _ in range(iters):
            p, dp = _horner(c, z)
            step = np.where(dp != 0, p / dp, 0)
            z = z - step
            if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(z))):
                break
    return z


def _deflate(c, root):
    # synthetic division by (z - root); ascending coefficients
    m = c.size - 1
    q = np.empty(m, dtype=np.complex128)
    q[m - 1] = c[m]
    for k in range(m - 1, 0, -1):
        q[k - 1] = c[k] + root * q[k]
    return q


def oracle_critical_points(poly: RootedPolynomial, dedup: float = 1e-7) -> CriticalSet:
    """Critical points from the expanded coefficients of ``P'``.

    Roots of ``P'`` are found by many-start Newton iteration on the
    (progressively deflated) derivative, polished on the undeflated one.
    Only safe for small degree.
    """
    n = poly.degree
    if n > ORACLE_MAX_DEGREE:
        raise DegreeTooLargeError(f"coefficient oracle limited to n <= {ORACLE_MAX_DEGREE}, got {n}")
    if n < 2:
        raise ValidationError("a polynomial of degree < 2 has no critical points")
    c = expand_coefficients(poly.roots)
    d = c[1:] * np.arange(1, n + 1)
    d = d / d[-1]
    found = []
    rem = d.copy()
    while rem.size > 1:
        deg = rem.size - 1
        if deg == 1:
            cands = np.array([-rem[0] / rem[1]])
        else:
            bound = 1.0 + np.max(np.abs(rem[:-1] / rem[-1]))
            m = 4 * deg + 8
            ang = 2 * np.pi * (np.arange(m) + 0.25) / m
            starts = np.concatenate([bound * np.exp(1j * ang), 0.5 * np.exp(1j * (ang + 0.3))])
            z = _newton_many(rem, starts)
            p, _ = _horner(rem, z)
            scale = _horner(np.abs(rem), np.abs(z).astype(np.complex128))[0].real
            score = np.abs(p) / np.maximum(scale, 1e-300)
            ok = np.isfinite(score)
            z, score = z[ok], score[ok]
            order = np.argsort(score, kind="stable")
            cands = []
            for k in order:
                if score[k] > 1e-6 and cands:
                    break
                if all(abs(z[k] - w) > dedup for w in cands):
                    cands.append(z[k])
                if len(cands) >= deg:
                    break
            cands = np.array(cands)
        for w in sorted(cands, key=abs):
            w = _newton_many(d, np.array([w]), iters=50)[0]
            found.append(w)
            rem = _deflate(rem, w)
            if rem.size <= 1:
                break
    pts = np.array(found[: n - 1], dtype=np.complex128)
    p, _ = _horner(d, pts)
    order = _sorted_order(pts)
    return CriticalSet(pts[order], np.abs(p)[order], 0, np.ones(n - 1, dtype=bool), method="oracle")


# --- pairing ------------------------------------------------------------------


@dataclass
class PairingReport:
    """Per-root proximity of critical points."""

    nearest_distance: np.ndarray
    unique_within_rn: np.ndarray
    in_annulus: np.ndarray
    r_n: float = field(default=0.0)

    @property
    def annulus_fraction(self) -> float:
        """Fraction of annulus roots with a unique critical point within ``r_n``; NaN if none."""
        if not np.any(self.in_annulus):
            return math.nan
        return float(np.mean(self.unique_within_rn[self.in_annulus]))


def annulus_mask(roots, n) -> np.ndarray:
    """Membership in ``{3 n^-1/4 < |z| < 1 - n^-1/2}``."""
    a = np.abs(roots)
    return (a > 3.0 * n ** -0.25) & (a < 1.0 - n ** -0.5)


def pairing_statistics(poly: RootedPolynomial, cps: CriticalSet) -> PairingReport:
    if not cps.all_converged:
        raise UnconvergedCriticalError("pairing statistics need a converged critical set")
    n = poly.degree
    rn = n ** -0.75
    roots = poly.roots
    if cps.points.size == 0:
        return PairingReport(np.full(n, np.inf), np.zeros(n, bool), annulus_mask(roots, n), rn)
    from scipy.spatial import cKDTree

    tree = cKDTree(np.column_stack([cps.points.real, cps.points.imag]))
    pts = np.column_stack([roots.real, roots.imag])
    dist, _ = tree.query(pts, k=1)
    counts = np.array([len(v) for v in tree.query_ball_point(pts, rn)])
    # query_ball_point is closed; the ball B(X, r_n) is open
    if np.any(counts):
        k = min(cps.points.size, int(counts.max()) + 1)
        dd, _ = tree.query(pts, k=k)
        dd = np.asarray(dd).reshape(n, k)
        counts = np.sum(dd < rn, axis=1)
    return PairingReport(np.asarray(dist), counts == 1, annulus_mask(roots, n), rn)


def hausdorff_multiset(a, b) -> float:
    """Largest matched distance under an optimal assignment between equal-size multisets."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.size != b.size:
        return math.inf
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    i, j = linear_sum_assignment(cost)
    return float(cost[i, j].max())
