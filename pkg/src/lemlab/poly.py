"""Root-form polynomials.

A polynomial is only ever stored as its root multiset ``P(z) = prod(z - X_i)``.
Magnitudes are handled as sums of logarithms, so nothing here overflows for
large degree.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import MultipleRootError, NearRootError, ValidationError

NEAR_ROOT_RTOL = 1e-14
SIMPLE_ROOT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RootedPolynomial:
    """Monic polynomial given by its roots.

    Parameters
    ----------
    roots : array_like of complex
        The root multiset, length ``n >= 1``.
    r_max : float
        Support radius of the generating ensemble (``inf`` when built by hand).
    family, scale, seed :
        Provenance of sampled polynomials; ``None`` for manual construction.
    """

    roots: np.ndarray
    r_max: float = math.inf
    family: Optional[str] = None
    scale: Optional[float] = None
    seed: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        roots = np.array(self.roots, dtype=np.complex128).ravel()
        if roots.size < 1:
            raise ValidationError("a polynomial needs at least one root")
        if not np.all(np.isfinite(roots)):
            raise ValidationError("roots must be finite")
        roots.setflags(write=False)
        object.__setattr__(self, "roots", roots)

    @property
    def degree(self) -> int:
        return int(self.roots.size)

    def __len__(self):
        return self.degree

    def __eq__(self, other):
        if not isinstance(other, RootedPolynomial):
            return NotImplemented
        return np.array_equal(self.roots, other.roots)

    __hash__ = None


class LogEval(NamedTuple):
    """``log|P(z)|`` and ``arg P(z)``; ``at_root`` marks an exact root hit."""

    log_abs: float
    phase: float
    at_root: bool = False


def _reduce_phase(theta):
    # into (-pi, pi]
    t = math.remainder(theta, 2.0 * math.pi)
    return math.pi if t == -math.pi else t


def log_abs_eval(poly: RootedPolynomial, z) -> LogEval:
    """Evaluate ``log|P(z)|`` as a sum of ``log|z - X_i|`` and the phase of ``P(z)``."""
    z = complex(z)
    d = z - poly.roots
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(d))
    if np.any(d == 0):
        return LogEval(-math.inf, 0.0, True)
    return LogEval(math.fsum(logs), _reduce_phase(math.fsum(np.angle(d))), False)


def log_abs_many(poly: RootedPolynomial, z, chunk: int = 1 << 20) -> np.ndarray:
    """Vectorised ``log|P|`` at an array of points (no phase)."""
    z = np.asarray(z, dtype=np.complex128)
    flat = z.ravel()
    out = np.empty(flat.shape, dtype=np.float64)
    roots = poly.roots
    step = max(1, chunk // max(1, roots.size))
    with np.errstate(divide="ignore"):
        for s in range(0, flat.size, step):
            block = flat[s:s + step, None] - roots[None, :]
            out[s:s + step] = np.log(np.abs(block)).sum(axis=1)
    return out.reshape(z.shape)


def _check_not_root(poly, z):
    d = np.abs(z - poly.roots)
    i = int(np.argmin(d))
    if d[i] <= NEAR_ROOT_RTOL * (1.0 + abs(z)):
        raise NearRootError(i, d[i])


def power_sums(poly: RootedPolynomial, z, K: int) -> np.ndarray:
    """Return ``S[k-1] = sum_i (z - X_i)**-k`` for ``k = 1..K``.

    ``S[0]`` is the logarithmic derivative ``P'(z)/P(z)``.
    """
    z = complex(z)
    K = int(K)
    if not 1 <= K <= poly.degree:
        raise ValidationError(f"K must lie in 1..{poly.degree}, got {K}")
    _check_not_root(poly, z)
    w = 1.0 / (z - poly.roots)
    powers = np.cumprod(np.broadcast_to(w[:, None], (w.size, K)), axis=1)
    return powers.sum(axis=0)


def _csum(terms):
    terms = np.asarray(terms, dtype=np.complex128)
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def elementary_symmetric(values: Sequence[complex], K: int, method: str = "newton") -> np.ndarray:
    """Elementary symmetric functions ``e_1..e_K`` of ``values``.

    ``method="newton"`` runs Newton's identities on the power sums with
    exactly-rounded accumulation of each recursion step. ``method="product"``
    expands ``prod(1 + v t)`` term by term instead; it is backward stable and is
    what the certificate code uses when one value dominates the rest.
    """
    v = np.asarray(values, dtype=np.complex128).ravel()
    K = int(K)
    if K < 0 or K > v.size:
        raise ValidationError(f"K must lie in 0..{v.size}, got {K}")
    if K == 0:
        return np.zeros(0, dtype=np.complex128)
    if method == "product":
        e = np.zeros(K + 1, dtype=np.complex128)
        e[0] = 1.0
        for x in v:
            e[1:] = e[1:] + x * e[:-1]
        return e[1:]
    if method != "newton":
        raise ValidationError(f"unknown method {method!r}")
    p = np.empty(K + 1, dtype=np.complex128)
    vp = np.ones_like(v)
    for i in range(1, K + 1):
        vp = vp * v
        p[i] = _csum(vp)
    e = np.empty(K + 1, dtype=np.complex128)
    e[0] = 1.0
    for k in range(1, K + 1):
        i = np.arange(1, k + 1)
        signs = np.where(i % 2 == 1, 1.0, -1.0)
        e[k] = _csum(signs * e[k - i] * p[i]) / k
    return e[1:]


def check_simple(poly: RootedPolynomial, tol: float = SIMPLE_ROOT_TOL, index: Optional[int] = None):
    """Raise ``MultipleRootError`` unless the root(s) are separated by more than ``tol``."""
    roots = poly.roots
    if roots.size < 2:
        return
    if index is not None:
        d = np.abs(roots - roots[index])
        d[index] = np.inf
        j = int(np.argmin(d))
        if d[j] <= tol:
            raise MultipleRootError(index, j, d[j])
        return
    order = np.argsort(roots.real, kind="stable")
    r = roots[order]
    # sweep in real part: only neighbours within tol in x can be within tol
    for a in range(r.size - 1):
        b = a + 1
        while b < r.size and r[b].real - r[a].real <= tol:
            if abs(r[b] - r[a]) <= tol:
                raise MultipleRootError(order[a], order[b], abs(r[b] - r[a]))
            b += 1


def reciprocal_gaps(poly: RootedPolynomial, i: int) -> np.ndarray:
    """``1/(X_i - X_j)`` for all ``j != i``."""
    roots = poly.roots
    d = roots[i] - np.delete(roots, i)
    return 1.0 / d


def derivative_ratio_at_root(poly: RootedPolynomial, i: int, k: int) -> float:
    """``|P^(k)(X_i) / P'(X_i)| / k!`` at a simple root.

    Equals ``|e_{k-1}|`` of the reciprocal gaps ``1/(X_i - X_j)``.
    """
    n = poly.degree
    if not 2 <= k <= n:
        raise ValidationError(f"k must lie in 2..{n}, got {k}")
    check_simple(poly, index=i)
    e = elementary_symmetric(reciprocal_gaps(poly, i), k - 1, method="product")
    return float(abs(e[k - 2]))


def eval_quotient_at_root(poly: RootedPolynomial, i: int) -> LogEval:
    """``log|P'(X_i)|`` and ``arg P'(X_i)`` where ``P'(X_i) = prod_{j != i} (X_i - X_j)``."""
    check_simple(poly, index=i)
    if poly.degree == 1:
        return LogEval(0.0, 0.0, False)
    d = poly.roots[i] - np.delete(poly.roots, i)
    return LogEval(math.fsum(np.log(np.abs(d))), _reduce_phase(math.fsum(np.angle(d))), False)


def log_derivative_at_roots(poly: RootedPolynomial) -> np.ndarray:
    """``log|P'(X_i)|`` for every root at once (``-inf`` for repeated roots)."""
    roots = poly.roots
    n = roots.size
    out = np.empty(n)
    step = max(1, (1 << 20) // n)
    with np.errstate(divide="ignore"):
        for s in range(0, n, step):
            d = np.abs(roots[s:s + step, None] - roots[None, :])
            d[np.arange(d.shape[0]), np.arange(s, s + d.shape[0])] = 1.0
            out[s:s + step] = np.log(d).sum(axis=1)
    return out


def nearest_neighbor_distances(roots: np.ndarray) -> np.ndarray:
    """Distance from each root to its nearest other root."""
    roots = np.asarray(roots, dtype=np.complex128)
    if roots.size < 2:
        return np.full(roots.size, np.inf)
    from scipy.spatial import cKDTree

    pts = np.column_stack([roots.real, roots.imag])
    dist, _ = cKDTree(pts).query(pts, k=2)
    return dist[:, 1]
