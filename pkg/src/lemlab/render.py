"""Contour extraction of ``log|P| = 0`` by marching squares, and SVG output."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numba
import numpy as np

from .critical import CriticalSet, solve_critical_points
from .errors import ValidationError
from .poly import RootedPolynomial, log_abs_many, log_derivative_at_roots
from .topology import grid_bounds

MIN_RESOLUTION = 64
LOG_FLOOR = -60.0
NEAR_DEGENERATE_CELLS = 2.0


@numba.njit(cache=True)
def _corner_field(roots, lo, h, m):
    """``log|P|`` on the ``m x m`` lattice ``lo + k h``; row index is y."""
    n = roots.size
    out = np.empty((m, m))
    for iy in range(m):
        y = lo + iy * h
        for ix in range(m):
            x = lo + ix * h
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
            out[iy, ix] = 0.5 * lg
    return out


@dataclass
class ContourSet:
    """Closed polylines (``(k, 2)`` arrays, first row repeated last) of the level set."""

    polylines: List[np.ndarray]
    bounds: tuple
    resolution: int
    near_degenerate: bool = False
    critical_points: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    def __len__(self):
        return len(self.polylines)

    @property
    def cell_size(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / self.resolution


def _interp(v0, v1):
    return v0 / (v0 - v1)


def _march(poly, cx, cy, half, res):
    """Closed polylines of ``log|P| = 0`` in a box; ``None`` if the box border is not all outside."""
    h = 2.0 * half / res
    shifted = poly.roots - complex(cx, cy)
    F = np.maximum(_corner_field(shifted, -half, h, res + 1), LOG_FLOOR)
    inside = F < 0.0
    if inside[0].any() or inside[-1].any() or inside[:, 0].any() or inside[:, -1].any():
        return None
    xs = -half + h * np.arange(res + 1)

    # crossing points, addressed by edge id
    nh = (res + 1) * res
    hcross = inside[:, :-1] != inside[:, 1:]           # edge (iy, ix)-(iy, ix+1)
    vcross = inside[:-1, :] != inside[1:, :]           # edge (iy, ix)-(iy+1, ix)
    pts = np.full((nh + res * (res + 1), 2), np.nan)
    iy, ix = np.nonzero(hcross)
    t = _interp(F[iy, ix], F[iy, ix + 1])
    pts[iy * res + ix] = np.column_stack([xs[ix] + t * h, xs[iy]])
    iy, ix = np.nonzero(vcross)
    t = _interp(F[iy, ix], F[iy + 1, ix])
    pts[nh + iy * (res + 1) + ix] = np.column_stack([xs[ix], xs[iy] + t * h])

    # per cell: bottom, right, top, left edge ids
    cy_, cx_ = np.nonzero(hcross[:-1, :] | hcross[1:, :] | vcross[:, :-1] | vcross[:, 1:])
    e_b = cy_ * res + cx_
    e_t = (cy_ + 1) * res + cx_
    e_l = nh + cy_ * (res + 1) + cx_
    e_r = e_l + 1
    c0 = inside[cy_, cx_]
    c1 = inside[cy_, cx_ + 1]
    c2 = inside[cy_ + 1, cx_ + 1]
    c3 = inside[cy_ + 1, cx_]
    saddle = (c0 == c2) & (c1 == c3) & (c0 != c1)
    centre_in = np.zeros(cy_.size, dtype=bool)
    if np.any(saddle):
        zc = (xs[cx_[saddle]] + 0.5 * h) + 1j * (xs[cy_[saddle]] + 0.5 * h)
        centre_in[saddle] = log_abs_many(RootedPolynomial(shifted), zc) < 0.0

    nbr = {}

    def link(a, b):
        nbr.setdefault(a, []).append(b)
        nbr.setdefault(b, []).append(a)

    for k in range(cy_.size):
        b, r_, t_, l_ = int(e_b[k]), int(e_r[k]), int(e_t[k]), int(e_l[k])
        if saddle[k]:
            # cut off the two corners lying on the opposite side from the centre
            if c0[k] != centre_in[k]:
                link(l_, b)
                link(r_, t_)
            else:
                link(b, r_)
                link(t_, l_)
            continue
        ids = [e for e in (b, r_, t_, l_) if not np.isnan(pts[e, 0])]
        link(ids[0], ids[1])

    polylines = []
    seen = set()
    for start in sorted(nbr):
        if start in seen:
            continue
        cycle = [start]
        seen.add(start)
        # every crossing edge is shared by exactly two cells, so the graph is a union of cycles
        prev, cur = start, min(nbr[start])
        while cur != start:
            cycle.append(cur)
            seen.add(cur)
            a, b = nbr[cur]
            prev, cur = cur, (b if a == prev else a)
        line = pts[cycle] + np.array([cx, cy])
        polylines.append(np.vstack([line, line[:1]]))
    return polylines


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd ray casting of complex ``points`` against a closed ``(k, 2)`` polyline."""
    x, y = points.real[:, None], points.imag[:, None]
    x0, y0 = poly[:-1, 0][None, :], poly[:-1, 1][None, :]
    x1, y1 = poly[1:, 0][None, :], poly[1:, 1][None, :]
    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return (np.sum(straddle & (x < xc), axis=1) % 2) == 1


def extract_contours(poly: RootedPolynomial, resolution: int = 512,
                     cps: Optional[CriticalSet] = None) -> ContourSet:
    """Marching squares on corner samples of ``log|P|`` over the box holding the lemniscate.

    Saddle cells (diagonal corners on the same side) are resolved with an
    extra sample at the cell centre: when the centre is inside, the two inside
    corners are joined through the cell. Roots left uncovered because their
    component is smaller than a cell get a local box of half-width about
    ``4/|P'(X_i)|`` at the same resolution.
    """
    res = int(resolution)
    if res < MIN_RESOLUTION:
        raise ValidationError(f"resolution must be >= {MIN_RESOLUTION}")
    R = grid_bounds(poly)
    h = 2.0 * R / res
    roots = poly.roots
    covered = np.zeros(roots.size, dtype=bool)
    polylines = []
    for line in _march(poly, 0.0, 0.0, R, res):
        hit = points_in_polygon(roots, line)
        # every component holds a root; a root-free loop is a cell-sized component seen too coarsely
        if hit.any():
            polylines.append(line)
            covered |= hit
    subres = False
    if not covered.all():
        logd = log_derivative_at_roots(poly)
        for i in np.flatnonzero(~covered):
            if covered[i]:
                continue
            half = min(h, 4.0 * math.exp(min(-logd[i], 700.0)))
            if half < 64 * np.finfo(float).eps * (1.0 + abs(roots[i])):
                subres = True
                continue
            local = None
            while local is None and half <= 4 * h:
                local = _march(poly, roots[i].real, roots[i].imag, half, MIN_RESOLUTION)
                half *= 2.0
            if local is None:
                subres = True
                continue
            for line in local:
                hit = points_in_polygon(roots, line)
                if np.any(hit & ~covered):
                    polylines.append(line)
                    covered |= hit

    if cps is None and poly.degree >= 2:
        cps = solve_critical_points(poly, raise_on_failure=False)
    crit = cps.points if cps is not None else np.zeros(0, complex)
    near = subres
    if crit.size and polylines:
        allpts = np.vstack(polylines)
        d = np.abs((allpts[:, 0] + 1j * allpts[:, 1])[None, :] - crit[:, None]).min()
        near = near or bool(d < NEAR_DEGENERATE_CELLS * h)
    return ContourSet(polylines, (-R, R, -R, R), res, near, crit)


# --- SVG ------------------------------------------------------------------------


@dataclass
class Overlays:
    roots: Optional[np.ndarray] = None
    critical_points: Optional[np.ndarray] = None
    reference_circle: Optional[float] = None


def _fmt(v):
    return f"{v:.4f}"


def svg_document(contours: ContourSet, overlays: Optional[Overlays] = None, size: int = 800) -> str:
    overlays = overlays or Overlays()
    x0, x1, y0, y1 = contours.bounds
    s = size / max(x1 - x0, y1 - y0)

    def px(x, y):
        return _fmt((x - x0) * s), _fmt((y1 - y) * s)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for line in contours.polylines:
        coords = [" ".join(px(x, y)) for x, y in line[:-1]]
        out.append(f'<path class="lemniscate" d="M {" L ".join(coords)} Z" fill="#cfe0f5" '
                   f'stroke="#1f4e9c" stroke-width="1"/>')
    if overlays.reference_circle is not None:
        cx, cy = px(0.0, 0.0)
        out.append(f'<circle class="reference" cx="{cx}" cy="{cy}" r="{_fmt(overlays.reference_circle * s)}" '
                   f'fill="none" stroke="#888888" stroke-dasharray="4 3"/>')
    for z in (overlays.roots if overlays.roots is not None else ()):
        cx, cy = px(z.real, z.imag)
        out.append(f'<circle class="root" cx="{cx}" cy="{cy}" r="2" fill="#b22222"/>')
    for z in (overlays.critical_points if overlays.critical_points is not None else ()):
        cx, cy = px(z.real, z.imag)
        out.append(f'<rect class="critical" x="{_fmt(float(cx) - 1.5)}" y="{_fmt(float(cy) - 1.5)}" '
                   f'width="3" height="3" fill="#2e8b57"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_svg(contours: ContourSet, overlays: Optional[Overlays] = None, path=None, size: int = 800) -> str:
    """Write (when ``path`` is given) and return the SVG text; identical inputs give identical bytes."""
    doc = svg_document(contours, overlays, size)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(doc)
    return doc
