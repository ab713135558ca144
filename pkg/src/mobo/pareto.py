"""Dominance tests, Pareto-front extraction and hypervolume indicators.

Minimization convention throughout: a point dominates another when it is
componentwise <= with at least one strict inequality.  Hypervolume is the
volume of objective space dominated by a front, below a reference point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import as_rng


@dataclass(frozen=True)
class FrontSet:
    """A mutually non-dominated set of objective vectors.

    ``points`` has shape (n, K).  ``provenance`` optionally carries the input
    locations that produced each objective vector.
    """

    points: np.ndarray
    provenance: np.ndarray | None = field(default=None)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("empty front")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite objective values")
        object.__setattr__(self, "points", pts)
        if self.provenance is not None:
            prov = np.atleast_2d(np.asarray(self.provenance, dtype=float))
            if prov.shape[0] != pts.shape[0]:
                raise ValueError("provenance length mismatch")
            object.__setattr__(self, "provenance", prov)

    def __len__(self) -> int:
        return self.points.shape[0]


def dominates(a, b) -> bool:
    """True iff a <= b componentwise with at least one strict inequality."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of the non-dominated subset of ``points`` (n, K).

    Duplicates of a non-dominated point are all retained.  Scans points in
    ascending order of coordinate sum; a dominating point always has a
    strictly smaller sum than the points it dominates, so each kept point can
    eliminate its dominated set once.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    alive = np.ones(n, dtype=bool)
    order = np.argsort(pts.sum(axis=1), kind="stable")
    for i in order:
        if not alive[i]:
            continue
        p = pts[i]
        dominated = np.all(pts >= p, axis=1) & np.any(pts > p, axis=1)
        dominated[i] = False
        alive &= ~dominated
    return alive


def pareto_front(points, provenance=None) -> FrontSet:
    """Extract the non-dominated subset of a list of objective vectors."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("empty input")
    mask = non_dominated_mask(pts)
    prov = None
    if provenance is not None:
        prov = np.atleast_2d(np.asarray(provenance, dtype=float))[mask]
    return FrontSet(pts[mask], prov)


def _clip_front(points: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Drop points at or beyond the reference, keep the non-dominated rest."""
    keep = np.all(points < reference, axis=1)
    pts = points[keep]
    if pts.shape[0] == 0:
        return pts
    return pts[non_dominated_mask(pts)]


def _hv2d(points: np.ndarray, reference: np.ndarray) -> float:
    # points assumed clipped and non-dominated
    if points.shape[0] == 0:
        return 0.0
    order = np.argsort(points[:, 0], kind="stable")
    pts = points[order]
    hv = 0.0
    prev_y = reference[1]
    for x, y in pts:
        if y < prev_y:
            hv += (reference[0] - x) * (prev_y - y)
            prev_y = y
    return hv


def _hv3d(points: np.ndarray, reference: np.ndarray) -> float:
    # slab decomposition along the third objective
    if points.shape[0] == 0:
        return 0.0
    zs = np.unique(points[:, 2])
    levels = np.append(zs, reference[2])
    hv = 0.0
    for j in range(len(zs)):
        z_lo, z_hi = levels[j], levels[j + 1]
        if z_hi <= z_lo:
            continue
        active = points[points[:, 2] <= z_lo][:, :2]
        active = active[non_dominated_mask(active)]
        hv += (z_hi - z_lo) * _hv2d(active, reference[:2])
    return hv


def hypervolume_mc(front: FrontSet, reference, n_samples: int = 10**6,
                   rng=None) -> tuple[float, float]:
    """Monte-Carlo box-counting hypervolume estimate with its standard error."""
    reference = np.asarray(reference, dtype=float)
    rng = as_rng(rng)
    pts = _clip_front(front.points, reference)
    if pts.shape[0] == 0:
        return 0.0, 0.0
    lo = pts.min(axis=0)
    vol = float(np.prod(reference - lo))
    hits = 0
    total = 0
    batch = 200_000
    while total < n_samples:
        b = min(batch, n_samples - total)
        z = rng.uniform(lo, reference, size=(b, len(reference)))
        inside = np.zeros(b, dtype=bool)
        for p in pts:
            inside |= np.all(z >= p, axis=1)
        hits += int(inside.sum())
        total += b
    p_hat = hits / total
    est = vol * p_hat
    se = vol * np.sqrt(max(p_hat * (1 - p_hat), 0.0) / total)
    return est, se


def hypervolume(front: FrontSet, reference, rng=None,
                n_samples: int = 10**6) -> float:
    """Hypervolume of a front w.r.t. a reference point.

    Exact for K=2 (sweep) and K=3 (slab decomposition); Monte-Carlo estimate
    for K >= 4.  Points at or beyond the reference are clipped out.
    """
    reference = np.asarray(reference, dtype=float)
    pts = _clip_front(front.points, reference)
    if pts.shape[0] == 0:
        return 0.0
    k = pts.shape[1]
    if k == 1:
        return float(reference[0] - pts.min())
    if k == 2:
        return _hv2d(pts, reference)
    if k == 3:
        return _hv3d(pts, reference)
    return hypervolume_mc(front, reference, n_samples=n_samples, rng=rng)[0]


LOG_HV_FLOOR = float(np.log(1e-12))


def log_relative_hv_diff(hv_true: float, hv_rec: float) -> float:
    """log((hv_true - hv_rec) / hv_true), floored at log(1e-12)."""
    if hv_true <= 0:
        raise ValueError("hv_true must be positive")
    rel = (hv_true - hv_rec) / hv_true
    if rel <= 1e-12:
        return LOG_HV_FLOOR
    return float(np.log(rel))
