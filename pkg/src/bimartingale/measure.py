"""Discrete probability measures on R^d."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

WEIGHT_TOL = 1e-12
RENORMALIZE_TOL = 1e-6
MERGE_FACTOR = 1e-9


class MeasureError(ValueError):
    """Invalid measure data."""


def _merge_atoms(points, weights, radius):
    """Greedy merge of atoms closer than ``radius``.

    Atoms are visited in lexicographic order; each unassigned atom opens a
    cluster that absorbs every unassigned atom within ``radius`` of it. The
    merged atom sits at the mass-weighted mean. Input order is kept (by the
    first member of each cluster), and untouched atoms keep their exact bits.
    """
    n = len(weights)
    if n <= 1 or radius <= 0:
        return points, weights
    order = np.lexsort(points.T[::-1])
    first = points[order, 0]
    label = np.full(n, -1)
    for pos in range(n):
        i = order[pos]
        if label[i] >= 0:
            continue
        hi = np.searchsorted(first, first[pos] + radius, side="right")
        cand = order[pos:hi]
        cand = cand[label[cand] < 0]
        close = cand[np.linalg.norm(points[cand] - points[i], axis=1) <= radius]
        label[close] = i
    if np.all(label == np.arange(n)):
        return points, weights
    heads = np.unique(label)
    out_p = np.empty((heads.size, points.shape[1]))
    out_w = np.empty(heads.size)
    for k, h in enumerate(heads):
        members = np.flatnonzero(label == h)
        mass = weights[members].sum()
        out_w[k] = mass
        out_p[k] = points[h] if members.size == 1 else weights[members] @ points[members] / mass
    return out_p, out_w


class DiscreteMeasure:
    """Finitely supported probability measure ``sum_i w_i delta_{x_i}``.

    Construction validates and normalizes: zero-weight atoms are dropped,
    a total mass within ``1e-6`` of one is renormalized, and atoms closer
    than ``merge_radius`` (default ``1e-9 * (1 + diameter)``) are merged.
    Instances are immutable.
    """

    __slots__ = ("_points", "_weights")

    def __init__(self, points, weights, merge_radius: float | None = None):
        points = np.asarray(points, dtype=float)
        weights = np.asarray(weights, dtype=float).ravel()
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[0] != weights.size:
            raise MeasureError("points must be an (n, d) array matching the weights")
        if points.shape[1] < 1:
            raise MeasureError("dimension must be positive")
        if weights.size == 0:
            raise MeasureError("a measure needs at least one atom")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
            raise MeasureError("non-finite atom data")
        if np.any(weights < 0):
            raise MeasureError("negative weight")
        total = weights.sum()
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise MeasureError(f"weights sum to {total!r}, not 1")
        keep = weights > 0
        points, weights = points[keep].copy(), weights[keep].copy()
        if abs(total - 1.0) > WEIGHT_TOL:
            weights /= total
        if merge_radius is None:
            merge_radius = MERGE_FACTOR * (1.0 + _diameter(points))
        points, weights = _merge_atoms(points, weights, merge_radius)
        points.flags.writeable = False
        weights.flags.writeable = False
        self._points = points
        self._weights = weights

    @classmethod
    def _trusted(cls, points, weights):
        obj = object.__new__(cls)
        points = np.array(points, dtype=float)
        weights = np.array(weights, dtype=float)
        points.flags.writeable = False
        weights.flags.writeable = False
        obj._points = points
        obj._weights = weights
        return obj

    @classmethod
    def dirac(cls, point):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(point[None, :], [1.0])

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self):
        return self._weights.size

    def __iter__(self):
        return iter(zip(self._weights, self._points))

    def __repr__(self):
        return f"DiscreteMeasure(dim={self.dim}, atoms={len(self)})"

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.dim == other.dim and len(self) == len(other)
                and np.array_equal(self._points, other._points)
                and np.array_equal(self._weights, other._weights))

    __hash__ = None

    def sorted(self) -> "DiscreteMeasure":
        order = np.lexsort(self._points.T[::-1])
        return DiscreteMeasure._trusted(self._points[order], self._weights[order])

    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-9) -> bool:
        """Atom-for-atom comparison after lexicographic sorting."""
        a, b = self.sorted(), other.sorted()
        return (a.dim == b.dim and len(a) == len(b)
                and np.allclose(a.points, b.points, atol=atol, rtol=0)
                and np.allclose(a.weights, b.weights, atol=atol, rtol=0))


def _diameter(points) -> float:
    if len(points) < 2:
        return 0.0
    # bounding-box diagonal: cheap and within a factor sqrt(d) of the diameter
    return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))


def diameter(m: DiscreteMeasure) -> float:
    return _diameter(m.points)


def barycentre(m: DiscreteMeasure) -> np.ndarray:
    return m.weights @ m.points


def moment(m: DiscreteMeasure, p: float = 2.0) -> float:
    """``sum_i w_i |x_i|^p``."""
    if p < 1:
        raise ValueError("moment order must be >= 1")
    norms = np.linalg.norm(m.points, axis=1)
    return float(m.weights @ norms**p)


def variance(m: DiscreteMeasure) -> float:
    centred = m.points - barycentre(m)
    return float(m.weights @ np.sum(centred**2, axis=1))


def std(m: DiscreteMeasure) -> float:
    return math.sqrt(max(variance(m), 0.0))


def recentre(m: DiscreteMeasure, b) -> DiscreteMeasure:
    """Translate ``m`` so that its barycentre is ``b``."""
    b = np.broadcast_to(np.asarray(b, dtype=float), (m.dim,))
    shift = b - barycentre(m)
    # rounding-level shifts are skipped so that recentring is idempotent
    scale = 1.0 + float(np.max(np.abs(m.points))) + float(np.max(np.abs(b)))
    if np.max(np.abs(shift)) <= 1e-14 * scale:
        return m
    return DiscreteMeasure._trusted(m.points + shift, m.weights)


def same_dim(*measures):
    dims = {m.dim for m in measures}
    if len(dims) != 1:
        raise MeasureError(f"dimension mismatch: {sorted(dims)}")


# ---------------------------------------------------------------------------
# I/O


def _check_finite(values, where):
    if not all(math.isfinite(v) for v in values):
        raise MeasureError(f"non-finite value in {where}")


def parse_csv(text: str) -> DiscreteMeasure:
    """Rows ``weight,x1,...,xd``; an optional non-numeric header is skipped."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise MeasureError("empty CSV")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise MeasureError("CSV has a header but no atoms")
    width = len(rows[0])
    if width < 2:
        raise MeasureError("each CSV row needs a weight and at least one coordinate")
    data = []
    for k, r in enumerate(rows):
        if len(r) != width:
            raise MeasureError(f"row {k} has {len(r)} columns, expected {width}")
        try:
            vals = [float(c) for c in r]
        except ValueError as exc:
            raise MeasureError(f"row {k}: {exc}") from None
        _check_finite(vals, f"row {k}")
        data.append(vals)
    arr = np.array(data)
    return DiscreteMeasure(arr[:, 1:], arr[:, 0])


def to_csv(m: DiscreteMeasure, header: bool = True) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    if header:
        w.writerow(["weight"] + [f"x{k + 1}" for k in range(m.dim)])
    for weight, point in m:
        w.writerow([repr(float(weight))] + [repr(float(v)) for v in point])
    return out.getvalue()


def parse_json(text: str) -> DiscreteMeasure:
    """``{"dim": d, "atoms": [{"w": w, "x": [...]}, ...]}``."""
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MeasureError(f"invalid JSON: {exc}") from None
    try:
        dim = int(data["dim"])
        atoms = data["atoms"]
        weights = [float(a["w"]) for a in atoms]
        points = [[float(v) for v in a["x"]] for a in atoms]
    except (KeyError, TypeError, ValueError) as exc:
        raise MeasureError(f"malformed measure JSON: {exc}") from None
    if any(len(p) != dim for p in points):
        raise MeasureError("atom length does not match dim")
    _check_finite(weights, "weights")
    for p in points:
        _check_finite(p, "atom")
    return DiscreteMeasure(np.array(points, dtype=float).reshape(len(points), dim), weights)


def _reject_constant(name):
    raise MeasureError(f"non-finite value {name} in JSON")


def to_json(m: DiscreteMeasure) -> str:
    atoms = [{"w": float(w), "x": [float(v) for v in x]} for w, x in m]
    return json.dumps({"dim": m.dim, "atoms": atoms})


def load(path) -> DiscreteMeasure:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return parse_json(text)
    return parse_csv(text)


def save(m: DiscreteMeasure, path) -> None:
    path = Path(path)
    path.write_text(to_json(m) if path.suffix.lower() == ".json" else to_csv(m))
