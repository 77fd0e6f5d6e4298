"""Cone blocks and Euclidean projections onto them.

Every projection has a batched form acting on a ``(k, n)`` array whose rows
are independent points of the same cone; the solver groups equal blocks and
projects them in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import project_power_rows

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"
POWER = "power"

_KINDS = (ZERO, NONNEG, SOC, POWER)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 200


class ProjectionError(RuntimeError):
    """Raised when the power-cone root finder fails to reach its tolerance."""


@dataclass(frozen=True)
class ConeBlock:
    """A single cone factor of the product cone.

    ``Power(alpha, n)`` is ``{(a, b, v) : a**alpha * b**(1-alpha) >= |v|,
    a, b >= 0}`` with ``v`` of length ``n - 2``.
    """

    kind: str
    size: int
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone size must be >= 1")
        if self.kind == POWER:
            if self.size < 3:
                raise ValueError("power cone needs size >= 3")
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("power cone alpha must lie in (0, 1)")
        elif self.alpha is not None:
            raise ValueError(f"{self.kind} cone takes no alpha")

    @property
    def key(self):
        return (self.kind, self.size, self.alpha)


def Zero(n: int) -> ConeBlock:
    return ConeBlock(ZERO, n)


def Nonnegative(n: int) -> ConeBlock:
    return ConeBlock(NONNEG, n)


def SecondOrder(n: int) -> ConeBlock:
    return ConeBlock(SOC, n)


def Power(alpha: float, n: int = 3) -> ConeBlock:
    return ConeBlock(POWER, n, float(alpha))


# ---------------------------------------------------------------------------
# batched projections


def _project_soc_batch(P):
    t = P[:, 0]
    v = P[:, 1:]
    nv = np.linalg.norm(v, axis=1)
    out = np.zeros_like(P)
    inside = nv <= t
    out[inside] = P[inside]
    mid = ~inside & (nv > -t)
    if np.any(mid):
        scale = 0.5 * (1.0 + t[mid] / nv[mid])
        out[mid, 0] = scale * nv[mid]
        out[mid, 1:] = scale[:, None] * v[mid]
    return out


def _project_power_batch(P, alpha, hint=None):
    # tail reduced to its norm, then a safeguarded Newton solve per row
    P = np.ascontiguousarray(P)
    out = np.empty_like(P)
    use_hint = hint is not None
    if not use_hint:
        hint = np.empty(0)
    bad = project_power_rows(P, alpha, hint, use_hint, out, NEWTON_TOL, NEWTON_MAX_ITER)
    if bad >= 0:
        raise ProjectionError(f"power cone projection did not converge for {P[bad]!r}")
    return out


def project_batch(P: np.ndarray, block: ConeBlock, hint=None) -> np.ndarray:
    """Project every row of ``P`` onto ``block``.

    ``hint`` (power cones only) is a per-row array of tail-shrink factors used
    to seed the root finder; it is updated in place.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] != block.size:
        raise ValueError(f"expected rows of length {block.size}, got shape {P.shape}")
    if block.kind == ZERO:
        return np.zeros_like(P)
    if block.kind == NONNEG:
        return np.maximum(P, 0.0)
    if block.kind == SOC:
        return _project_soc_batch(P)
    return _project_power_batch(P, block.alpha, hint)


def project_cone(point, block: ConeBlock) -> np.ndarray:
    """Euclidean projection of a single point onto ``block``."""
    point = np.asarray(point, dtype=float)
    if point.shape != (block.size,):
        raise ValueError(f"point of length {point.size} does not match cone size {block.size}")
    return project_batch(point[None, :], block)[0]


# ---------------------------------------------------------------------------
# membership tests (used for diagnostics and tests)


def cone_violation(point, block: ConeBlock) -> float:
    """Distance-like measure of how far ``point`` is outside ``block``."""
    p = np.asarray(point, dtype=float)
    if block.kind == ZERO:
        return float(np.max(np.abs(p)))
    if block.kind == NONNEG:
        return float(max(0.0, -p.min()))
    if block.kind == SOC:
        return float(max(0.0, np.linalg.norm(p[1:]) - p[0]))
    a, b = p[0], p[1]
    t = np.linalg.norm(p[2:])
    viol = max(0.0, -a, -b)
    g = max(a, 0.0) ** block.alpha * max(b, 0.0) ** (1.0 - block.alpha)
    return float(max(viol, t - g))


def dual_cone_violation(point, block: ConeBlock) -> float:
    """Violation of membership in the dual cone ``K*``."""
    p = np.asarray(point, dtype=float)
    if block.kind == ZERO:
        return 0.0
    if block.kind in (NONNEG, SOC):
        return cone_violation(p, block)
    alpha = block.alpha
    a, b = p[0], p[1]
    t = np.linalg.norm(p[2:])
    viol = max(0.0, -a, -b)
    g = (max(a, 0.0) / alpha) ** alpha * (max(b, 0.0) / (1.0 - alpha)) ** (1.0 - alpha)
    return float(max(viol, t - g))
