#!/usr/bin/env python3
"""
Proximity operators for the nonsmooth term h handled by the star-network controller.

Only h = 0 and h = indicator of the l1 ball {||x||_1 <= ell} are supported. For an
indicator the weight 1/beta does not change the result.
"""

from dataclasses import dataclass

import numpy as np

KIND_IDENTITY = 'identity'
KIND_L1_BALL = 'l1_ball'


class ProxError(Exception):
    """Base error for proximity operators"""


class DimensionTooLarge(ProxError):
    pass


@dataclass(frozen=True)
class ProxSpec:
    kind: str = KIND_IDENTITY
    radius: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in (KIND_IDENTITY, KIND_L1_BALL):
            raise ProxError(f"unknown prox kind {self.kind!r}")
        if self.kind == KIND_L1_BALL and self.radius <= 0:
            raise ProxError(f"l1 ball radius must be positive, got {self.radius}")
        if self.weight <= 0:
            raise ProxError(f"prox weight must be positive, got {self.weight}")

    def with_weight(self, weight: float) -> 'ProxSpec':
        return ProxSpec(self.kind, self.radius, weight)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        if self.kind == KIND_IDENTITY:
            return True
        return float(np.abs(x).sum()) <= self.radius * (1.0 + tol)


def project_l1_ball(u: np.ndarray, radius: float) -> np.ndarray:
    """
    Euclidean projection onto {||x||_1 <= radius} by sorting and soft-thresholding,
    O(M log M).
    """
    u = np.asarray(u, dtype=float)
    magnitude = np.abs(u)
    if magnitude.sum() <= radius:
        return u.copy()

    # stable sort: ties keep index order
    order = np.argsort(-magnitude, kind='stable')
    sorted_mag = magnitude[order]
    cumulative = np.cumsum(sorted_mag)
    ranks = np.arange(1, u.size + 1)
    support = np.nonzero(sorted_mag - (cumulative - radius) / ranks > 0)[0][-1] + 1
    theta = (cumulative[support - 1] - radius) / support
    return np.sign(u) * np.maximum(magnitude - theta, 0.0)


def apply(spec: ProxSpec, u: np.ndarray) -> np.ndarray:
    if spec.kind == KIND_IDENTITY:
        return np.array(u, dtype=float, copy=True)
    return project_l1_ball(u, spec.radius)


def brute_force_project(radius: float, u: np.ndarray, grid_step: float) -> np.ndarray:
    """Exhaustive grid search for the closest point of the l1 ball (test oracle)"""
    u = np.asarray(u, dtype=float)
    dim = u.size
    if dim > 3:
        raise DimensionTooLarge(f"brute-force projection supports dimension <= 3, got {dim}")

    axis = np.arange(-radius, radius + 0.5 * grid_step, grid_step)
    limit = radius * (1.0 + 1e-12)
    if dim == 1:
        candidates = axis[np.abs(axis) <= limit][:, None]
        return candidates[np.argmin(((candidates - u) ** 2).sum(axis=1))]

    rest = np.stack(np.meshgrid(*([axis] * (dim - 1)), indexing='ij'), axis=-1).reshape(-1, dim - 1)
    rest_l1 = np.abs(rest).sum(axis=1)
    best, best_dist = None, np.inf
    for first in axis:
        mask = rest_l1 + abs(first) <= limit
        if not mask.any():
            continue
        pts = rest[mask]
        dist = (first - u[0]) ** 2 + ((pts - u[1:]) ** 2).sum(axis=1)
        k = int(np.argmin(dist))
        if dist[k] < best_dist:
            best_dist = dist[k]
            best = np.concatenate(([first], pts[k]))
    return best
