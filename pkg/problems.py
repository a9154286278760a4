#!/usr/bin/env python3
"""
Benchmark objective families with per-agent oracle access.

Analytic gradients are provided for metrics only; the algorithms see each local
function exclusively through the stochastic zeroth-order oracle.
"""

from typing import Dict, Optional

import numpy as np
from scipy.special import expit

from logger import get_logger
from prox import KIND_IDENTITY, KIND_L1_BALL, ProxSpec
from szo import ScalarField

logger = get_logger('problems')

SIGMOID_LOG = 'sigmoid_log'
SPARSE_QUADRATIC = 'sparse_quadratic'

# families whose objective carries a nonsmooth term h
NONSMOOTH_KINDS = (SPARSE_QUADRATIC,)

SIGMOID_REGION = 10.0
SIGMOID_GRID_STEP = 1e-3
SMOOTHNESS_SAFETY = 1.2
MAX_REDRAWS = 1000


class Problem:
    """
    N local fields f_i : R^M -> R together with gradient bounds K_i, smoothness
    constants L_i and an optional nonsmooth term h (star problems only).
    """

    kind = 'abstract'

    def __init__(self, n_agents: int, dim_m: int, grad_bounds: np.ndarray, smoothness: np.ndarray,
                 nonsmooth: Optional[ProxSpec] = None, lower_bound_shift: float = 0.0,
                 seed: Optional[int] = None):
        self.n_agents = n_agents
        self.dim_m = dim_m
        self.grad_bounds = np.asarray(grad_bounds, dtype=float)
        self.smoothness = np.asarray(smoothness, dtype=float)
        self.nonsmooth = nonsmooth
        self.lower_bound_shift = float(lower_bound_shift)
        self.seed = seed

    @property
    def l_hat(self) -> float:
        """Smoothness of the mesh objective g(z) = sum_i f_i(z_i); g is block separable so this is max L_i"""
        return float(self.smoothness.max())

    @property
    def l_sum(self) -> float:
        """Smoothness bound for the shared-variable sum f(x) = sum_i f_i(x)"""
        return float(self.smoothness.sum())

    @property
    def grad_bound_total(self) -> float:
        return float(self.grad_bounds.sum())

    def local_value(self, i: int, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local_grad(self, i: int, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local(self, i: int) -> ScalarField:
        return lambda z: self.local_value(i, z)

    # mesh form: one local variable z_i per agent, z of shape (N, M)
    def mesh_value(self, z: np.ndarray) -> float:
        return float(sum(self.local_value(i, z[i]) for i in range(self.n_agents))) + self.lower_bound_shift

    def mesh_grad(self, z: np.ndarray) -> np.ndarray:
        return np.stack([self.local_grad(i, z[i]) for i in range(self.n_agents)])

    # star form: a single shared x of shape (M,)
    def star_value(self, x: np.ndarray) -> float:
        return float(sum(self.local_value(i, x) for i in range(self.n_agents))) + self.lower_bound_shift

    def star_grad(self, x: np.ndarray) -> np.ndarray:
        return np.sum([self.local_grad(i, x) for i in range(self.n_agents)], axis=0)

    def prox_spec(self, weight: float = 1.0) -> ProxSpec:
        if self.nonsmooth is None:
            return ProxSpec(KIND_IDENTITY, weight=weight)
        return self.nonsmooth.with_weight(weight)

    def sample_region(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> Dict[str, object]:
        return {'kind': self.kind, 'n_agents': self.n_agents, 'dim_m': self.dim_m, 'seed': self.seed}


class SigmoidLogProblem(Problem):
    """
    f_i(z) = a_i sig(z) + b_i log(1 + z^2), scalar z.

    On the consensus line the sum behaves like (sum b_i) log(1 + x^2) for large
    |x|, so the problem is bounded below only when sum b_i > 0.
    """

    kind = SIGMOID_LOG

    def __init__(self, a: np.ndarray, b: np.ndarray, seed: Optional[int] = None):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if not self.bounded_below:
            logger.warning(f"sum(b)={self.b.sum():.4g} <= 0: the consensus objective is unbounded below")
        grid = np.arange(-SIGMOID_REGION, SIGMOID_REGION + 0.5 * SIGMOID_GRID_STEP, SIGMOID_GRID_STEP)
        curvature = np.abs(self._second_derivative(grid[None, :]))
        smoothness = SMOOTHNESS_SAFETY * curvature.max(axis=1)
        grad_bounds = np.abs(self.a) / 4.0 + np.abs(self.b)
        values = self.a[:, None] * expit(grid) + self.b[:, None] * np.log1p(grid ** 2)
        shift = -float(values.min(axis=1).sum())
        super().__init__(self.a.size, 1, grad_bounds, smoothness, None, shift, seed)

    @property
    def bounded_below(self) -> bool:
        return bool(self.b.sum() > 0)

    def _second_derivative(self, z: np.ndarray) -> np.ndarray:
        s = expit(z)
        return (self.a[:, None] * s * (1 - s) * (1 - 2 * s)
                + 2 * self.b[:, None] * (1 - z ** 2) / (1 + z ** 2) ** 2)

    def local_value(self, i, z):
        z = np.asarray(z, dtype=float)[..., 0]
        return self.a[i] * expit(z) + self.b[i] * np.log1p(z ** 2)

    def local_grad(self, i, z):
        z = np.asarray(z, dtype=float)
        s = expit(z)
        return self.a[i] * s * (1 - s) + 2 * self.b[i] * z / (1 + z ** 2)

    def mesh_value(self, z):
        s = expit(z[:, 0])
        return float(np.sum(self.a * s + self.b * np.log1p(z[:, 0] ** 2))) + self.lower_bound_shift

    def mesh_grad(self, z):
        s = expit(z)
        return self.a[:, None] * s * (1 - s) + 2 * self.b[:, None] * z / (1 + z ** 2)

    def sample_region(self, rng, count):
        return rng.uniform(-SIGMOID_REGION, SIGMOID_REGION, size=(count, 1))


class SparseQuadraticProblem(Problem):
    """f_i(x) = x^T Gamma_i x - gamma_i^T x subject to ||x||_1 <= ell"""

    kind = SPARSE_QUADRATIC

    def __init__(self, gammas: np.ndarray, linear: np.ndarray, ell: float, seed: Optional[int] = None):
        self.gammas = np.asarray(gammas, dtype=float)
        self.linear = np.asarray(linear, dtype=float)
        self.ell = float(ell)
        n_agents, dim_m = self.linear.shape
        spectral = np.array([np.linalg.norm(g, 2) for g in self.gammas])
        smoothness = 2.0 * spectral
        grad_bounds = 2.0 * spectral * self.ell + np.linalg.norm(self.linear, axis=1)
        # |x'Gx| <= ||G|| ell^2 and |g'x| <= ||g||_inf ell on the ball
        shift = float(np.sum(spectral * self.ell ** 2 + np.abs(self.linear).max(axis=1) * self.ell))
        super().__init__(n_agents, dim_m, grad_bounds, smoothness,
                         ProxSpec(KIND_L1_BALL, radius=self.ell), shift, seed)

    def local_value(self, i, x):
        x = np.asarray(x, dtype=float)
        return np.einsum('...m,mn,...n->...', x, self.gammas[i], x) - x @ self.linear[i]

    def local_grad(self, i, x):
        return 2.0 * np.asarray(x, dtype=float) @ self.gammas[i] - self.linear[i]

    def star_grad(self, x):
        return 2.0 * np.einsum('imn,n->m', self.gammas, x) - self.linear.sum(axis=0)

    def sample_region(self, rng, count):
        # random direction on the l1 sphere scaled by a uniform radius
        raw = rng.standard_normal((count, self.dim_m))
        raw /= np.abs(raw).sum(axis=1, keepdims=True)
        return raw * self.ell * rng.uniform(0.0, 1.0, size=(count, 1))

    def describe(self):
        info = super().describe()
        info['ell'] = self.ell
        return info


def draw_sigmoid_coefficients(n_agents: int, seed: int):
    """First (a, b) pair from the seeded N(0, 1) stream with sum(b) > 0"""
    rng = np.random.default_rng(seed)
    for _ in range(MAX_REDRAWS):
        a = rng.standard_normal(n_agents)
        b = rng.standard_normal(n_agents)
        if b.sum() > 0:
            return a, b
    raise ValueError(f"no bounded-below sigmoid-log instance after {MAX_REDRAWS} draws (seed={seed})")


def make_sigmoid_log(n_agents: int, seed: int) -> SigmoidLogProblem:
    a, b = draw_sigmoid_coefficients(n_agents, seed)
    return SigmoidLogProblem(a, b, seed=seed)


def make_sparse_quadratic(n_agents: int, dim_m: int, ell: float, seed: int) -> SparseQuadraticProblem:
    if dim_m < 1:
        raise ValueError(f"dim_m must be at least 1, got {dim_m}")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n_agents, dim_m, dim_m)) / np.sqrt(dim_m)
    gammas = 0.5 * (raw + np.transpose(raw, (0, 2, 1)))
    linear = rng.standard_normal((n_agents, dim_m))
    return SparseQuadraticProblem(gammas, linear, ell, seed=seed)


def make_problem(kind: str, n_agents: int, seed: int, dim_m: int = 1, ell: float = 1.0) -> Problem:
    """Rebuild a problem instance from its (kind, N, M, ell, seed) description"""
    if kind == SIGMOID_LOG:
        return make_sigmoid_log(n_agents, seed)
    if kind == SPARSE_QUADRATIC:
        return make_sparse_quadratic(n_agents, dim_m, ell, seed)
    raise ValueError(f"unknown problem kind {kind!r}")
