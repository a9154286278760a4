#!/usr/bin/env python3
"""
Stochastic zeroth-order oracle (SZO) and Gaussian-smoothing gradient estimators.

A scalar field is any callable taking an array of shape (..., Q) and returning the
values with shape (...). Random streams are numpy Generators keyed by
(seed, trial, channel, agent, iteration) so that results never depend on the order
in which agents or trials are evaluated.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from logger import get_logger

logger = get_logger('szo')

ScalarField = Callable[[np.ndarray], np.ndarray]

COUPLING_SHARED = 'shared'
COUPLING_INDEPENDENT = 'independent'

# Stream channels
CHANNEL_ESTIMATE = 0
CHANNEL_PICK = 1
CHANNEL_INIT = 2
CHANNEL_OUTPUT = 3


class SzoError(Exception):
    """Base error for oracle access"""


class DomainError(SzoError):
    pass


class UnsupportedKind(SzoError):
    pass


@dataclass(frozen=True)
class OracleSpec:
    noise_std: float = 0.0
    smoothing: float = 1e-2
    batch: int = 1
    noise_coupling: str = COUPLING_INDEPENDENT
    grad_bound: float = 0.0
    smoothness: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if self.smoothing <= 0:
            raise SzoError(f"smoothing mu must be positive, got {self.smoothing}")
        if self.batch < 1:
            raise SzoError(f"batch J must be at least 1, got {self.batch}")
        if self.noise_std < 0:
            raise SzoError(f"noise_std must be non-negative, got {self.noise_std}")
        if self.noise_coupling not in (COUPLING_SHARED, COUPLING_INDEPENDENT):
            raise SzoError(f"unknown noise coupling {self.noise_coupling!r}")


@dataclass
class EstimatorSample:
    value: np.ndarray
    evals: int


def _checked(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("function is undefined (non-finite) at the queried point")
    return values


def evaluate(f: ScalarField, z: np.ndarray, rng: np.random.Generator, noise_std: float = 0.0):
    """Noisy function value H(z, xi) = f(z) + xi with xi ~ N(0, noise_std^2)"""
    values = _checked(f(np.asarray(z, dtype=float)))
    if noise_std == 0:
        return values if values.ndim else float(values)
    noisy = values + noise_std * rng.standard_normal(values.shape)
    return noisy if noisy.ndim else float(noisy)


def estimate(f: ScalarField, z: np.ndarray, spec: OracleSpec, rng: np.random.Generator) -> EstimatorSample:
    """
    Mini-batch Gaussian-smoothing estimator
        G = (1/J) sum_j [H(z + mu phi_j) - H(z)] / mu * phi_j

    The directions phi are drawn before any noise so that the phi stream does not
    depend on noise_std. With shared coupling both evaluations of sample j see the
    same xi_j, which cancels exactly.
    """
    z = np.asarray(z, dtype=float)
    mu, batch = spec.smoothing, spec.batch
    phi = rng.standard_normal((batch, z.shape[-1]))

    f_base = _checked(f(z))
    f_shift = _checked(f(z + mu * phi))
    diff = f_shift - f_base

    if spec.noise_std > 0:
        if spec.noise_coupling == COUPLING_SHARED:
            xi_shift = xi_base = rng.normal(0.0, spec.noise_std, batch)
        else:
            xi_shift = rng.normal(0.0, spec.noise_std, batch)
            xi_base = rng.normal(0.0, spec.noise_std, batch)
        diff = diff + (xi_shift - xi_base)

    value = (diff / mu) @ phi / batch
    return EstimatorSample(value=value, evals=2 * batch)


def sigma_tilde_sq(spec: OracleSpec) -> float:
    q = spec.dim
    return 2.0 * q * (spec.grad_bound ** 2 + spec.noise_std ** 2 + spec.smoothing ** 2 * spec.smoothness ** 2 * q)


def variance_bound(spec: OracleSpec) -> float:
    """sigma_tilde^2 / J with sigma_tilde^2 = 2Q[K^2 + sigma^2 + mu^2 L^2 Q]"""
    return sigma_tilde_sq(spec) / spec.batch


def smoothing_bias_bound(smoothness: float, mu: float, dim: int) -> float:
    """Bound on ||grad psi_mu - grad psi||"""
    return 0.5 * mu * smoothness * (dim + 3) ** 1.5


def smoothed_reference(kind: str, params: Dict[str, np.ndarray], z: np.ndarray, mu: float) -> Tuple[float, np.ndarray]:
    """Closed-form smoothed value and gradient for affine and quadratic fields"""
    z = np.asarray(z, dtype=float)
    if kind == 'linear':
        c = np.asarray(params['c'], dtype=float)
        offset = float(params.get('b', 0.0))
        return float(c @ z) + offset, c.copy()
    if kind == 'quadratic':
        p = np.asarray(params['P'], dtype=float)
        value = 0.5 * float(z @ p @ z) + 0.5 * mu ** 2 * float(np.trace(p))
        return value, p @ z
    raise UnsupportedKind(f"no closed-form smoothing for kind {kind!r}")


class StochasticOracle:
    """
    Keyed SZO access for one trial. Counts every function evaluation it performs so
    that callers can audit oracle usage.
    """

    def __init__(self, spec: OracleSpec, seed: int, trial: int = 0):
        self.spec = spec
        self.seed = int(seed)
        self.trial = int(trial)
        self.calls = 0

    def stream(self, channel: int, agent: int = 0, iteration: int = 0) -> np.random.Generator:
        key = (self.trial, channel, agent, iteration)
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))

    def estimate(self, f: ScalarField, z: np.ndarray, agent: int, iteration: int,
                 batch: int = None) -> np.ndarray:
        spec = self.spec
        if batch is not None and batch != spec.batch:
            spec = OracleSpec(spec.noise_std, spec.smoothing, batch, spec.noise_coupling,
                              spec.grad_bound, spec.smoothness, spec.dim)
        sample = estimate(f, z, spec, self.stream(CHANNEL_ESTIMATE, agent, iteration))
        self.calls += sample.evals
        return sample.value

    def evaluate(self, f: ScalarField, z: np.ndarray, agent: int, iteration: int):
        value = evaluate(f, z, self.stream(CHANNEL_ESTIMATE, agent, iteration), self.spec.noise_std)
        self.calls += int(np.size(value))
        return value
