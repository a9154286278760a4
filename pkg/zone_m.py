#!/usr/bin/env python3
"""
ZONE-M: zeroth-order primal-dual method over mesh networks.

Two executions of the same iteration are provided. The matrix form keeps the dual
variable lambda (one M-block per edge) and applies the closed-form primal step
followed by dual ascent. The distributed form never builds lambda: each agent
combines its own last two iterates, its last two gradient estimates and the sums
of its neighbours' last two iterates. Both consume identical keyed oracle streams
and therefore produce the same trajectory up to rounding.
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import DIVERGENCE_LIMIT, THEORY_MARGIN
from graph import GraphOperators, Topology, derive_operators
from logger import get_logger
from metrics import TraceRecord, mnet_gap, phi_gap
from problems import Problem
from szo import CHANNEL_INIT, CHANNEL_OUTPUT, COUPLING_INDEPENDENT, OracleSpec, StochasticOracle, sigma_tilde_sq

logger = get_logger('zone_m')

SCHEDULE_CONSTANT = 'constant'
SCHEDULE_INCREASING = 'increasing'
MODE_MATRIX = 'matrix'
MODE_DISTRIBUTED = 'distributed'


class AlgorithmError(Exception):
    """Base error for algorithm execution"""


class ParameterError(AlgorithmError):
    pass


class NumericalOverflow(AlgorithmError):
    def __init__(self, message: str, iteration: int = -1, trace: Optional[List[TraceRecord]] = None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace or []


def guard_finite(values: np.ndarray, iteration: int, limit: float = DIVERGENCE_LIMIT) -> None:
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > limit:
        raise NumericalOverflow(f"iterate diverged at iteration {iteration} "
                                f"(max |z| = {np.max(np.abs(values)):.3e})", iteration)


@dataclass
class MnetConfig:
    rho: float
    mu: float
    batch: int
    horizon: int
    c: float
    smoothness: float
    delta: float = 1e-3
    schedule: str = SCHEDULE_CONSTANT
    seed: int = 0
    stride: int = 10
    noise_std: float = 0.0
    noise_coupling: str = COUPLING_INDEPENDENT
    grad_bound: float = 0.0
    record_wall_time: bool = False

    def rho_at(self, iteration: int) -> float:
        if self.schedule == SCHEDULE_INCREASING:
            return float(np.sqrt(iteration + 1))
        return self.rho

    def oracle_spec(self, dim: int) -> OracleSpec:
        return OracleSpec(noise_std=self.noise_std, smoothing=self.mu, batch=self.batch,
                          noise_coupling=self.noise_coupling, grad_bound=self.grad_bound,
                          smoothness=self.smoothness, dim=dim)


@dataclass
class MnetState:
    z: np.ndarray
    z_prev: np.ndarray
    g_prev: np.ndarray
    lam: Optional[np.ndarray] = None
    lam_prev: Optional[np.ndarray] = None
    iteration: int = 0
    rho_prev: float = 0.0


@dataclass
class MnetTheory:
    c: float
    rho: float
    rho_min: float
    b: float
    d: float
    k: float
    c1: float
    c2: float
    c3: float
    weight: np.ndarray = field(repr=False)  # B = L+ + k/(c rho) I on the N x N level

    def descent_slack(self, sigma_g_sq: float, batch: int, mu: float, dim: int) -> float:
        """Constant terms of the expected potential change: c3 sigma_g^2/J + 3 mu^2 (Q+3)^3 / 8"""
        return self.c3 * sigma_g_sq / batch + 3.0 * mu ** 2 * (dim + 3) ** 3 / 8.0


@dataclass
class MnetResult:
    trace: List[TraceRecord]
    z_out: np.ndarray
    lam_out: Optional[np.ndarray]
    output_index: int
    state: MnetState


def _rho_lower_bound(l_hat: float, c: float, sigma_min: float, delta: float) -> Tuple[float, float, float]:
    b = -l_hat * (l_hat + 4 * c + 1) - 3
    d = -12 * l_hat ** 2 / sigma_min
    root = (-b + np.sqrt(b ** 2 - 8 * d)) / 4
    return float(max(root, delta, l_hat / 2)), b, d


def _k_constant(l_hat: float, c: float, rho: float, sigma_min: float) -> float:
    return 2 * (6 * l_hat ** 2 / (rho * sigma_min) + 1.5 * c * l_hat)


def theoretical_params(ops: GraphOperators, l_hat: float, delta: float,
                       c: Optional[float] = None) -> Tuple[float, float, float]:
    """(c, rho_min, k) from the potential-descent parameter conditions"""
    if c is None:
        c = 6 * ops.norm_lplus / ops.sigma_min * THEORY_MARGIN
    rho_min, _, _ = _rho_lower_bound(l_hat, c, ops.sigma_min, delta)
    return c, rho_min, _k_constant(l_hat, c, rho_min, ops.sigma_min)


def theory(ops: GraphOperators, l_hat: float, c: float, rho: float, delta: float) -> MnetTheory:
    rho_min, b, d = _rho_lower_bound(l_hat, c, ops.sigma_min, delta)
    k = _k_constant(l_hat, c, rho, ops.sigma_min)
    c1 = 2 * rho - l_hat ** 2 - (c + 1) * l_hat - 3
    c2 = c * rho / 2 - 3 * rho * ops.norm_lplus / ops.sigma_min
    c3 = 9 / (rho * ops.sigma_min) + (3 + 6 * c * l_hat) / (2 * l_hat ** 2)
    weight = ops.signless_laplacian + (k / (c * rho)) * np.eye(ops.n_agents)
    return MnetTheory(c=c, rho=rho, rho_min=rho_min, b=b, d=d, k=k, c1=c1, c2=c2, c3=c3, weight=weight)


def validate_params(cfg: MnetConfig, ops: GraphOperators) -> None:
    """Reject (c, rho) that violate the strict potential-descent conditions"""
    c_floor = 6 * ops.norm_lplus / ops.sigma_min
    if cfg.c <= c_floor:
        raise ParameterError(f"c={cfg.c:.6g} must exceed 6||L+||/sigma_min = {c_floor:.6g}")
    if cfg.schedule == SCHEDULE_CONSTANT:
        rho_min, _, _ = _rho_lower_bound(cfg.smoothness, cfg.c, ops.sigma_min, cfg.delta)
        if cfg.rho <= rho_min:
            raise ParameterError(f"rho={cfg.rho:.6g} must exceed the theoretical minimum {rho_min:.6g}")


def make_config(problem: Problem, ops: GraphOperators, horizon: int, delta: float,
                mu: Optional[float] = None, batch: Optional[int] = None,
                rho: Optional[float] = None, c: Optional[float] = None, **overrides) -> MnetConfig:
    """Config with defaults mu = 1/sqrt(T), J = T and theoretical (c, rho)"""
    c_theory, rho_min, _ = theoretical_params(ops, problem.l_hat, delta, c)
    return MnetConfig(
        rho=rho if rho is not None else rho_min * THEORY_MARGIN,
        mu=mu if mu is not None else 1.0 / np.sqrt(horizon),
        batch=batch if batch is not None else horizon,
        horizon=horizon,
        c=c_theory,
        smoothness=problem.l_hat,
        delta=delta,
        grad_bound=problem.grad_bound_total,
        **overrides,
    )


def initial_state(problem: Problem, ops: GraphOperators, oracle: StochasticOracle, mode: str) -> MnetState:
    rng = oracle.stream(CHANNEL_INIT)
    z0 = rng.standard_normal((problem.n_agents, problem.dim_m))
    lam = np.zeros((ops.n_edges, problem.dim_m)) if mode == MODE_MATRIX else None
    return MnetState(z=z0, z_prev=z0.copy(), g_prev=np.zeros_like(z0),
                     lam=lam, lam_prev=None if lam is None else lam.copy())


def estimate_all(z: np.ndarray, problem: Problem, oracle: StochasticOracle, iteration: int) -> np.ndarray:
    return np.stack([oracle.estimate(problem.local(i), z[i], agent=i, iteration=iteration)
                     for i in range(problem.n_agents)])


def _matrix_step(state: MnetState, g: np.ndarray, ops: GraphOperators, rho: float):
    direction = g + ops.apply_incidence_t(state.lam) + rho * ops.apply_signed(state.z)
    z_next = state.z - ops.apply_inv_degree(direction) / (2 * rho)
    lam_next = state.lam + rho * ops.apply_incidence(z_next)
    return z_next, lam_next


def _distributed_step(state: MnetState, g: np.ndarray, ops: GraphOperators, rho: float) -> np.ndarray:
    z, z_prev = state.z, state.z_prev
    z_next = np.empty_like(z)
    for i, neighbors in enumerate(ops.neighbor_lists):
        d_i = ops.degree[i]
        s_now = z[list(neighbors)].sum(axis=0)
        if state.iteration == 0:
            # lambda^0 = 0: local stencil of the signed Laplacian
            z_next[i] = z[i] - (g[i] + rho * (d_i * z[i] - s_now)) / (2 * rho * d_i)
            continue
        s_prev = z_prev[list(neighbors)].sum(axis=0)
        rho_prev = state.rho_prev
        total = (-(g[i] - state.g_prev[i])
                 + (rho_prev + rho) * (d_i * z[i] + s_now)
                 - rho_prev * (d_i * z_prev[i] + s_prev))
        z_next[i] = total / (2 * rho * d_i)
    return z_next


def extra_form_step(z: np.ndarray, z_prev: np.ndarray, g: np.ndarray, g_prev: np.ndarray,
                    ops: GraphOperators, rho: float) -> np.ndarray:
    """z + Wz - (I+W)/2 z_prev - D^-1 (g - g_prev) / (2 rho), constant rho, r >= 1"""
    return (z + ops.apply_mixing(z) - 0.5 * (z_prev + ops.apply_mixing(z_prev))
            - ops.apply_inv_degree(g - g_prev) / (2 * rho))


def step(state: MnetState, problem: Problem, ops: GraphOperators, cfg: MnetConfig,
         mode: str, oracle: StochasticOracle) -> MnetState:
    r = state.iteration
    rho = cfg.rho_at(r)
    g = estimate_all(state.z, problem, oracle, r)

    if mode == MODE_MATRIX:
        z_next, lam_next = _matrix_step(state, g, ops, rho)
    elif mode == MODE_DISTRIBUTED:
        z_next, lam_next = _distributed_step(state, g, ops, rho), None
    else:
        raise ValueError(f"unknown mode {mode!r}")

    guard_finite(z_next, r)
    return MnetState(z=z_next, z_prev=state.z, g_prev=g, lam=lam_next, lam_prev=state.lam,
                     iteration=r + 1, rho_prev=rho)


def potential(state: MnetState, problem: Problem, ops: GraphOperators, cfg: MnetConfig,
              rho: Optional[float] = None) -> Tuple[float, float, float]:
    """(P, L_rho, V) with P = L_rho + c V, evaluated with true function values"""
    if state.lam is None:
        raise ValueError("potential needs the dual variable (matrix mode)")
    if rho is None:
        rho = state.rho_prev if state.iteration else cfg.rho_at(0)
    az = ops.apply_incidence(state.z)
    az_sq = float(np.sum(az ** 2))
    lagrangian = problem.mesh_value(state.z) + float(np.sum(state.lam * az)) + 0.5 * rho * az_sq

    k = _k_constant(cfg.smoothness, cfg.c, rho, ops.sigma_min)
    weight = ops.signless_laplacian + (k / (cfg.c * rho)) * np.eye(ops.n_agents)
    dz = state.z - state.z_prev
    v = 0.5 * rho * (az_sq + float(np.sum(dz * (weight @ dz))))
    return lagrangian + cfg.c * v, lagrangian, v


def dual_feasibility_residual(lam: np.ndarray, ops: GraphOperators) -> float:
    """Distance of lambda from the column space of A (blockwise least squares)"""
    coeffs, *_ = np.linalg.lstsq(ops.incidence, lam, rcond=None)
    return float(np.max(np.abs(ops.incidence @ coeffs - lam)))


def sigma_g_sq(cfg: MnetConfig, dim: int) -> float:
    return sigma_tilde_sq(cfg.oracle_spec(dim))


def _record(state: MnetState, problem: Problem, ops: GraphOperators, cfg: MnetConfig, mode: str,
            oracle: StochasticOracle, trial: int, started: float) -> TraceRecord:
    opt_gap, cons_vio = mnet_gap(state.z, ops, problem)
    record = TraceRecord(trial=trial, iteration=state.iteration, opt_gap=opt_gap, cons_vio=cons_vio,
                         oracle_calls=oracle.calls)
    if mode == MODE_MATRIX:
        rho = state.rho_prev if state.iteration else cfg.rho_at(0)
        record.phi = phi_gap(state.z, state.lam_prev, rho, ops, problem)
        record.potential = potential(state, problem, ops, cfg, rho)[0]
    if cfg.record_wall_time:
        record.wall_seconds = time.perf_counter() - started
    return record


def run(problem: Problem, topo: Topology, cfg: MnetConfig, mode: str = MODE_DISTRIBUTED,
        trial: int = 0, oracle: Optional[StochasticOracle] = None,
        output_index: Optional[int] = None, ops: Optional[GraphOperators] = None) -> MnetResult:
    """Run T iterations; return the trace and the iterate at a uniformly drawn u in {0..T-1}"""
    ops = ops or derive_operators(topo)
    dim = problem.n_agents * problem.dim_m
    oracle = oracle or StochasticOracle(cfg.oracle_spec(dim), cfg.seed, trial)
    if output_index is None:
        output_index = int(oracle.stream(CHANNEL_OUTPUT).integers(0, cfg.horizon))

    rho_text = f"rho={cfg.rho:.6g}" if cfg.schedule == SCHEDULE_CONSTANT else "rho=sqrt(r+1)"
    logger.info(f"ZONE-M ({mode}, {cfg.schedule}) trial {trial}: N={problem.n_agents}, M={problem.dim_m}, "
                f"T={cfg.horizon}, J={cfg.batch}, mu={cfg.mu:.4g}, {rho_text}, c={cfg.c:.6g}")
    started = time.perf_counter()
    state = initial_state(problem, ops, oracle, mode)
    trace = [_record(state, problem, ops, cfg, mode, oracle, trial, started)]
    z_out, lam_out = None, None

    try:
        for r in range(cfg.horizon):
            if r == output_index:
                z_out = state.z.copy()
                lam_out = None if state.lam is None else state.lam.copy()
            state = step(state, problem, ops, cfg, mode, oracle)
            if state.iteration % cfg.stride == 0 or state.iteration == cfg.horizon:
                trace.append(_record(state, problem, ops, cfg, mode, oracle, trial, started))
                logger.debug(f"trial {trial} r={state.iteration}: opt-gap={trace[-1].opt_gap:.4e}")
    except NumericalOverflow as exc:
        logger.error(f"ZONE-M trial {trial} aborted: {exc}")
        exc.trace = trace
        raise

    return MnetResult(trace=trace, z_out=z_out, lam_out=lam_out, output_index=output_index, state=state)
