#!/usr/bin/env python3
"""
ZONE-S: zeroth-order primal-dual method over a star network.

One agent, drawn with probability p_i, refreshes its gradient estimate at the
current central point per round; the controller then applies the prox of the
nonsmooth term h. The dual of agent i always equals minus the last estimate it
computed (its anchor), which is checked at runtime by dual_invariant_residual().
"""

import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

import prox
from config import DEFAULT_STRIDE
from logger import get_logger
from metrics import TraceRecord, psi_gap
from problems import Problem
from szo import CHANNEL_INIT, CHANNEL_OUTPUT, CHANNEL_PICK, COUPLING_INDEPENDENT, OracleSpec, StochasticOracle
from zone_m import NumericalOverflow, ParameterError, guard_finite

logger = get_logger('zone_s')

SCHEDULE_THEORETICAL = 'theoretical'
SCHEDULE_INCREASING = 'increasing'

SAMPLING_CONSTANT = 5.5


@dataclass(frozen=True)
class SamplingParams:
    p: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray
    beta: float


def sampling_params(smoothness) -> SamplingParams:
    """p_i = sqrt(L_i)/sum sqrt(L_j), rho_i = sqrt(5.5 L_i) sum_j sqrt(5.5 L_j), alpha = p, beta = 1/sum rho"""
    smoothness = np.asarray(smoothness, dtype=float)
    if smoothness.size == 0 or np.any(smoothness <= 0):
        raise ParameterError("all smoothness surrogates must be positive")
    root = np.sqrt(smoothness)
    p = root / root.sum()
    scaled = np.sqrt(SAMPLING_CONSTANT * smoothness)
    rho = scaled * scaled.sum()
    return SamplingParams(p=p, rho=rho, alpha=p.copy(), beta=float(1.0 / rho.sum()))


@dataclass
class SnetConfig:
    horizon: int
    batch: int
    mu: float
    smoothness: np.ndarray
    schedule: str = SCHEDULE_THEORETICAL
    seed: int = 0
    stride: int = DEFAULT_STRIDE
    noise_std: float = 0.0
    noise_coupling: str = COUPLING_INDEPENDENT
    record_wall_time: bool = False

    def __post_init__(self):
        self.smoothness = np.asarray(self.smoothness, dtype=float)
        self.theoretical = sampling_params(self.smoothness)

    @property
    def psi_beta(self) -> float:
        return self.theoretical.beta

    def params_at(self, iteration: int) -> SamplingParams:
        """Parameters for step r (iteration = r, 0-based); the increasing schedule uses rho_i = sqrt(r+1)"""
        if self.schedule == SCHEDULE_INCREASING:
            rho = np.full(self.smoothness.size, np.sqrt(iteration + 1.0))
            return SamplingParams(self.theoretical.p, rho, self.theoretical.alpha, float(1.0 / rho.sum()))
        return self.theoretical

    def oracle_spec(self, problem: Problem) -> OracleSpec:
        return OracleSpec(noise_std=self.noise_std, smoothing=self.mu, batch=self.batch,
                          noise_coupling=self.noise_coupling, grad_bound=float(problem.grad_bounds.max()),
                          smoothness=float(self.smoothness.max()), dim=problem.dim_m)


@dataclass
class SnetState:
    x: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    y: np.ndarray
    g_anchor: np.ndarray
    iteration: int = 0
    x_prev: Optional[np.ndarray] = None
    last_pick: Optional[int] = None
    last_u: Optional[np.ndarray] = None
    last_v: Optional[np.ndarray] = None
    last_beta: Optional[float] = None


@dataclass
class SnetResult:
    trace: List[TraceRecord]
    x_out: np.ndarray
    output_index: int
    state: SnetState


def initial_point(problem: Problem, cfg: SnetConfig, oracle: StochasticOracle) -> np.ndarray:
    raw = oracle.stream(CHANNEL_INIT).standard_normal(problem.dim_m)
    return prox.apply(problem.prox_spec(1.0 / cfg.psi_beta), raw)


def init_state(problem: Problem, cfg: SnetConfig, oracle: StochasticOracle) -> SnetState:
    """x0 = prox(N(0, I)), y0 = x0 and lambda_i^0 = -G_i(x0) from one extra estimation round"""
    x0 = initial_point(problem, cfg, oracle)
    g0 = np.stack([oracle.estimate(problem.local(i), x0, agent=i, iteration=0)
                   for i in range(problem.n_agents)])
    tiled = np.tile(x0, (problem.n_agents, 1))
    return SnetState(x=x0, z=tiled.copy(), lam=-g0, y=tiled, g_anchor=g0)


def pick_agent(oracle: StochasticOracle, p: np.ndarray, iteration: int) -> int:
    return int(oracle.stream(CHANNEL_PICK, 0, iteration).choice(p.size, p=p))


def _dual_update(lam_i: np.ndarray, z_i: np.ndarray, x: np.ndarray, alpha_i: float, rho_i: float) -> np.ndarray:
    return lam_i + alpha_i * rho_i * (z_i - x)


def step(state: SnetState, problem: Problem, cfg: SnetConfig, oracle: StochasticOracle) -> SnetState:
    r = state.iteration
    params = cfg.params_at(r)
    x = state.x
    i = pick_agent(oracle, params.p, r)
    g = oracle.estimate(problem.local(i), x, agent=i, iteration=r + 1)

    scale = params.alpha[i] * params.rho[i]
    z = np.tile(x, (problem.n_agents, 1))
    z[i] = x - (state.lam[i] + g) / scale
    lam = state.lam.copy()
    lam[i] = _dual_update(state.lam[i], z[i], x, params.alpha[i], params.rho[i])

    # u uses the duals before this round's update
    u = params.beta * (params.rho @ z + state.lam.sum(axis=0))
    v = state.g_anchor.sum(axis=0) + (g - state.g_anchor[i]) / params.alpha[i]
    x_next = prox.apply(problem.prox_spec(1.0 / params.beta), u)
    guard_finite(x_next, r)

    y = state.y.copy()
    g_anchor = state.g_anchor.copy()
    y[i] = x
    g_anchor[i] = g
    return SnetState(x=x_next, z=z, lam=lam, y=y, g_anchor=g_anchor, iteration=r + 1, x_prev=x,
                     last_pick=i, last_u=u, last_v=v, last_beta=params.beta)


def dual_invariant_residual(state: SnetState) -> float:
    return float(np.max(np.linalg.norm(state.lam + state.g_anchor, axis=1)))


def update_direction_residual(state: SnetState) -> float:
    """|u^{r+1} - (x^r - beta v^r)| with v assembled from the stored anchors"""
    if state.last_u is None:
        return 0.0
    return float(np.max(np.abs(state.last_u - (state.x_prev - state.last_beta * state.last_v))))


def estimator_error_bound(mu: float, smoothness: float, dim: int) -> float:
    """Horizon-independent error floor mu^2 L^2 (M+3)^3 / 2"""
    return 0.5 * mu ** 2 * smoothness ** 2 * (dim + 3) ** 3


def _record(state: SnetState, problem: Problem, cfg: SnetConfig, oracle: StochasticOracle,
            trial: int, started: float) -> TraceRecord:
    record = TraceRecord(trial=trial, iteration=state.iteration,
                         cons_vio=float(np.sum((state.z - state.x) ** 2)),
                         psi=psi_gap(state.x, problem, cfg.psi_beta),
                         oracle_calls=oracle.calls)
    if cfg.record_wall_time:
        record.wall_seconds = time.perf_counter() - started
    return record


def run(problem: Problem, cfg: SnetConfig, trial: int = 0, oracle: Optional[StochasticOracle] = None,
        output_index: Optional[int] = None) -> SnetResult:
    """Run T rounds and return x^u for u uniform on {1..T}"""
    oracle = oracle or StochasticOracle(cfg.oracle_spec(problem), cfg.seed, trial)
    if output_index is None:
        output_index = int(oracle.stream(CHANNEL_OUTPUT).integers(1, cfg.horizon + 1))

    logger.info(f"ZONE-S ({cfg.schedule}) trial {trial}: N={problem.n_agents}, M={problem.dim_m}, "
                f"T={cfg.horizon}, J={cfg.batch}, mu={cfg.mu:.4g}, beta={cfg.psi_beta:.4g}")
    started = time.perf_counter()
    state = init_state(problem, cfg, oracle)
    trace = [_record(state, problem, cfg, oracle, trial, started)]
    x_out = None

    try:
        for _ in range(cfg.horizon):
            state = step(state, problem, cfg, oracle)
            if state.iteration == output_index:
                x_out = state.x.copy()
            if state.iteration % cfg.stride == 0 or state.iteration == cfg.horizon:
                trace.append(_record(state, problem, cfg, oracle, trial, started))
                logger.debug(f"trial {trial} r={state.iteration}: psi={trace[-1].psi:.4e}")
    except NumericalOverflow as exc:
        logger.error(f"ZONE-S trial {trial} aborted: {exc}")
        exc.trace = trace
        raise

    return SnetResult(trace=trace, x_out=x_out, output_index=output_index, state=state)
