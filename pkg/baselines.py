#!/usr/bin/env python3
"""
Comparison algorithms: decentralized RGF on mesh networks, centralized ZO-GD and
ZO-SGD on the (possibly constrained) star problem.

All three draw from the same keyed streams as ZONE-M / ZONE-S (initial point on
CHANNEL_INIT, estimates keyed by agent and iteration) so that comparisons use common
random numbers wherever the algorithms line up.
"""

import time
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

import prox
from config import DEFAULT_STRIDE
from graph import Topology, derive_operators
from logger import get_logger
from metrics import TraceRecord, mnet_gap, psi_gap
from problems import Problem
from szo import CHANNEL_INIT, CHANNEL_PICK, COUPLING_INDEPENDENT, OracleSpec, StochasticOracle
from zone_m import NumericalOverflow, ParameterError, guard_finite
from zone_s import sampling_params

logger = get_logger('baselines')

KIND_RGF = 'rgf'
KIND_ZO_GD = 'zo_gd'
KIND_ZO_SGD = 'zo_sgd'
BASELINE_KINDS = (KIND_RGF, KIND_ZO_GD, KIND_ZO_SGD)


@dataclass
class BaselineConfig:
    kind: str
    horizon: int
    mu: float
    batch: int = 1
    stepsize: Optional[float] = None
    seed: int = 0
    stride: int = DEFAULT_STRIDE
    noise_std: float = 0.0
    noise_coupling: str = COUPLING_INDEPENDENT
    record_wall_time: bool = False

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ParameterError(f"unknown baseline {self.kind!r}")
        if self.kind == KIND_ZO_SGD:
            self.batch = 1
        if self.stepsize is not None and self.stepsize <= 0:
            raise ParameterError(f"stepsize must be positive, got {self.stepsize}")

    def step_length(self, problem: Problem, iteration: int) -> float:
        """Step for round r (1-based). RGF: s/sqrt(r); ZO-GD: 1/(4L(M+4)); ZO-SGD: 1/(2L(M+4))"""
        if self.kind == KIND_RGF:
            return (self.stepsize or 1.0) / np.sqrt(iteration)
        if self.stepsize is not None:
            return self.stepsize
        factor = 4.0 if self.kind == KIND_ZO_GD else 2.0
        return 1.0 / (factor * problem.l_sum * (problem.dim_m + 4))

    def oracle_spec(self, problem: Problem, dim: int) -> OracleSpec:
        return OracleSpec(noise_std=self.noise_std, smoothing=self.mu, batch=self.batch,
                          noise_coupling=self.noise_coupling, grad_bound=problem.grad_bound_total,
                          smoothness=problem.l_hat if self.kind == KIND_RGF else problem.l_sum, dim=dim)


@dataclass
class BaselineResult:
    trace: List[TraceRecord]
    output: np.ndarray


def metropolis_weights(topo: Topology) -> np.ndarray:
    """W_ij = 1/(1 + max(d_i, d_j)) on edges, self-loop takes the remainder of the row"""
    weights = np.zeros((topo.n_agents, topo.n_agents))
    for i, j in topo.edges:
        w = 1.0 / (1.0 + max(topo.degrees[i], topo.degrees[j]))
        weights[i, j] = weights[j, i] = w
    np.fill_diagonal(weights, 1.0 - weights.sum(axis=1))
    return weights


def rgf_step(z: np.ndarray, problem: Problem, weights: np.ndarray, r: int,
             cfg: BaselineConfig, oracle: StochasticOracle) -> np.ndarray:
    if r < 1:
        raise ValueError(f"RGF rounds are 1-based, got r={r}")
    g = np.stack([oracle.estimate(problem.local(i), z[i], agent=i, iteration=r)
                  for i in range(problem.n_agents)])
    return weights @ z - cfg.step_length(problem, r) * g


def zo_gd_step(x: np.ndarray, problem: Problem, cfg: BaselineConfig, oracle: StochasticOracle,
               r: int) -> np.ndarray:
    g = np.sum([oracle.estimate(problem.local(i), x, agent=i, iteration=r)
                for i in range(problem.n_agents)], axis=0)
    step = cfg.step_length(problem, r)
    return prox.apply(problem.prox_spec(1.0 / step), x - step * g)


def zo_sgd_step(x: np.ndarray, problem: Problem, cfg: BaselineConfig, oracle: StochasticOracle,
                r: int) -> np.ndarray:
    i = int(oracle.stream(CHANNEL_PICK, 0, r).integers(problem.n_agents))
    g = problem.n_agents * oracle.estimate(problem.local(i), x, agent=i, iteration=r, batch=1)
    step = cfg.step_length(problem, r)
    return prox.apply(problem.prox_spec(1.0 / step), x - step * g)


def _stamp(record: TraceRecord, cfg: BaselineConfig, started: float) -> TraceRecord:
    if cfg.record_wall_time:
        record.wall_seconds = time.perf_counter() - started
    return record


def _should_record(r: int, cfg: BaselineConfig) -> bool:
    return r % cfg.stride == 0 or r == cfg.horizon


def run_rgf(problem: Problem, topo: Topology, cfg: BaselineConfig, trial: int = 0) -> BaselineResult:
    ops = derive_operators(topo)
    oracle = StochasticOracle(cfg.oracle_spec(problem, problem.n_agents * problem.dim_m), cfg.seed, trial)
    weights = metropolis_weights(topo)
    z = oracle.stream(CHANNEL_INIT).standard_normal((problem.n_agents, problem.dim_m))

    def snapshot(r):
        opt_gap, cons_vio = mnet_gap(z, ops, problem)
        return _stamp(TraceRecord(trial, r, opt_gap=opt_gap, cons_vio=cons_vio, oracle_calls=oracle.calls),
                      cfg, started)

    logger.info(f"RGF trial {trial}: N={problem.n_agents}, T={cfg.horizon}, J={cfg.batch}")
    started = time.perf_counter()
    trace = [snapshot(0)]
    try:
        for r in range(1, cfg.horizon + 1):
            z = rgf_step(z, problem, weights, r, cfg, oracle)
            guard_finite(z, r)
            if _should_record(r, cfg):
                trace.append(snapshot(r))
    except NumericalOverflow as exc:
        logger.error(f"RGF trial {trial} aborted: {exc}")
        exc.trace = trace
        raise
    return BaselineResult(trace=trace, output=z)


def run_centralized(problem: Problem, cfg: BaselineConfig, trial: int = 0) -> BaselineResult:
    """ZO-GD or ZO-SGD from x0 = prox(N(0, I)); Psi uses the ZONE-S reference beta"""
    oracle = StochasticOracle(cfg.oracle_spec(problem, problem.dim_m), cfg.seed, trial)
    psi_beta = sampling_params(problem.smoothness).beta
    update = zo_gd_step if cfg.kind == KIND_ZO_GD else zo_sgd_step
    x = prox.apply(problem.prox_spec(1.0 / psi_beta), oracle.stream(CHANNEL_INIT).standard_normal(problem.dim_m))

    def snapshot(r):
        return _stamp(TraceRecord(trial, r, psi=psi_gap(x, problem, psi_beta), oracle_calls=oracle.calls),
                      cfg, started)

    logger.info(f"{cfg.kind.upper()} trial {trial}: N={problem.n_agents}, M={problem.dim_m}, "
                f"T={cfg.horizon}, J={cfg.batch}, step={cfg.step_length(problem, 1):.4g}")
    started = time.perf_counter()
    trace = [snapshot(0)]
    try:
        for r in range(1, cfg.horizon + 1):
            x = update(x, problem, cfg, oracle, r)
            guard_finite(x, r)
            if _should_record(r, cfg):
                trace.append(snapshot(r))
    except NumericalOverflow as exc:
        logger.error(f"{cfg.kind.upper()} trial {trial} aborted: {exc}")
        exc.trace = trace
        raise
    return BaselineResult(trace=trace, output=x)


def run_zo_gd(problem: Problem, cfg: BaselineConfig, trial: int = 0) -> BaselineResult:
    return run_centralized(problem, replace(cfg, kind=KIND_ZO_GD), trial)


def run_zo_sgd(problem: Problem, cfg: BaselineConfig, trial: int = 0) -> BaselineResult:
    return run_centralized(problem, replace(cfg, kind=KIND_ZO_SGD), trial)
