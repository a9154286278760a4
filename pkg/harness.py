#!/usr/bin/env python3
"""
Experiment orchestration: independent trials on a thread pool, CSV traces assembled
in trial order, per-iteration summaries, the sweep over network sizes, spectral
constants of a topology and the fast invariant suite.
"""

import concurrent.futures
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import prox
import zone_m
import zone_s
from baselines import BaselineConfig, run_centralized, run_rgf
from config import THREADS
from experiment_config import ConfigValidationError, ExperimentConfig
from graph import GraphOperators, Topology, derive_operators, from_edges
from logger import get_logger
from metrics import TraceRecord, final_means, records_to_frame, trial_means, write_trace_csv
from problems import Problem, make_sigmoid_log, make_sparse_quadratic
from szo import OracleSpec, StochasticOracle, estimate, smoothed_reference

logger = get_logger('harness')


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    frame: pd.DataFrame
    summary: pd.DataFrame
    csv_path: str
    summary_path: str
    aborted: Dict[int, str] = field(default_factory=dict)
    expected_calls: int = 0

    @property
    def ok(self) -> bool:
        return not self.aborted


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ''


def trial_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1)[0])


def expected_oracle_calls(cfg: ExperimentConfig) -> int:
    """Function evaluations one completed trial consumes"""
    n, t, j = cfg.n_agents, cfg.horizon, cfg.batch
    if cfg.algorithm in ('zone_m', 'zone_m_inc', 'rgf', 'zo_gd'):
        return t * n * 2 * j
    if cfg.algorithm in ('zone_s', 'zone_s_inc'):
        return n * 2 * j + t * 2 * j
    return t * 2


def _run_trial(cfg: ExperimentConfig, topo: Optional[Topology], ops: Optional[GraphOperators],
               problem: Problem, trial: int) -> List[TraceRecord]:
    seed = trial_seed(cfg.master_seed, trial)
    common = dict(seed=seed, stride=cfg.stride, noise_std=cfg.noise_std,
                  noise_coupling=cfg.noise_coupling, record_wall_time=cfg.record_wall_time)

    if cfg.algorithm in ('zone_m', 'zone_m_inc'):
        schedule = zone_m.SCHEDULE_INCREASING if cfg.algorithm == 'zone_m_inc' else zone_m.SCHEDULE_CONSTANT
        mcfg = zone_m.make_config(problem, ops, cfg.horizon, cfg.delta, mu=cfg.smoothing, batch=cfg.batch,
                                  rho=cfg.rho, c=cfg.c, schedule=schedule, **common)
        return zone_m.run(problem, topo, mcfg, cfg.mode, trial=trial, ops=ops).trace

    if cfg.algorithm in ('zone_s', 'zone_s_inc'):
        schedule = zone_s.SCHEDULE_INCREASING if cfg.algorithm == 'zone_s_inc' else zone_s.SCHEDULE_THEORETICAL
        scfg = zone_s.SnetConfig(horizon=cfg.horizon, batch=cfg.batch, mu=cfg.smoothing,
                                 smoothness=problem.smoothness, schedule=schedule, **common)
        return zone_s.run(problem, scfg, trial=trial).trace

    bcfg = BaselineConfig(kind=cfg.algorithm, horizon=cfg.horizon, mu=cfg.smoothing, batch=cfg.batch,
                          stepsize=cfg.stepsize, **common)
    if cfg.algorithm == 'rgf':
        return run_rgf(problem, topo, bcfg, trial).trace
    return run_centralized(problem, bcfg, trial).trace


def _summary_path(csv_path: str, suffix: str) -> str:
    stem, ext = os.path.splitext(csv_path)
    return f"{stem}_{suffix}{ext or '.csv'}"


def run_experiment(cfg: ExperimentConfig, threads: int = THREADS, output: Optional[str] = None) -> ExperimentResult:
    """Run all trials, write the trace CSV and the per-iteration summary CSV"""
    csv_path = output or cfg.output
    topo = cfg.build_topology()
    ops = derive_operators(topo) if topo is not None else None
    problem = cfg.build_problem()
    expected = expected_oracle_calls(cfg)

    logger.info(f"Experiment {cfg.algorithm}: N={cfg.n_agents}, T={cfg.horizon}, trials={cfg.trials}, "
                f"threads={threads}" + (f", graph retries={topo.retries}" if topo is not None else ''))

    def execute(trial: int) -> Tuple[List[TraceRecord], Optional[str]]:
        try:
            records = _run_trial(cfg, topo, ops, problem, trial)
        except zone_m.AlgorithmError as exc:
            return getattr(exc, 'trace', []), str(exc)
        if records[-1].oracle_calls != expected:
            return records, f"oracle calls {records[-1].oracle_calls} != expected {expected}"
        return records, None

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        outcomes = list(executor.map(execute, range(cfg.trials)))

    records, aborted = [], {}
    for trial, (trial_records, reason) in enumerate(outcomes):
        records.extend(trial_records)
        if reason is not None:
            aborted[trial] = reason
            logger.error(f"Trial {trial} aborted: {reason}")

    frame = records_to_frame(records)
    summary = trial_means(frame) if not frame.empty else frame
    summary_path = _summary_path(csv_path, 'summary')
    try:
        directory = os.path.dirname(csv_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        write_trace_csv(frame, csv_path)
        write_trace_csv(summary, summary_path)
    except OSError as exc:
        logger.error(f"Could not write results to {csv_path}: {exc}")
        raise

    logger.info(f"Wrote {len(frame)} rows to {csv_path} ({len(aborted)} aborted trials)")
    return ExperimentResult(cfg, frame, summary, csv_path, summary_path, aborted, expected)


def sweep(cfg: ExperimentConfig, agents: Sequence[int], threads: int = THREADS) -> Tuple[List[ExperimentResult], str]:
    """One run per N; returns the runs and the path of the combined final-means CSV"""
    results, rows = [], []
    for n_agents in agents:
        sub = cfg.with_overrides(n_agents=int(n_agents))
        validation = sub.validate_config()
        if not validation['valid']:
            raise ConfigValidationError(validation['errors'])
        result = run_experiment(sub, threads, output=_summary_path(cfg.output, f'n{n_agents}'))
        results.append(result)
        row = {'n_agents': n_agents, 'aborted': len(result.aborted)}
        if not result.frame.empty:
            row.update(final_means(result.frame))
        rows.append(row)

    combined_path = _summary_path(cfg.output, 'sweep')
    write_trace_csv(pd.DataFrame(rows), combined_path)
    logger.info(f"Sweep over N={list(agents)} written to {combined_path}")
    return results, combined_path


def spectra(cfg: ExperimentConfig) -> Dict[str, float]:
    """sigma_min, ||L+|| and the theoretical (c, rho_min, k) of the configured mesh"""
    topo = cfg.build_topology()
    if topo is None:
        raise ConfigValidationError(["spectra needs a mesh topology (TOPOLOGY=mnet)"])
    ops = derive_operators(topo)
    problem = cfg.build_problem()
    c, rho_min, k = zone_m.theoretical_params(ops, problem.l_hat, cfg.delta, cfg.c)
    return {'n_agents': topo.n_agents, 'n_edges': topo.n_edges, 'retries': topo.retries,
            'sigma_min': ops.sigma_min, 'norm_lplus': ops.norm_lplus, 'l_hat': problem.l_hat,
            'c': c, 'rho_min': rho_min, 'k': k}


# ---- fast invariant suite ----

class CheckFailed(Exception):
    pass


def _require(condition, message: str) -> None:
    if not condition:
        raise CheckFailed(message)


FOUR_NODE_EDGES = [(1, 2), (1, 4), (3, 4)]
PATH_EDGES = [(1, 2), (2, 3)]


def _check_graph_identities() -> str:
    for edges, n in ((PATH_EDGES, 3), (FOUR_NODE_EDGES, 4)):
        ops = derive_operators(from_edges(n, 1, edges))
        two_d = 2.0 * np.diag(ops.degree)
        _require(np.max(np.abs(ops.signless_laplacian + ops.signed_laplacian - two_d)) == 0, "L+ + L- != 2D")
        _require(np.max(np.abs(ops.mixing.sum(axis=1) - 1.0)) <= 1e-12, "W rows do not sum to 1")
        _require(np.all(ops.mixing >= 0), "W has negative entries")
        half = 0.5 * ops.signless_laplacian / ops.degree[:, None]
        _require(np.max(np.abs(half - 0.5 * (np.eye(n) + ops.mixing))) <= 1e-12, "D^-1 L+ / 2 != (I+W)/2")
    path = derive_operators(from_edges(3, 1, PATH_EDGES))
    _require(abs(path.sigma_min - 1.0) <= 1e-10, f"path sigma_min={path.sigma_min}")
    _require(abs(path.norm_lplus - 3.0) <= 1e-10, f"path ||L+||={path.norm_lplus}")
    return "path and 4-node graph identities hold"


def _check_estimator_unbiased(reps: int = 2000) -> str:
    mu, batch = 0.1, 10
    p = np.eye(2)
    z = np.array([1.0, 0.0])
    spec = OracleSpec(smoothing=mu, batch=batch, dim=2)
    rng = np.random.default_rng(0)
    samples = np.stack([estimate(lambda w: 0.5 * np.sum(w * w, axis=-1), z, spec, rng).value
                        for _ in range(reps)])
    _, grad = smoothed_reference('quadratic', {'P': p}, z, mu)
    stderr = samples.std(axis=0, ddof=1) / np.sqrt(reps)
    deviation = np.abs(samples.mean(axis=0) - grad)
    _require(np.all(deviation <= 4 * stderr), f"mean deviates by {deviation} (stderr {stderr})")
    return f"max deviation {deviation.max():.3e} over {reps} repetitions"


def _check_form_equivalence(horizon: int = 50) -> str:
    topo = from_edges(4, 1, FOUR_NODE_EDGES)
    ops = derive_operators(topo)
    problem = make_sigmoid_log(4, seed=1)
    cfg = zone_m.make_config(problem, ops, horizon, delta=1e-3, batch=10, stride=horizon)
    matrix = zone_m.run(problem, topo, cfg, zone_m.MODE_MATRIX, ops=ops, output_index=0)
    distributed = zone_m.run(problem, topo, cfg, zone_m.MODE_DISTRIBUTED, ops=ops, output_index=0)
    gap = float(np.max(np.abs(matrix.state.z - distributed.state.z)))
    _require(gap <= 1e-10, f"matrix and distributed iterates differ by {gap:.3e}")
    residual = zone_m.dual_feasibility_residual(matrix.state.lam, ops)
    _require(residual <= 1e-10, f"dual leaves col(A) by {residual:.3e}")
    return f"max divergence {gap:.3e} after {horizon} iterations"


def _check_prox_oracle(points: int = 30, grid_step: float = 0.02) -> str:
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(points):
        dim = 1 + k % 3
        u = rng.normal(scale=2.0, size=dim)
        fast = prox.project_l1_ball(u, 1.0)
        brute = prox.brute_force_project(1.0, u, grid_step)
        worst = max(worst, float(np.max(np.abs(fast - brute))))
    _require(worst <= 2 * grid_step, f"projection differs from grid oracle by {worst:.3e}")
    return f"max deviation from grid oracle {worst:.3e}"


def _check_dual_compact_form(horizon: int = 50) -> str:
    problem = make_sparse_quadratic(3, 2, ell=1.0, seed=2)
    cfg = zone_s.SnetConfig(horizon=horizon, batch=5, mu=1e-2, smoothness=problem.smoothness, seed=4)
    oracle = StochasticOracle(cfg.oracle_spec(problem), cfg.seed)
    state = zone_s.init_state(problem, cfg, oracle)
    worst_dual, worst_direction = zone_s.dual_invariant_residual(state), 0.0
    for _ in range(horizon):
        state = zone_s.step(state, problem, cfg, oracle)
        worst_dual = max(worst_dual, zone_s.dual_invariant_residual(state))
        worst_direction = max(worst_direction, zone_s.update_direction_residual(state))
    _require(worst_dual <= 1e-12, f"dual compact form violated by {worst_dual:.3e}")
    _require(worst_direction <= 1e-12, f"u != x - beta v by {worst_direction:.3e}")
    return f"dual residual {worst_dual:.3e}, direction residual {worst_direction:.3e}"


VALIDATION_CHECKS: List[Tuple[str, Callable[[], str]]] = [
    ('graph_identities', _check_graph_identities),
    ('estimator_unbiasedness', _check_estimator_unbiased),
    ('form_equivalence', _check_form_equivalence),
    ('prox_oracle', _check_prox_oracle),
    ('dual_compact_form', _check_dual_compact_form),
]


def validate_suite() -> List[CheckResult]:
    results = []
    for name, check in VALIDATION_CHECKS:
        try:
            results.append(CheckResult(name, True, check()))
        except Exception as exc:
            results.append(CheckResult(name, False, str(exc) or exc.__class__.__name__))
    for result in results:
        log = logger.info if result.passed else logger.error
        log(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
    return results


def format_report(results: Sequence[CheckResult]) -> str:
    lines = [f"{'PASS' if r.passed else 'FAIL':4}  {r.name:24}  {r.detail}" for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
