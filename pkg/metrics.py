#!/usr/bin/env python3
"""
Solution-quality measures evaluated with analytic gradients.

Nothing here touches the stochastic oracle; these are measurement-only quantities.
"""

from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd

import prox
from graph import GraphOperators
from problems import Problem

CSV_COLUMNS = ['trial', 'iter', 'opt_gap', 'cons_vio', 'phi', 'psi', 'potential', 'oracle_calls', 'wall_seconds']
FLOAT_FORMAT = '%.12e'


@dataclass
class TraceRecord:
    trial: int
    iteration: int
    opt_gap: Optional[float] = None
    cons_vio: Optional[float] = None
    phi: Optional[float] = None
    psi: Optional[float] = None
    potential: Optional[float] = None
    oracle_calls: int = 0
    wall_seconds: Optional[float] = None

    def to_row(self) -> dict:
        row = asdict(self)
        row['iter'] = row.pop('iteration')
        return {column: row[column] for column in CSV_COLUMNS}


def mnet_gap(z: np.ndarray, ops: GraphOperators, problem: Problem) -> Tuple[float, float]:
    """(opt-gap, cons-vio) = (||sum_i grad f_i(z_i)||^2 + ||Az||^2, ||Az||^2)"""
    cons_vio = float(np.sum(ops.apply_incidence(z) ** 2))
    grad_sum = problem.mesh_grad(z).sum(axis=0)
    return float(grad_sum @ grad_sum) + cons_vio, cons_vio


def phi_gap(z: np.ndarray, lam: np.ndarray, rho: float, ops: GraphOperators, problem: Problem) -> float:
    """||grad g(z) + A^T lambda + rho A^T A z||^2 + ||Az||^2"""
    lagrangian_grad = problem.mesh_grad(z) + ops.apply_incidence_t(lam) + rho * ops.apply_signed(z)
    return float(np.sum(lagrangian_grad ** 2) + np.sum(ops.apply_incidence(z) ** 2))


def psi_gap(x: np.ndarray, problem: Problem, beta: float) -> float:
    """(1/beta^2) ||x - prox_h^{1/beta}(x - beta grad f(x))||^2"""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    spec = problem.prox_spec(1.0 / beta)
    residual = x - prox.apply(spec, x - beta * problem.star_grad(x))
    return float(residual @ residual) / beta ** 2


def records_to_frame(records: Iterable[TraceRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([record.to_row() for record in records], columns=CSV_COLUMNS)
    dtypes = {column: float for column in CSV_COLUMNS}
    dtypes.update(trial=int, iter=int, oracle_calls=int)
    return frame.astype(dtypes)


def write_trace_csv(frame: pd.DataFrame, path: str) -> None:
    frame.to_csv(path, index=False, na_rep='', float_format=FLOAT_FORMAT)


def trial_means(frame: pd.DataFrame) -> pd.DataFrame:
    """Per-iteration means across trials; columns that are empty for the algorithm stay empty"""
    metric_columns = [c for c in CSV_COLUMNS if c not in ('trial', 'iter')]
    summary = frame.groupby('iter', sort=True)[metric_columns].mean()
    summary.insert(0, 'trials', frame.groupby('iter', sort=True)['trial'].nunique())
    return summary.reset_index()


def final_means(frame: pd.DataFrame) -> dict:
    summary = trial_means(frame)
    last = summary.iloc[-1]
    return {column: (None if pd.isna(last[column]) else float(last[column]))
            for column in summary.columns}


def monotone_window_fraction(values: np.ndarray, window: int = 10) -> float:
    """Fraction of consecutive windows whose mean is below the previous window's mean"""
    values = np.asarray(values, dtype=float)
    blocks = values.size // window
    if blocks < 2:
        return 1.0
    means = values[:blocks * window].reshape(blocks, window).mean(axis=1)
    return float(np.mean(np.diff(means) < 0))


def value_at_budget(frame: pd.DataFrame, column: str, budget: int) -> Optional[float]:
    """Trial-mean of `column` at the last recorded iteration whose mean oracle count fits the budget"""
    summary = trial_means(frame)
    within = summary[summary['oracle_calls'] <= budget]
    if within.empty:
        return None
    return float(within[column].iloc[-1])
