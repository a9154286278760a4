#!/usr/bin/env python3
"""
Experiment Configuration
An experiment document is flat KEY=VALUE text (the .env grammar, '#' comments).
Every run is reproducible from the resolved values echoed by export_to_env_format().
"""

import io
import math
import os
from typing import Any, Callable, Dict, Optional

from dotenv import dotenv_values

from config import (ASSUMPTION_DELTA, DEFAULT_NOISE_STD, DEFAULT_RADIUS, DEFAULT_STRIDE, DEFAULT_TRIALS,
                    OUTPUT_DIR)
from graph import Topology, derive_operators, random_geometric
from problems import NONSMOOTH_KINDS, SIGMOID_LOG, SPARSE_QUADRATIC, Problem, make_problem
from szo import COUPLING_INDEPENDENT, COUPLING_SHARED
from zone_m import MODE_DISTRIBUTED, MODE_MATRIX, ParameterError, make_config, validate_params

TOPOLOGY_MNET = 'mnet'
TOPOLOGY_SNET = 'snet'

MESH_ALGORITHMS = ('zone_m', 'zone_m_inc', 'rgf')
STAR_ALGORITHMS = ('zone_s', 'zone_s_inc', 'zo_gd', 'zo_sgd')

PARAMS_THEORETICAL = 'theoretical'
PARAMS_MANUAL = 'manual'

ENUMS = {
    'TOPOLOGY': (TOPOLOGY_MNET, TOPOLOGY_SNET),
    'PROBLEM': (SIGMOID_LOG, SPARSE_QUADRATIC),
    'ALGORITHM': MESH_ALGORITHMS + STAR_ALGORITHMS,
    'MODE': (MODE_MATRIX, MODE_DISTRIBUTED),
    'NOISE_COUPLING': (COUPLING_INDEPENDENT, COUPLING_SHARED),
    'PARAMS': (PARAMS_THEORETICAL, PARAMS_MANUAL),
}


def _bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered not in ('true', 'false'):
        raise ValueError(f"expected true or false, got {value!r}")
    return lowered == 'true'


PARSERS: Dict[str, Callable[[str], Any]] = {
    'TOPOLOGY': str, 'N_AGENTS': int, 'RADIUS': float, 'GRAPH_SEED': int,
    'PROBLEM': str, 'DIM_M': int, 'ELL': float, 'PROBLEM_SEED': int,
    'ALGORITHM': str, 'MODE': str, 'HORIZON': int, 'BATCH': int, 'SMOOTHING': float,
    'NOISE_STD': float, 'NOISE_COUPLING': str, 'TRIALS': int, 'STRIDE': int, 'OUTPUT': str,
    'MASTER_SEED': int, 'PARAMS': str, 'RHO': float, 'C': float, 'DELTA': float,
    'STEPSIZE': float, 'RECORD_WALL_TIME': _bool,
}


class ConfigError(Exception):
    """Base error for experiment documents"""


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        prefix = f"line {line}: " if line is not None else ''
        prefix += f"{field}: " if field else ''
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class ConfigValidationError(ConfigError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class ExperimentConfig:
    """Configuration class for one experiment (topology, problem, algorithm, trials)"""

    def __init__(self, values: Optional[Dict[str, Any]] = None):
        self.values = dict(values or {})
        self.load_config()

    def _get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def load_config(self):
        """Resolve every field from the parsed document, filling defaults"""
        # Algorithm
        self.algorithm = self._get('ALGORITHM', 'zone_m')
        self.mode = self._get('MODE', MODE_DISTRIBUTED)
        self.params = self._get('PARAMS', PARAMS_THEORETICAL)

        # Topology
        default_topology = TOPOLOGY_SNET if self.algorithm in STAR_ALGORITHMS else TOPOLOGY_MNET
        self.topology = self._get('TOPOLOGY', default_topology)
        self.n_agents = self._get('N_AGENTS')
        self.radius = self._get('RADIUS', DEFAULT_RADIUS)
        self.graph_seed = self._get('GRAPH_SEED', 0)

        # Problem
        self.problem = self._get('PROBLEM', SIGMOID_LOG)
        self.dim_m = self._get('DIM_M', 1)
        self.ell = self._get('ELL', 5.0)
        self.problem_seed = self._get('PROBLEM_SEED', 0)

        # Oracle and horizon
        self.horizon = self._get('HORIZON')
        self.batch = self._get('BATCH', self.horizon)
        default_mu = 1.0 / math.sqrt(self.horizon) if self.horizon and self.horizon > 0 else None
        self.smoothing = self._get('SMOOTHING', default_mu)
        self.noise_std = self._get('NOISE_STD', DEFAULT_NOISE_STD)
        self.noise_coupling = self._get('NOISE_COUPLING', COUPLING_INDEPENDENT)

        # Penalty / stepsize overrides
        self.rho = self._get('RHO')
        self.c = self._get('C')
        self.delta = self._get('DELTA', ASSUMPTION_DELTA)
        self.stepsize = self._get('STEPSIZE')

        # Trials and output
        self.trials = self._get('TRIALS', DEFAULT_TRIALS)
        self.stride = self._get('STRIDE', DEFAULT_STRIDE)
        self.master_seed = self._get('MASTER_SEED', 0)
        self.output = self._get('OUTPUT', os.path.join(OUTPUT_DIR, f'{self.algorithm}.csv'))
        self.record_wall_time = self._get('RECORD_WALL_TIME', False)

    @property
    def is_mesh(self) -> bool:
        return self.topology == TOPOLOGY_MNET

    def build_topology(self) -> Optional[Topology]:
        if not self.is_mesh:
            return None
        return random_geometric(self.n_agents, self.dim_m, self.radius, self.graph_seed)

    def build_problem(self) -> Problem:
        return make_problem(self.problem, self.n_agents, self.problem_seed, self.dim_m, self.ell)

    def with_overrides(self, **overrides) -> 'ExperimentConfig':
        values = dict(self.values)
        values.update({key.upper(): value for key, value in overrides.items()})
        return ExperimentConfig(values)

    def validate_config(self) -> Dict[str, Any]:
        """Validate configuration and return validation results"""
        validation_results = {
            'valid': True,
            'errors': [],
            'warnings': []
        }
        errors = validation_results['errors']

        # Required fields
        if self.n_agents is None:
            errors.append("N_AGENTS is required")
        if self.horizon is None:
            errors.append("HORIZON is required")
        if errors:
            validation_results['valid'] = False
            return validation_results

        if self.trials < 1:
            errors.append("TRIALS must be at least 1")
        if self.horizon < 1:
            errors.append("HORIZON must be at least 1")
        if self.batch is not None and self.batch < 1:
            errors.append("BATCH must be at least 1")
        if self.smoothing is not None and self.smoothing <= 0:
            errors.append("SMOOTHING must be positive")
        if self.noise_std < 0:
            errors.append("NOISE_STD must be non-negative")
        if self.stride < 1:
            errors.append("STRIDE must be at least 1")
        if self.dim_m < 1:
            errors.append("DIM_M must be at least 1")
        if self.problem == SIGMOID_LOG and self.dim_m != 1:
            errors.append("sigmoid_log is a scalar problem, DIM_M must be 1")
        if self.problem == SPARSE_QUADRATIC and self.ell <= 0:
            errors.append("ELL must be positive")
        if self.stepsize is not None and self.stepsize <= 0:
            errors.append("STEPSIZE must be positive")

        # Topology / algorithm compatibility
        if self.algorithm in MESH_ALGORITHMS and not self.is_mesh:
            errors.append(f"{self.algorithm} runs on a mesh network, set TOPOLOGY=mnet")
        if self.algorithm in STAR_ALGORITHMS and self.is_mesh:
            errors.append(f"{self.algorithm} runs on a star network, set TOPOLOGY=snet")
        if self.algorithm in MESH_ALGORITHMS and self.problem in NONSMOOTH_KINDS:
            errors.append(f"{self.algorithm} has no prox step for the nonsmooth term of {self.problem}, "
                          f"use a star algorithm")
        if self.is_mesh and self.n_agents < 2:
            errors.append("a mesh network needs N_AGENTS >= 2")
        if not self.is_mesh and self.n_agents < 1:
            errors.append("N_AGENTS must be at least 1")
        if self.is_mesh and self.radius <= 0:
            errors.append("RADIUS must be positive")

        if self.algorithm == 'zone_m' and self.params == PARAMS_MANUAL and self.rho is None:
            errors.append("PARAMS=manual requires RHO")
        if self.rho is not None and self.rho <= 0:
            errors.append("RHO must be positive")

        if not errors and self.algorithm == 'zone_m' and self.params == PARAMS_THEORETICAL \
                and (self.rho is not None or self.c is not None):
            errors.extend(self._theory_errors())

        # Warnings for settings that are legal but expensive or unusual
        if self.trials < 20:
            validation_results['warnings'].append("fewer than 20 trials, trial means will be noisy")
        if self.batch is not None and self.batch * self.horizon > 10 ** 7:
            validation_results['warnings'].append("BATCH x HORIZON exceeds 1e7 oracle calls per agent")
        if self.algorithm in ('zone_m_inc', 'zone_s_inc') and self.rho is not None:
            validation_results['warnings'].append("RHO is ignored by the increasing-penalty schedule")

        validation_results['valid'] = not errors
        return validation_results

    def _theory_errors(self):
        ops = derive_operators(self.build_topology())
        candidate = make_config(self.build_problem(), ops, self.horizon, self.delta, rho=self.rho, c=self.c)
        try:
            validate_params(candidate, ops)
        except ParameterError as exc:
            return [f"RHO/C outside the theoretical range: {exc}"]
        return []

    def get_config_summary(self) -> str:
        """Get a formatted summary of the current configuration"""
        summary = f"""
=== Experiment Configuration ===
Algorithm: {self.algorithm} (mode: {self.mode}, params: {self.params})

Topology:
  Kind: {self.topology}
  Agents: {self.n_agents}
  Radius: {self.radius if self.is_mesh else 'n/a'}
  Graph Seed: {self.graph_seed}

Problem:
  Kind: {self.problem}
  Dimension: {self.dim_m}
  l1 Radius: {self.ell if self.problem == SPARSE_QUADRATIC else 'n/a'}
  Problem Seed: {self.problem_seed}

Oracle:
  Horizon T: {self.horizon}
  Batch J: {self.batch}
  Smoothing mu: {self.smoothing}
  Noise std: {self.noise_std} ({self.noise_coupling})

Penalty:
  rho: {self.rho if self.rho is not None else 'theoretical'}
  c: {self.c if self.c is not None else 'theoretical'}
  delta: {self.delta}
  stepsize: {self.stepsize if self.stepsize is not None else 'default'}

Trials:
  Count: {self.trials}
  Stride: {self.stride}
  Master Seed: {self.master_seed}
  Output: {self.output}
"""
        return summary

    def export_to_env_format(self) -> str:
        """Export the resolved configuration in the document grammar"""
        def fmt(value):
            if isinstance(value, bool):
                return str(value).lower()
            return repr(float(value)) if isinstance(value, float) else str(value)

        optional = {'RHO': self.rho, 'C': self.c, 'STEPSIZE': self.stepsize}
        env_content = f"""# Experiment Configuration

# Algorithm
ALGORITHM={self.algorithm}
MODE={self.mode}
PARAMS={self.params}

# Topology
TOPOLOGY={self.topology}
N_AGENTS={self.n_agents}
RADIUS={fmt(self.radius)}
GRAPH_SEED={self.graph_seed}

# Problem
PROBLEM={self.problem}
DIM_M={self.dim_m}
ELL={fmt(self.ell)}
PROBLEM_SEED={self.problem_seed}

# Oracle
HORIZON={self.horizon}
BATCH={self.batch}
SMOOTHING={fmt(self.smoothing)}
NOISE_STD={fmt(self.noise_std)}
NOISE_COUPLING={self.noise_coupling}
DELTA={fmt(self.delta)}

# Trials
TRIALS={self.trials}
STRIDE={self.stride}
MASTER_SEED={self.master_seed}
OUTPUT={self.output}
RECORD_WALL_TIME={fmt(self.record_wall_time)}
"""
        env_content += "".join(f"{key}={fmt(value)}\n" for key, value in optional.items() if value is not None)
        return env_content


def parse_document(text: str) -> Dict[str, Any]:
    """Typed values of a KEY=VALUE document; raises ConfigParseError with line or field"""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key = line.split('=', 1)[0].strip()
        if '=' not in line or not key:
            raise ConfigParseError(f"expected KEY=VALUE, got {line!r}", line=lineno)
        if key.startswith('export '):
            key = key[len('export '):].strip()
        if key not in PARSERS:
            raise ConfigParseError("unknown key", line=lineno, field=key)

    typed = {}
    for key, value in dotenv_values(stream=io.StringIO(text)).items():
        if value is None or value == '':
            raise ConfigParseError("missing value", field=key)
        try:
            typed[key] = PARSERS[key](value)
        except ValueError as exc:
            raise ConfigParseError(f"invalid value {value!r} ({exc})", field=key) from exc
        if key in ENUMS and typed[key] not in ENUMS[key]:
            raise ConfigParseError(f"unknown value {value!r}, expected one of {', '.join(ENUMS[key])}",
                                   field=key)
    return typed


def load_config(text: str) -> ExperimentConfig:
    config = ExperimentConfig(parse_document(text))
    results = config.validate_config()
    if not results['valid']:
        raise ConfigValidationError(results['errors'])
    return config


def load_config_file(path: str) -> ExperimentConfig:
    with open(path) as handle:
        return load_config(handle.read())
