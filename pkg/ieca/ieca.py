import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .dataset_io import DataMatrix, as_matrix
from .decorators import Evolution, degenerate_fallback
from .elbow import default_k_max, scan_k
from .engine import (FitnessTrace, advance, check_termination, fitness,
                     initialize, relabel, single_cluster, step)
from .exceptions import InvalidParameterError
from .mappings import Mode, lookup_mode
from .preprocess import CleaningPolicy, PreparedData, percentile_ranks, prepare, prepare_numeric

logger = logging.getLogger(__name__)

__title__ = "ieca-py"
__version__ = "0.1.0"
__interface_version__ = "1.0"
__license__ = "MIT"

DEFAULT_DENSITY = 0.001
DEFAULT_ALPHA = 0.001
DEFAULT_BETA = 1.5
DEFAULT_ITERATIONS = 50
DEFAULT_RUNS = 30
DEFAULT_SOCIAL_RANKS = 2
DEFAULT_ELBOW_RESTARTS = 10


@dataclass(frozen=True)
class EngineConfig:
    """
    Parameters
    ----------
    mode : Mode | str
        'ieca' or 'eca'
    k : int | 'auto' | None
        fixed number of clusters, or 'auto'/None for the elbow scan (iECA* only)
    social_ranks : int
        S, the initial number of clusters of ECA*
    density : float
        clusters with fewer than ceil(density * N) rows are dissolved
    alpha : float
        Levy step scale
    crossover : str
        only 'uniform'
    max_iterations : int
    runs : int
        runs of a benchmark batch
    seed : int
    levy_beta : float
    k_max : int
        upper end of the elbow scan, min(10, ceil(sqrt(N))) when None
    elbow_restarts : int
    cleaning : CleaningPolicy
    greedy_survivor : bool
        keep the newC centroids when the mut-over trial has a larger SSE
    """
    mode: Mode = Mode.IECA
    k: Optional[int] = None
    social_ranks: int = DEFAULT_SOCIAL_RANKS
    density: float = DEFAULT_DENSITY
    alpha: float = DEFAULT_ALPHA
    crossover: str = 'uniform'
    max_iterations: int = DEFAULT_ITERATIONS
    runs: int = DEFAULT_RUNS
    seed: int = 0
    levy_beta: float = DEFAULT_BETA
    k_max: Optional[int] = None
    elbow_restarts: int = DEFAULT_ELBOW_RESTARTS
    cleaning: CleaningPolicy = field(default_factory=CleaningPolicy)
    greedy_survivor: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, 'mode', lookup_mode(self.mode))
        except ValueError as e:
            raise InvalidParameterError(str(e))
        if isinstance(self.k, str):
            if self.k.lower() != 'auto':
                raise InvalidParameterError(f"k must be a count or 'auto', got {self.k!r}")
            object.__setattr__(self, 'k', None)
        if self.k is not None and self.k < 1:
            raise InvalidParameterError(f'k must be at least 1, got {self.k}')
        if not 0 < self.density < 1:
            raise InvalidParameterError(f'density must be in (0, 1), got {self.density}')
        if self.alpha < 0:
            raise InvalidParameterError(f'alpha must be >= 0, got {self.alpha}')
        if self.crossover != 'uniform':
            raise InvalidParameterError(f'Unsupported crossover {self.crossover!r}')
        if self.max_iterations < 1:
            raise InvalidParameterError('max_iterations must be at least 1')
        if self.runs < 1:
            raise InvalidParameterError('runs must be at least 1')
        if self.mode is Mode.ECA and self.social_ranks < 2:
            raise InvalidParameterError('ECA* needs at least 2 social class ranks')
        if not 0 < self.levy_beta <= 2:
            raise InvalidParameterError(f'levy_beta must be in (0, 2], got {self.levy_beta}')
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameterError('seed must be an unsigned 64 bit integer')
        if self.k_max is not None and self.k_max < 2:
            raise InvalidParameterError('k_max must be at least 2')
        if self.elbow_restarts < 1:
            raise InvalidParameterError('elbow_restarts must be at least 1')

    def replace(self, **kwargs) -> 'EngineConfig':
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> Dict:
        d = dataclasses.asdict(self)
        d['mode'] = self.mode.value
        d['k'] = 'auto' if self.k is None else self.k
        return d


@dataclass
class RunResult:
    labels: np.ndarray
    centroids: pd.DataFrame
    trace: FitnessTrace
    iterations_used: int
    seed_used: int
    row_index: np.ndarray
    normalized_centroids: np.ndarray
    prepared: PreparedData
    warnings: List[str] = field(default_factory=list)
    elbow: Optional[object] = None

    @property
    def k(self) -> int:
        return int(self.normalized_centroids.shape[0])

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def to_labels_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'row': self.row_index, 'label': self.labels})


class EcaStar:
    """
    Evolutionary clustering of numeric datasets: percentile based
    initialization, mut-over recombination and diversity based merging,
    starting from S social class ranks
    """
    mode = Mode.ECA

    def __init__(self, config: Optional[EngineConfig] = None, **kwargs):
        """
        Parameters
        ----------
        config : EngineConfig
        kwargs
            EngineConfig fields, used when no config is given
        """
        if config is None:
            config = EngineConfig(mode=self.mode, **kwargs)
        elif config.mode is not self.mode:
            config = config.replace(mode=self.mode)
        self.config = config

    def _prepare(self, matrix: DataMatrix) -> PreparedData:
        return prepare_numeric(matrix)

    def _initial_k(self, prepared: PreparedData) -> Tuple[int, Optional[object], List[str]]:
        # K = S, see DESIGN.md on the exponent
        return self.config.social_ranks, None, []

    @degenerate_fallback
    def _evolve(self, data: np.ndarray, k: int, rng: np.random.Generator) -> Evolution:
        cfg = self.config
        state = initialize(data, percentile_ranks(data), k, rng)
        trace = FitnessTrace()
        iteration = 0
        while True:
            iteration += 1
            update = step(state, data, rng, cfg.alpha, cfg.levy_beta, cfg.density,
                          greedy=cfg.greedy_survivor)
            trace.append(fitness(state, data, iteration, update))
            logger.debug(f'Iteration {iteration}: k={state.k_live}, '
                         f'sum_intra={trace[-1].sum_intra:.6g}, sse={trace[-1].sse:.6g}')
            if check_termination(trace, cfg.max_iterations):
                break
            advance(state, data)
        return Evolution(state, trace, iteration, [])

    def fit(self, data: Union[DataMatrix, pd.DataFrame]) -> RunResult:
        """
        Run the full pipeline on a dataset

        Parameters
        ----------
        data : DataMatrix | pd.DataFrame

        Returns
        -------
        RunResult
        """
        cfg = self.config
        matrix = as_matrix(data)
        prepared = self._prepare(matrix)
        x = prepared.data
        rng = np.random.default_rng(cfg.seed)
        scan = None

        if x.shape[0] == 1 or np.all(x == x[0]):
            note = 'all rows are identical, returning a single cluster'
            logger.warning(note)
            warnings.warn(note)
            evolution = Evolution(single_cluster(x), FitnessTrace(), 0, [note])
        else:
            k, scan, notes = self._initial_k(prepared)
            logger.info(f'{self.mode.label}: {x.shape[0]} rows, {x.shape[1]} dims, k={k}, '
                        f'seed={cfg.seed}')
            evolution = self._evolve(x, k, rng)
            evolution.notes[:0] = notes

        state = evolution.state
        labels, centroids = relabel(state.labels, state.centroids)
        trace = evolution.trace
        if len(trace) == 0:
            trace.append(fitness(state, x, 0))
        logger.info(f'{self.mode.label} finished after {evolution.iterations} iterations '
                    f'with k={centroids.shape[0]}')
        return RunResult(
            labels=labels,
            centroids=prepared.restore_centroids(centroids),
            trace=trace,
            iterations_used=evolution.iterations,
            seed_used=cfg.seed,
            row_index=prepared.row_index,
            normalized_centroids=centroids,
            prepared=prepared,
            warnings=list(evolution.notes),
            elbow=scan,
        )


class IEcaStar(EcaStar):
    """
    ECA* for mixed datasets: cleans, encodes and normalizes the input and
    picks the number of clusters with the elbow method
    """
    mode = Mode.IECA

    def _prepare(self, matrix: DataMatrix) -> PreparedData:
        return prepare(matrix, self.config.cleaning)

    def _initial_k(self, prepared: PreparedData) -> Tuple[int, Optional[object], List[str]]:
        cfg = self.config
        n = prepared.n_rows
        if cfg.k is not None:
            return cfg.k, None, []
        k_max = min(cfg.k_max or default_k_max(n), n)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            scan = scan_k(prepared.data, k_max, restarts=cfg.elbow_restarts, seed=cfg.seed)
        return scan.chosen_k, scan, [str(w.message) for w in caught]


def run(data: Union[DataMatrix, pd.DataFrame], cfg: Optional[EngineConfig] = None) -> RunResult:
    cfg = cfg or EngineConfig()
    if cfg.mode is Mode.ECA:
        return run_baseline_eca(data, cfg)
    return IEcaStar(cfg).fit(data)


def run_baseline_eca(data: Union[DataMatrix, pd.DataFrame],
                     cfg: Optional[EngineConfig] = None) -> RunResult:
    cfg = cfg or EngineConfig(mode=Mode.ECA)
    return EcaStar(cfg).fit(data)
