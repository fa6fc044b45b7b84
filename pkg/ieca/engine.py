import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.special import gamma

from .elbow import compute_sse
from .exceptions import DegeneratePartitionError, InvalidParameterError
from .metrics import inter_cluster, intra_cluster
from .misc import quartiles
from .preprocess import PercentileTable

logger = logging.getLogger(__name__)

CONVERGENCE = 1e-9

Trial = namedtuple('Trial', ['centroids', 'labels'])
Update = namedtuple('Update', ['current_intra', 'selected_intra'])
Selection = namedtuple('Selection', ['accepted_trial', 'incumbent_sse', 'trial_sse'])


@dataclass
class ClusterState:
    """
    Population of one run. Row i of every K-sized array belongs to cluster i.
    intra/inter describe the nearest-centroid partition of `centroids`,
    old_intra/old_inter the one of `old_centroids`.
    """
    centroids: np.ndarray
    old_centroids: np.ndarray
    labels: np.ndarray
    history: np.ndarray
    intra: np.ndarray
    old_intra: np.ndarray
    inter: np.ndarray
    old_inter: np.ndarray
    new_centroids: Optional[np.ndarray] = None

    @property
    def k_live(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k_live)

    def keep(self, clusters: np.ndarray):
        """Restrict every per-cluster array to the given clusters, in that order"""
        self.centroids = self.centroids[clusters]
        self.old_centroids = self.old_centroids[clusters]
        self.history = self.history[clusters]
        self.intra = self.intra[clusters]
        self.old_intra = self.old_intra[clusters]
        self.inter = self.inter[clusters]
        self.old_inter = self.old_inter[clusters]
        if self.new_centroids is not None:
            self.new_centroids = self.new_centroids[clusters]


@dataclass(frozen=True)
class FitnessRecord:
    iteration: int
    sum_intra: float
    min_inter: float
    k_live: int
    sse: float
    current_intra: float = float('nan')
    selected_intra: float = float('nan')


@dataclass
class FitnessTrace:
    records: List[FitnessRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[FitnessRecord]:
        return iter(self.records)

    def __getitem__(self, item) -> FitnessRecord:
        return self.records[item]

    def append(self, record: FitnessRecord):
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.iteration, r.sum_intra, r.min_inter, r.k_live, r.sse] for r in self.records],
            columns=['iter', 'sum_intra', 'min_inter', 'k_live', 'sse'],
        )


def nearest(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid for every row, the lowest index on ties"""
    return cdist(data, centroids, 'sqeuclidean').argmin(axis=1)


def members_of(data: np.ndarray, labels: np.ndarray, k: int) -> List[np.ndarray]:
    return [data[labels == i] for i in range(k)]


def interquartile_mean(members: np.ndarray) -> np.ndarray:
    """
    Per dimension, the mean of the member values lying in [Q1, Q3]. When no
    value falls inside (two members), the median is used.
    """
    q1, q3 = quartiles(members, axis=0)
    inside = (members >= q1) & (members <= q3)
    counts = inside.sum(axis=0)
    sums = np.where(inside, members, 0.0).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), np.median(members, axis=0))


def _partition_caches(data: np.ndarray, centroids: np.ndarray):
    k = centroids.shape[0]
    groups = members_of(data, nearest(data, centroids), k)
    intra = np.array([intra_cluster(g) if len(g) else np.inf for g in groups])
    inter = np.zeros(k)
    for i in range(k):
        if len(groups[i]) == 0:
            continue
        others = [inter_cluster(groups[i], groups[j])
                  for j in range(k) if j != i and len(groups[j])]
        inter[i] = min(others) if others else 0.0
    return intra, inter


def evaluate(state: ClusterState, data: np.ndarray) -> ClusterState:
    """Refresh the intra/inter caches of the current and the old centroids"""
    state.intra, state.inter = _partition_caches(data, state.centroids)
    state.old_intra, state.old_inter = _partition_caches(data, state.old_centroids)
    return state


def initialize(data: np.ndarray, ptable: PercentileTable, k: int,
               rng: np.random.Generator) -> ClusterState:
    """
    Bin the rows on their average percentile rank into k clusters, centroids
    are the interquartile means of the bins, old centroids are drawn uniformly
    inside the interquartile box of every bin

    Parameters
    ----------
    data : np.ndarray
        N x D matrix in [0, 1]
    ptable : PercentileTable
    k : int
    rng : np.random.Generator

    Returns
    -------
    ClusterState
    """
    n = data.shape[0]
    if not 1 <= k <= n:
        raise InvalidParameterError(f'Cannot start {k} clusters on {n} rows')
    bins = np.minimum(np.floor(ptable.P_row * k / 100).astype(int), k - 1)
    used, labels = np.unique(bins, return_inverse=True)
    if len(used) < k:
        logger.debug(f'{k - len(used)} percentile bins received no rows')
    k = len(used)

    centroids = np.empty((k, data.shape[1]))
    old_centroids = np.empty_like(centroids)
    for i, group in enumerate(members_of(data, labels, k)):
        centroids[i] = interquartile_mean(group)
        q1, q3 = quartiles(group, axis=0)
        old_centroids[i] = rng.uniform(q1, q3)
    empty = np.zeros(k)
    state = ClusterState(centroids=centroids, old_centroids=old_centroids, labels=labels,
                         history=np.zeros_like(centroids), intra=empty, old_intra=empty.copy(),
                         inter=empty.copy(), old_inter=empty.copy())
    return evaluate(state, data)


def density_threshold(density: float, n: int) -> int:
    # round first so that eg. 0.001 * 1000 gives 1, not 2
    return max(1, math.ceil(round(density * n, 9)))


def recount_clusters(state: ClusterState, data: np.ndarray, density: float) -> int:
    """
    Remove empty and low-density clusters, their rows join the nearest
    surviving centroid

    Returns
    -------
    int
        the number of live clusters K - K_empty - K_dth
    """
    sizes = state.sizes()
    threshold = density_threshold(density, data.shape[0])
    n_empty = int((sizes == 0).sum())
    n_sparse = int(((sizes > 0) & (sizes < threshold)).sum())
    if n_empty == 0 and n_sparse == 0:
        return state.k_live

    survivors = np.flatnonzero(sizes >= threshold)
    if len(survivors) == 0:
        raise DegeneratePartitionError(
            f'No cluster reaches the density threshold of {threshold} rows')
    k_old = state.k_live
    state.keep(survivors)
    remap = np.full(k_old, -1)
    remap[survivors] = np.arange(len(survivors))
    labels = remap[state.labels]
    orphans = labels < 0
    if orphans.any():
        labels[orphans] = nearest(data[orphans], state.centroids)
    state.labels = labels
    evaluate(state, data)
    logger.debug(f'Recount: K={k_old}, empty={n_empty}, low density={n_sparse}, '
                 f'K_new={state.k_live}')
    return state.k_live


def centroid_update(state: ClusterState) -> ClusterState:
    """newC_i is C_i when its partition is tighter than the one of oldC_i, oldC_i otherwise"""
    better = state.intra < state.old_intra
    state.new_centroids = np.where(better[:, None], state.centroids, state.old_centroids)
    return state


def update_totals(state: ClusterState) -> Update:
    """Summed intra of C and of the newC picks, the second never exceeds the first"""
    return Update(float(np.sum(state.intra)),
                  float(np.sum(np.minimum(state.intra, state.old_intra))))


def mantegna_sigma(beta: float) -> float:
    num = gamma(1 + beta) * math.sin(math.pi * beta / 2)
    den = gamma((1 + beta) / 2) * beta * 2 ** ((beta - 1) / 2)
    return (num / den) ** (1 / beta)


def levy_step(alpha: float, beta: float, size, rng: np.random.Generator) -> np.ndarray:
    """
    Levy flight steps by Mantegna's algorithm, alpha * u / |v|^(1/beta)

    Parameters
    ----------
    alpha : float
        step scale
    beta : float
        stability exponent in (0, 2]
    size : int | tuple
    rng : np.random.Generator

    Returns
    -------
    np.ndarray
    """
    if not 0 < beta <= 2:
        raise InvalidParameterError(f'beta must be in (0, 2], got {beta}')
    u = rng.normal(0.0, mantegna_sigma(beta), size)
    v = rng.normal(0.0, 1.0, size)
    if alpha == 0:
        # the draws still happen so the stream position does not depend on alpha
        return np.zeros(size)
    return alpha * u / np.abs(v) ** (1 / beta)


def mutate(state: ClusterState, i: int, step: np.ndarray) -> np.ndarray:
    """Move C_i along its historical information, clamped to [0, 1]"""
    if state.intra[i] < state.old_intra[i]:
        state.history[i] = state.old_centroids[i] - state.centroids[i]
    else:
        state.history[i] = state.centroids[i] - state.old_centroids[i]
    return np.clip(state.centroids[i] + step * state.history[i], 0.0, 1.0)


def uniform_crossover(old_centroid: np.ndarray, centroid: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    take = rng.random(len(centroid)) < 0.5
    return np.where(take, centroid, old_centroid)


def mutover_select(state: ClusterState, mutants: np.ndarray, crossovers: np.ndarray,
                   data: np.ndarray) -> Trial:
    """
    Per cluster the mutant when the old centroids were further apart from the
    other clusters, the crossover child otherwise; rows go to the nearest
    trial centroid
    """
    use_mutant = state.old_inter > state.inter
    trial = np.clip(np.where(use_mutant[:, None], mutants, crossovers), 0.0, 1.0)
    return Trial(centroids=trial, labels=nearest(data, trial))


def accept_trial(state: ClusterState, trial: Trial) -> ClusterState:
    state.centroids, state.labels = trial.centroids.copy(), trial.labels
    return state


def select_survivor(state: ClusterState, trial: Trial, data: np.ndarray) -> Selection:
    """
    Greedy variant, off unless EngineConfig.greedy_survivor is set: the trial
    replaces the newC centroids only if its SSE is not larger
    """
    incumbent = state.new_centroids
    incumbent_labels = nearest(data, incumbent)
    incumbent_sse = compute_sse(data, incumbent_labels, incumbent)
    trial_sse = compute_sse(data, trial.labels, trial.centroids)
    if trial_sse <= incumbent_sse:
        accept_trial(state, trial)
        return Selection(True, incumbent_sse, trial_sse)
    state.centroids, state.labels = incumbent.copy(), incumbent_labels
    return Selection(False, incumbent_sse, trial_sse)


def diversity(data: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    sigma_ij = min(D_min - R_i, D_min - R_j) for every pair of clusters, with
    D_min the smallest distance between their members and R the intra-cluster
    distance. The diagonal is +inf.
    """
    k = int(labels.max()) + 1
    groups = members_of(data, labels, k)
    radius = [intra_cluster(g) for g in groups]
    sigma = np.full((k, k), np.inf)
    for i, j in combinations(range(k), 2):
        d_min = cdist(groups[i], groups[j]).min()
        sigma[i, j] = sigma[j, i] = min(d_min - radius[i], d_min - radius[j])
    return sigma


def _compact(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    used, compact = np.unique(labels, return_inverse=True)
    return used, compact


def merge_pass(state: ClusterState, data: np.ndarray) -> int:
    """
    Merge clusters whose members are not separated by more than their radius,
    until no pair qualifies. The smaller cluster joins the larger one, then
    centroids become member means. Returns the number of merges.

    The intra/inter caches are restricted to the surviving clusters, they are
    refreshed by the next `advance`.
    """
    used, labels = _compact(state.labels)
    if len(used) < state.k_live:
        state.keep(used)
    merges = 0
    while True:
        k = int(labels.max()) + 1
        if k < 2:
            break
        sizes = np.bincount(labels, minlength=k)
        sigma = diversity(data, labels)
        pair = next(((i, j) for i, j in combinations(range(k), 2) if sigma[i, j] <= 0), None)
        if pair is None:
            break
        i, j = pair
        big, small = (i, j) if sizes[i] >= sizes[j] else (j, i)
        logger.debug(f'Merging cluster {small} ({sizes[small]} rows) into {big} '
                     f'({sizes[big]} rows), sigma={sigma[i, j]:.4g}')
        labels = np.where(labels == small, big, labels)
        used, labels = _compact(labels)
        state.keep(used)
        merges += 1
    state.labels = labels
    state.centroids = np.vstack([g.mean(axis=0) for g in members_of(data, labels, state.k_live)])
    return merges


def fitness(state: ClusterState, data: np.ndarray, iteration: int,
            update: Optional[Update] = None) -> FitnessRecord:
    groups = members_of(data, state.labels, state.k_live)
    sum_intra = float(sum(intra_cluster(g) for g in groups))
    inter = [inter_cluster(groups[i], groups[j]) for i, j in combinations(range(len(groups)), 2)]
    return FitnessRecord(
        iteration=iteration,
        sum_intra=sum_intra,
        min_inter=float(min(inter)) if inter else 0.0,
        k_live=state.k_live,
        sse=compute_sse(data, state.labels, state.centroids),
        current_intra=update.current_intra if update else float('nan'),
        selected_intra=update.selected_intra if update else float('nan'),
    )


def check_termination(trace: FitnessTrace, max_iterations: int) -> bool:
    if len(trace) >= max_iterations:
        return True
    if len(trace) < 2:
        return False
    last, previous = trace[-1], trace[-2]
    return (abs(last.sum_intra - previous.sum_intra) < CONVERGENCE
            and abs(last.min_inter - previous.min_inter) < CONVERGENCE)


def advance(state: ClusterState, data: np.ndarray) -> ClusterState:
    """Current centroids become the old ones, new ones are the interquartile means of the members"""
    state.old_centroids = state.centroids.copy()
    state.centroids = np.vstack([
        interquartile_mean(g) for g in members_of(data, state.labels, state.k_live)
    ])
    state.new_centroids = None
    evaluate(state, data)
    state.labels = nearest(data, state.centroids)
    return state


def step(state: ClusterState, data: np.ndarray, rng: np.random.Generator, alpha: float,
         beta: float, density: float, greedy: bool = False) -> Update:
    """One cycle up to and including the merge pass"""
    recount_clusters(state, data, density)
    centroid_update(state)
    update = update_totals(state)
    steps = levy_step(alpha, beta, state.centroids.shape, rng)
    mutants = np.vstack([mutate(state, i, steps[i]) for i in range(state.k_live)])
    crossovers = np.vstack([
        uniform_crossover(state.old_centroids[i], state.centroids[i], rng)
        for i in range(state.k_live)
    ])
    trial = mutover_select(state, mutants, crossovers, data)
    if greedy:
        select_survivor(state, trial, data)
    else:
        accept_trial(state, trial)
    merge_pass(state, data)
    return update


def single_cluster(data: np.ndarray) -> ClusterState:
    centroid = data.mean(axis=0, keepdims=True)
    zero = np.zeros(1)
    return ClusterState(centroids=centroid, old_centroids=centroid.copy(),
                        labels=np.zeros(data.shape[0], dtype=int),
                        history=np.zeros_like(centroid), intra=zero, old_intra=zero.copy(),
                        inter=zero.copy(), old_inter=zero.copy())


def relabel(labels: np.ndarray, centroids: np.ndarray):
    """Clusters sorted by size descending, then by the position of their first row"""
    k = centroids.shape[0]
    sizes = np.bincount(labels, minlength=k)
    first = np.array([np.flatnonzero(labels == i)[0] for i in range(k)])
    order = sorted(range(k), key=lambda i: (-sizes[i], first[i]))
    mapping = np.empty(k, dtype=int)
    mapping[order] = np.arange(k)
    return mapping[labels], centroids[order]
