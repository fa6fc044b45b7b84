import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .exceptions import InvalidParameterError, ShortScanWarning, StructuralError
from .misc import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 10
MAX_SWEEPS = 50
TOLERANCE = 1e-9


def as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return x


def compute_sse(data, labels, centroids) -> float:
    """
    Sum of squared Euclidean distances of every point to its centroid

    Parameters
    ----------
    data : array-like, N x D
    labels : array-like of int, N
    centroids : array-like, K x D

    Returns
    -------
    float
    """
    data = as_points(data)
    centroids = as_points(centroids)
    labels = np.asarray(labels, dtype=int)
    if centroids.shape[1] != data.shape[1]:
        raise StructuralError(
            f'Centroids have {centroids.shape[1]} dimensions, data has {data.shape[1]}')
    if labels.shape != (data.shape[0],):
        raise StructuralError(f'{labels.shape[0]} labels for {data.shape[0]} points')
    if len(labels) and (labels.min() < 0 or labels.max() >= len(centroids)):
        raise StructuralError('A label references a centroid that does not exist')
    if len(labels) == 0:
        return 0.0
    return float(np.sum((data - centroids[labels]) ** 2))


@dataclass
class ElbowScan:
    k_values: np.ndarray
    sse: np.ndarray
    chosen_k: int

    @property
    def k_max(self) -> int:
        return int(self.k_values[-1])

    def to_records(self) -> List[dict]:
        return [{'k': int(k), 'sse': float(s)} for k, s in zip(self.k_values, self.sse)]


def default_k_max(n: int) -> int:
    return min(10, math.ceil(math.sqrt(n)))


def _best_sse(data: np.ndarray, k: int, restarts: int, seed: int) -> float:
    if k == 1:
        return float(np.sum((data - data.mean(axis=0)) ** 2))
    model = KMeans(
        n_clusters=k,
        init='k-means++',
        n_init=restarts,
        max_iter=MAX_SWEEPS,
        tol=TOLERANCE,
        random_state=derive_seed(seed, k),
        algorithm='lloyd',
    )
    with warnings.catch_warnings():
        # fewer distinct points than k
        warnings.simplefilter('ignore', ConvergenceWarning)
        model.fit(data)
    return float(model.inertia_)


def scan_k(data, k_max: int, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
           jobs: int = 1) -> ElbowScan:
    """
    SSE of the best of `restarts` Lloyd runs for every k in 1..k_max

    Parameters
    ----------
    data : array-like, N x D
    k_max : int
    restarts : int
    seed : int
        every k gets its own seed derived from (seed, k)
    jobs : int
        number of k values scanned concurrently

    Returns
    -------
    ElbowScan
    """
    data = as_points(data)
    if k_max < 2:
        raise InvalidParameterError(f'k_max must be at least 2, got {k_max}')
    if restarts < 1:
        raise InvalidParameterError(f'restarts must be at least 1, got {restarts}')
    if data.shape[0] < k_max:
        raise InvalidParameterError(f'{data.shape[0]} points cannot be split into {k_max} clusters')

    ks = list(range(1, k_max + 1))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            sse = list(pool.map(lambda k: _best_sse(data, k, restarts, seed), ks))
    else:
        sse = [_best_sse(data, k, restarts, seed) for k in ks]

    scan = ElbowScan(k_values=np.asarray(ks), sse=np.asarray(sse), chosen_k=2)
    scan.chosen_k = select_elbow(scan)
    logger.info(f'Elbow scan up to k={k_max} chose k={scan.chosen_k}')
    return scan


def select_elbow(scan: ElbowScan) -> int:
    """k in [2, k_max-1] with the largest second difference of the SSE curve, ties go to the smaller k"""
    sse = np.asarray(scan.sse, dtype=float)
    if len(sse) < 3:
        msg = f'Elbow scan covers only k<={len(sse)}, returning k=2'
        warnings.warn(msg, ShortScanWarning)
        logger.warning(msg)
        return 2
    d2 = sse[:-2] - 2 * sse[1:-1] + sse[2:]
    tol = 1e-12 * max(float(np.max(np.abs(sse))), 1e-300)
    best = int(np.flatnonzero(d2 >= d2.max() - tol)[0])
    return int(scan.k_values[best + 1])


def plot_scan(scan: ElbowScan, path):
    """Line plot of the SSE curve with the chosen k marked, written as SVG"""
    with matplotlib.rc_context({'svg.fonttype': 'none', 'svg.hashsalt': 'ieca'}):
        fig = Figure(figsize=(6, 4))
        ax = fig.add_subplot()
        ax.plot(scan.k_values, scan.sse, marker='o', linestyle='--', color='#4a4a8a')
        chosen = int(np.flatnonzero(scan.k_values == scan.chosen_k)[0])
        ax.scatter([scan.chosen_k], [scan.sse[chosen]], color='#d7301f', s=80, zorder=3,
                   label=f'elbow at k={scan.chosen_k}')
        ax.set_xlabel('Number of clusters (k)')
        ax.set_ylabel('SSE')
        ax.set_xticks(scan.k_values)
        ax.grid(alpha=0.4)
        ax.legend()
        fig.savefig(path, format='svg', metadata={'Date': None})
