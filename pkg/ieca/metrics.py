import json
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, pdist
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix, pair_confusion_matrix

from .elbow import as_points, compute_sse
from .exceptions import DegeneratePartitionError, DomainError, StructuralError
from .mappings import Metric

logger = logging.getLogger(__name__)


def intra_cluster(members) -> float:
    """
    Average distance over all ordered pairs of distinct members, 0 for a
    singleton

    Parameters
    ----------
    members : array-like, n x D

    Returns
    -------
    float
    """
    members = as_points(members)
    if members.shape[0] == 0:
        raise DomainError('intra_cluster of an empty cluster')
    if members.shape[0] == 1:
        return 0.0
    # mean over unordered pairs equals the mean over ordered pairs
    return float(pdist(members).mean())


def inter_cluster(a, b) -> float:
    """Distances of each member to the mean of the other cluster, averaged over |A|+|B|"""
    a = as_points(a)
    b = as_points(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DomainError('inter_cluster of an empty cluster')
    to_b = np.linalg.norm(a - b.mean(axis=0), axis=1).sum()
    to_a = np.linalg.norm(b - a.mean(axis=0), axis=1).sum()
    return float((to_b + to_a) / (a.shape[0] + b.shape[0]))


def _pair(pred, truth) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise StructuralError(f'{len(pred)} predicted labels against {len(truth)} true labels')
    return pred, truth


@dataclass(frozen=True)
class PairCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def pair_counts(pred, truth) -> PairCounts:
    pred, truth = _pair(pred, truth)
    # ordered pairs, every unordered pair counted twice
    c = pair_confusion_matrix(truth, pred) // 2
    return PairCounts(tp=int(c[1, 1]), tn=int(c[0, 0]), fp=int(c[0, 1]), fn=int(c[1, 0]))


def pair_accuracy(pred, truth) -> Tuple[float, PairCounts]:
    """
    Share of row pairs on which both partitions agree (together in both or
    apart in both)

    Parameters
    ----------
    pred : array-like
    truth : array-like

    Returns
    -------
    (float, PairCounts)
    """
    pred, truth = _pair(pred, truth)
    if len(pred) < 2:
        raise DomainError('pair_accuracy needs at least 2 rows')
    counts = pair_counts(pred, truth)
    return (counts.tp + counts.tn) / counts.total, counts


@dataclass
class ContingencyTable:
    n_ij: np.ndarray
    a: np.ndarray
    b: np.ndarray
    n: int


def contingency(pred, truth) -> ContingencyTable:
    pred, truth = _pair(pred, truth)
    table = contingency_matrix(pred, truth)
    return ContingencyTable(n_ij=table, a=table.sum(axis=1), b=table.sum(axis=0),
                            n=int(table.sum()))


def nmi(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    if len(pred) == 0:
        raise DomainError('nmi needs at least 1 row')
    value = normalized_mutual_info_score(truth, pred, average_method='arithmetic')
    return float(np.clip(value, 0.0, 1.0))


def ari(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    if len(pred) < 2:
        raise DomainError('ari needs at least 2 rows')
    return float(adjusted_rand_score(truth, pred))


def nmse(data, labels, centroids) -> float:
    data = as_points(data)
    if data.size == 0:
        raise DomainError('nmse of an empty matrix')
    return compute_sse(data, labels, centroids) / (data.shape[0] * data.shape[1])


def dbi(data, labels, centroids) -> float:
    """
    Davies-Bouldin index with the given centroids

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
    k = centroids.shape[0]
    if k < 2:
        raise DomainError(f'dbi needs at least 2 clusters, got {k}')
    sizes = np.bincount(labels, minlength=k)
    if len(sizes) > k or (sizes == 0).any():
        raise DomainError('dbi needs every cluster to be non-empty')
    spread = np.array([
        np.linalg.norm(data[labels == i] - centroids[i], axis=1).mean() for i in range(k)
    ])
    separation = cdist(centroids, centroids)
    off_diagonal = ~np.eye(k, dtype=bool)
    if (separation[off_diagonal] == 0).any():
        raise DegeneratePartitionError('Two clusters share the same centroid')
    ratio = (spread[:, None] + spread[None, :]) / np.where(off_diagonal, separation, 1.0)
    ratio[~off_diagonal] = -np.inf
    return float(ratio.max(axis=1).mean())


def encode_labels(labels) -> np.ndarray:
    """Arbitrary label tokens to 0..K-1 in first-occurrence order"""
    codes, _ = pd.factorize(np.asarray(labels), sort=False)
    return codes


def member_centroids(data, labels) -> np.ndarray:
    data = as_points(data)
    labels = np.asarray(labels, dtype=int)
    k = int(labels.max()) + 1 if len(labels) else 0
    return np.vstack([data[labels == i].mean(axis=0) for i in range(k)]) if k else np.zeros((0, data.shape[1]))


@dataclass
class ValidationReport:
    accuracy: float
    nmi: float
    ari: float
    nmse: float
    dbi: float
    n: int
    d: int
    k_pred: int
    k_true: int

    def metric(self, metric: Metric) -> float:
        return getattr(self, metric.value)

    def metrics(self) -> Dict[str, float]:
        return {m.value: self.metric(m) for m in Metric}

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict) -> 'ValidationReport':
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def validate(data, pred, truth, centroids: Optional[np.ndarray] = None) -> ValidationReport:
    """
    All five validation measures for one predicted partition

    Parameters
    ----------
    data : array-like, N x D
        the matrix the partition was computed on
    pred : array-like
        predicted labels; integer indices into `centroids` when those are given
    truth : array-like
    centroids : array-like, K x D, optional
        member means of `pred` when omitted

    Returns
    -------
    ValidationReport
    """
    data = as_points(data)
    pred, truth = _pair(pred, truth)
    if centroids is None:
        codes = encode_labels(pred)
        centroids = member_centroids(data, codes)
    else:
        codes = np.asarray(pred, dtype=int)
        centroids = as_points(centroids)
    accuracy, _ = pair_accuracy(pred, truth)
    report = ValidationReport(
        accuracy=accuracy,
        nmi=nmi(pred, truth),
        ari=ari(pred, truth),
        nmse=nmse(data, codes, centroids),
        dbi=dbi(data, codes, centroids),
        n=int(data.shape[0]),
        d=int(data.shape[1]),
        k_pred=int(len(np.unique(codes))),
        k_true=int(len(pd.unique(truth))),
    )
    logger.debug(f'Validation: {report.to_json()}')
    return report
