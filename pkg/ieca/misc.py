import hashlib
from typing import Tuple

import numpy as np


def derive_seed(seed: int, index: int) -> int:
    """
    Derive an independent 32 bit seed for a sub task, eg. one k of the elbow scan

    Parameters
    ----------
    seed : int
    index : int

    Returns
    -------
    int
    """
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def run_seed(seed: int, run_index: int) -> int:
    """Seed of run r in a multi run batch: seed xor r"""
    return (int(seed) ^ int(run_index)) & 0xFFFFFFFFFFFFFFFF


def quartiles(values: np.ndarray, axis: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    First and third quartile along an axis, linear interpolation between
    order statistics

    Parameters
    ----------
    values : np.ndarray
    axis : int

    Returns
    -------
    (np.ndarray, np.ndarray)
    """
    q1, q3 = np.percentile(values, [25, 75], axis=axis, method='linear')
    return q1, q3


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            h.update(block)
    return h.hexdigest()
