import logging
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .dataset_io import DataMatrix, GroundTruth
from .decorators import measured
from .exceptions import DomainError, InvalidParameterError, StructuralError
from .ieca import EngineConfig, run
from .mappings import ColorBand, Metric, lookup_metric
from .metrics import ValidationReport, validate
from .misc import run_seed
from .preprocess import PreparedData

logger = logging.getLogger(__name__)

TIE_RULE = 'competition'

Winner = namedtuple('Winner', ['name', 'tie'])


@dataclass
class BenchmarkRecord:
    algorithm: str
    dataset: str
    run_index: Optional[int]
    wall_time_ms: Optional[float]
    peak_live_bytes: Optional[float]
    report: Optional[ValidationReport] = None
    error: Optional[str] = None
    labels: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict:
        d = {
            'run': self.run_index,
            'time_ms': self.wall_time_ms,
            'peak_bytes': self.peak_live_bytes,
            'metrics': self.report.to_dict() if self.report is not None else None,
        }
        if self.error is not None:
            d['error'] = self.error
        return d

    @classmethod
    def from_dict(cls, d: Dict, algorithm: str, dataset: str) -> 'BenchmarkRecord':
        metrics = d.get('metrics')
        return cls(
            algorithm=algorithm,
            dataset=dataset,
            run_index=d.get('run'),
            wall_time_ms=d.get('time_ms'),
            peak_live_bytes=d.get('peak_bytes'),
            report=ValidationReport.from_dict(metrics) if metrics is not None else None,
            error=d.get('error'),
        )


@measured
def _timed_run(data, cfg):
    return run(data, cfg)


def _trial(data: DataMatrix, cfg: EngineConfig, run_index: int, truth: Optional[GroundTruth],
           algorithm: str, dataset: str) -> BenchmarkRecord:
    seed = run_seed(cfg.seed, run_index)
    try:
        measurement = _timed_run(data, cfg.replace(seed=seed))
    except Exception as e:
        logger.warning(f'{algorithm} run {run_index} on {dataset} failed: {e}')
        return BenchmarkRecord(algorithm, dataset, run_index, None, None,
                               error=f'{type(e).__name__}: {e}')
    result = measurement.result
    record = BenchmarkRecord(algorithm, dataset, run_index, measurement.wall_time_ms,
                             measurement.peak_live_bytes, labels=result.labels)
    if truth is not None:
        try:
            record.report = validate(result.prepared.data, result.labels,
                                     truth.aligned(result.row_index),
                                     result.normalized_centroids)
        except Exception as e:
            logger.warning(f'{algorithm} run {run_index} on {dataset} could not be scored: {e}')
            record.error = f'{type(e).__name__}: {e}'
    return record


def run_trials(data: DataMatrix, cfg: EngineConfig, runs: Optional[int] = None,
               truth: Optional[GroundTruth] = None, algorithm: Optional[str] = None,
               dataset: str = 'dataset', jobs: int = 1) -> List[BenchmarkRecord]:
    """
    Repeat the clustering with the seeds seed ^ r, r = 0..runs-1, timing and
    measuring every run

    Parameters
    ----------
    data : DataMatrix
    cfg : EngineConfig
    runs : int
        defaults to cfg.runs
    truth : GroundTruth, optional
        runs are validated against it when given
    algorithm : str
        defaults to the printed label of the mode
    dataset : str
    jobs : int
        worker processes, the records do not depend on it

    Returns
    -------
    [BenchmarkRecord]
        one record per run; the mean record of the batch is
        `mean_record(records)`, emit_report writes both
    """
    runs = cfg.runs if runs is None else runs
    if runs < 1:
        raise InvalidParameterError('runs must be at least 1')
    algorithm = algorithm or cfg.mode.label
    args = [(data, cfg, r, truth, algorithm, dataset) for r in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_trial, *zip(*args)))
    else:
        records = [_trial(*a) for a in args]
    failed = sum(1 for r in records if not r.ok)
    logger.info(f'{algorithm} on {dataset}: {runs} runs, {failed} failed')
    return records


def mean_record(records: Sequence[BenchmarkRecord]) -> Optional[BenchmarkRecord]:
    """Mean over the successful runs; None when no run succeeded"""
    done = [r for r in records if r.ok and r.report is not None]
    if not done:
        return None
    reports = pd.DataFrame([r.report.to_dict() for r in done]).mean()
    times = [r.wall_time_ms for r in done if r.wall_time_ms is not None]
    peaks = [r.peak_live_bytes for r in done if r.peak_live_bytes is not None]
    report = ValidationReport(
        **{m.value: float(reports[m.value]) for m in Metric},
        **{c: int(round(reports[c])) for c in ('n', 'd', 'k_pred', 'k_true')},
    )
    return BenchmarkRecord(
        algorithm=done[0].algorithm,
        dataset=done[0].dataset,
        run_index=None,
        wall_time_ms=float(np.mean(times)) if times else None,
        peak_live_bytes=float(np.mean(peaks)) if peaks else None,
        report=report,
    )


def score_labels(prepared: PreparedData, labels: pd.Series, truth: GroundTruth,
                 algorithm: str, dataset: str = 'dataset') -> BenchmarkRecord:
    """Score the labels file of an external algorithm, time and memory are unknown"""
    missing = set(prepared.row_index) - set(labels.index)
    if missing:
        raise StructuralError(f'{algorithm} labels missing for {len(missing)} rows')
    pred = labels.loc[prepared.row_index].to_numpy()
    try:
        report = validate(prepared.data, pred, truth.aligned(prepared.row_index))
    except (DomainError, StructuralError) as e:
        return BenchmarkRecord(algorithm, dataset, 0, None, None, error=f'{type(e).__name__}: {e}')
    return BenchmarkRecord(algorithm, dataset, 0, None, None, report=report)


@dataclass
class RankTable:
    """
    ranks: metric rows x algorithm columns, 1 is best, NA where a score was
    missing; averages: mean rank per algorithm over its ranked metrics
    """
    ranks: pd.DataFrame
    averages: pd.Series
    gaps: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def algorithms(self) -> List[str]:
        return list(self.ranks.columns)

    @classmethod
    def from_ranks(cls, ranks: pd.DataFrame) -> 'RankTable':
        """Table of ranks that were assigned elsewhere, eg. a published table"""
        ranks = ranks.astype('Int64')
        gaps = {str(m): [str(a) for a in row.index[row.isna()]] for m, row in ranks.iterrows()}
        gaps = {m: algs for m, algs in gaps.items() if algs}
        averages = ranks.astype('float64').mean(axis=0, skipna=True)
        return cls(ranks=ranks, averages=averages, gaps=gaps)

    def to_frame(self) -> pd.DataFrame:
        frame = self.ranks.astype('float64')
        frame.loc['Average'] = self.averages
        return frame

    def bands(self) -> pd.DataFrame:
        return pd.DataFrame({
            'algorithm': self.averages.index,
            'average': self.averages.to_numpy(),
            'band': ['' if pd.isna(v) else color_band(v).value for v in self.averages],
        })


def rank_algorithms(scores: pd.DataFrame,
                    orientation: Optional[Mapping[str, bool]] = None) -> RankTable:
    """
    Competition ranks (ties share the smaller rank) of every algorithm on
    every metric

    Parameters
    ----------
    scores : pd.DataFrame
        metric rows x algorithm columns, NaN for a missing score
    orientation : dict, optional
        metric -> higher is better; looked up from Metric when omitted

    Returns
    -------
    RankTable
    """
    if scores.shape[1] < 2:
        raise InvalidParameterError('Ranking needs at least 2 algorithms')
    values = scores.astype('float64')
    if np.isinf(values.to_numpy()).any():
        raise InvalidParameterError('Scores must be finite')
    ranks = pd.DataFrame(index=values.index, columns=values.columns, dtype='Int64')
    for name, row in values.iterrows():
        if orientation is not None and name in orientation:
            higher = orientation[name]
        else:
            try:
                higher = lookup_metric(str(name)).higher_is_better
            except ValueError:
                raise InvalidParameterError(f'No orientation known for metric {name!r}')
        ranks.loc[name] = row.rank(method='min', ascending=not higher).astype('Int64')
    table = RankTable.from_ranks(ranks)
    for metric, algorithms in table.gaps.items():
        logger.warning(f'No {metric} score for {", ".join(algorithms)}, left unranked')
    return table


def color_band(average: float) -> ColorBand:
    """Band of an average rank, rounded half up to 3 decimals first"""
    if not 1 <= average <= 8:
        raise DomainError(f'Average rank {average} outside [1, 8]')
    value = Decimal(str(average)).quantize(Decimal('0.001'), rounding=ROUND_HALF_UP)
    for band in ColorBand:
        if value <= Decimal(band.high):
            return band
    return ColorBand.RED


def aggregate_averages(tables: Mapping[str, RankTable]) -> pd.DataFrame:
    """dataset x algorithm grid of average ranks with a final Average row"""
    grid = pd.DataFrame({dataset: table.averages for dataset, table in tables.items()}).T
    grid.loc['Average'] = grid.mean(axis=0)
    return grid


def winner(values: Mapping[str, Optional[float]]) -> Winner:
    """Algorithm with the smallest value, the lexicographically first one on a tie"""
    measured_values = {k: v for k, v in values.items() if v is not None and not pd.isna(v)}
    if not measured_values:
        raise InvalidParameterError('winner needs at least one measured algorithm')
    best = min(measured_values.values())
    names = sorted(k for k, v in measured_values.items() if v == best)
    return Winner(names[0], len(names) > 1)


def resource_table(records: Sequence[BenchmarkRecord]) -> pd.DataFrame:
    """
    Mean time (ms) and peak memory (bytes) per dataset and algorithm, with
    the winner of every row
    """
    done = [r for r in records if r.ok]
    rows = []
    for dataset in dict.fromkeys(r.dataset for r in done):
        for quantity, attr in (('time', 'wall_time_ms'), ('memory', 'peak_live_bytes')):
            row: Dict[str, Union[str, float, None]] = {'dataset': dataset, 'quantity': quantity}
            for algorithm in dict.fromkeys(r.algorithm for r in done):
                values = [getattr(r, attr) for r in done
                          if r.dataset == dataset and r.algorithm == algorithm
                          and getattr(r, attr) is not None]
                row[algorithm] = float(np.mean(values)) if values else None
            scores = {k: v for k, v in row.items() if k not in ('dataset', 'quantity')}
            if any(v is not None for v in scores.values()):
                row['Winner'] = winner(scores).name
            else:
                row['Winner'] = None
            rows.append(row)
    return pd.DataFrame(rows)


def score_frame(records: Sequence[BenchmarkRecord]) -> pd.DataFrame:
    """metric x algorithm grid of mean scores, input of rank_algorithms"""
    grid = {}
    for algorithm in dict.fromkeys(r.algorithm for r in records):
        mean = mean_record([r for r in records if r.algorithm == algorithm])
        grid[algorithm] = ({m.value: mean.report.metric(m) for m in Metric}
                           if mean is not None else {m.value: np.nan for m in Metric})
    return pd.DataFrame(grid, index=[m.value for m in Metric])
