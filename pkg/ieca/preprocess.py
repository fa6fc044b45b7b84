import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .dataset_io import AttributeSchema, DataMatrix
from .exceptions import (DecodeError, InvalidParameterError, NonFiniteValueError,
                         StructuralError, UnrecoverableColumnError, UnsupportedInputError)
from .mappings import AttributeKind

logger = logging.getLogger(__name__)

IMPUTED = 'imputed'
CLAMPED = 'clamped'
DROPPED = 'dropped'


@dataclass(frozen=True)
class CleaningPolicy:
    missing_numeric: str = 'median'
    missing_categorical: str = 'mode'
    winsor_factor: float = 1.5
    row_drop_threshold: float = 0.5

    def __post_init__(self):
        if self.missing_numeric != 'median':
            raise InvalidParameterError(f'Unsupported numeric imputation {self.missing_numeric!r}')
        if self.missing_categorical != 'mode':
            raise InvalidParameterError(
                f'Unsupported categorical imputation {self.missing_categorical!r}')
        if not self.winsor_factor > 0:
            raise InvalidParameterError('winsor_factor must be > 0')
        if not 0 < self.row_drop_threshold <= 1:
            raise InvalidParameterError('row_drop_threshold must be in (0, 1]')


def _plain(v):
    """numpy scalars and NaN to something json can write"""
    if v is None:
        return None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if np.isnan(v) else float(v)
    return v


@dataclass(frozen=True)
class CleaningEntry:
    row: int
    col: Optional[str]
    action: str
    before: object
    after: object

    def to_dict(self) -> Dict:
        return {'row': int(self.row), 'col': self.col, 'action': self.action,
                'before': _plain(self.before), 'after': _plain(self.after)}


@dataclass
class CleaningLog:
    """
    Every cleaning action, plus the fill values and fences that produced
    them so the same cleaning can be replayed on the raw rows later
    """
    entries: List[CleaningEntry] = field(default_factory=list)
    fills: Dict[str, object] = field(default_factory=dict)
    fences: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[CleaningEntry]:
        return iter(self.entries)

    def add(self, row, col, action, before, after):
        self.entries.append(CleaningEntry(int(row), col, action, before, after))

    def count(self, action: str) -> int:
        return sum(1 for e in self.entries if e.action == action)

    def to_jsonl(self) -> str:
        return ''.join(json.dumps(e.to_dict(), sort_keys=True) + '\n' for e in self.entries)

    def write(self, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.to_jsonl())

    def replay(self, frame: pd.DataFrame) -> pd.DataFrame:
        """Impute with the stored fills, then clamp to the stored fences"""
        frame = frame.copy()
        for name, fill in self.fills.items():
            if name in frame.columns:
                frame[name] = frame[name].where(frame[name].notna(), fill)
        for name, (low, high) in self.fences.items():
            if name in frame.columns:
                col = pd.to_numeric(frame[name], errors='coerce').astype('float64')
                frame[name] = col.clip(lower=low, upper=high)
        return frame

    def recipe(self) -> Dict:
        return {'fills': {k: _plain(v) for k, v in self.fills.items()},
                'fences': {k: [float(lo), float(hi)] for k, (lo, hi) in self.fences.items()}}

    @classmethod
    def from_recipe(cls, d: Optional[Dict]) -> 'CleaningLog':
        d = d or {}
        return cls(fills=dict(d.get('fills', {})),
                   fences={k: (float(v[0]), float(v[1])) for k, v in d.get('fences', {}).items()})


def tukey_fences(values: np.ndarray, factor: float) -> Tuple[float, float]:
    """
    Outlier fences Q1 - f*IQR and Q3 + f*IQR. The quartiles are taken as
    order statistics (lower for Q1, higher for Q3) so that clamping to the
    fences leaves them unchanged.

    Parameters
    ----------
    values : np.ndarray
    factor : float

    Returns
    -------
    (float, float)
    """
    q1 = float(np.percentile(values, 25, method='lower'))
    q3 = float(np.percentile(values, 75, method='higher'))
    iqr = q3 - q1
    return q1 - factor * iqr, q3 + factor * iqr


def _mode(col: pd.Series):
    # first occurrence wins a tie
    codes, uniques = pd.factorize(col.dropna(), sort=False)
    return uniques[int(np.argmax(np.bincount(codes)))]


def _check_columns(frame: pd.DataFrame):
    for name in frame.columns:
        if len(frame) and frame[name].isna().all():
            raise UnrecoverableColumnError(f'Column {name!r} is entirely Missing')


def clean(m: DataMatrix, policy: Optional[CleaningPolicy] = None) -> Tuple[DataMatrix, CleaningLog]:
    """
    Drop mostly-missing rows, impute the remaining Missing cells and clamp
    numeric outliers to the Tukey fences of their column

    Parameters
    ----------
    m : DataMatrix
    policy : CleaningPolicy

    Returns
    -------
    (DataMatrix, CleaningLog)
    """
    policy = policy or CleaningPolicy()
    if m.n_rows == 0:
        raise StructuralError('Cannot clean a matrix without rows')
    log = CleaningLog()
    frame = m.frame.copy()
    _check_columns(frame)

    missing_fraction = frame.isna().sum(axis=1) / m.n_cols
    drop = missing_fraction > policy.row_drop_threshold
    for row in frame.index[drop]:
        log.add(row, None, DROPPED, missing_fraction[row], None)
    if drop.any():
        frame = frame.loc[~drop]
        logger.warning(f'Dropped {int(drop.sum())} rows with more than '
                       f'{policy.row_drop_threshold:.0%} Missing cells')
        if len(frame) == 0:
            raise StructuralError('Every row was dropped by the cleaning policy')
        _check_columns(frame)

    for name, kind in m.schema.columns:
        col = frame[name]
        holes = col.isna()
        if holes.any():
            fill = float(col.median()) if kind.is_numeric else _mode(col)
            log.fills[name] = fill
            for row in col.index[holes]:
                log.add(row, name, IMPUTED, None, fill)
            frame[name] = col.where(~holes, fill)
            logger.debug(f'Imputed {int(holes.sum())} cells of {name!r} with {fill!r}')

    for name in m.schema.numeric_columns:
        col = frame[name].astype('float64')
        low, high = tukey_fences(col.to_numpy(), policy.winsor_factor)
        log.fences[name] = (low, high)
        clipped = col.clip(lower=low, upper=high)
        changed = clipped != col
        for row in col.index[changed]:
            log.add(row, name, CLAMPED, col[row], clipped[row])
        frame[name] = clipped

    if len(log):
        logger.info(f'Cleaning: {log.count(IMPUTED)} imputed, {log.count(CLAMPED)} clamped, '
                    f'{log.count(DROPPED)} rows dropped')
    return m.with_frame(frame), log


@dataclass
class EncodingMap:
    """Per categorical column, the tokens in code order (code = position + 1)"""
    schema: AttributeSchema
    categories: Dict[str, List[str]] = field(default_factory=dict)

    def __len__(self):
        return len(self.categories)

    def code_of(self, column: str, token) -> int:
        try:
            return self.categories[column].index(token) + 1
        except ValueError:
            raise DecodeError(f'Unknown category {token!r} in column {column!r}')

    def token_of(self, column: str, code) -> str:
        tokens = self.categories[column]
        if pd.isna(code) or float(code) != int(code) or not 1 <= int(code) <= len(tokens):
            raise DecodeError(f'Unknown code {code!r} in column {column!r}')
        return tokens[int(code) - 1]

    def to_dict(self) -> Dict:
        return {'schema': self.schema.to_dict(),
                'categories': {k: list(v) for k, v in self.categories.items()}}

    @classmethod
    def from_dict(cls, d: Dict) -> 'EncodingMap':
        return cls(schema=AttributeSchema.from_dict(d['schema']),
                   categories={k: list(v) for k, v in d['categories'].items()})


def encode_categorical(m: DataMatrix) -> Tuple[pd.DataFrame, EncodingMap]:
    """Replace categorical tokens by integer codes 1..n in lexicographic token order"""
    numeric = pd.DataFrame(index=m.frame.index)
    emap = EncodingMap(schema=m.schema)
    for name, kind in m.schema.columns:
        col = m.frame[name]
        if kind.is_numeric:
            numeric[name] = col.astype('float64')
            continue
        codes, uniques = pd.factorize(col, sort=True)
        if (codes < 0).any():
            raise StructuralError(f'Column {name!r} still has Missing cells, clean it first')
        numeric[name] = (codes + 1).astype('float64')
        emap.categories[name] = [str(u) for u in uniques]
    return numeric, emap


def decode_categorical(numeric: pd.DataFrame, emap: EncodingMap) -> DataMatrix:
    frame = pd.DataFrame(index=numeric.index)
    for name, kind in emap.schema.columns:
        if kind.is_numeric:
            frame[name] = numeric[name].astype('float64')
        else:
            frame[name] = pd.Series(
                [emap.token_of(name, v) for v in numeric[name]],
                index=numeric.index, dtype=object)
    return DataMatrix(schema=emap.schema, frame=frame)


@dataclass
class NormalizationParams:
    mins: np.ndarray
    maxs: np.ndarray
    columns: Optional[List[str]] = None

    @property
    def n_cols(self) -> int:
        return len(self.mins)

    def to_dict(self) -> Dict:
        return {'columns': self.columns, 'min': [float(v) for v in self.mins],
                'max': [float(v) for v in self.maxs], 'range': [0.0, 1.0]}

    @classmethod
    def from_dict(cls, d: Dict) -> 'NormalizationParams':
        return cls(mins=np.asarray(d['min'], dtype=float),
                   maxs=np.asarray(d['max'], dtype=float),
                   columns=d.get('columns'))


def normalize(matrix: Union[np.ndarray, pd.DataFrame]) -> Tuple[np.ndarray, NormalizationParams]:
    """
    Min-max scale every column to [0, 1], constant columns go to 0.5

    Parameters
    ----------
    matrix : np.ndarray | pd.DataFrame

    Returns
    -------
    (np.ndarray, NormalizationParams)
    """
    columns = list(matrix.columns) if isinstance(matrix, pd.DataFrame) else None
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise StructuralError(f'Expected a 2-d matrix, got shape {x.shape}')
    if not np.isfinite(x).all():
        rows, cols = np.nonzero(~np.isfinite(x))
        raise NonFiniteValueError(f'Non-finite value at row {rows[0]}, column {cols[0]}')
    if x.shape[0] == 0:
        zeros = np.zeros(x.shape[1])
        return x.copy(), NormalizationParams(zeros, zeros.copy(), columns)
    mins = x.min(axis=0)
    maxs = x.max(axis=0)
    span = maxs - mins
    constant = span == 0
    scaled = (x - mins) / np.where(constant, 1.0, span)
    scaled[:, constant] = 0.5
    return scaled, NormalizationParams(mins, maxs, columns)


def denormalize(matrix: Union[np.ndarray, pd.DataFrame], params: NormalizationParams) -> np.ndarray:
    x = np.asarray(matrix, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != params.n_cols:
        raise StructuralError(
            f'Matrix has {x.shape[1]} columns, normalization params have {params.n_cols}')
    return x * (params.maxs - params.mins) + params.mins


@dataclass
class PercentileTable:
    P: np.ndarray
    P_row: np.ndarray


def percentile_ranks(matrix: np.ndarray) -> PercentileTable:
    """Mid-rank percentile of every cell within its column, and the row averages"""
    x = np.asarray(matrix, dtype=float)
    if x.shape[0] == 0:
        raise StructuralError('percentile_ranks needs at least one row')
    ranks = rankdata(x, method='average', axis=0)
    P = 100.0 * (ranks - 0.5) / x.shape[0]
    return PercentileTable(P=P, P_row=P.mean(axis=1))


@dataclass
class PreparedData:
    """Normalized matrix the engine works on, with everything needed to map back"""
    data: np.ndarray
    row_index: np.ndarray
    schema: AttributeSchema
    encoding: EncodingMap
    params: NormalizationParams
    log: CleaningLog = field(default_factory=CleaningLog)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def restore_centroids(self, centroids: np.ndarray) -> pd.DataFrame:
        """De-normalize centroids and map categorical dimensions back to tokens"""
        values = denormalize(np.asarray(centroids, dtype=float).reshape(-1, self.params.n_cols),
                             self.params)
        out = pd.DataFrame(values, columns=self.schema.names)
        for name in self.schema.categorical_columns:
            n = len(self.encoding.categories[name])
            codes = np.clip(np.rint(out[name].to_numpy()), 1, n).astype(int)
            out[name] = pd.Series([self.encoding.token_of(name, c) for c in codes], dtype=object)
        return out

    def transform(self, frame: pd.DataFrame) -> np.ndarray:
        """Encode and scale new rows with the stored map and params"""
        numeric = pd.DataFrame(index=frame.index)
        for name, kind in self.schema.columns:
            if name not in frame.columns:
                raise StructuralError(f'Column {name!r} missing')
            if kind.is_numeric:
                numeric[name] = pd.to_numeric(frame[name], errors='coerce').astype('float64')
            else:
                numeric[name] = [float(self.encoding.code_of(name, str(t))) for t in frame[name]]
        x = numeric.to_numpy(dtype=float)
        if not np.isfinite(x).all():
            raise NonFiniteValueError('Rows to transform contain Missing or non-finite cells')
        span = self.params.maxs - self.params.mins
        constant = span == 0
        scaled = (x - self.params.mins) / np.where(constant, 1.0, span)
        scaled[:, constant] = 0.5
        return scaled

    def transform_raw(self, frame: pd.DataFrame) -> np.ndarray:
        """Replay the cleaning on raw rows, then encode and scale them"""
        return self.transform(self.log.replay(frame))

    def sidecar(self) -> Dict:
        return {'encoding': self.encoding.to_dict(),
                'normalization': self.params.to_dict(),
                'cleaning': self.log.recipe()}

    @classmethod
    def from_sidecar(cls, d: Dict) -> 'PreparedData':
        encoding = EncodingMap.from_dict(d['encoding'])
        params = NormalizationParams.from_dict(d['normalization'])
        return cls(data=np.zeros((0, params.n_cols)), row_index=np.zeros(0, dtype=int),
                   schema=encoding.schema, encoding=encoding, params=params,
                   log=CleaningLog.from_recipe(d.get('cleaning')))

    @classmethod
    def load_sidecar(cls, path) -> 'PreparedData':
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_sidecar(json.load(f))


def prepare(m: DataMatrix, policy: Optional[CleaningPolicy] = None) -> PreparedData:
    """clean -> encode -> normalize"""
    cleaned, log = clean(m, policy)
    numeric, emap = encode_categorical(cleaned)
    data, params = normalize(numeric)
    return PreparedData(data=data, row_index=cleaned.frame.index.to_numpy(),
                        schema=m.schema, encoding=emap, params=params, log=log)


def prepare_numeric(m: DataMatrix) -> PreparedData:
    """Numeric-only chain: no cleaning, no encoding"""
    if m.schema.categorical_columns:
        raise UnsupportedInputError(
            f'Categorical columns {m.schema.categorical_columns} are not supported '
            'by ECA*, use iECA* mode')
    if m.has_missing:
        raise UnsupportedInputError('Missing cells are not supported by ECA*, use iECA* mode')
    if m.n_rows == 0:
        raise StructuralError('Cannot cluster a matrix without rows')
    numeric = m.frame.astype('float64')
    data, params = normalize(numeric)
    return PreparedData(data=data, row_index=m.frame.index.to_numpy(), schema=m.schema,
                        encoding=EncodingMap(schema=m.schema), params=params)
