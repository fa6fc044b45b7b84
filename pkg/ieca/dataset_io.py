import csv
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import StructuralError
from .mappings import DEFAULT_MISSING_TOKENS, AttributeKind

logger = logging.getLogger(__name__)

INTEGER_LITERAL = re.compile(r'^[+-]?\d+$')


@dataclass(frozen=True)
class AttributeSchema:
    columns: Tuple[Tuple[str, AttributeKind], ...]
    missing_tokens: FrozenSet[str] = DEFAULT_MISSING_TOKENS

    def __post_init__(self):
        if len(self.columns) == 0:
            raise StructuralError('A schema needs at least one column')
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            duplicated = sorted({n for n in names if names.count(n) > 1})
            raise StructuralError(f'Duplicated column names: {duplicated}')

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.columns]

    @property
    def kinds(self) -> Dict[str, AttributeKind]:
        return dict(self.columns)

    @property
    def numeric_columns(self) -> List[str]:
        return [name for name, kind in self.columns if kind.is_numeric]

    @property
    def categorical_columns(self) -> List[str]:
        return [name for name, kind in self.columns if not kind.is_numeric]

    def count(self, kind: AttributeKind) -> int:
        return sum(1 for _, k in self.columns if k is kind)

    def drop(self, column: str) -> 'AttributeSchema':
        if column not in self.names:
            raise StructuralError(f'Unknown column {column!r}')
        return AttributeSchema(
            columns=tuple(c for c in self.columns if c[0] != column),
            missing_tokens=self.missing_tokens,
        )

    def to_dict(self) -> Dict:
        return {
            'columns': [[name, kind.value] for name, kind in self.columns],
            'missing_tokens': sorted(self.missing_tokens),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'AttributeSchema':
        return cls(
            columns=tuple((name, AttributeKind(kind)) for name, kind in d['columns']),
            missing_tokens=frozenset(d.get('missing_tokens', DEFAULT_MISSING_TOKENS)),
        )


@dataclass
class DataMatrix:
    """
    N x D table of mixed attributes. Numeric columns are float64, categorical
    columns hold the original tokens, Missing cells are NaN. The frame index
    holds the row numbers of the source file.
    """
    schema: AttributeSchema
    frame: pd.DataFrame

    def __post_init__(self):
        if list(self.frame.columns) != self.schema.names:
            raise StructuralError(
                f'Frame columns {list(self.frame.columns)} do not match '
                f'schema {self.schema.names}'
            )

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def n_cols(self) -> int:
        return len(self.schema.columns)

    @property
    def has_missing(self) -> bool:
        return bool(self.frame.isna().to_numpy().any())

    def with_frame(self, frame: pd.DataFrame) -> 'DataMatrix':
        return DataMatrix(schema=self.schema, frame=frame)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame,
                   missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS) -> 'DataMatrix':
        """
        Build a matrix from an in-memory DataFrame. Numeric dtypes keep their
        values, any other column goes through the same inference as a file.
        """
        tokens = frozenset(missing_tokens)
        cells = pd.DataFrame(index=frame.index)
        for name in frame.columns:
            col = frame[name]
            if pd.api.types.is_numeric_dtype(col) and not pd.api.types.is_bool_dtype(col):
                cells[str(name)] = [_format_number(v) for v in col]
            else:
                cells[str(name)] = ['' if pd.isna(v) else str(v) for v in col]
        return _from_cells(cells, tokens | {''})

    def to_csv(self, path, delimiter: str = ',', missing_token: str = '',
               header: bool = True):
        """Serialize back to delimited text, Missing cells written as missing_token"""
        out = pd.DataFrame(index=self.frame.index)
        for name, kind in self.schema.columns:
            col = self.frame[name]
            if kind is AttributeKind.INTEGER:
                out[name] = [missing_token if pd.isna(v) else str(int(v)) for v in col]
            elif kind is AttributeKind.REAL:
                out[name] = [missing_token if pd.isna(v) else repr(float(v)) for v in col]
            else:
                out[name] = [missing_token if pd.isna(v) else v for v in col]
        out.to_csv(path, sep=delimiter, header=header, index=False,
                   lineterminator='\n')


@dataclass
class GroundTruth:
    labels: pd.Series

    @property
    def n_classes(self) -> int:
        return int(self.labels.nunique())

    def __len__(self):
        return len(self.labels)

    def aligned(self, row_index: Iterable[int]) -> np.ndarray:
        """Labels of the given source rows, in that order"""
        try:
            return self.labels.loc[list(row_index)].to_numpy()
        except KeyError as e:
            raise StructuralError(f'Truth labels missing for rows {e}')


@dataclass
class DatasetSummary:
    instances: int
    attributes: int
    real: int
    integer: int
    categorical: int
    missing: bool
    classes: Optional[int] = None
    kinds: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        d = {
            'instances': self.instances,
            'attributes': self.attributes,
            'real': self.real,
            'integer': self.integer,
            'categorical': self.categorical,
            'missing': self.missing,
            # eg. "Integer, Real"
            'attribute_kinds': ', '.join(self.kinds),
        }
        if self.classes is not None:
            d['classes'] = self.classes
        return d


def _format_number(v) -> str:
    if pd.isna(v):
        return ''
    v = float(v)
    if v.is_integer():
        return str(int(v))
    return repr(v)


def _is_missing(cell: str, tokens: FrozenSet[str]) -> bool:
    return cell in tokens or cell.strip() in tokens


def _column_kind(cells: Iterable[str], tokens: FrozenSet[str]) -> AttributeKind:
    present = [c.strip() for c in cells if not _is_missing(c, tokens)]
    if all(INTEGER_LITERAL.match(c) for c in present):
        # also covers a column without any value
        return AttributeKind.INTEGER
    numbers = pd.to_numeric(pd.Series(present, dtype=object), errors='coerce')
    if numbers.notna().all() and np.isfinite(numbers.to_numpy(dtype=float)).all():
        return AttributeKind.REAL
    return AttributeKind.CATEGORICAL


def infer_schema(cells: pd.DataFrame,
                 missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS) -> AttributeSchema:
    """
    Infer the kind of every column of a frame of raw text cells

    Parameters
    ----------
    cells : pd.DataFrame
        raw text cells, one column per attribute
    missing_tokens : iterable of str

    Returns
    -------
    AttributeSchema
    """
    if len(cells.columns) == 0:
        raise StructuralError('Input has zero columns')
    tokens = frozenset(missing_tokens)
    columns = tuple(
        (str(name), _column_kind(cells[name], tokens)) for name in cells.columns
    )
    return AttributeSchema(columns=columns, missing_tokens=tokens)


def _from_cells(cells: pd.DataFrame, tokens: FrozenSet[str]) -> DataMatrix:
    schema = infer_schema(cells, tokens)
    frame = pd.DataFrame(index=cells.index)
    for name, kind in schema.columns:
        col = cells[name]
        missing = col.map(lambda c: _is_missing(c, tokens)).astype(bool)
        if kind.is_numeric:
            values = pd.to_numeric(col.where(~missing).str.strip(), errors='coerce')
            frame[name] = values.astype('float64')
        else:
            frame[name] = col.where(~missing, np.nan).astype(object)
    return DataMatrix(schema=schema, frame=frame)


def _scan_fields(path, delimiter: str) -> Tuple[int, List[str]]:
    """Checks every record has the same number of fields, returns (width, first record)"""
    width = None
    first = []
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f, delimiter=delimiter)
        for row_number, record in enumerate(reader):
            if len(record) == 0:
                continue
            if width is None:
                width = len(record)
                first = record
            elif len(record) != width:
                raise StructuralError(
                    f'Line {row_number + 1} has {len(record)} fields, expected {width}'
                )
    return width or 0, first


def load_csv(path, delimiter: str = ',', header: bool = True,
             missing_tokens: Optional[Iterable[str]] = None) -> DataMatrix:
    """
    Load a delimited text dataset with mixed attribute kinds

    Parameters
    ----------
    path : str | pathlib.Path
    delimiter : str
    header : bool
        if False, columns are named c0..c(D-1)
    missing_tokens : iterable of str
        cells matching one of these become Missing

    Returns
    -------
    DataMatrix
    """
    tokens = frozenset(DEFAULT_MISSING_TOKENS if missing_tokens is None else missing_tokens)
    width, first = _scan_fields(path, delimiter)
    if width == 0:
        raise StructuralError(f'{path} has zero columns')

    names = first if header else [f'c{i}' for i in range(width)]
    if len(set(names)) != len(names):
        raise StructuralError(f'{path} has duplicated column names')
    cells = pd.read_csv(
        path,
        sep=delimiter,
        header=0 if header else None,
        names=names,
        dtype=str,
        na_filter=False,
        index_col=False,
        encoding='utf-8',
    )
    cells.columns = [str(c) for c in names]
    cells.index = pd.RangeIndex(len(cells))
    matrix = _from_cells(cells, tokens)
    logger.info(f'Loaded {path}: {matrix.n_rows} rows, {matrix.n_cols} columns')
    return matrix


def summarize(m: DataMatrix, truth: Optional[GroundTruth] = None) -> DatasetSummary:
    kinds = [k for k in AttributeKind if m.schema.count(k) > 0]
    return DatasetSummary(
        instances=m.n_rows,
        attributes=m.n_cols,
        real=m.schema.count(AttributeKind.REAL),
        integer=m.schema.count(AttributeKind.INTEGER),
        categorical=m.schema.count(AttributeKind.CATEGORICAL),
        missing=m.has_missing,
        classes=truth.n_classes if truth is not None else None,
        kinds=[k.value for k in kinds],
    )


def split_target(m: DataMatrix, column: str) -> Tuple[DataMatrix, GroundTruth]:
    """
    Remove the class attribute from a matrix and return it as ground truth

    Parameters
    ----------
    m : DataMatrix
    column : str

    Returns
    -------
    (DataMatrix, GroundTruth)
    """
    schema = m.schema.drop(column)
    target = m.frame[column]
    if target.isna().any():
        rows = list(target.index[target.isna()])
        raise StructuralError(f'Target column {column!r} has Missing cells in rows {rows}')
    if m.schema.kinds[column].is_numeric:
        labels = target.map(_format_number)
    else:
        labels = target.astype(str)
    rest = m.frame.drop(columns=[column])
    return DataMatrix(schema=schema, frame=rest), GroundTruth(labels=labels.rename('label'))


def load_labels(path) -> pd.Series:
    """
    Read a labels file. Either `row,label` with a header, or a single column
    of labels without header where the row is the position. Lines starting
    with # are ignored.
    """
    frame = pd.read_csv(path, comment='#', dtype=str, keep_default_na=False)
    if {'row', 'label'}.issubset(frame.columns):
        labels = pd.Series(frame['label'].to_numpy(),
                           index=frame['row'].astype(int).to_numpy(), name='label')
    else:
        frame = pd.read_csv(path, comment='#', dtype=str, keep_default_na=False,
                            header=None)
        if len(frame.columns) != 1:
            raise StructuralError(
                f'{path} is neither a row,label file nor a single column of labels'
            )
        labels = pd.Series(frame[0].to_numpy(), index=pd.RangeIndex(len(frame)),
                           name='label')
    return labels


def load_truth(path) -> GroundTruth:
    return GroundTruth(labels=load_labels(path))


def as_matrix(data: Union[DataMatrix, pd.DataFrame]) -> DataMatrix:
    if isinstance(data, DataMatrix):
        return data
    return DataMatrix.from_frame(data)
