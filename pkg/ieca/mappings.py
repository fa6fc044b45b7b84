import enum
from typing import Union


def lookup_metric(s: Union['Metric', str]) -> 'Metric':
    if isinstance(s, Metric):
        return s
    if isinstance(s, str):
        if Metric.has_code(s.upper()):
            return Metric[s.upper()]

        # allow the printed labels too, e.g. "nMSE"
        for metric in Metric:
            if metric.value == s.lower() or metric.label == s:
                return metric

    raise ValueError(f'Invalid metric: {s}')


def lookup_mode(s: Union['Mode', str]) -> 'Mode':
    if isinstance(s, Mode):
        return s
    if isinstance(s, str):
        for mode in Mode:
            if mode.value == s.lower() or mode.label == s:
                return mode

    raise ValueError(f'Invalid mode: {s}')


class AttributeKind(enum.Enum):
    REAL = 'Real'
    INTEGER = 'Integer'
    CATEGORICAL = 'Categorical'

    def __str__(self):
        return self.value

    @property
    def is_numeric(self) -> bool:
        return self is not AttributeKind.CATEGORICAL


class Mode(enum.Enum):
    """
    ENUM containing 2 things about an engine mode: CODE, printed label
    """
    def __new__(cls, *args, **kwds):
        obj = object.__new__(cls)
        obj._value_ = args[0]
        return obj

    def __init__(self, _: str, label: str):
        self._label = label

    def __str__(self):
        return self.value

    @property
    def label(self):
        return self._label

    IECA = 'ieca', 'iECA*'
    ECA = 'eca', 'ECA*'


class Metric(enum.Enum):
    """
    ENUM containing 3 things about a validation measure: CODE, printed label,
    orientation
    """
    def __new__(cls, *args, **kwds):
        obj = object.__new__(cls)
        obj._value_ = args[0]
        return obj

    def __init__(self, _: str, label: str, higher_is_better: bool):
        self._label = label
        self._higher_is_better = higher_is_better

    def __str__(self):
        return self.value

    @property
    def label(self):
        return self._label

    @property
    def higher_is_better(self):
        return self._higher_is_better

    @classmethod
    def has_code(cls, code: str) -> bool:
        return code in cls.__members__

    ACCURACY =  'accuracy', 'Accuracy', True
    NMI =       'nmi',      'NMI',      True
    ARI =       'ari',      'ARI',      True
    NMSE =      'nmse',     'nMSE',     False
    DBI =       'dbi',      'DBI',      False


class ColorBand(enum.Enum):
    """
    ENUM containing 4 things about a performance band: CODE, lower edge,
    upper edge, fill colour
    """
    def __new__(cls, *args, **kwds):
        obj = object.__new__(cls)
        obj._value_ = args[0]
        return obj

    def __init__(self, _: str, low: str, high: str, colour: str):
        self._low = low
        self._high = high
        self._colour = colour

    def __str__(self):
        return self.value

    @property
    def low(self):
        return self._low

    @property
    def high(self):
        return self._high

    @property
    def colour(self):
        return self._colour

    # edges are kept as strings, they are compared as Decimals
    GREEN =     'Green',    '1.000', '3.332', '#2e9e44'
    YELLOW =    'Yellow',   '3.333', '5.665', '#f2c12e'
    RED =       'Red',      '5.666', '8.000', '#d7301f'


DEFAULT_MISSING_TOKENS = frozenset({'', '?', 'NA', 'NaN', 'na'})
