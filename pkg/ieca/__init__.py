from .ieca import EcaStar, EngineConfig, IEcaStar, RunResult, run, run_baseline_eca, __version__
from .dataset_io import AttributeSchema, DataMatrix, GroundTruth, load_csv, summarize
from .mappings import AttributeKind, ColorBand, Metric, Mode
