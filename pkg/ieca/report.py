import json
import logging
import os
from typing import Dict, List, Optional, Sequence

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from .bench import TIE_RULE, BenchmarkRecord, RankTable, color_band, mean_record

logger = logging.getLogger(__name__)

BENCHMARK_FILE = 'benchmark.json'
RANKS_FILE = 'ranks.csv'
BANDS_FILE = 'bands.csv'


def _group(records: Sequence[BenchmarkRecord]) -> Dict:
    groups = {}
    for r in records:
        groups.setdefault((r.dataset, r.algorithm), []).append(r)
    return groups


def benchmark_dict(records: Sequence[BenchmarkRecord], provenance: Optional[Dict] = None) -> Dict:
    results = []
    for (dataset, algorithm), group in _group(records).items():
        mean = mean_record(group)
        results.append({
            'dataset': dataset,
            'algorithm': algorithm,
            'runs': [r.to_dict() for r in group],
            'mean': mean.to_dict() if mean is not None else None,
        })
    d = {'tie_rule': TIE_RULE, 'results': results}
    if provenance is not None:
        d['provenance'] = provenance
    return d


def ranks_frame(table: Optional[RankTable]) -> pd.DataFrame:
    """ranks as integers, gaps empty, final Average row with 2 decimals"""
    if table is None:
        return pd.DataFrame(columns=['metric'])
    rows = []
    for metric, row in table.ranks.iterrows():
        rows.append([metric] + ['' if pd.isna(v) else str(int(v)) for v in row])
    rows.append(['Average'] + [f'{v:.2f}' for v in table.averages])
    return pd.DataFrame(rows, columns=['metric'] + table.algorithms)


def bands_frame(table: Optional[RankTable]) -> pd.DataFrame:
    if table is None:
        return pd.DataFrame(columns=['algorithm', 'average', 'band'])
    bands = table.bands()
    bands['average'] = [f'{v:.3f}' for v in bands['average']]
    return bands


def _write_csv(frame: pd.DataFrame, path, header_lines: Sequence[str] = ()):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for line in header_lines:
            f.write(f'# {line}\n')
        frame.to_csv(f, index=False, lineterminator='\n')


def emit_report(records: Sequence[BenchmarkRecord], table: Optional[RankTable], out_dir,
                provenance: Optional[Dict] = None, header_lines: Sequence[str] = ()) -> List[str]:
    """
    Write benchmark.json, ranks.csv and bands.csv into out_dir

    Parameters
    ----------
    records : [BenchmarkRecord]
    table : RankTable, optional
    out_dir : str
    provenance : dict, optional
        stored under "provenance" in benchmark.json
    header_lines : [str]
        written as # comments on top of the csv files

    Returns
    -------
    [str]
        paths written
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, name) for name in (BENCHMARK_FILE, RANKS_FILE, BANDS_FILE)]
    with open(paths[0], 'w', encoding='utf-8', newline='\n') as f:
        json.dump(benchmark_dict(records, provenance), f, indent=2, sort_keys=True)
        f.write('\n')
    _write_csv(ranks_frame(table), paths[1], [f'tie rule: {TIE_RULE}', *header_lines])
    _write_csv(bands_frame(table), paths[2], header_lines)
    logger.info(f'Report written to {out_dir}')
    return paths


def load_benchmark(path) -> List[BenchmarkRecord]:
    with open(path, 'r', encoding='utf-8') as f:
        d = json.load(f)
    records = []
    for result in d['results']:
        for run in result['runs']:
            records.append(BenchmarkRecord.from_dict(run, result['algorithm'], result['dataset']))
    return records


def emit_heatmap(grid: pd.DataFrame, path, title: Optional[str] = None):
    """
    Cells coloured by the band of their average rank with the value printed
    inside. Rows of the grid are datasets, columns algorithms.
    """
    if grid.size == 0:
        raise ValueError('Cannot draw an empty grid')
    n_rows, n_cols = grid.shape
    with matplotlib.rc_context({'svg.fonttype': 'none', 'svg.hashsalt': 'ieca'}):
        fig = Figure(figsize=(1.1 * n_cols + 1.5, 0.6 * n_rows + 1.2))
        fig.patch.set_visible(False)
        ax = fig.add_subplot()
        ax.patch.set_visible(False)
        for i, (_, row) in enumerate(grid.iterrows()):
            for j, value in enumerate(row):
                if pd.isna(value):
                    continue
                band = color_band(float(value))
                # first dataset on top
                y = n_rows - 1 - i
                ax.add_patch(Rectangle((j, y), 1, 1, facecolor=band.colour, edgecolor='none'))
                ax.text(j + 0.5, y + 0.5, f'{value:.2f}', ha='center', va='center', fontsize=9)
        ax.set_xlim(0, n_cols)
        ax.set_ylim(0, n_rows)
        ax.set_xticks(np.arange(n_cols) + 0.5)
        ax.set_xticklabels([str(c) for c in grid.columns], rotation=30, ha='right')
        ax.set_yticks(np.arange(n_rows) + 0.5)
        ax.set_yticklabels([str(r) for r in reversed(list(grid.index))])
        ax.tick_params(length=0)
        for spine in ax.spines.values():
            spine.set_visible(False)
        if title:
            ax.set_title(title)
        fig.savefig(path, format='svg', metadata={'Date': None}, bbox_inches='tight')
