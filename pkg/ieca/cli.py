import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import pandas as pd

from .bench import (RankTable, aggregate_averages, rank_algorithms, resource_table, run_trials,
                    score_frame, score_labels)
from .dataset_io import load_csv, load_labels, load_truth, split_target, summarize
from .elbow import default_k_max, plot_scan, scan_k
from .exceptions import (DecodeError, DegeneratePartitionError, DomainError,
                         InvalidParameterError, NonFiniteValueError, StructuralError,
                         UnrecoverableColumnError, UnsupportedInputError)
from .ieca import (DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_DENSITY, DEFAULT_ITERATIONS,
                   DEFAULT_RUNS, DEFAULT_SOCIAL_RANKS, EngineConfig, __interface_version__,
                   __title__, __version__, run)
from .metrics import validate
from .misc import file_digest
from .preprocess import PreparedData, prepare
from .report import bands_frame, emit_heatmap, emit_report, ranks_frame

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

DATA_ERRORS = (StructuralError, UnrecoverableColumnError, DecodeError, NonFiniteValueError,
               UnsupportedInputError, OSError, pd.errors.ParserError, pd.errors.EmptyDataError,
               UnicodeDecodeError)
RUNTIME_ERRORS = (DomainError, DegeneratePartitionError)


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage, here a usage error is exit status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


class Provenance:
    """Reproducibility metadata: tool version, seed, input digests, resolved flags"""

    def __init__(self, args: argparse.Namespace, inputs: Sequence[Optional[str]],
                 seed: Optional[int] = None):
        self.seed = seed
        self.inputs = {p: file_digest(p) for p in inputs if p}
        self.config = {k: v for k, v in sorted(vars(args).items())
                       if k not in ('func', 'verbose')}

    def to_dict(self) -> Dict:
        return {'tool': __title__, 'version': __version__,
                'interface': __interface_version__, 'seed': self.seed,
                'inputs': self.inputs, 'config': self.config}

    def header_lines(self) -> List[str]:
        lines = [f'tool: {__title__} {__version__}']
        if self.seed is not None:
            lines.append(f'seed: {self.seed}')
        lines += [f'input: {path} sha256={digest}' for path, digest in self.inputs.items()]
        lines.append(f'config: {json.dumps(self.config, sort_keys=True, default=str)}')
        return lines


def write_csv(frame: pd.DataFrame, path, provenance: Provenance):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for line in provenance.header_lines():
            f.write(f'# {line}\n')
        frame.to_csv(f, index=False, lineterminator='\n')


def write_json(d: Dict, path, provenance: Provenance):
    d = dict(d, provenance=provenance.to_dict())
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(d, f, indent=2, sort_keys=True, default=str)
        f.write('\n')


def parse_k(value: str):
    if value.lower() == 'auto':
        return None
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or an integer, got {value!r}")


def parse_external(value: str):
    name, sep, path = value.partition('=')
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f'expected NAME=PATH, got {value!r}')
    return name, path


def load_input(args):
    """Dataset, and the ground truth if one was asked for"""
    matrix = load_csv(args.input, delimiter=args.delimiter, header=not args.no_header,
                      missing_tokens=args.missing)
    truth = None
    if getattr(args, 'target', None):
        matrix, truth = split_target(matrix, args.target)
    if getattr(args, 'truth', None):
        truth = load_truth(args.truth)
    return matrix, truth


def engine_config(args, **overrides) -> EngineConfig:
    values = dict(
        mode=args.mode,
        k=args.k,
        social_ranks=args.social_ranks,
        density=args.density,
        alpha=args.alpha,
        levy_beta=args.beta,
        max_iterations=args.iters,
        seed=args.seed,
        k_max=args.kmax,
        greedy_survivor=args.greedy_survivor,
    )
    values.update(overrides)
    return EngineConfig(**values)


def cmd_cluster(args) -> int:
    matrix, _ = load_input(args)
    cfg = engine_config(args)
    provenance = Provenance(args, [args.input], cfg.seed)
    result = run(matrix, cfg)

    write_csv(result.to_labels_frame(), args.out, provenance)
    trace = args.trace or os.path.join(os.path.dirname(args.out), 'trace.csv')
    write_csv(result.trace.to_frame(), trace, provenance)
    if args.centroids:
        centroids = result.centroids.copy()
        centroids.insert(0, 'cluster', range(len(centroids)))
        write_csv(centroids, args.centroids, provenance)
    if args.sidecar:
        write_json(result.prepared.sidecar(), args.sidecar, provenance)
    if args.cleaning_log:
        result.prepared.log.write(args.cleaning_log)
    for note in result.warnings:
        logger.warning(note)
    print(f'k={result.k} iterations={result.iterations_used}')
    return EXIT_OK


def cmd_elbow(args) -> int:
    matrix, _ = load_input(args)
    prepared = prepare(matrix)
    k_max = args.kmax or default_k_max(prepared.n_rows)
    scan = scan_k(prepared.data, k_max, restarts=args.restarts, seed=args.seed, jobs=args.jobs)
    if args.out:
        provenance = Provenance(args, [args.input], args.seed)
        write_csv(pd.DataFrame(scan.to_records()), args.out, provenance)
    if args.plot:
        plot_scan(scan, args.plot)
    print(f'chosen_k={scan.chosen_k}')
    return EXIT_OK


def cmd_validate(args) -> int:
    matrix, truth = load_input(args)
    if truth is None:
        raise UsageError('validate needs --truth or --target')
    pred = load_labels(args.labels)

    if args.sidecar:
        prepared = PreparedData.load_sidecar(args.sidecar)
        rows = pred.index.to_numpy()
        data = prepared.transform_raw(matrix.frame.loc[rows])
    else:
        prepared = prepare(matrix)
        rows = prepared.row_index
        data = prepared.data
    missing = set(rows) - set(pred.index)
    if missing:
        raise StructuralError(f'{len(missing)} rows have no predicted label')
    labels = pred.loc[rows].to_numpy()

    centroids = None
    if args.centroids:
        frame = pd.read_csv(args.centroids, comment='#', dtype=str, keep_default_na=False)
        frame = frame.drop(columns=['cluster'], errors='ignore')
        centroids = prepared.transform(frame)
        try:
            labels = labels.astype(int)
        except ValueError:
            raise StructuralError('labels must be cluster indices when --centroids is given')

    report = validate(data, labels, truth.aligned(rows), centroids)
    provenance = Provenance(args, [args.input, args.labels, args.truth, args.centroids,
                                   args.sidecar])
    write_json(report.to_dict(), args.out, provenance)
    print(report.to_json())
    return EXIT_OK


def cmd_bench(args) -> int:
    matrix, truth = load_input(args)
    if truth is None:
        raise UsageError('bench needs --truth or --target')
    dataset = args.dataset or os.path.splitext(os.path.basename(args.input))[0]
    records = []
    for mode in args.modes:
        cfg = engine_config(args, mode=mode, runs=args.runs)
        records += run_trials(matrix, cfg, truth=truth, dataset=dataset, jobs=args.jobs)
    if args.external:
        prepared = prepare(matrix)
        for name, path in args.external:
            records.append(score_labels(prepared, load_labels(path), truth, name, dataset))

    scores = score_frame(records)
    table = rank_algorithms(scores) if scores.shape[1] >= 2 else None
    inputs = [args.input, args.truth] + [path for _, path in args.external or []]
    provenance = Provenance(args, inputs, args.seed)
    emit_report(records, table, args.out, provenance.to_dict(), provenance.header_lines())
    resources = resource_table(records)
    write_csv(resources, os.path.join(args.out, 'resources.csv'), provenance)
    if args.heatmap and table is not None:
        emit_heatmap(aggregate_averages({dataset: table}), args.heatmap)
    print(f'{len(records)} records written to {args.out}')
    return EXIT_OK


def cmd_rank(args) -> int:
    frame = pd.read_csv(args.table, comment='#')
    if 'metric' not in frame.columns:
        raise StructuralError(f'{args.table} has no metric column')
    if 'dataset' not in frame.columns:
        frame.insert(0, 'dataset', 'dataset')
    tables: Dict[str, RankTable] = {}
    for dataset, sub in frame.groupby('dataset', sort=False):
        scores = sub.drop(columns=['dataset']).set_index('metric')
        tables[str(dataset)] = RankTable.from_ranks(scores) if args.ranked else rank_algorithms(scores)

    os.makedirs(args.out, exist_ok=True)
    provenance = Provenance(args, [args.table])
    ranks = pd.concat(
        [ranks_frame(t).assign(dataset=d) for d, t in tables.items()], ignore_index=True)
    ranks = ranks[['dataset'] + [c for c in ranks.columns if c != 'dataset']]
    write_csv(ranks, os.path.join(args.out, 'ranks.csv'), provenance)

    grid = aggregate_averages(tables)
    overall = RankTable(ranks=grid.iloc[:-1], averages=grid.loc['Average'])
    write_csv(grid.reset_index(names='dataset').round(2), os.path.join(args.out, 'grid.csv'),
              provenance)
    write_csv(bands_frame(overall), os.path.join(args.out, 'bands.csv'), provenance)
    if args.heatmap:
        emit_heatmap(grid, args.heatmap)
    for algorithm, band in zip(overall.averages.index, bands_frame(overall)['band']):
        print(f'{algorithm}: {overall.averages[algorithm]:.2f} {band}')
    return EXIT_OK


def cmd_summarize(args) -> int:
    matrix, truth = load_input(args)
    print(json.dumps(summarize(matrix, truth).to_dict(), sort_keys=True))
    return EXIT_OK


def build_parser() -> ArgumentParser:
    data = ArgumentParser(add_help=False)
    data.add_argument('--input', '--data', dest='input', required=True,
                      help='delimited text dataset')
    data.add_argument('--delimiter', default=',')
    data.add_argument('--no-header', action='store_true',
                      help='the first line holds data, columns are named c0..c(D-1)')
    data.add_argument('--missing', action='append', metavar='TOKEN',
                      help='missing value token, repeatable (default "", ?, NA, NaN, na)')
    data.add_argument('--target', help='class column, removed from the data and used as truth')

    engine = ArgumentParser(add_help=False)
    engine.add_argument('--mode', choices=['ieca', 'eca'], default='ieca')
    engine.add_argument('--k', type=parse_k, default=None, help="'auto' or a fixed count")
    engine.add_argument('--seed', type=int, default=0)
    engine.add_argument('--iters', type=int, default=DEFAULT_ITERATIONS)
    engine.add_argument('--density', type=float, default=DEFAULT_DENSITY)
    engine.add_argument('--alpha', type=float, default=DEFAULT_ALPHA)
    engine.add_argument('--beta', type=float, default=DEFAULT_BETA)
    engine.add_argument('--social-ranks', type=int, default=DEFAULT_SOCIAL_RANKS)
    engine.add_argument('--kmax', type=int, default=None)
    engine.add_argument('--greedy-survivor', action='store_true',
                        help='keep newC when the mut-over trial has a larger SSE')

    parser = ArgumentParser(prog='ieca', description='iECA* evolutionary clustering toolkit')
    parser.add_argument('--version', action='version',
                        version=f'{__title__} {__version__} (interface {__interface_version__})')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    sub = parser.add_subparsers(dest='command', parser_class=ArgumentParser)

    p = sub.add_parser('cluster', parents=[data, engine], help='cluster a dataset')
    p.add_argument('--out', required=True, help='labels.csv')
    p.add_argument('--trace', help='defaults to trace.csv next to --out')
    p.add_argument('--centroids')
    p.add_argument('--sidecar', help='encoding and normalization JSON')
    p.add_argument('--cleaning-log', help='JSON lines of every cleaning action')
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser('elbow', parents=[data], help='scan k and pick the elbow')
    p.add_argument('--kmax', type=int, default=None)
    p.add_argument('--restarts', type=int, default=10)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--jobs', type=int, default=1)
    p.add_argument('--out', help='k,sse csv')
    p.add_argument('--plot', help='SVG plot of the curve')
    p.set_defaults(func=cmd_elbow)

    p = sub.add_parser('validate', parents=[data], help='score a labels file')
    p.add_argument('--labels', required=True)
    p.add_argument('--truth')
    p.add_argument('--centroids')
    p.add_argument('--sidecar')
    p.add_argument('--out', default='report.json')
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('bench', parents=[data, engine], help='multi-run benchmark')
    p.add_argument('--truth')
    p.add_argument('--dataset')
    p.add_argument('--runs', type=int, default=DEFAULT_RUNS)
    p.add_argument('--jobs', type=int, default=1)
    p.add_argument('--modes', type=lambda s: [m.strip() for m in s.split(',') if m.strip()],
                   default=['ieca', 'eca'])
    p.add_argument('--external', type=parse_external, action='append', metavar='NAME=PATH')
    p.add_argument('--out', default='.')
    p.add_argument('--heatmap')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('rank', help='rank algorithms and band their averages')
    p.add_argument('--table', required=True, help='csv with dataset, metric and one column per algorithm')
    p.add_argument('--ranked', action='store_true', help='the table holds ranks already')
    p.add_argument('--out', default='.')
    p.add_argument('--heatmap')
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser('summarize', parents=[data], help='dataset characteristics')
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    if getattr(args, 'func', None) is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        return args.func(args)
    except (UsageError, InvalidParameterError) as e:
        print(f'ieca: error: {e}', file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as e:
        print(f'ieca: data error: {e}', file=sys.stderr)
        return EXIT_DATA
    except RUNTIME_ERRORS as e:
        print(f'ieca: runtime error: {e}', file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.debug('Unexpected failure', exc_info=True)
        print(f'ieca: runtime error: {type(e).__name__}: {e}', file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
