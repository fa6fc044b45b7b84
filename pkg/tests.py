import contextlib
import io
import json
import math
import os
import shutil
import tempfile
import unittest
import warnings
from itertools import combinations

import numpy as np
import pandas as pd
from scipy.stats import kurtosis
from sklearn.datasets import make_blobs

from ieca import EcaStar, EngineConfig, IEcaStar, run, run_baseline_eca
from ieca import cli
from ieca.bench import (RankTable, aggregate_averages, color_band, mean_record, rank_algorithms,
                        resource_table, run_trials, score_frame, winner)
from ieca.dataset_io import (DataMatrix, GroundTruth, infer_schema, load_csv, load_labels,
                             split_target, summarize)
from ieca.decorators import Evolution, degenerate_fallback, measured
from ieca.elbow import ElbowScan, compute_sse, default_k_max, plot_scan, scan_k, select_elbow
from ieca.engine import (ClusterState, FitnessRecord, FitnessTrace, Trial, accept_trial, advance,
                         centroid_update, check_termination, diversity, evaluate, initialize,
                         interquartile_mean, levy_step, merge_pass, mutate, mutover_select, nearest,
                         recount_clusters, select_survivor, step, uniform_crossover)
from ieca.exceptions import (DecodeError, DegeneratePartitionError, DomainError,
                             InvalidParameterError, NonFiniteValueError, ShortScanWarning,
                             StructuralError, UnrecoverableColumnError, UnsupportedInputError)
from ieca.mappings import AttributeKind, ColorBand, Metric, lookup_metric, lookup_mode
from ieca.metrics import (ValidationReport, ari, contingency, dbi, inter_cluster, intra_cluster,
                          nmi, nmse, pair_accuracy, pair_counts, validate)
from ieca.misc import derive_seed, run_seed
from ieca.preprocess import (CLAMPED, DROPPED, IMPUTED, CleaningPolicy, PreparedData, clean,
                             decode_categorical, denormalize, encode_categorical, normalize,
                             percentile_ranks, prepare, prepare_numeric)
from ieca.report import emit_heatmap, emit_report, load_benchmark, ranks_frame

# algorithm columns of the published comparison, in printed order
ALGORITHMS = ['iECA*', 'ECA*', 'GENCLUST++', 'Deep KNN', 'LVQ', 'SVM', 'ANN', 'KNN']

TRIANGLE = [(0.0, 0.0), (6.0, 0.0), (3.0, 5.196)]

TABLE_1 = pd.DataFrame({
    'x1': ['a', 'b', 'c', 'd', 'e', 'f'],
    'x2': ['E', 'D', 'E', 'D', 'E', 'D'],
    'x3': ['x'] * 6,
})
TABLE_2 = np.array([[1, 2, 1], [2, 1, 1], [3, 2, 1], [4, 1, 1], [5, 2, 1], [6, 1, 1]])

# published per-metric ranks, rows accuracy, nmi, ari, nmse, dbi
PUBLISHED_RANKS = {
    'COVID-19 symptoms checker': [[1, 2, 6, 3, 7, 8, 5, 4], [2, 4, 8, 1, 7, 6, 5, 3],
                                  [1, 6, 2, 4, 3, 7, 6, 5], [1, 3, 2, 7, 3, 8, 5, 6],
                                  [1, 6, 5, 2, 7, 8, 4, 3]],
    'Liver disorder': [[1, 2, 6, 4, 8, 7, 3, 5], [1, 2, 3, 4, 6, 7, 8, 5],
                       [1, 3, 4, 6, 2, 7, 5, 8], [1, 7, 2, 4, 5, 8, 3, 6],
                       [1, 3, 2, 4, 7, 8, 6, 5]],
    'Diabetes': [[1, 2, 5, 3, 8, 6, 4, 7], [1, 2, 5, 4, 3, 6, 8, 7], [1, 2, 3, 7, 5, 8, 4, 6],
                 [2, 8, 7, 3, 5, 6, 1, 4], [1, 4, 5, 2, 6, 8, 3, 7]],
    'Kidney disease': [[1, 3, 7, 2, 8, 5, 6, 4], [1, 2, 6, 3, 7, 8, 5, 4],
                       [1, 3, 2, 6, 5, 7, 4, 8], [1, 3, 2, 6, 4, 8, 5, 7],
                       [2, 3, 5, 4, 1, 8, 6, 7]],
    'Heart disease': [[1, 2, 7, 6, 8, 5, 3, 4], [1, 3, 6, 4, 2, 7, 8, 5],
                      [1, 2, 3, 8, 5, 6, 4, 7], [1, 4, 2, 3, 7, 8, 5, 6],
                      [1, 2, 6, 5, 4, 7, 8, 3]],
}
PUBLISHED_AVERAGES = {
    'COVID-19 symptoms checker': [1.20, 4.20, 4.60, 3.40, 5.40, 7.40, 5.00, 4.20],
    'Liver disorder': [1.00, 3.40, 3.40, 4.40, 5.60, 7.40, 5.00, 5.80],
    'Diabetes': [1.20, 3.60, 5.00, 3.80, 5.40, 6.80, 4.00, 6.20],
    'Kidney disease': [1.20, 2.80, 4.40, 4.20, 5.00, 7.20, 5.20, 6.00],
    'Heart disease': [1.00, 2.60, 4.80, 5.20, 5.20, 6.60, 5.60, 5.00],
}
OVERALL_AVERAGES = [1.12, 3.32, 4.44, 4.20, 5.32, 7.08, 4.96, 5.44]

# mean time (ms) and memory per dataset, published resource comparison
RESOURCES = {
    ('COVID-19 symptoms checker', 'time'): [567.129, 601.484, 724.937, 589.937, 701.937, 665.937, 711.847, 602.873],
    ('COVID-19 symptoms checker', 'memory'): [86.134, 96.283, 142.928, 104.918, 151.9282, 98.283, 102.817, 114.273],
    ('Liver disorder', 'time'): [48.273, 54.1832, 50.384, 50.283, 64.184, 61.827, 49.173, 55.183],
    ('Liver disorder', 'memory'): [19.481, 23.168, 31.384, 26.184, 29.474, 26.833, 29.857, 28.437],
    ('Diabetes', 'time'): [71.273, 82.383, 89.638, 79.1737, 96.174, 94.8173, 88.371, 83.239],
    ('Diabetes', 'memory'): [36.244, 39.172, 51.761, 44.183, 50.819, 49.128, 41.347, 47.127],
    ('Kidney disease', 'time'): [38.284, 42.8173, 54.183, 46.283, 53.173, 51.827, 49.718, 43.718],
    ('Kidney disease', 'memory'): [18.177, 21.661, 29.384, 17.987, 23.817, 24.981, 19.384, 18.341],
    ('Heart disease', 'time'): [79.274, 84.134, 93.193, 87.283, 94.184, 97.287, 91.827, 90.073],
    ('Heart disease', 'memory'): [42.387, 46.126, 56.128, 48.128, 54.128, 53.383, 45.651, 50.841],
}


def triangle_blobs(seed=0, n=500):
    x, y = make_blobs(n_samples=n, centers=TRIANGLE, cluster_std=0.1, random_state=seed)
    return pd.DataFrame(x, columns=['x', 'y']), y


def liver_frame(seed=0):
    """345 rows x 7 columns, two well separated groups, class in `selector`"""
    x, y = make_blobs(n_samples=345, centers=[[20.0] * 6, [28.0] * 6], cluster_std=1.0,
                      random_state=seed)
    frame = pd.DataFrame(x, columns=['mcv', 'alkphos', 'sgpt', 'sgot', 'gammagt', 'drinks'])
    frame['mcv'] = frame['mcv'].round().astype(int)
    frame['drinks'] = frame['drinks'].round().astype(int)
    frame['selector'] = y + 1
    return frame


def simplex_blobs(k, d, rng, n=500, side=10.0, sigma=1.0):
    """k blobs with every pair of centres `side` apart, randomly rotated in d dimensions"""
    centred = np.eye(k) - 1.0 / k
    u, s, _ = np.linalg.svd(centred)
    vertices = u[:, :k - 1] * s[:k - 1]
    vertices = np.hstack([vertices, np.zeros((k, d - (k - 1)))]) * side / np.sqrt(2)
    rotation, _ = np.linalg.qr(rng.normal(size=(d, d)))
    centers = vertices @ rotation + rng.uniform(-20, 20, d)
    x, _ = make_blobs(n_samples=n, centers=centers, cluster_std=sigma,
                      random_state=int(rng.integers(2 ** 31)))
    return x


def make_state(data, centroids, labels, old_centroids=None):
    centroids = np.asarray(centroids, dtype=float)
    k = centroids.shape[0]
    state = ClusterState(
        centroids=centroids,
        old_centroids=centroids.copy() if old_centroids is None else np.asarray(old_centroids, dtype=float),
        labels=np.asarray(labels),
        history=np.zeros_like(centroids),
        intra=np.zeros(k), old_intra=np.zeros(k), inter=np.zeros(k), old_inter=np.zeros(k),
    )
    return evaluate(state, np.asarray(data, dtype=float))


def write_lines(path, lines):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write('\n'.join(lines) + '\n')


# brute force oracles
def brute_pairs(pred, truth):
    tp = tn = fp = fn = 0
    for i, j in combinations(range(len(pred)), 2):
        same_pred = pred[i] == pred[j]
        same_truth = truth[i] == truth[j]
        if same_pred and same_truth:
            tp += 1
        elif not same_pred and not same_truth:
            tn += 1
        elif same_pred:
            fp += 1
        else:
            fn += 1
    return tp, tn, fp, fn


def brute_table(pred, truth):
    rows = sorted(set(pred))
    cols = sorted(set(truth))
    table = [[sum(1 for p, t in zip(pred, truth) if p == r and t == c) for c in cols] for r in rows]
    return table, [sum(r) for r in table], [sum(c) for c in zip(*table)], len(pred)


def brute_nmi(pred, truth):
    table, a, b, n = brute_table(pred, truth)
    h_pred = -sum(x / n * math.log(x / n) for x in a if x)
    h_truth = -sum(x / n * math.log(x / n) for x in b if x)
    if h_pred == 0 and h_truth == 0:
        return 1.0
    if h_pred == 0 or h_truth == 0:
        return 0.0
    mi = sum(table[i][j] / n * math.log(n * table[i][j] / (a[i] * b[j]))
             for i in range(len(a)) for j in range(len(b)) if table[i][j])
    return 2 * mi / (h_pred + h_truth)


def brute_ari(pred, truth):
    table, a, b, n = brute_table(pred, truth)
    index = sum(math.comb(x, 2) for row in table for x in row)
    sum_a = sum(math.comb(x, 2) for x in a)
    sum_b = sum(math.comb(x, 2) for x in b)
    expected = sum_a * sum_b / math.comb(n, 2)
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


class DatasetIoTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        cls.table_1 = os.path.join(cls.tmp, 'table_1.csv')
        TABLE_1.to_csv(cls.table_1, index=False)
        cls.liver = os.path.join(cls.tmp, 'liver.csv')
        liver_frame().to_csv(cls.liver, index=False)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp)

    def test_table_1_is_categorical(self):
        m = load_csv(self.table_1)
        self.assertEqual(m.n_rows, 6)
        self.assertEqual(m.schema.names, ['x1', 'x2', 'x3'])
        self.assertTrue(all(k is AttributeKind.CATEGORICAL for _, k in m.schema.columns))

    def test_header_only(self):
        path = os.path.join(self.tmp, 'empty.csv')
        write_lines(path, ['a,b'])
        m = load_csv(path)
        self.assertEqual(m.n_rows, 0)
        self.assertEqual(m.n_cols, 2)
        self.assertEqual(summarize(m).to_dict()['instances'], 0)
        self.assertFalse(summarize(m).missing)

    def test_missing_token_keeps_integer(self):
        path = os.path.join(self.tmp, 'missing.csv')
        write_lines(path, ['age,sex', '41,m', '?,f', '37,f'])
        m = load_csv(path)
        self.assertIs(m.schema.kinds['age'], AttributeKind.INTEGER)
        self.assertTrue(pd.isna(m.frame.loc[1, 'age']))
        self.assertTrue(m.has_missing)

    def test_ragged_rows(self):
        path = os.path.join(self.tmp, 'ragged.csv')
        write_lines(path, ['a,b,c', '1,2,3', '4,5'])
        with self.assertRaises(StructuralError) as ctx:
            load_csv(path)
        self.assertIn('Line 3', str(ctx.exception))

    def test_no_header(self):
        path = os.path.join(self.tmp, 'no_header.csv')
        write_lines(path, ['1,a', '2,b'])
        m = load_csv(path, header=False)
        self.assertEqual(m.schema.names, ['c0', 'c1'])
        self.assertEqual(m.n_rows, 2)

    def test_infer_schema(self):
        cells = pd.DataFrame({
            'i': ['1', '2', '3'],
            'r': ['1.5', '2', '3'],
            'c': ['a', 'b', 'a'],
            'f': ['2.0', '3', '4'],
        })
        kinds = infer_schema(cells).kinds
        self.assertIs(kinds['i'], AttributeKind.INTEGER)
        self.assertIs(kinds['r'], AttributeKind.REAL)
        self.assertIs(kinds['c'], AttributeKind.CATEGORICAL)
        self.assertIs(kinds['f'], AttributeKind.REAL)
        with self.assertRaises(StructuralError):
            infer_schema(pd.DataFrame(index=range(3)))

    def test_infer_schema_ignores_row_order(self):
        cells = pd.DataFrame({'r': ['1', '2.5', 'NA', '4'], 'c': ['x', '1', 'y', '2']})
        shuffled = cells.iloc[[3, 1, 0, 2]].reset_index(drop=True)
        self.assertEqual(infer_schema(cells), infer_schema(shuffled))

    def test_summary(self):
        matrix = load_csv(self.liver)
        d = summarize(matrix).to_dict()
        self.assertEqual(d['instances'], 345)
        self.assertEqual(d['attributes'], 7)
        self.assertEqual((d['real'], d['integer']), (4, 3))
        self.assertFalse(d['missing'])
        self.assertNotIn('classes', d)
        self.assertEqual(summarize(*split_target(matrix, 'selector')).to_dict()['classes'], 2)

        frame = liver_frame()
        frame.loc[10, 'sgpt'] = np.nan
        self.assertTrue(summarize(DataMatrix.from_frame(frame)).missing)

    def test_serialize_round_trip(self):
        path = os.path.join(self.tmp, 'round_trip.csv')
        write_lines(path, ['n,r,c', '1,0.25,red', '?,1.5,blue', '3,,red', '4,2.75,'])
        m = load_csv(path)
        out = os.path.join(self.tmp, 'round_trip_out.csv')
        m.to_csv(out)
        again = load_csv(out)
        self.assertEqual(again.schema, m.schema)
        pd.testing.assert_frame_equal(again.frame, m.frame)
        with open(out, encoding='utf-8') as f:
            self.assertEqual(f.read().splitlines()[1], '1,0.25,red')

    def test_split_target(self):
        m, truth = split_target(load_csv(self.liver), 'selector')
        self.assertEqual(m.n_cols, 6)
        self.assertEqual(len(truth), 345)
        self.assertEqual(set(truth.labels), {'1', '2'})
        with self.assertRaises(StructuralError):
            split_target(m, 'nope')

    def test_load_labels(self):
        rows = os.path.join(self.tmp, 'rows.csv')
        write_lines(rows, ['# produced elsewhere', 'row,label', '0,a', '2,b'])
        labels = load_labels(rows)
        self.assertEqual(list(labels.index), [0, 2])
        self.assertEqual(list(labels), ['a', 'b'])

        single = os.path.join(self.tmp, 'single.csv')
        write_lines(single, ['x', 'y', 'x'])
        labels = load_labels(single)
        self.assertEqual(list(labels.index), [0, 1, 2])
        self.assertEqual(GroundTruth(labels).n_classes, 2)
        with self.assertRaises(StructuralError):
            GroundTruth(labels).aligned([0, 7])


class PreprocessTest(unittest.TestCase):
    def test_table_1_to_table_2(self):
        m = DataMatrix.from_frame(TABLE_1)
        numeric, emap = encode_categorical(m)
        np.testing.assert_array_equal(numeric.to_numpy().astype(int), TABLE_2)
        decoded = decode_categorical(numeric, emap)
        pd.testing.assert_frame_equal(decoded.frame, m.frame)

    def test_encode_single_column(self):
        m = DataMatrix.from_frame(pd.DataFrame({'c': ['x', 'y', 'x']}))
        numeric, emap = encode_categorical(m)
        self.assertEqual(list(numeric['c']), [1.0, 2.0, 1.0])
        self.assertEqual(emap.code_of('c', 'y'), 2)

    def test_encode_numeric_only(self):
        m = DataMatrix.from_frame(pd.DataFrame({'a': [1.5, 2.5], 'b': [3, 4]}))
        numeric, emap = encode_categorical(m)
        self.assertEqual(len(emap), 0)
        np.testing.assert_array_equal(numeric.to_numpy(), m.frame.to_numpy())

    def test_decode_unknown_code(self):
        m = DataMatrix.from_frame(pd.DataFrame({'c': ['p', 'q']}))
        numeric, emap = encode_categorical(m)
        numeric.loc[0, 'c'] = 3.0
        with self.assertRaises(DecodeError):
            decode_categorical(numeric, emap)

    def test_normalize(self):
        scaled, params = normalize(np.array([[0.0, 7.0, 2.0], [5.0, 7.0, 4.0], [10.0, 7.0, 8.0]]))
        np.testing.assert_allclose(scaled[:, 0], [0, 0.5, 1])
        np.testing.assert_allclose(scaled[:, 1], [0.5, 0.5, 0.5])
        np.testing.assert_allclose(scaled[:, 2], [0, 1 / 3, 1])
        np.testing.assert_allclose(denormalize(scaled, params)[:, [0, 2]],
                                   [[0, 2], [5, 4], [10, 8]], atol=1e-12)
        self.assertEqual(denormalize(np.array([0.5, 0.5, 0.25]), params)[0, 1], 7.0)
        self.assertAlmostEqual(denormalize(np.array([0.5, 0.5, 0.25]), params)[0, 2], 3.5)
        with self.assertRaises(NonFiniteValueError):
            normalize(np.array([[1.0], [np.inf]]))
        with self.assertRaises(StructuralError):
            denormalize(np.zeros((1, 2)), params)

    def test_normalize_round_trip(self):
        x = np.random.default_rng(3).normal(size=(200, 4)) * 100
        scaled, params = normalize(x)
        self.assertTrue(((scaled >= 0) & (scaled <= 1)).all())
        np.testing.assert_allclose(denormalize(scaled, params), x, rtol=0, atol=1e-9)

    def test_percentile_ranks(self):
        self.assertEqual(percentile_ranks(np.array([[5.0]])).P[0, 0], 50.0)
        np.testing.assert_allclose(percentile_ranks(np.array([[1.0], [2.0], [3.0], [4.0]])).P[:, 0],
                                   [12.5, 37.5, 62.5, 87.5])
        np.testing.assert_allclose(percentile_ranks(np.array([[3.0], [3.0], [3.0]])).P[:, 0], 50.0)
        table = percentile_ranks(np.array([[0.1, 0.9], [0.5, 0.1], [0.9, 0.5]]))
        np.testing.assert_allclose(table.P_row, table.P.mean(axis=1))

    def test_percentile_ranks_order_and_permutation(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            # small integers so that every column has ties
            x = rng.integers(0, 6, size=(30, 3)).astype(float)
            table = percentile_ranks(x)
            for j in range(x.shape[1]):
                col, p = x[:, j], table.P[:, j]
                below = col[:, None] < col[None, :]
                self.assertTrue((p[:, None] < p[None, :])[below].all())
                same = col[:, None] == col[None, :]
                self.assertTrue((p[:, None] == p[None, :])[same].all())
            order = rng.permutation(len(x))
            moved = percentile_ranks(x[order])
            np.testing.assert_allclose(moved.P, table.P[order])
            np.testing.assert_allclose(moved.P_row, table.P_row[order])

    def test_clean_median(self):
        m = DataMatrix.from_frame(pd.DataFrame({'a': [1, 2, 3, np.nan, 5], 'b': [1, 1, 2, 2, 3]}))
        cleaned, log = clean(m)
        self.assertEqual(cleaned.frame.loc[3, 'a'], 2.5)
        self.assertFalse(cleaned.has_missing)
        self.assertEqual(log.count(IMPUTED), 1)

    def test_clean_mode_and_drop(self):
        frame = pd.DataFrame({
            'a': [1.0, 2.0, np.nan, 4.0],
            'b': [1.0, 2.0, np.nan, 3.0],
            'c': ['v', 'v', 'w', None],
        })
        cleaned, log = clean(DataMatrix.from_frame(frame))
        self.assertNotIn(2, cleaned.frame.index)
        self.assertEqual(log.count(DROPPED), 1)
        self.assertEqual(cleaned.frame.loc[3, 'c'], 'v')
        entry = json.loads(log.to_jsonl().splitlines()[0])
        self.assertEqual(set(entry), {'row', 'col', 'action', 'before', 'after'})

    def test_clean_clamps_outlier(self):
        m = DataMatrix.from_frame(pd.DataFrame({'a': [1, 1, 1, 1, 100]}))
        cleaned, log = clean(m)
        self.assertEqual(list(cleaned.frame['a']), [1.0] * 5)
        self.assertEqual(log.count(CLAMPED), 1)

    def test_clean_identity_and_idempotence(self):
        frame, _ = triangle_blobs()
        m = DataMatrix.from_frame(frame)
        cleaned, log = clean(m)
        self.assertEqual(len(log), 0)
        pd.testing.assert_frame_equal(cleaned.frame, m.frame)

        noisy = frame.copy()
        noisy.loc[0, 'x'] = 400.0
        noisy.loc[5, 'y'] = np.nan
        once, _ = clean(DataMatrix.from_frame(noisy))
        twice, log = clean(once)
        self.assertEqual(len(log), 0)
        pd.testing.assert_frame_equal(once.frame, twice.frame)

    def test_clean_errors(self):
        m = DataMatrix.from_frame(pd.DataFrame({'a': [1.0, 2.0], 'b': [np.nan, np.nan]}))
        with self.assertRaises(UnrecoverableColumnError):
            clean(m)
        with self.assertRaises(InvalidParameterError):
            CleaningPolicy(row_drop_threshold=0)

    def test_prepare_and_sidecar(self):
        frame = pd.DataFrame({'v': [1.0, 4.0, 2.0, 8.0], 'c': ['b', 'a', 'b', 'c']})
        m = DataMatrix.from_frame(frame)
        prepared = prepare(m)
        restored = PreparedData.from_sidecar(json.loads(json.dumps(prepared.sidecar())))
        np.testing.assert_allclose(restored.transform(m.frame), prepared.data)
        centroids = prepared.restore_centroids(prepared.data[:2])
        self.assertEqual(list(centroids['c']), ['b', 'a'])
        np.testing.assert_allclose(centroids['v'], [1.0, 4.0])
        with self.assertRaises(UnsupportedInputError):
            prepare_numeric(m)

    def test_sidecar_replays_cleaning(self):
        frame = pd.DataFrame({'v': [1.0, 2.0, np.nan, 3.0, 2.0, 90.0],
                              'c': ['a', 'b', 'b', None, 'b', 'a']})
        m = DataMatrix.from_frame(frame)
        prepared = prepare(m)
        self.assertEqual(prepared.log.count(IMPUTED), 2)
        self.assertEqual(prepared.log.count(CLAMPED), 1)
        d = json.loads(json.dumps(prepared.sidecar()))
        self.assertEqual(d['cleaning']['fills'], {'v': 2.0, 'c': 'b'})
        self.assertEqual(d['cleaning']['fences']['v'], [0.5, 4.5])

        restored = PreparedData.from_sidecar(d)
        raw = m.frame.loc[prepared.row_index]
        np.testing.assert_allclose(restored.transform_raw(raw), prepared.data)
        with self.assertRaises((NonFiniteValueError, DecodeError)):
            restored.transform(raw)


class ElbowTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        frame, cls.truth = triangle_blobs()
        cls.data = normalize(frame)[0]
        cls.scan = scan_k(cls.data, 8, restarts=5, seed=1)

    def test_compute_sse(self):
        self.assertEqual(compute_sse([[1.0, 1.0]], [0], [[1.0, 1.0]]), 0.0)
        self.assertEqual(compute_sse([[0, 0], [2, 0]], [0, 0], [[1, 0]]), 2.0)
        self.assertEqual(compute_sse([0, 3, 6], [0, 0, 0], [[3]]), 18.0)
        with self.assertRaises(StructuralError):
            compute_sse([[0, 0]], [0], [[0, 0, 0]])
        with self.assertRaises(StructuralError):
            compute_sse([[0, 0]], [1], [[0, 0]])

    def test_compute_sse_order_and_additivity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            k = int(rng.integers(1, 5))
            x = rng.random((40, 3))
            labels = rng.integers(0, k, 40)
            centroids = rng.random((k, 3))
            total = compute_sse(x, labels, centroids)
            order = rng.permutation(len(x))
            self.assertAlmostEqual(compute_sse(x[order], labels[order], centroids), total, delta=1e-9)
            parts = sum(compute_sse(x[labels == i], labels[labels == i], centroids) for i in range(k))
            self.assertAlmostEqual(parts, total, delta=1e-9)

    def test_select_elbow(self):
        def pick(sse):
            return select_elbow(ElbowScan(np.arange(1, len(sse) + 1), np.asarray(sse, float), 0))

        self.assertEqual(pick([100, 40, 12, 10, 9]), 2)
        self.assertEqual(pick([10, 8, 6, 4, 2]), 2)
        self.assertEqual(pick([90, 60, 10, 8, 7]), 3)
        self.assertEqual(pick([900, 600, 100, 80, 70]), pick([90, 60, 10, 8, 7]))
        with self.assertWarns(ShortScanWarning):
            self.assertEqual(pick([5, 1]), 2)

    def test_triangle_scan(self):
        scan = self.scan
        self.assertEqual(list(scan.k_values), list(range(1, 9)))
        self.assertEqual(scan.chosen_k, 3)
        self.assertLess(scan.sse[2], 0.05 * scan.sse[1])

    def test_sse_non_increasing_in_k(self):
        self.assertTrue((np.diff(self.scan.sse) <= 1e-9).all())
        for seed in range(5):
            x = np.random.default_rng(seed).random((60, 3))
            scan = scan_k(x, 8, restarts=10, seed=seed)
            self.assertTrue((np.diff(scan.sse) <= 1e-9).all(), scan.sse)

    def test_degenerate_scans(self):
        same = np.ones((20, 2))
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            scan = scan_k(same, 4, restarts=5)
        np.testing.assert_allclose(scan.sse, 0.0)
        with self.assertWarns(ShortScanWarning):
            scan = scan_k(np.array([[0.0], [1.0]]), 2, restarts=5)
        self.assertEqual(scan.sse[1], 0.0)
        with self.assertRaises(InvalidParameterError):
            scan_k(np.zeros((3, 2)), 4)
        with self.assertRaises(InvalidParameterError):
            scan_k(np.zeros((3, 2)), 1)

    def test_parallel_scan_is_identical(self):
        parallel = scan_k(self.data, 8, restarts=5, seed=1, jobs=4)
        np.testing.assert_array_equal(parallel.sse, self.scan.sse)
        self.assertEqual(parallel.chosen_k, self.scan.chosen_k)

    def test_recovers_k(self):
        hits = 0
        for trial in range(100):
            rng = np.random.default_rng(trial)
            d = (2, 5)[trial % 2]
            k = int(rng.integers(2, 4)) if d == 2 else int(rng.integers(2, 7))
            x = simplex_blobs(k, d, rng)
            hits += scan_k(x, 8, restarts=5, seed=trial).chosen_k == k
        self.assertGreaterEqual(hits, 95)

    def test_default_k_max(self):
        self.assertEqual(default_k_max(500), 10)
        self.assertEqual(default_k_max(16), 4)

    def test_plot(self):
        with tempfile.TemporaryDirectory() as tmp:
            paths = [os.path.join(tmp, f'{i}.svg') for i in range(2)]
            for path in paths:
                plot_scan(self.scan, path)
            with open(paths[0], 'rb') as a, open(paths[1], 'rb') as b:
                self.assertEqual(a.read(), b.read())


class MetricsTest(unittest.TestCase):
    def test_distances(self):
        self.assertEqual(intra_cluster([[1.0, 2.0]] * 3), 0.0)
        self.assertEqual(intra_cluster([0, 1]), 1.0)
        self.assertAlmostEqual(intra_cluster([0, 1, 2]), 8 / 6)
        self.assertEqual(intra_cluster([[4.0, 4.0]]), 0.0)
        self.assertEqual(inter_cluster([0], [2]), 2.0)
        self.assertEqual(inter_cluster([[0, 0]] * 3, [[5, 0]] * 2), 5.0)
        a = np.array([[0.0, 0.0], [2.0, 0.0]])
        self.assertAlmostEqual(inter_cluster(a, a), 1.0)
        self.assertAlmostEqual(inter_cluster(a, a + 3), inter_cluster(a + 3, a))
        with self.assertRaises(DomainError):
            intra_cluster(np.zeros((0, 2)))

    def test_pair_accuracy(self):
        self.assertEqual(pair_accuracy([0, 1, 1], [0, 1, 1])[0], 1.0)
        accuracy, counts = pair_accuracy([0, 0, 0, 0], [0, 0, 1, 1])
        self.assertEqual((counts.tp, counts.fp), (2, 4))
        self.assertAlmostEqual(accuracy, 2 / 6)
        self.assertEqual(pair_accuracy([1, 1, 0, 0], [0, 0, 1, 1])[0], 1.0)
        with self.assertRaises(StructuralError):
            pair_accuracy([0, 1], [0, 1, 1])
        with self.assertRaises(DomainError):
            pair_accuracy([0], [0])

    def test_nmi_ari(self):
        self.assertAlmostEqual(nmi([0, 0, 1, 1], [0, 0, 1, 1]), 1.0)
        self.assertEqual(nmi([0, 0, 0, 0], [0, 0, 1, 1]), 0.0)
        self.assertAlmostEqual(nmi([0, 0, 1, 1], [0, 1, 0, 1]), 0.0)
        self.assertEqual(ari([2, 2, 5], [0, 0, 1]), 1.0)
        self.assertAlmostEqual(ari([0, 0, 1, 1], [0, 1, 0, 1]), -0.5)
        table = contingency([0, 0, 1], ['a', 'b', 'b'])
        self.assertEqual(table.n, 3)
        self.assertEqual(list(table.a), [2, 1])

    def test_against_brute_force(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(2, 51))
            pred = rng.integers(0, int(rng.integers(1, 7)), n)
            truth = rng.integers(0, int(rng.integers(1, 7)), n)

            tp, tn, fp, fn = brute_pairs(pred, truth)
            counts = pair_counts(pred, truth)
            self.assertEqual((counts.tp, counts.tn, counts.fp, counts.fn), (tp, tn, fp, fn))
            self.assertEqual(counts.total, n * (n - 1) // 2)
            self.assertEqual(pair_accuracy(pred, truth)[0], (tp + tn) / (tp + tn + fp + fn))
            self.assertAlmostEqual(nmi(pred, truth), brute_nmi(list(pred), list(truth)), delta=1e-9)
            self.assertAlmostEqual(ari(pred, truth), brute_ari(list(pred), list(truth)), delta=1e-9)

            relabel = rng.permutation(10)[pred]
            self.assertAlmostEqual(pair_accuracy(relabel, truth)[0], pair_accuracy(pred, truth)[0])
            self.assertAlmostEqual(nmi(relabel, truth), nmi(pred, truth), delta=1e-12)
            self.assertAlmostEqual(ari(relabel, truth), ari(pred, truth), delta=1e-12)
            self.assertAlmostEqual(ari(truth, pred), ari(pred, truth), delta=1e-12)
            self.assertAlmostEqual(nmi(truth, pred), nmi(pred, truth), delta=1e-12)

    def test_nmse(self):
        self.assertEqual(nmse([0, 3, 6], [0, 0, 0], [[3]]), 6.0)
        self.assertEqual(nmse([[1, 1], [2, 2]], [0, 1], [[1, 1], [2, 2]]), 0.0)

    def test_dbi(self):
        self.assertEqual(dbi([[0.0], [0.0], [5.0]], [0, 0, 1], [[0.0], [5.0]]), 0.0)
        data = np.array([[0.0], [2.0], [10.0], [12.0]])
        labels = [0, 0, 1, 1]
        self.assertAlmostEqual(dbi(data, labels, [[1.0], [11.0]]), 0.2)
        self.assertAlmostEqual(dbi(data * 3 + 7, labels, [[10.0], [40.0]]), 0.2)
        with self.assertRaises(DomainError):
            dbi(data, [0, 0, 0, 0], [[6.0]])
        with self.assertRaises(DegeneratePartitionError):
            dbi(data, labels, [[6.0], [6.0]])

    def test_validate(self):
        frame, truth = triangle_blobs()
        data = normalize(frame)[0]
        report = validate(data, truth, truth)
        self.assertEqual((report.accuracy, report.ari), (1.0, 1.0))
        self.assertAlmostEqual(report.nmi, 1.0)
        self.assertEqual((report.k_pred, report.k_true, report.n, report.d), (3, 3, 500, 2))
        again = ValidationReport.from_dict(json.loads(report.to_json()))
        self.assertEqual(again, report)
        self.assertEqual(again.to_json(), report.to_json())


class EngineTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.frame, cls.truth = triangle_blobs()
        cls.results = [IEcaStar(seed=seed).fit(cls.frame) for seed in range(30)]

    def test_initialize(self):
        data = np.array([[0.0], [1 / 3], [2 / 3], [1.0]])
        ptable = percentile_ranks(data)
        np.testing.assert_allclose(ptable.P_row, [12.5, 37.5, 62.5, 87.5])
        state = initialize(data, ptable, 4, np.random.default_rng(0))
        self.assertEqual(list(state.labels), [0, 1, 2, 3])
        np.testing.assert_allclose(state.centroids, data)
        state = initialize(data, ptable, 1, np.random.default_rng(0))
        self.assertEqual(list(state.labels), [0, 0, 0, 0])
        with self.assertRaises(InvalidParameterError):
            initialize(data, ptable, 5, np.random.default_rng(0))

    def test_interquartile_mean(self):
        self.assertAlmostEqual(interquartile_mean(np.array([[0.2], [0.4], [0.6], [0.8]]))[0], 0.5)

    def test_recount(self):
        data = np.concatenate([np.zeros(100), [0.4], np.full(50, 0.6), np.full(49, 0.8)])[:, None]
        labels = np.concatenate([np.zeros(100), [2], np.full(50, 3), np.full(49, 4)]).astype(int)
        state = make_state(data, [[0.0], [0.2], [0.4], [0.6], [0.8]], labels)
        self.assertEqual(recount_clusters(state, data, density=0.01), 3)
        self.assertEqual(state.labels[100], 1)
        self.assertEqual(state.sizes().sum(), 200)
        self.assertEqual(recount_clusters(state, data, density=0.01), 3)

        sparse = make_state(data[:3], [[0.0], [0.5]], [0, 0, 1])
        with self.assertRaises(DegeneratePartitionError):
            recount_clusters(sparse, data[:3], density=0.9)

    def test_centroid_update(self):
        state = make_state(np.zeros((3, 1)), [[0.1], [0.2], [0.3]], [0, 1, 2],
                           old_centroids=[[0.7], [0.8], [0.9]])
        state.intra = np.array([1.0, 3.0, 2.0])
        state.old_intra = np.array([2.0, 2.0, 2.0])
        centroid_update(state)
        np.testing.assert_allclose(state.new_centroids[:, 0], [0.1, 0.8, 0.9])

    def test_centroid_update_keeps_tighter_partition(self):
        data = normalize(self.frame)[0]
        state = initialize(data, percentile_ranks(data), 3, np.random.default_rng(2))
        centroid_update(state)
        kept_current = (state.new_centroids == state.centroids).all(axis=1)
        chosen = np.where(kept_current, state.intra, state.old_intra)
        np.testing.assert_allclose(chosen, np.minimum(state.intra, state.old_intra))

    def test_centroid_update_never_loosens(self):
        data = normalize(self.frame)[0]

        def fresh_intra(centroids):
            labels = nearest(data, centroids)
            return np.array([intra_cluster(data[labels == i]) if (labels == i).any() else np.inf
                             for i in range(len(centroids))])

        rng = np.random.default_rng(9)
        state = initialize(data, percentile_ranks(data), 4, rng)
        for _ in range(5):
            recount_clusters(state, data, 0.001)
            centroid_update(state)
            current, old = fresh_intra(state.centroids), fresh_intra(state.old_centroids)
            kept_current = (state.new_centroids == state.centroids).all(axis=1)
            selected = np.where(kept_current, current, old)
            self.assertTrue((selected <= current + 1e-9).all())
            update = step(state, data, rng, 0.001, 1.5, 0.001)
            self.assertLessEqual(update.selected_intra, update.current_intra + 1e-9)
            advance(state, data)

    def test_trial_replaces_new_centroids(self):
        data = np.array([[0.0], [0.1], [0.9], [1.0]])
        trial = Trial(centroids=np.array([[0.0], [0.5]]), labels=np.array([0, 0, 1, 1]))

        def updated():
            state = make_state(data, [[0.05], [0.95]], [0, 0, 1, 1], old_centroids=[[0.3], [0.7]])
            return centroid_update(state)

        state = accept_trial(updated(), trial)
        np.testing.assert_allclose(state.centroids, trial.centroids)
        np.testing.assert_array_equal(state.labels, trial.labels)

        # the opt-in greedy variant keeps newC, its SSE is lower
        state = updated()
        selection = select_survivor(state, trial, data)
        self.assertFalse(selection.accepted_trial)
        self.assertAlmostEqual(selection.incumbent_sse, 0.26)
        self.assertAlmostEqual(selection.trial_sse, 0.42)
        np.testing.assert_allclose(state.centroids, [[0.3], [0.7]])

    def test_greedy_survivor_variant(self):
        self.assertFalse(EngineConfig().greedy_survivor)
        result = run(self.frame, EngineConfig(k=3, seed=1, greedy_survivor=True))
        self.assertTrue((result.sizes() > 0).all())
        self.assertEqual(result.sizes().sum(), len(self.frame))

    def test_levy_step(self):
        self.assertTrue((levy_step(0.0, 1.5, 4, np.random.default_rng(1)) == 0).all())
        np.testing.assert_array_equal(levy_step(0.5, 1.5, 4, np.random.default_rng(1)),
                                      levy_step(0.5, 1.5, 4, np.random.default_rng(1)))
        steps = levy_step(1.0, 1.5, 100000, np.random.default_rng(7))
        normal = np.random.default_rng(8).normal(0.0, steps.std(), 100000)
        self.assertGreater(kurtosis(steps), kurtosis(normal))
        with self.assertRaises(InvalidParameterError):
            levy_step(1.0, 2.5, 3, np.random.default_rng(1))

    def test_mutate(self):
        state = make_state(np.zeros((1, 1)), [[0.5]], [0], old_centroids=[[0.7]])
        state.intra, state.old_intra = np.array([1.0]), np.array([2.0])
        self.assertAlmostEqual(mutate(state, 0, np.array([0.1]))[0], 0.52)
        self.assertAlmostEqual(state.history[0, 0], 0.2)

        state = make_state(np.zeros((1, 1)), [[0.99]], [0], old_centroids=[[-0.01]])
        state.intra, state.old_intra = np.array([2.0]), np.array([1.0])
        self.assertEqual(mutate(state, 0, np.array([0.5]))[0], 1.0)

        state = make_state(np.zeros((1, 2)), [[0.3, 0.4]], [0])
        np.testing.assert_allclose(mutate(state, 0, np.array([5.0, 5.0])), [0.3, 0.4])

    def test_uniform_crossover(self):
        rng = np.random.default_rng(3)
        c = np.array([0.2, 0.4, 0.6])
        np.testing.assert_array_equal(uniform_crossover(c, c, rng), c)
        child = uniform_crossover(np.zeros(8), np.ones(8), rng)
        self.assertTrue(set(child) <= {0.0, 1.0})
        np.testing.assert_array_equal(uniform_crossover(np.zeros(8), np.ones(8), np.random.default_rng(5)),
                                      uniform_crossover(np.zeros(8), np.ones(8), np.random.default_rng(5)))

    def test_mutover_select(self):
        data = np.array([[0.1], [0.9]])
        state = make_state(data, [[0.5]], [0, 0])
        mutants, crossovers = np.array([[0.2]]), np.array([[0.8]])
        state.old_inter, state.inter = np.array([5.0]), np.array([3.0])
        self.assertEqual(mutover_select(state, mutants, crossovers, data).centroids[0, 0], 0.2)
        state.old_inter, state.inter = np.array([3.0]), np.array([5.0])
        self.assertEqual(mutover_select(state, mutants, crossovers, data).centroids[0, 0], 0.8)
        state.old_inter, state.inter = np.array([4.0]), np.array([4.0])
        trial = mutover_select(state, mutants, crossovers, data)
        self.assertIsInstance(trial, Trial)
        self.assertEqual(trial.centroids[0, 0], 0.8)

    def test_merge_pass(self):
        data = np.array([[0.0], [1.0], [0.0], [1.0]])
        state = make_state(data, [[0.5], [0.5]], [0, 0, 1, 1])
        self.assertEqual(merge_pass(state, data), 1)
        self.assertEqual(state.k_live, 1)

        data = np.array([[0.0], [1.0]])
        state = make_state(data, [[0.0], [1.0]], [0, 1])
        self.assertEqual(merge_pass(state, data), 0)
        self.assertEqual(state.k_live, 2)

        data = normalize(self.frame)[0]
        state = make_state(data, [data[self.truth == i].mean(axis=0) for i in range(3)], self.truth)
        self.assertEqual(merge_pass(state, data), 0)
        self.assertEqual(merge_pass(state, data), 0)
        self.assertEqual(state.k_live, 3)

    def test_check_termination(self):
        trace = FitnessTrace([FitnessRecord(i, 10.0 - 0.1 * i, 1.0, 3, 1.0) for i in range(1, 11)])
        self.assertFalse(check_termination(trace, 50))
        self.assertTrue(check_termination(trace, 10))
        trace.append(FitnessRecord(11, trace[-1].sum_intra, 1.0, 3, 1.0))
        self.assertTrue(check_termination(trace, 50))
        self.assertFalse(check_termination(FitnessTrace([trace[0]]), 50))

    def test_quality(self):
        scores = [ari(r.labels, self.truth[r.row_index]) for r in self.results]
        self.assertGreaterEqual(float(np.median(scores)), 0.9)
        self.assertGreaterEqual(sum(r.k == 3 for r in self.results), 15)

    def test_results_are_valid(self):
        for result in self.results:
            data = result.prepared.data
            sizes = result.sizes()
            self.assertTrue((sizes > 0).all())
            self.assertEqual(sizes.sum(), len(self.frame))
            # densest first
            self.assertTrue((np.diff(sizes) <= 0).all())
            self.assertLessEqual(len(result.trace), 50)
            for record in result.trace:
                self.assertLessEqual(record.selected_intra, record.current_intra + 1e-9)
            self.assertAlmostEqual(
                result.trace[-1].sse,
                compute_sse(data, result.labels, result.normalized_centroids), delta=1e-9)
            sigma = diversity(data, result.labels)
            off_diagonal = ~np.eye(result.k, dtype=bool)
            self.assertTrue((sigma[off_diagonal] > 0).all())
            self.assertTrue(((result.normalized_centroids >= 0) & (result.normalized_centroids <= 1)).all())

    def test_determinism(self):
        again = IEcaStar(seed=0).fit(self.frame)
        np.testing.assert_array_equal(again.labels, self.results[0].labels)
        pd.testing.assert_frame_equal(again.trace.to_frame(), self.results[0].trace.to_frame())
        pd.testing.assert_frame_equal(again.centroids, self.results[0].centroids)

    def test_fixed_k(self):
        result = run(self.frame, EngineConfig(k=3, seed=4))
        self.assertIsNone(result.elbow)
        self.assertLessEqual(result.k, 3)

    def test_single_row(self):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            result = run(pd.DataFrame({'x': [1.5], 'y': [-2.0]}))
        self.assertEqual(result.k, 1)
        self.assertEqual(list(result.labels), [0])
        self.assertEqual(list(result.centroids.iloc[0]), [1.5, -2.0])
        self.assertTrue(result.warnings)
        self.assertEqual(len(result.trace), 1)

    def test_baseline(self):
        cfg = EngineConfig(mode='eca', social_ranks=2, seed=5)
        result = run_baseline_eca(self.frame, cfg)
        self.assertGreaterEqual(result.k, 1)
        self.assertTrue((result.sizes() > 0).all())
        self.assertEqual(result.sizes().sum(), len(self.frame))
        again = EcaStar(cfg).fit(self.frame)
        np.testing.assert_array_equal(again.labels, result.labels)

    def test_baseline_single_blob_collapses(self):
        x, _ = make_blobs(n_samples=200, centers=[(0.0, 0.0)], cluster_std=0.5, random_state=1)
        result = run_baseline_eca(pd.DataFrame(x, columns=['a', 'b']),
                                  EngineConfig(mode='eca', seed=2))
        self.assertEqual(result.k, 1)

    def test_baseline_rejects_categorical(self):
        with self.assertRaises(UnsupportedInputError):
            run_baseline_eca(TABLE_1, EngineConfig(mode='eca'))

    def test_config(self):
        self.assertIsNone(EngineConfig(k='auto').k)
        self.assertEqual(EngineConfig(k=None).to_dict()['k'], 'auto')
        self.assertIs(EngineConfig(mode='ECA*').mode, lookup_mode('eca'))
        for bad in ({'density': 0}, {'density': 1}, {'max_iterations': 0}, {'runs': 0},
                    {'mode': 'eca', 'social_ranks': 1}, {'k': 0}, {'crossover': 'one-point'},
                    {'mode': 'kmeans'}, {'k': 'many'}):
            with self.assertRaises(InvalidParameterError):
                EngineConfig(**bad)


class DecoratorsTest(unittest.TestCase):
    def test_degenerate_fallback(self):
        class Failing:
            @degenerate_fallback
            def evolve(self, data):
                raise DegeneratePartitionError('nothing left')

        evolution = Failing().evolve(np.array([[0.0, 1.0], [2.0, 3.0]]))
        self.assertIsInstance(evolution, Evolution)
        self.assertEqual(evolution.state.k_live, 1)
        np.testing.assert_allclose(evolution.state.centroids, [[1.0, 2.0]])
        self.assertEqual(len(evolution.notes), 1)

    def test_measured(self):
        @measured
        def allocate(n):
            return len([0] * n)

        measurement = allocate(100000)
        self.assertEqual(measurement.result, 100000)
        self.assertGreaterEqual(measurement.wall_time_ms, 0)
        self.assertGreater(measurement.peak_live_bytes, 100000)

    def test_seeds(self):
        self.assertEqual(run_seed(42, 3), 42 ^ 3)
        self.assertEqual(derive_seed(7, 2), derive_seed(7, 2))
        self.assertNotEqual(derive_seed(7, 2), derive_seed(7, 3))


class BenchTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tables = {
            dataset: RankTable.from_ranks(pd.DataFrame(
                ranks, index=[m.value for m in Metric], columns=ALGORITHMS))
            for dataset, ranks in PUBLISHED_RANKS.items()
        }
        cls.matrix, cls.truth = split_target(DataMatrix.from_frame(liver_frame()), 'selector')

    def test_published_averages(self):
        for dataset, table in self.tables.items():
            for algorithm, expected in zip(ALGORITHMS, PUBLISHED_AVERAGES[dataset]):
                self.assertAlmostEqual(table.averages[algorithm], expected, places=2)
        grid = aggregate_averages(self.tables)
        for algorithm, expected in zip(ALGORITHMS, OVERALL_AVERAGES):
            self.assertAlmostEqual(grid.loc['Average', algorithm], expected, places=2)

    def test_published_bands(self):
        expected = {'iECA*': ColorBand.GREEN, 'ECA*': ColorBand.GREEN, 'SVM': ColorBand.RED,
                    'KNN': ColorBand.YELLOW, 'LVQ': ColorBand.YELLOW}
        averages = dict(zip(ALGORITHMS, OVERALL_AVERAGES))
        for algorithm, band in expected.items():
            self.assertIs(color_band(averages[algorithm]), band)
        bands = [color_band(v) for v in OVERALL_AVERAGES]
        self.assertEqual([bands.count(b) for b in ColorBand], [2, 5, 1])

    def test_color_band(self):
        self.assertIs(color_band(3.332), ColorBand.GREEN)
        self.assertIs(color_band(3.3325), ColorBand.YELLOW)
        self.assertIs(color_band(3.3324), ColorBand.GREEN)
        self.assertIs(color_band(5.666), ColorBand.RED)
        self.assertIs(color_band(1.0), ColorBand.GREEN)
        self.assertIs(color_band(8.0), ColorBand.RED)
        values = np.linspace(1, 8, 200)
        order = [list(ColorBand).index(color_band(v)) for v in values]
        self.assertEqual(order, sorted(order))
        with self.assertRaises(DomainError):
            color_band(0.99)

    def test_rank_algorithms(self):
        scores = pd.DataFrame({'a': [0.9, 0.5, 0.2], 'b': [0.9, 0.7, 0.1], 'c': [0.4, 0.7, 0.3]},
                              index=['accuracy', 'ari', 'dbi'])
        table = rank_algorithms(scores)
        self.assertEqual(list(table.ranks.loc['accuracy']), [1, 1, 3])
        self.assertEqual(list(table.ranks.loc['ari']), [3, 1, 1])
        self.assertEqual(list(table.ranks.loc['dbi']), [2, 1, 3])
        for _, row in table.ranks.iterrows():
            self.assertEqual(row.min(), 1)

        tie = rank_algorithms(pd.DataFrame({'x': [0.5], 'y': [0.5]}, index=['nmi']))
        self.assertEqual(list(tie.ranks.loc['nmi']), [1, 1])

        gap = rank_algorithms(pd.DataFrame({'x': [0.5, 2.0], 'y': [np.nan, 1.0]},
                                           index=['nmi', 'nmse']))
        self.assertEqual(gap.gaps, {'nmi': ['y']})
        self.assertEqual(gap.averages['y'], 1.0)
        self.assertEqual(gap.averages['x'], 1.5)

        with self.assertRaises(InvalidParameterError):
            rank_algorithms(pd.DataFrame({'x': [0.5]}, index=['nmi']))
        with self.assertRaises(InvalidParameterError):
            rank_algorithms(pd.DataFrame({'x': [0.5], 'y': [np.inf]}, index=['nmi']))
        self.assertIs(lookup_metric('nMSE'), Metric.NMSE)

    def test_competition_ranks(self):
        rng = np.random.default_rng(11)
        scores = pd.DataFrame(rng.integers(0, 4, (5, 8)).astype(float),
                              index=[m.value for m in Metric], columns=ALGORITHMS)
        table = rank_algorithms(scores)
        for metric, row in scores.iterrows():
            higher = lookup_metric(metric).higher_is_better
            for algorithm, value in row.items():
                better = (row > value).sum() if higher else (row < value).sum()
                self.assertEqual(table.ranks.loc[metric, algorithm], 1 + better)
            self.assertEqual(table.ranks.loc[metric].min(), 1)
            self.assertLessEqual(table.ranks.loc[metric].max(), len(ALGORITHMS))

    def test_published_winners(self):
        winners = {key: winner(dict(zip(ALGORITHMS, values))) for key, values in RESOURCES.items()}
        for (dataset, quantity), w in winners.items():
            expected = 'Deep KNN' if (dataset, quantity) == ('Kidney disease', 'memory') else 'iECA*'
            self.assertEqual(w.name, expected)
            self.assertFalse(w.tie)
        self.assertEqual(sum(w.name == 'iECA*' for w in winners.values()), 9)
        self.assertEqual(winner({'solo': 3.0}).name, 'solo')
        self.assertEqual(winner({'b': 1.0, 'a': 1.0}), ('a', True))

    def test_protocol_scale(self):
        records = run_trials(self.matrix, EngineConfig(seed=9, max_iterations=50), runs=30,
                             truth=self.truth, dataset='liver')
        self.assertEqual(len(records), 30)
        self.assertEqual([r.run_index for r in records], list(range(30)))
        for record in records:
            self.assertTrue(record.ok, record.error)
            self.assertGreaterEqual(record.wall_time_ms, 0)
            self.assertGreaterEqual(record.peak_live_bytes, 0)
            self.assertTrue(all(np.isfinite(v) for v in record.report.metrics().values()))
            self.assertGreaterEqual(record.report.k_pred, 1)
        self.assertEqual(mean_record(records).run_index, None)

    def test_trials_are_deterministic(self):
        cfg = EngineConfig(seed=3, max_iterations=20)
        serial = run_trials(self.matrix, cfg, runs=3, truth=self.truth)
        parallel = run_trials(self.matrix, cfg, runs=3, truth=self.truth, jobs=2)
        for a, b in zip(serial, parallel):
            self.assertEqual(a.run_index, b.run_index)
            np.testing.assert_array_equal(a.labels, b.labels)
            self.assertEqual(a.report, b.report)

    def test_single_run_mean(self):
        records = run_trials(self.matrix, EngineConfig(seed=1, max_iterations=10), runs=1,
                             truth=self.truth)
        self.assertEqual(len(records), 1)
        self.assertEqual(mean_record(records).report, records[0].report)

    def test_resource_table(self):
        records = run_trials(self.matrix, EngineConfig(seed=1, max_iterations=5), runs=2,
                             truth=self.truth, dataset='liver')
        records += run_trials(self.matrix, EngineConfig(mode='eca', seed=1, max_iterations=5),
                              runs=2, truth=self.truth, dataset='liver')
        resources = resource_table(records)
        self.assertEqual(list(resources['quantity']), ['time', 'memory'])
        self.assertTrue(set(resources['Winner']) <= {'iECA*', 'ECA*'})
        scores = score_frame(records)
        self.assertEqual(list(scores.columns), ['iECA*', 'ECA*'])
        self.assertEqual(list(scores.index), [m.value for m in Metric])


class ReportTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        cls.tables = {
            dataset: RankTable.from_ranks(pd.DataFrame(
                ranks, index=[m.value for m in Metric], columns=ALGORITHMS))
            for dataset, ranks in PUBLISHED_RANKS.items()
        }

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp)

    def test_empty_report(self):
        out = os.path.join(self.tmp, 'empty')
        paths = emit_report([], None, out)
        self.assertTrue(all(os.path.exists(p) for p in paths))
        with open(paths[0], encoding='utf-8') as f:
            self.assertEqual(json.load(f)['results'], [])
        self.assertEqual(load_benchmark(paths[0]), [])

    def test_round_trip(self):
        matrix, truth = split_target(DataMatrix.from_frame(liver_frame()), 'selector')
        records = run_trials(matrix, EngineConfig(seed=2, max_iterations=5), runs=2, truth=truth,
                             dataset='liver')
        out = os.path.join(self.tmp, 'round_trip')
        paths = emit_report(records, None, out, provenance={'seed': 2})
        self.assertEqual(load_benchmark(paths[0]), records)
        with open(paths[0], encoding='utf-8') as f:
            d = json.load(f)
        self.assertEqual(d['provenance'], {'seed': 2})
        self.assertEqual(d['results'][0]['mean']['run'], None)

    def test_ranks_file(self):
        out = os.path.join(self.tmp, 'ranks')
        paths = emit_report([], self.tables['Liver disorder'], out, header_lines=['seed: 1'])
        with open(paths[1], encoding='utf-8') as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], '# tie rule: competition')
        self.assertEqual(lines[1], '# seed: 1')
        ranks = pd.read_csv(paths[1], comment='#', dtype=str)
        self.assertEqual(list(ranks.columns), ['metric'] + ALGORITHMS)
        self.assertEqual(list(ranks.iloc[-1]), ['Average', '1.00', '3.40', '3.40', '4.40', '5.60',
                                                '7.40', '5.00', '5.80'])
        self.assertEqual(len(ranks_frame(self.tables['Liver disorder'])), 6)

    def test_published_bands_file(self):
        grid = aggregate_averages(self.tables)
        overall = RankTable(ranks=grid.iloc[:-1], averages=grid.loc['Average'])
        out = os.path.join(self.tmp, 'bands')
        paths = emit_report([], overall, out)
        bands = pd.read_csv(paths[2], comment='#', dtype=str)
        self.assertEqual(list(bands['algorithm']), ALGORITHMS)
        self.assertEqual(list(bands['average'])[:2], ['1.120', '3.320'])
        self.assertEqual(bands['band'].value_counts().to_dict(), {'Yellow': 5, 'Green': 2, 'Red': 1})

    def test_heatmap(self):
        grid = aggregate_averages(self.tables)
        paths = [os.path.join(self.tmp, f'heatmap_{i}.svg') for i in range(2)]
        for path in paths:
            emit_heatmap(grid, path)
        with open(paths[0], 'rb') as a, open(paths[1], 'rb') as b:
            first = a.read()
            self.assertEqual(first, b.read())
        svg = first.decode('utf-8')
        for band in ColorBand:
            self.assertIn(band.colour, svg)
        self.assertIn('1.12', svg)

        single = os.path.join(self.tmp, 'single.svg')
        emit_heatmap(pd.DataFrame({'iECA*': [1.0]}, index=['d']), single)
        with open(single, encoding='utf-8') as f:
            svg = f.read()
        self.assertIn('1.00', svg)
        self.assertIn(ColorBand.GREEN.colour, svg)
        self.assertNotIn(ColorBand.RED.colour, svg)
        with self.assertRaises(ValueError):
            emit_heatmap(pd.DataFrame(), single)


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        frame, truth = triangle_blobs(seed=4)
        cls.blobs = os.path.join(cls.tmp, 'blobs.csv')
        frame.to_csv(cls.blobs, index=False)
        cls.truth = os.path.join(cls.tmp, 'truth.csv')
        pd.DataFrame({'row': range(len(truth)), 'label': truth}).to_csv(cls.truth, index=False)
        cls.liver = os.path.join(cls.tmp, 'liver.csv')
        liver_frame().to_csv(cls.liver, index=False)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp)

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def call(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            try:
                status = cli.main(list(argv))
            except SystemExit as e:
                status = e.code
        return status, stdout.getvalue()

    def read(self, path):
        with open(path, 'rb') as f:
            return f.read()

    def test_usage(self):
        self.assertEqual(self.call()[0], 1)
        self.assertEqual(self.call('cluster')[0], 1)
        self.assertEqual(self.call('bogus')[0], 1)
        self.assertEqual(self.call('cluster', '--input', self.blobs, '--out', self.path('x.csv'),
                                   '--bogus')[0], 1)
        self.assertEqual(self.call('cluster', '--input', self.blobs, '--out', self.path('x.csv'),
                                   '--k', '0')[0], 1)
        status, out = self.call('--version')
        self.assertEqual(status, 0)
        self.assertIn('ieca-py', out)
        self.assertIn('interface', out)

    def test_cluster(self):
        labels = self.path('cluster', 'labels.csv')
        os.makedirs(os.path.dirname(labels), exist_ok=True)
        argv = ['cluster', '--input', self.blobs, '--k', 'auto', '--seed', '42', '--out', labels,
                '--centroids', self.path('cluster', 'centroids.csv'),
                '--sidecar', self.path('cluster', 'sidecar.json')]
        self.assertEqual(self.call(*argv)[0], 0)
        trace = self.path('cluster', 'trace.csv')
        self.assertTrue(os.path.exists(trace))
        first = self.read(labels), self.read(trace)
        self.assertTrue(first[0].startswith(b'# tool: ieca-py'))

        self.assertEqual(self.call(*argv)[0], 0)
        self.assertEqual((self.read(labels), self.read(trace)), first)

        frame = pd.read_csv(labels, comment='#')
        self.assertEqual(list(frame.columns), ['row', 'label'])
        self.assertEqual(len(frame), 500)
        trace_frame = pd.read_csv(trace, comment='#')
        self.assertEqual(list(trace_frame.columns), ['iter', 'sum_intra', 'min_inter', 'k_live', 'sse'])

        report = self.path('cluster', 'report.json')
        status, _ = self.call('validate', '--input', self.blobs, '--labels', labels,
                              '--truth', self.truth, '--centroids', self.path('cluster', 'centroids.csv'),
                              '--sidecar', self.path('cluster', 'sidecar.json'), '--out', report)
        self.assertEqual(status, 0)
        with open(report, encoding='utf-8') as f:
            d = json.load(f)
        self.assertEqual(d['n'], 500)
        self.assertIn('provenance', d)
        self.assertEqual(len(d['provenance']['inputs'][self.blobs]), 64)

    def test_validate_replays_cleaning(self):
        frame, truth = triangle_blobs(seed=4)
        top = np.flatnonzero(truth == 2)
        frame.loc[int(top[0]), 'x'] = np.nan
        frame.loc[int(top[1]), 'y'] = 40.0
        noisy = self.path('noisy.csv')
        frame.to_csv(noisy, index=False)
        labels, centroids, sidecar = (self.path('noisy', name)
                                      for name in ('labels.csv', 'centroids.csv', 'sidecar.json'))
        status, _ = self.call('cluster', '--data', noisy, '--k', '3', '--seed', '0', '--out', labels,
                              '--centroids', centroids, '--sidecar', sidecar)
        self.assertEqual(status, 0)
        with open(sidecar, encoding='utf-8') as f:
            cleaning = json.load(f)['cleaning']
        self.assertEqual(list(cleaning['fills']), ['x'])
        self.assertEqual(sorted(cleaning['fences']), ['x', 'y'])

        reports = []
        for extra in ([], ['--sidecar', sidecar]):
            report = self.path('noisy', f'report{len(extra)}.json')
            status, _ = self.call('validate', '--labels', labels, '--truth', self.truth,
                                  '--data', noisy, '--centroids', centroids, '--out', report, *extra)
            self.assertEqual(status, 0)
            with open(report, encoding='utf-8') as f:
                reports.append(json.load(f))
        for key in ('accuracy', 'nmi', 'ari', 'nmse', 'dbi'):
            self.assertAlmostEqual(reports[0][key], reports[1][key], delta=1e-9)
        self.assertEqual(reports[1]['n'], 500)

    def test_elbow(self):
        status, out = self.call('elbow', '--input', self.blobs, '--kmax', '8',
                                '--out', self.path('scan.csv'), '--plot', self.path('scan.svg'))
        self.assertEqual(status, 0)
        self.assertIn('chosen_k=3', out)
        self.assertEqual(len(pd.read_csv(self.path('scan.csv'), comment='#')), 8)
        self.assertTrue(os.path.exists(self.path('scan.svg')))

    def test_data_errors(self):
        ragged = self.path('ragged.csv')
        write_lines(ragged, ['a,b', '1,2', '3'])
        self.assertEqual(self.call('summarize', '--input', ragged)[0], 2)
        self.assertEqual(self.call('summarize', '--input', self.path('missing.csv'))[0], 2)
        table_1 = self.path('table_1.csv')
        TABLE_1.to_csv(table_1, index=False)
        self.assertEqual(self.call('cluster', '--input', table_1, '--mode', 'eca',
                                   '--out', self.path('t1.csv'))[0], 2)

    def test_runtime_error(self):
        single = self.path('one_cluster.csv')
        pd.DataFrame({'row': range(500), 'label': 0}).to_csv(single, index=False)
        status, _ = self.call('validate', '--input', self.blobs, '--labels', single,
                              '--truth', self.truth, '--out', self.path('bad.json'))
        self.assertEqual(status, 3)

    def test_summarize(self):
        status, out = self.call('summarize', '--input', self.liver, '--target', 'selector')
        self.assertEqual(status, 0)
        d = json.loads(out)
        self.assertEqual((d['instances'], d['attributes'], d['classes']), (345, 6, 2))

    def test_bench(self):
        external = self.path('external.csv')
        labels = (liver_frame()['selector'] == 1).astype(int)
        pd.DataFrame({'row': range(345), 'label': labels}).to_csv(external, index=False)
        out = self.path('bench')
        status, _ = self.call('bench', '--input', self.liver, '--target', 'selector',
                              '--dataset', 'liver', '--runs', '2', '--iters', '10',
                              '--external', f'Oracle={external}', '--out', out,
                              '--heatmap', self.path('bench.svg'))
        self.assertEqual(status, 0)
        records = load_benchmark(os.path.join(out, 'benchmark.json'))
        self.assertEqual(sorted({r.algorithm for r in records}), ['ECA*', 'Oracle', 'iECA*'])
        with open(os.path.join(out, 'ranks.csv'), encoding='utf-8') as f:
            self.assertEqual(f.readline().strip(), '# tie rule: competition')
        self.assertTrue(os.path.exists(os.path.join(out, 'resources.csv')))
        self.assertTrue(os.path.exists(self.path('bench.svg')))

    def test_rank(self):
        rows = []
        for dataset, ranks in PUBLISHED_RANKS.items():
            for metric, row in zip(Metric, ranks):
                rows.append([dataset, metric.value] + row)
        table = self.path('published.csv')
        pd.DataFrame(rows, columns=['dataset', 'metric'] + ALGORITHMS).to_csv(table, index=False)
        out = self.path('rank')
        status, printed = self.call('rank', '--table', table, '--ranked', '--out', out,
                                    '--heatmap', self.path('rank.svg'))
        self.assertEqual(status, 0)
        self.assertIn('iECA*: 1.12 Green', printed)
        bands = pd.read_csv(os.path.join(out, 'bands.csv'), comment='#', dtype=str)
        self.assertEqual(bands['band'].value_counts().to_dict(), {'Yellow': 5, 'Green': 2, 'Red': 1})
        ranks = pd.read_csv(os.path.join(out, 'ranks.csv'), comment='#', dtype=str)
        averages = ranks[ranks['metric'] == 'Average']
        self.assertEqual(list(averages['SVM']), ['7.40', '7.40', '6.80', '7.20', '6.60'])


if __name__ == '__main__':
    unittest.main()
