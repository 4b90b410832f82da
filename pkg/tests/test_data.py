import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from wwa.data import (
    IRIS_COLUMNS,
    chorded_cycle,
    cycle_precision,
    gen_bench_graph,
    gen_cycle_dataset,
    gen_model_dataset,
    iris_virginica,
    load_matrix_csv,
    load_truth,
    mvn_sample,
    parse_graph_kind,
    quantile_normalize,
    save_dataset,
)
from wwa.graph import Graph


def test_cycle_dataset():
    ds = gen_cycle_dataset(10, np.random.default_rng(0))
    assert ds.Y.shape == (15, 10)
    K = ds.K_true
    assert np.linalg.eigvalsh(K).min() > 0
    assert ds.graph == Graph.cycle(10) and ds.graph.n_edges == 10
    assert np.all(np.diag(K) == 1.0)
    assert all(K[i, i + 1] == 0.5 for i in range(9))
    assert K[0, 9] == 0.4
    assert np.all(K[~ds.graph.adj & ~np.eye(10, dtype=bool)] == 0.0)

    with pytest.raises(ValueError):
        gen_cycle_dataset(2)


@pytest.mark.parametrize("p", [3, 10, 20, 40, 100])
def test_cycle_precision_is_pd(p):
    assert np.linalg.eigvalsh(cycle_precision(p)).min() > 0


def test_model_dataset():
    ds = gen_model_dataset(6, 3.0, np.random.default_rng(1))
    assert ds.Y.shape == (12, 6)
    off = ~ds.graph.adj & ~np.eye(6, dtype=bool)
    assert np.all(ds.K_true[off] == 0.0)
    assert np.linalg.eigvalsh(ds.K_true).min() > 0
    again = gen_model_dataset(6, 3.0, np.random.default_rng(1))
    assert np.array_equal(ds.Y, again.Y) and ds.graph == again.graph


def test_model_dataset_edge_count():
    rng = np.random.default_rng(2)
    counts = np.array([gen_model_dataset(5, 3.0, rng).graph.n_edges for _ in range(400)])
    # Binomial(10, 1/2): mean 5, variance 2.5.
    assert abs(counts.mean() - 5.0) < 3 * np.sqrt(2.5 / len(counts))


def test_bench_graphs():
    G = chorded_cycle(10)
    assert G.n_edges == 17
    assert gen_bench_graph("chorded-cycle", 10) == G
    expected = {(i, i + 1) for i in range(9)} | {(0, 9)} | {(0, i) for i in range(2, 9)}
    assert set(G.edges()) == expected

    rng = np.random.default_rng(3)
    p = 12
    counts = [gen_bench_graph("er:%r" % (2 / (p - 1)), p, rng).n_edges for _ in range(400)]
    assert abs(np.mean(counts) - p) < 3 * np.sqrt(p / 400)
    counts = [gen_bench_graph("er:0.5", p, rng).n_edges for _ in range(400)]
    assert abs(np.mean(counts) - 33) < 3 * np.sqrt(66 * 0.25 / 400)

    for bad in ("ring", "er:x", "er:1.5"):
        with pytest.raises(ValueError):
            parse_graph_kind(bad)

    with pytest.raises(ValueError):
        chorded_cycle(3)


def test_mvn_sample_moments():
    K = np.array([[2.0, 0.6, 0.0], [0.6, 1.0, 0.3], [0.0, 0.3, 1.5]])
    n = 100000
    X = mvn_sample(n, K, np.random.default_rng(4))
    S = np.linalg.inv(K)
    assert np.all(np.abs(X.mean(axis=0)) < 4 * np.sqrt(np.diag(S) / n))
    se = np.sqrt((S**2 + np.outer(np.diag(S), np.diag(S))) / n)
    assert np.all(np.abs(np.cov(X.T, bias=True) - S) < 3 * se + 1e-12)
    assert np.array_equal(mvn_sample(5, K, np.random.default_rng(7)), mvn_sample(5, K, np.random.default_rng(7)))

    with pytest.raises(np.linalg.LinAlgError):
        mvn_sample(3, np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_quantile_normalize_examples():
    n = 6
    grid = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    assert np.allclose(quantile_normalize(np.arange(n, dtype=float)), grid)
    x = np.array([3.0, 1.0, 1.0, 7.0])
    out = quantile_normalize(x)
    # Ranks 3, 1.5, 1.5, 4.
    assert out[1] == out[2] == pytest.approx(norm.ppf((1.5 - 0.5) / 4))
    assert out[0] == pytest.approx(norm.ppf(2.5 / 4))

    with pytest.raises(ValueError):
        quantile_normalize(np.array([[1.0, 2.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 50), st.integers(0, 10**6))
def test_quantile_normalize_properties(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    out = quantile_normalize(X)
    grid = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    assert np.allclose(np.sort(out, axis=0), grid[:, None])
    assert np.array_equal(np.argsort(out, axis=0), np.argsort(X, axis=0))
    perm = rng.permutation(n)
    assert np.allclose(quantile_normalize(X[perm]), out[perm])
    assert np.allclose(quantile_normalize(out), out)


def test_load_matrix_csv(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2\n3,4\n")
    assert np.array_equal(load_matrix_csv(f).Y, [[1, 2], [3, 4]])
    h = tmp_path / "h.csv"
    h.write_text("x,y\n1,2\n3,5\n")
    ds = load_matrix_csv(h, demean=True)
    assert ds.columns == ("x", "y")
    assert np.all(np.abs(ds.Y.mean(axis=0)) < 1e-12)

    r = tmp_path / "r.csv"
    r.write_text("1,2\n3\n")

    with pytest.raises(ValueError, match="row 2"):
        load_matrix_csv(r)

    c = tmp_path / "c.csv"
    c.write_text("1,2\n3,oops\n")

    with pytest.raises(ValueError, match="row 2, column 2"):
        load_matrix_csv(c)


def test_truth_round_trip(tmp_path):
    ds = gen_model_dataset(7, 3.0, np.random.default_rng(5))
    path = tmp_path / "d.csv"
    save_dataset(ds, path)
    assert np.array_equal(load_matrix_csv(path).Y, ds.Y)
    G, K = load_truth(path)
    assert G == ds.graph
    assert np.array_equal(K, ds.K_true)


def test_iris_fixture():
    ds = iris_virginica()
    assert ds.Y.shape == (50, 4)
    assert ds.columns == IRIS_COLUMNS
    assert ds.Y[:, 2].mean() == pytest.approx(5.552)
