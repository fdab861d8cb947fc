import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import pdist

from demandshift import kernels

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def _rows(seed, n=60):
    return np.random.default_rng(seed).normal(size=(n, 5))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_distance_matrix(backend):
    X = _rows(0, 30)
    D = kernels.get_backend(backend).cosine_distance_matrix(X, 1)
    ref = 1 - (X @ X.T) / np.outer(np.linalg.norm(X, axis=1), np.linalg.norm(X, axis=1))
    assert np.allclose(D, ref, atol=1e-12)
    assert np.array_equal(D, D.T) and (np.diag(D) == 0).all()


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_heights_match_scipy(backend):
    for seed in range(5):
        X = _rows(seed)
        Z = kernels.get_backend(backend).average_linkage(kernels.get_backend(backend).cosine_distance_matrix(X, 1))
        ref = linkage(pdist(X, "cosine"), "average")
        assert np.allclose(np.sort(Z[:, 2]), np.sort(ref[:, 2]), rtol=1e-10)
        assert np.array_equal(np.sort(Z[:, 3]), np.sort(ref[:, 3]))


@needs_ext
def test_backends_bit_identical():
    for seed in range(10):
        X = _rows(seed, 120)
        Dp = py.cosine_distance_matrix(X, 1)
        Dc = cy.cosine_distance_matrix(X, 4)
        assert np.array_equal(Dp, Dc)
        assert np.array_equal(py.average_linkage(Dp), cy.average_linkage(Dc))


@needs_ext
def test_backends_agree_on_ties():
    # repeated rows force equal-distance merges; the tie-break must match
    X = np.repeat(np.eye(5)[:3] + 0.1, 4, axis=0)
    assert np.array_equal(py.average_linkage(py.cosine_distance_matrix(X, 1)),
                          cy.average_linkage(cy.cosine_distance_matrix(X, 1)))


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_thread_count_does_not_change_matrix(backend):
    impl = kernels.get_backend(backend)
    X = _rows(7, 200)
    assert np.array_equal(impl.cosine_distance_matrix(X, 1), impl.cosine_distance_matrix(X, 8))


def test_tie_break_prefers_smallest_pair():
    D = np.ones((4, 4)) - np.eye(4)
    Z = py.average_linkage(D)
    assert Z[0, :2].tolist() == [0, 1]


def test_env_override_selects_fallback():
    env = dict(os.environ, DEMANDSHIFT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import demandshift.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_script_runs():
    import runpy
    from pathlib import Path

    bench = runpy.run_path(str(Path(__file__).parents[1] / "benchmarks" / "bench_linkage.py"))
    rows = bench["run"]([40, 80], 1, 2, 0)
    assert {r[0] for r in rows} == {40, 80}
