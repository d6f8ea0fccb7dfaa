"""Eigendecompositions, numerical rank and Krylov bases, including the
Jacobi kernels themselves."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oversmooth._jacobi import jacobi_eigh, jacobi_singular_values
from oversmooth.errors import ContractError, DomainError
from oversmooth.graphio import build_operator, gen_graph, make_graph
from oversmooth.spectral import (centered_eig, krylov_basis,
                                 krylov_generators, numerical_rank,
                                 subspace_distance, symmetric_eig, top_k)


def _rand_sym(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n))
    return (m + m.T) / 2.0


# ---------------------------------------------------------------- kernels

@pytest.mark.parametrize("n", [1, 2, 5, 20, 60])
def test_jacobi_eigh_reconstruction(n):
    m = _rand_sym(n, n)
    vals, vecs = jacobi_eigh(m)
    assert np.abs(vecs @ np.diag(vals) @ vecs.T - m).max() < 1e-10 * max(
        1.0, np.abs(vals).max())
    assert np.abs(vecs.T @ vecs - np.eye(n)).max() < 1e-10


def test_jacobi_eigh_matches_lapack():
    m = _rand_sym(30, 0)
    vals, _ = jacobi_eigh(m)
    assert np.abs(np.sort(vals) - np.linalg.eigvalsh(m)).max() < 1e-10


def test_jacobi_eigh_edge_cases():
    vals, vecs = jacobi_eigh(np.zeros((3, 3)))
    assert np.array_equal(vals, np.zeros(3))
    vals, vecs = jacobi_eigh(np.empty((0, 0)))
    assert vals.size == 0


def test_jacobi_singular_values_match_lapack():
    rng = np.random.default_rng(1)
    for shape in [(10, 4), (4, 10), (12, 12)]:
        x = rng.normal(size=shape)
        got = jacobi_singular_values(x)
        want = np.linalg.svd(x, compute_uv=False)
        assert np.abs(got - want).max() < 1e-10 * want[0]


def test_jacobi_singular_values_relative_accuracy():
    # graded columns spanning 12 orders of magnitude: one-sided Jacobi
    # keeps the small singular values to relative precision
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(20, 4)))
    scales = np.array([1.0, 1e-4, 1e-8, 1e-12])
    got = jacobi_singular_values(q * scales)
    assert np.abs(got / scales - 1.0).max() < 1e-10


def test_jacobi_singular_values_empty_and_zero():
    assert jacobi_singular_values(np.zeros((3, 0))).size == 0
    assert np.array_equal(jacobi_singular_values(np.zeros((3, 2))),
                          np.zeros(2))


# ----------------------------------------------------------- eigensystems

def test_path3_adjacency_golden():
    es = symmetric_eig(build_operator(gen_graph("path:3"), "adjacency"))
    r2 = np.sqrt(2.0)
    assert np.abs(es.values - np.array([r2, -r2, 0.0])).max() < 1e-10


def test_identity_and_zero():
    es = symmetric_eig(np.eye(4))
    assert np.abs(es.values - 1.0).max() < 1e-12
    es = symmetric_eig(np.zeros((4, 4)))
    assert np.abs(es.values).max() == 0.0


def test_eigensystem_invariants():
    g = gen_graph("er:30,0.2", seed=4)
    a = build_operator(g, "adjacency")
    es = symmetric_eig(a)
    assert es.residuals(a.data).max() < 1e-8 * max(1.0, abs(es.values[0]))
    assert np.abs(es.vectors.T @ es.vectors - np.eye(g.n)).max() < 1e-8
    assert np.all(np.abs(es.values[:-1]) >= np.abs(es.values[1:]) - 1e-9)
    # sign convention: largest-magnitude entry of each column positive
    for i in range(g.n):
        col = es.vectors[:, i]
        assert col[int(np.argmax(np.abs(col)))] >= 0


def test_symmetric_eig_rejects_nonsymmetric():
    with pytest.raises(ContractError):
        symmetric_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_symmetric_eig_deterministic():
    a = build_operator(gen_graph("er:20,0.3", seed=9), "adjacency")
    e1, e2 = symmetric_eig(a), symmetric_eig(a)
    assert np.array_equal(e1.values, e2.values)
    assert np.array_equal(e1.vectors, e2.vectors)


def test_centered_eig_tau0():
    a = build_operator(gen_graph("star:4"), "adjacency")
    es0 = centered_eig(a, 0.0)
    es = symmetric_eig(a)
    assert np.array_equal(es0.values, es.values)


def test_centered_eig_regular_graph():
    # Cycle(4) is regular: centering keeps every eigenpair of A except
    # the all-ones one, whose eigenvalue becomes 0
    a = build_operator(gen_graph("cycle:4"), "adjacency")
    es = symmetric_eig(a)
    esc = centered_eig(a, 1.0)
    want = sorted([0.0] + [v for v in es.values if abs(v - 2.0) > 1e-9],
                  key=lambda v: -abs(v))
    assert np.abs(esc.values - np.array(want)).max() < 1e-9


def test_centered_eig_star4_retains_orthogonal_pairs():
    a = build_operator(gen_graph("star:4"), "adjacency")
    es = symmetric_eig(a)
    centered = a.data - np.outer(np.ones(4), a.data.sum(axis=0)) / 4.0
    for i in range(4):
        nu = es.vectors[:, i]
        if abs(nu @ np.ones(4)) < 1e-12:
            assert np.linalg.norm(centered @ nu - es.values[i] * nu) < 1e-10


def test_centered_eig_residuals_general_tau():
    a = build_operator(gen_graph("er:12,0.4", seed=1), "adjacency")
    tau = 0.7
    es = centered_eig(a, tau)
    n = a.n
    centered = a.data - (tau / n) * np.outer(np.ones(n), a.data.sum(axis=0))
    assert es.residuals(centered).max() < 1e-8


def test_centered_eig_tau1_eigvectors_orthogonal_to_kernel_dir():
    a = build_operator(gen_graph("er:10,0.5", seed=0), "adjacency")
    es = centered_eig(a, 1.0)
    n = a.n
    centered = a.data - np.outer(np.ones(n), a.data.sum(axis=0)) / n
    assert es.residuals(centered).max() < 1e-8
    # exactly one (numerically) zero eigenvalue from the kernel direction
    assert np.sum(np.abs(es.values) < 1e-9) >= 1


def test_top_k():
    es = symmetric_eig(np.eye(3))
    assert top_k(es, 2).shape == (3, 2)
    assert top_k(es, 0).shape == (3, 0)
    with pytest.raises(DomainError):
        top_k(es, 4)


# --------------------------------------------------------- numerical rank

def test_numerical_rank_goldens():
    assert numerical_rank(np.zeros((4, 3))) == 0
    v = np.array([1.0, 2.0, 3.0])
    assert numerical_rank(np.stack([v, 2 * v], axis=1)) == 1
    rng = np.random.default_rng(0)
    assert numerical_rank(rng.normal(size=(20, 6))) == 6
    with pytest.raises(DomainError):
        numerical_rank(np.eye(2), rel_tol=0.0)


def test_numerical_rank_column_scaling():
    # rank survives column scaling while it stays above the relative
    # threshold (rel_tol * sigma_max * max(n, k))
    rng = np.random.default_rng(5)
    x = rng.normal(size=(15, 4))
    scaled = x * np.array([1.0, 1e-4, 1e4, 1e-2])
    assert numerical_rank(scaled) == 4
    # a column below the threshold no longer counts
    far = x * np.array([1.0, 1e-16, 1.0, 1.0])
    assert numerical_rank(far) == 3


# ------------------------------------------------------------- projections

def test_subspace_distance_goldens():
    basis = np.eye(4)[:, :2]
    inside = basis @ np.array([[1.0, 2.0], [3.0, 4.0]])
    assert subspace_distance(inside, basis) == 0.0
    ortho = np.zeros((4, 1))
    ortho[3, 0] = 1.0
    assert abs(subspace_distance(ortho, basis) - 0.25) < 1e-14
    es = symmetric_eig(_rand_sym(8, 3))
    x = np.random.default_rng(3).normal(size=(8, 5))
    assert subspace_distance(x, es.vectors) < 1e-8
    with pytest.raises(ContractError):
        subspace_distance(x, np.ones((8, 2)))


# -------------------------------------------------------------- Krylov

def test_krylov_identity():
    a = build_operator(make_graph(3, [(i, i, 1.0) for i in range(3)]),
                       "adjacency")
    assert np.array_equal(a.data, np.eye(3))
    e1 = np.eye(3)[:, :1]
    kb = krylov_basis(a, e1)
    assert kb.r == 1
    assert np.abs(np.abs(kb.basis[:, 0]) - e1[:, 0]).max() < 1e-12


def test_krylov_path3():
    a = build_operator(gen_graph("path:3"), "adjacency")
    kb = krylov_basis(a, np.eye(3)[:, :1])
    assert kb.r == 3
    assert np.abs(kb.basis.T @ kb.basis - np.eye(3)).max() < 1e-10


def test_krylov_zero_and_generators():
    a = build_operator(gen_graph("path:3"), "adjacency")
    assert krylov_basis(a, np.zeros((3, 1))).r == 0
    gen = krylov_generators(a, np.eye(3)[:, :1])
    assert gen.shape == (3, 3)
    assert np.array_equal(gen[:, 1], a.data @ gen[:, 0])


def test_krylov_invariance():
    a = build_operator(gen_graph("er:10,0.4", seed=6), "adjacency")
    x0 = np.random.default_rng(6).normal(size=(10, 2))
    kb = krylov_basis(a, x0)
    # maximal subspace is A-invariant
    img = a.data @ kb.basis
    resid = img - kb.basis @ (kb.basis.T @ img)
    assert np.abs(resid).max() < 1e-7 * max(1.0, np.abs(img).max())


# ------------------------------------------------------ property tests

@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(0, 10**6))
def test_eig_reconstruction_property(n, seed):
    m = _rand_sym(n, seed)
    es = symmetric_eig(m)
    assert abs(np.sum(es.values) - np.trace(m)) < 1e-8 * max(
        1.0, abs(np.trace(m)))
    assert es.residuals(m).max() < 1e-8 * max(1.0, np.abs(es.values).max())
