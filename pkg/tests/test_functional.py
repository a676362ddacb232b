"""Builtin matrix functionals, their derivatives, and spectral machinery."""
from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from volfn import (
    ClusterSpec,
    ConfigError,
    DataError,
    DegeneracyError,
    DomainError,
    builtin,
    eig_sorted,
    eigenvalue_functional,
    eigenvector_functional,
    fd_check,
)

from helpers import rng, spd_with_spectrum

# --------------------------------------------------------------------------
# builtin values and derivatives in closed form


def test_trace():
    f = builtin("trace", 3)
    c = np.diag([1.0, 2.0, 3.0])
    assert f.r_out == 1
    assert_allclose(f.value(c), [6.0])
    assert_allclose(f.gradient(c), np.eye(3)[None])
    assert_array_equal(f.hessian(c), np.zeros((1, 3, 3, 3, 3)))


def test_entry():
    f = builtin("entry", 2, j=0, k=1)
    c = np.array([[1.0, 0.3], [0.3, 2.0]])
    assert_allclose(f.value(c), [0.3])
    want = np.zeros((1, 2, 2))
    want[0, 0, 1] = 1.0
    assert_array_equal(f.gradient(c), want)
    with pytest.raises(ConfigError):
        builtin("entry", 2, j=0, k=5)


def test_square():
    f = builtin("square", 2)
    c = np.array([[1.0, 0.5], [0.5, 2.0]])
    assert_allclose(f.value(c), [np.trace(c @ c)])
    assert_allclose(f.gradient(c), 2.0 * c.T[None])
    hess = f.hessian(c)
    # H[0, j, k, l, m] = 2 delta_jm delta_kl
    for j in range(2):
        for k in range(2):
            for l_ in range(2):
                for m in range(2):
                    want = 2.0 if (j == m and k == l_) else 0.0
                    assert hess[0, j, k, l_, m] == want


def test_square_scalar_case():
    f = builtin("square", 1)
    assert_allclose(f.value(np.array([[3.0]])), [9.0])
    assert_allclose(f.gradient(np.array([[3.0]])), [[[6.0]]])


def test_log_scalar_only():
    f = builtin("log", 1)
    c = np.array([[2.0]])
    assert_allclose(f.value(c), [np.log(2.0)])
    assert_allclose(f.gradient(c), [[[0.5]]])
    assert_allclose(f.hessian(c), [[[[[-0.25]]]]])
    assert f.domain_guard > 0.0
    with pytest.raises(DomainError):
        f.value(np.array([[-1.0]]))
    with pytest.raises(ConfigError):
        builtin("log", 2)


def test_logdet():
    f = builtin("logdet", 2)
    c = np.array([[2.0, 0.0], [0.0, 3.0]])
    assert_allclose(f.value(c), [np.log(6.0)])
    assert_allclose(f.gradient(c), np.linalg.inv(c).T[None])
    with pytest.raises(DomainError):
        f.value(np.diag([1.0, -1.0]))


def test_laplace_scalar_pair():
    w = 1.7
    f = builtin("laplace", 1, w=w)
    c = np.array([[0.8]])
    assert f.r_out == 2
    assert_allclose(f.value(c), [np.cos(w * 0.8), np.sin(w * 0.8)])
    assert_allclose(
        f.gradient(c), [[[-w * np.sin(w * 0.8)]], [[w * np.cos(w * 0.8)]]]
    )
    with pytest.raises(ConfigError):
        builtin("laplace", 1, w=0.0)


def test_laplace_matrix_is_trace_transform():
    w = 0.9
    f = builtin("laplace", 3, w=w)
    gen = rng(0)
    c = spd_with_spectrum(gen, [3.0, 1.4, 0.5])
    lam = np.linalg.eigvalsh(c)
    assert_allclose(
        f.value(c), [np.cos(w * lam).sum(), np.sin(w * lam).sum()], rtol=1e-12
    )


def test_beta_closed_form():
    f = builtin("beta", 2, split=1)
    a, b, s = 2.0, 0.6, 1.5
    c = np.array([[a, b], [b, s]])
    assert_allclose(f.value(c), [b / a])
    grad = f.gradient(c)
    assert_allclose(grad[0, 0, 0], -b / a**2)
    assert_allclose(grad[0, 0, 1], 1.0 / a)
    assert grad[0, 1, 1] == 0.0
    assert f.domain_guard > 0.0
    with pytest.raises(ConfigError):
        builtin("beta", 2, split=0)
    with pytest.raises(ConfigError):
        builtin("beta", 2, split=2)


def test_beta_output_layout():
    # d = 3, split = 1: g = (c01/c00, c02/c00), row-major
    f = builtin("beta", 3, split=1)
    c = np.array([[2.0, 0.4, 0.8], [0.4, 1.5, 0.1], [0.8, 0.1, 1.2]])
    assert f.r_out == 2
    assert_allclose(f.value(c), [0.2, 0.4])


def test_builtin_dispatch_errors():
    with pytest.raises(ConfigError):
        builtin("warp", 2)
    with pytest.raises(ConfigError):
        builtin("trace", 0)
    with pytest.raises(ConfigError):
        builtin("entry", 2)  # missing j, k
    with pytest.raises(ConfigError):
        builtin("laplace", 2)  # missing w


def test_domain_checks():
    f = builtin("logdet", 2)
    near_singular = np.diag([1.0, 1e-12])
    with pytest.raises(DomainError):
        f.check_domain(near_singular)
    ok = np.diag([1.0, 0.5])
    f.check_domain(ok)  # no raise
    entire = builtin("trace", 2)
    assert entire.domain_guard == 0.0


# --------------------------------------------------------------------------
# finite-difference verification of every builtin


@pytest.mark.parametrize(
    "name,params",
    [
        ("trace", {}),
        ("entry", {"j": 0, "k": 1}),
        ("entry", {"j": 1, "k": 1}),
        ("square", {}),
        ("logdet", {}),
        ("laplace", {"w": 1.3}),
        ("beta", {"split": 1}),
    ],
)
def test_fd_check_matrix_builtins(name, params):
    gen = rng(17)
    c = spd_with_spectrum(gen, [2.5, 1.2, 0.6])
    f = builtin(name, 3, **params) if name != "beta" else builtin(name, 3, **params)
    errs = fd_check(f, c)
    assert errs["gradient"] < 1e-6
    assert errs["hessian"] < 1e-3


@pytest.mark.parametrize(
    "name,params",
    [("square", {}), ("log", {}), ("laplace", {"w": 0.7})],
)
def test_fd_check_scalar_builtins(name, params):
    f = builtin(name, 1, **params)
    errs = fd_check(f, np.array([[0.7]]))
    assert errs["gradient"] < 1e-6
    assert errs["hessian"] < 1e-3


# --------------------------------------------------------------------------
# sorted eigendecomposition


def test_eig_sorted_descending_and_sign():
    c = np.diag([1.0, 5.0, 3.0])
    lam, q = eig_sorted(c)
    assert_allclose(lam, [5.0, 3.0, 1.0])
    # eigenvectors are +/- basis vectors; sign rule makes them + exactly
    assert_allclose(np.abs(q), np.eye(3)[:, [1, 2, 0]], atol=1e-15)
    assert (q.max(axis=0) > 0).all()


def test_eig_sorted_sign_rule_flips_negative_lead():
    # force an eigenvector whose naturally-computed lead entry is negative
    v = np.array([-0.8, 0.6])
    c = 2.0 * np.outer(v, v) + np.eye(2)
    lam, q = eig_sorted(c)
    lead = np.argmax(np.abs(q[:, 0]))
    assert q[lead, 0] > 0.0
    assert_allclose(c @ q[:, 0], lam[0] * q[:, 0], atol=1e-12)


def test_eig_sorted_rejects_asymmetric():
    with pytest.raises(DataError):
        eig_sorted(np.array([[1.0, 0.2], [0.0, 1.0]]))


# --------------------------------------------------------------------------
# cluster specs


def test_cluster_spec_basics():
    cs = ClusterSpec((1, 1, 8))
    assert cs.d == 10
    assert cs.n_clusters == 3
    assert cs.boundaries == (0, 1, 2, 10)
    with pytest.raises(ConfigError):
        ClusterSpec(())
    with pytest.raises(ConfigError):
        ClusterSpec((1, 0, 2))


# --------------------------------------------------------------------------
# eigenvalue functional


def test_eigenvalue_functional_values_and_gradient():
    f = eigenvalue_functional(ClusterSpec((1, 1)))
    c = np.diag([3.0, 1.0])
    assert_allclose(f.value(c), [3.0, 1.0])
    grad = f.gradient(c)
    assert_allclose(grad[0], np.outer([1, 0], [1, 0]), atol=1e-15)
    assert_allclose(grad[1], np.outer([0, 1], [0, 1]), atol=1e-15)


def test_eigenvalue_functional_hessian_closed_form():
    f = eigenvalue_functional(ClusterSpec((1, 1)))
    hess = f.hessian(np.diag([3.0, 1.0]))
    # top eigenvalue: H[0, 0, 1, 0, 1] = 1/(lam_0 - lam_1) = 1/2
    assert_allclose(hess[0, 0, 1, 0, 1], 0.5)
    assert_allclose(hess[0, 1, 0, 1, 0], 0.5)
    assert hess[0, 0, 0, 0, 0] == 0.0
    # bottom eigenvalue mirrors with the opposite gap sign
    assert_allclose(hess[1, 0, 1, 0, 1], -0.5)


def test_eigenvalue_cluster_mean_and_projector():
    gen = rng(1)
    c = spd_with_spectrum(gen, [4.0, 2.5, 2.5 - 1e-12, 0.5])
    # sizes (1, 2, 1): the tied pair lives inside one cluster - no error
    f = eigenvalue_functional(ClusterSpec((1, 2, 1)))
    vals = f.value(c)
    assert_allclose(vals, [4.0, 2.5, 0.5], rtol=1e-9)
    # cluster gradient is the average spectral projector: trace = 1
    grad = f.gradient(c)
    assert_allclose([np.trace(g) for g in grad], [1.0, 1.0, 1.0], rtol=1e-12)
    # projector PSD with rank = cluster size
    eigs = np.linalg.eigvalsh(grad[1])
    assert eigs.min() > -1e-12


def test_eigenvalue_cluster_sum_is_trace():
    gen = rng(2)
    c = spd_with_spectrum(gen, [5.0, 3.0, 1.0])
    f = eigenvalue_functional(ClusterSpec((1, 1, 1)))
    assert_allclose(f.value(c).sum(), np.trace(c), rtol=1e-12)


def test_eigenvalue_degenerate_boundary_raises():
    f = eigenvalue_functional(ClusterSpec((1, 1)))
    with pytest.raises(DegeneracyError):
        f.value(np.diag([1.0, 1.0]))
    whole = eigenvalue_functional(ClusterSpec((2,)))
    assert_allclose(whole.value(np.diag([1.0, 1.0])), [1.0])


def test_eigenvalue_fd_check():
    gen = rng(3)
    c = spd_with_spectrum(gen, [5.0, 3.0, 1.0])
    f = eigenvalue_functional(ClusterSpec((1, 1, 1)))
    errs = fd_check(f, c)
    assert errs["gradient"] < 1e-6
    assert errs["hessian"] < 1e-3
    grouped = eigenvalue_functional(ClusterSpec((1, 2)))
    errs = fd_check(grouped, c)
    assert errs["gradient"] < 1e-6
    assert errs["hessian"] < 1e-3


def test_eigenvalue_mismatched_dimension():
    f = eigenvalue_functional(ClusterSpec((1, 1)))
    with pytest.raises(DataError):
        f.value(np.eye(3))


# --------------------------------------------------------------------------
# eigenvector functional


def test_eigenvector_value_and_gradient_closed_form():
    f = eigenvector_functional(0, 2)
    c = np.diag([3.0, 1.0])
    assert_allclose(f.value(c), [1.0, 0.0])
    grad = f.gradient(c)  # shape (2, 2, 2); contract with E01 + E10
    contracted = grad[:, 0, 1] + grad[:, 1, 0]
    assert_allclose(contracted, [0.0, 0.5], atol=1e-15)
    # diagonal perturbations leave a (normalized) eigenvector unchanged
    assert_allclose(grad[:, 0, 0], 0.0, atol=1e-15)
    assert_allclose(grad[:, 1, 1], 0.0, atol=1e-15)


def test_eigenvector_k_range_and_degeneracy():
    with pytest.raises(ConfigError):
        eigenvector_functional(2, 2)
    with pytest.raises(ConfigError):
        eigenvector_functional(-1, 2)
    f = eigenvector_functional(0, 2)
    with pytest.raises(DegeneracyError):
        f.value(np.diag([2.0, 2.0]))


def test_eigenvector_lower_index_fd():
    gen = rng(4)
    c = spd_with_spectrum(gen, [4.0, 2.0, 0.7])
    for k in range(3):
        f = eigenvector_functional(k, 3)
        errs = fd_check(f, c)
        assert errs["gradient"] < 1e-6, k
        assert errs["hessian"] < 1e-3, k


def test_eigenvector_value_matches_eig_sorted():
    gen = rng(5)
    c = spd_with_spectrum(gen, [4.0, 2.0, 0.7])
    _, q = eig_sorted(c)
    for k in range(3):
        f = eigenvector_functional(k, 3)
        assert_allclose(f.value(c), q[:, k], atol=1e-12)
