"""Realized eigenvalue/eigenvector estimators on hand-built spot series.

With an explicit integer plan the correction scale collapses to
2 (l_n / k_n) Phi00 / phi_0(0)^2 (the delta_n powers cancel against
theta_eff), so every factor below is exact fraction arithmetic.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from volfn import (
    ClusterSpec,
    DataError,
    DegeneracyError,
    SpotVolSeries,
    realized_eigenvalues,
    realized_eigenvectors,
)
from volfn.pca import window_spectra
from volfn.sim import FactorModelParams, McStudy, run_mc
from volfn.spot import TuningPlan

from helpers import explicit_plan, rng, spd_with_spectrum

RATIO = 151.0 / 560.0  # Phi00 / phi_0(0)^2 for the tent profile
DELTA_N = 1e-4


def _plan(l_n=4, k_n=20, delta=0.2):
    return explicit_plan(mode="tilde", l_n=l_n, k_n=k_n, m_n=3, delta=delta)


def _spot(c_list, plan=None, kind="tilde"):
    plan = _plan() if plan is None else plan
    c = np.asarray(c_list, dtype=float)
    return SpotVolSeries(
        c_mats=c,
        gamma_mats=np.zeros_like(c),
        N_t=c.shape[0],
        a_t=1.0,
        kind=kind,
        delta_n=DELTA_N,
        plan=plan,
        kept_counts=np.full(c.shape[0], plan.k_n - plan.l_n + 1),
    )


def _rot(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


# --------------------------------------------------------------------------
# eigenvalues: closed forms


def test_eigenvalue_singleton_closed_form():
    spot = _spot([np.diag([5.0, 2.0, 1.0])])
    cluster = ClusterSpec((1, 1, 1))
    corr = 2.0 * (4.0 / 20.0) * RATIO
    block = 20 * DELTA_N

    out = realized_eigenvalues(spot, cluster)
    f0 = 1.0 - corr * (2.0 / 3.0 + 1.0 / 4.0)
    f1 = 1.0 - corr * (5.0 / (2.0 - 5.0) + 1.0 / (2.0 - 1.0))
    f2 = 1.0 - corr * (5.0 / (1.0 - 5.0) + 2.0 / (1.0 - 2.0))
    assert_allclose(
        out.eigenvalues, block * np.array([5 * f0, 2 * f1, 1 * f2]), rtol=1e-6
    )
    theta = 4 * DELTA_N**0.7
    var_scale = 4.0 * theta * RATIO
    assert_allclose(
        out.avar_values, var_scale * block * np.array([25.0, 4.0, 1.0]), rtol=1e-6
    )
    assert out.excluded == 0
    assert out.N_t == 1
    assert out.cluster is cluster
    assert out.rate_scale == pytest.approx(DELTA_N**0.3)

    plain = realized_eigenvalues(spot, cluster, bias_correction=False)
    assert_allclose(plain.eigenvalues, block * np.array([5.0, 2.0, 1.0]), rtol=1e-12)
    assert_allclose(plain.avar_values, out.avar_values)


def test_eigenvalue_cluster_mean_closed_form():
    spot = _spot([np.diag([5.0, 2.0, 1.0])])
    cluster = ClusterSpec((1, 2))
    corr = 2.0 * (4.0 / 20.0) * RATIO
    block = 20 * DELTA_N

    out = realized_eigenvalues(spot, cluster)
    lam_bar = 1.5
    f1 = 1.0 - corr * (5.0 / (lam_bar - 5.0))
    assert_allclose(out.eigenvalues[1], block * f1 * lam_bar, rtol=1e-6)
    theta = 4 * DELTA_N**0.7
    assert_allclose(
        out.avar_values[1], 4.0 * theta * RATIO / 2.0 * block * lam_bar**2, rtol=1e-6
    )


def test_eigenvalue_window_sum_and_trace_identity():
    gen = rng(10)
    mats = [
        spd_with_spectrum(gen, [3.0 + 0.05 * h, 1.7, 0.6]) for h in range(6)
    ]
    spot = _spot(mats)
    out = realized_eigenvalues(spot, ClusterSpec((1, 1, 1)), bias_correction=False)
    block = 20 * DELTA_N
    assert_allclose(
        float(np.sum(out.eigenvalues)),
        block * sum(np.trace(m) for m in mats),
        rtol=1e-12,
    )


def test_eigenvalue_whole_spectrum_cluster_ignores_ties():
    spot = _spot([2.0 * np.eye(3)])
    out = realized_eigenvalues(spot, ClusterSpec((3,)))
    # no outside eigenvalues: correction factor is one even for tied spectra
    assert_allclose(out.eigenvalues, [20 * DELTA_N * 2.0], rtol=1e-12)
    assert out.excluded == 0


def test_eigenvalue_gap_veto_counts_and_skips():
    clean = [np.diag([5.0 + 0.1 * h, 2.0, 1.0]) for h in range(20)]
    tied = np.diag([3.0, 3.0 - 1e-9, 1.0])
    full = realized_eigenvalues(_spot(clean + [tied]), ClusterSpec((1, 1, 1)))
    ref = realized_eigenvalues(_spot(clean), ClusterSpec((1, 1, 1)))
    assert full.excluded == 1
    assert ref.excluded == 0
    assert_allclose(full.eigenvalues, ref.eigenvalues, rtol=1e-12)
    assert_allclose(full.avar_values, ref.avar_values, rtol=1e-12)


def test_eigenvalue_budget_exceeded():
    tied = np.diag([3.0, 3.0 - 1e-9])
    with pytest.raises(DegeneracyError, match="budget"):
        realized_eigenvalues(_spot([tied]), ClusterSpec((1, 1)))


def test_eigenvalue_input_validation():
    spot_hat = _spot([np.diag([3.0, 1.0])], kind="hat")
    with pytest.raises(DataError, match="tilde"):
        realized_eigenvalues(spot_hat, ClusterSpec((1, 1)))
    spot = _spot([np.diag([3.0, 1.0])])
    with pytest.raises(DataError, match="cluster"):
        realized_eigenvalues(spot, ClusterSpec((1, 1, 1)))
    empty = _spot(np.zeros((0, 2, 2)))
    with pytest.raises(DataError, match="empty"):
        realized_eigenvalues(empty, ClusterSpec((1, 1)))


# --------------------------------------------------------------------------
# eigenvectors: closed forms


def test_eigenvector_closed_form():
    q = _rot(0.3)
    c = q @ np.diag([3.0, 1.0]) @ q.T
    spot = _spot([c])
    corr_half = (4.0 / 20.0) * RATIO
    block = 20 * DELTA_N

    out = realized_eigenvectors(spot, 0)
    factor = 1.0 + corr_half * (3.0 * 1.0 / (3.0 - 1.0) ** 2)
    assert_allclose(out.eigenvector, block * factor * q[:, 0], rtol=1e-6)
    theta = 4 * DELTA_N**0.7
    want_avar = 2.0 * theta * RATIO * block * 0.75 * np.outer(q[:, 1], q[:, 1])
    assert_allclose(out.avar_vector, want_avar, rtol=1e-6, atol=1e-18)
    assert out.k == 0
    assert out.eigenvalues is None

    plain = realized_eigenvectors(spot, 0, bias_correction=False)
    assert_allclose(plain.eigenvector, block * q[:, 0], rtol=1e-12)
    assert_allclose(plain.avar_vector, want_avar, rtol=1e-6, atol=1e-18)


def test_eigenvector_sign_chain_follows_rotation():
    # quarter-turn-per-window rotation of a fixed spectrum; the naive
    # per-window sign rule flips once the leading entry goes negative, but
    # the inner-product chain must track the moving frame continuously
    angles = [h * np.pi / 19 for h in range(20)]
    mats = [_rot(t) @ np.diag([3.0, 1.0]) @ _rot(t).T for t in angles]
    mats.insert(10, 2.0 * np.eye(2))  # tied window: excluded, chain skips it
    spot = _spot(mats)
    out = realized_eigenvectors(spot, 0, bias_correction=False)
    assert out.excluded == 1
    block = 20 * DELTA_N
    want = block * np.array(
        [sum(np.cos(t) for t in angles), sum(np.sin(t) for t in angles)]
    )
    assert abs(want[0]) < 1e-12  # the cosines cancel pairwise by symmetry
    assert_allclose(out.eigenvector, want, atol=1e-12)
    # a sign-rule-only sum would have every x-component non-negative
    naive_x = block * sum(abs(np.cos(t)) for t in angles)
    assert abs(out.eigenvector[0]) < 0.1 * naive_x


def test_eigenvector_budget_and_validation():
    tied = np.diag([3.0, 3.0 - 1e-9])
    with pytest.raises(DegeneracyError, match="budget"):
        realized_eigenvectors(_spot([tied]), 0)
    spot = _spot([np.diag([3.0, 1.0])])
    with pytest.raises(DataError, match="range"):
        realized_eigenvectors(spot, 2)
    with pytest.raises(DataError, match="range"):
        realized_eigenvectors(spot, -1)
    with pytest.raises(DataError, match="tilde"):
        realized_eigenvectors(_spot([np.diag([3.0, 1.0])], kind="hat"), 0)


def test_gap_tol_widening_excludes_more_windows():
    # the same spectrum passes the default tolerance but fails a wide one
    mats = [np.diag([5.0 + 0.01 * h, 4.9, 1.0]) for h in range(21)]
    spot = _spot(mats)
    out = realized_eigenvalues(spot, ClusterSpec((1, 2)))
    assert out.excluded == 0
    with pytest.raises(DegeneracyError):
        realized_eigenvalues(spot, ClusterSpec((1, 2)), gap_tol=0.05)


# --------------------------------------------------------------------------
# structural invariances


def test_permutation_equivariance():
    gen = rng(11)
    mats = np.stack(
        [spd_with_spectrum(gen, [4.0 + 0.1 * h, 2.0, 0.9, 0.3]) for h in range(5)]
    )
    perm = np.eye(4)[[2, 0, 3, 1]]
    spot = _spot(mats)
    spot_p = _spot(np.einsum("ab,hbc,dc->had", perm, mats, perm))

    vals = realized_eigenvalues(spot, ClusterSpec((1, 1, 2)))
    vals_p = realized_eigenvalues(spot_p, ClusterSpec((1, 1, 2)))
    assert_allclose(vals_p.eigenvalues, vals.eigenvalues, rtol=1e-10)
    assert_allclose(vals_p.avar_values, vals.avar_values, rtol=1e-10)

    vec = realized_eigenvectors(spot, 1)
    vec_p = realized_eigenvectors(spot_p, 1)
    assert_allclose(vec_p.eigenvector, perm @ vec.eigenvector, rtol=1e-9, atol=1e-12)
    assert_allclose(
        vec_p.avar_vector, perm @ vec.avar_vector @ perm.T, rtol=1e-9, atol=1e-15
    )


def test_window_spectra_reconstructs_input():
    gen = rng(12)
    mats = np.stack([spd_with_spectrum(gen, [3.0, 1.5, 0.4]) for _ in range(4)])
    spot = _spot(mats)
    lams, qs = window_spectra(spot)
    assert lams.shape == (4, 3)
    assert qs.shape == (4, 3, 3)
    for h in range(4):
        assert np.all(np.diff(lams[h]) <= 0)
        assert_allclose(qs[h] @ qs[h].T, np.eye(3), atol=1e-12)
        assert_allclose((qs[h] * lams[h]) @ qs[h].T, mats[h], atol=1e-12)
    out = realized_eigenvalues(spot, ClusterSpec((1, 1, 1)))
    assert_allclose(out.window_spectra[0], lams)


# --------------------------------------------------------------------------
# Monte Carlo: the multiplicative correction removes most repulsion bias


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_bias_correction_reduces_eigenvalue_error():
    # narrow top gap (lambda2 raised to ~0.19) so spectral repulsion bias
    # dominates path noise; shared seeds let the noise cancel pairwise
    base = FactorModelParams.build(d=10, r=3)
    fvar_mean = base.fvar_mean.copy()
    fvar_mean[1] = 0.19
    params = replace(
        base,
        fvar_mean=fvar_mean,
        fvar_vol=0.35 * np.sqrt(base.fvar_speed * fvar_mean),
        fvar_jump_scale=0.2 * fvar_mean,
    )
    plan = TuningPlan(
        mode="tilde", theta=0.23, varrho=0.57, kappa=0.75, delta=0.12, rho=0.47
    )
    reports = {}
    for corr in (True, False):
        study = McStudy(
            model="factor",
            plan=plan,
            target={"type": "eigenvalue", "clusters": [1, 1, 1, 7], "components": [0]},
            replications=32,
            master_seed=77,
            days=4.0,
            delta_n=1.0 / 22800,
            factor_params=params,
            bias_correction=corr,
            n_jobs=4,
        )
        reports[corr] = run_mc(study)
    rel_on = (reports[True].errors / reports[True].truths)[:, 0]
    rel_off = (reports[False].errors / reports[False].truths)[:, 0]
    mab_on = float(np.abs(rel_on).mean())
    mab_off = float(np.abs(rel_off).mean())
    assert mab_off / mab_on >= 1.4
    assert abs(float(rel_on.mean())) <= 0.02
