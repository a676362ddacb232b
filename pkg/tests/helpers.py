"""Shared constructors for the test suite."""
from __future__ import annotations

import numpy as np

from volfn import LogPriceGrid, TuningPlan


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_spd(gen: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    """Well-conditioned random symmetric positive-definite matrix."""
    a = gen.normal(size=(d, d))
    return scale * (a @ a.T / d + 0.5 * np.eye(d))


def spd_with_spectrum(gen: np.random.Generator, eigs) -> np.ndarray:
    """Random-basis SPD matrix with a prescribed spectrum."""
    eigs = np.asarray(eigs, dtype=float)
    d = eigs.size
    q, _ = np.linalg.qr(gen.normal(size=(d, d)))
    return (q * eigs) @ q.T


def brownian_grid(
    gen: np.random.Generator,
    n: int,
    d: int,
    delta_n: float,
    vol: float = 0.2,
    noise_sd: float = 0.0,
) -> LogPriceGrid:
    """Driftless Brownian log-price panel, optionally with i.i.d. noise."""
    z = gen.normal(size=(n - 1, d)) * (vol * np.sqrt(delta_n))
    x = np.vstack([np.zeros((1, d)), np.cumsum(z, axis=0)])
    if noise_sd > 0.0:
        x = x + gen.normal(0.0, noise_sd, size=(n, d))
    return LogPriceGrid(values=x, delta_n=delta_n)


def explicit_plan(
    mode: str = "hat",
    l_n: int = 4,
    k_n: int = 12,
    m_n: int = 3,
    delta: float = 0.15,
    rho: float = 0.47,
) -> TuningPlan:
    """Fully resolved plan with hand-picked integer windows (skips derivation)."""
    return TuningPlan(
        mode=mode, delta=delta, rho=rho, l_n=l_n, k_n=k_n, m_n=m_n
    )
