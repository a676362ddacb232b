"""Spot volatility-matrix estimators on disjoint windows.

Two estimators share the same windowed sum of smoothed outer products:

    hat  : subtracts the noise-offset matrices (rate-optimal; not PSD)
    tilde: keeps only the outer products (PSD by construction; slower rate)

For a resolved plan with windows ``l_n < k_n`` the estimate anchored at
observation index w sums smoothed rows w..w+k_n-l_n and divides by
``(k_n - l_n) * delta_n``; vetoed rows contribute zero while the normalizer
is unchanged.  The instantaneous noise covariance at the same anchor
averages ``m_n`` raw increment outer products with a 1/2 factor (an
increment of i.i.d. noise has twice the noise variance).

Tuning-parameter ranges (exponents of delta_n; nu is the assumed jump
activity index, delta the PSD rate sacrifice):

    hat, strict : l_n = floor(theta * delta_n^{-1/2}),
                  kappa in (max(2/3, (2+nu)/4), 3/4),
                  rho in [1/4 + (1-kappa)/(2-nu), 1/2)
    hat, relaxed: kappa in (2/3, 3/4), rho in [1/4 + 1/(4(2-nu)), 1/2)
                  (valid for polynomial-growth functionals)
    tilde       : delta in (1/10, 1/2),
                  l_n = floor(theta * delta_n^{-1/2-delta}),
                  kappa in (max(2/3 + 2 delta/3,
                                (2+nu)/4 + (2-nu) delta/2), 3/4 + delta/2),
                  rho in [1/4 + delta/2 + (1-kappa)/(2-nu), 1/2)

with k_n = floor(varrho * delta_n^{-kappa}) > l_n and
m_n = floor(theta_prime * delta_n^{-1/2}) in [1, k_n - 1].
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, TuningError
from .grid import IncrementSeries, LogPriceGrid, increments
from .kernel import KernelProfile, discretize, minmax_profile
from .preavg import (
    PreAveragedSeries,
    TruncationSpec,
    preaveraged_series,
    resolve_truncation,
    truncate,
)

__all__ = [
    "TuningPlan",
    "SpotVolSeries",
    "validate_tuning",
    "spot_hat",
    "spot_tilde",
    "noise_cov",
    "psd_project",
    "floor_spectrum",
    "spot_series",
]

_MODE_ALIASES = {
    "hat": "hat",
    "rate-optimal": "hat",
    "tilde": "tilde",
    "psd": "tilde",
}


@dataclass(frozen=True)
class TuningPlan:
    """Window lengths, scale constants, and exponents for one estimation run.

    Exponents/constants are user-facing; the integer windows ``l_n``,
    ``k_n``, ``m_n`` are derived by :func:`validate_tuning` (explicit
    integers may be supplied to override the derivation, mainly for tests).
    ``kappa`` and ``rho`` default to None and are auto-selected inside the
    valid range.
    """

    mode: str = "hat"
    theta: float = 1.0
    varrho: float = 1.0
    kappa: float | None = None
    rho: float | None = None
    delta: float = 0.15
    theta_prime: float | None = None
    nu_jump: float = 0.0
    relaxed: bool = False
    l_n: int | None = None
    k_n: int | None = None
    m_n: int | None = None

    @property
    def canonical_mode(self) -> str:
        try:
            return _MODE_ALIASES[self.mode]
        except KeyError:
            raise TuningError(
                f"unknown mode {self.mode!r}; use 'hat'/'rate-optimal' or 'tilde'/'psd'"
            ) from None

    @property
    def resolved(self) -> bool:
        return self.l_n is not None and self.k_n is not None and self.m_n is not None

    def theta_eff(self, delta_n: float) -> float:
        """Scale constant implied by the realized integer window.

        The integer floor in l_n can move the effective theta by several
        percent at practical sample sizes; all tensor/bias formulas use
        this realized value rather than the requested one.
        """
        if self.l_n is None:
            raise TuningError("plan is unresolved; call validate_tuning first")
        if self.canonical_mode == "hat":
            return self.l_n * delta_n**0.5
        return self.l_n * delta_n ** (0.5 + self.delta)

    def rate_scale(self, delta_n: float) -> float:
        """Variance scaling of the feasible CLT: delta_n^(1/2) for hat,
        delta_n^(1/2-delta) for tilde."""
        if self.canonical_mode == "hat":
            return delta_n**0.5
        return delta_n ** (0.5 - self.delta)


def _check_open(name: str, x: float, lo: float, hi: float, desc: str) -> None:
    if not (lo < x < hi):
        raise TuningError(
            f"{name}={x:.6g} violates {lo:.6g} < {name} < {hi:.6g}  [{desc}]"
        )
    width = hi - lo
    if min(x - lo, hi - x) < 0.05 * width:
        warnings.warn(
            f"{name}={x:.6g} sits within 5% of its boundary ({lo:.6g}, {hi:.6g})",
            UserWarning,
            stacklevel=3,
        )


def _check_half_open(name: str, x: float, lo: float, hi: float, desc: str) -> None:
    if not (lo <= x < hi):
        raise TuningError(
            f"{name}={x:.6g} violates {lo:.6g} <= {name} < {hi:.6g}  [{desc}]"
        )
    width = hi - lo
    if min(x - lo, hi - x) < 0.05 * width and x != lo:
        warnings.warn(
            f"{name}={x:.6g} sits within 5% of its boundary [{lo:.6g}, {hi:.6g})",
            UserWarning,
            stacklevel=3,
        )


def validate_tuning(plan: TuningPlan, delta_n: float) -> TuningPlan:
    """Check every tuning inequality and derive the integer windows.

    Returns a resolved copy of the plan; raises :class:`TuningError` naming
    the violated inequality otherwise.  Parameters within 5% of a range
    boundary trigger a warning.
    """
    if not (0.0 < delta_n < 1.0):
        raise TuningError(f"delta_n={delta_n} must lie in (0, 1)")
    mode = plan.canonical_mode
    nu = plan.nu_jump
    if not (0.0 <= nu < 1.0):
        raise TuningError(f"nu_jump={nu} violates 0 <= nu_jump < 1")
    if plan.theta <= 0.0:
        raise TuningError(f"theta={plan.theta} must be positive")
    if plan.varrho <= 0.0:
        raise TuningError(f"varrho={plan.varrho} must be positive")
    theta_prime = plan.theta if plan.theta_prime is None else plan.theta_prime
    if theta_prime <= 0.0:
        raise TuningError(f"theta_prime={theta_prime} must be positive")

    if mode == "hat":
        delta = plan.delta  # carried but unused in hat mode
        l_exponent = -0.5
        if plan.relaxed:
            kappa_lo, kappa_hi = 2.0 / 3.0, 3.0 / 4.0
            kappa_desc = "relaxed window-growth range"
        else:
            kappa_lo = max(2.0 / 3.0, (2.0 + nu) / 4.0)
            kappa_hi = 3.0 / 4.0
            kappa_desc = "kappa in (max(2/3, (2+nu)/4), 3/4)"
    else:
        delta = plan.delta
        _check_open("delta", delta, 0.1, 0.5, "delta in (1/10, 1/2)")
        l_exponent = -0.5 - delta
        kappa_lo = max(
            2.0 / 3.0 + 2.0 * delta / 3.0,
            (2.0 + nu) / 4.0 + (2.0 - nu) * delta / 2.0,
        )
        kappa_hi = 0.75 + delta / 2.0
        kappa_desc = (
            "kappa in (max(2/3 + 2*delta/3, (2+nu)/4 + (2-nu)*delta/2), 3/4 + delta/2)"
        )

    kappa = plan.kappa
    if kappa is None:
        kappa = 0.5 * (kappa_lo + kappa_hi)
    _check_open("kappa", kappa, kappa_lo, kappa_hi, kappa_desc)

    if mode == "hat" and plan.relaxed:
        rho_lo = 0.25 + 1.0 / (4.0 * (2.0 - nu))
        rho_desc = "rho in [1/4 + 1/(4(2-nu)), 1/2)"
    elif mode == "hat":
        rho_lo = 0.25 + (1.0 - kappa) / (2.0 - nu)
        rho_desc = "rho in [1/4 + (1-kappa)/(2-nu), 1/2)"
    else:
        rho_lo = 0.25 + delta / 2.0 + (1.0 - kappa) / (2.0 - nu)
        rho_desc = "rho in [1/4 + delta/2 + (1-kappa)/(2-nu), 1/2)"
    rho = plan.rho
    if rho is None:
        rho = 0.47 if 0.47 >= rho_lo else 0.5 * (rho_lo + 0.5)
    _check_half_open("rho", rho, rho_lo, 0.5, rho_desc)

    l_n = plan.l_n if plan.l_n is not None else int(plan.theta * delta_n**l_exponent)
    k_n = plan.k_n if plan.k_n is not None else int(plan.varrho * delta_n**-kappa)
    m_n = plan.m_n if plan.m_n is not None else int(theta_prime * delta_n**-0.5)
    if l_n < 2:
        raise TuningError(f"l_n={l_n} violates l_n >= 2 (theta too small?)")
    if k_n <= l_n:
        raise TuningError(f"k_n={k_n} violates k_n > l_n={l_n}")
    if m_n < 1:
        raise TuningError(f"m_n={m_n} violates m_n >= 1 (theta_prime too small?)")
    if m_n > k_n - 1:
        raise TuningError(
            f"m_n={m_n} violates m_n <= k_n - 1 = {k_n - 1} "
            "(noise window must fit inside the last spot window)"
        )
    return replace(
        plan,
        kappa=kappa,
        rho=rho,
        theta_prime=theta_prime,
        l_n=l_n,
        k_n=k_n,
        m_n=m_n,
    )


@dataclass(frozen=True)
class SpotVolSeries:
    """Spot estimates on disjoint windows with companion noise covariances.

    ``c_mats[i]`` is the estimate anchored at observation index i*k_n;
    ``gamma_mats[i]`` the noise covariance at the same anchor.  ``a_t`` is
    the right-edge adjustment t / (N_t * k_n * delta_n) and ``kept_counts``
    records how many smoothed rows survived truncation per window.
    """

    c_mats: np.ndarray
    gamma_mats: np.ndarray
    N_t: int
    a_t: float
    kind: str
    delta_n: float
    plan: TuningPlan
    kept_counts: np.ndarray

    @property
    def d(self) -> int:
        return self.c_mats.shape[1]


def _window_bounds(i: int, k_n: int, l_n: int, n_rows: int) -> tuple[int, int]:
    """Row range [i, i + k_n - l_n] inclusive; raises on overrun."""
    last = i + k_n - l_n
    if i < 0 or last >= n_rows:
        raise DataError(
            f"spot window at index {i} overruns the {n_rows} smoothed rows"
        )
    return i, last + 1


def spot_hat(
    pre: PreAveragedSeries,
    mask: np.ndarray,
    i: int,
    plan: TuningPlan,
    delta_n: float,
) -> np.ndarray:
    """Rate-optimal spot estimate at observation index i (symmetric, not PSD)."""
    lo, hi = _window_bounds(i, plan.k_n, plan.l_n, pre.ybar.shape[0])
    rows = pre.ybar[lo:hi]
    kept = rows[mask[lo:hi]]
    outer = kept.T @ kept
    offset = pre.yhat[lo:hi].sum(axis=0)
    return (outer - offset) / ((plan.k_n - plan.l_n) * delta_n)


def spot_tilde(
    pre: PreAveragedSeries,
    mask: np.ndarray,
    i: int,
    plan: TuningPlan,
    delta_n: float,
) -> np.ndarray:
    """PSD spot estimate at observation index i (no noise offset)."""
    lo, hi = _window_bounds(i, plan.k_n, plan.l_n, pre.ybar.shape[0])
    rows = pre.ybar[lo:hi]
    kept = rows[mask[lo:hi]]
    return (kept.T @ kept) / ((plan.k_n - plan.l_n) * delta_n)


def noise_cov(incr: IncrementSeries, i: int, plan: TuningPlan) -> np.ndarray:
    """Instantaneous noise covariance from m_n raw increments at index i.

    Averages increment outer products with a 1/2 factor: an increment of
    serially uncorrelated noise carries twice the per-observation noise
    variance.
    """
    m_n = plan.m_n
    if m_n is None:
        raise TuningError("plan is unresolved; call validate_tuning first")
    if i < 0 or i + m_n > incr.n_incr:
        raise DataError(
            f"noise window [{i}, {i + m_n}) overruns {incr.n_incr} increments"
        )
    rows = incr.values[i : i + m_n]
    return (rows.T @ rows) / (2.0 * m_n)


def psd_project(m: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues to zero."""
    m = np.asarray(m, dtype=float)
    scale = max(float(np.max(np.abs(m))), 1.0)
    if np.max(np.abs(m - m.T)) > 1e-10 * scale:
        raise DataError("psd_project requires a symmetric matrix")
    sym = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(sym)
    clipped = np.maximum(vals, 0.0)
    return (vecs * clipped) @ vecs.T


def floor_spectrum(m: np.ndarray, rel_floor: float = 1e-8) -> np.ndarray:
    """Raise eigenvalues below rel_floor * trace to the floor value.

    A stand-in for spatial localization when a functional has singular
    derivatives near the PSD boundary (e.g. log-determinant, regression
    coefficients); configurable and documented, not silent: callers apply
    it only for functionals that declare a positive domain guard.
    """
    m = np.asarray(m, dtype=float)
    tr = float(np.trace(m))
    if tr <= 0.0:
        raise DataError(
            f"cannot floor a matrix with non-positive trace {tr:.3e}"
        )
    eps = rel_floor * tr
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    vals = np.maximum(vals, eps)
    return (vecs * vals) @ vecs.T


def spot_series(
    grid: LogPriceGrid,
    plan: TuningPlan,
    kind: str | None = None,
    *,
    profile: KernelProfile | None = None,
    trunc: TruncationSpec | None = None,
    sigma_bar: np.ndarray | float | None = None,
    alpha_mult: float = 1.5,
    trunc_mode: str = "elementwise",
    truncation: bool = True,
    renormalize: bool = False,
    method: str = "auto",
) -> SpotVolSeries:
    """Spot estimates on the disjoint windows tiling the sample.

    Resolves the plan if needed, smooths the increments, applies jump
    truncation (thresholds from ``sigma_bar`` — bipower variation of the
    panel when not supplied), and assembles N_t = floor(n / k_n) windows
    anchored at 0, k_n, 2k_n, ...  ``kind`` defaults to the plan mode.
    """
    if not plan.resolved:
        plan = validate_tuning(plan, grid.delta_n)
    kind = plan.canonical_mode if kind is None else _MODE_ALIASES.get(kind, kind)
    if kind not in ("hat", "tilde"):
        raise TuningError(f"unknown spot kind {kind!r}")
    n, d = grid.n, grid.d
    k_n, l_n = plan.k_n, plan.l_n
    N_t = n // k_n
    if N_t < 1:
        raise DataError(f"sample of n={n} shorter than one window k_n={k_n}")
    prof = profile if profile is not None else minmax_profile()
    dk = discretize(prof, l_n)
    incr = increments(grid)
    pre = preaveraged_series(incr, dk, method)
    if truncation:
        if trunc is not None and trunc.resolved:
            spec = trunc
        else:
            if sigma_bar is None:
                from .sim import bipower

                sigma_bar = bipower(grid)
            spec = resolve_truncation(
                grid,
                alpha_mult=alpha_mult,
                rho=float(plan.rho),
                sigma_bar=sigma_bar,
                mode=trunc_mode if trunc is None else trunc.mode,
            )
        mask = truncate(pre.ybar, spec)
    else:
        mask = np.ones(pre.ybar.shape[0], dtype=bool)

    win_rows = k_n - l_n + 1
    norm = (k_n - l_n) * grid.delta_n
    c_mats = np.empty((N_t, d, d))
    gam_mats = np.empty((N_t, d, d))
    kept_counts = np.empty(N_t, dtype=int)
    masked = np.where(mask[:, None], pre.ybar, 0.0)
    for i in range(N_t):
        w = i * k_n
        rows = masked[w : w + win_rows]
        kept_counts[i] = int(mask[w : w + win_rows].sum())
        outer = rows.T @ rows
        if renormalize and 0 < kept_counts[i] < win_rows:
            outer *= win_rows / kept_counts[i]
        if kind == "hat":
            outer = outer - pre.yhat[w : w + win_rows].sum(axis=0)
        c_mats[i] = outer / norm
        gam_mats[i] = noise_cov(incr, w, plan)
    if int(kept_counts.sum()) == 0:
        raise DataError(
            "every smoothed row was vetoed by truncation; thresholds are "
            "inconsistent with the data scale"
        )
    a_t = n / (N_t * k_n)
    return SpotVolSeries(
        c_mats=c_mats,
        gamma_mats=gam_mats,
        N_t=N_t,
        a_t=a_t,
        kind=kind,
        delta_n=grid.delta_n,
        plan=plan,
        kept_counts=kept_counts,
    )
