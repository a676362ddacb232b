"""Local moving averages, noise-offset terms, and jump-truncation masks.

For a discretized kernel with weights ``w_h = phi(h/l_n)`` and increment
rows ``z[a] = Y[a+1] - Y[a]``, the smoothed rows and noise offsets are

    ybar[a] = psi_n^{-1/2} * sum_{h=1}^{l_n-1} w_h z[a+h-1]
    yhat[a] = (2 psi_n)^{-1} * sum_{h=0}^{l_n-1} (w_{h+1}-w_h)^2
              z[a+h] (x) z[a+h]

for a = 0..n-l_n, where the offset's final row uses one virtual zero
increment past the end of the sample (the offset consumes one more
increment than the moving average; padding keeps the two series aligned so
the last disjoint spot window is complete when it tiles the sample
exactly).  ``yhat`` is a nonnegative combination of outer products, hence
symmetric positive semidefinite row by row.

Jump handling: a smoothed row is vetoed when it exceeds a threshold
``nu_n = alpha * delta_n^rho``, either in Euclidean norm (global mode) or
per component against per-asset scales (elementwise mode, the default).
Vetoed rows contribute zero to spot sums; the normalizer is unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .errors import DataError
from .grid import IncrementSeries, LogPriceGrid
from .kernel import DiscreteKernel

__all__ = [
    "PreAveragedSeries",
    "TruncationSpec",
    "preaverage",
    "noise_offset",
    "preaveraged_series",
    "threshold",
    "resolve_truncation",
    "truncate",
]

# Above this work estimate (rows x window), convolution switches to FFT.
FFT_SWITCHOVER = 2**22


@dataclass(frozen=True)
class PreAveragedSeries:
    """Smoothed rows and matching noise offsets.

    ``ybar`` has shape (n-l_n+1, d); ``yhat`` has shape (n-l_n+1, d, d).
    ``base_index`` is the observation index of the first row (always 0
    here; kept explicit so windowing code reads unambiguously).
    """

    ybar: np.ndarray
    yhat: np.ndarray
    l_n: int
    base_index: int = 0


@dataclass(frozen=True)
class TruncationSpec:
    """Threshold rule for vetoing jump-contaminated smoothed rows.

    ``alpha`` is the variance-scale vector (length d for elementwise mode,
    length 1 for global mode) already multiplied by the tuning constant;
    ``nu_n = alpha * delta_n**rho`` once resolved.  ``mode`` is
    ``"elementwise"`` (default; per-component comparison) or
    ``"global-norm"`` (Euclidean norm comparison).
    """

    mode: str = "elementwise"
    alpha: np.ndarray | None = None
    rho: float = 0.47
    nu_n: np.ndarray | None = None

    @property
    def resolved(self) -> bool:
        return self.nu_n is not None


def _convolve_columns(z: np.ndarray, taps: np.ndarray, method: str) -> np.ndarray:
    """Sliding dot products sum_j taps[j] * z[a+j] for every full window.

    ``method`` is "direct", "fft", or "auto" (work-based switchover).  Both
    paths compute the same valid-mode correlation; the FFT path exists for
    large samples and the equality of the two is a tested invariant.
    """
    rows, width = z.shape[0], taps.size
    if rows < width:
        raise DataError(
            f"series of {rows} increment rows shorter than window {width}"
        )
    if method == "auto":
        method = "fft" if rows * width > FFT_SWITCHOVER else "direct"
    if method == "fft":
        out = fftconvolve(z, taps[::-1, None], mode="valid", axes=0)
        return np.ascontiguousarray(out)
    if method != "direct":
        raise ValueError(f"unknown convolution method {method!r}")
    count = rows - width + 1
    out = np.zeros((count, z.shape[1]))
    for j in range(width):
        out += taps[j] * z[j : j + count]
    return out


def preaverage(
    incr: IncrementSeries, dk: DiscreteKernel, method: str = "auto"
) -> np.ndarray:
    """Smoothed rows ``ybar``; shape (n - l_n + 1, d).

    Linear in the increments; computed by direct sliding sums or FFT
    convolution depending on problem size (``method`` forces a path).
    """
    taps = dk.weights / np.sqrt(dk.psi_n)
    return _convolve_columns(incr.values, taps, method)


def noise_offset(
    incr: IncrementSeries,
    dk: DiscreteKernel,
    method: str = "auto",
    col_block: int = 64,
) -> np.ndarray:
    """Noise-offset matrices ``yhat``; shape (n - l_n + 1, d, d).

    Each row is a nonnegative-weighted sum of increment outer products and
    is therefore symmetric PSD.  One virtual zero increment is appended so
    the row count matches :func:`preaverage`.  Outer-product columns are
    processed in blocks to bound memory at large d.
    """
    z = incr.values
    n_incr, d = z.shape
    if n_incr < dk.l_n - 1:
        raise DataError(
            f"series of {n_incr} increment rows shorter than window {dk.l_n - 1}"
        )
    taps = dk.diff_weights**2 / (2.0 * dk.psi_n)
    zp = np.vstack([z, np.zeros((1, d))])  # virtual increment past the end
    count = zp.shape[0] - dk.l_n + 1
    out = np.empty((count, d, d))
    pairs = [(p, q) for p in range(d) for q in range(p, d)]
    for start in range(0, len(pairs), col_block):
        chunk = pairs[start : start + col_block]
        prod = np.stack([zp[:, p] * zp[:, q] for p, q in chunk], axis=1)
        conv = _convolve_columns(prod, taps, method)
        for idx, (p, q) in enumerate(chunk):
            out[:, p, q] = conv[:, idx]
            if p != q:
                out[:, q, p] = conv[:, idx]
    return out


def preaveraged_series(
    incr: IncrementSeries, dk: DiscreteKernel, method: str = "auto"
) -> PreAveragedSeries:
    """Bundle :func:`preaverage` and :func:`noise_offset` on one input."""
    return PreAveragedSeries(
        ybar=preaverage(incr, dk, method),
        yhat=noise_offset(incr, dk, method),
        l_n=dk.l_n,
    )


def threshold(
    grid: LogPriceGrid,
    spec: TruncationSpec,
    sigma_bar: np.ndarray | float,
) -> TruncationSpec:
    """Resolve a truncation spec against per-asset variance scales.

    ``sigma_bar`` holds per-asset average variances (per day), e.g. from
    bipower variation or supplied by the user.  Elementwise mode sets one
    threshold per component, ``alpha_r = alpha_mult * sigma_bar_r``; global
    mode collapses to a single norm threshold with scale
    ``alpha_mult * mean(sigma_bar) * sqrt(d)`` to mirror dimensionality.
    The stored ``alpha`` vector must already include ``alpha_mult``; this
    function finishes ``nu_n = alpha * delta_n**rho``.
    """
    sig = np.atleast_1d(np.asarray(sigma_bar, dtype=float))
    if sig.size == 1:
        sig = np.full(grid.d, float(sig[0]))
    if sig.size != grid.d:
        raise DataError(f"sigma_bar has {sig.size} entries for d={grid.d}")
    if np.any(sig <= 0.0) or not np.all(np.isfinite(sig)):
        raise DataError("sigma_bar entries must be positive and finite")
    if spec.alpha is None:
        raise DataError("truncation spec has no alpha scale; set alpha first")
    mult = np.asarray(spec.alpha, dtype=float)
    if spec.mode == "elementwise":
        alpha = mult * sig
    elif spec.mode == "global-norm":
        alpha = np.atleast_1d(float(np.mean(mult * sig)) * np.sqrt(grid.d))
    else:
        raise DataError(f"unknown truncation mode {spec.mode!r}")
    nu = alpha * grid.delta_n**spec.rho
    return replace(spec, alpha=alpha, nu_n=nu)


def resolve_truncation(
    grid: LogPriceGrid,
    alpha_mult: float,
    rho: float,
    sigma_bar: np.ndarray | float,
    mode: str = "elementwise",
) -> TruncationSpec:
    """Convenience builder: multiplier + exponent + scales -> resolved spec."""
    base = TruncationSpec(mode=mode, alpha=np.atleast_1d(float(alpha_mult)), rho=rho)
    return threshold(grid, base, sigma_bar)


def truncate(ybar: np.ndarray, spec: TruncationSpec) -> np.ndarray:
    """Keep mask over smoothed rows: True where the row survives.

    Global mode keeps rows with Euclidean norm <= nu_n; elementwise mode
    requires every component to respect its own threshold.
    """
    if not spec.resolved:
        raise DataError("truncation spec is unresolved; call threshold() first")
    nu = np.asarray(spec.nu_n, dtype=float)
    if spec.mode == "global-norm":
        return np.linalg.norm(ybar, axis=1) <= float(nu[0])
    if spec.mode == "elementwise":
        if nu.size != ybar.shape[1]:
            raise DataError(
                f"elementwise thresholds have {nu.size} entries for d={ybar.shape[1]}"
            )
        return np.all(np.abs(ybar) <= nu[None, :], axis=1)
    raise DataError(f"unknown truncation mode {spec.mode!r}")
