"""Smoothing-kernel profiles, discretized weights, and their scalar constants.

Local moving averages weigh successive increments by ``phi(h / l_n)`` where
``phi`` is a continuous, piecewise-C1 profile supported in (0, 1) with
positive energy.  Every downstream bias and variance formula depends on the
profile only through the functions

    phi_0(s) = int_s^1 phi(u) phi(u - s) du
    phi_1(s) = int_s^1 phi'(u) phi'(u - s) du

and the scalars

    Phi_lm = int_0^1 phi_l(s) phi_m(s) ds,
    Psi_lm = int_0^1 s * phi_l(s) phi_m(s) ds,      l, m in {0, 1},

together with ``phi_0(0)`` and ``phi_1(0)``.  These are computed numerically
so user-supplied profiles work; closed forms for the default profile serve
as test oracles only.

Quadrature design: ``phi_0`` on a uniform s-mesh is a discrete correlation
of the phi samples (the integrand vanishes at both endpoints, so the
trapezoid rule collapses to a plain sum); ``phi_1`` uses midpoint-sampled
phi' products, which is exact for piecewise-constant phi' when breakpoints
sit on grid nodes; the outer Phi/Psi integrals use the trapezoid rule.  The
whole pipeline is run at mesh sizes m and 2m and Richardson-extrapolated,
doubling until the extrapolated constants move by less than a relative
tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.signal import correlate

from .errors import ConfigError, NumericError, TuningError

__all__ = [
    "KernelProfile",
    "DiscreteKernel",
    "KernelConstants",
    "minmax_profile",
    "get_profile",
    "profile_from_table",
    "validate_profile",
    "discretize",
    "constants",
    "default_constants",
    "autocovariances",
]


@dataclass(frozen=True)
class KernelProfile:
    """A smoothing profile ``phi`` on [0, 1] with its a.e. derivative.

    ``breakpoints`` lists the interior points where ``phi`` or ``phi'`` is
    allowed to be non-smooth; the quadrature aligns its mesh to them and the
    validation routine skips finite-difference checks in their vicinity.
    """

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    phi_prime: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple[float, ...] = ()


@dataclass(frozen=True)
class DiscreteKernel:
    """Weights ``phi(h / l_n)`` for one window length.

    ``weights[h-1] = phi(h / l_n)`` for h = 1..l_n-1, ``diff_weights[h] =
    phi((h+1)/l_n) - phi(h/l_n)`` for h = 0..l_n-1 (with the convention
    ``phi(0) = phi(1) = 0``), and ``psi_n`` is the sum of squared weights.
    """

    l_n: int
    weights: np.ndarray
    diff_weights: np.ndarray
    psi_n: float


@dataclass(frozen=True)
class KernelConstants:
    """Scalar constants of one profile entering bias/variance formulas."""

    phi0_at_0: float
    phi1_at_0: float
    Phi00: float
    Phi01: float
    Phi11: float
    Psi00: float
    Psi01: float
    Psi11: float

    def as_dict(self) -> dict[str, float]:
        return {
            "phi0_at_0": self.phi0_at_0,
            "phi1_at_0": self.phi1_at_0,
            "Phi00": self.Phi00,
            "Phi01": self.Phi01,
            "Phi11": self.Phi11,
            "Psi00": self.Psi00,
            "Psi01": self.Psi01,
            "Psi11": self.Psi11,
        }


def _minmax_phi(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.minimum(s, 1.0 - s)
    return np.where((s <= 0.0) | (s >= 1.0), 0.0, out)


def _minmax_phi_prime(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.where(s < 0.5, 1.0, -1.0)
    return np.where((s <= 0.0) | (s >= 1.0), 0.0, out)


def minmax_profile() -> KernelProfile:
    """The tent profile ``phi(s) = min(s, 1 - s)`` (the package default)."""
    return KernelProfile(
        name="minmax",
        phi=_minmax_phi,
        phi_prime=_minmax_phi_prime,
        breakpoints=(0.5,),
    )


_REGISTRY: dict[str, Callable[[], KernelProfile]] = {"minmax": minmax_profile}


def get_profile(name: str) -> KernelProfile:
    """Look up a registered profile by name."""
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ConfigError(
            f"unknown kernel profile {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


def profile_from_table(path: str) -> KernelProfile:
    """Build a profile from a CSV of ``s, phi, phi_prime`` rows.

    Values between tabulated points are linearly interpolated.  Interior
    breakpoints may be declared on a leading comment line of the form
    ``# breakpoints: 0.25, 0.5``; otherwise every tabulated s is treated as
    a potential breakpoint.
    """
    declared: tuple[float, ...] | None = None
    rows: list[tuple[float, float, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.lower().startswith("breakpoints"):
                    _, _, vals = body.partition(":")
                    declared = tuple(
                        float(v) for v in vals.replace(",", " ").split()
                    )
                continue
            parts = [p.strip() for p in line.split(",")]
            if parts[0].lower() in {"s", "x"}:
                continue  # header
            if len(parts) != 3:
                raise ConfigError(
                    f"kernel table row needs 3 columns (s, phi, phi_prime), got {len(parts)}"
                )
            rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
    if len(rows) < 3:
        raise ConfigError("kernel table needs at least 3 rows")
    rows.sort(key=lambda r: r[0])
    s_tab = np.array([r[0] for r in rows])
    phi_tab = np.array([r[1] for r in rows])
    dphi_tab = np.array([r[2] for r in rows])
    if s_tab[0] > 0.0 or s_tab[-1] < 1.0:
        raise ConfigError("kernel table must span s = 0 to s = 1")

    def phi(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.interp(s, s_tab, phi_tab)
        return np.where((s <= 0.0) | (s >= 1.0), 0.0, out)

    def phi_prime(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.interp(s, s_tab, dphi_tab)
        return np.where((s <= 0.0) | (s >= 1.0), 0.0, out)

    if declared is None:
        breaks = tuple(float(s) for s in s_tab if 0.0 < s < 1.0)
    else:
        breaks = declared
    name = "table"
    return KernelProfile(name=name, phi=phi, phi_prime=phi_prime, breakpoints=breaks)


def validate_profile(profile: KernelProfile, mesh: int = 10_000) -> None:
    """Check the support/energy/smoothness conditions on a profile.

    Requires ``phi(0) = phi(1) = 0``, positive energy ``int phi^2 > 0``, and
    that a central finite difference of ``phi`` matches ``phi_prime`` away
    from declared breakpoints.  Raises :class:`ConfigError` on violation.
    """
    p_ends = np.asarray(profile.phi(np.array([0.0, 1.0])), dtype=float)
    if np.max(np.abs(p_ends)) > 1e-12:
        raise ConfigError(
            f"profile {profile.name!r} must vanish at 0 and 1; got {p_ends}"
        )
    s = np.linspace(0.0, 1.0, mesh + 1)
    vals = np.asarray(profile.phi(s), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"profile {profile.name!r} takes non-finite values")
    if float(np.mean(vals**2)) <= 0.0:
        raise ConfigError(f"profile {profile.name!r} has zero energy")
    # finite-difference consistency away from breakpoints
    guard = 2.0 / mesh
    interior = s[(s > guard) & (s < 1.0 - guard)]
    for b in profile.breakpoints:
        interior = interior[np.abs(interior - b) > guard]
    step = 1e-6
    fd = (
        np.asarray(profile.phi(interior + step), dtype=float)
        - np.asarray(profile.phi(interior - step), dtype=float)
    ) / (2.0 * step)
    an = np.asarray(profile.phi_prime(interior), dtype=float)
    scale = max(1.0, float(np.max(np.abs(an))) if an.size else 1.0)
    err = float(np.max(np.abs(fd - an))) if an.size else 0.0
    if err > 1e-6 * scale:
        raise ConfigError(
            f"profile {profile.name!r}: phi' inconsistent with phi "
            f"(max abs deviation {err:.3e} away from breakpoints)"
        )


def discretize(profile: KernelProfile, l_n: int) -> DiscreteKernel:
    """Evaluate a profile on the lattice h / l_n.

    Returns the weights ``phi(h/l_n)`` for h = 1..l_n-1, their successive
    differences with ``phi(0) = phi(1) = 0`` padding, and the squared-weight
    sum ``psi_n``.
    """
    if l_n < 2:
        raise TuningError(f"window length l_n must be >= 2, got {l_n}")
    h = np.arange(1, l_n) / float(l_n)
    weights = np.asarray(profile.phi(h), dtype=float)
    padded = np.concatenate(([0.0], weights, [0.0]))
    diff_weights = np.diff(padded)
    psi_n = float(np.sum(weights**2))
    if psi_n <= 0.0:
        raise TuningError(
            f"profile {profile.name!r} has zero energy on the l_n={l_n} lattice"
        )
    return DiscreteKernel(
        l_n=l_n, weights=weights, diff_weights=diff_weights, psi_n=psi_n
    )


def _aligned_mesh(m: int, breakpoints: Sequence[float]) -> int:
    """Smallest even mesh >= m putting every breakpoint on a grid node."""
    denoms = [2]
    for b in breakpoints:
        frac = Fraction(b).limit_denominator(10**6)
        if abs(float(frac) - b) < 1e-9:
            denoms.append(frac.denominator)
    lcm = 1
    for q in denoms:
        lcm = lcm * q // math.gcd(lcm, q)
    if lcm > 10**6:
        return m + (m % 2)
    return ((m + lcm - 1) // lcm) * lcm


def autocovariances(
    profile: KernelProfile, mesh: int = 2048
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tabulate ``phi_0`` and ``phi_1`` on a uniform s-mesh.

    Returns ``(s, phi_0(s), phi_1(s))`` with ``s = j/m`` for an
    aligned mesh size m >= mesh.
    """
    m = _aligned_mesh(int(mesh), profile.breakpoints)
    s_nodes, phi0, phi1 = _autocov_tables(profile, m)
    return s_nodes, phi0, phi1


def _autocov_tables(
    profile: KernelProfile, m: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s_nodes = np.arange(m + 1) / m
    f = np.asarray(profile.phi(s_nodes), dtype=float)  # phi on nodes
    mids = (np.arange(m) + 0.5) / m
    g = np.asarray(profile.phi_prime(mids), dtype=float)  # phi' on midpoints

    # phi_0(s_j): node-sampled correlation; integrand vanishes at endpoints
    # so the trapezoid rule is the plain sum.
    c_f = correlate(f, f, mode="full", method="auto")
    phi0 = c_f[m : 2 * m + 1] / m  # lags 0..m

    # phi_1(s_j): midpoint-sampled correlation (lags 0..m-1; phi_1(1) = 0).
    c_g = correlate(g, g, mode="full", method="auto")
    phi1 = np.concatenate((c_g[m - 1 :] / m, [0.0]))
    return s_nodes, phi0, phi1


def _quadrature_pass(profile: KernelProfile, m: int) -> np.ndarray:
    """All eight constants from one mesh size, as a vector."""
    s_nodes, phi0, phi1 = _autocov_tables(profile, m)

    def trapz(y: np.ndarray) -> float:
        return float((np.sum(y) - 0.5 * (y[0] + y[-1])) / m)

    out = np.empty(8)
    out[0] = phi0[0]
    out[1] = phi1[0]
    out[2] = trapz(phi0 * phi0)  # Phi00
    out[3] = trapz(phi0 * phi1)  # Phi01
    out[4] = trapz(phi1 * phi1)  # Phi11
    out[5] = trapz(s_nodes * phi0 * phi0)  # Psi00
    out[6] = trapz(s_nodes * phi0 * phi1)  # Psi01
    out[7] = trapz(s_nodes * phi1 * phi1)  # Psi11
    return out


def constants(
    profile: KernelProfile, mesh: int = 2048, rtol: float = 1e-8
) -> KernelConstants:
    """Compute the scalar constants of a profile to relative tolerance.

    Runs the quadrature at mesh sizes m, 2m, 4m, ..., Richardson-
    extrapolating consecutive passes; stops when every extrapolated constant
    is stable to ``rtol`` relative.  Raises :class:`NumericError` if the
    refinement ceiling is reached without convergence.
    """
    if mesh < 1000:
        raise ConfigError(f"quadrature mesh must be >= 1000, got {mesh}")
    m = _aligned_mesh(int(mesh), profile.breakpoints)
    prev = _quadrature_pass(profile, m)
    extrap_prev: np.ndarray | None = None
    max_doublings = 10
    for _ in range(max_doublings):
        m *= 2
        cur = _quadrature_pass(profile, m)
        extrap = (4.0 * cur - prev) / 3.0
        if extrap_prev is not None:
            scale = np.maximum(np.abs(extrap), 1e-300)
            drift = float(np.max(np.abs(extrap - extrap_prev) / scale))
            if drift <= rtol:
                return _package_constants(extrap, profile)
        extrap_prev = extrap
        prev = cur
    raise NumericError(
        f"kernel-constant quadrature for profile {profile.name!r} did not "
        f"converge to rtol={rtol} within {max_doublings} refinements "
        f"(final mesh {m}); are the breakpoints declared correctly?"
    )


@lru_cache(maxsize=8)
def _default_constants_cached(name: str) -> KernelConstants:
    return constants(get_profile(name))


def default_constants(name: str = "minmax") -> KernelConstants:
    """Constants of a registered profile, computed once per process."""
    return _default_constants_cached(name)


def _package_constants(vec: np.ndarray, profile: KernelProfile) -> KernelConstants:
    kc = KernelConstants(
        phi0_at_0=float(vec[0]),
        phi1_at_0=float(vec[1]),
        Phi00=float(vec[2]),
        Phi01=float(vec[3]),
        Phi11=float(vec[4]),
        Psi00=float(vec[5]),
        Psi01=float(vec[6]),
        Psi11=float(vec[7]),
    )
    vals = kc.as_dict()
    bad = [k for k, v in vals.items() if not (v > 0.0 and np.isfinite(v))]
    if bad:
        raise NumericError(
            f"profile {profile.name!r} produced non-positive constants {bad}; "
            "not a valid smoothing profile"
        )
    if kc.Phi01**2 > kc.Phi00 * kc.Phi11 * (1.0 + 1e-10):
        raise NumericError(
            f"profile {profile.name!r}: Phi01^2 > Phi00*Phi11 violates the "
            "Cauchy-Schwarz bound; quadrature is untrustworthy"
        )
    return kc
