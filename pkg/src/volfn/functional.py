"""Matrix functionals with analytic gradients and Hessians.

Every integrand is represented by a :class:`MatrixFunctional`: a vector
value g(c) in R^r together with callables for the entrywise gradient
G[a, j, k] = d g_a / d c_jk and Hessian H[a, j, k, l, m] =
d^2 g_a / (d c_jk d c_lm).  Derivatives follow the raw-entry convention —
each of the d^2 entries of c is an independent coordinate — so for a
symmetric argument written as c = sum c_jk E_jk the chain rule applies
verbatim and symmetric perturbations c + h (E_ab + E_ba) differentiate to
G[a, j, k] + G[a, k, j] (off-diagonal) without double counting.

Builtins cover traces, single entries, squares, logs, log-determinants,
Laplace-transform pairs, and regression (beta) blocks; the spectral
functionals (eigenvalue cluster means, eigenvectors) get their own
constructors because their derivatives require an eigendecomposition at
the evaluation point.

:func:`fd_check` verifies any functional's analytic derivatives against
symmetric finite differences and is the oracle used throughout the tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError, DegeneracyError, DomainError

__all__ = [
    "MatrixFunctional",
    "ClusterSpec",
    "builtin",
    "eig_sorted",
    "eigenvalue_functional",
    "eigenvector_functional",
    "fd_check",
]

#: relative spectral-gap tolerance: eigenvalues closer than this times the
#: trace are treated as numerically tied
GAP_TOL = 1e-6


@dataclass(frozen=True)
class MatrixFunctional:
    """A smooth map from d x d covariance matrices to R^r with derivatives.

    ``domain_guard`` is the relative spectral floor the functional needs to
    stay well-conditioned (0.0 when the map is entire); pipelines consult it
    before evaluating near the PSD boundary.  ``check_domain`` raises
    :class:`DomainError` when c is outside the safe region.
    """

    name: str
    r_out: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    domain_guard: float = 0.0
    _domain_check: Callable[[np.ndarray], None] | None = field(default=None, repr=False)

    def check_domain(self, c: np.ndarray) -> None:
        if self._domain_check is not None:
            self._domain_check(c)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        return self.value(c)


def _as_matrix(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DataError(f"expected a square matrix, got shape {c.shape}")
    return c


def _eye_outer(d: int) -> np.ndarray:
    """H[j,k,l,m] = delta_jm delta_kl, the Hessian of tr(c^2)/2."""
    eye = np.eye(d)
    return np.einsum("jm,kl->jklm", eye, eye)


# ---------------------------------------------------------------------------
# builtin scalar functionals
# ---------------------------------------------------------------------------


def _make_trace(d: int) -> MatrixFunctional:
    eye = np.eye(d)

    return MatrixFunctional(
        name="trace",
        r_out=1,
        value=lambda c: np.array([np.trace(_as_matrix(c))]),
        gradient=lambda c: eye[None, :, :].copy(),
        hessian=lambda c: np.zeros((1, d, d, d, d)),
    )


def _make_entry(d: int, j: int, k: int) -> MatrixFunctional:
    if not (0 <= j < d and 0 <= k < d):
        raise ConfigError(f"entry indices ({j}, {k}) out of range for d={d}")
    grad = np.zeros((1, d, d))
    grad[0, j, k] = 1.0

    return MatrixFunctional(
        name=f"entry({j},{k})",
        r_out=1,
        value=lambda c: np.array([_as_matrix(c)[j, k]]),
        gradient=lambda c: grad.copy(),
        hessian=lambda c: np.zeros((1, d, d, d, d)),
    )


def _make_square(d: int) -> MatrixFunctional:
    """c^2 for scalars; tr(c^2) for matrices.  Entire, polynomial growth."""
    hess = 2.0 * _eye_outer(d)[None]

    def value(c: np.ndarray) -> np.ndarray:
        c = _as_matrix(c)
        return np.array([np.trace(c @ c)])

    def gradient(c: np.ndarray) -> np.ndarray:
        c = _as_matrix(c)
        return 2.0 * c.T[None, :, :]

    return MatrixFunctional(
        name="square",
        r_out=1,
        value=value,
        gradient=gradient,
        hessian=lambda c: hess.copy(),
    )


def _domain_floor(name: str, guard: float) -> Callable[[np.ndarray], None]:
    def check(c: np.ndarray) -> None:
        c = _as_matrix(c)
        tr = float(np.trace(c))
        lam_min = float(np.linalg.eigvalsh(0.5 * (c + c.T))[0])
        if tr <= 0.0 or lam_min <= guard * tr:
            raise DomainError(
                f"{name} needs eigenvalues above {guard:.1e} * trace; "
                f"got min eigenvalue {lam_min:.3e} with trace {tr:.3e}"
            )

    return check


def _make_log(d: int) -> MatrixFunctional:
    """log of a scalar variance.  Only defined for d = 1."""
    if d != 1:
        raise ConfigError(
            "log is a scalar functional; use logdet for matrix arguments"
        )

    def value(c: np.ndarray) -> np.ndarray:
        x = float(_as_matrix(c)[0, 0])
        if x <= 0.0:
            raise DomainError(f"log requires a positive variance, got {x:.3e}")
        return np.array([np.log(x)])

    def gradient(c: np.ndarray) -> np.ndarray:
        x = float(_as_matrix(c)[0, 0])
        return np.array([[[1.0 / x]]])

    def hessian(c: np.ndarray) -> np.ndarray:
        x = float(_as_matrix(c)[0, 0])
        return np.array([[[[[-1.0 / x**2]]]]])

    return MatrixFunctional(
        name="log",
        r_out=1,
        value=value,
        gradient=gradient,
        hessian=hessian,
        domain_guard=1e-8,
        _domain_check=_domain_floor("log", 1e-8),
    )


def _make_logdet(d: int) -> MatrixFunctional:
    """log det c.  Gradient (c^{-1})_kj; Hessian -(c^{-1})_kl (c^{-1})_mj."""

    def value(c: np.ndarray) -> np.ndarray:
        c = _as_matrix(c)
        sign, logabs = np.linalg.slogdet(c)
        if sign <= 0.0:
            raise DomainError("logdet requires a positive-definite matrix")
        return np.array([logabs])

    def gradient(c: np.ndarray) -> np.ndarray:
        inv = np.linalg.inv(_as_matrix(c))
        return inv.T[None, :, :]

    def hessian(c: np.ndarray) -> np.ndarray:
        inv = np.linalg.inv(_as_matrix(c))
        return -np.einsum("kl,mj->jklm", inv, inv)[None]

    return MatrixFunctional(
        name="logdet",
        r_out=1,
        value=value,
        gradient=gradient,
        hessian=hessian,
        domain_guard=1e-8,
        _domain_check=_domain_floor("logdet", 1e-8),
    )


def _make_laplace(d: int, w: float) -> MatrixFunctional:
    """Real/imaginary parts of the Laplace-Fourier integrand exp(i w c).

    For d = 1 this is the pair (cos(w c), sin(w c)).  For d > 1 we use the
    trace transform (Re tr exp(i w c), Im tr exp(i w c)), differentiating
    the primary matrix functions cos(w .) and sin(w .) via the
    Daleckii-Krein divided-difference formula on the eigenbasis.  The
    matrix branch is experimental: accuracy degrades near eigenvalue
    collisions where divided differences lose precision.
    """
    if w == 0.0:
        raise ConfigError("laplace requires a nonzero frequency w")

    if d == 1:

        def value(c: np.ndarray) -> np.ndarray:
            x = float(_as_matrix(c)[0, 0])
            return np.array([np.cos(w * x), np.sin(w * x)])

        def gradient(c: np.ndarray) -> np.ndarray:
            x = float(_as_matrix(c)[0, 0])
            return np.array([[[-w * np.sin(w * x)]], [[w * np.cos(w * x)]]])

        def hessian(c: np.ndarray) -> np.ndarray:
            x = float(_as_matrix(c)[0, 0])
            out = np.empty((2, 1, 1, 1, 1))
            out[0] = -(w**2) * np.cos(w * x)
            out[1] = -(w**2) * np.sin(w * x)
            return out

        return MatrixFunctional(
            name=f"laplace({w:g})",
            r_out=2,
            value=value,
            gradient=gradient,
            hessian=hessian,
        )

    def _trace_fun(c: np.ndarray, f, fp, fpp) -> tuple[np.ndarray, ...]:
        """(tr f(c), grad, hess) via divided differences on eigh(c).

        The gradient of tr f(c) is f'(c); its second derivative is governed
        by the divided differences of f' (collapsing to f'' on near-ties),
        applied in the eigenbasis.
        """
        c = _as_matrix(c)
        lam, q = np.linalg.eigh(0.5 * (c + c.T))
        flam = f(lam)
        fplam = fp(lam)
        # divided differences f'[lam_p, lam_q]
        dd1 = np.empty((d, d))
        for p in range(d):
            for r in range(d):
                gap = lam[p] - lam[r]
                if abs(gap) < 1e-12 * max(1.0, abs(lam[p]) + abs(lam[r])):
                    dd1[p, r] = fpp(0.5 * (lam[p] + lam[r]))
                else:
                    dd1[p, r] = (fplam[p] - fplam[r]) / gap
        val = float(flam.sum())
        # d tr f(c) / d c_jk = f'(c)_kj
        fprime_mat = (q * fplam) @ q.T
        grad = fprime_mat.T
        # d^2 tr f(c) / (d c_jk d c_lm) = sum_pq f'[l_p,l_q] Q_kp Q_jq Q_lp Q_mq
        hess = np.einsum("pq,kp,jq,lp,mq->jklm", dd1, q, q, q, q, optimize=True)
        return val, grad, hess

    def _cos_parts(c: np.ndarray):
        return _trace_fun(
            c,
            lambda x: np.cos(w * x),
            lambda x: -w * np.sin(w * x),
            lambda x: -(w**2) * np.cos(w * x),
        )

    def _sin_parts(c: np.ndarray):
        return _trace_fun(
            c,
            lambda x: np.sin(w * x),
            lambda x: w * np.cos(w * x),
            lambda x: -(w**2) * np.sin(w * x),
        )

    def value(c: np.ndarray) -> np.ndarray:
        c = _as_matrix(c)
        lam = np.linalg.eigvalsh(0.5 * (c + c.T))
        return np.array([np.cos(w * lam).sum(), np.sin(w * lam).sum()])

    def gradient(c: np.ndarray) -> np.ndarray:
        _, gc, _ = _cos_parts(c)
        _, gs, _ = _sin_parts(c)
        return np.stack([gc, gs])

    def hessian(c: np.ndarray) -> np.ndarray:
        _, _, hc = _cos_parts(c)
        _, _, hs = _sin_parts(c)
        return np.stack([hc, hs])

    return MatrixFunctional(
        name=f"laplace({w:g})",
        r_out=2,
        value=value,
        gradient=gradient,
        hessian=hessian,
    )


def _make_beta(d: int, split: int) -> MatrixFunctional:
    """Regression-coefficient block: with c partitioned at ``split`` into

        [[A, B], [B^T, S]],   A: s x s,  B: s x (d-s),

    the output is g = A^{-1} B flattened row-major to length s * (d - s).
    Interpreted as the matrix of coefficients regressing the last d - s
    coordinates on the first s.  Requires A to be well-conditioned, hence a
    positive domain guard.
    """
    s = split
    if not (1 <= s < d):
        raise ConfigError(f"beta split must satisfy 1 <= split < d, got {s}")
    r_out = s * (d - s)

    def _blocks(c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = _as_matrix(c)
        a = c[:s, :s]
        b = c[:s, s:]
        try:
            g_inv = np.linalg.inv(a)
        except np.linalg.LinAlgError:
            raise DomainError("beta: leading block is singular") from None
        return g_inv, b, g_inv @ b

    def value(c: np.ndarray) -> np.ndarray:
        _, _, g = _blocks(c)
        return g.reshape(-1)

    def gradient(c: np.ndarray) -> np.ndarray:
        g_inv, _, g = _blocks(c)
        out = np.zeros((r_out, d, d))
        for a_i in range(s):
            for b_i in range(d - s):
                row = out[a_i * (d - s) + b_i]
                # dependence on A_jk (j,k < s): -G_{a j} g_{k b}
                row[:s, :s] = -np.outer(g_inv[a_i], g[:, b_i])
                # dependence on B_jk (j < s, k >= s): G_{a j} delta_{k-s, b}
                row[:s, s + b_i] = g_inv[a_i]
        return out

    def hessian(c: np.ndarray) -> np.ndarray:
        g_inv, _, g = _blocks(c)
        out = np.zeros((r_out, d, d, d, d))
        for a_i in range(s):
            for b_i in range(d - s):
                h = out[a_i * (d - s) + b_i]
                # AA block: G_{al} G_{mj} g_{kb} + G_{aj} G_{kl} g_{mb}
                h[:s, :s, :s, :s] = np.einsum(
                    "l,mj,k->jklm", g_inv[a_i], g_inv, g[:, b_i]
                ) + np.einsum("j,kl,m->jklm", g_inv[a_i], g_inv, g[:, b_i])
                # A then B: d/dB_lm of (-G_{aj} g_{kb}) = -G_{aj} G_{kl} delta_{m-s,b}
                h[:s, :s, :s, s + b_i] = -np.einsum(
                    "j,kl->jkl", g_inv[a_i], g_inv
                )
                # B then A: d/dA_lm of (G_{aj} delta_{k-s,b}) = -G_{al} G_{mj}
                h[:s, s + b_i, :s, :s] = -np.einsum(
                    "l,mj->jlm", g_inv[a_i], g_inv
                )
                # BB block is zero
        return out

    def check(c: np.ndarray) -> None:
        c = _as_matrix(c)
        a = 0.5 * (c[:s, :s] + c[:s, :s].T)
        tr = float(np.trace(c))
        lam_min = float(np.linalg.eigvalsh(a)[0])
        if tr <= 0.0 or lam_min <= 1e-8 * tr:
            raise DomainError(
                "beta needs the leading block bounded away from singularity; "
                f"got min eigenvalue {lam_min:.3e} with trace {tr:.3e}"
            )

    return MatrixFunctional(
        name=f"beta({s})",
        r_out=r_out,
        value=value,
        gradient=gradient,
        hessian=hessian,
        domain_guard=1e-8,
        _domain_check=check,
    )


_BUILTINS = {
    "trace": _make_trace,
    "entry": _make_entry,
    "square": _make_square,
    "log": _make_log,
    "logdet": _make_logdet,
    "laplace": _make_laplace,
    "beta": _make_beta,
}


def builtin(name: str, d: int, **params) -> MatrixFunctional:
    """Construct a builtin functional by name for dimension d.

    Names and parameters: trace; entry(j, k); square; log (d=1 only);
    logdet; laplace(w); beta(split).
    """
    if d < 1:
        raise ConfigError(f"dimension d={d} must be positive")
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ConfigError(
            f"unknown functional {name!r}; available: {sorted(_BUILTINS)}"
        ) from None
    try:
        return factory(d, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# spectral machinery
# ---------------------------------------------------------------------------


def eig_sorted(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with descending eigenvalues and a fixed sign rule.

    Columns of the returned matrix are unit eigenvectors whose largest-
    magnitude entry (first such index on ties) is positive.  Raises
    :class:`DataError` for non-symmetric input.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DataError(f"expected a square matrix, got shape {c.shape}")
    scale = max(float(np.max(np.abs(c))), 1.0)
    if np.max(np.abs(c - c.T)) > 1e-10 * scale:
        raise DataError("eig_sorted requires a symmetric matrix")
    vals, vecs = np.linalg.eigh(0.5 * (c + c.T))
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            vecs[:, j] = -col
    return vals, vecs


@dataclass(frozen=True)
class ClusterSpec:
    """Partition of the descending spectrum into contiguous clusters.

    Built from cluster sizes, e.g. sizes (1, 1, 8) for d = 10 puts the top
    two eigenvalues in singleton clusters and the remaining eight together.
    ``boundaries`` are the cumulative offsets (0, r_1, ..., d).
    """

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ConfigError(f"cluster sizes must be positive, got {self.sizes}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    @property
    def d(self) -> int:
        return sum(self.sizes)

    @property
    def boundaries(self) -> tuple[int, ...]:
        out = [0]
        for s in self.sizes:
            out.append(out[-1] + s)
        return tuple(out)

    def members(self, h: int) -> range:
        b = self.boundaries
        return range(b[h], b[h + 1])


def _check_gaps(vals: np.ndarray, cluster: ClusterSpec) -> None:
    """Require strictly separated clusters relative to the trace scale."""
    tol = GAP_TOL * max(float(np.sum(np.abs(vals))), 1e-300)
    b = cluster.boundaries
    for h in range(cluster.n_clusters - 1):
        gap = vals[b[h + 1] - 1] - vals[b[h + 1]]
        if gap <= tol:
            raise DegeneracyError(
                f"spectral gap between clusters {h} and {h + 1} is {gap:.3e}, "
                f"below tolerance {tol:.3e}"
            )


def eigenvalue_functional(cluster: ClusterSpec) -> MatrixFunctional:
    """Cluster means of the descending spectrum, with derivatives.

    Output h is the average of the eigenvalues in cluster h.  The gradient
    is the average spectral projector; the Hessian couples each cluster
    member r only to eigenvectors v in *other* clusters through
    (q^r_j q^r_l q^v_k q^v_m + q^v_j q^v_l q^r_k q^r_m) / (lam_r - lam_v),
    which is well-defined under the cluster-separation requirement even
    when eigenvalues inside a cluster are tied.
    """
    n_out = cluster.n_clusters
    d = cluster.d

    def _decomp(c: np.ndarray):
        vals, vecs = eig_sorted(c)
        if vals.shape[0] != d:
            raise DataError(
                f"cluster spec is for d={d}, matrix has d={vals.shape[0]}"
            )
        _check_gaps(vals, cluster)
        return vals, vecs

    def value(c: np.ndarray) -> np.ndarray:
        vals, _ = _decomp(c)
        return np.array([vals[list(cluster.members(h))].mean() for h in range(n_out)])

    def gradient(c: np.ndarray) -> np.ndarray:
        _, vecs = _decomp(c)
        out = np.empty((n_out, d, d))
        for h in range(n_out):
            cols = vecs[:, list(cluster.members(h))]
            out[h] = (cols @ cols.T) / cluster.sizes[h]
        return out

    def hessian(c: np.ndarray) -> np.ndarray:
        vals, vecs = _decomp(c)
        out = np.zeros((n_out, d, d, d, d))
        b = cluster.boundaries
        for h in range(n_out):
            acc = np.zeros((d, d, d, d))
            for r in cluster.members(h):
                qr = vecs[:, r]
                for v in range(d):
                    if b[h] <= v < b[h + 1]:
                        continue  # same cluster: no contribution
                    qv = vecs[:, v]
                    gap = vals[r] - vals[v]
                    term = np.einsum("j,l,k,m->jklm", qr, qr, qv, qv)
                    term += np.einsum("j,l,k,m->jklm", qv, qv, qr, qr)
                    acc += term / gap
            out[h] = acc / cluster.sizes[h]
        return out

    return MatrixFunctional(
        name=f"eigenvalue{cluster.sizes}",
        r_out=n_out,
        value=value,
        gradient=gradient,
        hessian=hessian,
    )


def eigenvector_functional(k: int, d: int) -> MatrixFunctional:
    """The k-th (0-based, descending order) eigenvector as an R^d map.

    Requires lam_k to be simple.  Gradient of component a:
        sum_{v != k} q^v_j q^k_k' q^v_a / (lam_k - lam_v)   (perturbation
    theory), and the Hessian is the standard second-order expansion
    combining double energy-denominator terms with the normalization
    correction -1/2 q^k_a sum_v (...)^2.
    """
    if k < 0 or k >= d:
        raise ConfigError(f"eigenvector index k={k} out of range for d={d}")

    def _decomp(c: np.ndarray):
        vals, vecs = eig_sorted(c)
        if vals.shape[0] != d:
            raise DataError(f"functional is for d={d}, matrix has d={vals.shape[0]}")
        tol = GAP_TOL * max(float(np.sum(np.abs(vals))), 1e-300)
        gaps = np.abs(vals - vals[k])
        gaps[k] = np.inf
        if np.min(gaps) <= tol:
            raise DegeneracyError(
                f"eigenvalue {k} is not simple: nearest gap {np.min(gaps):.3e} "
                f"below tolerance {tol:.3e}"
            )
        return vals, vecs

    def value(c: np.ndarray) -> np.ndarray:
        _, vecs = _decomp(c)
        return vecs[:, k].copy()

    def gradient(c: np.ndarray) -> np.ndarray:
        vals, vecs = _decomp(c)
        qk = vecs[:, k]
        out = np.zeros((d, d, d))
        for v in range(d):
            if v == k:
                continue
            qv = vecs[:, v]
            coef = 1.0 / (vals[k] - vals[v])
            # d q^k_a / d c_jk' = sum_{v != k} (q^v_j q^k_k' / gap) q^v_a
            out += coef * np.einsum("a,j,m->ajm", qv, qv, qk)
        return out

    def hessian(c: np.ndarray) -> np.ndarray:
        vals, vecs = _decomp(c)
        qk = vecs[:, k]
        out = np.zeros((d, d, d, d, d))
        # polarized second-order perturbation of the normalized eigenvector:
        # for c(s, t) = c + s E1 + t E2 with symmetric directions,
        #   d2q/dsdt = sum_{v,u != k} [(E1)_vu (E2)_uk + (E2)_vu (E1)_uk]
        #                 / (g_v g_u) q^v
        #            - sum_{v != k} [(E1)_vk (E2)_kk + (E2)_vk (E1)_kk]
        #                 / g_v^2 q^v
        #            - sum_{v != k} (E1)_vk (E2)_vk / g_v^2 q^k
        # with (E)_ab = q^a' E q^b and g_v = lam_k - lam_v; written as a
        # raw-entry tensor valid under contraction with symmetric directions
        others = [v for v in range(d) if v != k]
        for v in others:
            qv = vecs[:, v]
            gv = vals[k] - vals[v]
            for u in others:
                qu = vecs[:, u]
                gu = vals[k] - vals[u]
                out += np.einsum(
                    "a,j,m,l,p->ajmlp", qv, qv, qu, qu, qk
                ) / (gv * gu)
                out += np.einsum(
                    "a,j,m,l,p->ajmlp", qv, qu, qk, qv, qu
                ) / (gv * gu)
            out -= np.einsum("a,j,m,l,p->ajmlp", qv, qv, qk, qk, qk) / gv**2
            out -= np.einsum("a,j,m,l,p->ajmlp", qv, qk, qk, qv, qk) / gv**2
            out -= np.einsum("a,j,m,l,p->ajmlp", qk, qv, qk, qv, qk) / gv**2
        return out

    return MatrixFunctional(
        name=f"eigenvector({k})",
        r_out=d,
        value=value,
        gradient=gradient,
        hessian=hessian,
    )


# ---------------------------------------------------------------------------
# finite-difference verification
# ---------------------------------------------------------------------------


def fd_check(
    f: MatrixFunctional,
    c: np.ndarray,
    h: float = 1e-5,
    directions: Sequence[tuple[int, int]] | None = None,
) -> dict[str, float]:
    """Max relative error of analytic derivatives vs. symmetric differences.

    Perturbs along symmetric directions E_ab + E_ba (a != b) and E_aa,
    comparing against the symmetrized analytic derivatives.  Returns
    ``{"gradient": err, "hessian": err}`` where each error is the max over
    probed directions of |analytic - fd| / max(1, |analytic|, |fd|)-scaled
    by the functional's value magnitude.
    """
    c = _as_matrix(np.asarray(c, dtype=float))
    d = c.shape[0]
    if directions is None:
        directions = [(a, b) for a in range(d) for b in range(a, d)]

    def sym_dir(a: int, b: int) -> np.ndarray:
        e = np.zeros((d, d))
        e[a, b] += 1.0
        e[b, a] += 1.0
        return e

    g0 = f.gradient(c)
    h0 = f.hessian(c)
    scale = max(1.0, float(np.max(np.abs(f.value(c)))))

    def rel(an: np.ndarray, fd: np.ndarray) -> float:
        denom = np.maximum(scale, np.maximum(np.abs(an), np.abs(fd)))
        return float(np.max(np.abs(an - fd) / denom))

    grad_err = 0.0
    for a, b in directions:
        e = sym_dir(a, b)
        fd = (f.value(c + h * e) - f.value(c - h * e)) / (2.0 * h)
        an = np.einsum("rjk,jk->r", g0, e)
        grad_err = max(grad_err, rel(an, fd))

    hess_err = 0.0
    for idx1, (a, b) in enumerate(directions):
        e1 = sym_dir(a, b)
        # pure second difference along e1
        fd = (
            f.value(c + h * e1) - 2.0 * f.value(c) + f.value(c - h * e1)
        ) / h**2
        an = np.einsum("rjklm,jk,lm->r", h0, e1, e1)
        hess_err = max(hess_err, rel(an, fd))
        for a2, b2 in directions[idx1 + 1 :]:
            e2 = sym_dir(a2, b2)
            fd = (
                f.value(c + h * (e1 + e2))
                - f.value(c + h * (e1 - e2))
                - f.value(c - h * (e1 - e2))
                + f.value(c - h * (e1 + e2))
            ) / (4.0 * h**2)
            an = np.einsum("rjklm,jk,lm->r", h0, e1, e2)
            hess_err = max(hess_err, rel(an, fd))
    return {"gradient": grad_err, "hessian": hess_err}
