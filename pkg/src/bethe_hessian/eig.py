"""Eigen-solvers, exact eigenvalue counting and perturbation certificates.

Counting uses Sylvester's law of inertia: a symmetric ``M = L D L^T``
with unit lower-triangular ``L`` has as many negative eigenvalues as ``D``
has negative (block) entries.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.linalg import ArpackNoConvergence, eigs, eigsh, splu

from .errors import (
    ComplexDominance,
    FactorizationBreakdown,
    GapZero,
    NoConvergence,
    RankDeficientOverlap,
    ValidationError,
)
from .operators import gershgorin_bounds

__all__ = [
    "EigPairs",
    "NBEigenbundle",
    "Inertia",
    "smallest_eigs",
    "inertia",
    "count_below",
    "leading_eigs_nonsym",
    "subspace_distance",
    "local_weyl_certificate",
    "local_davis_kahan_certificate",
    "WeylCertificate",
    "DavisKahanCertificate",
    "save_vectors",
    "load_vectors",
]

DENSE_EIG_MAX_N = 1500
SHIFT_PERTURBATION = 1e-10
REAL_IMAG_RTOL = 1e-6


def _as_matrix(M):
    if hasattr(M, "matrix"):
        M = M.matrix
    if sp.issparse(M):
        return sp.csr_array(M)
    return np.asarray(M, dtype=np.float64)


def _toarray(M):
    return M.toarray() if sp.issparse(M) else np.array(M)


def _norm_bound(M):
    lo, hi = gershgorin_bounds(M)
    return max(1.0, abs(lo), abs(hi))


def _canonical_sign(V):
    """Flip columns so the largest-magnitude entry is positive."""
    V = np.array(V)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1
    return V * signs


@dataclass
class EigPairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "values": np.asarray(self.values).tolist(),
            "residuals": np.asarray(self.residuals).tolist(),
            "meta": self.meta,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


_VEC_MAGIC = b"EIGV"
_VEC_VERSION = 1


def save_vectors(path, vectors):
    """Write an ``n x k`` float64 matrix column-major behind a 16-byte header."""
    V = np.asarray(vectors, dtype="<f8")
    if V.ndim == 1:
        V = V[:, None]
    n, k = V.shape
    with open(path, "wb") as fh:
        fh.write(_VEC_MAGIC + struct.pack("<III", _VEC_VERSION, n, k))
        fh.write(np.asfortranarray(V).tobytes(order="F"))


def load_vectors(path):
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != _VEC_MAGIC:
            raise ValidationError(f"{path} is not an EIGV vector file")
        version, n, k = struct.unpack("<III", head[4:])
        if version != _VEC_VERSION:
            raise ValidationError(f"unsupported EIGV version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * k:
        raise ValidationError(f"{path}: expected {n * k} values, found {data.size}")
    return data.reshape((n, k), order="F").astype(np.float64)


def smallest_eigs(M, k, tol=1e-8, seed=0, maxiter=None, dense_max=64) -> EigPairs:
    """The ``k`` algebraically smallest eigenpairs of a symmetric matrix.

    Small problems (``n <= dense_max``) go to LAPACK; larger ones to
    Lanczos (ARPACK) with a seeded start vector. Every returned pair
    satisfies ``||M v - lam v|| <= tol * max(1, ||M||)``.
    """
    A = _as_matrix(M)
    n = A.shape[0]
    if not 0 <= k <= n:
        raise ValidationError(f"k={k} must lie in [0, n={n}]")
    if k == 0:
        return EigPairs(np.zeros(0), np.zeros((n, 0)), np.zeros(0), {"method": "none"})
    scale = _norm_bound(A)
    meta = {"tol": tol, "seed": int(seed), "threads": 1}
    if n <= dense_max or k >= n - 1:
        w, V = np.linalg.eigh(_toarray(A))
        w, V = w[:k], V[:, :k]
        meta["method"] = "dense"
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        ncv = min(n, max(2 * k + 1, 20))
        maxiter = maxiter or max(10, 5 * n // ncv)
        best = None
        for attempt_tol in (tol / 10, tol / 1000):
            try:
                w, V = eigsh(A, k=k, which="SA", tol=attempt_tol, v0=v0, ncv=ncv, maxiter=maxiter)
            except ArpackNoConvergence as exc:
                raise NoConvergence(
                    "Lanczos did not converge", iterations=maxiter,
                    best_residual=None if not len(exc.eigenvalues) else float("nan"),
                ) from None
            order = np.argsort(w)
            w, V = w[order], V[:, order]
            res = np.linalg.norm(A @ V - V * w, axis=0)
            best = res.max()
            if best <= tol * scale:
                break
        else:
            raise NoConvergence("residual above tolerance", iterations=maxiter, best_residual=best)
        meta.update(method="lanczos", ncv=ncv, maxiter=maxiter)
    V = _canonical_sign(V)
    res = np.linalg.norm(A @ V - V * w, axis=0)
    return EigPairs(np.asarray(w), V, res, meta)


@dataclass(frozen=True)
class Inertia:
    negative: int
    zero: int
    positive: int
    method: str
    shift: float


def _inertia_sparse_ldl(S, scale):
    """LDL^T via SuperLU restricted to symmetric diagonal pivoting."""
    try:
        f = splu(
            sp.csc_array(S),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError:
        return None  # exactly singular pivot
    if not np.array_equal(f.perm_r, f.perm_c):
        return None
    piv = f.U.diagonal()
    if not np.all(np.isfinite(piv)):
        return None
    # backward-error check; unpivoted LDL^T may be unstable
    rng = np.random.default_rng(12345)
    b = rng.standard_normal(S.shape[0])
    x = f.solve(b)
    berr = np.linalg.norm(S @ x - b) / (scale * np.linalg.norm(x) + np.linalg.norm(b))
    if not np.isfinite(berr) or berr > 1e-10:
        return None
    tiny = 1e-13 * scale
    zero = int(np.sum(np.abs(piv) <= tiny))
    neg = int(np.sum(piv < -tiny))
    return neg, zero, len(piv) - neg - zero


def _inertia_bunch_kaufman(S, scale):
    """Inertia from LAPACK's Bunch-Kaufman ``sytrf`` (1x1 and 2x2 pivots)."""
    a = np.array(_toarray(S), dtype=np.float64, order="F")
    n = a.shape[0]
    ldu, ipiv, info = lapack.dsytrf(a, lower=1)
    if info < 0:
        raise FactorizationBreakdown(f"dsytrf argument error {info}")
    tiny = 1e-13 * scale
    neg = zero = 0
    k = 0
    while k < n:
        if ipiv[k] > 0:
            p = ldu[k, k]
            if abs(p) <= tiny:
                zero += 1
            elif p < 0:
                neg += 1
            k += 1
        else:
            a11, a21, a22 = ldu[k, k], ldu[k + 1, k], ldu[k + 1, k + 1]
            w = np.linalg.eigvalsh(np.array([[a11, a21], [a21, a22]]))
            zero += int(np.sum(np.abs(w) <= tiny))
            neg += int(np.sum(w < -tiny))
            k += 2
    return neg, zero, n - neg - zero


def _inertia_dense_eig(S, scale):
    w = np.linalg.eigvalsh(_toarray(S))
    tiny = 1e-12 * scale
    zero = int(np.sum(np.abs(w) <= tiny))
    neg = int(np.sum(w < -tiny))
    return neg, zero, len(w) - neg - zero


_ENGINES = {
    "sparse-ldl": _inertia_sparse_ldl,
    "bunch-kaufman": _inertia_bunch_kaufman,
    "dense-eig": _inertia_dense_eig,
}


def inertia(M, shift=0.0, method="auto") -> Inertia:
    """Inertia of ``M + shift * I``.

    ``method="auto"`` tries the sparse LDL^T first, then dense Bunch-Kaufman,
    then (for ``n <= 1500``) a dense eigendecomposition.
    """
    A = _as_matrix(M)
    n = A.shape[0]
    if n == 0:
        return Inertia(0, 0, 0, "empty", shift)
    if sp.issparse(A):
        S = sp.csr_array(A + shift * sp.eye_array(n))
    else:
        S = A + shift * np.eye(n)
    scale = _norm_bound(S)
    if method == "auto":
        chain = ["sparse-ldl", "bunch-kaufman"]
        if n <= DENSE_EIG_MAX_N:
            chain.append("dense-eig")
    else:
        if method not in _ENGINES:
            raise ValidationError(f"unknown inertia method {method!r}")
        chain = [method]
    result = None
    for name in chain:
        S_in = S if name == "sparse-ldl" or not sp.issparse(S) else S.toarray()
        if name == "sparse-ldl" and not sp.issparse(S_in):
            S_in = sp.csr_array(S_in)
        out = _ENGINES[name](S_in, scale)
        if out is None:
            continue
        result = Inertia(*out, name, shift)
        if result.zero == 0:
            return result
    if result is None:
        raise FactorizationBreakdown("no inertia engine succeeded")
    return result


def count_below(M, threshold=0.0, method="auto") -> int:
    """Exact number of eigenvalues strictly below ``-threshold``.

    If ``-threshold`` is (numerically) an eigenvalue the shift is nudged up
    by 1e-10, so such an eigenvalue is not counted.
    """
    shift = float(threshold)
    for attempt in range(4):
        res = inertia(M, shift, method)
        if res.zero == 0:
            return res.negative
        shift += SHIFT_PERTURBATION * 10**attempt
    raise FactorizationBreakdown(
        f"matrix stays singular near {-threshold:g} after perturbing the shift"
    )


@dataclass
class NBEigenbundle:
    """Eigenpairs ``(lam, [x; y])`` of the reduced non-backtracking matrix, ``||y|| = 1``."""

    lambdas: np.ndarray
    x_parts: np.ndarray
    y_parts: np.ndarray
    imag_norms: np.ndarray
    residuals: np.ndarray
    side: str
    meta: dict = field(default_factory=dict)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.lambdas)


def leading_eigs_nonsym(
    Bt, k, side="largest-real", tol=1e-8, seed=0, strict=True, dense_max=400
) -> NBEigenbundle:
    """``k`` eigenpairs of the reduced non-backtracking matrix at one end of the real axis.

    Eigenvalues with ``|Im lam| <= 1e-6 max(1, |lam|)`` are projected to the
    real line together with their eigenvectors. With ``strict``, raises
    :class:`ComplexDominance` if a returned eigenvalue has
    ``|Im lam| > 0.1 |lam|``.
    """
    A = _as_matrix(Bt)
    N = A.shape[0]
    if N % 2:
        raise ValidationError("reduced non-backtracking matrix must have even size")
    n = N // 2
    if not 0 < k <= N:
        raise ValidationError(f"k={k} must lie in [1, {N}]")
    if side not in ("largest-real", "smallest-real"):
        raise ValidationError(f"unknown side {side!r}")
    meta = {"tol": tol, "seed": int(seed), "threads": 1}
    if N <= dense_max or k >= N - 1:
        w, V = np.linalg.eig(_toarray(A))
        meta["method"] = "dense"
    else:
        rng = np.random.default_rng(seed)
        ncv = min(N, max(2 * k + 1, 40))
        maxiter = max(10, 5 * N // ncv)
        try:
            w, V = eigs(
                sp.csr_array(A), k=k, which="LR" if side == "largest-real" else "SR",
                tol=tol / 10, v0=rng.standard_normal(N), ncv=ncv, maxiter=maxiter,
            )
        except ArpackNoConvergence as exc:
            raise NoConvergence("Arnoldi did not converge", iterations=maxiter,
                                best_residual=None) from exc
        meta.update(method="arnoldi", ncv=ncv, maxiter=maxiter)
    sgn = -1.0 if side == "largest-real" else 1.0
    order = sorted(range(len(w)), key=lambda j: (sgn * w[j].real, abs(w[j].imag)))[:k]
    w, V = w[order], V[:, order]

    lams, xs, ys, res, raw_imag = [], [], [], [], []
    for j in range(k):
        lam, v = complex(w[j]), np.asarray(V[:, j], dtype=complex)
        raw_imag.append(abs(lam.imag))
        y = v[n:]
        piv = y[np.argmax(np.abs(y))]
        v = v * (abs(piv) / piv) / np.linalg.norm(y)
        if abs(lam.imag) <= REAL_IMAG_RTOL * max(1.0, abs(lam)):
            lam = lam.real
            v = v.real / np.linalg.norm(v[n:].real)
        lams.append(lam)
        res.append(np.linalg.norm(A @ v - lam * v))
        xs.append(v[:n])
        ys.append(v[n:])
    # solver-reported |Im lam|, recorded before any projection to the real line
    imag = np.asarray(raw_imag)
    all_real = all(isinstance(x, float) for x in lams)
    dtype = np.float64 if all_real else complex
    bundle = NBEigenbundle(
        np.asarray(lams, dtype=dtype),
        np.column_stack(xs).astype(dtype),
        np.column_stack(ys).astype(dtype),
        imag,
        np.asarray(res),
        side,
        meta,
    )
    if strict:
        bad = imag > 0.1 * np.abs(np.asarray(lams, dtype=complex))
        if np.any(bad):
            raise ComplexDominance(
                f"eigenvalues {np.asarray(lams)[bad].tolist()} have large imaginary parts"
            )
    return bundle


def subspace_distance(V, Y):
    """Orthogonal Procrustes: ``min_O ||V - Y O||_F`` and the minimising ``O``."""
    V = np.asarray(V, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if V.shape[1] != Y.shape[1] or V.shape[0] != Y.shape[0]:
        raise ValidationError(f"shape mismatch {V.shape} vs {Y.shape}")
    if V.shape[1] == 0:
        return 0.0, np.zeros((0, 0))
    U, s, Wt = np.linalg.svd(Y.T @ V)
    if s.min() < 1e-12:
        warnings.warn("V^T Y is rank deficient", RankDeficientOverlap, stacklevel=2)
    O = U @ Wt
    return float(np.linalg.norm(V - Y @ O)), O


@dataclass(frozen=True)
class WeylCertificate:
    eps: float
    bound: float
    verified: bool | None
    matched: np.ndarray | None = None


def _match_within(lams, spectrum, bound):
    """Distinct eigenvalues within ``bound`` of each ``lam`` (greedy on sorted data)."""
    order = np.argsort(lams)
    spectrum = np.sort(spectrum)
    out = np.empty(len(lams))
    j = 0
    for i in order:
        lo = lams[i] - bound
        while j < len(spectrum) and spectrum[j] < lo - 1e-12 * max(1.0, abs(lo)):
            j += 1
        if j == len(spectrum) or spectrum[j] > lams[i] + bound + 1e-12 * max(1.0, abs(lams[i])):
            return None
        out[i] = spectrum[j]
        j += 1
    return out


def local_weyl_certificate(M, lambdas, vectors, verify=True) -> WeylCertificate:
    """``k`` orthonormal pseudo-eigenpairs with residual ``<= eps`` force ``k``
    distinct eigenvalues within ``2 sqrt(k) eps`` of the ``lambdas``.

    With ``verify`` (and ``n <= 1500``) the claim is checked against the full
    dense spectrum.
    """
    A = _as_matrix(M)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    Vv = np.asarray(vectors, dtype=np.float64).reshape(A.shape[0], -1)
    k = len(lambdas)
    eps = float(np.max(np.linalg.norm(A @ Vv - Vv * lambdas, axis=0))) if k else 0.0
    bound = 2 * np.sqrt(k) * eps
    if not verify or A.shape[0] > DENSE_EIG_MAX_N:
        return WeylCertificate(eps, bound, None)
    spec = np.linalg.eigvalsh(_toarray(A))
    matched = _match_within(lambdas, spec, bound)
    return WeylCertificate(eps, bound, matched is not None, matched)


@dataclass(frozen=True)
class DavisKahanCertificate:
    dist: float
    eps: float
    gap: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.dist <= self.bound * (1 + 1e-9) + 1e-12


def local_davis_kahan_certificate(M, v, lam, E) -> DavisKahanCertificate:
    """``dist(v, E) <= ||M v - lam v|| / dist(lam, Sp(M restricted to E-perp))``.

    ``E`` (columns) must span an ``M``-invariant subspace; ``v`` is a unit vector.
    """
    A = _toarray(_as_matrix(M))
    n = A.shape[0]
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    E = np.asarray(E, dtype=np.float64).reshape(n, -1)
    Qfull, _ = np.linalg.qr(np.column_stack([E, np.eye(n)]))
    k = np.linalg.matrix_rank(E)
    QE, Qp = Qfull[:, :k], Qfull[:, k:n]
    scale = _norm_bound(A)
    if np.linalg.norm(A @ QE - QE @ (QE.T @ A @ QE)) > 1e-8 * scale:
        raise ValidationError("E is not an invariant subspace of M")
    eps = float(np.linalg.norm(A @ v - lam * v))
    dist = float(np.linalg.norm(v - QE @ (QE.T @ v)))
    restricted = scipy.linalg.eigvalsh(Qp.T @ A @ Qp) if Qp.shape[1] else np.zeros(0)
    gap = float(np.min(np.abs(restricted - lam))) if restricted.size else np.inf
    if gap <= 1e-14 * scale:
        raise GapZero(f"lambda={lam:g} lies in the spectrum of M on E-perp")
    return DavisKahanCertificate(dist, eps, gap, eps / gap)
