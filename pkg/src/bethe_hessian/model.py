"""Stochastic block model parameters, signal spectrum and closed-form predictions.

The signal matrix is ``Q = P diag(pi)``. It is similar to the symmetric
``diag(pi)^{1/2} P diag(pi)^{1/2}``, so its eigenvalues ``mu`` are real.
Eigenvalues with ``mu**2 > d`` (Kesten-Stigum) are called informative.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricP,
    DegenerateTie,
    DegreeRowMismatch,
    IndexOutOfInformativeRange,
    NegativeEntry,
    PiNotSimplex,
    ProbabilityOverflow,
    SubcriticalDegree,
    ValidationError,
)
from .graph import SparseGraph

__all__ = [
    "ModelParams",
    "SignalSpectrum",
    "LabeledGraph",
    "OutlierPrediction",
    "CrossMoments",
    "validate_model",
    "signal_spectrum",
    "sample_graph",
    "block_sizes",
    "predicted_outlier_locations",
    "predicted_cross_moments",
    "real_outlier_margin",
    "nu",
    "ks_root",
    "load_model",
    "save_model",
]

_ROW_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class ModelParams:
    P: np.ndarray
    pi: np.ndarray
    n: int
    d: float

    @property
    def r(self) -> int:
        return len(self.pi)

    @property
    def Q(self) -> np.ndarray:
        return self.P * self.pi[None, :]

    def to_dict(self):
        return {"P": self.P.tolist(), "pi": self.pi.tolist(), "n": self.n}


def validate_model(P, pi, n, allow_subcritical=False) -> ModelParams:
    """Check SBM parameters and compute the average degree ``d``.

    ``allow_subcritical`` skips the ``d > 1`` requirement; sampling is well
    defined for any ``d`` even though detection is not.
    """
    P = np.array(P, dtype=np.float64)
    pi = np.array(pi, dtype=np.float64).reshape(-1)
    n = int(n)
    r = len(pi)
    if P.shape != (r, r) or r == 0:
        raise ValidationError(f"P has shape {P.shape} but pi has length {r}")
    if n <= 0:
        raise ValidationError("n must be a positive integer")
    if not np.all(np.isfinite(P)):
        raise ValidationError("P has non-finite entries")
    if not np.array_equal(P, P.T):
        raise AsymmetricP("P must be symmetric")
    if np.any(P < 0):
        raise NegativeEntry("P has negative entries")
    if np.any(~np.isfinite(pi)) or np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise PiNotSimplex("pi must be positive and sum to 1")
    if np.any(P / n > 1):
        raise ProbabilityOverflow("some P_ij / n exceeds 1")
    rows = P @ pi
    d = float(rows.max())
    if np.any(np.abs(rows - d) > _ROW_RTOL * max(abs(d), 1.0)):
        raise DegreeRowMismatch(f"row sums of P diag(pi) differ: {rows.tolist()}")
    if d <= 1 and not allow_subcritical:
        raise SubcriticalDegree(f"average degree d={d} <= 1")
    P.setflags(write=False)
    pi.setflags(write=False)
    return ModelParams(P, pi, n, d)


def load_model(path, allow_subcritical=False) -> ModelParams:
    """Read ``{"P": [[...]], "pi": [...], "n": N}`` from a JSON file."""
    try:
        raw = json.loads(Path(path).read_text())
        P, pi, n = raw["P"], raw["pi"], raw["n"]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"bad model file {path}: {exc}") from None
    return validate_model(P, pi, n, allow_subcritical=allow_subcritical)


def save_model(params: ModelParams, path):
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


@dataclass(frozen=True, eq=False)
class SignalSpectrum:
    """Eigen-structure of ``Q = P diag(pi)``.

    ``mu`` is sorted by decreasing ``|mu|`` (ties: positive first); ``phi``
    holds the matching pi-orthonormal eigenvectors as columns and ``psi``
    the orthonormal eigenvectors of the symmetrised matrix.
    ``plus_idx``/``minus_idx`` index the informative positive/negative
    eigenvalues in the orders ``mu_1^+ >= mu_2^+ >= ...`` and
    ``mu_1^- <= mu_2^- <= ...``.
    """

    d: float
    mu: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    tau: np.ndarray
    r0: int
    plus_idx: np.ndarray
    minus_idx: np.ndarray
    pi: np.ndarray = field(repr=False)

    @property
    def r_plus(self) -> int:
        return len(self.plus_idx)

    @property
    def r_minus(self) -> int:
        return len(self.minus_idx)

    @property
    def mu_plus(self) -> np.ndarray:
        return self.mu[self.plus_idx]

    @property
    def mu_minus(self) -> np.ndarray:
        return self.mu[self.minus_idx]

    @property
    def tau_plus(self) -> np.ndarray:
        return self.tau[self.plus_idx]

    @property
    def tau_minus(self) -> np.ndarray:
        return self.tau[self.minus_idx]

    def reconstruct_Q(self) -> np.ndarray:
        return self.phi @ np.diag(self.mu) @ self.phi.T @ np.diag(self.pi)


def _sign_fix(v):
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def signal_spectrum(params: ModelParams) -> SignalSpectrum:
    pi = params.pi
    s = np.sqrt(pi)
    S = s[:, None] * params.P * s[None, :]
    w, U = np.linalg.eigh((S + S.T) / 2)
    U = np.column_stack([_sign_fix(U[:, j]) for j in range(len(w))])

    # |mu| descending, positive before negative on ties, then eigenvector
    # entries lexicographically descending
    scale = max(1.0, float(np.abs(w).max()))
    tie = 1e-12 * scale
    keys = []
    for j in range(len(w)):
        keys.append((-round(abs(w[j]) / tie), 0 if w[j] >= 0 else 1, tuple(-U[:, j])))
    order = sorted(range(len(w)), key=lambda j: keys[j])
    mu = w[order]
    psi = U[:, order]
    for a in range(len(mu)):
        for b in range(a + 1, len(mu)):
            if abs(abs(mu[a]) - abs(mu[b])) <= tie and mu[a] * mu[b] < 0:
                warnings.warn(
                    f"|mu| tie between {mu[a]:g} and {mu[b]:g}; positive placed first",
                    DegenerateTie,
                    stacklevel=2,
                )
    phi = psi / s[:, None]

    d = params.d
    with np.errstate(divide="ignore"):
        tau = np.where(mu != 0, d / np.where(mu != 0, mu, 1.0) ** 2, np.inf)
    informative = mu**2 > d
    r0 = int(informative.sum())
    plus = np.flatnonzero(informative & (mu > 0))
    minus = np.flatnonzero(informative & (mu < 0))
    plus = plus[np.argsort(-mu[plus], kind="stable")]
    minus = minus[np.argsort(mu[minus], kind="stable")]
    for a in (mu, phi, psi, tau, plus, minus):
        a.setflags(write=False)
    return SignalSpectrum(d, mu, phi, psi, tau, r0, plus, minus, pi)


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    graph: SparseGraph
    sigma: np.ndarray
    params: ModelParams


def block_sizes(n, pi):
    """Block sizes ``round(n * pi_k)`` with the remainder given to the largest block."""
    sizes = np.rint(n * np.asarray(pi)).astype(np.int64)
    sizes[int(np.argmax(pi))] += n - sizes.sum()
    if np.any(sizes < 0):
        raise ValidationError(f"cannot split n={n} into blocks {pi}")
    return sizes


def _triangle_pairs(k, s):
    """Map linear indices ``k`` to pairs ``i < j < s`` ordered by ``(j, i)``."""
    k = np.asarray(k, dtype=np.int64)
    j = ((1 + np.sqrt(1 + 8 * k.astype(np.float64))) // 2).astype(np.int64)
    # float sqrt can be off by one for large k
    j -= (j * (j - 1) // 2) > k
    j += ((j + 1) * j // 2) <= k
    i = k - j * (j - 1) // 2
    return i, j


def sample_graph(params: ModelParams, seed: int) -> LabeledGraph:
    """Draw an SBM graph; every pair ``i < j`` is an edge with prob. ``P/n``.

    Per block pair the number of edges is binomial and the edge set is a
    uniform subset of that size, which has the same law as independent
    Bernoulli trials.
    """
    rng = np.random.default_rng(int(seed))
    sizes = block_sizes(params.n, params.pi)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    sigma = np.repeat(np.arange(params.r), sizes)
    chunks = []
    for a in range(params.r):
        for b in range(a, params.r):
            p = params.P[a, b] / params.n
            sa, sb = int(sizes[a]), int(sizes[b])
            total = sa * (sa - 1) // 2 if a == b else sa * sb
            if p <= 0 or total == 0:
                continue
            k = rng.binomial(total, min(p, 1.0))
            picks = rng.choice(total, size=k, replace=False, shuffle=False)
            if a == b:
                i, j = _triangle_pairs(picks, sa)
                u, v = starts[a] + i, starts[a] + j
            else:
                u, v = starts[a] + picks // sb, starts[b] + picks % sb
            chunks.append(np.column_stack([u, v]))
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    sigma.setflags(write=False)
    return LabeledGraph(SparseGraph.from_edges(params.n, edges), sigma, params)


@dataclass(frozen=True)
class OutlierPrediction:
    values: np.ndarray
    normalized: np.ndarray


def predicted_outlier_locations(spectrum: SignalSpectrum, sign) -> OutlierPrediction:
    """Predicted negative outliers of ``H(+sqrt d)`` (sign ``+``) or ``H(-sqrt d)``.

    Values are ``(s - mu)(s - d/mu)`` with ``s = +-sqrt(d)``, one per
    informative eigenvalue of that sign; ``normalized`` divides by ``d``,
    which equals ``(1 - 1/sqrt(tau))(1 - sqrt(tau))``. Empty if the sign has
    no informative eigenvalue.
    """
    d = spectrum.d
    if sign in ("+", 1, "plus"):
        s, mu = np.sqrt(d), spectrum.mu_plus
    elif sign in ("-", -1, "minus"):
        s, mu = -np.sqrt(d), spectrum.mu_minus
    else:
        raise ValidationError(f"sign must be '+' or '-', got {sign!r}")
    values = (s - mu) * (s - d / mu)
    tau = d / mu**2
    normalized = (1 - 1 / np.sqrt(tau)) * (1 - np.sqrt(tau))
    return OutlierPrediction(values, normalized)


@dataclass(frozen=True)
class CrossMoments:
    xy: float
    xx: float
    yy: float
    resid: float


def predicted_cross_moments(spectrum: SignalSpectrum, i: int) -> CrossMoments:
    """Limits of ``<x_i, y_i>``, ``<x_i, x_i>``, ``<y_i, y_i>`` for the reduced NB eigenvector.

    ``i`` is a 0-based index into ``spectrum.mu`` and must be informative.
    ``resid`` is the limit of ``||x_i - <x_i, y_i> y_i||``.
    """
    if not 0 <= i < spectrum.r0:
        raise IndexOutOfInformativeRange(f"index {i} outside [0, {spectrum.r0})")
    d, mu, tau = spectrum.d, float(spectrum.mu[i]), float(spectrum.tau[i])
    return CrossMoments(
        xy=(d + 1 - tau) / mu,
        xx=(d * d + d + (2 * d + 1) * (1 - tau)) / mu**2,
        yy=1.0,
        resid=float(np.sqrt((d + tau * (1 - tau)) / mu**2)),
    )


def real_outlier_margin(d, mu):
    """``|mu| - ((d+1)/|mu| - d/|mu|^3)``, equal to ``(mu^2-d)(mu^2+d-2)/|mu|^3``.

    Positive for informative ``mu`` whenever ``d > 1``; this is why the
    informative non-backtracking eigenvalues cannot be complex.
    """
    a = np.abs(mu)
    return a - ((d + 1) / a - d / a**3)


def ks_root(d, mu):
    """``(d + 1 - d/mu^2) / mu``: the second root of the quadratic form ``y_i^T H(t) y_i``."""
    return (d + 1 - d / mu**2) / mu


def nu(mu, d, t):
    """``(t - ks_root(d, mu)) (t - mu)``, the limit of ``y^T H(t) y`` along ``y_i``."""
    return (t - ks_root(d, mu)) * (t - mu)
