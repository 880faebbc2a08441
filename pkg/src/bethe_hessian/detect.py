"""Spectral clustering with the Bethe-Hessian, overlap scoring and theory reports.

Pipeline (:func:`cluster`):

1. ``d_hat`` = mean degree; build ``H(+sqrt(d_hat))`` and ``H(-sqrt(d_hat))``.
2. Count eigenvalues below ``-eps`` (default ``eps = 1/log n``) of each:
   ``r_plus``, ``r_minus``.
3. Embed with the matching eigenvectors, ``V = [V_plus, V_minus]``.
4. k-means on the rows of ``V`` with ``k = r_plus + r_minus``.

Labels are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .eig import (
    count_below,
    leading_eigs_nonsym,
    smallest_eigs,
    subspace_distance,
)
from .errors import BelowThreshold, LengthMismatch, SubcriticalDegree, ValidationError
from .graph import SparseGraph, mean_degree
from .model import (
    LabeledGraph,
    SignalSpectrum,
    predicted_cross_moments,
    predicted_outlier_locations,
)
from .operators import bethe_hessian, kernel_residual, reduced_nb

__all__ = [
    "CountEstimate",
    "Embedding",
    "KMeansResult",
    "ClusterConfig",
    "DetectionResult",
    "TheoryTolerances",
    "TheoryReport",
    "default_epsilon",
    "estimate_counts",
    "embed",
    "kmeans",
    "cluster",
    "overlap",
    "overlap_bruteforce",
    "theory_report",
]

NO_INFORMATIVE = "NoInformativeEigenvalues"


def default_epsilon(n: int) -> float:
    return float(1.0 / np.log(n))


@dataclass(frozen=True)
class CountEstimate:
    r_plus: int
    r_minus: int
    d_hat: float
    eps: float

    @property
    def r(self) -> int:
        return self.r_plus + self.r_minus


def _d_hat_checked(graph):
    d_hat = mean_degree(graph)
    if d_hat <= 1:
        raise SubcriticalDegree(f"mean degree {d_hat:g} <= 1")
    return d_hat


def estimate_counts(graph: SparseGraph, eps=None) -> CountEstimate:
    d_hat = _d_hat_checked(graph)
    eps = default_epsilon(graph.n) if eps is None else float(eps)
    s = np.sqrt(d_hat)
    r_plus = count_below(bethe_hessian(graph, s), eps)
    r_minus = count_below(bethe_hessian(graph, -s), eps)
    return CountEstimate(r_plus, r_minus, d_hat, eps)


@dataclass
class Embedding:
    V_plus: np.ndarray
    V_minus: np.ndarray
    values_plus: np.ndarray
    values_minus: np.ndarray

    @property
    def V(self):
        return np.hstack([self.V_plus, self.V_minus])


def embed(graph: SparseGraph, eps=None, counts: CountEstimate | None = None,
          tol=1e-8, seed=0) -> Embedding:
    """Unit eigenvectors of ``H(+-sqrt(d_hat))`` for eigenvalues below ``-eps``, ascending."""
    counts = counts or estimate_counts(graph, eps)
    s = np.sqrt(counts.d_hat)
    plus = smallest_eigs(bethe_hessian(graph, s), counts.r_plus, tol=tol, seed=seed)
    minus = smallest_eigs(bethe_hessian(graph, -s), counts.r_minus, tol=tol, seed=seed)
    return Embedding(plus.vectors, minus.vectors, plus.values, minus.values)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    cost: float
    restart_costs: list
    empty_repairs: int
    iterations: int


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(X, r, rng):
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, r):
        total = d2.sum()
        i = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(X[i])
        d2 = np.minimum(d2, ((X - X[i]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(X, C, max_iter):
    repairs = 0
    labels = None
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        new = D.argmin(axis=1)
        own = D[np.arange(len(X)), new]
        while True:
            counts = np.bincount(new, minlength=len(C))
            empty = np.flatnonzero(counts == 0)
            if empty.size == 0:
                break
            # move the point farthest from its centre into the empty cluster,
            # never emptying a singleton
            cand = np.where(counts[new] > 1, own, -np.inf)
            far = int(np.argmax(cand))
            new[far] = empty[0]
            own[far] = 0.0
            repairs += 1
        C = np.array([X[new == j].mean(axis=0) for j in range(len(C))])
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
    cost = float(((X - C[labels]) ** 2).sum())
    return labels, C, cost, repairs, it


def kmeans(V, r, restarts=20, seed=0, max_iter=300) -> KMeansResult:
    """Best of ``restarts`` Lloyd runs from k-means++ seeds.

    Restart ``i`` draws from the ``i``-th child of ``SeedSequence(seed)``,
    so results are deterministic for a fixed seed.
    """
    X = np.asarray(V, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if r < 1:
        raise ValidationError("r must be at least 1")
    if n == 0:
        return KMeansResult(np.zeros(0, dtype=int), np.zeros((r, X.shape[1])), 0.0, [], 0, 0)
    r = min(r, n)
    best = None
    costs = []
    repairs_total = 0
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        labels, C, cost, repairs, it = _lloyd(X, _kmeanspp(X, r, rng), max_iter)
        costs.append(cost)
        repairs_total += repairs
        if best is None or cost < best[2]:
            best = (labels, C, cost, it)
    labels, C, cost, it = best
    return KMeansResult(labels, C, cost, costs, repairs_total, it)


@dataclass
class ClusterConfig:
    eps: float | None = None
    restarts: int = 20
    seed: int = 0
    tol: float = 1e-8


@dataclass
class DetectionResult:
    r_hat_plus: int
    r_hat_minus: int
    V_plus: np.ndarray
    V_minus: np.ndarray
    sigma_hat: np.ndarray
    kmeans_cost: float
    eps: float
    d_hat: float
    seed: int
    flags: list = field(default_factory=list)

    @property
    def r_hat(self) -> int:
        return self.r_hat_plus + self.r_hat_minus

    def to_dict(self):
        return {
            "r_hat_plus": self.r_hat_plus,
            "r_hat_minus": self.r_hat_minus,
            "r_hat": self.r_hat,
            "kmeans_cost": self.kmeans_cost,
            "eps": self.eps,
            "d_hat": self.d_hat,
            "seed": self.seed,
            "flags": list(self.flags),
        }


def cluster(graph: SparseGraph, config: ClusterConfig | None = None) -> DetectionResult:
    config = config or ClusterConfig()
    counts = estimate_counts(graph, config.eps)
    emb = embed(graph, counts=counts, tol=config.tol, seed=config.seed)
    if counts.r == 0:
        return DetectionResult(
            0, 0, emb.V_plus, emb.V_minus, np.zeros(graph.n, dtype=np.int64),
            0.0, counts.eps, counts.d_hat, config.seed, [NO_INFORMATIVE],
        )
    km = kmeans(emb.V, counts.r, restarts=config.restarts, seed=config.seed)
    return DetectionResult(
        counts.r_plus, counts.r_minus, emb.V_plus, emb.V_minus,
        km.labels.astype(np.int64), km.cost, counts.eps, counts.d_hat, config.seed,
    )


def _confusion(sigma, sigma_hat):
    sigma = np.asarray(sigma, dtype=np.int64)
    sigma_hat = np.asarray(sigma_hat, dtype=np.int64)
    if sigma.shape != sigma_hat.shape:
        raise LengthMismatch(f"label vectors differ in length: {sigma.shape} vs {sigma_hat.shape}")
    if sigma.size and (sigma.min() < 0 or sigma_hat.min() < 0):
        raise ValidationError("labels must be non-negative integers")
    size = int(max(sigma.max(initial=0), sigma_hat.max(initial=0))) + 1
    C = np.zeros((size, size), dtype=np.int64)
    np.add.at(C, (sigma_hat, sigma), 1)
    return C


def overlap(sigma, sigma_hat) -> float:
    """Fraction of agreeing labels, maximised over relabelings (Hungarian method)."""
    C = _confusion(sigma, sigma_hat)
    if C.sum() == 0:
        return 1.0
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].sum() / C.sum())


def overlap_bruteforce(sigma, sigma_hat) -> float:
    """Same as :func:`overlap` by enumerating permutations; for small label sets."""
    C = _confusion(sigma, sigma_hat)
    if C.sum() == 0:
        return 1.0
    size = len(C)
    best = max(C[list(p), range(size)].sum() for p in permutations(range(size)))
    return float(best / C.sum())


@dataclass
class TheoryTolerances:
    eig_location: float = 0.5
    imag_rel: float = 1e-6
    yy: float = 0.05
    xy: float = 0.1
    xx: float = 0.15
    kernel_rel: float = 1e-6
    location_const: float = 1.0
    subspace_const: float = 3.0


@dataclass
class TheoryReport:
    d: float
    d_hat: float
    lambdas: list
    mu: list
    lambda_gaps: list
    max_imag: float
    max_imag_rel: float
    yy: list
    xy: list
    xx: list
    xy_pred: list
    xx_pred: list
    kernel_residuals: list
    xy_below_lambda: list
    outliers: dict
    subspace_Y: dict
    subspace_Phi: dict
    flags: dict
    tolerances: dict

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self):
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _phi_check(spectrum, sigma, idx):
    n = len(sigma)
    return spectrum.phi[np.asarray(sigma)][:, idx] / np.sqrt(n)


def theory_report(labeled: LabeledGraph, spectrum: SignalSpectrum,
                  tolerances: TheoryTolerances | None = None, seed=0) -> TheoryReport:
    """Compare measured spectra of one sample with the closed-form predictions.

    The ``Phi`` comparison uses ``phi_k(sigma(x)) / sqrt(n)`` so columns have
    unit norm like the eigenvectors they are compared with.
    """
    tol = tolerances or TheoryTolerances()
    if spectrum.r0 == 0:
        raise BelowThreshold("no informative eigenvalue")
    g, sigma = labeled.graph, labeled.sigma
    d = spectrum.d
    d_hat = mean_degree(g)
    Bt = reduced_nb(g)

    lambdas, mus, idx_all, X, Y = [], [], [], [], []
    sides = {}
    for sign, side, idx in (("+", "largest-real", spectrum.plus_idx),
                            ("-", "smallest-real", spectrum.minus_idx)):
        if len(idx) == 0:
            continue
        b = leading_eigs_nonsym(Bt, len(idx), side=side, seed=seed, strict=False)
        sides[sign] = (b, idx)
        lambdas += list(b.lambdas)
        mus += list(spectrum.mu[idx])
        idx_all += list(idx)
        X.append(b.x_parts)
        Y.append(b.y_parts)
    X, Y = np.hstack(X), np.hstack(Y)
    lam = np.asarray(lambdas)
    lam_abs = np.abs(lam)
    imag = np.concatenate([b.imag_norms for b, _ in sides.values()])
    gaps = np.abs(lam - np.asarray(mus))
    Xr, Yr = np.real(X), np.real(Y)
    yy = Yr.T @ Yr
    xy = Xr.T @ Yr
    xx = Xr.T @ Xr
    preds = [predicted_cross_moments(spectrum, int(i)) for i in idx_all]
    xy_pred = np.diag([p.xy for p in preds])
    xx_pred = np.diag([p.xx for p in preds])
    kernel = [kernel_residual(g, lam[j], Y[:, j]) for j in range(len(lam))]
    xy_below = [bool(xy[j, j] < lam_abs[j]) for j in range(len(lam))]

    outliers, sub_Y, sub_Phi = {}, {}, {}
    for sign, (b, idx) in sides.items():
        s = np.sqrt(d_hat) if sign == "+" else -np.sqrt(d_hat)
        r = len(idx)
        eigs = smallest_eigs(bethe_hessian(g, s), r, seed=seed)
        pred = predicted_outlier_locations(spectrum, sign).values
        budget = tol.location_const * np.sqrt(r * d)
        outliers[sign] = {
            "measured": eigs.values.tolist(),
            "predicted": pred.tolist(),
            "gaps": np.abs(eigs.values - pred).tolist(),
            "budget": float(budget),
        }
        dist_y, _ = subspace_distance(eigs.vectors, np.real(b.y_parts))
        bound_y = tol.subspace_const * np.sqrt(r / d)
        sub_Y[sign] = {"dist": dist_y, "bound": float(bound_y)}
        dist_phi, _ = subspace_distance(eigs.vectors, _phi_check(spectrum, sigma, idx))
        bound_phi = 2 * float(spectrum.tau[idx].sum()) + bound_y
        sub_Phi[sign] = {"dist": dist_phi, "bound": float(bound_phi)}

    off = ~np.eye(len(lam), dtype=bool)
    flags = {
        "lambda_near_mu": bool(np.all(gaps <= tol.eig_location)),
        "real_outliers": bool(np.all(imag <= tol.imag_rel * lam_abs)),
        "yy": bool(np.all(np.abs(yy - np.eye(len(lam))) <= tol.yy)),
        "xy": bool(np.all(np.abs(np.diag(xy) - np.diag(xy_pred)) <= tol.xy)
                   and np.all(np.abs(xy[off]) <= tol.xy)),
        "xx": bool(np.all(np.abs(np.diag(xx) - np.diag(xx_pred)) <= tol.xx)),
        "kernel": bool(all(k <= tol.kernel_rel * (1 + a * a) for k, a in zip(kernel, lam_abs))),
        "xy_below_lambda": all(xy_below),
        "outlier_locations": all(
            max(o["gaps"]) <= o["budget"] for o in outliers.values()),
        "subspace_Y": all(v["dist"] <= v["bound"] for v in sub_Y.values()),
        "subspace_Phi": all(v["dist"] <= v["bound"] for v in sub_Phi.values()),
    }
    def cplx(a):
        return [complex(v) if np.iscomplexobj(a) else float(v) for v in a]
    return TheoryReport(
        d=d, d_hat=d_hat,
        lambdas=[str(v) if isinstance(v, complex) else v for v in cplx(lam)],
        mu=[float(m) for m in mus],
        lambda_gaps=gaps.tolist(),
        max_imag=float(imag.max()),
        max_imag_rel=float((imag / lam_abs).max()),
        yy=yy.tolist(), xy=xy.tolist(), xx=xx.tolist(),
        xy_pred=np.diag(xy_pred).tolist(), xx_pred=np.diag(xx_pred).tolist(),
        kernel_residuals=kernel,
        xy_below_lambda=xy_below,
        outliers=outliers, subspace_Y=sub_Y, subspace_Phi=sub_Phi,
        flags=flags, tolerances=asdict(tol),
    )
