"""Experiment harness behind the CLI: spectrum histograms and multi-seed trials."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .detect import ClusterConfig, cluster, estimate_counts, overlap, theory_report
from .eig import count_below, smallest_eigs
from .errors import BetheHessianError, ValidationError
from .graph import mean_degree
from .model import ModelParams, sample_graph, signal_spectrum, validate_model
from .operators import bethe_hessian, gershgorin_bounds

__all__ = [
    "SpectrumHistogram",
    "ExperimentConfig",
    "ExperimentOutcome",
    "spectrum_histogram",
    "run_experiment",
    "trial_seed",
    "reference_params",
    "sweep_params",
    "CSV_HEADERS",
    "write_atomic",
]

KINDS = ("figure1", "counts", "recovery", "theory", "sweep")
DEFAULT_SWEEP_RATIOS = (0.5, 0.7, 1.0, 1.3, 1.6)
MAX_ERROR_FRACTION = 0.10

CSV_HEADERS = {
    "counts": ["trial", "seed", "d_hat", "r_plus", "r_minus", "correct", "error"],
    "figure1": ["trial", "seed", "d_hat", "r_plus", "r_minus", "correct", "error"],
    "recovery": ["trial", "seed", "d_hat", "r_plus", "r_minus", "overlap", "error"],
    "theory": [
        "trial", "seed", "d_hat", "max_lambda_gap", "max_imag_rel", "max_outlier_gap",
        "subspace_Y", "subspace_Phi", "passed", "error",
    ],
    "sweep": ["ratio", "mu2", "trial", "seed", "d_hat", "r_plus", "r_minus", "detected", "error"],
}


def reference_params(n=4000) -> ModelParams:
    """Balanced assortative two-block model with ``d = 6``; the default for every kind."""
    return validate_model([[10.0, 2.0], [2.0, 10.0]], [0.5, 0.5], n)


def sweep_params(d, ratio, n) -> ModelParams:
    """Balanced two-block model with average degree ``d`` and ``mu_2 = ratio * sqrt(d)``."""
    mu = ratio * math.sqrt(d)
    if mu > d:
        raise ValidationError(f"mu_2={mu:g} exceeds d={d:g}; off-diagonal P would be negative")
    return validate_model([[d + mu, d - mu], [d - mu, d + mu]], [0.5, 0.5], n)


def trial_seed(base: int, index: int) -> int:
    return (int(base) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: row.get(k, "") for k in header})
    return buf.getvalue()


@dataclass
class SpectrumHistogram:
    edges: np.ndarray
    counts: np.ndarray
    window: tuple
    method: str
    negative_eigenvalues: np.ndarray

    def to_dict(self):
        return {
            "edges": self.edges.tolist(),
            "counts": self.counts.tolist(),
            "window": list(self.window),
            "method": self.method,
            "negative_eigenvalues": self.negative_eigenvalues.tolist(),
        }

    def to_csv(self):
        rows = [
            {"lo": repr(float(a)), "hi": repr(float(b)), "count": int(c)}
            for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)
        ]
        return _csv_text(["lo", "hi", "count"], rows)


def spectrum_histogram(H, window=None, bins=72, method="windowed-inertia") -> SpectrumHistogram:
    """Exact eigenvalue counts of a symmetric matrix per bin ``[lo_i, hi_i)``.

    With ``windowed-inertia`` each bin edge costs one factorization; the bin
    count is the difference of the two neighbouring edge counts. Without a
    window the Gershgorin interval (slightly widened) is used, so the counts
    sum to ``n``. Negative eigenvalues are additionally resolved one by one.
    """
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    if window is None:
        lo, hi = gershgorin_bounds(H)
        pad = 1e-9 * max(1.0, abs(lo), abs(hi))
        window = (lo - pad, hi + pad)
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValidationError(f"empty window [{lo}, {hi}]")
    edges = np.linspace(lo, hi, bins + 1)
    if method == "windowed-inertia":
        below = np.array([count_below(H, -e) for e in edges])
    elif method == "dense":
        w = np.linalg.eigvalsh(H.toarray() if hasattr(H, "toarray") else np.asarray(H))
        below = np.searchsorted(np.sort(w), edges, side="left")
    else:
        raise ValidationError(f"unknown histogram method {method!r}")
    counts = np.diff(below)
    k_neg = count_below(H, 0.0)
    neg = smallest_eigs(H, k_neg).values if k_neg else np.zeros(0)
    return SpectrumHistogram(edges, counts, (lo, hi), method, neg)


@dataclass
class ExperimentConfig:
    kind: str
    params: ModelParams | None = None
    trials: int = 20
    base_seed: int = 0
    seeds: list | None = None
    epsilon: float | None = None
    threads: int = 1
    out_dir: str | None = None
    ratios: tuple = DEFAULT_SWEEP_RATIOS
    restarts: int = 20
    accuracy_floor: float = 0.9
    overlap_floor: float = 0.75
    sweep_high: float = 0.9
    sweep_low: float = 0.2

    def seed_list(self):
        if self.seeds is not None:
            if not self.seeds:
                raise ValidationError("seed list is empty")
            return [int(s) for s in self.seeds]
        if self.trials < 1:
            raise ValidationError("need at least one trial")
        return [trial_seed(self.base_seed, i) for i in range(self.trials)]


@dataclass
class ExperimentOutcome:
    rows: list
    summary: dict
    files: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("passed"))

    @property
    def failed_run(self) -> bool:
        return bool(self.summary.get("run_failed"))


def _expected_counts(params):
    s = signal_spectrum(params)
    return s.r_plus, s.r_minus


def _trial(task):
    kind, pdict, seed, eps, restarts = task
    params = validate_model(pdict["P"], pdict["pi"], pdict["n"])
    row = {"seed": seed}
    try:
        lg = sample_graph(params, seed)
        g = lg.graph
        row["d_hat"] = mean_degree(g)
        if kind in ("counts", "figure1", "sweep"):
            c = estimate_counts(g, eps)
            row.update(r_plus=c.r_plus, r_minus=c.r_minus)
        elif kind == "recovery":
            res = cluster(g, ClusterConfig(eps=eps, restarts=restarts, seed=seed))
            row.update(r_plus=res.r_hat_plus, r_minus=res.r_hat_minus,
                       overlap=overlap(lg.sigma, res.sigma_hat))
        elif kind == "theory":
            rep = theory_report(lg, signal_spectrum(params), seed=seed)
            row.update(
                max_lambda_gap=max(rep.lambda_gaps),
                max_imag_rel=rep.max_imag_rel,
                max_outlier_gap=max(max(o["gaps"]) for o in rep.outliers.values()),
                subspace_Y=max(v["dist"] for v in rep.subspace_Y.values()),
                subspace_Phi=max(v["dist"] for v in rep.subspace_Phi.values()),
                passed=int(rep.passed),
            )
        row["error"] = ""
    except (BetheHessianError, np.linalg.LinAlgError, ArithmeticError) as exc:
        row["error"] = type(exc).__name__
    return row


def _run_tasks(tasks, threads):
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_trial, tasks))
    return [_trial(t) for t in tasks]


def _quantiles(x):
    if not len(x):
        return {}
    q = np.quantile(x, [0.1, 0.25, 0.5, 0.75, 0.9])
    return {"q10": q[0], "q25": q[1], "median": q[2], "q75": q[3], "q90": q[4]}


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    """Run all trials, aggregate, and (if ``out_dir``) write CSV and summary JSON."""
    kind = config.kind
    if kind not in KINDS:
        raise ValidationError(f"unknown experiment kind {kind!r}")
    params = config.params if config.params is not None else reference_params()
    seeds = config.seed_list()

    point_params = [(None, params)]
    if kind == "sweep":
        point_params = [(r, sweep_params(params.d, r, params.n)) for r in config.ratios]

    tasks, meta = [], []
    for ratio, p in point_params:
        for i, s in enumerate(seeds):
            tasks.append((kind, p.to_dict(), s, config.epsilon, config.restarts))
            meta.append((ratio, p, i))
    results = _run_tasks(tasks, config.threads)

    rows = []
    for (ratio, p, i), row in zip(meta, results):
        row["trial"] = i
        if kind == "sweep":
            row["ratio"] = ratio
            row["mu2"] = float(ratio * math.sqrt(p.d))
            if not row["error"]:
                row["detected"] = int(row["r_plus"] == 2)
        elif kind in ("counts", "figure1") and not row["error"]:
            row["correct"] = int((row["r_plus"], row["r_minus"]) == _expected_counts(p))
        rows.append(row)

    ok = [r for r in rows if not r["error"]]
    n_err = len(rows) - len(ok)
    summary = {
        "kind": kind,
        "model": params.to_dict(),
        "seeds": seeds,
        "epsilon": config.epsilon,
        "trials": len(rows),
        "errors": n_err,
        "error_tags": sorted({r["error"] for r in rows if r["error"]}),
        "run_failed": n_err > MAX_ERROR_FRACTION * len(rows),
    }
    if kind in ("counts", "figure1"):
        acc = float(np.mean([r["correct"] for r in ok])) if ok else 0.0
        summary.update(
            expected_counts=list(_expected_counts(params)),
            count_accuracy=acc,
            threshold=config.accuracy_floor,
            passed=acc >= config.accuracy_floor,
        )
    elif kind == "recovery":
        ov = np.array([r["overlap"] for r in ok])
        summary.update(
            overlap_mean=float(ov.mean()) if ov.size else 0.0,
            **{f"overlap_{k}": float(v) for k, v in _quantiles(ov).items()},
            threshold=config.overlap_floor,
        )
        summary["passed"] = bool(ov.size) and summary["overlap_median"] >= config.overlap_floor
    elif kind == "theory":
        rate = float(np.mean([r["passed"] for r in ok])) if ok else 0.0
        gaps = np.array([r["max_lambda_gap"] for r in ok])
        summary.update(
            pass_rate=rate,
            lambda_gap=_quantiles(gaps),
            threshold=config.accuracy_floor,
            passed=rate >= config.accuracy_floor,
        )
    elif kind == "sweep":
        curve = []
        for ratio, _ in point_params:
            pts = [r for r in ok if r["ratio"] == ratio]
            acc = float(np.mean([r["detected"] for r in pts])) if pts else float("nan")
            curve.append({"ratio": ratio, "mu2": ratio * math.sqrt(params.d), "accuracy": acc})
        accs = [c["accuracy"] for c in curve]
        high = all(c["accuracy"] >= config.sweep_high for c in curve if c["ratio"] >= 1.3)
        low = all(c["accuracy"] <= config.sweep_low for c in curve if c["ratio"] <= 0.7)
        monotone = all(b >= a - 0.1 for a, b in zip(accs, accs[1:]))
        summary.update(curve=curve, high_ok=high, low_ok=low, monotone=monotone,
                       passed=high and low and monotone)
    summary["passed"] = bool(summary.get("passed")) and not summary["run_failed"]

    outcome = ExperimentOutcome(rows, summary)
    if kind == "figure1" and ok:
        lg = sample_graph(params, seeds[0])
        H = bethe_hessian(lg.graph, math.sqrt(mean_degree(lg.graph)))
        hist = spectrum_histogram(H, bins=72)
        summary["histogram"] = {
            "seed": seeds[0],
            "window": list(hist.window),
            "negative_eigenvalues": hist.negative_eigenvalues.tolist(),
        }
        outcome.files["histogram.csv"] = hist.to_csv()
    outcome.files["trials.csv"] = _csv_text(CSV_HEADERS[kind], rows)
    outcome.files["summary.json"] = json.dumps(_jsonable(summary), indent=2) + "\n"
    if config.out_dir:
        for name, text in outcome.files.items():
            write_atomic(Path(config.out_dir) / name, text)
    return outcome


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def config_dict(config: ExperimentConfig):
    out = asdict(config)
    out["params"] = None if config.params is None else config.params.to_dict()
    return out
