"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 solver failure (including runs where
more than 10% of trials error), 4 an experiment ran but missed its threshold.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .detect import ClusterConfig, cluster, estimate_counts, overlap, theory_report
from .errors import SolverError, ValidationError
from .graph import load_graph, mean_degree, save_graph
from .harness import (
    DEFAULT_SWEEP_RATIOS,
    KINDS,
    ExperimentConfig,
    _jsonable,
    run_experiment,
    spectrum_histogram,
    write_atomic,
)
from .model import load_model, sample_graph, signal_spectrum
from .operators import bethe_hessian

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_ACCEPTANCE = 4


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {text} is not an unsigned 64-bit integer")
    return v


def _common(p, model_required=False):
    p.add_argument("--model", required=model_required, help="model JSON with keys P, pi, n")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--epsilon", type=float, default=None,
                   help="count margin (default 1/log n)")
    p.add_argument("--out", default=None, help="output directory (default: stdout)")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _graph_input(p):
    p.add_argument("--graph", default=None, help="graph file; otherwise sampled from --model")
    p.add_argument("--graph-format", choices=("edge-list", "matrix-market"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bethe-hessian",
        description="Community counting and recovery with the Bethe-Hessian.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a labeled SBM graph")
    _common(p, model_required=True)

    p = sub.add_parser("spectrum", help="exact windowed eigenvalue histogram of H(t)")
    _common(p)
    _graph_input(p)
    p.add_argument("--t", type=float, default=None, help="default sqrt of the mean degree")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    p.add_argument("--bins", type=int, default=72)
    p.add_argument("--method", choices=("windowed-inertia", "dense"), default="windowed-inertia")

    p = sub.add_parser("count", help="estimate the number of communities")
    _common(p)
    _graph_input(p)

    p = sub.add_parser("cluster", help="spectral clustering")
    _common(p)
    _graph_input(p)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--labels", default=None, help="ground-truth labels for an overlap score")

    p = sub.add_parser("verify", help="compare one sample with the closed-form predictions")
    _common(p, model_required=True)

    p = sub.add_parser("experiment", help="multi-seed statistical experiment")
    _common(p)
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--seeds", type=_u64, nargs="+", default=None,
                   help="explicit seed list (overrides --trials and --seed)")
    p.add_argument("--ratios", type=float, nargs="+", default=list(DEFAULT_SWEEP_RATIOS),
                   help="sweep points as multiples of sqrt(d)")
    p.add_argument("--restarts", type=int, default=20)
    return parser


def _get_graph(args):
    """Return ``(graph, sigma or None)`` from ``--graph`` or a sample of ``--model``."""
    if args.graph:
        return load_graph(args.graph, args.graph_format), None
    if not args.model:
        raise ValidationError("either --graph or --model is required")
    lg = sample_graph(load_model(args.model), args.seed)
    return lg.graph, lg.sigma


def _emit(args, payload, name, csv_text=None):
    if args.format == "csv" and csv_text is not None:
        text, fname = csv_text, name + ".csv"
    else:
        text, fname = json.dumps(_jsonable(payload), indent=2) + "\n", name + ".json"
    if args.out:
        write_atomic(Path(args.out) / fname, text)
    else:
        sys.stdout.write(text)


def cmd_generate(args):
    params = load_model(args.model, allow_subcritical=True)
    lg = sample_graph(params, args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_graph(lg.graph, out / "graph.edges", format="edge-list")
    write_atomic(out / "labels.txt", "".join(f"{int(s)}\n" for s in lg.sigma))
    prov = {
        "model": params.to_dict(),
        "seed": args.seed,
        "n": lg.graph.n,
        "m": lg.graph.m,
        "d_hat": mean_degree(lg.graph),
        "files": {"graph": "graph.edges", "labels": "labels.txt"},
    }
    write_atomic(out / "provenance.json", json.dumps(prov, indent=2) + "\n")
    return EXIT_OK


def cmd_spectrum(args):
    g, _ = _get_graph(args)
    t = args.t if args.t is not None else math.sqrt(mean_degree(g))
    hist = spectrum_histogram(bethe_hessian(g, t), window=args.window, bins=args.bins,
                              method=args.method)
    payload = {"t": t, "n": g.n, **hist.to_dict()}
    _emit(args, payload, "spectrum", hist.to_csv())
    return EXIT_OK


def cmd_count(args):
    g, _ = _get_graph(args)
    c = estimate_counts(g, args.epsilon)
    payload = {"r_plus": c.r_plus, "r_minus": c.r_minus, "r": c.r,
               "d_hat": c.d_hat, "epsilon": c.eps}
    csv_text = "r_plus,r_minus,d_hat,epsilon\n" + f"{c.r_plus},{c.r_minus},{c.d_hat!r},{c.eps!r}\n"
    _emit(args, payload, "count", csv_text)
    return EXIT_OK


def cmd_cluster(args):
    g, sigma = _get_graph(args)
    res = cluster(g, ClusterConfig(eps=args.epsilon, restarts=args.restarts, seed=args.seed))
    payload = res.to_dict()
    if args.labels:
        truth = np.loadtxt(args.labels, dtype=np.int64, ndmin=1)
        payload["overlap"] = overlap(truth, res.sigma_hat)
    elif sigma is not None:
        payload["overlap"] = overlap(sigma, res.sigma_hat)
    if args.out:
        write_atomic(Path(args.out) / "labels.txt", "".join(f"{int(s)}\n" for s in res.sigma_hat))
        payload["labels_file"] = "labels.txt"
    payload.pop("sigma_hat", None)
    _emit(args, payload, "cluster")
    return EXIT_OK


def cmd_verify(args):
    params = load_model(args.model)
    lg = sample_graph(params, args.seed)
    rep = theory_report(lg, signal_spectrum(params), seed=args.seed)
    payload = rep.to_dict()
    payload["passed"] = rep.passed
    _emit(args, payload, "theory")
    return EXIT_OK


def cmd_experiment(args):
    params = load_model(args.model) if args.model else None
    cfg = ExperimentConfig(
        kind=args.kind, params=params, trials=args.trials, base_seed=args.seed,
        seeds=args.seeds, epsilon=args.epsilon, threads=args.threads, out_dir=args.out,
        ratios=tuple(args.ratios), restarts=args.restarts,
    )
    outcome = run_experiment(cfg)
    if not args.out:
        key = "trials.csv" if args.format == "csv" else "summary.json"
        sys.stdout.write(outcome.files[key])
    if outcome.failed_run:
        return EXIT_SOLVER
    return EXIT_OK if outcome.passed else EXIT_ACCEPTANCE


COMMANDS = {
    "generate": cmd_generate,
    "spectrum": cmd_spectrum,
    "count": cmd_count,
    "cluster": cmd_cluster,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
