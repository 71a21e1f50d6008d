"""Command-line surface: cluster, tsne, eval, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure
(soft non-convergence warnings become fatal only with --strict).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from sep_eda.bench import BenchSpec, DatasetSpec, resolve_dataset, run_bench
from sep_eda.cluster import PipelineParams, sep_spectral_cluster, spectral_cluster
from sep_eda.errors import DataError, NumericalError
from sep_eda.metrics import accuracy
from sep_eda.svg import render_scatter_svg
from sep_eda.tsne import effective_perplexity, p_matrix, sep_tsne, tsne_embed


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage by default; we reserve 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_dataset_args(sub):
    sub.add_argument("--input", required=True, help="input data file")
    sub.add_argument("--format", required=True, choices=["csv", "libsvm", "idx"])
    sub.add_argument("--idx-labels", default=None, help="IDX labels file (idx format)")
    sub.add_argument("--label-column", action="store_true",
                     help="csv: treat the last column as labels")
    sub.add_argument("--header", action="store_true", help="csv: skip the first line")
    sub.add_argument("--normalize", default="minmax", choices=["minmax", "zscore", "none"])


def _add_pipeline_args(sub):
    sub.add_argument("--knn", type=int, default=10)
    sub.add_argument("--weighting", default="gaussian", choices=["gaussian", "binary"])
    sub.add_argument("--test-vectors", type=int, default=5)
    sub.add_argument("--sweeps", type=int, default=10)
    sub.add_argument("--agg-threshold", type=float, default=0.7)
    sub.add_argument("--target-ratio", type=float, default=None)
    sub.add_argument("--kernel-q", type=float, default=None,
                     help="Gaussian kernel width (default: median-distance heuristic)")
    sub.add_argument("--svc-c", type=float, default=1.0)
    sub.add_argument("--grad-tol", type=float, default=1e-5)
    sub.add_argument("--merge-tol", type=float, default=None)
    sub.add_argument("--max-descent-iters", type=int, default=500)
    sub.add_argument("--variant", default="unnormalized",
                     choices=["unnormalized", "sym-normalized"])
    sub.add_argument("--kmeans-restarts", type=int, default=10)


def _add_tsne_args(sub):
    sub.add_argument("--perplexity", type=float, default=30.0)
    sub.add_argument("--iters", type=int, default=1000)
    sub.add_argument("--learning-rate", type=float, default=200.0)
    sub.add_argument("--momentum-early", type=float, default=0.5)
    sub.add_argument("--momentum-late", type=float, default=0.8)
    sub.add_argument("--exaggeration", type=float, default=12.0)
    sub.add_argument("--exaggeration-iters", type=int, default=250)


def _dataset_from_args(args):
    spec = DatasetSpec(
        name=Path(args.input).stem,
        format=args.format,
        path=args.input,
        labels_path=args.idx_labels,
        has_label_column=args.label_column,
        header=args.header,
        normalize=args.normalize,
    )
    if args.format == "idx" and not args.idx_labels:
        raise DataError("idx format needs --idx-labels")
    return resolve_dataset(spec)


def _params_from_args(args) -> PipelineParams:
    params = PipelineParams(
        k_nn=args.knn,
        weighting=args.weighting,
        test_vectors=args.test_vectors,
        sweeps=args.sweeps,
        agg_threshold=args.agg_threshold,
        target_ratio=args.target_ratio,
        kernel_q=args.kernel_q,
        svc_c=args.svc_c,
        grad_tol=args.grad_tol,
        merge_tol=args.merge_tol,
        max_descent_iters=args.max_descent_iters,
        variant=args.variant,
        kmeans_restarts=args.kmeans_restarts,
    )
    if hasattr(args, "perplexity"):
        params.perplexity = args.perplexity
        params.tsne_iters = args.iters
        params.learning_rate = args.learning_rate
        params.momentum_early = args.momentum_early
        params.momentum_late = args.momentum_late
        params.early_exaggeration = args.exaggeration
        params.exaggeration_iters = args.exaggeration_iters
    return params


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _cmd_cluster(args) -> int:
    data = _dataset_from_args(args)
    params = _params_from_args(args)
    warnings: list[str] = []
    if args.method == "standard":
        assign = spectral_cluster(
            data, args.k, k_nn=args.knn, variant=args.variant,
            weighting=args.weighting, seed=args.seed,
            kmeans_restarts=args.kmeans_restarts,
        )
    else:
        assign, trace = sep_spectral_cluster(data, args.k, params, args.seed)
        if not trace.sphere_converged:
            warnings.append("sphere solver hit its iteration cap before the KKT tolerance")
        if trace.sep_degraded:
            warnings.append("more than 10% of descents failed to converge")
        print(
            f"n={trace.n} m={trace.m} s={trace.s} "
            f"stages(ms)={ {k: round(v, 1) for k, v in trace.wall_ms.items()} }",
            file=sys.stderr,
        )
    payload = {
        "n": data.n,
        "k": args.k,
        "labels": assign.labels.tolist(),
        "params": {"method": args.method, **params.to_dict()},
        "seed": args.seed,
    }
    _write_json(args.out, payload)
    if data.labels is not None:
        report = accuracy(assign, data.labels)
        print(f"ACC vs file labels: {report.acc:.4f}", file=sys.stderr)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if warnings and args.strict:
        return 3
    return 0


def _cmd_tsne(args) -> int:
    data = _dataset_from_args(args)
    params = _params_from_args(args)
    warnings: list[str] = []
    report: dict = {"method": args.method, "n": data.n, "seed": args.seed,
                    "params": params.to_dict()}
    if args.method == "exact":
        perp = effective_perplexity(args.perplexity, data.n)
        affinities = p_matrix(data, perp)
        embedding = tsne_embed(
            affinities, iters=args.iters, learning_rate=args.learning_rate,
            seed=args.seed, momentum_early=args.momentum_early,
            momentum_late=args.momentum_late, early_exaggeration=args.exaggeration,
            schedule_switch=args.exaggeration_iters,
        )
        coords, labels, sizes = embedding.coords, data.labels, None
        report.update({"final_kl": embedding.final_kl, "points": data.n})
    else:
        embedding, sep_set, trace = sep_tsne(data, args.k, params, args.seed)
        if trace.sep_degraded:
            warnings.append("more than 10% of descents failed to converge")
        coords = embedding.coords
        labels = trace.sep_majority_labels
        sizes = trace.sep_fine_counts
        report.update({"final_kl": embedding.final_kl, "points": sep_set.s,
                       "trace": trace.to_dict()})
    render_scatter_svg(coords, labels, sizes, args.svg,
                       title=f"{data.name} ({args.method} t-SNE)")
    if args.report:
        _write_json(args.report, report)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if warnings and args.strict:
        return 3
    return 0


def _load_truth(args) -> np.ndarray:
    path = Path(args.truth)
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        labels = payload["labels"] if isinstance(payload, dict) else payload
        return np.asarray(labels, dtype=np.int64)
    if args.format:
        spec = DatasetSpec(
            name=path.stem, format=args.format, path=str(path),
            labels_path=args.idx_labels, has_label_column=True,
            header=args.header, normalize="none",
        )
        data = resolve_dataset(spec)
        if data.labels is None:
            raise DataError(f"{path}: no labels found for truth")
        return data.labels
    try:
        return np.asarray(
            [int(float(line)) for line in path.read_text().split()], dtype=np.int64
        )
    except ValueError as exc:
        raise DataError(f"{path}: cannot parse truth labels: {exc}") from exc


def _cmd_eval(args) -> int:
    pred_payload = json.loads(Path(args.pred).read_text())
    pred = np.asarray(pred_payload["labels"], dtype=np.int64)
    truth = _load_truth(args)
    if truth.size != pred.size:
        raise DataError(
            f"prediction has {pred.size} labels but truth has {truth.size}"
        )
    report = accuracy(pred, truth)
    _write_json(args.out, {"n": int(pred.size), **report.to_dict()})
    print(f"ACC: {report.acc:.4f}", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    config = json.loads(Path(args.config).read_text())
    spec = BenchSpec.from_dict(config)
    records = run_bench(spec, parallel_cells=args.parallel_cells)
    _write_json(args.out, [r.to_dict() for r in records])
    failures = [r for r in records if r.error]
    for r in failures:
        print(f"cell failed: {r.method}/{r.dataset}/seed={r.seed}: {r.error}",
              file=sys.stderr)
    for r in records:
        if r.error is None:
            acc = f" acc={r.acc:.4f}" if r.acc is not None else ""
            speed = (f" speedup={r.speedup_vs_exact:.2f}x"
                     if r.speedup_vs_exact is not None else "")
            print(f"{r.dataset:>12} {r.method:>12} seed={r.seed}"
                  f" total={r.wall_ms['total'] / 1000:.2f}s{acc}{speed}",
                  file=sys.stderr)
    if failures and args.strict:
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sep-eda", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_cluster = subs.add_parser("cluster", help="cluster a dataset")
    _add_dataset_args(p_cluster)
    _add_pipeline_args(p_cluster)
    p_cluster.add_argument("--k", type=int, required=True)
    p_cluster.add_argument("--method", default="sep", choices=["sep", "standard"])
    p_cluster.add_argument("--seed", type=int, default=0)
    p_cluster.add_argument("--out", required=True)
    p_cluster.add_argument("--strict", action="store_true")
    p_cluster.set_defaults(func=_cmd_cluster)

    p_tsne = subs.add_parser("tsne", help="2-D embedding as SVG")
    _add_dataset_args(p_tsne)
    _add_pipeline_args(p_tsne)
    _add_tsne_args(p_tsne)
    p_tsne.add_argument("--method", default="sep", choices=["sep", "exact"])
    p_tsne.add_argument("--k", type=int, default=None,
                        help="color count when no ground truth exists (sep method)")
    p_tsne.add_argument("--seed", type=int, default=0)
    p_tsne.add_argument("--svg", required=True)
    p_tsne.add_argument("--report", default=None)
    p_tsne.add_argument("--strict", action="store_true")
    p_tsne.set_defaults(func=_cmd_tsne)

    p_eval = subs.add_parser("eval", help="score predictions against truth")
    p_eval.add_argument("--pred", required=True, help="labels.json from `cluster`")
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--format", default=None, choices=["csv", "libsvm", "idx"])
    p_eval.add_argument("--idx-labels", default=None)
    p_eval.add_argument("--header", action="store_true")
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_bench = subs.add_parser("bench", help="run a benchmark config")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--parallel-cells", type=int, default=0)
    p_bench.add_argument("--strict", action="store_true")
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
