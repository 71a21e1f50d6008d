"""Benchmark harness: run methods over datasets and seeds, emit flat records.

Each (method, dataset, seed) cell is executed independently, stage-timed
with a monotonic clock, and scored against ground truth when available.
Cell failures are recorded in the cell and the run continues.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from sep_eda.cluster import (
    PipelineParams,
    kmeans,
    sep_spectral_cluster,
    spectral_embedding,
)
from sep_eda.datasets import DataMatrix, load_csv, load_idx, load_libsvm, make_blobs, normalize
from sep_eda.graph import build_knn_graph
from sep_eda.metrics import accuracy
from sep_eda.tsne import effective_perplexity, p_matrix, sep_tsne, tsne_embed

KNOWN_METHODS = ("standard-sc", "sep-sc", "exact-tsne", "sep-tsne")


@dataclass
class DatasetSpec:
    name: str
    format: str = "csv"  # csv | libsvm | idx | blobs
    path: str | None = None
    labels_path: str | None = None  # idx only
    has_label_column: bool = True
    header: bool = False
    normalize: str = "minmax"
    blobs: dict | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        return cls(**d)


@dataclass
class BenchSpec:
    datasets: list[DatasetSpec]
    methods: list[str]
    k: int = 10
    seeds: list[int] = field(default_factory=lambda: [0])
    params: PipelineParams = field(default_factory=PipelineParams)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchSpec":
        methods = list(d.get("methods", []))
        unknown = set(methods) - set(KNOWN_METHODS)
        if unknown:
            raise ValueError(f"unknown method(s): {sorted(unknown)}; known: {KNOWN_METHODS}")
        return cls(
            datasets=[DatasetSpec.from_dict(x) for x in d.get("datasets", [])],
            methods=methods,
            k=int(d.get("k", 10)),
            seeds=[int(s) for s in d.get("seeds", [0])],
            params=PipelineParams.from_dict(d.get("params", {})),
        )


@dataclass
class BenchRecord:
    method: str
    dataset: str
    n: int
    d: int
    k: int
    seed: int
    acc: float | None
    wall_ms: dict
    params: dict
    m: int | None = None
    s: int | None = None
    final_kl: float | None = None
    speedup_vs_exact: float | None = None
    error: str | None = None
    timing_indicative: bool = False

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "dataset": self.dataset,
            "n": self.n,
            "d": self.d,
            "k": self.k,
            "seed": self.seed,
            "acc": self.acc,
            "wall_ms": {key: round(v, 3) for key, v in self.wall_ms.items()},
            "params": self.params,
        }
        for key in ("m", "s", "final_kl", "speedup_vs_exact", "error"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.timing_indicative:
            out["timing_indicative"] = True
        return out


def resolve_dataset(spec: DatasetSpec) -> DataMatrix:
    if spec.format == "csv":
        data = load_csv(spec.path, spec.has_label_column, spec.header, name=spec.name)
    elif spec.format == "libsvm":
        data = load_libsvm(spec.path, name=spec.name)
    elif spec.format == "idx":
        data = load_idx(spec.path, spec.labels_path, name=spec.name)
    elif spec.format == "blobs":
        data = make_blobs(**(spec.blobs or {}))
        data.name = spec.name
    else:
        raise ValueError(f"unknown dataset format {spec.format!r}")
    return normalize(data, spec.normalize)


def _run_standard_sc(data: DataMatrix, k: int, seed: int, params: PipelineParams) -> dict:
    wall: dict[str, float] = {}
    t0 = time.perf_counter()
    graph = build_knn_graph(data.values, min(params.k_nn, data.n - 1), params.weighting)
    wall["graph"] = (time.perf_counter() - t0) * 1000
    t0 = time.perf_counter()
    embedding = spectral_embedding(graph, k, params.variant, params.dense_guard)
    wall["eigs"] = (time.perf_counter() - t0) * 1000
    t0 = time.perf_counter()
    assign = kmeans(embedding, k, seed, restarts=params.kmeans_restarts)
    wall["kmeans"] = (time.perf_counter() - t0) * 1000
    return {"labels": assign.labels, "wall_ms": wall}


def _run_exact_tsne(data: DataMatrix, seed: int, params: PipelineParams) -> dict:
    t0 = time.perf_counter()
    perp = effective_perplexity(params.perplexity, data.n)
    affinities = p_matrix(data, perp)
    embedding = tsne_embed(
        affinities,
        iters=params.tsne_iters,
        learning_rate=params.learning_rate,
        seed=seed,
        momentum_early=params.momentum_early,
        momentum_late=params.momentum_late,
        early_exaggeration=params.early_exaggeration,
        schedule_switch=params.exaggeration_iters,
    )
    wall = {"tsne": (time.perf_counter() - t0) * 1000}
    return {"final_kl": embedding.final_kl, "wall_ms": wall}


def _run_cell(data: DataMatrix, method: str, k: int, seed: int, params: PipelineParams) -> BenchRecord:
    record = BenchRecord(
        method=method,
        dataset=data.name,
        n=data.n,
        d=data.d,
        k=k,
        seed=seed,
        acc=None,
        wall_ms={},
        params=params.to_dict(),
    )
    try:
        if method == "standard-sc":
            out = _run_standard_sc(data, k, seed, params)
            record.wall_ms = out["wall_ms"]
            if data.labels is not None:
                record.acc = accuracy(out["labels"], data.labels).acc
        elif method == "sep-sc":
            assign, trace = sep_spectral_cluster(data, k, params, seed)
            record.wall_ms = trace.wall_ms
            record.m, record.s = trace.m, trace.s
            if data.labels is not None:
                record.acc = accuracy(assign, data.labels).acc
        elif method == "exact-tsne":
            out = _run_exact_tsne(data, seed, params)
            record.wall_ms = out["wall_ms"]
            record.final_kl = out["final_kl"]
        elif method == "sep-tsne":
            embedding, _, trace = sep_tsne(data, k, params, seed)
            record.wall_ms = trace.wall_ms
            record.m, record.s = trace.m, trace.s
            record.final_kl = embedding.final_kl
        else:
            raise ValueError(f"unknown method {method!r}")
    except Exception as exc:  # record the failure, keep the run going
        record.error = f"{type(exc).__name__}: {exc}"
    record.wall_ms["total"] = sum(v for kk, v in record.wall_ms.items() if kk != "total")
    return record


def run_bench(spec: BenchSpec, parallel_cells: int = 0) -> list[BenchRecord]:
    """Execute every (method, dataset, seed) cell and attach t-SNE speedups.

    Cells run sequentially by default for timing fidelity; with
    `parallel_cells` > 0 they run concurrently and every record is marked
    `timing_indicative`.
    """
    records: list[BenchRecord] = []
    for dspec in spec.datasets:
        try:
            data = resolve_dataset(dspec)
        except Exception as exc:
            for method in spec.methods:
                for seed in spec.seeds:
                    records.append(
                        BenchRecord(
                            method=method,
                            dataset=dspec.name,
                            n=0,
                            d=0,
                            k=spec.k,
                            seed=seed,
                            acc=None,
                            wall_ms={"total": 0.0},
                            params=spec.params.to_dict(),
                            error=f"{type(exc).__name__}: {exc}",
                        )
                    )
            continue
        cells = [(data, m, spec.k, s, spec.params) for s in spec.seeds for m in spec.methods]
        if parallel_cells > 0:
            with ThreadPoolExecutor(max_workers=parallel_cells) as pool:
                batch = list(pool.map(lambda c: _run_cell(*c), cells))
            for rec in batch:
                rec.timing_indicative = True
            records.extend(batch)
        else:
            records.extend(_run_cell(*cell) for cell in cells)

    by_key = {
        (r.dataset, r.seed): r.wall_ms.get("total")
        for r in records
        if r.method == "exact-tsne" and r.error is None
    }
    for rec in records:
        if rec.method == "sep-tsne" and rec.error is None:
            exact_total = by_key.get((rec.dataset, rec.seed))
            sep_total = rec.wall_ms.get("total", 0.0)
            if exact_total and sep_total > 0:
                rec.speedup_vs_exact = exact_total / sep_total
    return records
