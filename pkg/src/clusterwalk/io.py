"""File formats: embedding datasets, graphs, run results, manifests, sweeps.

Documents are JSON (embeddings are line-delimited JSON records); floats use
Python's shortest round-trip repr so every artifact re-loads bit-exactly.
Writes go through a temp file in the target directory followed by an atomic
rename, so concurrent readers never see partial output.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .exceptions import InputError, ParseError
from .graph import EmbeddingRecord, RelationalGraph
from .traversal import TraversalTrace

__all__ = [
    "load_embeddings",
    "save_embeddings",
    "label_map",
    "save_graph",
    "load_graph",
    "RunResult",
    "save_result",
    "load_result",
    "DatasetManifest",
    "save_manifest",
    "load_manifest",
    "SweepResult",
    "save_sweep",
    "load_sweep",
    "save_noise_report",
    "load_noise_report",
]

# Norm drift beyond this (before normalization) draws a warning on load.
NORM_WARN_TOLERANCE = 1e-3
# Norm drift within this skips renormalization, keeping already-unit vectors bit-stable.
_NORM_SKIP = 1e-9


def _atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _dump_document(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except IsADirectoryError:
        raise InputError(f"expected a file, got a directory: {path}") from None


def _load_document(path: str | Path) -> Any:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None


# ---------------------------------------------------------------------------
# Embeddings (line-delimited JSON records)


def load_embeddings(path: str | Path, expected_dimension: int | None = None) -> list[EmbeddingRecord]:
    """Read records, validate, and normalize every vector to unit length."""
    text = _read_text(path)
    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    dim = expected_dimension
    drifted = 0
    first_drift_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON record: {exc.msg}", path=str(path), line=lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("record must be a JSON object", path=str(path), line=lineno)
        node_id = obj.get("id")
        if not isinstance(node_id, str) or not node_id:
            raise ParseError("record needs a non-empty string 'id'", path=str(path), line=lineno)
        if node_id in seen:
            raise InputError(f"{path}:{lineno}: duplicate id {node_id!r}")
        vector = obj.get("vector")
        if not isinstance(vector, list) or not vector:
            raise ParseError(f"record {node_id!r} needs a non-empty 'vector' array", path=str(path), line=lineno)
        try:
            vec = np.asarray(vector, dtype=np.float64)
        except (TypeError, ValueError):
            raise ParseError(f"record {node_id!r} has non-numeric vector entries", path=str(path), line=lineno) from None
        if vec.ndim != 1 or not np.all(np.isfinite(vec)):
            raise ParseError(f"record {node_id!r} vector must be a flat finite array", path=str(path), line=lineno)
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise InputError(f"{path}:{lineno}: record {node_id!r} has dimension {vec.shape[0]}, expected {dim}")
        label = obj.get("label")
        if label is not None and not isinstance(label, str):
            raise ParseError(f"record {node_id!r} label must be a string", path=str(path), line=lineno)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise InputError(f"{path}:{lineno}: record {node_id!r} has a zero vector")
        if abs(norm - 1.0) > NORM_WARN_TOLERANCE:
            drifted += 1
            if first_drift_line is None:
                first_drift_line = lineno
        if abs(norm - 1.0) > _NORM_SKIP:
            vec = vec / norm
        seen.add(node_id)
        records.append(EmbeddingRecord(id=node_id, vector=vec, label=label))
    if not records:
        raise InputError(f"{path}: no embedding records found")
    if drifted:
        warnings.warn(
            f"{path}: {drifted} vector(s) deviated from unit norm by more than "
            f"{NORM_WARN_TOLERANCE} (first at line {first_drift_line}); normalized on load",
            stacklevel=2,
        )
    return records


def save_embeddings(records: Iterable[EmbeddingRecord], path: str | Path) -> None:
    lines = []
    for r in records:
        obj: dict[str, Any] = {"id": r.id, "vector": [float(x) for x in r.vector]}
        if r.label is not None:
            obj["label"] = r.label
        lines.append(json.dumps(obj, sort_keys=True))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def label_map(records: Iterable[EmbeddingRecord], require: bool = True) -> dict[str, str]:
    """Node-id -> label mapping; with ``require`` every record must be labeled."""
    labels: dict[str, str] = {}
    for r in records:
        if r.label is None:
            if require:
                raise InputError(f"record {r.id!r} has no label")
            continue
        labels[r.id] = r.label
    return labels


# ---------------------------------------------------------------------------
# Graphs


def save_graph(g: RelationalGraph, path: str | Path) -> None:
    doc = {
        "nodes": sorted(g.nodes),
        "edges": [[u, v, w] for u, v, w in sorted(g.edges())],
        "tau": g.tau,
        "beta": g.beta,
    }
    _atomic_write_text(path, _dump_document(doc))


def load_graph(path: str | Path) -> RelationalGraph:
    doc = _load_document(path)
    if not isinstance(doc, dict):
        raise ParseError("graph document must be a JSON object", path=str(path))
    try:
        nodes = doc["nodes"]
        edges = doc["edges"]
        tau = doc["tau"]
        beta = doc["beta"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"graph document missing field: {exc}", path=str(path)) from None
    g = RelationalGraph(tau=tau, beta=beta)
    for node in nodes:
        g.add_node(node)
    for entry in edges:
        if not (isinstance(entry, list) and len(entry) == 3):
            raise ParseError(f"bad edge entry {entry!r}", path=str(path))
        u, v, w = entry
        if not g.has_node(u) or not g.has_node(v):
            raise InputError(f"{path}: edge [{u!r}, {v!r}] references unknown node")
        g.add_edge(u, v, w)
    return g


# ---------------------------------------------------------------------------
# Run results


@dataclass
class RunResult:
    """One clustering run: final partition, optional scores, trace, config snapshot."""

    partition: list[list[str]]
    trace: TraversalTrace
    config: dict
    metrics: dict | None = None


_TRACE_COUNTERS = (
    "membership_assessments",
    "merge_assessments",
    "accepts",
    "rejects",
    "unknowns",
    "edges_removed",
    "merges_performed",
)


def _trace_to_doc(trace: TraversalTrace) -> dict:
    doc = {name: getattr(trace, name) for name in _TRACE_COUNTERS}
    if trace.steps is not None:
        doc["steps"] = trace.steps
    return doc


def _trace_from_doc(doc: dict, path: str) -> TraversalTrace:
    try:
        kwargs = {name: doc[name] for name in _TRACE_COUNTERS}
    except KeyError as exc:
        raise ParseError(f"trace missing counter {exc}", path=path) from None
    for name, value in kwargs.items():
        if not isinstance(value, int) or value < 0:
            raise InputError(f"{path}: trace counter {name} must be a non-negative integer")
    return TraversalTrace(**kwargs, steps=doc.get("steps"))


def save_result(result: RunResult, path: str | Path) -> None:
    doc: dict[str, Any] = {
        "partition": result.partition,
        "trace": _trace_to_doc(result.trace),
        "config": result.config,
    }
    if result.metrics is not None:
        doc["metrics"] = result.metrics
    _atomic_write_text(path, _dump_document(doc))


def load_result(path: str | Path) -> RunResult:
    doc = _load_document(path)
    if not isinstance(doc, dict):
        raise ParseError("result document must be a JSON object", path=str(path))
    try:
        partition = doc["partition"]
        trace_doc = doc["trace"]
        config = doc["config"]
    except KeyError as exc:
        raise ParseError(f"result document missing field: {exc}", path=str(path)) from None
    if not isinstance(partition, list) or not all(isinstance(c, list) for c in partition):
        raise ParseError("partition must be a list of clusters", path=str(path))
    seen: set[str] = set()
    for cluster in partition:
        for node in cluster:
            if node in seen:
                raise InputError(f"{path}: clusters overlap on node {node!r}")
            seen.add(node)
    return RunResult(
        partition=partition,
        trace=_trace_from_doc(trace_doc, str(path)),
        config=config,
        metrics=doc.get("metrics"),
    )


# ---------------------------------------------------------------------------
# Dataset manifests


@dataclass
class DatasetManifest:
    name: str
    aspect: str
    embeddings_path: str
    dimension: int
    label_set: list[str] | None = None


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {k: v for k, v in asdict(manifest).items() if v is not None}
    _atomic_write_text(path, _dump_document(doc))


def load_manifest(path: str | Path) -> DatasetManifest:
    doc = _load_document(path)
    try:
        return DatasetManifest(
            name=doc["name"],
            aspect=doc["aspect"],
            embeddings_path=doc["embeddings_path"],
            dimension=int(doc["dimension"]),
            label_set=doc.get("label_set"),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"manifest missing field: {exc}", path=str(path)) from None


# ---------------------------------------------------------------------------
# Sweeps and noise reports


@dataclass
class SweepResult:
    """Rows of one parameter sweep; failed rows carry an 'error' entry."""

    parameter: str
    rows: list[dict] = field(default_factory=list)


def save_sweep(sweep: SweepResult, path: str | Path) -> None:
    _atomic_write_text(path, _dump_document({"parameter": sweep.parameter, "rows": sweep.rows}))


def load_sweep(path: str | Path) -> SweepResult:
    doc = _load_document(path)
    try:
        return SweepResult(parameter=doc["parameter"], rows=list(doc["rows"]))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"sweep document missing field: {exc}", path=str(path)) from None


def save_noise_report(report: Mapping[str, Any], path: str | Path) -> None:
    _atomic_write_text(path, _dump_document(dict(report)))


def load_noise_report(path: str | Path) -> dict:
    doc = _load_document(path)
    if not isinstance(doc, dict):
        raise ParseError("noise report must be a JSON object", path=str(path))
    return doc
