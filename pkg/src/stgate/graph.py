"""Symptom graph construction: correlation edges, density thresholding, normalization.

The graph has one node per clinical indicator, shared across patients.
Edges come from the absolute Pearson correlation of per-node summaries on
the training split; a density parameter ``rho`` keeps the strongest
fraction of possible undirected edges.  The propagation operator is the
self-looped symmetric normalization ``D^{-1/2} (A + I) D^{-1/2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError, ParseError


@dataclass(frozen=True)
class SymptomGraph:
    """Undirected indicator graph with its normalized propagation operator.

    ``adjacency`` is binary, symmetric, zero-diagonal.  ``weights`` carries
    the correlation values behind the kept edges (zero elsewhere) and is
    informational only.  ``normalized`` is populated by :func:`normalize`.
    """

    n_nodes: int
    adjacency: np.ndarray
    density: float
    weights: np.ndarray | None = None
    normalized: np.ndarray | None = None

    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def edge_list(self) -> list[tuple[int, int, float]]:
        edges = []
        for i in range(self.n_nodes):
            for j in range(i + 1, self.n_nodes):
                if self.adjacency[i, j]:
                    w = float(self.weights[i, j]) if self.weights is not None else 1.0
                    edges.append((i, j, w))
        return edges


def correlation_matrix(node_values: np.ndarray) -> np.ndarray:
    """Absolute Pearson correlation between node columns.

    ``node_values`` holds one row per observation (patient x time step) and
    one column per node.  The result is symmetric with unit diagonal and
    entries in [0, 1].  Zero-variance nodes get zero off-diagonal entries
    (correlation is undefined there, so they stay isolated).
    """
    obs = np.asarray(node_values, dtype=np.float64)
    if obs.ndim != 2:
        raise DataError(f"expected a 2-D observations-by-nodes array, got shape {obs.shape}")
    if obs.shape[0] < 2:
        raise DataError(f"need at least 2 observations per node, got {obs.shape[0]}")
    n = obs.shape[1]
    centered = obs - obs.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    degenerate = norms == 0.0
    safe = np.where(degenerate, 1.0, norms)
    unit = centered / safe
    corr = np.abs(unit.T @ unit)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    np.fill_diagonal(corr, 1.0)
    np.clip(corr, 0.0, 1.0, out=corr)
    # exact symmetry regardless of float summation order
    corr = np.minimum(corr, corr.T)
    return corr


def threshold_by_density(corr: np.ndarray, rho: float) -> SymptomGraph:
    """Keep the ``ceil(rho * N(N-1)/2)`` strongest off-diagonal pairs as edges.

    Ties at the cut are broken by lexicographic (i, j) order, so the edge
    set is deterministic and monotone in ``rho``.
    """
    corr = np.asarray(corr, dtype=np.float64)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ContractError(f"correlation matrix must be square, got shape {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ContractError("correlation matrix must be symmetric")
    if not (0.0 <= rho <= 1.0):
        raise ContractError(f"density must lie in [0, 1], got {rho}")
    n = corr.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    total = len(pairs)
    keep = math.ceil(rho * total)
    ranked = sorted(pairs, key=lambda ij: (-abs(corr[ij[0], ij[1]]), ij[0], ij[1]))
    adjacency = np.zeros((n, n))
    weights = np.zeros((n, n))
    for i, j in ranked[:keep]:
        adjacency[i, j] = adjacency[j, i] = 1.0
        weights[i, j] = weights[j, i] = corr[i, j]
    realized = keep / total if total else 0.0
    return SymptomGraph(n_nodes=n, adjacency=adjacency, density=realized, weights=weights)


def normalize(graph: SymptomGraph) -> SymptomGraph:
    """Populate the self-looped symmetric normalization of the adjacency.

    The self-loop guarantees positive degree, so no division can fail, and
    the resulting operator is symmetric with spectral radius at most 1.
    """
    a = graph.adjacency
    _validate_adjacency(a)
    a_tilde = a + np.eye(graph.n_nodes)
    inv_sqrt_deg = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    normalized = inv_sqrt_deg[:, None] * a_tilde * inv_sqrt_deg[None, :]
    return replace(graph, normalized=normalized)


def graph_from_adjacency(adjacency: np.ndarray, weights: np.ndarray | None = None) -> SymptomGraph:
    """Wrap a raw binary adjacency (validated) and populate its normalization."""
    a = np.asarray(adjacency, dtype=np.float64)
    _validate_adjacency(a)
    n = a.shape[0]
    total = n * (n - 1) // 2
    density = (a.sum() / 2.0) / total if total else 0.0
    return normalize(SymptomGraph(n_nodes=n, adjacency=a, density=density, weights=weights))


def _validate_adjacency(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"adjacency must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ContractError("adjacency must be symmetric")
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ContractError("adjacency must be {0,1}-valued")
    if np.any(np.diag(a) != 0.0):
        raise ContractError("adjacency diagonal must be zero")


def save_edgelist(graph: SymptomGraph, path: str | Path, trailer: list[str] | None = None) -> None:
    """Write the plain-text edge list: header line, then one ``i j weight`` per edge.

    ``trailer`` lines are appended as ``#``-prefixed comments (ignored on load);
    the command-line harness uses them to embed the run configuration.
    """
    lines = [f"nodes={graph.n_nodes} density={graph.density!r}"]
    for i, j, w in graph.edge_list():
        lines.append(f"{i} {j} {w!r}")
    for extra in trailer or []:
        lines.append(f"# {extra}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_edgelist(path: str | Path) -> SymptomGraph:
    """Read an edge-list file written by :func:`save_edgelist`; re-normalizes."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ParseError(f"{path}: empty edge-list file")
    header = lines[0].split()
    try:
        n = int(header[0].split("=", 1)[1])
        density = float(header[1].split("=", 1)[1])
    except (IndexError, ValueError):
        raise ParseError(f"{path}:1: malformed header {lines[0]!r}") from None
    adjacency = np.zeros((n, n))
    weights = np.zeros((n, n))
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            raise ParseError(f"{path}:{lineno}: malformed edge line {line!r}") from None
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ParseError(f"{path}:{lineno}: invalid edge ({i}, {j}) for {n} nodes")
        adjacency[i, j] = adjacency[j, i] = 1.0
        weights[i, j] = weights[j, i] = w
    graph = SymptomGraph(n_nodes=n, adjacency=adjacency, density=density, weights=weights)
    return normalize(graph)


def spectral_radius(matrix: np.ndarray) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    return float(np.abs(np.linalg.eigvalsh(matrix)).max())
