"""Bipartite sample-anchor graphs: containers, degrees, connected
components, K-NN initialization, and label extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EDGE_EPS",
    "DEGREE_FLOOR",
    "ViewBipartiteGraph",
    "ConsensusBipartiteGraph",
    "SpectralEmbedding",
    "degrees",
    "count_components",
    "sample_component_labels",
    "knn_bipartite_init",
    "extract_labels",
    "dump_graph_csv",
]

EDGE_EPS = 1e-8       # entries above this count as edges
DEGREE_FLOOR = 1e-12  # guards inverse square roots of degrees


def _weights(graph):
    return graph.weights if hasattr(graph, "weights") else np.asarray(graph, dtype=float)


def _validate_rows(w, what):
    if w.ndim != 2:
        raise ValueError(f"{what} must be 2-d")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"non-finite weight in {what}")
    if w.min() < -1e-12:
        raise ValueError(f"negative weight {w.min():.3e} in {what}")
    dev = np.abs(w.sum(axis=1) - 1.0).max()
    if dev > 1e-8:
        raise ValueError(f"{what} rows must sum to 1 (max deviation {dev:.3e})")


@dataclass
class ViewBipartiteGraph:
    """Row-stochastic (n, m) sample-to-anchor affinity for one view."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        _validate_rows(self.weights, "view graph")
        np.maximum(self.weights, 0.0, out=self.weights)  # clamp -1e-12..0 noise


@dataclass
class ConsensusBipartiteGraph:
    """Row-stochastic (n, m) consensus graph; ``components`` is the full
    component count filled in once the rank loop has converged."""

    weights: np.ndarray
    components: int | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        _validate_rows(self.weights, "consensus graph")
        np.maximum(self.weights, 0.0, out=self.weights)


@dataclass
class SpectralEmbedding:
    """Stacked embedding of samples (f_n) and anchors (f_m); the stacked
    matrix has orthonormal columns: f_n^T f_n + f_m^T f_m = I."""

    f_n: np.ndarray
    f_m: np.ndarray
    singular_values: np.ndarray


def degrees(graph):
    """Sample and anchor degree vectors of a bipartite weight matrix.

    Entries below 1e-12 are floored at 1e-12 so downstream inverse square
    roots stay finite.
    """
    w = _weights(graph)
    d_n = np.maximum(w.sum(axis=1), DEGREE_FLOOR)
    d_m = np.maximum(w.sum(axis=0), DEGREE_FLOOR)
    return d_n, d_m


def _union_find_roots(w, eps):
    # union by smallest index with path halving; the root of any component
    # containing a sample is that component's smallest sample index
    n, m = w.shape
    parent = np.arange(n + m)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    rows, cols = np.nonzero(w > eps)
    for i, j in zip(rows.tolist(), (cols + n).tolist()):
        ra, rb = find(i), find(j)
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    return np.fromiter((find(a) for a in range(n + m)), dtype=int, count=n + m)


def count_components(graph, eps=EDGE_EPS):
    """Connected components of the (n+m)-node bipartite graph whose edges
    are entries > eps. Counts every component, including anchor-only ones;
    equals the multiplicity of eigenvalue 0 of the normalized Laplacian of
    the same thresholded graph."""
    w = _weights(graph)
    return int(np.unique(_union_find_roots(w, eps)).size)


def sample_component_labels(graph, eps=EDGE_EPS):
    """Component ids of the sample nodes.

    Returns (labels, n_sample_components, n_anchor_only). Ids are dense
    0..k-1 assigned in order of each component's smallest sample index.
    """
    w = _weights(graph)
    n = w.shape[0]
    roots = _union_find_roots(w, eps)
    sample_roots = roots[:n]
    uniq = np.unique(sample_roots)          # sorted == order of smallest sample index
    labels = np.searchsorted(uniq, sample_roots)
    anchor_only = int(np.setdiff1d(roots[n:], uniq).size)
    return labels.astype(int), int(uniq.size), anchor_only


def knn_bipartite_init(x, a, k):
    """K-NN bipartite graph: each sample puts weight 1/K on its K nearest
    anchors (Euclidean); distance ties resolve to the lower anchor index."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    m = a.shape[1]
    if not 1 <= k <= m:
        raise ValueError(f"K={k} must be in [1, m={m}]")
    d2 = (x * x).sum(axis=0)[:, None] + (a * a).sum(axis=0)[None, :] - 2.0 * (x.T @ a)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    w = np.zeros_like(d2)
    np.put_along_axis(w, order, 1.0 / k, axis=1)
    return ViewBipartiteGraph(w)


def extract_labels(graph, eps=EDGE_EPS, expected_components=None):
    """Cluster labels read directly off the consensus graph's components.

    Samples sharing a connected component share a label; ids follow each
    component's smallest sample index. When ``expected_components`` is given
    (or the graph carries a ``components`` count net of anchor-only ones),
    a mismatch with the sample-bearing component count raises ValueError.
    """
    labels, n_sample, n_anchor_only = sample_component_labels(graph, eps)
    expected = expected_components
    if expected is None and hasattr(graph, "components") and graph.components is not None:
        expected = graph.components - n_anchor_only
    if expected is not None and n_sample != expected:
        raise ValueError(
            f"component count mismatch: {n_sample} sample-bearing components, expected {expected}"
        )
    return labels


def dump_graph_csv(graph, path):
    """Debug dump of the (n, m) weight matrix as CSV."""
    np.savetxt(path, _weights(graph), delimiter=",", fmt="%.17g")
