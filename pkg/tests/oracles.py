"""Independent reference implementations the engine is checked against.

These deliberately take the naive route: per-point O(n^2) loops for LOF, an
explicit covariance eigendecomposition for PCA, and an always-recompute
scheduler for the dataflow engine. They share only the mathematical
definitions with the production code, not the code paths.
"""

from __future__ import annotations

import numpy as np

from firelog.dataflow.graph import Workflow, config_digest  # noqa: F401


def lof_bruteforce(points: np.ndarray, k: int) -> np.ndarray:
    """Per-point LOF straight from the definition (tie-inclusive
    neighborhoods, duplicate piles score 1, pile densities via the
    neighborhood expanded to the k-th nearest distinct location)."""
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    assert 1 <= k < n
    D = np.zeros((n, n))
    for j in range(X.shape[1]):
        diff = X[:, j, None] - X[None, :, j]
        D += diff * diff
    D = np.sqrt(D)

    kdist = np.empty(n)
    neighborhoods: list[list[int]] = []
    for i in range(n):
        others = np.delete(D[i], i)
        kdist[i] = np.sort(others)[k - 1]
        neighborhoods.append(
            [j for j in range(n) if j != i and D[i, j] <= kdist[i]])

    mean_reach = np.zeros(n)
    for i in range(n):
        if kdist[i] == 0.0:
            continue
        reaches = [max(kdist[j], D[i, j]) for j in neighborhoods[i]]
        mean_reach[i] = sum(reaches) / len(reaches)

    locations: dict[tuple, list[int]] = {}
    for i in range(n):
        locations.setdefault(tuple(X[i]), []).append(i)
    effective = mean_reach.copy()
    for i in range(n):
        if kdist[i] != 0.0:
            continue
        loc = tuple(X[i])
        dists = sorted(D[i, members[0]]
                       for other, members in locations.items() if other != loc)
        if not dists:  # every point identical: scores are all 1 anyway
            effective[i] = 1.0
            continue
        radius = dists[min(k, len(dists)) - 1]
        nb = [j for j in range(n) if j != i and D[i, j] <= radius]
        reaches = [max(kdist[j], D[i, j]) for j in nb]
        effective[i] = sum(reaches) / len(reaches)

    scores = np.ones(n)
    for i in range(n):
        if kdist[i] == 0.0:
            continue
        ratios = [mean_reach[i] / effective[j] for j in neighborhoods[i]]
        scores[i] = sum(ratios) / len(ratios)
    return scores


def pca_eig_oracle(points: np.ndarray):
    """Top-2 PCA via eigendecomposition of the sample covariance matrix,
    with the same largest-entry-positive sign convention."""
    X = np.asarray(points, dtype=np.float64)
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (X.shape[0] - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:2]
    components = eigenvectors[:, order].T.copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    coords = centered @ components.T
    return coords, components, eigenvalues[order]


def recompute_all(workflow: Workflow, context=None) -> dict:
    """Evaluate every node from scratch in topological order, no caches.
    Returns node-id -> {"payloads": tuple | None, "error": str | None}."""
    ctx = context or workflow.context
    results: dict[str, dict] = {}
    for node_id in workflow.topological_order():
        state = workflow.nodes[node_id]
        incoming = {e.to_port: e for e in workflow.edges if e.to_node == node_id}
        inputs = []
        blocked = None
        for index, port in enumerate(state.kind.inputs):
            edge = incoming.get(index)
            if edge is None:
                inputs.append(None)
                if port.required:
                    blocked = f"missing-input: port {index} ({port.type.value})"
                continue
            upstream = results[edge.from_node]
            if upstream["error"] is not None:
                blocked = f"upstream error in {edge.from_node}"
                inputs.append(None)
            else:
                inputs.append(upstream["payloads"][edge.from_port])
        if blocked is not None:
            results[node_id] = {"payloads": None, "error": blocked}
            continue
        try:
            payloads = tuple(state.kind.evaluate(inputs, state.config, ctx))
            results[node_id] = {"payloads": payloads, "error": None}
        except Exception as exc:
            results[node_id] = {"payloads": None,
                                "error": str(exc) or exc.__class__.__name__}
    return results
