"""K-means over tile histograms; the memberships steer the optimizer's mutations."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class ClusterModel:
    """Fitted partition of the tiles by histogram similarity.

    ``assignment[tile_id]`` is the cluster id; ``members[c]`` lists the tile
    ids of cluster c in ascending order. Centroids are the exact member means
    of the final assignment.
    """

    centroids: np.ndarray
    assignment: np.ndarray
    members: list[np.ndarray]
    inertia_history: list[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def n(self) -> int:
        return self.assignment.shape[0]


def kmeans(histograms, n_clusters: int, seed: int, max_iters: int = 100) -> ClusterModel:
    """Lloyd's algorithm with squared-Euclidean distance and k-means++ seeding.

    Deterministic for a fixed seed. Iteration stops when the assignment stops
    changing or after ``max_iters`` passes. Empty clusters are repaired by
    moving in the point farthest from its current centroid. Equidistant points
    go to the lowest cluster id.
    """
    points = np.ascontiguousarray(np.asarray(histograms, dtype=np.float64))
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("histograms must be a non-empty 2-D array")
    n = points.shape[0]
    if n_clusters < 1:
        raise ValueError(f"cluster count must be >= 1, got {n_clusters}")
    if n_clusters > n:
        raise ValueError(f"cluster count {n_clusters} exceeds point count {n}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    rng = random.Random(seed)
    centroids = _plusplus_init(points, n_clusters, rng)
    sq_norms = np.einsum("ij,ij->i", points, points)
    assignment = None
    inertia_history: list[float] = []

    for _ in range(max_iters):
        distances = _sq_distances(points, centroids, sq_norms)
        new_assignment = distances.argmin(axis=1)
        point_d2 = distances[np.arange(n), new_assignment]
        _repair_empty_clusters(new_assignment, point_d2, n_clusters)
        inertia_history.append(float(np.maximum(point_d2, 0.0).sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            assignment = new_assignment
            break
        assignment = new_assignment
        centroids = _means(points, assignment, n_clusters)

    centroids = _means(points, assignment, n_clusters)
    members = [np.flatnonzero(assignment == c) for c in range(n_clusters)]
    return ClusterModel(
        centroids=centroids,
        assignment=assignment.astype(np.int64),
        members=members,
        inertia_history=inertia_history,
    )


def _plusplus_init(points: np.ndarray, n_clusters: int, rng: random.Random) -> np.ndarray:
    """k-means++ seeding: spread the initial centroids by squared distance."""
    n = points.shape[0]
    centroids = np.empty((n_clusters, points.shape[1]), dtype=np.float64)
    idx = rng.randrange(n)
    centroids[0] = points[idx]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, n_clusters):
        total = float(d2.sum())
        if total > 0.0:
            target = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = rng.randrange(n)
        centroids[j] = points[idx]
        np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1), out=d2)
    return centroids


def _sq_distances(points, centroids, sq_norms):
    # |x - c|^2 via the expansion; avoids an (n, K, dim) intermediate
    cross = points @ centroids.T
    c_norms = np.einsum("ij,ij->i", centroids, centroids)
    return sq_norms[:, None] + c_norms[None, :] - 2.0 * cross


def _repair_empty_clusters(assignment, point_d2, n_clusters) -> None:
    """Give each empty cluster the point farthest from its current centroid.

    Points are only taken from clusters with more than one member so the
    repair cannot create new empties. Mutates ``assignment`` in place.
    """
    counts = np.bincount(assignment, minlength=n_clusters)
    for cluster in np.flatnonzero(counts == 0):
        eligible = np.flatnonzero(counts[assignment] > 1)
        pick = int(eligible[np.argmax(point_d2[eligible])])
        counts[assignment[pick]] -= 1
        assignment[pick] = cluster
        counts[cluster] += 1
        point_d2[pick] = 0.0


def _means(points, assignment, n_clusters):
    sums = np.zeros((n_clusters, points.shape[1]), dtype=np.float64)
    np.add.at(sums, assignment, points)
    counts = np.bincount(assignment, minlength=n_clusters).astype(np.float64)
    return sums / counts[:, None]


def cluster_of(model: ClusterModel, tile_id: int) -> int:
    """Cluster id of a tile; O(1) lookup with bounds checking."""
    if not 0 <= tile_id < model.n:
        raise IndexError(f"tile id {tile_id} out of range [0, {model.n})")
    return int(model.assignment[tile_id])


def save_model(model: ClusterModel, path) -> None:
    """Persist centroids and assignment as an .npz archive."""
    with open(path, "wb") as fh:
        np.savez(fh, centroids=model.centroids, assignment=model.assignment)


def load_model(path) -> ClusterModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"cluster model not found: {path}")
    with np.load(path) as archive:
        centroids = archive["centroids"]
        assignment = archive["assignment"].astype(np.int64)
    n_clusters = centroids.shape[0]
    if assignment.size and (assignment.min() < 0 or assignment.max() >= n_clusters):
        raise ValueError(f"cluster model has out-of-range assignments: {path}")
    members = [np.flatnonzero(assignment == c) for c in range(n_clusters)]
    return ClusterModel(centroids=centroids, assignment=assignment, members=members)


def export_assignment_text(model: ClusterModel, path) -> None:
    """Write one ``<tile_id> <cluster_id>`` line per tile, for inspection."""
    lines = [f"{tile_id} {int(cluster)}" for tile_id, cluster in enumerate(model.assignment)]
    Path(path).write_text("\n".join(lines) + "\n")
