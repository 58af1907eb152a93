"""K-means clustering of pixel intensities and elbow-based model selection.

Clustering runs in the 1-D intensity domain: each pixel is a point, each
cluster a scalar centroid.  The tumor mask is the brightest cluster, which
suits contrast-enhanced inputs where lesions appear bright.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ShapeError
from .rng import derive_rng


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 3
    restarts: int = 10
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.restarts < 1 or self.max_iters < 1:
            raise ConfigError("k, restarts, and max_iters must all be >= 1")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray          # (k,) intensities
    assignments: np.ndarray        # int indices, same shape as the input
    wcss: float
    wcss_history: list = field(default_factory=list)  # per-iteration values


@dataclass
class ElbowResult:
    ks: list
    wcss_curve: list
    chosen_k: int


def wcss(points, centroids, assignments) -> float:
    """Sum of squared distances from each point to its assigned centroid."""
    points = np.asarray(points, dtype=np.float64).ravel()
    centroids = np.asarray(centroids, dtype=np.float64).ravel()
    assignments = np.asarray(assignments).ravel()
    if len(points) != len(assignments):
        raise ShapeError(
            f"points ({len(points)}) and assignments ({len(assignments)}) differ in length"
        )
    if len(assignments) and (assignments.min() < 0 or assignments.max() >= len(centroids)):
        raise ShapeError("assignment index out of centroid range")
    return float(((points - centroids[assignments]) ** 2).sum())


def _seed_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty(k)
    centroids[0] = points[rng.integers(n)]
    d2 = (points - centroids[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:  # every point already coincides with a centroid
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, (points - centroids[j]) ** 2)
    return centroids


def _repair_empty(points, assign, centroids, counts):
    """Move the point farthest from its centroid into each empty cluster."""
    for j in np.flatnonzero(counts == 0):
        dist2 = (points - centroids[assign]) ** 2
        # only donate from clusters that keep at least one member
        dist2[counts[assign] < 2] = -1.0
        victim = int(np.argmax(dist2))
        donor = assign[victim]
        assign[victim] = j
        counts[donor] -= 1
        counts[j] += 1
        centroids[j] = points[victim]
        centroids[donor] = points[assign == donor].mean()


def _lloyd(points: np.ndarray, k: int, cfg: KMeansConfig, rng: np.random.Generator):
    centroids = _seed_plusplus(points, k, rng)
    history = []
    assign = None
    for _ in range(cfg.max_iters):
        dist2 = (points[:, None] - centroids[None, :]) ** 2
        assign = np.argmin(dist2, axis=1)  # ties resolve to the lowest index
        history.append(float(dist2[np.arange(len(points)), assign].sum()))
        new_centroids = centroids.copy()
        counts = np.bincount(assign, minlength=k)
        for j in range(k):
            if counts[j]:
                new_centroids[j] = points[assign == j].mean()
        if np.any(counts == 0):
            _repair_empty(points, assign, new_centroids, counts)
        shift = float(np.max(np.abs(new_centroids - centroids)))
        centroids = new_centroids
        if shift < cfg.tol:
            break
    # final assignment so the returned model is nearest-centroid consistent
    dist2 = (points[:, None] - centroids[None, :]) ** 2
    assign = np.argmin(dist2, axis=1)
    final = float(dist2[np.arange(len(points)), assign].sum())
    history.append(final)
    return centroids, assign, final, history


def kmeans(img: np.ndarray, cfg: KMeansConfig) -> ClusterModel:
    """Best-of-restarts Lloyd clustering of intensities.

    Accepts a 2-D image or a flat intensity vector; ``assignments`` in the
    returned model keep the input's shape.  Each restart draws its own
    stream from (seed, restart index), so results do not depend on restart
    execution order.
    """
    img = np.asarray(img, dtype=np.float64)
    points = img.ravel()
    if points.size == 0:
        raise ShapeError("cannot cluster an empty image")
    if cfg.k > points.size:
        raise ConfigError(f"k={cfg.k} exceeds pixel count {points.size}")
    best = None
    for restart in range(cfg.restarts):
        rng = derive_rng(cfg.seed, "kmeans", restart)
        centroids, assign, value, history = _lloyd(points, cfg.k, cfg, rng)
        if best is None or value < best[2]:
            best = (centroids, assign, value, history)
    centroids, assign, value, history = best
    return ClusterModel(
        k=cfg.k,
        centroids=centroids,
        assignments=assign.reshape(img.shape),
        wcss=value,
        wcss_history=history,
    )


def choose_elbow_k(wcss_curve) -> int:
    """Pick k where the curve's rate of decrease changes most sharply.

    Formally the argmax of the discrete second difference
    ``curve[k-1] - 2*curve[k] + curve[k+1]`` over interior k; ties break
    toward the smallest k.  Curve index 0 corresponds to k = 1.
    """
    curve = np.asarray(wcss_curve, dtype=np.float64)
    if len(curve) < 3:
        raise ConfigError("elbow selection needs a curve over at least 3 cluster counts")
    second = curve[:-2] - 2.0 * curve[1:-1] + curve[2:]
    return int(np.argmax(second)) + 2


def elbow_scan(img: np.ndarray, k_max: int, cfg: KMeansConfig) -> ElbowResult:
    """Cluster for every k in 1..k_max and pick the elbow of the WCSS curve."""
    if k_max < 3:
        raise ConfigError(f"k_max must be >= 3, got {k_max}")
    ks = list(range(1, k_max + 1))
    curve = [kmeans(img, replace(cfg, k=k)).wcss for k in ks]
    return ElbowResult(ks=ks, wcss_curve=curve, chosen_k=choose_elbow_k(curve))


def extract_tumor_mask(img: np.ndarray, model: ClusterModel) -> np.ndarray:
    """Boolean mask of the brightest cluster (ties toward the lowest index)."""
    img = np.asarray(img)
    if model.assignments.shape != img.shape:
        raise ShapeError(
            f"model assignments {model.assignments.shape} do not match image {img.shape}"
        )
    return model.assignments == int(np.argmax(model.centroids))
