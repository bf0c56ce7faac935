"""Capacity-bounded k-means grouping of ground devices.

Every cluster must finish its whole upload inside one movement slot, which
caps cluster size at floor(uplink_rate * cell_size / (packet_bits *
cruise_speed)) devices. The estimator below is plain Lloyd iteration with a
capacity-aware assignment phase: point-centroid pairs are visited in
ascending distance order and each point joins the nearest cluster that still
has room.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import ConfigError, InfeasibleRateError
from .params import SystemParams


def cluster_capacity(params: SystemParams) -> int:
    """Largest cluster able to upload every member's packet within one slot."""
    cap = math.floor(params.uplink_rate * params.cell_size
                     / (params.packet_bits * params.cruise_speed))
    if cap < 1:
        raise InfeasibleRateError(
            f"uplink rate {params.uplink_rate:g} bit/s cannot move even one "
            f"{params.packet_bits:g}-bit packet within a {params.slot_duration:g} s slot"
        )
    return cap


@dataclass(frozen=True)
class Device:
    """A ground IoT device: id, planar position (m), and reward weight."""

    id: int
    xy: tuple[float, float]
    weight: float

    def validate(self) -> None:
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ConfigError(f"device {self.id}: weight must be finite and >= 0")
        if not all(math.isfinite(c) for c in self.xy):
            raise ConfigError(f"device {self.id}: non-finite position {self.xy}")


@dataclass(frozen=True)
class ClusterAssignment:
    """Result of clustering: centroid positions and member device ids.

    ``members[l]`` holds the ids of cluster ``l`` in ascending order;
    centroids are the member means. Cluster ids used in schedule actions are
    1-based (0 means idle), so cluster ``l`` here is schedule value ``l + 1``.
    """

    centroids: tuple[tuple[float, float], ...]
    members: tuple[tuple[int, ...], ...]
    capacity: int

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def labels(self, n_devices: int) -> np.ndarray:
        out = np.full(n_devices, -1, dtype=np.int64)
        for l, ids in enumerate(self.members):
            out[list(ids)] = l
        return out

    def validate(self, n_devices: int) -> None:
        if len(self.members) != len(self.centroids):
            raise ConfigError("assignment: centroid/member count mismatch")
        seen: set[int] = set()
        for l, ids in enumerate(self.members):
            if len(ids) == 0:
                raise ConfigError(f"assignment: cluster {l} is empty")
            if len(ids) > self.capacity:
                raise ConfigError(
                    f"assignment: cluster {l} holds {len(ids)} > capacity {self.capacity}"
                )
            if list(ids) != sorted(ids):
                raise ConfigError(f"assignment: cluster {l} member ids not ascending")
            seen.update(ids)
        if seen != set(range(n_devices)):
            raise ConfigError("assignment: member ids do not partition the device set")

    def to_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "centroids": [[float(x), float(y)] for x, y in self.centroids],
            "members": [list(ids) for ids in self.members],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterAssignment":
        return cls(
            centroids=tuple((float(x), float(y)) for x, y in data["centroids"]),
            members=tuple(tuple(int(i) for i in ids) for ids in data["members"]),
            capacity=int(data["capacity"]),
        )


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Classic k-means++ seeding: D^2-weighted draws from the data."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    centers[0] = X[int(rng.integers(n))]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))  # all remaining mass at one point
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _assign_capacitated(X: np.ndarray, centers: np.ndarray, capacity: int) -> np.ndarray:
    """Greedy feasible assignment.

    All (point, center) pairs sorted by squared distance; ties resolve in
    flattened row-major order (point index, then center index), which keeps
    the result deterministic. Each point takes the nearest center with room.
    """
    n, k = X.shape[0], centers.shape[0]
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    order = np.argsort(d2, axis=None, kind="stable")
    labels = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(k, dtype=np.int64)
    placed = 0
    for flat in order:
        i, l = divmod(int(flat), k)
        if labels[i] >= 0 or counts[l] >= capacity:
            continue
        labels[i] = l
        counts[l] += 1
        placed += 1
        if placed == n:
            break
    return labels


def _update_centers(X: np.ndarray, labels: np.ndarray, old: np.ndarray) -> np.ndarray:
    """Member means; an empty cluster re-seeds at the point farthest from its
    stale centroid (distinct points across repairs within one pass)."""
    k = old.shape[0]
    centers = old.copy()
    empty = []
    for l in range(k):
        mask = labels == l
        if mask.any():
            centers[l] = X[mask].mean(axis=0)
        else:
            empty.append(l)
    used: set[int] = set()
    for l in empty:
        d2 = np.sum((X - old[l]) ** 2, axis=1)
        for idx in np.argsort(-d2, kind="stable"):
            if int(idx) not in used:
                used.add(int(idx))
                centers[l] = X[int(idx)]
                break
    return centers


class CapacitatedKMeans(BaseEstimator, ClusterMixin):
    """K-means honoring a hard per-cluster size cap.

    Parameters
    ----------
    capacity : int
        Maximum members per cluster.
    n_clusters : int or None
        Number of clusters; default ceil(n_samples / capacity), the fewest
        that can hold everything.
    max_iter : int
        Lloyd iteration budget per restart.
    n_init : int
        Independent k-means++ restarts; the run with the lowest inertia wins.
        The capacity-aware assignment is greedy, so single runs land in local
        minima noticeably more often than plain k-means does.
    random_state : int, Generator or None
        Seeds the k-means++ inits. Same seed, same data, same result.

    Attributes (after fit)
    ----------------------
    cluster_centers_ : (n_clusters, 2) member means of the final labels
    labels_ : (n_samples,) cluster index per sample
    n_iter_ : iterations run by the winning restart
    inertia_ : within-cluster sum of squared distances to the member means
    """

    def __init__(self, capacity: int = 20, n_clusters: int | None = None,
                 max_iter: int = 100, n_init: int = 10, random_state=None):
        self.capacity = capacity
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        n = X.shape[0]
        if not (isinstance(self.capacity, (int, np.integer)) and self.capacity >= 1):
            raise ConfigError(f"capacity must be an integer >= 1, got {self.capacity!r}")
        k_min = math.ceil(n / self.capacity)
        k = k_min if self.n_clusters is None else int(self.n_clusters)
        if k < k_min:
            raise ConfigError(
                f"{k} clusters of capacity {self.capacity} cannot hold {n} samples"
            )
        if k > n:
            raise ConfigError(f"more clusters ({k}) than samples ({n})")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.n_init < 1:
            raise ConfigError("n_init must be >= 1")

        rng = np.random.default_rng(self.random_state)
        best = None
        for _ in range(self.n_init):
            centers = _kmeans_pp_init(X, k, rng)
            labels = None
            n_iter = 0
            for n_iter in range(1, self.max_iter + 1):
                new_labels = _assign_capacitated(X, centers, self.capacity)
                if labels is not None and np.array_equal(new_labels, labels):
                    break
                labels = new_labels
                centers = _update_centers(X, labels, centers)

            means = centers.copy()
            for l in range(k):
                mask = labels == l
                if mask.any():
                    means[l] = X[mask].mean(axis=0)
            inertia = float(np.sum((X - means[labels]) ** 2))
            if best is None or inertia < best[0]:  # ties keep the first run
                best = (inertia, means, labels, n_iter)

        self.inertia_, self.cluster_centers_, self.labels_, self.n_iter_ = best
        return self

    def predict(self, X):
        """Nearest fitted centroid, ignoring capacity; ties pick the lower id."""
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        d2 = np.sum((X[:, None, :] - self.cluster_centers_[None, :, :]) ** 2, axis=2)
        return np.argmin(d2, axis=1)


def kmeans_capacitated(devices: list[Device], capacity: int, seed=None,
                       max_iter: int = 100) -> ClusterAssignment:
    """Cluster devices under the capacity cap and package the result.

    Thin wrapper over CapacitatedKMeans producing the frozen assignment the
    environment consumes: member ids ascending within each cluster, centroids
    the member means.
    """
    if not devices:
        raise ConfigError("no devices to cluster")
    ids = [d.id for d in devices]
    if sorted(ids) != list(range(len(devices))):
        raise ConfigError("device ids must be exactly 0..K-1")
    for d in devices:
        d.validate()
    X = np.array([d.xy for d in sorted(devices, key=lambda d: d.id)], dtype=np.float64)
    est = CapacitatedKMeans(capacity=capacity, random_state=seed, max_iter=max_iter).fit(X)
    members = tuple(
        tuple(int(i) for i in np.flatnonzero(est.labels_ == l))
        for l in range(est.cluster_centers_.shape[0])
    )
    centroids = tuple((float(x), float(y)) for x, y in est.cluster_centers_)
    out = ClusterAssignment(centroids=centroids, members=members, capacity=capacity)
    out.validate(len(devices))
    return out
