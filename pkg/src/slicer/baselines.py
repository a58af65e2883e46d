"""Comparison placements: per-slice geometric centre and per-slice k-means.

Both produce a :class:`ChannelPlan` where every FAP transmits on one wide
channel, so the evaluator treats them exactly like SLICER's packed plan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .channel_plan import Channel, ChannelPlan, FapChannels
from .placement import OPTIMAL, PlacementProblem, PlacementSolution, _model_for, default_models, subarea_demands
from .radio import snr, wide_channel_snr
from .scenario import Scenario

GEOMETRIC_CENTER = "geometric_center"
KMEANS = "kmeans"

# independent RNG streams derived from the scenario seed
_ALTITUDE_STREAM = 1
_KMEANS_STREAM = 2


class BaselineError(RuntimeError):
    pass


@dataclass
class BaselineSolution:
    method: str
    plan: ChannelPlan
    assignment: dict  # subarea_id -> fap_id
    clusters_per_slice: dict = field(default_factory=dict)
    rng_seed: int = 0

    @property
    def n_uavs(self) -> int:
        return len(self.plan.faps)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rng_seed": self.rng_seed,
            "n_uavs": self.n_uavs,
            "clusters_per_slice": dict(self.clusters_per_slice),
            "assignment": {str(k): v for k, v in sorted(self.assignment.items())},
            "plan": self.plan.to_dict(),
        }


# ---------------------------------------------------------------------------
# Lloyd's algorithm

def _nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)  # lowest index on ties
    return labels, d2[np.arange(len(points)), labels]


def wcss(points, centroids) -> float:
    """Within-cluster sum of squares with nearest-centroid assignment."""
    _, d2 = _nearest(np.asarray(points, float), np.asarray(centroids, float))
    return float(d2.sum())


def lloyd_iteration(points, centroids) -> np.ndarray:
    """One assign-then-average step; an empty cluster moves to the worst-served point."""
    points = np.asarray(points, dtype=float)
    centroids = np.asarray(centroids, dtype=float)
    if len(points) == 0:
        raise ValueError("need at least one point")
    labels, d2 = _nearest(points, centroids)
    new = centroids.copy()
    taken = set()
    for k in range(len(centroids)):
        members = labels == k
        if members.any():
            new[k] = points[members].mean(axis=0)
    for k in range(len(centroids)):
        if not (labels == k).any():
            order = [i for i in np.argsort(-d2, kind="stable") if i not in taken]
            if order:
                taken.add(order[0])
                new[k] = points[order[0]]
    return new


class LloydKMeans(ClusterMixin, BaseEstimator):
    """Plain Lloyd k-means, initialised by sampling distinct input points.

    Stops when assignments no longer change or after ``max_iter`` steps.
    """

    def __init__(self, n_clusters: int = 1, max_iter: int = 100, random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        n = X.shape[0]
        if not 1 <= self.n_clusters <= n:
            raise ValueError(f"n_clusters={self.n_clusters} must lie in [1, {n}]")
        rng = check_random_state(self.random_state)
        centroids = X[rng.choice(n, size=self.n_clusters, replace=False)].copy()
        labels, _ = _nearest(X, centroids)
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            centroids = lloyd_iteration(X, centroids)
            new_labels, _ = _nearest(X, centroids)
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        self.cluster_centers_ = centroids
        self.labels_ = labels
        self.inertia_ = wcss(X, centroids)
        self.n_iter_ = n_iter
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=float)
        return _nearest(X, self.cluster_centers_)[0]


# ---------------------------------------------------------------------------
# placements

def _slice_groups(scenario: Scenario) -> list[tuple[str, list[int]]]:
    groups = []
    for s in scenario.slices:
        idx = [i for i, a in enumerate(scenario.subareas) if a.slice_id == s.id]
        if idx:
            groups.append((s.id, idx))
    return groups


def _altitude_rng(scenario: Scenario, method_stream: int) -> np.random.Generator:
    return np.random.default_rng([scenario.rng_seed, _ALTITUDE_STREAM, method_stream])


def geometric_center_placement(scenario: Scenario, max_channels: int | None = None) -> BaselineSolution:
    """One FAP per slice at the centroid of its subareas, on a single channel of
    ``max_channels`` base channels shared equally by the slice's subareas."""
    width = scenario.radio.max_channels_total if max_channels is None else max_channels
    bw = scenario.radio.channel_bandwidth
    rng = _altitude_rng(scenario, 0)
    altitudes = scenario.lattice_levels or (10.0, 20.0)
    faps, assignment = [], {}
    for fap_id, (_, idx) in enumerate(_slice_groups(scenario)):
        pts = scenario.subarea_positions()[idx, :2]
        cx, cy = pts.mean(axis=0)
        z = float(rng.choice(altitudes))
        share = 1.0 / len(idx)
        members = [(scenario.subareas[i].id, share) for i in idx]
        faps.append(FapChannels(fap_id, (float(cx), float(cy), z), [Channel(width * bw, members)]))
        for i in idx:
            assignment[scenario.subareas[i].id] = fap_id
    return BaselineSolution(GEOMETRIC_CENTER, ChannelPlan(faps, bw), assignment, rng_seed=scenario.rng_seed)


def kmeans_placement(
    scenario: Scenario,
    min_channels: dict,
    max_channels: int | None = None,
    max_iter: int = 100,
) -> BaselineSolution:
    """Per-slice k-means with K grown until every FAP's single channel fits.

    ``min_channels`` maps subarea id to the channel-equivalents SLICER gave it.
    Each FAP transmits on one channel of ``ceil(sum of its members' demand)``
    base channels, capped at ``max_channels``.
    """
    cap = scenario.radio.max_channels_total if max_channels is None else max_channels
    bw = scenario.radio.channel_bandwidth
    alt_rng = _altitude_rng(scenario, 1)
    altitudes = scenario.lattice_levels or (10.0, 20.0)
    positions = scenario.subarea_positions()
    faps, assignment, k_per_slice = [], {}, {}
    for s_idx, (slice_id, idx) in enumerate(_slice_groups(scenario)):
        ids = [scenario.subareas[i].id for i in idx]
        need = np.array([float(min_channels[a]) for a in ids])
        pts = positions[idx, :2]
        k = 1
        while True:
            if k > len(idx):
                raise BaselineError(f"slice {slice_id}: no clustering fits {cap} channels per FAP")
            seed = np.random.default_rng([scenario.rng_seed, _KMEANS_STREAM, s_idx, k]).integers(2**31)
            km = LloydKMeans(k, max_iter=max_iter, random_state=int(seed)).fit(pts)
            widths = [_channels_needed(need[km.labels_ == c].sum()) for c in range(k)]
            if max(widths) <= cap:
                break
            k += 1
        k_per_slice[slice_id] = k
        for c in range(k):
            members = np.flatnonzero(km.labels_ == c)
            if len(members) == 0:
                continue
            width = widths[c]
            cx, cy = km.cluster_centers_[c]
            z = float(alt_rng.choice(altitudes))
            fap_id = len(faps)
            chan = Channel(width * bw, [(ids[m], need[m] / width) for m in members])
            faps.append(FapChannels(fap_id, (float(cx), float(cy), z), [chan]))
            for m in members:
                assignment[ids[m]] = fap_id
    return BaselineSolution(KMEANS, ChannelPlan(faps, bw), assignment, k_per_slice, scenario.rng_seed)


def _channels_needed(total: float) -> int:
    return max(1, math.ceil(total - 1e-9))


def verification_inputs(solution: BaselineSolution, scenario: Scenario, models=None):
    """A (problem, solution) pair that lets ``verify_plan`` audit a baseline.

    Each baseline FAP becomes a site whose per-channel capacity to a subarea is
    taken at the SNR of that FAP's (possibly bonded) channel.
    """
    models = default_models(scenario) if models is None else models
    plan = solution.plan
    faps = plan.faps
    subs = scenario.subarea_positions()
    pos = np.array([f.position for f in faps], dtype=float).reshape(-1, 3)
    dist = np.linalg.norm(pos[:, None, :] - subs[None, :, :], axis=2)
    width = np.array([max(c.bandwidth for c in f.channels) / plan.base_bandwidth if f.channels else 1.0 for f in faps])
    link = wide_channel_snr(snr(scenario.radio, dist), width[:, None]) if len(faps) else dist
    cap = np.zeros_like(dist)
    smap = scenario.slice_map
    for a, sub in enumerate(scenario.subareas):
        cap[:, a] = _model_for(models, smap[sub.slice_id].target_ber).predict(link[:, a])
    fap_index = {f.fap_id: u for u, f in enumerate(faps)}
    budget = scenario.radio.max_channels_total
    problem = PlacementProblem(
        site_ids=tuple(f.fap_id for f in faps),
        subarea_ids=tuple(a.id for a in scenario.subareas),
        activation_cost=np.ones(len(faps)),
        channel_budget=np.full(len(faps), budget),
        demands=subarea_demands(scenario),
        link_capacity=cap,
        site_positions=pos,
    )
    assignment = np.array([fap_index.get(solution.assignment.get(a.id), -1) for a in scenario.subareas], dtype=int)
    sol = PlacementSolution(OPTIMAL, np.ones(len(faps), dtype=bool), assignment,
                            np.zeros((len(faps), len(scenario.subareas))), float(len(faps)))
    return problem, sol


# ---------------------------------------------------------------------------
# estimator front-ends

class GeometricCenterPlacer(BaseEstimator):
    """Estimator wrapper around :func:`geometric_center_placement`."""

    def __init__(self, max_channels: int | None = None):
        self.max_channels = max_channels

    def fit(self, scenario: Scenario, y=None):
        self.solution_ = geometric_center_placement(scenario, self.max_channels)
        self.plan_ = self.solution_.plan
        return self

    def predict(self, scenario: Scenario):
        """FAP index serving each subarea of ``scenario``."""
        check_is_fitted(self, "solution_")
        return np.array([self.solution_.assignment[a.id] for a in scenario.subareas], dtype=int)


class KMeansPlacer(BaseEstimator):
    """Estimator wrapper around :func:`kmeans_placement`.

    ``fit`` needs SLICER's per-subarea channel-equivalents as ``min_channels``.
    """

    def __init__(self, max_channels: int | None = None, max_iter: int = 100):
        self.max_channels = max_channels
        self.max_iter = max_iter

    def fit(self, scenario: Scenario, min_channels: dict):
        self.solution_ = kmeans_placement(scenario, min_channels, self.max_channels, self.max_iter)
        self.plan_ = self.solution_.plan
        return self

    def predict(self, scenario: Scenario):
        check_is_fitted(self, "solution_")
        return np.array([self.solution_.assignment[a.id] for a in scenario.subareas], dtype=int)
