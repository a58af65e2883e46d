"""Estimator front-end for SLICER and a single entry point for every method."""
from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import GEOMETRIC_CENTER, KMEANS, geometric_center_placement, kmeans_placement
from .channel_plan import plan_solution, verify_plan
from .placement import build_problem, default_models, solve_exact
from .radio import snr
from .scenario import Scenario

SLICER = "slicer"
METHODS = (SLICER, GEOMETRIC_CENTER, KMEANS)


class SlicerPlanner(BaseEstimator):
    """Minimum-cost FAP placement followed by channel packing.

    After ``fit(scenario)``: ``problem_``, ``solution_``, ``plan_`` and
    ``solve_time_`` (seconds spent in the exact solver).
    """

    def __init__(self, split_channels: bool = True):
        self.split_channels = split_channels

    def fit(self, scenario: Scenario, y=None, capacity_models=None):
        self.models_ = default_models(scenario) if capacity_models is None else capacity_models
        self.problem_ = build_problem(scenario, self.models_)
        t0 = time.perf_counter()
        self.solution_ = solve_exact(self.problem_)
        self.solve_time_ = time.perf_counter() - t0
        if self.solution_.feasible:
            self.plan_ = plan_solution(self.solution_, self.problem_, scenario.radio.channel_bandwidth,
                                       self.split_channels)
        else:
            self.plan_ = None
        return self

    @property
    def feasible_(self) -> bool:
        check_is_fitted(self, "solution_")
        return self.solution_.feasible

    def channel_equivalents(self) -> dict:
        """Subarea id -> channel-equivalents allocated by the solution."""
        check_is_fitted(self, "solution_")
        r = self.solution_.channel_equiv.sum(axis=0)
        return {sid: float(r[a]) for a, sid in enumerate(self.problem_.subarea_ids)}

    def predict(self, X, radio=None):
        """Index (into the active sites) of the best-SNR active FAP for each ground point."""
        check_is_fitted(self, "solution_")
        if not self.solution_.feasible:
            raise ValueError("no active FAPs: the scenario is infeasible")
        X = check_array(X, dtype=float)
        if X.shape[1] == 2:
            X = np.column_stack([X, np.zeros(len(X))])
        active = self.solution_.active_sites()
        pos = self.problem_.site_positions[active]
        dist = np.linalg.norm(X[:, None, :] - pos[None, :, :], axis=2)
        if radio is None:
            return dist.argmin(axis=1)
        return np.asarray(snr(radio, dist)).argmax(axis=1)

    def verify(self) -> list[str]:
        check_is_fitted(self, "plan_")
        return verify_plan(self.plan_, self.solution_, self.problem_)


def run_method(method: str, scenario: Scenario, slicer: SlicerPlanner | None = None) -> dict:
    """Plan ``scenario`` with one method.

    Returns ``{"method", "feasible", "plan", "solution" (JSON-ready dict), "solve_time"}``.
    k-means needs SLICER's channel-equivalents; pass a fitted ``slicer`` to reuse it.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    t0 = time.perf_counter()
    if method == SLICER or method == KMEANS:
        if slicer is None:
            slicer = SlicerPlanner().fit(scenario)
    if method == SLICER:
        return {
            "method": SLICER,
            "feasible": slicer.feasible_,
            "plan": slicer.plan_,
            "solution": slicer.solution_.to_dict(slicer.problem_),
            "solve_time": slicer.solve_time_,
        }
    if method == GEOMETRIC_CENTER:
        sol = geometric_center_placement(scenario)
    else:
        if not slicer.feasible_:
            return {"method": KMEANS, "feasible": False, "plan": None,
                    "solution": {"status": "infeasible", "reason": "SLICER found no feasible allocation"},
                    "solve_time": time.perf_counter() - t0}
        sol = kmeans_placement(scenario, slicer.channel_equivalents())
    return {
        "method": method,
        "feasible": True,
        "plan": sol.plan,
        "solution": sol.to_dict(),
        "solve_time": time.perf_counter() - t0,
    }
