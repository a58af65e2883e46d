"""Minimum-cost FAP activation, subarea assignment and channel-equivalent allocation.

The placement MILP minimises the summed activation cost of the used sites
subject to a per-site channel budget, exactly one serving site per subarea,
and a per-subarea capacity floor (throughput demand already raised to meet
the M/D/1 delay bound).  Because the cost depends only on which sites are
active, the channel-equivalents on an assigned pair are always the minimal
``demand / capacity``; the problem reduces to finding the cheapest site set
whose generalized-assignment subproblem is feasible.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .queueing import required_capacity
from .radio import CapacityModel, fit_models, load_mcs_table, snr
from .scenario import Scenario

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"

# relative slack on budget and rate comparisons
TOL = 1e-9

EXHAUSTIVE_MAX_SITES = 12


# LP-dive nodes per site set before the assignment is handed to a MILP solver
DIVE_NODE_BUDGET = 64
MILP_TIME_LIMIT = 60.0


class _BudgetExceeded(Exception):
    pass


@dataclass
class PlacementProblem:
    site_ids: tuple
    subarea_ids: tuple
    activation_cost: np.ndarray  # (U,)
    channel_budget: np.ndarray  # (U,)
    demands: np.ndarray  # (A,) bit/s
    link_capacity: np.ndarray  # (U, A) bit/s per channel
    site_positions: np.ndarray | None = None
    coverage_infeasible: tuple = ()

    def __post_init__(self):
        self.activation_cost = np.asarray(self.activation_cost, dtype=float).reshape(-1)
        self.channel_budget = np.asarray(self.channel_budget, dtype=float).reshape(-1)
        self.demands = np.asarray(self.demands, dtype=float).reshape(-1)
        n_sites, n_sub = len(self.site_ids), len(self.subarea_ids)
        self.link_capacity = np.asarray(self.link_capacity, dtype=float).reshape(n_sites, n_sub)
        if self.activation_cost.shape != (n_sites,) or self.channel_budget.shape != (n_sites,):
            raise ValueError("per-site arrays must match the number of sites")
        if self.demands.shape != (n_sub,):
            raise ValueError("demands must match the number of subareas")
        if np.any(self.link_capacity < 0):
            raise ValueError("link capacities must be non-negative")
        if np.any(self.demands <= 0):
            raise ValueError("demands must be positive")
        if np.any(self.activation_cost <= 0):
            raise ValueError("activation costs must be positive")

    @property
    def n_sites(self) -> int:
        return len(self.site_ids)

    @property
    def n_subareas(self) -> int:
        return len(self.subarea_ids)

    def weights(self) -> np.ndarray:
        """Channel-equivalents each site needs to serve each subarea (inf if unreachable)."""
        with np.errstate(divide="ignore"):
            return np.where(self.link_capacity > 0, self.demands / self.link_capacity, np.inf)

    def eligible(self) -> np.ndarray:
        return self.weights() <= self.channel_budget[:, None] * (1 + TOL)

    def to_dict(self) -> dict:
        return {
            "site_ids": list(self.site_ids),
            "subarea_ids": list(self.subarea_ids),
            "activation_cost": self.activation_cost.tolist(),
            "channel_budget": self.channel_budget.tolist(),
            "demands": self.demands.tolist(),
            "link_capacity": self.link_capacity.tolist(),
            "site_positions": None if self.site_positions is None else np.asarray(self.site_positions).tolist(),
            "coverage_infeasible": list(self.coverage_infeasible),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlacementProblem":
        pos = d.get("site_positions")
        return cls(
            site_ids=tuple(d["site_ids"]),
            subarea_ids=tuple(d["subarea_ids"]),
            activation_cost=d["activation_cost"],
            channel_budget=d["channel_budget"],
            demands=d["demands"],
            link_capacity=np.asarray(d["link_capacity"], dtype=float).reshape(len(d["site_ids"]), len(d["subarea_ids"])),
            site_positions=None if pos is None else np.asarray(pos, dtype=float),
            coverage_infeasible=tuple(d.get("coverage_infeasible", ())),
        )


@dataclass
class PlacementSolution:
    status: str
    active: np.ndarray  # (U,) bool
    assignment: np.ndarray  # (A,) site index, -1 if unassigned
    channel_equiv: np.ndarray  # (U, A)
    objective: float
    witness: tuple = ()
    witness_kind: str | None = None  # "coverage" | "capacity"
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL

    def active_sites(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.active)]

    def to_dict(self, problem: PlacementProblem | None = None) -> dict:
        d = {
            "status": self.status,
            "objective": self.objective,
            "active": [int(i) for i in np.flatnonzero(self.active)],
            "assignment": [int(u) for u in self.assignment],
            "channel_equiv": [
                [int(u), int(a), float(self.channel_equiv[u, a])]
                for u, a in zip(*np.nonzero(self.channel_equiv))
            ],
            "n_sites": int(self.active.size),
            "witness": list(self.witness),
            "witness_kind": self.witness_kind,
        }
        if problem is not None:
            d["active_site_ids"] = [problem.site_ids[u] for u in d["active"]]
            d["subarea_ids"] = list(problem.subarea_ids)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlacementSolution":
        n_sites = d["n_sites"]
        assignment = np.asarray(d["assignment"], dtype=int)
        active = np.zeros(n_sites, dtype=bool)
        active[d["active"]] = True
        r = np.zeros((n_sites, assignment.size))
        for u, a, v in d["channel_equiv"]:
            r[u, a] = v
        return cls(d["status"], active, assignment, r, float(d["objective"]),
                   tuple(d.get("witness", ())), d.get("witness_kind"))


# ---------------------------------------------------------------------------
# problem construction

def link_capacity_matrix(scenario: Scenario, models: Mapping[float, CapacityModel], site_positions=None) -> np.ndarray:
    """Per-channel capacity c[u, a] for every candidate position and subarea."""
    sites = scenario.site_positions() if site_positions is None else np.asarray(site_positions, dtype=float).reshape(-1, 3)
    subs = scenario.subarea_positions()
    if len(sites) == 0 or len(subs) == 0:
        return np.zeros((len(sites), len(subs)))
    dist = np.linalg.norm(sites[:, None, :] - subs[None, :, :], axis=2)
    link_snr = snr(scenario.radio, dist)
    out = np.empty_like(link_snr)
    smap = scenario.slice_map
    for a, sub in enumerate(scenario.subareas):
        model = _model_for(models, smap[sub.slice_id].target_ber)
        out[:, a] = model.predict(link_snr[:, a])
    return out


def _model_for(models: Mapping[float, CapacityModel], ber: float) -> CapacityModel:
    for b, m in models.items():
        if math.isclose(b, ber, rel_tol=1e-9):
            return m
    raise KeyError(f"no capacity model for BER {ber:g}")


def default_models(scenario: Scenario) -> dict[float, CapacityModel]:
    return fit_models(load_mcs_table(), [s.target_ber for s in scenario.slices])


def subarea_demands(scenario: Scenario) -> np.ndarray:
    smap = scenario.slice_map
    return np.array(
        [required_capacity(smap[a.slice_id], scenario.traffic) for a in scenario.subareas], dtype=float
    )


def build_problem(scenario: Scenario, capacity_models: Mapping[float, CapacityModel] | None = None) -> PlacementProblem:
    models = default_models(scenario) if capacity_models is None else capacity_models
    c = link_capacity_matrix(scenario, models)
    demands = subarea_demands(scenario)
    uncovered = tuple(
        scenario.subareas[a].id for a in range(len(scenario.subareas)) if not np.any(c[:, a] > 0)
    )
    if uncovered:
        logger.warning("coverage-infeasible subareas: %s", list(uncovered))
    return PlacementProblem(
        site_ids=tuple(u.id for u in scenario.sites),
        subarea_ids=tuple(a.id for a in scenario.subareas),
        activation_cost=[u.activation_cost for u in scenario.sites],
        channel_budget=[u.channel_budget for u in scenario.sites],
        demands=demands,
        link_capacity=c,
        site_positions=scenario.site_positions(),
        coverage_infeasible=uncovered,
    )


# ---------------------------------------------------------------------------
# generalized-assignment feasibility for a fixed set of active sites

class _AssignmentOracle:
    """Exact feasibility of serving every subarea from a given site set.

    Cheap screens (coverage, aggregate capacity) and a greedy pass run first,
    then a bounded LP dive; sets the dive cannot settle go to HiGHS' MILP.
    Results are cached per site set.
    """

    def __init__(self, weights: np.ndarray, budgets: np.ndarray, dive_budget: int = DIVE_NODE_BUDGET):
        self.w = weights
        self.R = budgets
        self.dive_budget = dive_budget
        self.cache: dict[tuple, list | None] = {}
        self.n_dfs_nodes = 0
        self.n_lp = 0
        self.n_milp = 0
        self.unresolved: list[tuple] = []

    def screen(self, sites) -> bool:
        """Necessary condition: coverage and aggregate capacity for ``sites``."""
        sites = list(sites)
        if not sites:
            return self.w.shape[1] == 0
        w = self.w[sites]
        fits = w <= self.R[sites, None] * (1 + TOL)
        if not fits.any(axis=0).all():
            return False
        wmin = np.where(fits, w, np.inf).min(axis=0)
        return wmin.sum() <= self.R[sites].sum() * (1 + TOL)

    def assign(self, sites: tuple) -> list | None:
        if sites in self.cache:
            return self.cache[sites]
        result = self._assign(list(sites))
        self.cache[sites] = result
        return result

    def _assign(self, sites: list) -> list | None:
        n_items = self.w.shape[1]
        if n_items == 0:
            return []
        if not self.screen(sites):
            return None
        w = self.w[sites]
        caps = self.R[sites] * (1 + TOL)
        fits = w <= caps[:, None]
        n_fit = fits.sum(axis=0)
        wmin = np.where(fits, w, np.inf).min(axis=0)
        # most constrained first, then heaviest
        order = sorted(range(n_items), key=lambda a: (n_fit[a], -wmin[a], a))
        prefs = [sorted(np.flatnonzero(fits[:, a]).tolist(), key=lambda k: (w[k, a], k)) for a in order]
        wl = w.tolist()

        found = self._greedy(order, prefs, wl, caps.tolist())
        if found is None:
            self._dive_nodes = 0
            try:
                found = self._branch({}, w, caps, fits)
            except _BudgetExceeded:
                found = self._milp(w, caps, fits, tuple(sites))
        if found is None:
            return None
        return [sites[k] for k in found]

    def _milp(self, w, caps, fits, key):
        self.n_milp += 1
        k, n = w.shape
        idx = np.argwhere(fits)
        m = len(idx)
        cols = np.arange(m)
        a_eq = np.zeros((n, m))
        a_eq[idx[:, 1], cols] = 1.0
        a_ub = np.zeros((k, m))
        a_ub[idx[:, 0], cols] = w[idx[:, 0], idx[:, 1]]
        res = milp(
            a_ub[idx[:, 0], cols],  # least channel use among feasible assignments
            constraints=[LinearConstraint(a_eq, 1, 1), LinearConstraint(a_ub, -np.inf, caps)],
            integrality=np.ones(m), bounds=Bounds(0, 1),
            options={"time_limit": MILP_TIME_LIMIT},
        )
        if res.x is None:
            if res.status != 2:
                logger.warning("assignment for sites %s unresolved: %s", key, res.message)
                self.unresolved.append(key)
            return None
        x = np.zeros((k, n))
        x[idx[:, 0], idx[:, 1]] = res.x
        out = x.argmax(axis=0).tolist()
        load = np.zeros(k)
        for a, b in enumerate(out):
            load[b] += w[b, a]
        if np.any(load > caps):
            logger.warning("MILP assignment for sites %s violates a budget after rounding", key)
            self.unresolved.append(key)
            return None
        return out

    @staticmethod
    def _greedy(order, prefs, w, caps):
        resid = list(caps)
        out = [None] * len(order)
        for item, pref in zip(order, prefs):
            for k in pref:
                if w[k][item] <= resid[k]:
                    resid[k] -= w[k][item]
                    out[item] = k
                    break
            else:
                return None
        return out

    def _relaxation(self, free, w, resid, fits):
        """Splittable assignment of ``free`` items minimising channel use.

        Returns the (sites x free) fractions of a vertex solution, or None if
        even the splittable problem is infeasible.
        """
        self.n_lp += 1
        free_arr = np.asarray(free)
        sub = fits[:, free_arr] & (w[:, free_arr] <= resid[:, None])
        if not sub.any(axis=0).all():
            return None
        idx = np.argwhere(sub)
        m, n = len(idx), len(free)
        cols = np.arange(m)
        cost = w[idx[:, 0], free_arr[idx[:, 1]]]
        a_eq = np.zeros((n, m))
        a_eq[idx[:, 1], cols] = 1.0
        a_ub = np.zeros((w.shape[0], m))
        a_ub[idx[:, 0], cols] = cost
        res = linprog(cost, A_ub=a_ub, b_ub=np.maximum(resid, 0.0), A_eq=a_eq, b_eq=np.ones(n),
                      bounds=(0, 1), method="highs-ds")
        if res.status == 2:
            return None
        x = np.zeros((w.shape[0], n))
        if res.status == 0:
            x[idx[:, 0], idx[:, 1]] = res.x
        else:  # numerical trouble: no guidance, branch blindly
            x[idx[:, 0], idx[:, 1]] = 0.5
        return x

    @staticmethod
    def _complete(items, w, resid, fits):
        """Backtracking placement of a handful of leftover items."""
        out = {}

        def rec(i):
            if i == len(items):
                return True
            a = items[i]
            for b in sorted(np.flatnonzero(fits[:, a]).tolist(), key=lambda b: (w[b, a], b)):
                if w[b, a] <= resid[b]:
                    resid[b] -= w[b, a]
                    out[a] = b
                    if rec(i + 1):
                        return True
                    resid[b] += w[b, a]
            return False

        return out if rec(0) else None

    def _branch(self, fixed: dict, w, caps, fits):
        """LP dive with branching on fractional items.

        Integral LP assignments are kept, the few fractional items are placed
        by backtracking; only when that fails is a fractional item branched on.
        """
        self.n_dfs_nodes += 1
        self._dive_nodes += 1
        if self._dive_nodes > self.dive_budget:
            raise _BudgetExceeded
        k, n_items = w.shape
        resid = caps.copy()
        for item, bin_ in fixed.items():
            resid[bin_] -= w[bin_, item]
        if np.any(resid < 0):
            return None
        free = [a for a in range(n_items) if a not in fixed]
        if not free:
            return [fixed[a] for a in range(n_items)]
        x = self._relaxation(free, w, resid, fits)
        if x is None:
            return None
        best_bin = x.argmax(axis=0)
        integral = x.max(axis=0) > 1 - 1e-9

        trial = dict(fixed)
        left = resid.copy()
        for j, a in enumerate(free):
            if integral[j]:
                trial[a] = int(best_bin[j])
                left[best_bin[j]] -= w[best_bin[j], a]
        frac_items = [a for j, a in enumerate(free) if not integral[j]]
        if np.all(left >= 0) and len(frac_items) <= 2 * k:
            rest = self._complete(frac_items, w, left, fits)
            if rest is not None:
                trial.update(rest)
                return [trial[a] for a in range(n_items)]

        if frac_items:
            j = max((j for j in range(len(free)) if not integral[j]),
                    key=lambda j: (np.min(np.where(fits[:, free[j]], w[:, free[j]], np.inf)), -j))
        else:  # rounding noise overflowed a site: branch on its heaviest item
            j = max(range(len(free)), key=lambda j: (w[best_bin[j], free[j]], -j))
        item = free[j]
        options = [b for b in range(k) if fits[b, item] and w[b, item] <= resid[b]]
        options.sort(key=lambda b: (-x[b, j], w[b, item], b))
        for b in options:
            fixed[item] = b
            found = self._branch(fixed, w, caps, fits)
            del fixed[item]
            if found is not None:
                return found
        return None


# ---------------------------------------------------------------------------
# solvers

def _solution_from(problem: PlacementProblem, sites: tuple, assignment: list, stats=None) -> PlacementSolution:
    n_sites, n_sub = problem.n_sites, problem.n_subareas
    w = problem.weights()
    active = np.zeros(n_sites, dtype=bool)
    r = np.zeros((n_sites, n_sub))
    assign = np.full(n_sub, -1, dtype=int)
    for a, u in enumerate(assignment):
        assign[a] = u
        r[u, a] = w[u, a]
        active[u] = True
    objective = float(sum(problem.activation_cost[u] for u in sorted(set(assignment))))
    return PlacementSolution(OPTIMAL, active, assign, r, objective, stats=dict(stats or {}))


def _infeasible(problem: PlacementProblem, oracle: _AssignmentOracle | None = None, stats=None) -> PlacementSolution:
    n_sites, n_sub = problem.n_sites, problem.n_subareas
    elig = problem.eligible()
    uncovered = tuple(problem.subarea_ids[a] for a in range(n_sub) if not elig[:, a].any())
    if uncovered:
        witness, kind = uncovered, "coverage"
    else:
        # subareas a greedy fill of every site cannot place
        w = problem.weights()
        resid = problem.channel_budget.astype(float).copy()
        left = []
        for a in np.argsort(-np.min(w, axis=0), kind="stable"):
            for u in np.argsort(w[:, a], kind="stable"):
                if w[u, a] <= resid[u] * (1 + TOL):
                    resid[u] -= w[u, a]
                    break
            else:
                left.append(problem.subarea_ids[a])
        witness, kind = tuple(left), "capacity"
    return PlacementSolution(
        INFEASIBLE, np.zeros(n_sites, dtype=bool), np.full(n_sub, -1, dtype=int),
        np.zeros((n_sites, n_sub)), math.inf, witness, kind, dict(stats or {}),
    )


def solve_exact(problem: PlacementProblem) -> PlacementSolution:
    """Branch-and-bound over site activation sets.

    Sets are explored in lexicographic order of their sorted site indices, so
    the first optimum found is the lexicographically smallest one; nodes whose
    lower bound reaches the incumbent cost are pruned.  At every node the
    activated set is tested for an exact feasible assignment; if one exists the
    node is a leaf because activating more sites only adds cost.
    """
    n_sites, n_sub = problem.n_sites, problem.n_subareas
    if n_sub == 0:
        return PlacementSolution(OPTIMAL, np.zeros(n_sites, dtype=bool), np.zeros(0, dtype=int),
                                 np.zeros((n_sites, 0)), 0.0, stats={"nodes": 0})
    w = problem.weights()
    budgets = problem.channel_budget
    costs = problem.activation_cost
    fits = w <= budgets[:, None] * (1 + TOL)
    oracle = _AssignmentOracle(w, budgets)

    if not fits.any(axis=0).all() or oracle.assign(tuple(range(n_sites))) is None:
        return _infeasible(problem, oracle, {"nodes": 0})

    w_fit = np.where(fits, w, np.inf)
    best = {"cost": math.inf, "sites": None, "assignment": None}
    nodes = 0

    def extra_bound(sites: list, start: int) -> float:
        """Lower bound on cost still to add to an infeasible set ``sites``."""
        free = list(range(start, n_sites))
        if not free:
            return math.inf
        bound = float(costs[free].min())
        covered = fits[sites].any(axis=0) if sites else np.zeros(n_sub, dtype=bool)
        for a in np.flatnonzero(~covered):
            cand = [k for k in free if fits[k, a]]
            if not cand:
                return math.inf
            bound = max(bound, float(costs[cand].min()))
        pool = sites + free
        deficit = float(w_fit[pool].min(axis=0).sum() - budgets[sites].sum())
        if deficit > 0:
            # fractional knapsack on cost per channel over the free sites
            need, spent = deficit, 0.0
            for k in sorted(free, key=lambda k: (costs[k] / budgets[k], k)):
                take = min(need, budgets[k])
                spent += take * costs[k] / budgets[k]
                need -= take
                if need <= 0:
                    break
            if need > 1e-12:
                return math.inf
            bound = max(bound, spent)
        return bound

    def visit(sites: list, cost: float, start: int):
        nonlocal nodes
        nodes += 1
        if cost >= best["cost"]:
            return
        if sites:
            found = oracle.assign(tuple(sites))
            if found is not None:
                best.update(cost=cost, sites=tuple(sites), assignment=found)
                return
        if cost + extra_bound(sites, start) >= best["cost"]:
            return
        for k in range(start, n_sites):
            # the pool only shrinks as k grows
            if not oracle.screen(sites + list(range(k, n_sites))):
                break
            if cost + costs[k] >= best["cost"]:
                continue
            visit(sites + [k], cost + float(costs[k]), k + 1)

    visit([], 0.0, 0)
    stats = {"nodes": nodes, "dive_nodes": oracle.n_dfs_nodes, "lp_calls": oracle.n_lp,
             "milp_calls": oracle.n_milp, "sets_checked": len(oracle.cache),
             "unresolved_sets": len(oracle.unresolved)}
    if best["sites"] is None:
        return _infeasible(problem, oracle, stats)
    return _solution_from(problem, best["sites"], best["assignment"], stats)


def solve_exhaustive(problem: PlacementProblem) -> PlacementSolution:
    """Reference optimum by enumerating every activation set.

    Sets are tried in order of (cost, sorted site indices); feasibility is
    decided by plain backtracking over subareas.  Only for small instances.
    """
    n_sites, n_sub = problem.n_sites, problem.n_subareas
    if n_sites > EXHAUSTIVE_MAX_SITES:
        raise ValueError(f"exhaustive search limited to {EXHAUSTIVE_MAX_SITES} sites, got {n_sites}")
    if n_sub == 0:
        return PlacementSolution(OPTIMAL, np.zeros(n_sites, dtype=bool), np.zeros(0, dtype=int),
                                 np.zeros((n_sites, 0)), 0.0)
    cap = problem.link_capacity.tolist()
    dem = problem.demands.tolist()
    budget = problem.channel_budget.tolist()
    fcost = problem.activation_cost.tolist()

    def need(u, a):
        return dem[a] / cap[u][a] if cap[u][a] > 0 else math.inf

    def backtrack(sites, a, resid, out):
        if a == n_sub:
            return True
        for u in sites:
            r = need(u, a)
            if r <= resid[u] * (1 + TOL) and r <= budget[u] * (1 + TOL):
                resid[u] -= r
                out.append(u)
                if backtrack(sites, a + 1, resid, out):
                    return True
                out.pop()
                resid[u] += r
        return False

    subsets = []
    for k in range(1, n_sites + 1):
        for combo in itertools.combinations(range(n_sites), k):
            subsets.append((sum(fcost[u] for u in combo), combo))
    subsets.sort()
    for total, combo in subsets:
        out: list = []
        if backtrack(combo, 0, dict((u, budget[u]) for u in combo), out):
            return _solution_from(problem, combo, out)
    return _infeasible(problem)


# ---------------------------------------------------------------------------
# checks and metrics

def check_solution(solution: PlacementSolution, problem: PlacementProblem, integral: bool = False) -> list[str]:
    """Independent check of budget, single-server, rate and indicator constraints.

    With ``integral=True`` channel counts must be whole numbers.
    """
    out = []
    r = np.asarray(solution.channel_equiv, dtype=float)
    c = problem.link_capacity
    if r.shape != c.shape:
        return [f"channel_equiv shape {r.shape} != {c.shape}"]
    if np.any(r < 0):
        out.append("negative channel allocation")
    if integral and not np.allclose(r, np.round(r)):
        out.append("non-integer channel allocation")
    for u in range(problem.n_sites):
        total = r[u].sum()
        if total > problem.channel_budget[u] * (1 + TOL):
            out.append(f"site {problem.site_ids[u]}: channel budget exceeded ({total:.6g} > {problem.channel_budget[u]:g})")
        if bool(solution.active[u]) != bool(total > 0):
            out.append(f"site {problem.site_ids[u]}: indicator inconsistent with allocation")
    for a in range(problem.n_subareas):
        servers = np.flatnonzero(r[:, a] > 0)
        if len(servers) != 1:
            out.append(f"subarea {problem.subarea_ids[a]}: served by {len(servers)} sites")
            continue
        u = servers[0]
        if solution.assignment[a] != u:
            out.append(f"subarea {problem.subarea_ids[a]}: assignment does not match allocation")
        if c[u, a] * r[u, a] < problem.demands[a] * (1 - TOL):
            out.append(f"subarea {problem.subarea_ids[a]}: rate below demand")
    expected = float(sum(problem.activation_cost[u] for u in np.flatnonzero(solution.active)))
    if not math.isclose(expected, solution.objective, rel_tol=1e-12, abs_tol=1e-12):
        out.append(f"objective {solution.objective} != activation cost {expected}")
    return out


def solution_metrics(solution: PlacementSolution, problem: PlacementProblem) -> dict:
    return {
        "n_uavs": int(np.count_nonzero(solution.active)),
        "total_channel_equiv": float(np.sum(solution.channel_equiv)),
        "objective": solution.objective,
    }


# ---------------------------------------------------------------------------
# LP-format export

def to_lp(problem: PlacementProblem) -> str:
    """The placement MILP in CPLEX LP format; rates in Mbit/s."""
    c = problem.link_capacity / 1e6
    d = problem.demands / 1e6
    pairs = [(u, a) for u in range(problem.n_sites) for a in range(problem.n_subareas) if c[u, a] > 0]
    by_site: dict[int, list] = {}
    by_sub: dict[int, list] = {}
    for u, a in pairs:
        by_site.setdefault(u, []).append(a)
        by_sub.setdefault(a, []).append(u)

    def wrap(terms):
        lines, cur = [], " "
        for t in terms:
            if len(cur) + len(t) > 240:
                lines.append(cur)
                cur = " "
            cur += " " + t
        lines.append(cur)
        return "\n".join(lines)

    out = ["\\ placement MILP: min activation cost s.t. channel budget, one server, rate floor",
           "Minimize"]
    out.append(" obj: " + wrap([f"+ {problem.activation_cost[u]:.17g} z_{u}" for u in range(problem.n_sites)]).lstrip())
    out.append("Subject To")
    for u in range(problem.n_sites):
        terms = [f"+ r_{u}_{a}" for a in by_site.get(u, [])]
        out.append(f" budget_{u}: " + wrap(terms + [f"- {problem.channel_budget[u]:.17g} z_{u}"]).lstrip() + " <= 0")
    for a in range(problem.n_subareas):
        out.append(f" one_server_{a}: " + wrap([f"+ y_{u}_{a}" for u in by_sub.get(a, [])]).lstrip() + " = 1")
        out.append(f" rate_{a}: " + wrap([f"+ {c[u, a]:.17g} r_{u}_{a}" for u in by_sub.get(a, [])]).lstrip()
                   + f" >= {d[a]:.17g}")
    for u, a in pairs:
        out.append(f" link_{u}_{a}: r_{u}_{a} - {problem.channel_budget[u]:.17g} y_{u}_{a} <= 0")
        out.append(f" open_{u}_{a}: y_{u}_{a} - z_{u} <= 0")
    out.append("Bounds")
    for u, a in pairs:
        out.append(f" r_{u}_{a} >= 0")
    out.append("Binary")
    out.append(wrap([f"z_{u}" for u in range(problem.n_sites)] + [f"y_{u}_{a}" for u, a in pairs]))
    out.append("End")
    return "\n".join(out) + "\n"


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2) + "\n"
