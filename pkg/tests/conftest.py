import functools
import math

import numpy as np

from slicer.placement import PlacementProblem
from slicer.scenario import generate_random_scenario

SCENARIO_SIZES = {5: 0.05, 20: 0.20, 45: 0.45}
SCENARIO_SEEDS = range(5)


@functools.lru_cache(maxsize=None)
def default_scenario(n_subareas: int, seed: int):
    return generate_random_scenario(occupancy_fraction=SCENARIO_SIZES[n_subareas], rng_seed=seed)


def random_problem(seed: int, max_sites: int = 12, max_subareas: int = 10) -> PlacementProblem:
    """Small synthetic placement instance; some links are dead, budgets are tight."""
    rng = np.random.default_rng(seed)
    n_sites = int(rng.integers(1, max_sites + 1))
    n_sub = int(rng.integers(1, max_subareas + 1))
    cap = rng.uniform(5e6, 80e6, size=(n_sites, n_sub))
    cap[rng.random((n_sites, n_sub)) < 0.3] = 0.0
    demands = rng.uniform(4e6, 60e6, size=n_sub)
    # either uniform costs (ties) or distinct ones
    if rng.random() < 0.5:
        costs = np.full(n_sites, 1000.0)
    else:
        costs = rng.integers(1, 10, size=n_sites) * 100.0
    budgets = rng.integers(1, 4, size=n_sites)
    return PlacementProblem(
        site_ids=tuple(range(n_sites)),
        subarea_ids=tuple(range(n_sub)),
        activation_cost=costs,
        channel_budget=budgets,
        demands=demands,
        link_capacity=cap,
    )


def optimal_bins(fractions, tol=1e-9):
    """Exact bin-packing optimum by DP over item subsets."""
    n = len(fractions)
    full = (1 << n) - 1
    fits = [math.fsum(fractions[i] for i in range(n) if m >> i & 1) <= 1 + tol for m in range(full + 1)]

    @functools.lru_cache(maxsize=None)
    def best(mask):
        if mask == 0:
            return 0
        low = mask & -mask
        rest = mask ^ low
        out = n + 1
        sub = rest
        while True:
            if fits[sub | low]:
                out = min(out, 1 + best(rest & ~sub))
            if sub == 0:
                break
            sub = (sub - 1) & rest
        return out

    return best(full)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
