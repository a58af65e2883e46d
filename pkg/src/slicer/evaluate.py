"""SLA checks, a per-subarea queue simulator and method comparison tables."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .channel_plan import ChannelPlan
from .placement import _model_for, default_models
from .queueing import analytic_delay
from .radio import CapacityModel, snr, wide_channel_snr
from .scenario import Scenario

SLA_RTOL = 1e-9
DEFAULT_BUFFER = 1000  # packets per subarea queue, including the one in service
DEFAULT_DURATION = 60.0  # s
DEFAULT_RUNS = 5
CDF, CCDF = "cdf", "ccdf"
COMPARE_METRICS = ("n_uavs", "total_bandwidth", "sla_violation_count")


# ---------------------------------------------------------------------------
# distributions

@dataclass
class MetricSeries:
    name: str
    kind: str
    samples: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __call__(self, value: float) -> float:
        """Step function value at ``value``."""
        s = self.samples
        if self.kind == CDF:
            return float(np.count_nonzero(s <= value)) / len(s)
        return float(np.count_nonzero(s > value)) / len(s)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "n_samples": int(len(self.samples)),
            "mean": float(np.mean(self.samples)),
            "x": self.x.tolist(),
            "y": self.y.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "F(x)"])
        for xv, yv in zip(self.x.tolist(), self.y.tolist()):
            w.writerow([repr(xv), repr(yv)])
        return buf.getvalue()


def build_distribution(samples, kind: str = CDF, name: str = "") -> MetricSeries:
    """Empirical CDF (share of samples <= x) or CCDF (share strictly > x)."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("cannot build a distribution from no samples")
    if kind not in (CDF, CCDF):
        raise ValueError(f"kind must be {CDF!r} or {CCDF!r}")
    x = np.unique(s)
    at_or_below = np.searchsorted(s, x, side="right") / s.size
    y = at_or_below if kind == CDF else 1.0 - at_or_below
    return MetricSeries(name, kind, s, x, y)


# ---------------------------------------------------------------------------
# analytic evaluation

@dataclass
class SubareaResult:
    subarea_id: int
    slice_id: str
    faps: list
    achieved_capacity: float
    analytic_delay: float
    sla_ok: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "subarea_id": self.subarea_id,
            "slice_id": self.slice_id,
            "faps": list(self.faps),
            "achieved_capacity": self.achieved_capacity,
            "analytic_delay": None if math.isinf(self.analytic_delay) else self.analytic_delay,
            "sla_ok": self.sla_ok,
            "reason": self.reason,
        }


@dataclass
class EvaluationReport:
    method: str
    scenario_key: tuple
    subareas: list
    n_uavs: int
    total_bandwidth: float
    distributions: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)

    @property
    def sla_violation_count(self) -> int:
        return sum(1 for r in self.subareas if not r.sla_ok)

    def metric(self, name: str) -> float:
        return float(getattr(self, name))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "scenario_key": list(self.scenario_key),
            "n_uavs": self.n_uavs,
            "total_bandwidth": self.total_bandwidth,
            "sla_violation_count": self.sla_violation_count,
            "subareas": [r.to_dict() for r in self.subareas],
            "distributions": {k: v.to_dict() for k, v in self.distributions.items()},
            "simulation": self.simulation,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def scenario_key(scenario: Scenario) -> tuple:
    return (scenario.rng_seed, scenario.snapshot_index, len(scenario.subareas))


def achieved_capacities(
    plan: ChannelPlan, scenario: Scenario, models: Mapping[float, CapacityModel] | None = None
) -> tuple[np.ndarray, list]:
    """Capacity (bit/s) each subarea gets from the plan, and the FAPs serving it.

    A channel bonded from ``m`` base channels spreads the same transmit power
    over ``m`` times the noise bandwidth.
    """
    models = default_models(scenario) if models is None else models
    index = {a.id: i for i, a in enumerate(scenario.subareas)}
    smap = scenario.slice_map
    cap = np.zeros(len(scenario.subareas))
    servers = [[] for _ in scenario.subareas]
    for fap in plan.faps:
        if fap.position is None:
            raise ValueError(f"FAP {fap.fap_id} has no position")
        pos = np.asarray(fap.position, dtype=float)
        for ch in fap.channels:
            width = ch.bandwidth / plan.base_bandwidth
            for sid, f in ch.members:
                i = index[sid]
                sub = scenario.subareas[i]
                diff = pos - np.asarray(sub.center, dtype=float)
                dist = float(np.linalg.norm(diff[None, :], axis=1)[0])
                link = float(wide_channel_snr(snr(scenario.radio, dist), width))
                c = float(_model_for(models, smap[sub.slice_id].target_ber).predict(link))
                cap[i] += c * f * width
                if fap.fap_id not in servers[i]:
                    servers[i].append(fap.fap_id)
    return cap, servers


def analytic_evaluate(
    plan: ChannelPlan,
    scenario: Scenario,
    models: Mapping[float, CapacityModel] | None = None,
    method: str = "slicer",
) -> EvaluationReport:
    """Per-subarea capacity, M/D/1 delay and SLA verdict for a channel plan."""
    cap, servers = achieved_capacities(plan, scenario, models)
    smap = scenario.slice_map
    rows = []
    for i, sub in enumerate(scenario.subareas):
        s = smap[sub.slice_id]
        if not servers[i]:
            rows.append(SubareaResult(sub.id, s.id, [], 0.0, math.inf, False, "uncovered"))
            continue
        delay = analytic_delay(s.throughput_demand, cap[i], scenario.traffic)
        reasons = []
        if cap[i] < s.throughput_demand * (1 - SLA_RTOL):
            reasons.append("throughput")
        if not delay <= s.max_mean_delay * (1 + SLA_RTOL):
            reasons.append("delay")
        rows.append(SubareaResult(sub.id, s.id, servers[i], float(cap[i]), delay, not reasons, ",".join(reasons)))
    return EvaluationReport(method, scenario_key(scenario), rows, plan.n_faps, plan.total_bandwidth)


# ---------------------------------------------------------------------------
# packet-level simulation

@dataclass
class QueueTrace:
    arrivals: np.ndarray
    departures: np.ndarray  # nan for dropped packets
    duration: float

    @property
    def generated(self) -> int:
        return int(self.arrivals.size)

    @property
    def delivered_mask(self) -> np.ndarray:
        return self.departures <= self.duration

    @property
    def delivered(self) -> int:
        return int(np.count_nonzero(self.delivered_mask))

    @property
    def dropped(self) -> int:
        return int(np.count_nonzero(np.isnan(self.departures)))

    @property
    def in_queue(self) -> int:
        return int(np.count_nonzero(self.departures > self.duration))

    def delays(self) -> np.ndarray:
        m = self.delivered_mask
        return self.departures[m] - self.arrivals[m]


def poisson_arrivals(rate: float, duration: float, rng: np.random.Generator) -> np.ndarray:
    if rate <= 0:
        return np.empty(0)
    n = int(rate * duration + 10 * math.sqrt(rate * duration) + 10)
    t = np.cumsum(rng.exponential(1.0 / rate, size=n))
    while t[-1] < duration:
        more = np.cumsum(rng.exponential(1.0 / rate, size=n)) + t[-1]
        t = np.concatenate([t, more])
    return t[t < duration]


def simulate_queue(arrivals: np.ndarray, service_time: float, duration: float, buffer: int = DEFAULT_BUFFER) -> QueueTrace:
    """FIFO deterministic server with room for ``buffer`` packets in the system."""
    a = np.asarray(arrivals, dtype=float)
    if not math.isfinite(service_time):
        return QueueTrace(a, np.full(a.size, np.inf), duration)
    n = a.size
    if n == 0:
        return QueueTrace(a, np.empty(0), duration)
    # without drops: D_i = (i + 1) s + max_{j <= i} (A_j - j s)
    j = np.arange(n)
    dep = (j + 1) * service_time + np.maximum.accumulate(a - j * service_time)
    in_system = j - np.searchsorted(dep, a, side="right")
    if in_system.max() < buffer:
        return QueueTrace(a, dep, duration)
    dep = np.full(n, np.nan)
    q: deque = deque()
    last = -math.inf
    for i in range(n):
        t = a[i]
        while q and q[0] <= t:
            q.popleft()
        if len(q) >= buffer:
            continue
        last = max(t, last) + service_time
        dep[i] = last
        q.append(last)
    return QueueTrace(a, dep, duration)


def _per_second(trace: QueueTrace, packet_size: float, n_sec: int):
    thr = np.zeros(n_sec)
    gen = np.zeros(n_sec)
    ok = np.zeros(n_sec)
    dsum = np.zeros(n_sec)
    dcnt = np.zeros(n_sec)
    if trace.generated:
        m = trace.delivered_mask
        arr_sec = np.minimum(trace.arrivals.astype(int), n_sec - 1)
        np.add.at(gen, arr_sec, 1)
        np.add.at(ok, arr_sec[m], 1)
        dep_sec = np.minimum(trace.departures[m].astype(int), n_sec - 1)
        np.add.at(thr, dep_sec, packet_size)
        np.add.at(dsum, dep_sec, trace.departures[m] - trace.arrivals[m])
        np.add.at(dcnt, dep_sec, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        pdr = np.where(gen > 0, ok / gen, np.nan)
        delay = np.where(dcnt > 0, dsum / dcnt, np.nan)
    return thr, pdr, delay


def simulate_packets(
    plan: ChannelPlan,
    scenario: Scenario,
    duration: float = DEFAULT_DURATION,
    runs: int = DEFAULT_RUNS,
    seed: int = 0,
    models: Mapping[float, CapacityModel] | None = None,
    buffer: int = DEFAULT_BUFFER,
) -> dict:
    """Seeded simulation of every subarea queue.

    Returns the throughput CCDF, PDR CCDF and delay CDF over per-second
    samples averaged across runs, plus packet counters per run.
    """
    if duration <= 0 or runs < 1:
        raise ValueError("need duration > 0 and runs >= 1")
    cap, _ = achieved_capacities(plan, scenario, models)
    smap = scenario.slice_map
    L = scenario.traffic.packet_size
    n_sec = math.ceil(duration)
    n_sub = len(scenario.subareas)
    thr = np.zeros((runs, n_sub, n_sec))
    pdr = np.zeros((runs, n_sub, n_sec))
    delay = np.zeros((runs, n_sub, n_sec))
    counters = []
    for r in range(runs):
        totals = {"generated": 0, "delivered": 0, "dropped": 0, "in_queue": 0}
        for i, sub in enumerate(scenario.subareas):
            rng = np.random.default_rng([seed, r, i])
            lam = scenario.traffic.arrival_rate(smap[sub.slice_id].throughput_demand)
            arrivals = poisson_arrivals(lam, duration, rng)
            service = L / cap[i] if cap[i] > 0 else math.inf
            tr = simulate_queue(arrivals, service, duration, buffer)
            for k in totals:
                totals[k] += getattr(tr, k)
            thr[r, i], pdr[r, i], delay[r, i] = _per_second(tr, L, n_sec)
        counters.append(totals)
    pdr_mean = _nanmean_runs(pdr)
    delay_mean = _nanmean_runs(delay)
    dists = {
        "throughput": build_distribution(thr.mean(axis=0), CCDF, "throughput"),
        "pdr": build_distribution(np.nan_to_num(pdr_mean, nan=0.0), CCDF, "pdr"),
    }
    d = delay_mean[~np.isnan(delay_mean)]
    if d.size:
        dists["delay"] = build_distribution(d, CDF, "delay")
    return {"distributions": dists, "counters": counters, "duration": duration, "runs": runs, "seed": seed}


def _nanmean_runs(x: np.ndarray) -> np.ndarray:
    cnt = np.sum(~np.isnan(x), axis=0)
    tot = np.nansum(x, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)


def evaluate(
    plan: ChannelPlan,
    scenario: Scenario,
    method: str = "slicer",
    simulate: bool = False,
    duration: float = DEFAULT_DURATION,
    runs: int = DEFAULT_RUNS,
    seed: int | None = None,
    models: Mapping[float, CapacityModel] | None = None,
) -> EvaluationReport:
    models = default_models(scenario) if models is None else models
    report = analytic_evaluate(plan, scenario, models, method)
    if simulate:
        sim = simulate_packets(plan, scenario, duration, runs, scenario.rng_seed if seed is None else seed, models)
        report.distributions = sim.pop("distributions")
        report.simulation = sim
    return report


# ---------------------------------------------------------------------------
# comparison

@dataclass
class ComparisonRow:
    method: str
    metric: str
    n: int
    mean: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def mean_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float, float]:
    """Mean and Student-t confidence bounds; bounds are nan for a single value."""
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if v.size < 2:
        return mean, math.nan, math.nan
    half = float(stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / math.sqrt(v.size))
    return mean, mean - half, mean + half


def compare(reports: Sequence[EvaluationReport], metrics: Sequence[str] = COMPARE_METRICS) -> list[ComparisonRow]:
    """Per-method mean and 95% CI; every method must cover the same scenarios."""
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    by_method: dict = {}
    for r in reports:
        by_method.setdefault(r.method, {})
        if r.scenario_key in by_method[r.method]:
            raise ValueError(f"duplicate report for {r.method} on scenario {r.scenario_key}")
        by_method[r.method][r.scenario_key] = r
    keysets = {m: frozenset(v) for m, v in by_method.items()}
    first = next(iter(keysets.values()))
    if any(k != first for k in keysets.values()):
        raise ValueError("methods were evaluated on different scenario sets")
    rows = []
    for m in by_method:
        ordered = [by_method[m][k] for k in sorted(first)]
        for name in metrics:
            mean, lo, hi = mean_ci([r.metric(name) for r in ordered])
            rows.append(ComparisonRow(m, name, len(ordered), mean, lo, hi))
    return rows


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "metric", "n", "mean", "ci_low", "ci_high"])
    for r in rows:
        w.writerow([r.method, r.metric, r.n, repr(r.mean), repr(r.ci_low), repr(r.ci_high)])
    return buf.getvalue()
