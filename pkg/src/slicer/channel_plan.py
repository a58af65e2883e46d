"""Packing fractional channel demands into physical fixed-bandwidth channels.

A plan lists, per FAP, the physical channels it transmits on.  Each channel
has a width in base channels (1 for a plain 20 MHz channel) and the share of
its airtime held by each subarea; shares on one channel sum to at most 1.
The same structure describes SLICER's packed allocation and the baselines'
single wide channels, so one evaluator handles all three.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .placement import TOL, PlacementProblem, PlacementSolution

DEFAULT_BANDWIDTH = 20e6  # Hz


class ChannelCapacityExceeded(RuntimeError):
    """Packing needs more channels than the FAP has."""

    def __init__(self, fap, needed, available):
        super().__init__(f"FAP {fap}: packing needs {needed} channels, only {available} available")
        self.fap, self.needed, self.available = fap, needed, available


@dataclass(frozen=True)
class ChannelDemand:
    subarea_id: int
    fraction: float

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError(f"fraction must lie in (0, 1], got {self.fraction}")


@dataclass
class Channel:
    bandwidth: float
    members: list = field(default_factory=list)  # [(subarea_id, fraction)]

    @property
    def load(self) -> float:
        return math.fsum(f for _, f in self.members)

    def to_dict(self) -> dict:
        return {"bandwidth": self.bandwidth, "members": [[int(a), float(f)] for a, f in self.members]}


@dataclass
class FapChannels:
    fap_id: int
    position: tuple | None
    channels: list = field(default_factory=list)

    @property
    def bandwidth(self) -> float:
        return math.fsum(c.bandwidth for c in self.channels)

    def subarea_ids(self) -> list:
        return sorted({a for c in self.channels for a, _ in c.members})

    def to_dict(self) -> dict:
        return {
            "fap_id": self.fap_id,
            "position": None if self.position is None else [float(v) for v in self.position],
            "channels": [c.to_dict() for c in self.channels],
        }


@dataclass
class ChannelPlan:
    faps: list = field(default_factory=list)
    base_bandwidth: float = DEFAULT_BANDWIDTH

    @property
    def total_bandwidth(self) -> float:
        return math.fsum(f.bandwidth for f in self.faps)

    @property
    def channels_per_fap(self) -> dict:
        return {f.fap_id: len(f.channels) for f in self.faps}

    @property
    def n_channels(self) -> int:
        return sum(len(f.channels) for f in self.faps)

    @property
    def n_faps(self) -> int:
        return sum(1 for f in self.faps if f.channels)

    def allocations(self) -> dict:
        """subarea_id -> list of (fap_id, width in base channels, fraction)."""
        out: dict = {}
        for fap in self.faps:
            for ch in fap.channels:
                width = ch.bandwidth / self.base_bandwidth
                for a, f in ch.members:
                    out.setdefault(a, []).append((fap.fap_id, width, f))
        return out

    def fractions(self) -> list:
        return [f for fap in self.faps for ch in fap.channels for _, f in ch.members]

    def to_dict(self) -> dict:
        return {
            "base_bandwidth": self.base_bandwidth,
            "total_bandwidth": self.total_bandwidth,
            "channels_per_fap": {str(k): v for k, v in self.channels_per_fap.items()},
            "faps": [f.to_dict() for f in self.faps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelPlan":
        faps = [
            FapChannels(
                f["fap_id"],
                None if f["position"] is None else tuple(f["position"]),
                [Channel(c["bandwidth"], [(int(a), float(x)) for a, x in c["members"]]) for c in f["channels"]],
            )
            for f in d["faps"]
        ]
        return cls(faps, d["base_bandwidth"])


def split_demand(subarea_id, channels: float) -> list[ChannelDemand]:
    """Whole channels plus one remainder chunk for a demand of ``channels``."""
    if channels <= 0:
        return []
    whole = math.floor(channels)
    rest = channels - whole
    if rest <= 1e-12 and whole > 0:
        # exact multiple: the last whole chunk absorbs rounding
        return [ChannelDemand(subarea_id, 1.0)] * (whole - 1) + [ChannelDemand(subarea_id, channels - (whole - 1))]
    return [ChannelDemand(subarea_id, 1.0)] * whole + [ChannelDemand(subarea_id, rest)]


def _chunks(demands: Iterable) -> list[ChannelDemand]:
    out = []
    for d in demands:
        if isinstance(d, ChannelDemand):
            out.append(d)
        else:
            sid, frac = d
            out.extend(split_demand(sid, frac))
    return out


def lower_bound_channels(demands: Sequence) -> int:
    """Fewest channels any packing can use: the ceiling of the summed fractions."""
    total = math.fsum(c.fraction for c in _chunks(demands))
    return max(0, math.ceil(total - TOL)) if total > 0 else 0


def _ffd(chunks: list, bandwidth: float) -> list[Channel]:
    order = sorted(range(len(chunks)), key=lambda i: (-chunks[i].fraction, i))
    channels: list[Channel] = []
    loads: list[float] = []
    for i in order:
        c = chunks[i]
        for k, load in enumerate(loads):
            if load + c.fraction <= 1.0 + TOL:
                channels[k].members.append((c.subarea_id, c.fraction))
                loads[k] = load + c.fraction
                break
        else:
            channels.append(Channel(bandwidth, [(c.subarea_id, c.fraction)]))
            loads.append(c.fraction)
    return channels


def _split_fill(chunks: list, bandwidth: float) -> list[Channel]:
    """Fill channels to the brim in decreasing order, carrying overflow into the next one.

    Uses exactly the lower-bound channel count; each chunk is cut at most once.
    """
    order = sorted(range(len(chunks)), key=lambda i: (-chunks[i].fraction, i))
    channels: list[Channel] = []
    room = 0.0
    for i in order:
        sid, rest = chunks[i].subarea_id, chunks[i].fraction
        while rest > TOL:
            if room <= TOL:
                channels.append(Channel(bandwidth, []))
                room = 1.0
            part = min(rest, room)
            if rest - part <= TOL:
                part = rest  # absorb float dust instead of opening a channel for it
            channels[-1].members.append((sid, part))
            room -= part
            rest -= part
    return channels


def pack_channels(
    demands: Sequence,
    max_channels: int | None = None,
    bandwidth: float = DEFAULT_BANDWIDTH,
    fap_id: int = 0,
    position=None,
    split: bool = False,
) -> ChannelPlan:
    """First-fit-decreasing packing of one FAP's demands.

    ``demands`` holds ChannelDemand chunks or ``(subarea_id, channels)`` pairs;
    pairs above one channel are split first.  With ``split=True`` a result
    using more channels than the lower bound is replaced by a split-fill
    packing that meets the bound, cutting a few chunks across two channels.
    """
    chunks = _chunks(demands)
    channels = _ffd(chunks, bandwidth)
    if split and len(channels) > lower_bound_channels(chunks):
        channels = _split_fill(chunks, bandwidth)
    if max_channels is not None and len(channels) > max_channels:
        raise ChannelCapacityExceeded(fap_id, len(channels), max_channels)
    return ChannelPlan([FapChannels(fap_id, position, channels)], bandwidth)


def naive_plan(demands: Sequence, bandwidth: float = DEFAULT_BANDWIDTH, fap_id: int = 0, position=None) -> ChannelPlan:
    """One channel per demand chunk."""
    channels = [Channel(bandwidth, [(c.subarea_id, c.fraction)]) for c in _chunks(demands)]
    return ChannelPlan([FapChannels(fap_id, position, channels)], bandwidth)


def _fap_demands(solution: PlacementSolution, problem: PlacementProblem, u: int) -> list:
    return [
        (problem.subarea_ids[a], float(solution.channel_equiv[u, a]))
        for a in np.flatnonzero(solution.channel_equiv[u] > 0)
    ]


def plan_solution(
    solution: PlacementSolution,
    problem: PlacementProblem,
    bandwidth: float = DEFAULT_BANDWIDTH,
    split: bool = True,
) -> ChannelPlan:
    """Pack every active FAP of a placement solution.

    Splitting is on by default: the placement only bounds each FAP's summed
    channel-equivalents, which whole-chunk packing cannot always honour.
    """
    faps = []
    for u in solution.active_sites():
        pos = None if problem.site_positions is None else tuple(float(v) for v in problem.site_positions[u])
        sub = pack_channels(_fap_demands(solution, problem, u), int(problem.channel_budget[u]), bandwidth,
                            problem.site_ids[u], pos, split)
        faps.extend(sub.faps)
    return ChannelPlan(faps, bandwidth)


def naive_solution_plan(solution: PlacementSolution, problem: PlacementProblem, bandwidth: float = DEFAULT_BANDWIDTH) -> ChannelPlan:
    faps = []
    for u in solution.active_sites():
        faps.extend(naive_plan(_fap_demands(solution, problem, u), bandwidth, problem.site_ids[u]).faps)
    return ChannelPlan(faps, bandwidth)


def verify_plan(plan: ChannelPlan, solution: PlacementSolution, problem: PlacementProblem) -> list[str]:
    """Violations of channel loads, budgets and per-subarea demand; empty if valid."""
    out = []
    site_index = {sid: u for u, sid in enumerate(problem.site_ids)}
    sub_index = {sid: a for a, sid in enumerate(problem.subarea_ids)}
    received = np.zeros(problem.n_subareas)
    seen_at: dict = {}
    for fap in plan.faps:
        u = site_index.get(fap.fap_id)
        if u is None:
            out.append(f"FAP {fap.fap_id}: not a candidate site")
            continue
        if len(fap.channels) > problem.channel_budget[u]:
            out.append(f"FAP {fap.fap_id}: {len(fap.channels)} channels exceed budget {problem.channel_budget[u]:g}")
        for k, ch in enumerate(fap.channels):
            if ch.load > 1.0 + TOL:
                out.append(f"FAP {fap.fap_id} channel {k}: fractions sum to {ch.load:.6g} > 1")
            width = ch.bandwidth / plan.base_bandwidth
            for sid, f in ch.members:
                a = sub_index.get(sid)
                if a is None:
                    out.append(f"FAP {fap.fap_id}: unknown subarea {sid}")
                    continue
                seen_at.setdefault(a, set()).add(u)
                received[a] += problem.link_capacity[u, a] * f * width
    for a in range(problem.n_subareas):
        sid = problem.subarea_ids[a]
        servers = seen_at.get(a, set())
        if not servers:
            out.append(f"subarea {sid}: not placed in any channel")
            continue
        if len(servers) > 1:
            out.append(f"subarea {sid}: placed on {len(servers)} FAPs")
        if solution.assignment.size and solution.assignment[a] not in servers:
            out.append(f"subarea {sid}: placed on a FAP other than its assigned site")
        if received[a] < problem.demands[a] * (1 - TOL):
            out.append(f"subarea {sid}: demand violated ({received[a]:.6g} < {problem.demands[a]:.6g} bit/s)")
    return out
