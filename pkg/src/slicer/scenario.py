"""Networking-scenario snapshots: cuboid, subareas, slices and candidate sites."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .queueing import TrafficModel
from .radio import RadioConfig

DEFAULT_DIMS = (100.0, 100.0, 20.0)
DEFAULT_CELL_SIDE = 10.0
DEFAULT_PITCH = 25.0
DEFAULT_ALTITUDES = (10.0, 20.0)
DEFAULT_ACTIVATION_COST = 1000.0
DEFAULT_CHANNEL_BUDGET = 8
DEFAULT_RECONFIG_PERIOD = 60.0


class EmptyLatticeError(ValueError):
    """Raised when the candidate-site lattice would contain no cell."""


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class SliceSpec:
    id: str
    kind: str
    throughput_demand: float  # bit/s
    max_mean_delay: float  # s
    target_ber: float

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "throughput_demand": self.throughput_demand,
            "max_mean_delay": self.max_mean_delay,
            "target_ber": self.target_ber,
        }


@dataclass(frozen=True)
class Subarea:
    id: int
    center: tuple  # (x, y, 0) m
    side: float
    slice_id: str

    def to_dict(self) -> dict:
        return {"id": self.id, "center": list(self.center), "side": self.side, "slice_id": self.slice_id}


@dataclass(frozen=True)
class CandidateSite:
    id: int
    position: tuple  # (x, y, z) m
    activation_cost: float = DEFAULT_ACTIVATION_COST
    channel_budget: int = DEFAULT_CHANNEL_BUDGET

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "position": list(self.position),
            "activation_cost": self.activation_cost,
            "channel_budget": self.channel_budget,
        }


EMBB = SliceSpec("embb", "eMBB", 20e6, 5e-3, 1e-5)
URLLC = SliceSpec("urllc", "URLLC", 4e6, 1e-3, 1e-10)


def default_slices() -> tuple[SliceSpec, ...]:
    return (EMBB, URLLC)


@dataclass(frozen=True)
class Scenario:
    cuboid_dims: tuple
    cell_side: float
    lattice_levels: tuple
    slices: tuple
    subareas: tuple
    sites: tuple
    radio: RadioConfig = field(default_factory=RadioConfig)
    traffic: TrafficModel = field(default_factory=TrafficModel)
    reconfig_period: float = DEFAULT_RECONFIG_PERIOD
    rng_seed: int = 0
    snapshot_index: int = 0

    @property
    def slice_map(self) -> dict:
        return {s.id: s for s in self.slices}

    def slice_of(self, subarea: Subarea) -> SliceSpec:
        return self.slice_map[subarea.slice_id]

    def subarea_positions(self) -> np.ndarray:
        return np.array([a.center for a in self.subareas], dtype=float).reshape(-1, 3)

    def site_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.sites], dtype=float).reshape(-1, 3)

    def to_dict(self) -> dict:
        return {
            "cuboid_dims": list(self.cuboid_dims),
            "cell_side": self.cell_side,
            "lattice_levels": list(self.lattice_levels),
            "slices": [s.to_dict() for s in self.slices],
            "subareas": [a.to_dict() for a in self.subareas],
            "sites": [u.to_dict() for u in self.sites],
            "radio": self.radio.to_dict(),
            "traffic": self.traffic.to_dict(),
            "reconfig_period": self.reconfig_period,
            "rng_seed": self.rng_seed,
            "snapshot_index": self.snapshot_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            cuboid_dims=tuple(float(v) for v in d["cuboid_dims"]),
            cell_side=float(d["cell_side"]),
            lattice_levels=tuple(float(v) for v in d["lattice_levels"]),
            slices=tuple(SliceSpec(**s) for s in d["slices"]),
            subareas=tuple(
                Subarea(a["id"], tuple(float(v) for v in a["center"]), float(a["side"]), a["slice_id"])
                for a in d["subareas"]
            ),
            sites=tuple(
                CandidateSite(
                    u["id"], tuple(float(v) for v in u["position"]), float(u["activation_cost"]),
                    int(u["channel_budget"]),
                )
                for u in d["sites"]
            ),
            radio=RadioConfig.from_dict(d["radio"]),
            traffic=TrafficModel.from_dict(d["traffic"]),
            reconfig_period=float(d["reconfig_period"]),
            rng_seed=int(d["rng_seed"]),
            snapshot_index=int(d["snapshot_index"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(Path(path).read_text())


def discretize_sites(
    cuboid_dims: Sequence[float],
    horizontal_pitch: float = DEFAULT_PITCH,
    altitudes: Sequence[float] = DEFAULT_ALTITUDES,
    activation_cost: float = DEFAULT_ACTIVATION_COST,
    channel_budget: int = DEFAULT_CHANNEL_BUDGET,
) -> list[CandidateSite]:
    """Centres of a regular lattice of candidate UAV positions.

    Ordering is row-major over (x, y) with altitude varying fastest.
    """
    x_len, y_len, z_len = cuboid_dims
    if horizontal_pitch <= 0:
        raise ValueError("horizontal_pitch must be positive")
    if not altitudes:
        raise ValueError("at least one altitude is required")
    if any(z <= 0 or z > z_len for z in altitudes):
        raise ValueError(f"altitudes must lie in (0, {z_len}]")
    nx = math.floor(x_len / horizontal_pitch + 1e-9)
    ny = math.floor(y_len / horizontal_pitch + 1e-9)
    if nx < 1 or ny < 1:
        raise EmptyLatticeError(f"pitch {horizontal_pitch} exceeds the cuboid footprint")
    sites = []
    for ix in range(nx):
        for iy in range(ny):
            for z in altitudes:
                pos = ((ix + 0.5) * horizontal_pitch, (iy + 0.5) * horizontal_pitch, float(z))
                sites.append(CandidateSite(len(sites), pos, float(activation_cost), int(channel_budget)))
    return sites


def n_occupied_cells(occupancy_fraction: float, n_cells: int) -> int:
    # round first: 0.05 * 100 is 5.000000000000001 in binary floating point
    return math.ceil(round(occupancy_fraction * n_cells, 9))


def generate_random_scenario(
    dims: Sequence[float] = DEFAULT_DIMS,
    cell_side: float = DEFAULT_CELL_SIDE,
    occupancy_fraction: float = 0.05,
    slices: Sequence[SliceSpec] | None = None,
    rng_seed: int = 0,
    *,
    pitch: float = DEFAULT_PITCH,
    altitudes: Sequence[float] = DEFAULT_ALTITUDES,
    activation_cost: float = DEFAULT_ACTIVATION_COST,
    channel_budget: int = DEFAULT_CHANNEL_BUDGET,
    radio: RadioConfig | None = None,
    traffic: TrafficModel | None = None,
    reconfig_period: float = DEFAULT_RECONFIG_PERIOD,
    snapshot_index: int = 0,
) -> Scenario:
    """Random snapshot: distinct ground cells, each tied to a uniformly drawn slice."""
    slices = tuple(default_slices() if slices is None else slices)
    if not slices:
        raise ScenarioError("at least one slice is required")
    if not 0 < occupancy_fraction <= 1:
        raise ScenarioError("occupancy_fraction must lie in (0, 1]")
    x_len, y_len = dims[0], dims[1]
    nx = math.floor(x_len / cell_side + 1e-9)
    ny = math.floor(y_len / cell_side + 1e-9)
    n_cells = nx * ny
    if occupancy_fraction * n_cells < 1:
        raise ScenarioError("occupancy too small: fewer than one subarea")
    n = n_occupied_cells(occupancy_fraction, n_cells)

    rng = np.random.default_rng(rng_seed)
    cells = np.sort(rng.choice(n_cells, size=n, replace=False))
    slice_idx = rng.integers(len(slices), size=n)
    subareas = tuple(
        Subarea(
            id=i,
            center=((c // ny + 0.5) * cell_side, (c % ny + 0.5) * cell_side, 0.0),
            side=float(cell_side),
            slice_id=slices[k].id,
        )
        for i, (c, k) in enumerate(zip(cells.tolist(), slice_idx.tolist()))
    )
    sites = discretize_sites(dims, pitch, altitudes, activation_cost, channel_budget)
    return Scenario(
        cuboid_dims=tuple(float(v) for v in dims),
        cell_side=float(cell_side),
        lattice_levels=tuple(float(z) for z in altitudes),
        slices=slices,
        subareas=subareas,
        sites=tuple(sites),
        radio=radio or RadioConfig(),
        traffic=traffic or TrafficModel(),
        reconfig_period=float(reconfig_period),
        rng_seed=int(rng_seed),
        snapshot_index=int(snapshot_index),
    )


def validate(scenario: Scenario) -> list[str]:
    """List of invariant violations, empty for a well-formed scenario."""
    out = []
    x_len, y_len, z_len = scenario.cuboid_dims
    eps = 1e-9

    slice_ids = [s.id for s in scenario.slices]
    if len(set(slice_ids)) != len(slice_ids):
        out.append("slices: duplicate slice id")
    for s in scenario.slices:
        if not s.throughput_demand > 0:
            out.append(f"slices[{s.id}].throughput_demand: must be positive")
        if not s.max_mean_delay > 0:
            out.append(f"slices[{s.id}].max_mean_delay: must be positive")
        if not 0 < s.target_ber < 1:
            out.append(f"slices[{s.id}].target_ber: must lie in (0, 1)")

    known = set(slice_ids)
    cells = set()
    for a in scenario.subareas:
        x, y, z = a.center
        half = a.side / 2
        if abs(z) > eps:
            out.append(f"subareas[{a.id}].center: subarea not on cuboid base (z != 0)")
        if x - half < -eps or y - half < -eps or x + half > x_len + eps or y + half > y_len + eps:
            out.append(f"subareas[{a.id}].center: subarea outside footprint")
        if a.slice_id not in known:
            out.append(f"subareas[{a.id}].slice_id: unresolved slice reference {a.slice_id!r}")
        cell = (math.floor(x / scenario.cell_side), math.floor(y / scenario.cell_side))
        if cell in cells:
            out.append(f"subareas[{a.id}].center: cell already occupied by another subarea")
        cells.add(cell)

    for u in scenario.sites:
        x, y, z = u.position
        if not (-eps <= x <= x_len + eps and -eps <= y <= y_len + eps and 0 < z <= z_len + eps):
            out.append(f"sites[{u.id}].position: site outside cuboid")
        if not u.activation_cost > 0:
            out.append(f"sites[{u.id}].activation_cost: must be positive")
        if u.channel_budget < 1:
            out.append(f"sites[{u.id}].channel_budget: must be >= 1")

    if scenario.reconfig_period < 1.0:
        out.append("reconfig_period: must be >= 1 s")
    elif scenario.reconfig_period < 10.0:
        warnings.warn("reconfig_period below 10 s; re-planning may not keep up", stacklevel=2)
    return out
