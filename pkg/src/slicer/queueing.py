"""M/D/1 delay analytics and the SLA-to-capacity conversion."""
from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_PACKET_SIZE = 12_000  # bits, 1500-byte packets

STANDARD = "standard"
PRODUCT_FORM = "product_form"
DELAY_MODELS = (STANDARD, PRODUCT_FORM)


class UnstableQueueError(ValueError):
    """Raised when utilisation reaches or exceeds one."""


@dataclass(frozen=True)
class TrafficModel:
    packet_size: float = DEFAULT_PACKET_SIZE  # bits
    arrival_process: str = "poisson"
    delay_model: str = STANDARD

    def __post_init__(self):
        if self.packet_size <= 0:
            raise ValueError("packet_size must be positive")
        if self.arrival_process != "poisson":
            raise ValueError("only Poisson arrivals are supported")
        if self.delay_model not in DELAY_MODELS:
            raise ValueError(f"delay_model must be one of {DELAY_MODELS}")

    def arrival_rate(self, throughput: float) -> float:
        """Packets per second for a slice demanding ``throughput`` bit/s."""
        return throughput / self.packet_size

    def to_dict(self) -> dict:
        return {
            "packet_size": self.packet_size,
            "arrival_process": self.arrival_process,
            "delay_model": self.delay_model,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrafficModel":
        return cls(**d)


def md1_mean_delay(arrival_rate: float, service_rate: float, model: str = STANDARD) -> float:
    """Mean sojourn time (s) of an M/D/1 queue.

    ``model="standard"`` gives ``1/mu + rho / (2 mu (1 - rho))``.
    ``model="product_form"`` gives the product form ``(1/mu) * rho / (2 mu (1 - rho))``
    for comparison runs only; it is not a sojourn time.
    """
    lam, mu = arrival_rate, service_rate
    if mu <= 0 or lam < 0:
        raise ValueError("need service_rate > 0 and arrival_rate >= 0")
    rho = lam / mu
    if rho >= 1.0:
        raise UnstableQueueError(f"utilisation {rho:.4f} >= 1")
    wait = rho / (2.0 * mu * (1.0 - rho))
    if model == STANDARD:
        return 1.0 / mu + wait
    if model == PRODUCT_FORM:
        return wait / mu
    raise ValueError(f"unknown delay model {model!r}")


def min_service_rate(arrival_rate: float, max_mean_delay: float, model: str = STANDARD) -> float:
    """Smallest service rate (packet/s) keeping the mean delay within ``max_mean_delay``."""
    lam, h = arrival_rate, max_mean_delay
    if h <= 0 or lam < 0:
        raise ValueError("need max_mean_delay > 0 and arrival_rate >= 0")
    if model == STANDARD:
        if lam == 0:
            return 1.0 / h
        # larger root of 2 H mu^2 - 2 (H lam + 1) mu + lam = 0
        b = h * lam + 1.0
        disc = math.sqrt(b * b - 2.0 * h * lam)
        return (b + disc) / (2.0 * h)
    if model == PRODUCT_FORM:
        if lam == 0:
            return lam  # product form is identically zero
        # D(mu) = lam / (2 mu^2 (mu - lam)); solve 2 H mu^2 (mu - lam) = lam for mu > lam
        from scipy.optimize import brentq

        f = lambda mu: 2.0 * h * mu * mu * (mu - lam) - lam
        hi = lam + 1.0
        while f(hi) < 0:
            hi *= 2.0
        return brentq(f, lam, hi, xtol=1e-12, rtol=1e-15)
    raise ValueError(f"unknown delay model {model!r}")


def required_capacity(slice_spec, traffic: TrafficModel) -> float:
    """Capacity floor (bit/s) meeting both the throughput and the mean-delay SLA.

    ``slice_spec`` needs ``throughput_demand`` and ``max_mean_delay`` attributes.
    """
    t = slice_spec.throughput_demand
    mu = min_service_rate(traffic.arrival_rate(t), slice_spec.max_mean_delay, traffic.delay_model)
    return max(t, traffic.packet_size * mu)


def analytic_delay(throughput: float, capacity_bps: float, traffic: TrafficModel) -> float:
    """Mean delay of a subarea offered ``throughput`` on ``capacity_bps``; inf if unstable."""
    if capacity_bps <= 0:
        return math.inf
    try:
        return md1_mean_delay(
            traffic.arrival_rate(throughput), capacity_bps / traffic.packet_size, traffic.delay_model
        )
    except UnstableQueueError:
        return math.inf
