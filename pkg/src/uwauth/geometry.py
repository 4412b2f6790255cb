"""Node deployment in the trusted half-disc and adversary placement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class PolarPosition:
    """Position relative to the sink: distance (m) and AoA (degrees, CCW
    from the positive horizontal axis; nodes occupy one half-plane)."""

    distance: float
    aoa: float

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError(f"distance {self.distance} must be >= 0")
        if not (0.0 <= self.aoa <= 180.0):
            raise ValueError(f"aoa {self.aoa} must lie in [0, 180] degrees")

    @property
    def point(self) -> complex:
        """Cartesian point as d * exp(j * aoa)."""
        return self.distance * np.exp(1j * np.deg2rad(self.aoa))


@dataclass(frozen=True)
class Deployment:
    """Trusted zone of radius d0 with the legitimate nodes and one Eve."""

    d0: float
    alice: tuple[PolarPosition, ...]
    eve: PolarPosition
    d_min: float = 10.0

    def __post_init__(self):
        if len(self.alice) < 1:
            raise ValueError("at least one legitimate node required")
        for i, node in enumerate(self.alice):
            if not (self.d_min <= node.distance <= self.d0):
                raise ValueError(
                    f"node {i} at {node.distance} m outside "
                    f"[{self.d_min}, {self.d0}]")

    @property
    def m(self) -> int:
        return len(self.alice)


# Eve placement scenarios (Fig.-style families plus a plain distance-uniform
# law used by the analytic validation runs).

@dataclass(frozen=True)
class OutsideRing:
    """Eve outside the zone: distance ~ U(d0 + epsilon, k*d0)."""
    k: float
    epsilon: float

    def __post_init__(self):
        if self.k <= 1:
            raise ValueError("ring ratio k must exceed 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class InsideUniform:
    """Eve inside the zone, same area-uniform law as the legitimate nodes."""


@dataclass(frozen=True)
class UniformDistance:
    """Eve distance ~ U(lo, hi) (scalar-uniform), AoA ~ U(0, 180)."""
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise ValueError("need 0 <= lo < hi")


@dataclass(frozen=True)
class WorstCaseAoA:
    """Eve shares the target node's AoA, offset radially (clamped in-zone)."""
    target: int
    radial_offset: float


@dataclass(frozen=True)
class WorstCaseDistance:
    """Eve shares the target node's distance, offset in AoA."""
    target: int
    angular_offset: float


@dataclass(frozen=True)
class FixedPosition:
    position: PolarPosition


EveScenario = Union[OutsideRing, InsideUniform, UniformDistance,
                    WorstCaseAoA, WorstCaseDistance, FixedPosition]


def _area_uniform_distance(d_min: float, d0: float, u) -> np.ndarray:
    # uniform over the half-disc area between radii d_min and d0
    return np.sqrt(d_min ** 2 + u * (d0 ** 2 - d_min ** 2))


def deploy_alice(m: int, d0: float, d_min: float,
                 rng: np.random.Generator) -> list[PolarPosition]:
    """Deploy m nodes area-uniformly over the half-disc annulus [d_min, d0]."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not (0 <= d_min < d0):
        raise ValueError(f"need 0 <= d_min < d0, got d_min={d_min}, d0={d0}")
    dist = _area_uniform_distance(d_min, d0, rng.uniform(size=m))
    aoa = rng.uniform(0.0, 180.0, size=m)
    return [PolarPosition(float(d), float(a)) for d, a in zip(dist, aoa)]


def place_eve(scenario: EveScenario, d0: float, d_min: float,
              alice: tuple[PolarPosition, ...],
              rng: np.random.Generator, k_limit: float = 2.0) -> PolarPosition:
    """Place Eve according to the scenario. Consumes at most two draws.

    k_limit bounds how far a radial offset may reach (k_limit * d0) before
    it is treated as a domain error instead of being clamped into the zone.
    """
    if isinstance(scenario, OutsideRing):
        lo, hi = d0 + scenario.epsilon, scenario.k * d0
        if hi <= lo:
            raise ValueError("empty ring: k*d0 <= d0 + epsilon")
        d = rng.uniform(lo, hi)
        return PolarPosition(float(d), float(rng.uniform(0.0, 180.0)))
    if isinstance(scenario, InsideUniform):
        d = _area_uniform_distance(d_min, d0, rng.uniform())
        return PolarPosition(float(d), float(rng.uniform(0.0, 180.0)))
    if isinstance(scenario, UniformDistance):
        d = rng.uniform(scenario.lo, scenario.hi)
        return PolarPosition(float(d), float(rng.uniform(0.0, 180.0)))
    if isinstance(scenario, WorstCaseAoA):
        target = alice[scenario.target]
        d = target.distance + scenario.radial_offset
        if d < d_min or d > k_limit * d0:
            raise ValueError(f"radial offset pushes Eve to {d} m, outside "
                             f"[{d_min}, {k_limit * d0}]")
        return PolarPosition(float(np.clip(d, d_min, d0)), target.aoa)
    if isinstance(scenario, WorstCaseDistance):
        target = alice[scenario.target]
        a = target.aoa + scenario.angular_offset
        if not (0.0 <= a <= 180.0):
            raise ValueError(f"angular offset pushes Eve to {a} deg, "
                             "outside the half-plane")
        return PolarPosition(target.distance, float(a))
    if isinstance(scenario, FixedPosition):
        return scenario.position
    raise TypeError(f"unknown Eve scenario {scenario!r}")


def ground_truth(deployment: Deployment):
    """Ground-truth vectors (d, theta, p) of the legitimate nodes."""
    d = np.array([n.distance for n in deployment.alice])
    theta = np.array([n.aoa for n in deployment.alice])
    p = d * np.exp(1j * np.deg2rad(theta))
    return d, theta, p


def make_deployment(m: int, d0: float, d_min: float, scenario: EveScenario,
                    seed) -> Deployment:
    """Seeded deployment: nodes first, then Eve, from one derived stream."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA11CE]))
    alice = tuple(deploy_alice(m, d0, d_min, rng))
    eve = place_eve(scenario, d0, d_min, alice, rng)
    return Deployment(d0=d0, alice=alice, eve=eve, d_min=d_min)
