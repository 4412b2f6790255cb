"""Two-step impersonation detection and transmitter identification.

Step 1 is the distance-bounding test against the trusted-zone radius.
Step 2 runs up to three nearest-neighbour outlier tests (position, distance,
AoA), fuses them (AND/OR/MV), fuses the result with step 1, and identifies
the transmitter when nothing is flagged. Decisions use b=1 for impersonation
and b=0 for an authenticated sender. Boundary measurements (stat == eps,
z == d0) authenticate, so identical inputs always produce identical records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

H0 = 0  # no impersonation
H1 = 1  # impersonation

FUSION_RULES = ("AND", "OR", "MV")


@dataclass(frozen=True)
class Measurement:
    """One slot's noisy observables at the sink.

    y (AoA) is absent in distance-only operation; p_hat exists exactly when
    y does and must match z * exp(j y) when supplied explicitly.
    """

    z: float
    y: float | None = None
    p_hat: complex | None = None

    def __post_init__(self):
        if self.y is None:
            if self.p_hat is not None:
                raise ValueError("p_hat present without an AoA measurement")
            return
        derived = self.z * np.exp(1j * np.deg2rad(self.y))
        if self.p_hat is None:
            object.__setattr__(self, "p_hat", complex(derived))
        else:
            scale = max(abs(derived), 1.0)
            if abs(self.p_hat - derived) > 1e-9 * scale:
                raise ValueError("p_hat inconsistent with (z, y)")


@dataclass(frozen=True)
class Thresholds:
    """Trusted-zone radius and the proximity-region sizes."""

    d0: float
    eps_p: float
    eps_d: float
    eps_theta: float

    def __post_init__(self):
        for name in ("d0", "eps_p", "eps_d", "eps_theta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class DecisionRecord:
    """Per-trial outputs of every sub-test plus the fused verdicts."""

    step1: int                       # H0/H1 from the distance bound
    test_stats: tuple                # (J*, K*, L*); J*/L* None in distance-only
    ml_indices: tuple                # (i_p*, i_d*, i_theta*)
    test_decisions: tuple            # per-test H0/H1, same layout
    fused_step2: dict                # rule -> H0/H1
    final: int                       # ultimate b
    identified: int | None           # present iff final == H0
    truth: int                       # Alice index, or -1 for Eve
    flags: int = 0                   # diagnostic count (e.g. clamped ranging)

    def __post_init__(self):
        if (self.final == H0) != (self.identified is not None):
            raise ValueError("identified must be present exactly when b=0")


def test1_distance_bounding(z: float, d0: float) -> int:
    """H1 iff the distance estimate exceeds the trusted-zone radius."""
    if z < 0:
        raise ValueError("distance estimate must be >= 0")
    return H1 if z > d0 else H0


def nn_position(p_hat: complex, p: np.ndarray):
    """Nearest ground-truth point: (J*, i_p*), ties to the smallest index."""
    if len(p) == 0:
        raise ValueError("empty ground truth")
    res = np.abs(p_hat - np.asarray(p))
    i = int(np.argmin(res))
    return float(res[i]), i


def nn_distance(z: float, d: np.ndarray):
    """Nearest ground-truth distance: (K*, i_d*)."""
    if len(d) == 0:
        raise ValueError("empty ground truth")
    res = np.abs(z - np.asarray(d))
    i = int(np.argmin(res))
    return float(res[i]), i


def nn_aoa(y: float, theta: np.ndarray):
    """Nearest ground-truth AoA: (L*, i_theta*). Residuals on the plain real
    line; the domain is one half-plane so no wrap-around applies."""
    if len(theta) == 0:
        raise ValueError("empty ground truth")
    res = np.abs(y - np.asarray(theta))
    i = int(np.argmin(res))
    return float(res[i]), i


def bh_outlier(stat: float, eps: float) -> int:
    """H1 iff the residual leaves the proximity region (boundary -> H0)."""
    if stat < 0 or eps <= 0:
        raise ValueError("need stat >= 0 and eps > 0")
    return H1 if stat > eps else H0


def fuse_step2(decisions, rule: str) -> int:
    """Fuse three binary step-2 decisions with AND, OR or majority vote.

    The AND rule authenticates only if all three tests decide H0; the OR
    rule if any one does; MV goes with the majority.
    """
    if len(decisions) != 3:
        raise ValueError("step-2 fusion takes exactly three decisions")
    n_h0 = sum(1 for b in decisions if b == H0)
    if rule == "AND":
        return H0 if n_h0 == 3 else H1
    if rule == "OR":
        return H0 if n_h0 >= 1 else H1
    if rule == "MV":
        return H0 if n_h0 >= 2 else H1
    raise ValueError(f"unknown fusion rule {rule!r}")


def fuse_steps(step1: int, step2: int) -> int:
    """Ultimate decision: authenticate (b=0) only if both steps say H0."""
    return H0 if (step1 == H0 and step2 == H0) else H1


def identify(i_p: int, i_d: int, i_theta: int) -> int:
    """Majority vote over the three ML indices; three-way ties go to the
    position index (the strongest individual test)."""
    if i_p == i_d or i_p == i_theta:
        return i_p
    if i_d == i_theta:
        return i_d
    return i_p


def algorithm1(measurement: Measurement, d: np.ndarray, theta: np.ndarray,
               p: np.ndarray, thresholds: Thresholds, truth: int,
               mode: str = "full", step2_rule: str = "AND",
               flags: int = 0) -> DecisionRecord:
    """One slot of detection + identification.

    mode "full" needs (z, y, p_hat) and runs all three step-2 tests;
    "distance_only" runs only the distance test in step 2 and identifies
    with i_d*. The final verdict fuses step 1 with the configured step-2
    rule; the record still carries all three step-2 fusions.
    """
    if mode not in ("full", "distance_only"):
        raise ValueError(f"unknown mode {mode!r}")
    if step2_rule not in FUSION_RULES:
        raise ValueError(f"unknown fusion rule {step2_rule!r}")

    s1 = test1_distance_bounding(measurement.z, thresholds.d0)
    k_star, i_d = nn_distance(measurement.z, d)
    dec_d = bh_outlier(k_star, thresholds.eps_d)

    if mode == "distance_only":
        fused = {rule: dec_d for rule in FUSION_RULES}
        final = fuse_steps(s1, dec_d)
        return DecisionRecord(
            step1=s1, test_stats=(None, k_star, None),
            ml_indices=(None, i_d, None),
            test_decisions=(None, dec_d, None),
            fused_step2=fused, final=final,
            identified=i_d if final == H0 else None,
            truth=truth, flags=flags)

    if measurement.y is None:
        raise ValueError("full mode needs an AoA measurement")
    j_star, i_p = nn_position(measurement.p_hat, p)
    l_star, i_t = nn_aoa(measurement.y, theta)
    dec_p = bh_outlier(j_star, thresholds.eps_p)
    dec_t = bh_outlier(l_star, thresholds.eps_theta)
    decisions = (dec_p, dec_d, dec_t)
    fused = {rule: fuse_step2(decisions, rule) for rule in FUSION_RULES}
    final = fuse_steps(s1, fused[step2_rule])
    return DecisionRecord(
        step1=s1, test_stats=(j_star, k_star, l_star),
        ml_indices=(i_p, i_d, i_t), test_decisions=decisions,
        fused_step2=fused, final=final,
        identified=identify(i_p, i_d, i_t) if final == H0 else None,
        truth=truth, flags=flags)
