"""PN waveform synthesis, ML time-of-arrival estimation and ranging bounds.

The response message is a pulse-shaped PN chip train. The sink searches the
integer sample grid of the slot for the delay minimizing the noise-weighted
residual (a matched filter under the slot's noise covariance), converts the
round-trip time to a distance, and evaluates the estimator variance bounds.

Two variance-bound conventions are carried side by side throughout: the
`factor4` form the scheme's closed-form analysis uses (an extra factor 4
in the denominator of the ToA bound) and the `textbook` Fisher form
without it. Monte Carlo validation reports which one empirical variances
track.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .acoustics import NoiseCovariance, pathloss_linear as _pathloss_linear

#: Speed of acoustic waves underwater (m/s).
SOUND_SPEED = 1500.0

# Primitive feedback taps (1-indexed register positions) per register length.
_LFSR_TAPS = {
    2: (2, 1), 3: (3, 2), 4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6),
    8: (8, 6, 5, 4), 9: (9, 5), 10: (10, 7), 11: (11, 9),
    12: (12, 11, 10, 4), 13: (13, 12, 11, 8), 14: (14, 13, 12, 2),
    15: (15, 14), 16: (16, 15, 13, 4),
}


def gen_pn(length: int, seed: int) -> np.ndarray:
    """Maximal-length LFSR chip sequence of the given length, values +/-1.

    The register length is the smallest n with 2^n - 1 >= length; the base
    m-sequence is cycled/truncated to `length`. Bits map 0 -> +1, 1 -> -1.
    """
    if length < 7:
        raise ValueError("PN length must be at least 7")
    nbits = 2
    while (1 << nbits) - 1 < length:
        nbits += 1
    if nbits not in _LFSR_TAPS:
        raise ValueError(f"no taps table for a {nbits}-stage register")
    state = [(int(seed) >> i) & 1 for i in range(nbits)]
    if not any(state):
        raise ValueError("seed must load a nonzero register state")
    taps = _LFSR_TAPS[nbits]
    period = (1 << nbits) - 1
    bits = np.empty(period, dtype=int)
    for i in range(period):
        bits[i] = state[-1]
        fb = 0
        for t in taps:
            fb ^= state[t - 1]
        state = [fb] + state[:-1]
    reps = -(-length // period)
    bits = np.tile(bits, reps)[:length]
    return 1.0 - 2.0 * bits


@dataclass(frozen=True)
class ChipPulse:
    """Smooth chip-shaping pulse with a closed-form delay derivative.

    shape "gauss": Gaussian bump centered on the chip, std width_chips*T_b,
    truncated at +/-GAUSS_TRUNC_SIGMAS with the edge value subtracted so the
    pulse is continuous (the residual slope jump is ~1e-11 of peak).
    shape "hann": full-cosine arch over exactly one chip (C^1 only; its
    curvature jumps bound finite-difference agreement near chip edges).
    """

    shape: str = "gauss"
    width_chips: float = 0.5

    GAUSS_TRUNC_SIGMAS = 7.0

    def __post_init__(self):
        if self.shape not in ("gauss", "hann"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.width_chips <= 0:
            raise ValueError("pulse width must be positive")

    def value(self, t: np.ndarray, t_b: float) -> np.ndarray:
        """Pulse value at time t (seconds) relative to the chip start."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gauss":
            s = self.width_chips * t_b
            u = (t - 0.5 * t_b) / s
            trunc = self.GAUSS_TRUNC_SIGMAS
            inside = np.abs(u) <= trunc
            edge = np.exp(-0.5 * trunc * trunc)
            return np.where(inside, np.exp(-0.5 * u * u) - edge, 0.0)
        u = t / t_b
        inside = (u >= 0.0) & (u <= 1.0)
        return np.where(inside, 0.5 * (1.0 - np.cos(2.0 * np.pi * u)), 0.0)

    def slope(self, t: np.ndarray, t_b: float) -> np.ndarray:
        """d/dt of value(), same support conventions."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gauss":
            s = self.width_chips * t_b
            u = (t - 0.5 * t_b) / s
            inside = np.abs(u) <= self.GAUSS_TRUNC_SIGMAS
            return np.where(inside, -(u / s) * np.exp(-0.5 * u * u), 0.0)
        u = t / t_b
        inside = (u >= 0.0) & (u <= 1.0)
        return np.where(inside,
                        (np.pi / t_b) * np.sin(2.0 * np.pi * u), 0.0)

    def curvature(self, t: np.ndarray, t_b: float) -> np.ndarray:
        """d2/dt2 of value(); diagnostic only, cancels in expected bounds."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gauss":
            s = self.width_chips * t_b
            u = (t - 0.5 * t_b) / s
            inside = np.abs(u) <= self.GAUSS_TRUNC_SIGMAS
            return np.where(inside,
                            ((u * u - 1.0) / (s * s)) * np.exp(-0.5 * u * u),
                            0.0)
        u = t / t_b
        inside = (u >= 0.0) & (u <= 1.0)
        return np.where(inside,
                        (2.0 * np.pi ** 2 / t_b ** 2) * np.cos(2.0 * np.pi * u),
                        0.0)


def _synth_raw(chips: np.ndarray, t_b: float, t_s_sample: float, q: int,
               delay: float, pulse: ChipPulse):
    t = np.arange(q) * t_s_sample - delay * t_s_sample
    arg = t[:, None] - np.arange(chips.size)[None, :] * t_b
    s = pulse.value(arg, t_b) @ chips
    s_dot = -t_s_sample * (pulse.slope(arg, t_b) @ chips)
    return s, s_dot


def synth_waveform(chips: np.ndarray, t_b: float, t_s_sample: float, q: int,
                   delay: float, pr: float,
                   pulse: ChipPulse = ChipPulse()):
    """Sampled slot waveform and its derivative for a given delay.

    Returns (s, s_dot) of length q where s[n] = sqrt(pr) * sum_c chips[c] *
    g(n*T_S - c*T_b - delay*T_S), and s_dot is the analytic derivative of
    s[n] with respect to the delay measured in samples.
    """
    chips = np.asarray(chips, dtype=float)
    if chips.size == 0:
        raise ValueError("empty chip sequence has zero waveform energy")
    if t_s_sample > t_b / 2 + 1e-15:
        raise ValueError("sampling interval must satisfy T_S <= T_b/2")
    if not (0 <= delay <= q - 1):
        raise ValueError(f"delay {delay} outside slot [0, {q - 1}]")
    s, s_dot = _synth_raw(chips, t_b, t_s_sample, q, delay, pulse)
    if not np.any(s):
        raise ValueError("waveform energy is zero over the slot")
    amp = np.sqrt(pr)
    return amp * s, amp * s_dot


@dataclass(frozen=True)
class TemplateBank:
    """Unit-power templates for every integer delay of a slot.

    s_unit rows are normalized so the best-contained delay has slot-average
    power 1 (one shared scale; edge delays keep their physical truncation
    loss). d_unit rows are derivatives w.r.t. delay in samples.
    """

    chips: np.ndarray
    t_b: float
    t_s_sample: float
    q: int
    pulse: ChipPulse
    s_unit: np.ndarray      # (q, q): row t = unit template at delay t
    d_unit: np.ndarray      # (q, q): row t = its per-sample derivative

    @classmethod
    def build(cls, chips, t_b: float, t_s_sample: float, q: int,
              pulse: ChipPulse = ChipPulse()) -> "TemplateBank":
        chips = np.asarray(chips, dtype=float)
        if chips.size == 0:
            raise ValueError("empty chip sequence has zero waveform energy")
        if t_s_sample > t_b / 2 + 1e-15:
            raise ValueError("sampling interval must satisfy T_S <= T_b/2")
        s = np.empty((q, q))
        d = np.empty((q, q))
        for t in range(q):
            # edge delays may truncate to (near) zero energy; the estimator
            # treats those rows as valid low-energy candidates
            s[t], d[t] = _synth_raw(chips, t_b, t_s_sample, q, t, pulse)
        scale = np.sqrt(np.max(np.sum(s * s, axis=1)) / q)
        if scale <= 0:
            raise ValueError("waveform energy is zero over the slot")
        return cls(chips=chips, t_b=t_b, t_s_sample=t_s_sample, q=q,
                   pulse=pulse, s_unit=s / scale, d_unit=d / scale)

    def template(self, delay: int, pr: float = 1.0):
        amp = np.sqrt(pr)
        return amp * self.s_unit[delay], amp * self.d_unit[delay]


@dataclass(frozen=True)
class WhitenedBank:
    """Template bank pre-whitened by one covariance factor."""

    bank: TemplateBank
    cov: NoiseCovariance
    z: np.ndarray           # (q, q): column t = L^-1 s_unit(t)
    gram: np.ndarray        # (q,): s_unit(t)^T Cnorm^-1 s_unit(t)
    quad_dot: np.ndarray    # (q,): s_dot(t)^T Cnorm^-1 s_dot(t), per-sample

    @classmethod
    def build(cls, bank: TemplateBank, cov: NoiseCovariance) -> "WhitenedBank":
        if cov.q != bank.q:
            raise ValueError(f"covariance dimension {cov.q} != slot {bank.q}")
        z = cov.whiten(bank.s_unit.T)
        zd = cov.whiten(bank.d_unit.T)
        return cls(bank=bank, cov=cov, z=z,
                   gram=np.sum(z * z, axis=0),
                   quad_dot=np.sum(zd * zd, axis=0))


def estimate_pr(y: np.ndarray) -> float | np.ndarray:
    """Received-power estimate: mean of squared slot samples."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        return float(np.mean(y * y))
    return np.mean(y * y, axis=-1)


def ml_objective(y: np.ndarray, wb: WhitenedBank,
                 pr_hat: float | None = None) -> np.ndarray:
    """(y - s(t))^T C^-1 (y - s(t)) for every candidate delay t.

    Evaluated through the triangular factor (no explicit inverse); the
    template amplitude is sqrt(pr_hat), defaulting to the slot power
    estimate as in the exhaustive-search estimator.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (wb.bank.q,):
        raise ValueError(f"slot vector has shape {y.shape}, expected "
                         f"({wb.bank.q},)")
    if pr_hat is None:
        pr_hat = estimate_pr(y)
    zy = wb.cov.whiten(y)
    amp = np.sqrt(pr_hat)
    corr = wb.z.T @ zy
    obj = (zy @ zy) - 2.0 * amp * corr + pr_hat * wb.gram
    return obj / wb.cov.sigma2


def ml_toa(y: np.ndarray, wb: WhitenedBank,
           pr_hat: float | None = None) -> int:
    """ML ToA estimate: argmin of ml_objective, ties to the smallest delay."""
    return int(np.argmin(ml_objective(y, wb, pr_hat)))


def ml_toa_batch(ys: np.ndarray, wb: WhitenedBank,
                 pr_hat: np.ndarray | None = None) -> np.ndarray:
    """Vectorized ml_toa over rows of ys; identical decisions per row."""
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[1] != wb.bank.q:
        raise ValueError(f"batch shape {ys.shape} incompatible with slot "
                         f"{wb.bank.q}")
    if pr_hat is None:
        pr_hat = estimate_pr(ys)
    zy = wb.cov.whiten(ys.T)                      # (q, n)
    amp = np.sqrt(pr_hat)[None, :]
    obj = -2.0 * amp * (wb.z.T @ zy) + pr_hat[None, :] * wb.gram[:, None]
    return np.argmin(obj, axis=0)


def crb_toa(cov: NoiseCovariance, s_dot_unit: np.ndarray, pr: float) -> float:
    """ToA variance bound, factor-4 form: sigma^2/(4 P_R sdot^T Cnorm^-1 sdot).

    s_dot_unit is the unit-power template derivative (P_R factored out), in
    per-sample units, so the bound is in samples^2.
    """
    quad = cov.quad_form_norm(s_dot_unit)
    if quad <= 0:
        raise ValueError("degenerate signal: derivative quadratic form is 0")
    return cov.sigma2 / (4.0 * pr * quad)


def crb_toa_textbook(cov: NoiseCovariance, s_dot_unit: np.ndarray,
                     pr: float) -> float:
    """ToA variance bound, textbook Fisher form: sigma^2 / (P_R quad)."""
    quad = cov.quad_form_norm(s_dot_unit)
    if quad <= 0:
        raise ValueError("degenerate signal: derivative quadratic form is 0")
    return cov.sigma2 / (pr * quad)


@dataclass(frozen=True)
class SlotTiming:
    """Slot clock: challenge start t0, switching delay, sampling interval.

    The listening window opens at t0 + switching_delay; sample index n of
    the window corresponds to absolute time window_start + n * t_s_sample.
    """

    t0: float
    switching_delay: float
    t_s_sample: float

    @property
    def window_start(self) -> float:
        return self.t0 + self.switching_delay

    def toa_seconds(self, index: int) -> float:
        return self.window_start + index * self.t_s_sample

    def grid_meters(self) -> float:
        """Distance quantum of one sample of round-trip time."""
        return SOUND_SPEED * self.t_s_sample / 2.0

    def delay_index(self, distance_m: float) -> int:
        """Nearest on-grid delay index for a round trip over distance_m."""
        return int(round(2.0 * distance_m / (SOUND_SPEED * self.t_s_sample)))


def rtt_to_distance(t1_hat: float, t0: float, switching_delay: float):
    """Distance from the estimated ToA: z = v/2 * (t1 - t0 - T_s).

    Negative results clamp to 0; the clamp is reported, never silent.
    Returns (distance_m, clamped).
    """
    z = 0.5 * SOUND_SPEED * (t1_hat - t0 - switching_delay)
    if z < 0:
        return 0.0, True
    return z, False


def sigma_d2(snr: float, pathloss_linear: float, pt_linear: float,
             s_dot_unit: np.ndarray, cov: NoiseCovariance,
             t_s_sample: float) -> float:
    """Distance-estimate variance (m^2), factor-4 form.

    v^2 PL / (16 SNR P_T sdot^T Cnorm^-1 sdot) with the derivative taken per
    second (the per-sample form divided by T_S).
    """
    if snr <= 0 or pathloss_linear <= 0 or pt_linear <= 0:
        raise ValueError("powers and SNR must be positive")
    quad_sec = cov.quad_form_norm(s_dot_unit) / (t_s_sample * t_s_sample)
    if quad_sec <= 0:
        raise ValueError("degenerate signal: derivative quadratic form is 0")
    return SOUND_SPEED ** 2 * pathloss_linear / (16.0 * snr * pt_linear * quad_sec)


def sigma_d2_textbook(snr: float, pathloss_linear: float, pt_linear: float,
                      s_dot_unit: np.ndarray, cov: NoiseCovariance,
                      t_s_sample: float) -> float:
    """Distance-estimate variance (m^2) from the textbook Fisher bound."""
    return 4.0 * sigma_d2(snr, pathloss_linear, pt_linear, s_dot_unit, cov,
                          t_s_sample)


def per_node_sigma(deployment, params, snr: float, pt_linear: float,
                   s_dot_unit: np.ndarray, cov: NoiseCovariance,
                   t_s_sample: float, textbook: bool = False):
    """Per-node ranging std sigma_{d_i} plus a distance-parameterized one.

    Returns (sigma_alice, sigma_of_distance) where sigma_alice[i] applies
    the node's own pathloss and sigma_of_distance(d) evaluates the same
    expression at an arbitrary distance (Eve's law).
    """
    form = sigma_d2_textbook if textbook else sigma_d2

    def sigma_of_distance(d):
        pl = _pathloss_linear(d, params.carrier_khz, params.nu)
        if np.isscalar(d):
            return float(np.sqrt(form(snr, float(pl), pt_linear, s_dot_unit,
                                      cov, t_s_sample)))
        base = form(snr, 1.0, pt_linear, s_dot_unit, cov, t_s_sample)
        return np.sqrt(base * np.asarray(pl))

    d = np.array([n.distance for n in deployment.alice])
    return sigma_of_distance(d), sigma_of_distance


@dataclass(frozen=True)
class RangingResult:
    """One slot's ranging output."""

    toa_index: int
    distance: float
    clamped: bool
    crb_toa: float          # factor-4 form, samples^2
    crb_toa_textbook: float
    sigma_d2: float         # factor-4 form, m^2
    sigma_d2_textbook: float
    pr_hat: float

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError("distance must be clamped to >= 0")


def range_once(y: np.ndarray, wb: WhitenedBank, timing: SlotTiming,
               snr: float, pathloss_lin: float, pt_linear: float) -> RangingResult:
    """Full ranging chain for one received slot."""
    pr_hat = estimate_pr(y)
    idx = ml_toa(y, wb, pr_hat)
    dist, clamped = rtt_to_distance(timing.toa_seconds(idx), timing.t0,
                                    timing.switching_delay)
    s_dot = wb.bank.d_unit[idx]
    return RangingResult(
        toa_index=idx, distance=dist, clamped=clamped,
        crb_toa=crb_toa(wb.cov, s_dot, pr_hat),
        crb_toa_textbook=crb_toa_textbook(wb.cov, s_dot, pr_hat),
        sigma_d2=sigma_d2(snr, pathloss_lin, pt_linear, s_dot, wb.cov,
                          timing.t_s_sample),
        sigma_d2_textbook=sigma_d2_textbook(snr, pathloss_lin, pt_linear,
                                            s_dot, wb.cov, timing.t_s_sample),
        pr_hat=float(pr_hat),
    )


def waveform_curvature(chips, t_b: float, t_s_sample: float, q: int,
                       delay: float, pr: float,
                       pulse: ChipPulse = ChipPulse()) -> np.ndarray:
    """Second delay-derivative of the slot waveform (per-sample^2 units).

    Diagnostic only: this term multiplies zero-mean residuals in the
    curvature of the search objective and cancels in expectation.
    """
    chips = np.asarray(chips, dtype=float)
    t = np.arange(q) * t_s_sample - delay * t_s_sample
    arg = t[:, None] - np.arange(chips.size)[None, :] * t_b
    return (t_s_sample ** 2 * np.sqrt(pr)) * (pulse.curvature(arg, t_b) @ chips)


def dump_trace(path, y: np.ndarray, s: np.ndarray,
               objective: np.ndarray) -> None:
    """Debug dump of (y, s, objective): little-endian f64, length-prefixed."""
    with open(path, "wb") as fh:
        for arr in (y, s, objective):
            a = np.asarray(arr, dtype="<f8")
            fh.write(struct.pack("<Q", a.size))
            fh.write(a.tobytes())


def load_trace(path):
    """Inverse of dump_trace; returns (y, s, objective)."""
    out = []
    with open(path, "rb") as fh:
        for _ in range(3):
            (n,) = struct.unpack("<Q", fh.read(8))
            out.append(np.frombuffer(fh.read(8 * n), dtype="<f8").copy())
    return tuple(out)
