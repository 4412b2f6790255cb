"""Underwater acoustic environment models.

Absorption, spreading pathloss, ambient-noise PSD, noise autocorrelation,
Toeplitz noise covariances and colored-noise sample generation. Frequencies
are in kHz, distances in meters, PSD levels in dB re uPa^2/Hz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class CovarianceFactorError(RuntimeError):
    """Toeplitz noise covariance could not be factorized even after jitter."""


#: Diagonal jitter added when a covariance factorization fails. Small enough
#: to keep the unit diagonal intact to 10 decimal places.
COVARIANCE_JITTER = 1e-10

#: Subintervals of the composite Simpson rule used to invert the noise PSD.
PSD_QUADRATURE_INTERVALS = 4096


@dataclass(frozen=True)
class AcousticParams:
    """Channel constants: spreading factor, noise PSD law and validity band."""

    nu: float = 1.5                 # spreading factor
    n1_db: float = 50.0             # noise PSD constant at 1 kHz
    zeta: float = 1.8               # noise decay constant
    band_lo_khz: float = 1.0
    band_hi_khz: float = 100.0
    carrier_khz: float = 10.0       # frequency at which pathloss is evaluated

    def __post_init__(self):
        if not (1.0 <= self.band_lo_khz < self.band_hi_khz <= 100.0):
            raise ValueError(
                f"PSD band [{self.band_lo_khz}, {self.band_hi_khz}] kHz must satisfy "
                "1 <= lo < hi <= 100 (approximation validity)")
        if self.nu <= 0:
            raise ValueError(f"spreading factor nu={self.nu} must be positive")
        if not (self.band_lo_khz <= self.carrier_khz <= self.band_hi_khz):
            raise ValueError(
                f"carrier {self.carrier_khz} kHz outside PSD band "
                f"[{self.band_lo_khz}, {self.band_hi_khz}]")


def absorption_db_per_km(f_khz):
    """Absorption coefficient (dB/km) at frequency f_khz (kHz)."""
    f = np.asarray(f_khz, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    f2 = f * f
    out = 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
    return float(out) if np.isscalar(f_khz) else out


def pathloss_db(d_m, f_khz, nu: float):
    """Spreading + absorption pathloss in dB.

    The spreading term uses d in meters; the absorption term uses d in km
    since the absorption coefficient is per km.
    """
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = nu * 10.0 * np.log10(d) + (d / 1000.0) * absorption_db_per_km(f_khz)
    return float(out) if np.isscalar(d_m) else out


def pathloss_linear(d_m, f_khz, nu: float):
    """Pathloss as a linear power ratio, 10^(PL_dB/10)."""
    return 10.0 ** (np.asarray(pathloss_db(d_m, f_khz, nu)) / 10.0)


def noise_psd_db(f_khz, params: AcousticParams):
    """Ambient-noise PSD (dB re uPa^2/Hz) inside the validity band."""
    f = np.asarray(f_khz, dtype=float)
    if np.any(f < params.band_lo_khz) or np.any(f > params.band_hi_khz):
        raise ValueError(
            f"frequency outside PSD validity band "
            f"[{params.band_lo_khz}, {params.band_hi_khz}] kHz")
    out = params.n1_db - params.zeta * 10.0 * np.log10(f)
    return float(out) if np.isscalar(f_khz) else out


def _simpson_weights(n_points: int, h: float) -> np.ndarray:
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def noise_autocorrelation(params: AcousticParams, sample_interval: float,
                          max_lag: int) -> np.ndarray:
    """Normalized noise autocorrelation R_w[l] at lags l*sample_interval.

    Inverse-Fourier-transforms the linear-scale PSD over the validity band
    (two-sided symmetric extension, so the transform reduces to a cosine
    integral) with a composite Simpson rule, then normalizes to R_w[0] = 1.
    """
    if sample_interval <= 0:
        raise ValueError("sample_interval must be positive")
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if params.band_lo_khz >= params.band_hi_khz:
        raise ValueError("degenerate PSD band")
    f_khz = np.linspace(params.band_lo_khz, params.band_hi_khz,
                        PSD_QUADRATURE_INTERVALS + 1)
    psd = 10.0 ** (noise_psd_db(f_khz, params) / 10.0)
    w = _simpson_weights(f_khz.size, f_khz[1] - f_khz[0])
    f_hz = f_khz * 1e3
    taus = np.arange(max_lag) * sample_interval
    # (lags x freqs) cosine kernel; row 0 is the zero-lag normalizer
    kernel = np.cos(2.0 * np.pi * np.outer(taus, f_hz))
    r = kernel @ (w * psd)
    return r / r[0]


@dataclass(frozen=True)
class NoiseCovariance:
    """Per-slot noise covariance C = sigma^2 * C_norm with stored factor.

    `factor` is lower-triangular with factor @ factor.T == C_norm (possibly
    after the documented diagonal jitter).
    """

    q: int
    autocorr: np.ndarray
    sigma2: float
    factor: np.ndarray
    jitter: float = 0.0

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    @property
    def matrix_norm(self) -> np.ndarray:
        """The normalized Toeplitz matrix C_norm (unit diagonal)."""
        return scipy.linalg.toeplitz(self.autocorr)

    def with_sigma2(self, sigma2: float) -> "NoiseCovariance":
        """Same correlation structure with a different power scale."""
        return NoiseCovariance(self.q, self.autocorr, float(sigma2),
                               self.factor, self.jitter)

    def whiten(self, x: np.ndarray) -> np.ndarray:
        """Solve factor @ z = x; ||z||^2 = x^T C_norm^-1 x."""
        return scipy.linalg.solve_triangular(self.factor, x, lower=True)

    def quad_form_norm(self, x: np.ndarray) -> float:
        """x^T C_norm^-1 x via the triangular factor."""
        z = self.whiten(np.asarray(x, dtype=float))
        return float(z @ z)


def build_covariance(autocorr, q: int, sigma2: float) -> NoiseCovariance:
    """Build the q x q Toeplitz covariance from an autocorrelation sequence."""
    r = np.asarray(autocorr, dtype=float)
    if r.size < q:
        raise ValueError(f"autocorrelation has {r.size} lags, need {q}")
    if abs(r[0] - 1.0) > 1e-12:
        raise ValueError("autocorr[0] must equal 1 (normalized sequence)")
    if np.any(np.abs(r) > 1.0 + 1e-12):
        raise ValueError("|autocorr| must not exceed 1")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    c_norm = scipy.linalg.toeplitz(r[:q])
    jitter = 0.0
    try:
        factor = scipy.linalg.cholesky(c_norm, lower=True)
    except scipy.linalg.LinAlgError:
        jitter = COVARIANCE_JITTER
        try:
            factor = scipy.linalg.cholesky(
                c_norm + jitter * np.eye(q), lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise CovarianceFactorError(
                f"covariance not positive definite even with jitter {jitter}"
            ) from exc
    return NoiseCovariance(q=q, autocorr=r[:q].copy(), sigma2=float(sigma2),
                           factor=factor, jitter=jitter)


def identity_covariance(q: int, sigma2: float) -> NoiseCovariance:
    """White-noise special case: C_norm = I."""
    r = np.zeros(q)
    r[0] = 1.0
    return NoiseCovariance(q=q, autocorr=r, sigma2=float(sigma2),
                           factor=np.eye(q))


def sample_colored_noise(cov: NoiseCovariance, rng: np.random.Generator,
                         size: int | None = None) -> np.ndarray:
    """Draw noise vectors w = sigma * L * g with E[w w^T] = C.

    With `size` given, returns a (size, q) batch drawn from the same stream.
    """
    n = cov.q if size is None else (size, cov.q)
    g = rng.standard_normal(n)
    w = cov.sigma * (g @ cov.factor.T)
    return w
