"""Nonclassicality metrics and Poissonian-regime predictors.

Covers the minimum quadrature variance (squeezing) s, Klyshko coefficients
B_n of the photon-number distribution, Wigner logarithmic negativity (WLN),
and the closed-form predictors of the Poissonian output regime of the driven
Kerr oscillator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gammaln

from . import fock
from .errors import BelowThreshold, GridError, NonzeroMeanError
from .fock import WignerField
from .gaussian import CovarianceMatrix

MEAN_TOL = 1e-8
POPULATION_FLOOR = 1e-12
WLN_ZERO_TOL = 1e-4


@dataclass(frozen=True)
class MetricsRecord:
    """All scalar metrics of one extracted (or cavity) state."""

    s: float
    b_n: np.ndarray
    wln: float
    purity: float
    populations: np.ndarray
    n_mean: float

    def __post_init__(self):
        if self.wln < 0:
            raise ValueError(f"wln must be >= 0, got {self.wln}")
        total = float(np.sum(self.populations))
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"populations sum to {total}, expected 1")

    def b(self, n: int) -> float:
        """Klyshko coefficient B_n (b_n is stored for n = 1..len)."""
        return float(self.b_n[n - 1])

    def rho(self, n: int) -> float:
        return float(self.populations[n]) if n < len(self.populations) else 0.0

    def to_json_dict(self) -> dict:
        return {
            "s": self.s,
            "b_n": [float(b) for b in self.b_n],
            "wln": self.wln,
            "purity": self.purity,
            "populations": [float(p) for p in self.populations],
            "n_mean": self.n_mean,
        }


def squeezing_s(rho: np.ndarray) -> float:
    """Minimum generalized-quadrature variance, 1/2 + <b†b> - |<b²>|.

    Valid for zero-mean states only; the closed form is the minimum over the
    quadrature angle of Var(X_theta) when first moments vanish.
    """
    dim = rho.shape[0]
    b = fock.annihilation(dim)
    mean = fock.expectation(rho, b)
    if abs(mean) > MEAN_TOL:
        raise NonzeroMeanError(
            f"squeezing_s needs <b> = 0, got |<b>| = {abs(mean):.3e}; displace the state first"
        )
    n = fock.expectation(rho, b.conj().T @ b).real
    m2 = fock.expectation(rho, b @ b)
    return float(0.5 + n - abs(m2))


def squeezing_from_covariance(V: CovarianceMatrix) -> float:
    """Minimum quadrature variance of a zero-mean Gaussian state."""
    return float(min(V.eigenvalues()))


def klyshko(populations: np.ndarray, n: int) -> float:
    """Klyshko coefficient B_n = (n+1) rho_{n-1} rho_{n+1} - n rho_n².

    Any B_n < 0 certifies a nonclassical photon-number distribution.
    Populations below 1e-12 are floored to zero to avoid sign noise from
    integrator round-off.
    """
    if n < 1:
        raise ValueError(f"Klyshko order must be >= 1, got {n}")
    p = np.asarray(populations, dtype=float)
    if n + 1 >= len(p):
        raise IndexError(f"B_{n} needs populations up to rho_{n + 1}, have {len(p)}")
    p = np.where(p < POPULATION_FLOOR, 0.0, p)
    return float((n + 1) * p[n - 1] * p[n + 1] - n * p[n] ** 2)


def klyshko_vector(populations: np.ndarray, n_max: int) -> np.ndarray:
    return np.array([klyshko(populations, n) for n in range(1, n_max + 1)])


def wln(field: WignerField) -> float:
    """Wigner logarithmic negativity log ∬ |W| dx dp, trapezoid quadrature.

    Zero iff W >= 0 everywhere; small negative round-off values are clamped
    to zero.
    """
    w = field.values
    peak = np.max(np.abs(w))
    edge = max(
        np.max(np.abs(w[0, :])), np.max(np.abs(w[-1, :])),
        np.max(np.abs(w[:, 0])), np.max(np.abs(w[:, -1])),
    )
    if edge > 1e-6 * peak:
        raise GridError(f"Wigner support reaches the grid boundary (edge/max = {edge / peak:.2e})")
    total = field.integral()
    if abs(total - 1.0) > 1e-3:
        raise GridError(f"Wigner field integrates to {total}, expected 1 ± 1e-3")
    abs_integral = float(
        np.trapezoid(np.trapezoid(np.abs(w), field.grid.p, axis=1), field.grid.x)
    )
    return max(float(np.log(abs_integral)), 0.0)


@dataclass(frozen=True)
class PoissonPredictors:
    n_cav: float
    t_star: float
    rho2_star: float


def poisson_predictors(beta: float, kerr: float, gamma: float = 1.0) -> PoissonPredictors:
    """Closed-form predictors of the Poissonian output regime.

    n_cav is the mean cavity occupation of the above-threshold oscillator,
    T* = 2/(gamma n_cav) the boxcar width placing one photon pair in the
    filter on average, and rho2_star = 2 e^{-2} the largest two-photon
    population attainable by any Poisson distribution.
    """
    if kerr <= 0:
        raise BelowThreshold("Poissonian predictors need a nonzero Kerr coefficient")
    ratio2 = (beta / kerr) ** 2 - 0.25 * (gamma / kerr) ** 2
    if ratio2 <= 0:
        raise BelowThreshold(
            f"drive beta={beta} at or below threshold gamma/2={gamma / 2} "
            "has no above-threshold occupation"
        )
    n_cav = 0.5 * np.sqrt(ratio2)
    return PoissonPredictors(
        n_cav=float(n_cav),
        t_star=float(2.0 / (gamma * n_cav)),
        rho2_star=float(2.0 * np.exp(-2.0)),
    )


def poisson_pmf(lam: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max)
    return np.exp(-lam + n * np.log(max(lam, 1e-300)) - gammaln(n + 1))


def poisson_fit(populations: np.ndarray) -> tuple[float, float]:
    """Least-squares Poisson fit; returns (lambda, rms residual)."""
    p = np.asarray(populations, dtype=float)
    n_mean = float(np.arange(len(p)) @ p)
    x0 = max(n_mean, 1e-6)

    def resid(lam):
        return poisson_pmf(lam[0], len(p)) - p

    sol = least_squares(resid, x0=[x0], bounds=([0.0], [np.inf]))
    lam = float(sol.x[0])
    rms = float(np.sqrt(np.mean(resid([lam]) ** 2)))
    return lam, rms


def metrics_of(
    rho: np.ndarray,
    n_max_klyshko: int = 6,
    wigner_points: int = 201,
) -> MetricsRecord:
    """Full MetricsRecord of a zero-mean state."""
    pops = fock.photon_distribution(rho)
    field = fock.wigner(rho, fock.default_grid(rho, wigner_points))
    return MetricsRecord(
        s=squeezing_s(rho),
        b_n=klyshko_vector(pops, n_max_klyshko),
        wln=wln(field),
        purity=fock.purity(rho),
        populations=pops / pops.sum(),
        n_mean=fock.mean_photons(rho),
    )
