"""Closed-form linear parametric oscillator (K = 0).

Everything here is analytic: steady cavity covariance, boxcar-filtered output
covariance, Gaussian Wigner functions and the covariance -> Fock density
matrix reconstruction via 2D Hermite polynomials. This module serves as the
exact oracle against which the numerical machinery is validated.

Quadrature drift of the below-threshold PO (real drive beta):
    A = [[-g/2, -beta], [-beta, -g/2]]
with eigenmodes u = (x+p)/sqrt(2) (decay g/2 + beta, squeezed) and
v = (x-p)/sqrt(2) (decay g/2 - beta, anti-squeezed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import SingularCovariance, ThresholdError, TruncationError

HEISENBERG_TOL = 1e-9


@dataclass(frozen=True)
class CovarianceMatrix:
    """2x2 real quadrature covariance, vacuum = diag(1/2, 1/2)."""

    v11: float
    v22: float
    v12: float = 0.0

    def __post_init__(self):
        if self.v11 <= 0 or self.v22 <= 0:
            raise ValueError("variances must be positive")
        if self.det < 0.25 - HEISENBERG_TOL:
            raise ValueError(f"covariance violates det V >= 1/4: det = {self.det}")

    @property
    def det(self) -> float:
        return self.v11 * self.v22 - self.v12**2

    @property
    def trace(self) -> float:
        return self.v11 + self.v22

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.v11, self.v12], [self.v12, self.v22]])

    def eigenvalues(self) -> tuple[float, float]:
        lo, hi = np.linalg.eigvalsh(self.as_matrix())
        return float(lo), float(hi)

    @property
    def n_mean(self) -> float:
        return 0.5 * (self.v11 + self.v22) - 0.5


@dataclass(frozen=True)
class HermiteRMatrix:
    """The 2x2 matrix entering the multidimensional Hermite polynomials."""

    r11: complex
    r22: complex
    r12: complex


def _check_below_threshold(beta: float, gamma: float) -> None:
    if abs(beta) >= gamma / 2:
        raise ThresholdError(
            f"PO is unstable for |beta| >= gamma/2 (beta={beta}, gamma={gamma})"
        )


def po_cavity_moments(beta: float, gamma: float = 1.0) -> tuple[float, complex]:
    """Steady-state (<c†c>, <c²>) of the below-threshold PO."""
    _check_below_threshold(beta, gamma)
    n_bar = 2.0 * beta**2 / (gamma**2 - 4.0 * beta**2)
    m = -1j * beta * gamma / (gamma**2 - 4.0 * beta**2)
    return n_bar, m


def covariance_from_moments(n_bar: float, m: complex) -> CovarianceMatrix:
    """Quadrature covariance of a zero-mean state from (<b†b>, <b²>)."""
    return CovarianceMatrix(
        v11=n_bar + 0.5 + np.real(m),
        v22=n_bar + 0.5 - np.real(m),
        v12=float(np.imag(m)),
    )


def po_cavity_covariance(beta: float, gamma: float = 1.0) -> CovarianceMatrix:
    """Steady intracavity covariance; squeezing lies along u = (x+p)/sqrt(2)."""
    n_bar, m = po_cavity_moments(beta, gamma)
    return covariance_from_moments(n_bar, m)


def po_output_moments_boxcar(
    beta: float, T: float, gamma: float = 1.0
) -> tuple[float, complex]:
    """(<A†A>, <A²>) of the boxcar-filtered output mode of width T.

    Obtained from the regression correlators of the two decoupled
    Ornstein-Uhlenbeck quadrature modes, integrated in closed form. Output
    cc-correlators are time ordered with the later operator on the left.
    """
    _check_below_threshold(beta, gamma)
    if T <= 0:
        raise ValueError("filter width must be positive")
    n_bar, m = po_cavity_moments(beta, gamma)
    mu = -np.imag(m)  # m = -i mu, mu > 0 for beta > 0
    lam_p = gamma / 2 + beta
    lam_m = gamma / 2 - beta

    def J(lam):
        # int_0^T (T - tau) e^{-lam tau} dtau
        if lam * T < 1e-8:
            return T**2 / 2 - lam * T**3 / 6
        return T / lam - (1.0 - np.exp(-lam * T)) / lam**2

    jp, jm = J(lam_p), J(lam_m)
    n_f = (gamma / T) * ((n_bar - mu) * jp + (n_bar + mu) * jm)
    m_f = 1j * (gamma / T) * ((n_bar - mu) * jp - (n_bar + mu) * jm)
    return float(n_f), complex(m_f)


def po_output_covariance_boxcar(
    beta: float, T: float, gamma: float = 1.0
) -> CovarianceMatrix:
    """Covariance of the boxcar-filtered output mode; T -> 0 gives vacuum."""
    n_f, m_f = po_output_moments_boxcar(beta, T, gamma)
    return covariance_from_moments(n_f, m_f)


def gaussian_wigner_values(V: CovarianceMatrix, xx, pp) -> np.ndarray:
    """Normalized Gaussian Wigner function on mesh arrays (xx, pp).

    W = (2 pi sqrt(det V))^-1 exp(-r^T V^-1 r / 2); the 1/2 in the exponent
    is required by the unit-integral and vacuum-value checks.
    """
    d = V.det
    if d < 1e-12:
        raise SingularCovariance(f"det V = {d:.3e}")
    inv = np.linalg.inv(V.as_matrix())
    quad = inv[0, 0] * xx**2 + 2 * inv[0, 1] * xx * pp + inv[1, 1] * pp**2
    return np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(d))


def gaussian_wigner(V: CovarianceMatrix, grid):
    """WignerField of a zero-mean Gaussian state on a QuadratureGrid."""
    from .fock import WignerField

    xx, pp = grid.mesh()
    return WignerField(grid, gaussian_wigner_values(V, xx, pp))


def hermite_r_matrix(V: CovarianceMatrix) -> HermiteRMatrix:
    d, t = V.det, V.trace
    den = 2 * d + t + 0.5
    # r11/r22 orientation fixed empirically against the Fock-built squeezed
    # vacuum: the opposite assignment reconstructs the conjugate state.
    return HermiteRMatrix(
        r11=(V.v11 - V.v22 + 2j * V.v12) / den,
        r22=(V.v11 - V.v22 - 2j * V.v12) / den,
        r12=(0.5 - 2 * d) / den,
    )


def hermite_2d(R: HermiteRMatrix, m: int, n: int) -> complex:
    """Two-index Hermite polynomial H_mn^{R}(0, 0).

    Evaluated in the branch-free form (all powers integral)
      H_mn = m! n! 2^{-(m+n)/2} sum_k (-2 r12)^k r11^a r22^b / (a! b! k!)
    with a = (m-k)/2, b = (n-k)/2; zero unless m and n share parity.
    """
    if m < 0 or n < 0:
        raise ValueError("indices must be non-negative")
    if (m - n) % 2 != 0:
        return 0.0 + 0.0j
    ks = np.arange(m % 2, min(m, n) + 1, 2)
    if len(ks) == 0:
        return 0.0 + 0.0j
    a = (m - ks) // 2
    b = (n - ks) // 2
    log_mag = (
        gammaln(m + 1)
        + gammaln(n + 1)
        - 0.5 * (m + n) * np.log(2.0)
        - gammaln(a + 1)
        - gammaln(b + 1)
        - gammaln(ks + 1)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        phase = (
            _unit_power(-2.0 * R.r12, ks)
            * _unit_power(R.r11, a)
            * _unit_power(R.r22, b)
        )
        log_mag = (
            log_mag
            + _klog(ks, _log_abs(-2.0 * R.r12))
            + _klog(a, _log_abs(R.r11))
            + _klog(b, _log_abs(R.r22))
        )
    terms = np.where(np.isneginf(log_mag), 0.0, np.exp(log_mag) * phase)
    return complex(np.sum(terms))


def _klog(k, log_val):
    """k * log_val treating 0 * (-inf) as 0."""
    k = np.asarray(k)
    with np.errstate(invalid="ignore"):
        return np.where(k == 0, 0.0, k * log_val)


def _log_abs(z) -> float:
    az = abs(z)
    return -np.inf if az == 0 else float(np.log(az))


def _unit_power(z, k):
    """Phase factor z^k / |z|^k, with 0^0 = 1."""
    az = abs(z)
    if az == 0:
        return np.where(np.asarray(k) == 0, 1.0 + 0j, 0.0 + 0j)
    return (z / az) ** np.asarray(k)


def covariance_to_fock(V: CovarianceMatrix, dim: int) -> np.ndarray:
    """Fock density matrix of a zero-mean Gaussian state with covariance V.

    rho_mn = (d + t/2 + 1/4)^{-1/2} H_mn^{R}(0,0) / sqrt(m! n!), evaluated in
    log-scaled arithmetic so it stays stable for dim of several hundred.
    """
    d, t = V.det, V.trace
    R = hermite_r_matrix(V)
    pref = 1.0 / np.sqrt(d + t / 2 + 0.25)
    rho = np.zeros((dim, dim), dtype=complex)
    log_r11, log_r22 = _log_abs(R.r11), _log_abs(R.r22)
    log_r12 = _log_abs(-2.0 * R.r12)
    for m in range(dim):
        for n in range(m, dim):
            if (n - m) % 2 != 0:
                continue
            ks = np.arange(m % 2, m + 1, 2)
            a = (m - ks) // 2
            b = (n - ks) // 2
            log_mag = (
                0.5 * (gammaln(m + 1) + gammaln(n + 1))
                - 0.5 * (m + n) * np.log(2.0)
                + _klog(ks, log_r12)
                + _klog(a, log_r11)
                + _klog(b, log_r22)
                - gammaln(a + 1)
                - gammaln(b + 1)
                - gammaln(ks + 1)
            )
            phase = (
                _unit_power(-2.0 * R.r12, ks)
                * _unit_power(R.r11, a)
                * _unit_power(R.r22, b)
            )
            val = pref * np.sum(np.where(np.isneginf(log_mag), 0.0, np.exp(log_mag) * phase))
            rho[m, n] = val
            rho[n, m] = np.conj(val)
    tr = np.trace(rho).real
    if 1.0 - tr > 1e-6:
        raise TruncationError(f"reconstructed trace {tr:.8f} at dim {dim}")
    return rho / tr


def covariance_to_fock_populations(V: CovarianceMatrix, dim: int) -> np.ndarray:
    """Diagonal of the Fock reconstruction without building the full matrix."""
    d, t = V.det, V.trace
    R = hermite_r_matrix(V)
    pref = 1.0 / np.sqrt(d + t / 2 + 0.25)
    log_r11, log_r22 = _log_abs(R.r11), _log_abs(R.r22)
    log_r12 = _log_abs(-2.0 * R.r12)
    pops = np.zeros(dim)
    for m in range(dim):
        ks = np.arange(m % 2, m + 1, 2)
        a = (m - ks) // 2
        log_mag = (
            gammaln(m + 1)
            - m * np.log(2.0)
            + _klog(ks, log_r12)
            + _klog(a, log_r11 + log_r22)
            - 2 * gammaln(a + 1)
            - gammaln(ks + 1)
        )
        phase = _unit_power(-2.0 * R.r12, ks) * _unit_power(R.r11 * R.r22, a)
        pops[m] = pref * np.real(
            np.sum(np.where(np.isneginf(log_mag), 0.0, np.exp(log_mag) * phase))
        )
    return pops


def squeezing_of(V: CovarianceMatrix) -> float:
    """Minimum quadrature variance (smallest covariance eigenvalue)."""
    return V.eigenvalues()[0]


def filtered_coherent_moments(c_ss: complex, filt, gamma: float = 1.0):
    """Mean and photon number of the filtered output of a coherent cavity state.

    <A_f> = sqrt(gamma) <c> int f dt and <A†A> = gamma |<c>|^2 (int f dt)^2;
    a filter only rescales coherent-state moments by its time integral.
    """
    integral = float(np.trapezoid(filt.samples, filt.times))
    mean = np.sqrt(gamma) * c_ss * integral
    return complex(mean), float(gamma * abs(c_ss) ** 2 * integral**2)
