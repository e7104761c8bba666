"""Truncated Fock-space operator algebra, reference states and Wigner functions.

Conventions used throughout the package:

* quadratures x = (b + b†)/sqrt(2), p = i(b† - b)/sqrt(2), vacuum variance 1/2
* Wigner functions normalized to unit integral, W(0,0) = 1/pi for vacuum
* density matrices are dense complex ndarrays indexed by Fock number,
  rho[m, n] = <m|rho|n>
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import DimensionMismatch, TruncationError

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9
TAIL_TOL = 1e-8


def check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 2:
        raise ValueError(f"Fock truncation must be an integer >= 2, got {dim}")
    return int(dim)


def annihilation(dim: int) -> np.ndarray:
    """Ladder operator c with <n-1|c|n> = sqrt(n) on the truncated space."""
    dim = check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def creation(dim: int) -> np.ndarray:
    return annihilation(dim).conj().T


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(check_dim(dim))).astype(complex)


def kpo_hamiltonian(beta: complex, kerr: float, dim: int) -> np.ndarray:
    """Two-photon drive plus Kerr term, (beta c†² + beta* c²)/2 + K c†²c²."""
    c = annihilation(dim)
    c2 = c @ c
    cd2 = c2.conj().T
    h = 0.5 * (beta * cd2 + np.conj(beta) * c2) + kerr * cd2 @ c2
    return 0.5 * (h + h.conj().T)


def quadrature(theta: float, dim: int) -> np.ndarray:
    """Generalized quadrature (b e^{-i theta} + b† e^{i theta}) / sqrt(2)."""
    c = annihilation(dim)
    return (c * np.exp(-1j * theta) + c.conj().T * np.exp(1j * theta)) / np.sqrt(2)


def validate_density_matrix(rho: np.ndarray, name: str = "rho") -> None:
    """Check Hermiticity, unit trace and positivity at package tolerances."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITICITY_TOL:
        raise ValueError(f"{name} not Hermitian: deviation {herm:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{name} trace {tr} differs from 1")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w[0] < -POSITIVITY_TOL:
        raise ValueError(f"{name} has negative eigenvalue {w[0]:.3e}")


def fock_state(n: int, dim: int) -> np.ndarray:
    dim = check_dim(dim)
    if not 0 <= n < dim:
        raise ValueError(f"Fock index {n} outside truncation {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return rho


def coherent_state(alpha: complex, dim: int) -> np.ndarray:
    dim = check_dim(dim)
    n = np.arange(dim)
    log_amp = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * gammaln(n + 1)
    psi = np.exp(log_amp) * np.exp(1j * n * np.angle(alpha))
    if alpha == 0:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
    tail = 1.0 - np.sum(np.abs(psi) ** 2)
    if tail >= TAIL_TOL:
        raise TruncationError(f"coherent-state tail {tail:.3e} at dim {dim}")
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def squeezed_vacuum_state(r: float, theta: float, dim: int) -> np.ndarray:
    """Squeezed vacuum S(xi)|0>, xi = r e^{i theta}; only even levels populated."""
    dim = check_dim(dim)
    psi = np.zeros(dim, dtype=complex)
    for m in range(0, dim, 2):
        k = m // 2
        log_mag = (
            -0.5 * np.log(np.cosh(r))
            + k * np.log(np.tanh(abs(r)) + 1e-300)
            + 0.5 * gammaln(m + 1)
            - k * np.log(2.0)
            - gammaln(k + 1)
        )
        phase = (-np.exp(1j * theta)) ** k if r >= 0 else (np.exp(1j * theta)) ** k
        psi[m] = np.exp(log_mag) * phase
    if r == 0:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
    tail = 1.0 - np.sum(np.abs(psi) ** 2)
    if tail >= TAIL_TOL:
        raise TruncationError(f"squeezed-vacuum tail {tail:.3e} at dim {dim}")
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def thermal_state(n_bar: float, dim: int) -> np.ndarray:
    dim = check_dim(dim)
    if n_bar < 0:
        raise ValueError("thermal occupation must be >= 0")
    if n_bar == 0:
        return fock_state(0, dim)
    q = n_bar / (n_bar + 1.0)
    p = (1.0 / (n_bar + 1.0)) * q ** np.arange(dim)
    tail = 1.0 - p.sum()
    if tail >= TAIL_TOL:
        raise TruncationError(f"thermal tail {tail:.3e} at dim {dim}")
    return np.diag(p / p.sum()).astype(complex)


def reference_state(kind: str, dim: int, **params) -> np.ndarray:
    """Named reference states: fock(n), coherent(alpha), squeezed_vacuum(r, theta),
    thermal(n_bar)."""
    if kind == "fock":
        return fock_state(params["n"], dim)
    if kind == "coherent":
        return coherent_state(params["alpha"], dim)
    if kind == "squeezed_vacuum":
        return squeezed_vacuum_state(params["r"], params.get("theta", 0.0), dim)
    if kind == "thermal":
        return thermal_state(params["n_bar"], dim)
    raise ValueError(f"unknown reference state kind {kind!r}")


def expectation(rho: np.ndarray, op: np.ndarray) -> complex:
    if rho.shape != op.shape:
        raise DimensionMismatch(f"shape mismatch {rho.shape} vs {op.shape}")
    return complex(np.trace(rho @ op))


def photon_distribution(rho: np.ndarray) -> np.ndarray:
    """Diagonal populations, clamped into [0, 1]."""
    return np.clip(np.real(np.diag(rho)), 0.0, 1.0)


def mean_photons(rho: np.ndarray) -> float:
    return float(np.real(np.diag(rho)) @ np.arange(rho.shape[0]))


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.einsum("mn,nm->", rho, rho)))


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform rectangular grid in the (x, p) plane."""

    x_min: float
    x_max: float
    p_min: float
    p_max: float
    n_x: int = 201
    n_p: int = 201

    def __post_init__(self):
        if self.x_max <= self.x_min or self.p_max <= self.p_min:
            raise ValueError("grid axes must be strictly increasing")
        if self.n_x < 16 or self.n_p < 16:
            raise ValueError("grids need at least 16 points per axis")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    def mesh(self):
        return np.meshgrid(self.x, self.p, indexing="ij")

    @staticmethod
    def square(half_width: float, n: int = 201) -> "QuadratureGrid":
        return QuadratureGrid(-half_width, half_width, -half_width, half_width, n, n)


def default_grid(rho: np.ndarray, n: int = 201) -> QuadratureGrid:
    """Square grid wide enough that the boundary weight is negligible.

    Half-width 4 + 3 sqrt(1 + 2 n_mean) covers the anti-squeezed axis of any
    Gaussian state with the same mean photon number (largest quadrature
    variance at most 1 + 2 n_mean) out past five standard deviations.
    """
    return QuadratureGrid.square(4.0 + 3.0 * np.sqrt(1.0 + 2.0 * mean_photons(rho)), n)


@dataclass(frozen=True)
class WignerField:
    grid: QuadratureGrid
    values: np.ndarray

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.grid.p, axis=1), self.grid.x))


def wigner(rho: np.ndarray, grid: QuadratureGrid | None = None) -> WignerField:
    """Wigner function from the Fock-basis Laguerre kernel.

    W(x,p) = sum_{m<=n} weight * rho_{mn} (-1)^m sqrt(m!/n!) (2a)^{n-m}
             e^{-2|a|^2} L_m^{n-m}(4|a|^2) / pi,  a = (x + ip)/sqrt(2).
    """
    if grid is None:
        grid = default_grid(rho)
    dim = rho.shape[0]
    xx, pp = grid.mesh()
    alpha = (xx + 1j * pp) / np.sqrt(2)
    r2 = 4.0 * np.abs(alpha) ** 2
    gauss = np.exp(-0.5 * r2)
    w = np.zeros_like(r2)
    for m in range(dim):
        for n in range(m, dim):
            if rho[m, n] == 0:
                continue
            d = n - m
            coef = (-1.0) ** m * np.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
            kern = coef * eval_genlaguerre(m, d, r2) * gauss
            if d > 0:
                kern = kern * (2.0 * alpha) ** d
                w += 2.0 * np.real(rho[m, n] * kern)
            else:
                w += np.real(rho[m, n]) * np.real(kern)
    w /= np.pi
    field = WignerField(grid, w)
    edge = max(
        np.max(np.abs(w[0, :])), np.max(np.abs(w[-1, :])),
        np.max(np.abs(w[:, 0])), np.max(np.abs(w[:, -1])),
    )
    if edge > 1e-6 * np.max(np.abs(w)):
        raise TruncationError(
            f"Wigner support reaches the grid boundary (edge/max = {edge / np.max(np.abs(w)):.2e})"
        )
    return field
