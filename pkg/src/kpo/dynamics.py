"""Lindblad dynamics: time evolution, steady states and regression correlators.

The master equation used throughout is

    d rho/dt = -i [H(t), rho] + sum_channels D[L(t)] rho,
    D[L] rho = L rho L† - (L†L rho + rho L†L) / 2,

where each collapse channel may be a time-dependent linear combination of
fixed operators, L(t) = sum_j f_j(t) A_j.  The right-hand side is evaluated
in operator form (a handful of dense matrix products per call) rather than
through a precomputed superoperator, which keeps the memory footprint linear
in the Hilbert-space dimension squared.  The full sparse Liouvillian is only
assembled for the time-independent steady-state solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from . import fock
from .errors import DegenerateSteadyState, DimensionMismatch, StiffnessError, TruncationError

Coefficient = Callable[[float], complex]

STEADY_STATE_RESIDUAL_TOL = 1e-10
TAIL_POPULATION_TOL = 1e-8
# Above this Hilbert-space dimension the sparse-superoperator form of the
# right-hand side is replaced by operator products.  Cascaded models carry
# ~12 nonzeros per superoperator row across their terms (~1.1 GB stored at
# the limit, with construction temporaries peaking at 2-3x that), so the
# limit is set by the memory budget, not by speed: the superoperator matvec
# stays faster well beyond it.
SUPEROPERATOR_DIM_LIMIT = 2000


@dataclass(frozen=True)
class SystemParams:
    """Parameters of the driven Kerr oscillator, in units of the decay rate.

    beta is the two-photon drive amplitude, kerr the Kerr coefficient and
    gamma the single-photon decay rate (1.0 in the natural units used by the
    rest of the package).
    """

    beta: float
    kerr: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"decay rate must be positive, got {self.gamma}")
        if self.kerr < 0:
            raise ValueError(f"Kerr coefficient must be >= 0, got {self.kerr}")

    @property
    def threshold(self) -> float:
        """Linear instability threshold gamma/2 of the Kerr-free oscillator."""
        return self.gamma / 2.0

    def hamiltonian(self, dim: int) -> np.ndarray:
        return fock.kpo_hamiltonian(self.beta, self.kerr, dim)

    def collapse_operator(self, dim: int) -> np.ndarray:
        return np.sqrt(self.gamma) * fock.annihilation(dim)


@dataclass(frozen=True)
class CollapseChannel:
    """One Lindblad channel L(t) = sum_j f_j(t) A_j.

    Each term is a pair (coefficient, operator); a None coefficient means the
    constant 1.  A single-term channel with a None coefficient is the usual
    time-independent collapse operator.  Coefficient functions must return
    real values (any fixed phase belongs in the operator); the dissipator
    assembly relies on this to merge conjugate cross terms.
    """

    terms: tuple

    @staticmethod
    def constant(op: np.ndarray) -> "CollapseChannel":
        return CollapseChannel(terms=((None, op),))

    @staticmethod
    def combination(*terms: tuple[Coefficient | None, np.ndarray]) -> "CollapseChannel":
        return CollapseChannel(terms=tuple(terms))

    def value(self, t: float) -> np.ndarray:
        out = None
        for coeff, op in self.terms:
            piece = op if coeff is None else coeff(t) * op
            out = piece if out is None else out + piece
        return out


class LindbladModel:
    """Hamiltonian plus collapse channels on one truncated Hilbert space.

    hamiltonian_terms is a sequence of (coefficient, operator) pairs with the
    same None-means-constant convention as CollapseChannel; the total
    Hamiltonian is their sum.
    """

    def __init__(
        self,
        hamiltonian_terms: Sequence[tuple[Coefficient | None, np.ndarray]],
        channels: Sequence[CollapseChannel],
    ):
        if not hamiltonian_terms and not channels:
            raise ValueError("model needs at least one Hamiltonian term or channel")
        dims = {op.shape[0] for _, op in hamiltonian_terms}
        for ch in channels:
            dims |= {op.shape[0] for _, op in ch.terms}
        if len(dims) != 1:
            raise DimensionMismatch(f"operators live on different spaces: dims {sorted(dims)}")
        (self.dim,) = dims
        self.hamiltonian_terms = list(hamiltonian_terms)
        self.channels = list(channels)
        # Split into precomputed static pieces and per-call dynamic ones.
        self._h_const = None
        self._h_dyn = []
        for coeff, op in hamiltonian_terms:
            if coeff is None:
                self._h_const = op if self._h_const is None else self._h_const + op
            else:
                self._h_dyn.append((coeff, op))
        self._static_channels = []
        self._dyn_channels = []
        for ch in channels:
            if all(c is None for c, _ in ch.terms):
                a = ch.value(0.0)
                self._static_channels.append((a, a.conj().T, a.conj().T @ a))
            else:
                self._dyn_channels.append(ch)
        self.time_dependent = bool(self._h_dyn) or bool(self._dyn_channels)
        self._super_terms = None

    @staticmethod
    def from_params(params: SystemParams, dim: int) -> "LindbladModel":
        return LindbladModel(
            hamiltonian_terms=[(None, params.hamiltonian(dim))],
            channels=[CollapseChannel.constant(params.collapse_operator(dim))],
        )

    def hamiltonian(self, t: float = 0.0) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for coeff, op in self.hamiltonian_terms:
            dense = op.toarray() if sp.issparse(op) else op
            h = h + dense if coeff is None else h + coeff(t) * dense
        return h

    def rhs(self, t: float, rho: np.ndarray) -> np.ndarray:
        """d rho / dt at time t, valid for any (not necessarily Hermitian) rho.

        Operators may be scipy sparse matrices; every product below is then a
        sparse-times-dense multiplication, keeping the cost linear in the
        Hilbert-space dimension squared.
        """
        h = self._h_const
        for coeff, op in self._h_dyn:
            w = coeff(t)
            piece = w * op
            h = piece if h is None else h + piece
        out = np.zeros_like(rho)
        if h is not None:
            out += (-1j) * (h @ rho) + 1j * (rho @ h)
        for ch in self._dyn_channels:
            a = ch.value(t)
            ad = a.conj().T
            ada = ad @ a
            out += a @ (rho @ ad) - 0.5 * (ada @ rho + rho @ ada)
        for a, ad, ada in self._static_channels:
            out += a @ (rho @ ad) - 0.5 * (ada @ rho + rho @ ada)
        return out

    def superoperator_terms(self) -> list[tuple[Coefficient | None, sp.csr_matrix]]:
        """The Liouvillian as a sum of sparse superoperators with scalar
        time-dependent weights, acting on row-major flattened matrices.

        Cached; costs O(dim²) memory per term, so only viable up to a few
        thousand Hilbert-space dimensions.
        """
        if self._super_terms is not None:
            return self._super_terms
        eye = sp.identity(self.dim, format="csr")
        # Terms sharing the same weight function are summed; the mixed
        # channel pairs (1, g) and (g, 1) share one weight because
        # coefficients are real-valued (see CollapseChannel).
        # Each group keeps a running sum rather than a list of addends so the
        # construction peak stays close to the final footprint (individual
        # kron products are multi-hundred-MB objects at the dimensions where
        # this path is still selected).
        groups: dict[tuple, sp.csr_matrix] = {}
        weights: dict[tuple, Coefficient | None] = {}

        def add(key, weight, matrix):
            cur = groups.get(key)
            groups[key] = matrix if cur is None else (cur + matrix).tocsr()
            weights[key] = weight

        for coeff, op in self.hamiltonian_terms:
            h = sp.csr_matrix(op)
            m = (-1j * (sp.kron(h, eye) - sp.kron(eye, h.T))).tocsr()
            add(("lin", id(coeff)) if coeff is not None else None, coeff, m)
        for ch in self.channels:
            for cj, aj in ch.terms:
                for ck, ak in ch.terms:
                    a = sp.csr_matrix(aj)
                    bd = sp.csr_matrix(ak).conj().T
                    bda = (bd @ a).tocsr()
                    if cj is None and ck is None:
                        key, weight = None, None
                    elif cj is None or ck is None:
                        f = ck if cj is None else cj
                        key, weight = ("lin", id(f)), f
                    else:
                        fj, fk = cj, ck
                        key = ("quad", id(fj), id(fk))
                        weight = lambda t, fj=fj, fk=fk: fj(t) * fk(t)
                    add(key, weight, sp.kron(a, bd.T).tocsr())
                    add(key, weight, (-0.5) * sp.kron(bda, eye).tocsr())
                    add(key, weight, (-0.5) * sp.kron(eye, bda.T).tocsr())
        merged = [(weights[key], total) for key, total in groups.items()]
        # Constant term first for cache-friendly evaluation order.
        merged.sort(key=lambda wm: wm[0] is not None)
        self._super_terms = merged
        return merged

    def liouvillian(self) -> sp.csc_matrix:
        """Sparse Liouvillian of a time-independent model."""
        if self.time_dependent:
            raise ValueError("sparse Liouvillian requires a time-independent model")
        ((_, lv),) = self.superoperator_terms()
        return lv.tocsc()


def lindblad_rhs(model: LindbladModel) -> Callable[[float, np.ndarray], np.ndarray]:
    """Flattened right-hand side suitable for scipy.integrate.solve_ivp.

    Uses the precomputed sparse-superoperator form (a few sparse matvecs per
    call) when it fits in memory, falling back to operator products on the
    square density matrix for large Hilbert spaces.
    """
    dim = model.dim
    if dim <= SUPEROPERATOR_DIM_LIMIT:
        terms = model.superoperator_terms()

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            out = None
            for w, m in terms:
                piece = m @ y if w is None else w(t) * (m @ y)
                out = piece if out is None else out + piece
            return out

        return rhs

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return model.rhs(t, y.reshape(dim, dim)).ravel()

    return rhs


def evolve(
    model: LindbladModel,
    rho0: np.ndarray,
    times: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    hermitize: bool = True,
) -> np.ndarray:
    """Integrate the master equation, returning one snapshot per entry of times.

    Snapshots are Hermitized (rho -> (rho + rho†)/2) to suppress the
    anti-Hermitian part accumulated by the real-valued step control.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1:
        raise ValueError("times must be a non-empty 1-d array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if rho0.shape != (model.dim, model.dim):
        raise DimensionMismatch(f"initial state shape {rho0.shape}, model dim {model.dim}")
    sol = solve_ivp(
        lindblad_rhs(model),
        (times[0], times[-1]),
        rho0.astype(complex).ravel(),
        t_eval=times,
        method="RK45",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise StiffnessError(f"master-equation integration failed: {sol.message}")
    # Column-wise assembly keeps the transient footprint at one extra
    # dim x dim matrix instead of several full snapshot stacks, which
    # matters on the dense fallback path where each snapshot is large.
    snaps = np.empty((len(times), model.dim, model.dim), dtype=complex)
    for k in range(len(times)):
        m = sol.y[:, k].reshape(model.dim, model.dim)
        if hermitize:
            np.conjugate(m.T, out=snaps[k])
            snaps[k] += m
            snaps[k] *= 0.5
        else:
            snaps[k] = m
    return snaps


def steady_state(model: LindbladModel, check_unique: bool = True) -> np.ndarray:
    """Null vector of the Liouvillian by shifted inverse iteration.

    The factorization of (L - sigma I) with a tiny shift sigma is reused for
    all iterations and, when check_unique is set, for a second run from an
    independent start whose disagreement signals a degenerate null space.
    """
    lv = model.liouvillian()
    n = model.dim
    shift = 1e-10
    lu = splu((lv - shift * sp.identity(n * n, format="csc")).tocsc())

    def iterate(v0: np.ndarray) -> np.ndarray:
        v = v0 / np.linalg.norm(v0)
        for _ in range(50):
            v = lu.solve(v)
            v /= np.linalg.norm(v)
            residual = np.max(np.abs(lv @ v))
            if residual <= STEADY_STATE_RESIDUAL_TOL:
                break
        rho = v.reshape(n, n)
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr) < 1e-12:
            raise DegenerateSteadyState("inverse iteration converged to a traceless operator")
        rho = rho / tr
        residual = np.max(np.abs((lv @ rho.ravel())))
        if residual > STEADY_STATE_RESIDUAL_TOL:
            raise StiffnessError(f"steady-state residual {residual:.3e} above tolerance")
        return rho

    rho = iterate(np.identity(n, dtype=complex).ravel() / n)
    if check_unique:
        rng = np.random.default_rng(0)
        v0 = rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n)
        # Project out trace-free drift by starting from a positive operator,
        # and symmetrize it under photon-number parity: the generator has a
        # weak parity symmetry, and near-degenerate parity-odd coherences
        # (exponentially slow at strong drive) would otherwise masquerade as
        # a second fixed point at the inverse-iteration shift.
        m = v0.reshape(n, n)
        pos = m @ m.conj().T
        parity = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        pos = 0.5 * (pos + parity[:, None] * pos * parity[None, :])
        other = iterate(pos.ravel())
        if np.max(np.abs(other - rho)) > 1e-7:
            raise DegenerateSteadyState(
                "two inverse-iteration starts reached different fixed points"
            )
    return rho


def kpo_steady_state(params: SystemParams, dim: int) -> np.ndarray:
    return steady_state(LindbladModel.from_params(params, dim))


def choose_cavity_dim(
    params: SystemParams,
    start: int = 30,
    max_dim: int = 240,
    tail_tol: float = TAIL_POPULATION_TOL,
) -> int:
    """Smallest tried truncation whose steady state has negligible tail.

    Doubles the dimension until the two highest Fock populations are each
    below tail_tol.
    """
    dim = start
    while dim <= max_dim:
        pops = fock.photon_distribution(kpo_steady_state(params, dim))
        if max(pops[-1], pops[-2]) < tail_tol:
            return dim
        dim *= 2
    raise TruncationError(
        f"steady state tail above {tail_tol:.1e} even at dim {max_dim} "
        f"(beta={params.beta}, kerr={params.kerr})"
    )


def two_time_correlator(
    model: LindbladModel,
    rho_ss: np.ndarray,
    left_op: np.ndarray,
    right_op: np.ndarray,
    taus: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> np.ndarray:
    """Steady-state correlator <left(t + tau) right(t)> via quantum regression.

    Propagates X(tau) from X(0) = right_op rho_ss under the same generator
    (no Hermitization -- X is not a state) and traces against left_op.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) < 1:
        raise ValueError("taus must be a non-empty 1-d array")
    x0 = right_op @ rho_ss
    out = np.empty(len(taus), dtype=complex)
    start = 0
    if taus[0] == 0.0:
        out[0] = np.trace(left_op @ x0)
        start = 1
    if start < len(taus):
        snaps = evolve_operator(model, x0, np.concatenate(([0.0], taus[start:])), rtol, atol)
        for i, x in enumerate(snaps[1:], start=start):
            out[i] = np.trace(left_op @ x)
    return out


def evolve_operator(
    model: LindbladModel,
    x0: np.ndarray,
    times: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> np.ndarray:
    """Propagate an arbitrary operator under the Lindblad generator."""
    return evolve(model, x0, times, rtol=rtol, atol=atol, hermitize=False)
