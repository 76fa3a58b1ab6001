"""Dense-matrix estimation geometry and the Fock-space oracle.

Everything here works on explicit matrices: spectral decompositions, the
Bures metric, symmetric logarithmic derivatives (SLD), quantum Fisher
information (QFI), pure-state formulas and the quantum Chernoff distance.
``ed_oracle`` builds the full 2^L Fock-space Hamiltonian of the chain so the
block-reduced formulas elsewhere can be checked independently.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._optimize import golden_section_min
from .errors import DegeneracyError, DomainError, ParameterError, SizeError
from .model import ModelParams

#: spectral pairs with rho_j + rho_k at or below this are outside the support
SUPPORT_TOL = 1e-14
TRACE_TOL = 1e-10
NEGATIVE_TOL = 1e-10
MAX_ED_SITES = 8


@dataclass
class SpectralDensity:
    """Density matrix stored as eigenvalues ``probs`` and eigenvector columns ``vecs``."""

    probs: np.ndarray
    vecs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.vecs = np.asarray(self.vecs, dtype=complex)
        if self.vecs.shape != (self.dim, self.dim):
            raise DomainError(f"vecs shape {self.vecs.shape} does not match {self.dim} probabilities")

    @property
    def dim(self) -> int:
        return len(self.probs)

    @classmethod
    def from_matrix(cls, rho) -> "SpectralDensity":
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DomainError(f"density matrix must be square, got shape {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=1e-12):
            raise DomainError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"trace of density matrix is {tr!r}, expected 1")
        w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        if w.min() < -NEGATIVE_TOL:
            raise DomainError(f"density matrix has negative eigenvalue {w.min()!r}")
        return cls(np.clip(w, 0.0, None), v)

    def matrix(self) -> np.ndarray:
        return (self.vecs * self.probs) @ self.vecs.conj().T

    def check(self, trace_tol=1e-12, ortho_tol=1e-10) -> None:
        if abs(self.probs.sum() - 1.0) > trace_tol:
            raise DomainError(f"probabilities sum to {self.probs.sum()!r}")
        if self.probs.min() < -NEGATIVE_TOL:
            raise DomainError("negative probability")
        gram = self.vecs.conj().T @ self.vecs
        if np.abs(gram - np.eye(self.dim)).max() > ortho_tol:
            raise DomainError("eigenvectors are not orthonormal")


@dataclass
class DerivativeFamily:
    """A one-parameter family ``lambda -> rho(lambda)`` differentiated numerically.

    ``scheme`` is ``"central"`` (error ~ step^2) or ``"richardson"`` (central
    differences at ``step`` and ``step/2`` combined, error ~ step^4).
    """

    rho_at: Callable[[float], np.ndarray]
    step: float = 1e-5
    scheme: str = "central"

    def __post_init__(self):
        if not self.step > 0:
            raise ParameterError(f"finite-difference step must be positive, got {self.step}")
        if self.scheme not in ("central", "richardson"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")

    def derivative(self, lam: float) -> np.ndarray:
        def central(s):
            return (np.asarray(self.rho_at(lam + s)) - np.asarray(self.rho_at(lam - s))) / (2.0 * s)

        if self.scheme == "central":
            return central(self.step)
        return (4.0 * central(0.5 * self.step) - central(self.step)) / 3.0


def _in_eigenbasis(rho: SpectralDensity, drho) -> np.ndarray:
    drho = np.asarray(drho, dtype=complex)
    if drho.shape != (rho.dim, rho.dim):
        raise DomainError(f"derivative shape {drho.shape} does not match density dimension {rho.dim}")
    return rho.vecs.conj().T @ drho @ rho.vecs


def _pair_denominators(rho: SpectralDensity):
    s = rho.probs[:, None] + rho.probs[None, :]
    mask = s > SUPPORT_TOL
    return np.where(mask, s, 1.0), mask


def bures_metric_spectral(rho: SpectralDensity, drho) -> float:
    """g = 1/2 sum_jk |<j|drho|k>|^2 / (rho_j + rho_k) over pairs in the support."""
    d = _in_eigenbasis(rho, drho)
    s, mask = _pair_denominators(rho)
    return float(0.5 * np.sum(np.where(mask, np.abs(d) ** 2 / s, 0.0)))


def bures_metric(family: DerivativeFamily, lam: float) -> float:
    """Bures metric of a numerically differentiated family at ``lam``."""
    rho = SpectralDensity.from_matrix(family.rho_at(lam))
    return bures_metric_spectral(rho, family.derivative(lam))


def sld_from_spectral(rho: SpectralDensity, drho) -> np.ndarray:
    """SLD with matrix elements 2<j|drho|k>/(rho_j + rho_k); zero off the support."""
    d = _in_eigenbasis(rho, drho)
    s, mask = _pair_denominators(rho)
    sld_eig = np.where(mask, 2.0 * d / s, 0.0)
    sld = rho.vecs @ sld_eig @ rho.vecs.conj().T
    return 0.5 * (sld + sld.conj().T)


def qfi_from_sld(rho: SpectralDensity, sld) -> float:
    """Tr[rho L^2]."""
    m = _in_eigenbasis(rho, sld)
    return float(np.real(np.sum(rho.probs * np.sum(np.abs(m) ** 2, axis=1))))


def lyapunov_residual(rho_matrix, drho, sld) -> float:
    """max |drho - (rho L + L rho)/2|, the defining-equation residual of an SLD."""
    rho_matrix = np.asarray(rho_matrix)
    return float(np.abs(drho - 0.5 * (rho_matrix @ sld + sld @ rho_matrix)).max())


def pure_sld(psi, dpsi) -> np.ndarray:
    """2(|psi><dpsi| + |dpsi><psi|) for a normalized pure-state family."""
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.asarray(dpsi, dtype=complex)
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-10:
        raise DomainError("psi must be normalized")
    if abs(np.vdot(psi, dpsi).real) > 1e-10:
        raise DomainError("dpsi has a component that changes the norm of psi")
    return 2.0 * (np.outer(psi, dpsi.conj()) + np.outer(dpsi, psi.conj()))


def pure_metric_rate(psi, dpsi) -> float:
    """ds_B/dlambda = sqrt(<dpsi|dpsi> - |<psi|dpsi>|^2)."""
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.asarray(dpsi, dtype=complex)
    v = np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2
    return math.sqrt(max(v, 0.0))


def pure_qfi_sum(hamiltonian, dH, gap_tol=1e-12) -> float:
    """4 sum_{n>0} |<0|dH|n>|^2 / (E_n - E_0)^2 for a nondegenerate ground state."""
    hamiltonian = np.asarray(hamiltonian)
    w, v = np.linalg.eigh(hamiltonian)
    if w.size < 2:
        return 0.0
    if w[1] - w[0] <= gap_tol:
        raise DegeneracyError(f"ground state is degenerate (gap {w[1] - w[0]:.3e})")
    amp = v.conj().T @ (np.asarray(dH) @ v[:, 0])
    return float(4.0 * np.sum(np.abs(amp[1:]) ** 2 / (w[1:] - w[0]) ** 2))


def reparametrized_qfi(qfi_at_lambda: float, dfdlp: float) -> float:
    """QFI for lambda' when lambda = f(lambda'): H * (df/dlambda')^2."""
    return qfi_at_lambda * dfdlp**2


def _power_overlap(rho1: SpectralDensity, rho2: SpectralDensity):
    overlap = np.abs(rho1.vecs.conj().T @ rho2.vecs) ** 2
    p1 = np.clip(rho1.probs, 0.0, None)
    p2 = np.clip(rho2.probs, 0.0, None)

    def q(s):
        return float(np.sum(overlap * np.outer(p1**s, p2 ** (1.0 - s))))

    return q


def chernoff_distance(rho1: SpectralDensity, rho2: SpectralDensity, tol=1e-10) -> float:
    """-log min_{0<=s<=1} Tr[rho1^s rho2^(1-s)] by golden-section search in s."""
    if rho1.dim != rho2.dim:
        raise DomainError("densities live on different spaces")
    q = _power_overlap(rho1, rho2)
    _, qmin = golden_section_min(q, 0.0, 1.0, tol=tol)
    qmin = min(qmin, q(0.0), q(1.0))
    if qmin <= 0.0:
        return math.inf  # orthogonal supports
    return max(0.0, -math.log(qmin))


# ---------------------------------------------------------------------------
# Fock-space oracle
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def fermion_ops(L: int) -> tuple[np.ndarray, ...]:
    """Annihilators c_1 .. c_L on the 2^L occupation basis, Jordan-Wigner ordered.

    Site j is tensor factor j (site 1 leftmost); local basis (|empty>, |occupied>).
    """
    if L > MAX_ED_SITES:
        raise SizeError(f"dense Fock space limited to L <= {MAX_ED_SITES}, got {L}")
    eye = np.eye(2)
    parity = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    ops = []
    for j in range(L):
        m = np.ones((1, 1))
        for site in range(L):
            m = np.kron(m, parity if site < j else lower if site == j else eye)
        m.setflags(write=False)
        ops.append(m)
    return tuple(ops)


def check_ed_size(params: ModelParams) -> None:
    if params.L > MAX_ED_SITES:
        raise SizeError(f"exact diagonalization limited to L <= {MAX_ED_SITES}, got L={params.L}")


def _bond_terms(L: int):
    c = fermion_ops(L)
    hop = np.zeros((2**L, 2**L))
    pair = np.zeros((2**L, 2**L))
    num = np.zeros((2**L, 2**L))
    for i in range(L):
        j = (i + 1) % L
        hop += c[i].T @ c[j]
        pair += c[i].T @ c[j].T
        num += c[i].T @ c[i]
    return hop + hop.T, pair + pair.T, num


def ed_hamiltonian(params: ModelParams) -> np.ndarray:
    """Half of -J sum(c+_i c_i+1 + gamma c+_i c+_i+1 + h.c.) - 2h sum n_i, periodic.

    The factor 1/2 makes each (k, -k) block equal -eps tau^z + Delta tau^y,
    the energy scale used throughout the package.
    """
    check_ed_size(params)
    hop, pair, num = _bond_terms(params.L)
    return 0.5 * (-params.J * (hop + params.gamma * pair) - 2.0 * params.h * num)


def ed_dhamiltonian(params: ModelParams) -> np.ndarray:
    """d(ed_hamiltonian)/dJ."""
    check_ed_size(params)
    hop, pair, _ = _bond_terms(params.L)
    return -0.5 * (hop + params.gamma * pair)


def ed_oracle(params: ModelParams) -> SpectralDensity:
    """Ground (beta = inf) or Gibbs state of the full chain, dimension 2^L."""
    w, v = np.linalg.eigh(ed_hamiltonian(params))
    if params.ground:
        probs = np.zeros_like(w)
        probs[0] = 1.0
    else:
        probs = np.exp(-params.beta * (w - w[0]))
        probs /= probs.sum()
    return SpectralDensity(probs, v)


def ed_density(params: ModelParams) -> np.ndarray:
    return ed_oracle(params).matrix()


def ed_family(params: ModelParams, step=1e-5, scheme="central", parameter="J") -> DerivativeFamily:
    """The oracle state as a numerically differentiable family in J or beta."""
    if parameter not in ("J", "beta"):
        raise ParameterError(f"unknown family parameter {parameter!r}")

    def rho_at(x):
        return ed_density(params.replace(**{parameter: x}))

    return DerivativeFamily(rho_at, step=step, scheme=scheme)


def ed_ground_energy(params: ModelParams) -> float:
    return float(np.linalg.eigvalsh(ed_hamiltonian(params))[0])


def ed_log_partition(params: ModelParams) -> float:
    w = np.linalg.eigvalsh(ed_hamiltonian(params))
    return float(-params.beta * w[0] + np.log(np.sum(np.exp(-params.beta * (w - w[0])))))
