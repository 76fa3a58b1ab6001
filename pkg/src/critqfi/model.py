"""BCS tight-binding chain with pair creation: momentum grid, 2x2 blocks, block states.

The chain is

    H = -J sum_i (c+_i c_{i+1} + gamma c+_i c+_{i+1} + h.c.) - 2h sum_i n_i

on L sites with periodic fermions. In momentum space every pair (k, -k),
0 < k < pi, spans a four-dimensional space ordered as

    {|0>, c+_k c+_-k |0>, c+_k |0>, c+_-k |0>}

and the pair subspace carries the quasi-spin Hamiltonian
-eps_k tau^z + Delta_k tau^y with eps_k = -J cos k - h, Delta_k = -J gamma sin k.
The two singly-occupied states have zero block energy. The unpaired momenta
0 and pi are plain two-level (empty/occupied) modes with energy eps.

Energies follow the quasi-spin normalization: the real-space operator above is
twice the block sum, so ``ed_hamiltonian`` in :mod:`critqfi.densops` uses H/2.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError

TAU_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
TAU_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the chain. ``beta = math.inf`` selects the ground state."""

    J: float
    gamma: float
    h: float
    L: int
    beta: float = math.inf

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L:
            raise ParameterError(f"L must be an integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        if self.L < 4 or self.L % 2:
            raise ParameterError(f"L must be even and >= 4, got {self.L}")
        for name in ("J", "gamma", "h"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        beta = float(self.beta)
        if math.isnan(beta) or beta <= 0.0:
            raise ParameterError(f"beta must be > 0 or inf, got {self.beta}")
        object.__setattr__(self, "beta", beta)

    @property
    def ground(self) -> bool:
        return math.isinf(self.beta)

    @property
    def T(self) -> float:
        return 0.0 if self.ground else 1.0 / self.beta

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Mode:
    """One paired momentum 0 < k < pi with its dispersion data."""

    k: float
    eps: float
    delta: float
    lam: float
    theta: float


class Unpaired(NamedTuple):
    k: float
    eps: float


class ModeArrays(NamedTuple):
    """Vectorized view of the paired modes plus J-derivatives of the dispersion."""

    k: np.ndarray
    eps: np.ndarray
    delta: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    deps: np.ndarray
    ddelta: np.ndarray
    dlam: np.ndarray
    dtheta: np.ndarray


def paired_momenta(L: int) -> np.ndarray:
    n = np.arange(1, L // 2)
    return 2.0 * np.pi * n / L


def dispersion(params: ModelParams, k):
    """Return ``(eps, delta, lam)`` at momenta ``k`` (scalar or array)."""
    k = np.asarray(k, dtype=float)
    eps = -params.J * np.cos(k) - params.h
    delta = -params.J * params.gamma * np.sin(k)
    return eps, delta, np.hypot(eps, delta)


def mode_arrays(params: ModelParams, k=None) -> ModeArrays:
    """Dispersion and its J-derivatives on the paired grid (or on given ``k``).

    ``dtheta`` is d(theta)/dJ = -h gamma sin k / lam^2; it is nan where lam = 0.
    """
    if k is None:
        k = paired_momenta(params.L)
    k = np.asarray(k, dtype=float)
    eps, delta, lam = dispersion(params, k)
    deps = -np.cos(k)
    ddelta = -params.gamma * np.sin(k)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlam = (eps * deps + delta * ddelta) / lam
        dtheta = -params.h * params.gamma * np.sin(k) / lam**2
    theta = np.arctan2(eps, delta)
    return ModeArrays(k, eps, delta, lam, theta, deps, ddelta, dlam, dtheta)


def momentum_grid(params: ModelParams) -> tuple[list[Mode], list[Unpaired]]:
    """Paired modes ``k = 2 pi n / L`` (n = 1 .. L/2 - 1) ascending, plus unpaired k = 0, pi."""
    m = mode_arrays(params)
    modes = [
        Mode(float(k), float(e), float(d), float(l), float(t))
        for k, e, d, l, t in zip(m.k, m.eps, m.delta, m.lam, m.theta)
    ]
    unpaired = [
        Unpaired(0.0, -params.J - params.h),
        Unpaired(math.pi, params.J - params.h),
    ]
    return modes, unpaired


def block_hamiltonian(params: ModelParams, mode: Mode) -> np.ndarray:
    """-eps tau^z + Delta tau^y in the basis {|0>, c+_k c+_-k |0>}."""
    return -mode.eps * TAU_Z + mode.delta * TAU_Y


def pair_bloch(eps, delta, lam):
    """Bloch vector (y, z components) of the pair-subspace ground state."""
    return -delta / lam, eps / lam


def pair_ground_vector(eps: float, delta: float) -> np.ndarray:
    """Lower eigenvector of -eps tau^z + Delta tau^y (phase fixed, first entry real >= 0)."""
    ang = math.atan2(-delta, eps)
    v = np.array([math.cos(ang / 2.0), 1.0j * math.sin(ang / 2.0)])
    if v[0].real < 0 or (v[0].real == 0 and v[1].imag < 0):
        v = -v
    return v


def thermal_weights(beta, lam):
    """Block weights ``(p_ground, p_excited, p_single)`` for pair energies -lam, +lam and two zero-energy singles.

    Written in terms of exp(-beta lam) so large beta lam neither overflows
    nor loses the small weights.
    """
    lam = np.asarray(lam, dtype=float)
    if math.isinf(beta):
        one = np.ones_like(lam)
        zero = np.zeros_like(lam)
        return one, zero, zero
    x = np.exp(-beta * lam)
    norm = (1.0 + x) ** 2
    return 1.0 / norm, x * x / norm, x / norm


def thermal_log_derivatives(beta, lam, dlam):
    """d/dJ log of the three block weights, via d(lam)/dJ."""
    x = np.exp(-beta * np.asarray(lam, dtype=float))
    bd = beta * np.asarray(dlam, dtype=float)
    dlog_g = bd * 2.0 * x / (1.0 + x)
    dlog_e = -bd * 2.0 / (1.0 + x)
    dlog_s = -bd * (1.0 - x) / (1.0 + x)
    return dlog_g, dlog_e, dlog_s


def block_density(params: ModelParams, mode: Mode) -> np.ndarray:
    """Block state as a 4x4 density matrix in the fixed block basis."""
    pg, pe, ps = (float(w) for w in thermal_weights(params.beta, mode.lam))
    ny, nz = pair_bloch(mode.eps, mode.delta, mode.lam)
    rho = np.zeros((4, 4), dtype=complex)
    rho[:2, :2] = 0.5 * (pg + pe) * np.eye(2) + 0.5 * (pg - pe) * (ny * TAU_Y + nz * TAU_Z)
    rho[2, 2] = rho[3, 3] = ps
    return rho


def block_density_derivative(params: ModelParams, mode: Mode) -> np.ndarray:
    """Exact d(rho_block)/dJ for the 4x4 block state."""
    m = mode_arrays(params, mode.k)
    lam, dlam = float(m.lam), float(m.dlam)
    pg, pe, ps = (float(w) for w in thermal_weights(params.beta, lam))
    ny, nz = pair_bloch(float(m.eps), float(m.delta), lam)
    dny, dnz = bloch_derivative(m)
    if math.isinf(params.beta):
        dpg = dpe = dps = 0.0
    else:
        lg, le, ls = (float(v) for v in thermal_log_derivatives(params.beta, lam, dlam))
        dpg, dpe, dps = pg * lg, pe * le, ps * ls
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = (
        0.5 * (dpg + dpe) * np.eye(2)
        + 0.5 * (dpg - dpe) * (ny * TAU_Y + nz * TAU_Z)
        + 0.5 * (pg - pe) * (float(dny) * TAU_Y + float(dnz) * TAU_Z)
    )
    out[2, 2] = out[3, 3] = dps
    return out


def bloch_derivative(m: ModeArrays):
    """d/dJ of the ground-state Bloch vector (y, z); equals the T=0 SLD coefficients."""
    # Delta d(eps) - eps d(Delta) = -h gamma sin k, so no 1/J appears here.
    cross = m.delta * m.deps - m.eps * m.ddelta
    lam3 = m.lam**3
    return m.eps * cross / lam3, m.delta * cross / lam3


def block_state(params: ModelParams, mode: Mode):
    """Thermal (or ground) state of one paired block as a spectral decomposition.

    Eigenvectors are ordered (pair ground, pair excited, c+_k|0>, c+_-k|0>).
    For beta = inf only the pair ground state carries weight.
    """
    from .densops import SpectralDensity

    vg = pair_ground_vector(mode.eps, mode.delta)
    ve = np.array([np.conj(vg[1]) * -1.0, np.conj(vg[0])])
    vecs = np.zeros((4, 4), dtype=complex)
    vecs[:2, 0] = vg
    vecs[:2, 1] = ve
    vecs[2, 2] = 1.0
    vecs[3, 3] = 1.0
    pg, pe, ps = (float(w) for w in thermal_weights(params.beta, mode.lam))
    return SpectralDensity(np.array([pg, pe, ps, ps]), vecs)
