"""Optimal observable (SLD) for estimating J: momentum coefficients, real-space kernels, dense form.

The SLD is a direct sum over paired blocks, sum_k b_k^z tau_k^z + b_k^y tau_k^y.
At finite temperature each block also carries an identity part on the pair
subspace (``b0``) and on the singly-occupied subspace (``bs``), and the
unpaired momenta 0, pi contribute their classical score; those pieces are
needed for the defining equation to hold exactly.

Real-space kernels: with b^z even and b^y odd in k,

    bz_d(d) = (1/L) sum_k exp(-i k d) b^z_k       (real, even in d)
    by_d(d) = (1/L) sum_k sin(k d) b^y_k          (real, odd in d)

so the complex Fourier transform of b^y equals ``-1j * by_d``. The operator is

    L = (L/2) bz_d(0) - sum_lj c+_l bz_d(l-j) c_j
        + 1/2 [sum_lj by_d(j-l) c+_l c+_j + h.c.]   (+ finite-T identity pieces).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import densops
from .errors import ClassificationError, ConsistencyError, ParameterError, SingularityError
from .model import (
    ModelParams,
    block_density_derivative,
    block_state,
    bloch_derivative,
    mode_arrays,
    momentum_grid,
    pair_bloch,
    thermal_log_derivatives,
)

IMAG_TOL = 1e-12


@dataclass
class SldOperator:
    k: np.ndarray
    by_k: np.ndarray
    bz_k: np.ndarray
    b0_k: np.ndarray
    bs_k: np.ndarray
    #: classical score of the unpaired modes: {k: (value if empty, value if occupied)}
    unpaired: dict = field(default_factory=dict)
    by_d: np.ndarray | None = None
    bz_d: np.ndarray | None = None
    scalar_term: float = 0.0
    dense: np.ndarray | None = None

    @property
    def L(self) -> int:
        return 2 * (len(self.k) + 1)

    def block_norms(self) -> np.ndarray:
        """sqrt(b_y^2 + b_z^2) per mode: the +- eigenvalue split of each tau block."""
        return np.hypot(self.by_k, self.bz_k)


def _closed_form_zero_t(params: ModelParams):
    if params.J == 0.0:
        raise ParameterError("zero-temperature SLD coefficients carry 1/J; J must be nonzero")
    m = mode_arrays(params)
    scale = abs(params.J) + abs(params.h)
    bad = np.nonzero(m.lam <= 1e-12 * scale)[0]
    if bad.size:
        raise SingularityError(f"gapless grid momentum k = {m.k[bad[0]]!r}", k=float(m.k[bad[0]]))
    pref = params.h / params.J / m.lam**3
    return m.k, pref * m.delta * m.eps, pref * m.delta**2


def _block_sld_components(sld4: np.ndarray):
    """(b0, by, bz, bs) of a 4x4 block SLD in the ordered block basis."""
    b0 = 0.5 * (sld4[0, 0] + sld4[1, 1]).real
    bz = 0.5 * (sld4[0, 0] - sld4[1, 1]).real
    by = sld4[1, 0].imag
    return b0, by, bz, sld4[2, 2].real


def block_sld(params: ModelParams, mode) -> np.ndarray:
    """4x4 SLD of one block from its spectral data and exact d(rho)/dJ."""
    return densops.sld_from_spectral(block_state(params, mode), block_density_derivative(params, mode))


def _unpaired_scores(params: ModelParams) -> dict:
    if params.ground:
        return {0.0: (0.0, 0.0), math.pi: (0.0, 0.0)}
    beta = params.beta
    out = {}
    for kk, eps, deps in ((0.0, -params.J - params.h, -1.0), (math.pi, params.J - params.h, 1.0)):
        occ = 1.0 / (1.0 + math.exp(min(beta * eps, 700.0)))
        # d log(1-f) = beta deps f ; d log f = -beta deps (1-f)
        out[kk] = (beta * deps * occ, -beta * deps * (1.0 - occ))
    return out


def _closed_form_thermal(params: ModelParams):
    """Block SLD components at finite beta, written without dividing by small weights.

    On the pair subspace the SLD is b0 + B n.tau + tanh(beta lam) dn.tau with
    B = beta d(lam)/dJ; the singles carry the score of their weight.
    """
    m = mode_arrays(params)
    scale = abs(params.J) + abs(params.h)
    bad = np.nonzero(m.lam <= 1e-12 * max(scale, 1e-300))[0]
    if bad.size:
        raise SingularityError(f"gapless grid momentum k = {m.k[bad[0]]!r}", k=float(m.k[bad[0]]))
    beta = params.beta
    lg, le, ls = thermal_log_derivatives(beta, m.lam, m.dlam)
    x2 = np.exp(-2.0 * beta * m.lam)
    tanh = -np.expm1(-2.0 * beta * m.lam) / (1.0 + x2)
    ny, nz = pair_bloch(m.eps, m.delta, m.lam)
    dny, dnz = bloch_derivative(m)
    big = 0.5 * (lg - le)
    return m.k, big * ny + tanh * dny, big * nz + tanh * dnz, 0.5 * (lg + le), ls


def sld_momentum(params: ModelParams) -> SldOperator:
    """Momentum-space SLD coefficients, closed forms at T = 0 and at finite T.

    The finite-T coefficients coincide with :func:`block_sld` wherever every
    block weight lies inside the numerical support; unlike the spectral route
    they stay continuous in k when exp(-2 beta lam) underflows.
    """
    if params.ground:
        k, by, bz = _closed_form_zero_t(params)
        zeros = np.zeros_like(k)
        return SldOperator(k, by, bz, zeros, zeros.copy(), _unpaired_scores(params))
    k, by, bz, b0, bs = _closed_form_thermal(params)
    return SldOperator(k, by, bz, b0, bs, _unpaired_scores(params))


def block_sld_components(params: ModelParams):
    """(b0, by, bz, bs) per mode extracted from the per-block spectral SLD."""
    modes, _ = momentum_grid(params)
    return np.array([_block_sld_components(block_sld(params, md)) for md in modes]).reshape(-1, 4).T


def _full_zone(values: np.ndarray, L: int, parity: int) -> np.ndarray:
    """Extend paired-mode values to n = 0 .. L-1 (k = 2 pi n / L) with k -> -k parity."""
    full = np.zeros(L)
    full[1 : L // 2] = values
    full[L // 2 + 1 :] = parity * values[::-1]
    return full


def sld_real_space(op: SldOperator, params: ModelParams) -> SldOperator:
    """Fill the real-space kernels ``bz_d``, ``by_d`` and the constant ``scalar_term``."""
    L = params.L
    if op.L != L:
        raise ParameterError(f"operator built for L={op.L}, params have L={L}")
    bz_c = np.fft.fft(_full_zone(op.bz_k, L, +1)) / L
    by_c = np.fft.fft(_full_zone(op.by_k, L, -1)) / L
    scale = max(1.0, float(np.abs(op.bz_k).max(initial=0.0)), float(np.abs(op.by_k).max(initial=0.0)))
    resid = max(np.abs(bz_c.imag).max(), np.abs(by_c.real).max())
    if resid > IMAG_TOL * scale:
        raise ConsistencyError(f"kernel transform left a residue of {resid:.3e}")
    op.bz_d = bz_c.real.copy()
    op.by_d = -by_c.imag.copy()
    op.scalar_term = 0.5 * L * float(op.bz_d[0])
    return op


def sld(params: ModelParams) -> SldOperator:
    """Momentum coefficients plus real-space kernels."""
    return sld_real_space(sld_momentum(params), params)


@dataclass(frozen=True)
class _MomentumOps:
    c: dict
    n: dict


def _momentum_ops(L: int) -> _MomentumOps:
    cs = densops.fermion_ops(L)
    sites = np.arange(1, L + 1)
    c, n = {}, {}
    for m in range(-L // 2 + 1, L // 2 + 1):
        k = 2.0 * np.pi * m / L
        ck = sum(np.exp(-1j * k * j) * cj for j, cj in zip(sites, cs)) / math.sqrt(L)
        c[m] = ck
        n[m] = ck.conj().T @ ck
    return _MomentumOps(c, n)


def sld_dense(op: SldOperator, params: ModelParams) -> np.ndarray:
    """Materialize the SLD on the 2^L Fock space (L <= 8)."""
    densops.check_ed_size(params)
    if op.bz_d is None:
        op = sld_real_space(op, params)
    L = params.L
    cs = densops.fermion_ops(L)
    dim = 2**L
    out = op.scalar_term * np.eye(dim, dtype=complex)
    for l in range(L):
        for j in range(L):
            bz = op.bz_d[(l - j) % L]
            if bz != 0.0:
                out -= bz * (cs[l].T @ cs[j])
            by = op.by_d[(j - l) % L]
            if by != 0.0:
                t = 0.5 * by * (cs[l].T @ cs[j].T)
                out += t + t.T
    if np.any(op.b0_k) or np.any(op.bs_k) or any(any(v) for v in op.unpaired.values()):
        mo = _momentum_ops(L)
        eye = np.eye(dim)
        for idx, (b0, bs) in enumerate(zip(op.b0_k, op.bs_k), start=1):
            na, nb = mo.n[idx], mo.n[-idx]
            single = na + nb - 2.0 * na @ nb
            out += b0 * (eye - single) + bs * single
        for kk, (empty, occupied) in op.unpaired.items():
            m = 0 if kk == 0.0 else L // 2
            out += empty * (eye - mo.n[m]) + occupied * mo.n[m]
    out = 0.5 * (out + out.conj().T)
    op.dense = out
    return out


@dataclass
class DecayFit:
    kind: str  # "exponential" or "algebraic"
    value: float  # decay length xi (exponential) or exponent (algebraic)
    window: tuple
    residual: float
    residual_exponential: float
    residual_algebraic: float
    n_points: int


def decay_classify(
    op: SldOperator, params: ModelParams, component: str = "y", window=None, floor: float = 1e-12
) -> DecayFit:
    """Fit log|b(d)| linearly in d and in log d over the window; keep the better model.

    The default window d in [4, L/4] avoids the periodic wrap-around. Points
    below ``floor`` times the window maximum are dropped as round-off.
    """
    if op.bz_d is None:
        op = sld_real_space(op, params)
    kernel = {"y": op.by_d, "z": op.bz_d}[component]
    L = params.L
    lo, hi = window if window is not None else (4, L // 4)
    d = np.arange(lo, hi + 1)
    vals = np.abs(kernel[d])
    top = vals.max(initial=0.0)
    if top == 0.0 or not np.isfinite(top):
        raise ClassificationError("null kernel")
    keep = vals > floor * top
    if keep.sum() < 3:
        raise ClassificationError(f"only {int(keep.sum())} points above the noise floor")
    d, y = d[keep].astype(float), np.log(vals[keep])

    def fit(x):
        coef, res, *_ = np.polyfit(x, y, 1, full=True)
        return coef, float(res[0]) if res.size else 0.0

    (se, _), rss_e = fit(d)
    (sa, _), rss_a = fit(np.log(d))
    if rss_a <= rss_e:
        return DecayFit("algebraic", float(-sa), (lo, hi), rss_a, rss_e, rss_a, int(d.size))
    xi = float(-1.0 / se) if se != 0 else math.inf
    return DecayFit("exponential", xi, (lo, hi), rss_e, rss_e, rss_a, int(d.size))
