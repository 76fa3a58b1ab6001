"""Quantum Fisher information of the chain with respect to the hopping J.

Exact routes sum independent per-mode terms in ascending k. The thermodynamic
integrals and the critical/low-temperature closed forms are kept separate so
they can be compared against the exact sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._optimize import golden_section_min
from .errors import DomainError, ParameterError, QuadratureError, SingularityError
from .model import ModelParams, dispersion, mode_arrays, paired_momenta

CATALAN = 0.9159655941772190

METHODS = ("zero_t_sum", "block_exact", "integral_limit", "critical_expansion", "lowT_leading")


@dataclass
class QfiReport:
    """QFI value with its per-mode breakdown; the Bures metric is ``value / 4``."""

    value: float
    method: str
    per_mode: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    unpaired_contribution: float = 0.0
    error_estimate: float = 0.0
    components: dict = field(default_factory=dict)

    @property
    def bures(self) -> float:
        return self.value / 4.0


def _require_ground(params: ModelParams):
    if not params.ground:
        raise ParameterError("zero-temperature QFI needs beta = inf")


def _require_thermal(params: ModelParams):
    if params.ground:
        raise ParameterError("finite-temperature formula needs finite beta")


def _check_gapped(params: ModelParams, k, lam):
    scale = abs(params.J) + abs(params.h)
    bad = np.nonzero(lam <= 1e-12 * max(scale, 1e-300))[0]
    if bad.size:
        kb = float(k[bad[0]])
        raise SingularityError(f"gapless grid momentum k = {kb!r} (lam = 0)", k=kb)


def _summation_error(terms) -> float:
    return float(np.finfo(float).eps * len(terms) * np.sum(np.abs(terms)))


def zero_t_terms(params: ModelParams, k=None) -> np.ndarray:
    """h^2 gamma^2 sin^2 k / lam^4, the squared J-rate of the Bogoliubov angle."""
    m = mode_arrays(params, k)
    return (params.h * params.gamma * np.sin(m.k)) ** 2 / m.lam**4


def qfi_zero_t(params: ModelParams) -> QfiReport:
    """Exact ground-state QFI: sum over paired modes of (d theta_k / dJ)^2."""
    _require_ground(params)
    m = mode_arrays(params)
    _check_gapped(params, m.k, m.lam)
    terms = (params.h * params.gamma * np.sin(m.k)) ** 2 / m.lam**4
    return QfiReport(
        value=float(np.sum(terms)),
        method="zero_t_sum",
        per_mode=np.column_stack([m.k, terms]),
        error_estimate=_summation_error(terms),
    )


def qfi_zero_t_batch(J: float, gamma: float, hs, L: int, chunk: int = 256) -> np.ndarray:
    """Ground-state QFI at many fields ``hs`` for one (J, gamma, L); no gap check."""
    hs = np.atleast_1d(np.asarray(hs, dtype=float))
    k = paired_momenta(L)
    s2 = (gamma * np.sin(k)) ** 2
    c = np.cos(k)
    out = np.empty(hs.shape)
    for i in range(0, hs.size, chunk):
        h = hs[i : i + chunk, None]
        lam2 = (J * c + h) ** 2 + J * J * s2
        out[i : i + chunk] = np.sum(h * h * s2 / lam2**2, axis=1)
    return out


def _fermi_variance(beta, e):
    """f(1 - f) for a level at energy e, written via exp(-beta |e|)."""
    y = np.exp(-beta * np.abs(e))
    return y / (1.0 + y) ** 2


def thermal_mode_terms(params: ModelParams, k=None):
    """Per-block (population, coherence) QFI terms at finite beta.

    population: beta^2 (d lam/dJ)^2 / (1 + cosh(beta lam)), from the J-dependence
    of the four block weights; coherence: (1 - sech(beta lam)) (d theta/dJ)^2,
    from the rotation of the pair eigenvectors.
    """
    m = mode_arrays(params, k)
    beta = params.beta
    x = np.exp(-beta * m.lam)
    gapped = m.lam > 0
    dlam2 = np.where(gapped, m.dlam, 0.0) ** 2
    dlam2 = np.where(gapped, dlam2, m.deps**2 + m.ddelta**2)
    population = beta**2 * dlam2 * 2.0 * x / (1.0 + x) ** 2
    coherence_weight = np.expm1(-beta * m.lam) ** 2 / (1.0 + x * x)
    coherence = coherence_weight * np.where(gapped, m.dtheta, 0.0) ** 2
    return m.k, population, coherence


def unpaired_fisher(params: ModelParams) -> float:
    """Classical Fisher information of the k = 0 and k = pi occupations (d eps/dJ = -1, +1)."""
    if params.ground:
        return 0.0
    return float(sum(params.beta**2 * _fermi_variance(params.beta, e) for e in _unpaired_eps(params)))


def qfi_thermal_exact(params: ModelParams) -> QfiReport:
    """Exact finite-L, finite-T QFI from the closed spectral data of every block."""
    _require_thermal(params)
    k, population, coherence = thermal_mode_terms(params)
    terms = population + coherence
    unp = unpaired_fisher(params)
    return QfiReport(
        value=float(np.sum(terms) + unp),
        method="block_exact",
        per_mode=np.column_stack([k, terms]),
        unpaired_contribution=unp,
        error_estimate=_summation_error(terms),
        components={"population": float(np.sum(population)), "coherence": float(np.sum(coherence))},
    )


def _argmin_gap(params: ModelParams) -> float:
    grid = np.linspace(0.0, math.pi, 4097)
    lam = dispersion(params, grid)[2]
    i = int(np.argmin(lam))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    kstar, _ = golden_section_min(lambda t: float(dispersion(params, t)[2]), lo, hi, tol=1e-13)
    return kstar


def _panel_edges(kstar: float, width: float) -> list[float]:
    edges = {0.0, math.pi, kstar}
    w = width
    while w < math.pi:
        for e in (kstar - w, kstar + w):
            if 0.0 < e < math.pi:
                edges.add(e)
        w *= 2.0
    return sorted(edges)


def _integrate_panels(f, edges, epsrel):
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, e, info = integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=200, full_output=True)[:3]
        total += val
        err += e
    return total, err


def qfi_thermal_integral(params: ModelParams, rtol=1e-9) -> QfiReport:
    """Thermodynamic-limit QFI (returned as per-site value times L).

    Evaluates the two-term integral written for the gamma = 1 chain,

        H/L = beta^2/(8 pi) int_0^pi sech^2(beta lam/2) (J + h cos k)^2 / lam^2 dk
            + 1/(2 pi)      int_0^pi (1 - sech(beta lam)) h^2 gamma^2 sin^2 k / lam^4 dk

    with panels refined geometrically toward the gap minimum down to width T/10.
    For gamma != 1 the first numerator is not (d lam/dJ)^2; use
    :func:`qfi_thermal_exact` for general gamma. The population prefactor
    beta^2/(8 pi) is half the large-L limit of the exact sum (beta^2/(4 pi));
    at low T the coherence term dominates and the difference is negligible.
    """
    _require_thermal(params)
    J, g, h, beta = params.J, params.gamma, params.h, params.beta

    def population(k):
        eps, delta, lam = dispersion(params, k)
        if lam == 0.0:
            return 0.0
        x = math.exp(-beta * lam)
        sech2 = 4.0 * x / (1.0 + x) ** 2
        return beta**2 / (8.0 * math.pi) * sech2 * (J + h * math.cos(k)) ** 2 / lam**2

    def coherence(k):
        eps, delta, lam = dispersion(params, k)
        if lam == 0.0:
            return 0.0
        x = math.exp(-beta * lam)
        w = math.expm1(-beta * lam) ** 2 / (1.0 + x * x)
        return w * (h * g * math.sin(k)) ** 2 / lam**4 / (2.0 * math.pi)

    edges = _panel_edges(_argmin_gap(params), params.T / 10.0)
    i1, e1 = _integrate_panels(population, edges, epsrel=rtol * 1e-2)
    i2, e2 = _integrate_panels(coherence, edges, epsrel=rtol * 1e-2)
    total = i1 + i2
    err = e1 + e2
    if not math.isfinite(total) or err > rtol * abs(total) + 1e-300:
        raise QuadratureError(
            f"quadrature did not converge: value={total!r}, error={err!r}, "
            f"panels={len(edges) - 1}, beta={beta!r}, h={h!r}"
        )
    L = params.L
    return QfiReport(
        value=L * total,
        method="integral_limit",
        error_estimate=L * err,
        components={"population": L * i1, "coherence": L * i2, "panels": len(edges) - 1},
    )


def qfi_critical_expansion(params: ModelParams, z: float) -> float:
    """Small-z expansion of the ground-state QFI around h = J, z = L (h - J).

    L^2/(24 J^2 g^2) - L/(2 pi^2 J^2 g^2) + z L (g^2 - 1)/(12 J^3 g^4) - z^2 L^2/(720 J^4 g^4).
    Meaningful for |z| of order one or smaller.
    """
    J, g, L = params.J, params.gamma, params.L
    return (
        L**2 / (24.0 * J**2 * g**2)
        - L / (2.0 * math.pi**2 * J**2 * g**2)
        + z * L * (g**2 - 1.0) / (12.0 * J**3 * g**4)
        - z**2 * L**2 / (720.0 * J**4 * g**4)
    )


def qfi_lowT_leading(params: ModelParams, atol=1e-12) -> float:
    """Leading low-temperature QFI on the critical line: (2 C / pi^2) L / (T |J gamma|)."""
    _require_thermal(params)
    if abs(params.h - params.J) > atol * max(1.0, abs(params.J)):
        raise DomainError(f"low-temperature law holds only at h = J (got h={params.h}, J={params.J})")
    jg = abs(params.J * params.gamma)
    if jg == 0.0:
        raise DomainError("low-temperature law needs J gamma != 0")
    return 2.0 * CATALAN / math.pi**2 * params.L / (params.T * jg)


def _unpaired_eps(params: ModelParams):
    return (-params.J - params.h, params.J - params.h)


def specific_heat(params: ModelParams) -> tuple[float, float]:
    """Return ``(c_V, qfi_beta)``: energy variance is the QFI for beta and c_V = beta^2 variance."""
    _require_thermal(params)
    beta = params.beta
    m = mode_arrays(params)
    x = np.exp(-beta * m.lam)
    block_var = m.lam**2 * 2.0 * x / (1.0 + x) ** 2
    unp = sum(e * e * _fermi_variance(beta, e) for e in _unpaired_eps(params))
    var = float(np.sum(block_var) + unp)
    return beta**2 * var, var


def block_ground_energy(params: ModelParams) -> float:
    """Ground energy of the chain from the blocks: sum(eps_k - lam_k) + unpaired minima."""
    m = mode_arrays(params)
    return float(np.sum(m.eps - m.lam) + sum(min(0.0, e) for e in _unpaired_eps(params)))


def block_log_partition(params: ModelParams) -> float:
    """log Z from block factors exp(-beta eps_k) (2 + 2 cosh(beta lam_k)) and unpaired levels."""
    _require_thermal(params)
    beta = params.beta
    m = mode_arrays(params)
    blocks = -beta * (m.eps - m.lam) + 2.0 * np.log1p(np.exp(-beta * m.lam))
    unp = sum(-beta * min(0.0, e) + math.log1p(math.exp(-beta * abs(e))) for e in _unpaired_eps(params))
    return float(np.sum(blocks) + unp)


def qfi(params: ModelParams, method: str = "auto", z: float | None = None) -> QfiReport:
    """Dispatch to one QFI route; ``auto`` picks the exact sum for the temperature."""
    if method == "auto":
        method = "zero_t_sum" if params.ground else "block_exact"
    if method == "zero_t_sum":
        return qfi_zero_t(params)
    if method == "block_exact":
        return qfi_thermal_exact(params)
    if method == "integral_limit":
        return qfi_thermal_integral(params)
    if method == "critical_expansion":
        zz = params.L * (params.h - params.J) if z is None else z
        return QfiReport(qfi_critical_expansion(params, zz), method)
    if method == "lowT_leading":
        return QfiReport(qfi_lowT_leading(params), method)
    raise ParameterError(f"unknown QFI method {method!r}")
