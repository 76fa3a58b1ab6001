"""Finite-size scaling of the ground-state QFI near the critical field h = J.

Scaling variable z = L (h - J). Near criticality

    QFI / L^2 = phi(z) + (D' z + c0) / L + O(1/L^2)

with phi(z) = phi0 + phi2 z^2 + ... . ``scaling_collapse`` fits that form per
z value over the sizes supplied, then fits phi and the 1/L coefficient in z.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._optimize import golden_section_min, grid_then_golden_max
from .errors import BracketError, DomainError, ParameterError
from .model import ModelParams
from .qfi import qfi_zero_t_batch

GRID_COLUMNS = ("L", "J", "gamma", "h", "z", "qfi")
MIN_SHIFT_L = 64


def pseudo_critical_point(params: ModelParams, L: int | None = None, bracket: float = 0.25, tol: float = 1e-10) -> float:
    """Field h*_L maximizing the ground-state QFI on [J(1 - bracket), J(1 + bracket)]."""
    if params.gamma == 0.0:
        raise ParameterError("pseudo-critical point needs gamma != 0")
    if params.J == 0.0:
        raise ParameterError("pseudo-critical point needs J != 0")
    L = params.L if L is None else int(L)
    J, g = params.J, params.gamma
    a, b = sorted((J * (1.0 - bracket), J * (1.0 + bracket)))
    n_grid = max(200, int(4 * L * bracket))
    x, _, edge = grid_then_golden_max(
        lambda h: float(qfi_zero_t_batch(J, g, h, L)[0]),
        a,
        b,
        n_grid=n_grid,
        tol=tol,
        vectorized=lambda hs: qfi_zero_t_batch(J, g, hs, L),
    )
    if edge:
        raise BracketError(f"QFI maximum at bracket edge h={x!r} for L={L}", stage="pseudo_critical")
    return x


@dataclass
class ShiftFit:
    exponent: float
    exponent_stderr: float
    coefficient: float  # signed prefactor c of h* - J = c L^-exponent
    coefficient_fixed: float  # c with the exponent pinned to 2, extrapolated in 1/L
    n_points: int


def shift_exponent(points, J: float, atol: float = 1e-9) -> ShiftFit:
    """Regress log|h*_L - J| on log L.

    ``coefficient_fixed`` fits (h* - J) L^2 = c + c1/L and reports c, the
    amplitude of the leading L^-2 shift.
    """
    pts = sorted((int(L), float(h)) for L, h in points)
    Ls = np.array([p[0] for p in pts], dtype=float)
    hs = np.array([p[1] for p in pts])
    if len(set(Ls)) < 5:
        raise DomainError(f"shift fit needs >= 5 distinct sizes, got {len(set(Ls))}")
    if Ls.min() < MIN_SHIFT_L:
        raise DomainError(f"shift fit uses L >= {MIN_SHIFT_L}, got L={int(Ls.min())}")
    shift = hs - J
    if np.any(np.abs(shift) <= atol * max(abs(J), 1.0)):
        raise DomainError("h*_L coincides with J; the shift exponent is undefined (the gamma = 1 case), use gamma != 1")
    sign = np.sign(shift)
    if not np.all(sign == sign[0]):
        raise DomainError("h*_L - J changes sign across sizes; no single power law")
    x, y = np.log(Ls), np.log(np.abs(shift))
    (slope, icpt), cov = np.polyfit(x, y, 1, cov=True)
    return ShiftFit(
        exponent=float(-slope),
        exponent_stderr=float(math.sqrt(max(cov[0, 0], 0.0))),
        coefficient=float(sign[0] * math.exp(icpt)),
        coefficient_fixed=shift_amplitude(pts, J),
        n_points=len(pts),
    )


def shift_amplitude(points, J: float) -> float:
    """c of (h*_L - J) L^2 = c + c1 / L; defined even when the shift vanishes."""
    Ls = np.array([float(L) for L, _ in points])
    shift = np.array([float(h) for _, h in points]) - J
    A = np.column_stack([np.ones_like(Ls), 1.0 / Ls])
    return float(np.linalg.lstsq(A, shift * Ls**2, rcond=None)[0][0])


@dataclass
class ScalingFit:
    z_values: np.ndarray
    Ls: np.ndarray
    pseudo_points: list = field(default_factory=list)
    shift: ShiftFit | None = None
    delta_g: float = math.nan
    nu: float = math.nan
    phi0: float = math.nan
    phi2: float = math.nan
    d_slope: float = math.nan
    c_zero: float = math.nan  # 1/L coefficient at z = 0
    phi_z: np.ndarray | None = None
    xi: np.ndarray | None = None
    warnings: list = field(default_factory=list)


def qfi_grid(params: ModelParams, Ls, zs) -> np.ndarray:
    """QFI table of shape (len(Ls), len(zs)) at h = J + z / L."""
    J, g = params.J, params.gamma
    return np.array([qfi_zero_t_batch(J, g, J + np.asarray(zs, float) / L, int(L)) for L in Ls])


def _fit_delta_g(Ls, q0):
    """L-power of the z = 0 QFI: minimize the residual of q0 / L^(1+dg) = A + B/L over dg."""
    A = np.column_stack([np.ones_like(Ls), 1.0 / Ls])

    def resid(dg):
        y = q0 / Ls ** (1.0 + dg)
        coef = np.linalg.lstsq(A, y, rcond=None)[0]
        return float(np.sum((A @ coef / y - 1.0) ** 2))

    dg, _ = golden_section_min(resid, 0.0, 3.0, tol=1e-8)
    return dg


def _collapse_residual(Ls, zs, table, delta_g, nu, n_eval=41):
    """Spread across sizes of table / L^(1+delta_g) versus x = z L^(1/nu - 1)."""
    curves = []
    for L, row in zip(Ls, table):
        x = np.asarray(zs) * L ** (1.0 / nu - 1.0)
        curves.append(CubicSpline(x, row / L ** (1.0 + delta_g)))
    xs_lo = max(np.min(zs) * L ** (1.0 / nu - 1.0) for L in Ls)
    xs_hi = min(np.max(zs) * L ** (1.0 / nu - 1.0) for L in Ls)
    if not xs_hi > xs_lo:
        return math.inf
    xe = np.linspace(xs_lo, xs_hi, n_eval)
    ys = np.array([c(xe) for c in curves])
    return float(np.mean(np.var(ys, axis=0)) / np.mean(ys) ** 2)


def scaling_collapse(params: ModelParams, Ls, zs, with_shift: bool = True) -> ScalingFit:
    """Fit QFI/L^2 = phi(z) + a(z)/L + b(z)/L^2 per z, then phi and a as polynomials in z."""
    Ls = np.array(sorted(int(L) for L in Ls), dtype=float)
    zs = np.array(sorted(float(z) for z in zs))
    if Ls.size < 3:
        raise DomainError("scaling collapse needs >= 3 sizes")
    if zs.size < 5:
        raise DomainError("scaling collapse needs >= 5 z values")
    table = qfi_grid(params, Ls.astype(int), zs)
    fit = ScalingFit(z_values=zs, Ls=Ls)

    A = np.column_stack([np.ones_like(Ls), 1.0 / Ls, 1.0 / Ls**2])
    coef = np.linalg.lstsq(A, (table / Ls[:, None] ** 2), rcond=None)[0]
    phi, a = coef[0], coef[1]
    fit.phi_z = phi
    pphi = np.polynomial.polynomial.polyfit(zs, phi, min(4, zs.size - 1))
    pa = np.polynomial.polynomial.polyfit(zs, a, min(2, zs.size - 1))
    fit.phi0, fit.phi2 = float(pphi[0]), float(pphi[2])
    fit.c_zero, fit.d_slope = float(pa[0]), float(pa[1])

    lead = phi[None, :] * Ls[:, None] ** 2
    rel = np.max(np.abs(table - lead) / np.abs(lead))
    if rel > 0.1:
        fit.warnings.append(f"poor collapse: subleading terms reach {rel:.3g} of the leading term")

    iz0 = int(np.argmin(np.abs(zs)))
    fit.delta_g = _fit_delta_g(Ls, table[:, iz0])
    fit.nu, _ = golden_section_min(lambda nu: _collapse_residual(Ls, zs, table, fit.delta_g, nu), 0.5, 2.0, tol=1e-6)
    with np.errstate(divide="ignore"):
        fit.xi = np.abs(zs / Ls[-1]) ** (-fit.nu)

    if with_shift:
        fit.pseudo_points = [(int(L), pseudo_critical_point(params, int(L))) for L in Ls]
        try:
            fit.shift = shift_exponent([p for p in fit.pseudo_points if p[0] >= MIN_SHIFT_L], params.J)
        except DomainError as exc:
            fit.warnings.append(f"shift exponent not fitted: {exc}")
    return fit


def extensivity_probe(params: ModelParams, Ls, at_critical: bool = True) -> float:
    """Log-log slope of the ground-state QFI in L, at h = J or at params.h."""
    Ls = np.array(sorted(int(L) for L in Ls))
    if Ls.size < 4:
        raise DomainError("extensivity probe needs >= 4 sizes")
    h = params.J if at_critical else params.h
    q = np.array([qfi_zero_t_batch(params.J, params.gamma, h, int(L))[0] for L in Ls])
    return float(np.polyfit(np.log(Ls), np.log(q), 1)[0])


def metric_density(params: ModelParams, hs) -> np.ndarray:
    """QFI / L at fixed fields ``hs`` and size params.L."""
    return qfi_zero_t_batch(params.J, params.gamma, hs, params.L) / params.L


def write_grid_csv(path, rows) -> None:
    """Write (L, J, gamma, h, z, qfi) rows with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for r in rows:
            L, J, g, h, z, q = r
            w.writerow([int(L), repr(float(J)), repr(float(g)), repr(float(h)), repr(float(z)), repr(float(q))])


def read_grid_csv(path) -> list[tuple]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != GRID_COLUMNS:
            raise ParameterError(f"unexpected grid columns {header}")
        return [(int(r[0]), *map(float, r[1:])) for r in rd]
