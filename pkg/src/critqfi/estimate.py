"""Monte Carlo estimation of J by measuring the block SLDs, mode by mode.

Each paired mode is measured in the eigenbasis of its block SLD built at a
reference coupling J0. The outcomes are ordered (pair +, pair -, single a,
single b); at T = 0 the singles never fire. At finite T the unpaired momenta
0 and pi are measured in the occupation basis and reported as extra rows
(empty, occupied, -, -).

Random numbers: for replica r and mode m one Philox stream keyed by
(seed, r, m) supplies one uniform per copy, in copy order, so copy c of a run
always sees the same uniform whatever the measurement setting.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._optimize import grid_then_golden_max
from .errors import BracketError, DomainError, ParameterError
from .model import (
    Mode,
    ModelParams,
    bloch_derivative,
    mode_arrays,
    pair_bloch,
    paired_momenta,
    thermal_log_derivatives,
    thermal_weights,
)
from .qfi import qfi
from .sld import sld_momentum

N_OUTCOMES = 4
BRACKET = (0.5, 1.5)
ML_GRID = 200
ML_TOL = 1e-10


@dataclass(frozen=True)
class MeasurementModel:
    """Outcome probabilities of the SLD measurement fixed at ``reference_J0``.

    ``params`` supplies gamma, h, L and beta; its J is ignored.
    """

    params: ModelParams
    reference_J0: float
    axes: np.ndarray  # (n_modes, 2) unit (y, z) directions of the block SLDs
    informative: np.ndarray  # bool per row, unpaired rows included

    @classmethod
    def build(cls, params: ModelParams, reference_J0: float) -> "MeasurementModel":
        op = sld_momentum(params.replace(J=reference_J0))
        norm = np.hypot(op.by_k, op.bz_k)
        informative = norm > 0.0
        safe = np.where(informative, norm, 1.0)
        axes = np.column_stack([op.by_k / safe, op.bz_k / safe]) * informative[:, None]
        if not params.ground:
            informative = np.concatenate([informative, [True, True]])
        return cls(params, float(reference_J0), axes, informative)

    @property
    def n_rows(self) -> int:
        return self.informative.size

    def table(self, J: float, with_derivative: bool = False):
        """(n_rows, 4) outcome table at coupling J, optionally with d/dJ."""
        p = self.params.replace(J=J)
        m = mode_arrays(p, paired_momenta(p.L))
        pg, pe, ps = thermal_weights(p.beta, m.lam)
        ny, nz = pair_bloch(m.eps, m.delta, m.lam)
        proj = ny * self.axes[:, 0] + nz * self.axes[:, 1]
        a, c = 0.5 * (pg + pe), 0.5 * (pg - pe)
        tab = np.column_stack([a + c * proj, a - c * proj, ps, ps])
        if not with_derivative:
            return self._with_unpaired(p, tab, None)[0]
        if p.ground:
            da = dc = dps = np.zeros_like(m.lam)
        else:
            lg, le, ls = thermal_log_derivatives(p.beta, m.lam, m.dlam)
            da, dc, dps = 0.5 * (pg * lg + pe * le), 0.5 * (pg * lg - pe * le), ps * ls
        dny, dnz = bloch_derivative(m)
        dproj = dny * self.axes[:, 0] + dnz * self.axes[:, 1]
        dtab = np.column_stack([da + dc * proj + c * dproj, da - dc * proj - c * dproj, dps, dps])
        return self._with_unpaired(p, tab, dtab)

    def _with_unpaired(self, p: ModelParams, tab, dtab):
        if p.ground:
            return tab, dtab
        rows, drows = [], []
        for eps, deps in ((-p.J - p.h, -1.0), (p.J - p.h, 1.0)):
            f = 0.5 * (1.0 - math.tanh(0.5 * p.beta * eps))
            df = -p.beta * deps * f * (1.0 - f)
            rows.append([1.0 - f, f, 0.0, 0.0])
            drows.append([-df, df, 0.0, 0.0])
        tab = np.vstack([tab, rows])
        if dtab is not None:
            dtab = np.vstack([dtab, drows])
        return tab, dtab

    def fisher(self, J: float) -> np.ndarray:
        """Classical Fisher information per row, sum over outcomes of (dp)^2 / p."""
        tab, dtab = self.table(J, with_derivative=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(tab > 0.0, dtab**2 / np.where(tab > 0.0, tab, 1.0), 0.0)
        return terms.sum(axis=1) * self.informative

    def loglik(self, J: float, counts: np.ndarray) -> float:
        tab = self.table(J)
        mask = (counts > 0) & self.informative[:, None]
        if np.any(tab[mask] <= 0.0):
            return -math.inf
        return float(np.sum(counts[mask] * np.log(tab[mask])))


def outcome_distribution(params_true: ModelParams, reference_J0: float, mode: Mode):
    """Born-rule table (p+, p-, p_single, p_single) of one paired mode and its informative flag."""
    model = MeasurementModel.build(params_true, reference_J0)
    ks = paired_momenta(params_true.L)
    i = int(np.argmin(np.abs(ks - mode.k)))
    if abs(ks[i] - mode.k) > 1e-12:
        raise DomainError(f"k = {mode.k!r} is not a paired momentum of L = {params_true.L}")
    return model.table(params_true.J)[i], bool(model.informative[i])


def copy_uniforms(n_rows: int, M: int, seed: int, replica: int = 0) -> np.ndarray:
    """(n_rows, M) uniforms, row m from the Philox stream keyed by (seed, replica, m)."""
    out = np.empty((n_rows, M))
    for m in range(n_rows):
        ss = np.random.SeedSequence([int(seed), int(replica), m])
        out[m] = np.random.Generator(np.random.Philox(ss)).random(M)
    return out


def counts_from_uniforms(table: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Outcome counts per row by inverse-CDF lookup of each row's uniforms."""
    cdf = np.cumsum(table, axis=1)
    cdf[:, -1] = 1.0
    counts = np.zeros(table.shape, dtype=np.int64)
    for m in range(table.shape[0]):
        idx = np.searchsorted(cdf[m], u[m], side="right")
        counts[m] = np.bincount(np.minimum(idx, N_OUTCOMES - 1), minlength=N_OUTCOMES)
    return counts


def sample_run(params_true: ModelParams, reference_J0: float, M: int, seed: int, replica: int = 0) -> np.ndarray:
    """Outcome counts of M copies, one row per measured mode."""
    if int(M) < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    model = MeasurementModel.build(params_true, reference_J0)
    u = copy_uniforms(model.n_rows, int(M), seed, replica)
    return counts_from_uniforms(model.table(params_true.J), u)


def _bracket(reference_J0: float, bracket=None):
    if bracket is None:
        bracket = (BRACKET[0] * reference_J0, BRACKET[1] * reference_J0)
    return tuple(sorted(bracket))


def _joint_ml(models, counts_list, bracket, stage: str):
    def ll(J):
        return sum(m.loglik(J, c) for m, c in zip(models, counts_list))

    x, y, edge = grid_then_golden_max(ll, bracket[0], bracket[1], n_grid=ML_GRID, tol=ML_TOL)
    if edge or not math.isfinite(y):
        raise BracketError(f"likelihood maximum at bracket edge J={x!r}", stage=stage)
    return x, y, ll


def ml_estimate(counts, params: ModelParams, reference_J0: float, bracket=None, stage: str = "ml") -> float:
    """Maximum-likelihood J for counts measured at ``reference_J0`` (gamma, h, L, beta from params)."""
    model = MeasurementModel.build(params, reference_J0)
    return _joint_ml([model], [np.asarray(counts)], _bracket(reference_J0, bracket), stage)[0]


@dataclass
class EstimationRun:
    true_J: float
    reference_J0: float
    M: int
    seed: int
    estimate: float
    empirical_variance: float  # inverse observed information at the estimate
    crb: float
    fisher_ratio: float
    stage_split: float
    loglik: float = math.nan
    replica: int = 0
    stage1_estimate: float = math.nan

    def as_dict(self) -> dict:
        return asdict(self)


def _observed_variance(ll, x: float) -> float:
    s = 1e-4 * max(abs(x), 1e-3)
    curv = -(ll(x + s) - 2.0 * ll(x) + ll(x - s)) / (s * s)
    return 1.0 / curv if curv > 0 else math.inf


def _finish(params_true, models, counts, bracket, stage, M, seed, replica, split, stage1=math.nan):
    est, y, ll = _joint_ml(models, counts, bracket, stage)
    H = qfi(params_true).value
    fisher = float(np.sum(models[-1].fisher(params_true.J)))
    return EstimationRun(
        true_J=params_true.J,
        reference_J0=models[-1].reference_J0,
        M=int(M),
        seed=int(seed),
        estimate=est,
        empirical_variance=_observed_variance(ll, est),
        crb=1.0 / (M * H) if H > 0 else math.inf,
        fisher_ratio=fisher / H if H > 0 else math.nan,
        stage_split=split,
        loglik=y,
        replica=int(replica),
        stage1_estimate=stage1,
    )


def optimal_run(params_true: ModelParams, reference_J0: float, M: int, seed: int, replica: int = 0, bracket=None) -> EstimationRun:
    """Single-stage run: all M copies measured at ``reference_J0``."""
    model = MeasurementModel.build(params_true, reference_J0)
    u = copy_uniforms(model.n_rows, int(M), seed, replica)
    counts = counts_from_uniforms(model.table(params_true.J), u)
    return _finish(params_true, [model], [counts], _bracket(reference_J0, bracket), "ml", M, seed, replica, 0.0)


def two_stage_run(
    params_true: ModelParams, initial_guess: float, M: int, split: float | None = None, seed: int = 0, replica: int = 0
) -> EstimationRun:
    """Stage 1 measures at the guess, stage 2 at the stage-1 estimate; the final estimate uses both stages."""
    M = int(M)
    if split is None:
        m1 = math.ceil(math.sqrt(M))
    else:
        if not 0.0 < split < 1.0:
            raise ParameterError(f"split must lie in (0, 1), got {split}")
        m1 = int(round(split * M))
    if not 1 <= m1 < M:
        raise ParameterError(f"stage-1 copy count {m1} leaves no copies for one of the stages (M={M})")
    m1_model = MeasurementModel.build(params_true, initial_guess)
    u = copy_uniforms(m1_model.n_rows, M, seed, replica)
    c1 = counts_from_uniforms(m1_model.table(params_true.J), u[:, :m1])
    j1, _, _ = _joint_ml([m1_model], [c1], _bracket(initial_guess), "stage1")
    m2_model = MeasurementModel.build(params_true, j1)
    c2 = counts_from_uniforms(m2_model.table(params_true.J), u[:, m1:])
    return _finish(params_true, [m1_model, m2_model], [c1, c2], _bracket(j1), "stage2", M, seed, replica, m1 / M, j1)


def replica_suite(params_true: ModelParams, M: int, n_replicas: int, seed: int, reference_J0=None, initial_guess=None):
    """Optimal runs at ``reference_J0`` (default: truth), or two-stage runs when ``initial_guess`` is set."""
    runs = []
    for r in range(int(n_replicas)):
        if initial_guess is not None:
            runs.append(two_stage_run(params_true, initial_guess, M, seed=seed, replica=r))
        else:
            ref = params_true.J if reference_J0 is None else reference_J0
            runs.append(optimal_run(params_true, ref, M, seed, replica=r))
    return runs


@dataclass
class CrbSummary:
    n_runs: int
    mean_estimate: float
    stderr_mean: float
    empirical_variance: float
    crb: float
    ratio: float  # empirical variance / crb = M var H
    ratio_sigma: float  # bootstrap standard deviation of ratio
    bound_ok: bool | None
    zero_information: bool
    bias_sigmas: float  # (mean - true) / stderr

    def as_dict(self) -> dict:
        return asdict(self)


def crb_report(runs, n_boot: int = 1000, boot_seed: int = 0, min_runs: int = 100) -> CrbSummary:
    """Replica variance against the Cramer-Rao bound, with a bootstrap error on the ratio."""
    if len(runs) < min_runs:
        raise DomainError(f"CRB report needs >= {min_runs} runs, got {len(runs)}")
    est = np.array([r.estimate for r in runs])
    true_J = runs[0].true_J
    crb = runs[0].crb
    n = est.size
    var = float(np.var(est, ddof=1))
    se = math.sqrt(var / n)
    bias = (float(est.mean()) - true_J) / se if se > 0 else 0.0
    if not math.isfinite(crb):
        return CrbSummary(n, float(est.mean()), se, var, crb, math.nan, math.nan, None, True, bias)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(boot_seed)))
    idx = rng.integers(0, n, size=(n_boot, n))
    boot = np.var(est[idx], axis=1, ddof=1) / crb
    ratio, sigma = var / crb, float(np.std(boot, ddof=1))
    return CrbSummary(n, float(est.mean()), se, var, crb, ratio, sigma, bool(ratio >= 1.0 - 3.0 * sigma), False, bias)
