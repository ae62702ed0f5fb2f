"""Growth exponents, critical energies, bounded-energy scans and the Bernoulli experiment."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .algebra import MatClass, classify, commutator, rotation_angle
from .continuum import _cos_sinc, _xi_sq, free_cell_matrices, free_cell_matrix
from .potentials import PotentialSeq, bernoulli_word
from .transfer import (DiracParams, GrowthFit, fit_growth, log_window_norms,
                       running_log_sup)

BETA_WINDOW = 4
COMMUTATOR_TOL = 1e-8
ETA_GAP_TOL = 1e-6


# -- transport exponent -------------------------------------------------------

@dataclass
class MomentCurve:
    q: float
    T: np.ndarray
    A: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        if self.T.shape != self.A.shape or self.T.ndim != 1:
            raise ValueError("T and A must be 1-D arrays of equal length")
        if np.any(np.diff(self.T) <= 0):
            raise ValueError("T must be strictly increasing")
        if np.any(self.A <= 0) or not np.all(np.isfinite(self.A)):
            raise ValueError("moments must be finite and positive")


def windowed_slopes(curve: MomentCurve, window: int = BETA_WINDOW) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares slope and RMS residual of log A vs log T on each run of ``window`` samples."""
    x, y = np.log(curve.T), np.log(curve.A)
    k = x.size - window + 1
    idx = np.arange(window)[None, :] + np.arange(k)[:, None]
    xs, ys = x[idx], y[idx]
    xc = xs - xs.mean(axis=1, keepdims=True)
    yc = ys - ys.mean(axis=1, keepdims=True)
    slope = np.sum(xc * yc, axis=1) / np.sum(xc * xc, axis=1)
    res = np.sqrt(np.mean((yc - slope[:, None] * xc) ** 2, axis=1))
    return slope, res


def beta_estimate(curve: MomentCurve, window: int = BETA_WINDOW) -> tuple[float, float]:
    """Minimum windowed slope of ``log A`` against ``log T`` (a finite-size liminf proxy).

    Returns ``(beta_hat, residual)`` where the residual belongs to the
    minimizing window.
    """
    if curve.T.size < 6:
        raise ValueError("need at least 6 samples")
    ratios = curve.T[1:] / curve.T[:-1]
    if np.ptp(ratios) > 1e-9 * ratios[0]:
        raise ValueError("T grid must be geometric")
    slope, res = windowed_slopes(curve, window)
    i = int(np.argmin(slope))
    beta = float(slope[i])
    if abs(beta) < 1e-13:
        beta = 0.0
    return beta, float(res[i])


# -- continuum critical energies ----------------------------------------------

@dataclass
class CriticalEnergyRecord:
    E0: float
    class0: MatClass
    class1: MatClass
    eta0: float
    eta1: float
    commutator_norm: float
    eta_gap_ok: bool

    @property
    def critical(self) -> bool:
        return (self.class0.bounded_powers and self.class1.bounded_powers
                and self.commutator_norm <= COMMUTATOR_TOL)

    def as_dict(self) -> dict:
        return {"E0": self.E0, "class0": self.class0.value, "class1": self.class1.value,
                "eta0": self.eta0, "eta1": self.eta1, "commutator_norm": self.commutator_norm,
                "eta_gap_ok": self.eta_gap_ok, "critical": self.critical}


def cell_pair(params: DiracParams, coupling: float, E: float) -> tuple[np.ndarray, np.ndarray]:
    """``T0(E)`` (potential 0) and ``T1(E) = T0(E - coupling)``."""
    return free_cell_matrix(params, E), free_cell_matrix(params, E, coupling)


def _eta(m: np.ndarray, cls: MatClass) -> float:
    return rotation_angle(m) if cls.bounded_powers else float("nan")


def critical_record(params: DiracParams, coupling: float, E: float, tol: float = 1e-9) -> CriticalEnergyRecord:
    T0, T1 = cell_pair(params, coupling, E)
    c0, c1 = classify(T0, tol), classify(T1, tol)
    e0, e1 = _eta(T0, c0), _eta(T1, c1)
    comm = float(np.linalg.norm(commutator(T0, T1)))
    gap = e0 - e1
    gap_ok = bool(np.isfinite(gap) and abs(gap - np.pi * np.round(gap / np.pi)) > ETA_GAP_TOL)
    return CriticalEnergyRecord(float(E), c0, c1, e0, e1, comm, gap_ok)


def is_critical(params: DiracParams, coupling: float, E: float) -> bool:
    """Both cell matrices elliptic or +-I and commuting at ``E``.

    For ``m = 0`` every cell matrix is ``exp(i xi sigma_x)``; all of them
    commute and the test is true at every energy where neither is parabolic.
    """
    return critical_record(params, coupling, E).critical


def _sinc_of(params: DiracParams, Ep) -> np.ndarray:
    return _cos_sinc(_xi_sq(params, Ep))[1].real


def _scalar_roots(params: DiracParams, shift: float, grid: np.ndarray) -> list[float]:
    """Energies in the grid range where the cell with level ``shift`` is +-I.

    That happens exactly at zeros of ``sinc(xi(E - shift))``, i.e.
    ``xi = n pi``; the zeros are simple so grid sign changes bracket them.
    """
    f = _sinc_of(params, grid - shift)
    roots = [float(e) for e in grid[f == 0.0]]
    idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
    for i in idx:
        roots.append(optimize.brentq(lambda e: float(_sinc_of(params, np.asarray(e - shift))),
                                     grid[i], grid[i + 1], xtol=1e-13, rtol=1e-15))
    return roots


def critical_scan(params: DiracParams, coupling: float, E_grid, include_rejected: bool = False
                  ) -> list[CriticalEnergyRecord]:
    """Refined energies where one cell matrix is +-I and the other has bounded powers.

    Noncommuting cell matrices (``m > 0``) commute only when one of them is
    scalar, so these isolated points are the full critical set for ``m > 0``.
    For ``m = 0`` they are the distinguished points of a critical continuum.
    """
    grid = np.asarray(E_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("E_grid must be an increasing 1-D grid")
    if np.max(np.diff(grid)) > 1e-3 * (1 + 1e-9):
        raise ValueError("grid resolution must be <= 1e-3")
    roots = sorted(set(_scalar_roots(params, 0.0, grid)) | set(_scalar_roots(params, coupling, grid)))
    merged: list[float] = []
    for r in roots:
        if not merged or r - merged[-1] > 1e-9:
            merged.append(r)
    recs = [critical_record(params, coupling, e) for e in merged]
    return recs if include_rejected else [r for r in recs if r.critical]


def closed_form_critical(params: DiracParams, coupling: float, n_max: int) -> np.ndarray:
    """``+-sqrt(m^2c^4 + n^2 pi^2 c^2)`` and ``coupling +- sqrt(...)`` for ``n = 1..n_max``."""
    n = np.arange(1, n_max + 1)
    r = np.sqrt(params.mc2 ** 2 + (n * np.pi * params.c) ** 2)
    return np.sort(np.concatenate([r, -r, coupling + r, coupling - r]))


def lambda_window(params: DiracParams, n: int) -> tuple[tuple[float, float], tuple[float, float]]:
    """Couplings ``(0, r - mc^2)`` and ``(r + mc^2, inf)`` with ``r = sqrt(m^2c^4 + n^2 pi^2 c^2)``."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    r = float(np.sqrt(params.mc2 ** 2 + (n * np.pi * params.c) ** 2))
    return (0.0, r - params.mc2), (r + params.mc2, float("inf"))


# -- discrete bounded-energy scan ---------------------------------------------

@dataclass
class ScanRow:
    E: float
    fit: GrowthFit
    n_list: list[int]

    @property
    def regime(self) -> str:
        return self.fit.regime

    @property
    def window_norms(self) -> dict[int, float]:
        with np.errstate(over="ignore"):
            return {n: float(np.exp(v)) for n, v in zip(self.n_list, self.fit.log_norms)}


def bounded_energy_scan(params: DiracParams, V: PotentialSeq, E_grid, N_list,
                        chunk: int = 64, threads: int = 1) -> list[ScanRow]:
    """Window-norm growth fit and regime for every energy in ``E_grid``."""
    E = np.asarray(E_grid, dtype=float)
    n_list = sorted(int(n) for n in N_list)
    parts = [E[i:i + chunk] for i in range(0, E.size, chunk)]

    def work(block):
        return log_window_norms(params, block, V, n_list)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            logs = list(ex.map(work, parts))
    else:
        logs = [work(p) for p in parts]
    table = np.concatenate(logs, axis=0) if logs else np.empty((0, len(n_list)))
    return [ScanRow(float(e), fit_growth(n_list, row), n_list) for e, row in zip(E, table)]


def bounded_set(rows: list[ScanRow]) -> np.ndarray:
    return np.array([r.E for r in rows if r.regime == "bounded"])


# -- Bernoulli experiment ------------------------------------------------------

def sup_log_norms(params: DiracParams, coupling: float, E: np.ndarray, words: np.ndarray) -> np.ndarray:
    """``max_E max_{0 <= y <= x <= N} log ||Phi(E, x, y)||`` per word (rows of ``words``)."""
    M = np.stack([free_cell_matrices(params, E, 0.0), free_cell_matrices(params, E, coupling)])
    steps = M[words]                      # (trials, N, nE, 2, 2)
    steps = np.moveaxis(steps, 2, 1)      # (trials, nE, N, 2, 2)
    return running_log_sup(steps)[..., -1].max(axis=-1)


def _draw_words(p: float, seed: int, n: int, trials: int, tag: int) -> np.ndarray:
    return np.stack([bernoulli_word(p, seed, n, stream=(tag, n, t)).word for t in range(trials)]).astype(np.intp)


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def significant_increase(k1: int, k2: int, n: int, level: float = 0.95) -> bool:
    """One-sided pooled two-proportion z-test of ``p2 > p1`` (equal sample sizes)."""
    pool = (k1 + k2) / (2.0 * n)
    if pool in (0.0, 1.0):
        return False
    z = (k2 - k1) / n / np.sqrt(pool * (1.0 - pool) * 2.0 / n)
    return bool(z > stats.norm.ppf(level))


@dataclass
class BernoulliRow:
    N: int
    failures: int
    trials: int
    ci_low: float
    ci_high: float
    half_width: float

    @property
    def fraction(self) -> float:
        return self.failures / self.trials


@dataclass
class BernoulliResult:
    E0: float
    C_test: float
    rows: list[BernoulliRow]
    trend_ok: bool
    calibrated_at: int | None = None

    def fractions(self) -> list[float]:
        return [r.fraction for r in self.rows]


def bernoulli_bound_experiment(params: DiracParams, coupling: float, E0: float, window_exp: float,
                               N_list, trials: int, seed: int, C_test: float | None = None,
                               p: float = 0.5, n_energies: int = 9, quantile: float = 0.99,
                               calibrate_N: int | None = None, rel_margin: float = 1e-9,
                               chunk: int = 100, threads: int = 1) -> BernoulliResult:
    """Fraction of Bernoulli words whose cocycle leaves the ``C_test`` ball near ``E0``.

    For each ``N``: sup of ``||Phi||`` over cell boundaries ``0 <= y <= x <= N``
    and ``n_energies`` points of ``[E0 - N^(-s-1/2), E0 + N^(-s-1/2)]``. If
    ``C_test`` is omitted it is the ``quantile`` of an independent calibration
    sample at ``calibrate_N`` (default: smallest ``N``). Exceedance means
    ``log sup > log C_test + rel_margin``.
    """
    if window_exp <= 0 or trials < 1:
        raise ValueError("need window_exp > 0 and trials >= 1")
    n_list = sorted(int(n) for n in N_list)

    def sup_for(n: int, tag: int) -> np.ndarray:
        half = n ** (-window_exp - 0.5)
        E = np.linspace(E0 - half, E0 + half, n_energies)
        words = _draw_words(p, seed, n, trials, tag)
        return np.concatenate([sup_log_norms(params, coupling, E, words[i:i + chunk])
                               for i in range(0, trials, chunk)])

    cal_n = None
    if C_test is None:
        cal_n = calibrate_N or n_list[0]
        C_test = float(np.exp(np.quantile(sup_for(cal_n, 1), quantile)))
    if C_test <= 0:
        raise ValueError("C_test must be positive")
    limit = np.log(C_test) + rel_margin

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            sups = list(ex.map(lambda n: sup_for(n, 0), n_list))
    else:
        sups = [sup_for(n, 0) for n in n_list]
    rows = []
    for n, s in zip(n_list, sups):
        k = int(np.sum(s > limit))
        lo, hi = wilson_interval(k, trials)
        rows.append(BernoulliRow(n, k, trials, lo, hi, 0.5 * (hi - lo)))
    trend = not any(significant_increase(a.failures, b.failures, trials)
                    for i, a in enumerate(rows) for b in rows[i + 1:])
    return BernoulliResult(float(E0), float(C_test), rows, trend, cal_n)
