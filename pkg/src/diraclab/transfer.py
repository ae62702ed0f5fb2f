"""Discrete transfer-matrix cocycle of the lattice Dirac operator.

A solution of ``D u = E u`` is carried as the pair ``(u+(n+1), u-(n))``;
one step across site ``n`` is ``step_matrix(params, E, V(n))`` and the
cocycle ``Phi(E, x, y) = T(V(x)) ... T(V(y+1))`` maps the pair at ``y`` to
the pair at ``x``. Conventions: ``Phi(E, y, y) = I`` and
``Phi(E, x, y) = Phi(E, y, x)^{-1}`` for ``x < y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .algebra import IDENTITY, adjugate, operator_norm, ordered_product
from .potentials import PotentialSeq

RESCALE_AT = 1e150
EXACT_PAIR_LIMIT = 8192


class NumericalGuardError(RuntimeError):
    """A conditioning or overflow guard tripped."""


@dataclass(frozen=True)
class DiracParams:
    m: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if not self.m >= 0:
            raise ValueError(f"mass must be >= 0, got {self.m}")
        if not self.c > 0:
            raise ValueError(f"light speed must be > 0, got {self.c}")

    @property
    def mc2(self) -> float:
        return self.m * self.c * self.c


def step_matrices(params: DiracParams, E: complex, v) -> np.ndarray:
    """Stack of one-site transfer matrices for site potentials ``v`` (``E`` broadcasts)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    c, mc2 = params.c, params.mc2
    d = np.asarray(E) - v
    out = np.empty(d.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 1.0 + (mc2 * mc2 - d * d) / (c * c)
    out[..., 0, 1] = (mc2 + d) / c
    out[..., 1, 0] = (mc2 - d) / c
    out[..., 1, 1] = 1.0
    return out


def step_matrix(params: DiracParams, E: complex, v: float) -> np.ndarray:
    return step_matrices(params, E, [v])[0]


def _check_sites(V: PotentialSeq, *sites: int) -> None:
    for s in sites:
        if not 0 <= s <= len(V):
            raise IndexError(f"site {s} outside 0..{len(V)}")


def cocycle(params: DiracParams, E: complex, V: PotentialSeq, x: int, y: int) -> np.ndarray:
    _check_sites(V, x, y)
    if x == y:
        return IDENTITY.copy()
    if x < y:
        return adjugate(cocycle(params, E, V, y, x))
    return ordered_product(step_matrices(params, E, V.values[y:x]))


def transport(params: DiracParams, E: complex, V: PotentialSeq, x: int, y: int, seed) -> np.ndarray:
    """Carry ``(u+(y+1), u-(y))`` to ``(u+(x+1), u-(x))``."""
    return cocycle(params, E, V, x, y) @ np.asarray(seed, dtype=complex)


def prefix_products(params: DiracParams, E, V: PotentialSeq, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``Phi(E, k, 0)`` for ``k = 0..n`` as ``(scaled, log_scale)``.

    ``E`` may be an array; results then carry a leading energy axis. Each
    prefix is stored as ``exp(log_scale) * scaled``; rescaling kicks in when
    an entry exceeds ``RESCALE_AT`` so hyperbolic energies do not overflow.
    """
    E = np.asarray(E, dtype=complex)
    shape = E.shape
    Ef = E.reshape(-1)
    vals = V.values[:n]
    c, mc2 = params.c, params.mc2
    P = np.empty((Ef.size, n + 1, 2, 2), dtype=complex)
    logs = np.zeros((Ef.size, n + 1))
    cur = np.broadcast_to(IDENTITY, (Ef.size, 2, 2)).copy()
    logcur = np.zeros(Ef.size)
    P[:, 0] = cur
    for k in range(n):
        d = Ef - vals[k]
        t00 = 1.0 + (mc2 * mc2 - d * d) / (c * c)
        t01 = (mc2 + d) / c
        t10 = (mc2 - d) / c
        a00 = t00 * cur[:, 0, 0] + t01 * cur[:, 1, 0]
        a01 = t00 * cur[:, 0, 1] + t01 * cur[:, 1, 1]
        a10 = t10 * cur[:, 0, 0] + cur[:, 1, 0]
        a11 = t10 * cur[:, 0, 1] + cur[:, 1, 1]
        cur = np.stack([np.stack([a00, a01], -1), np.stack([a10, a11], -1)], -2)
        big = np.max(np.abs(cur), axis=(-2, -1))
        hit = big > RESCALE_AT
        if np.any(hit):
            cur[hit] /= big[hit, None, None]
            logcur = logcur + np.where(hit, np.log(np.where(hit, big, 1.0)), 0.0)
        P[:, k + 1] = cur
        logs[:, k + 1] = logcur
    return P.reshape(shape + (n + 1, 2, 2)), logs.reshape(shape + (n + 1,))


def running_log_sup(steps: np.ndarray) -> np.ndarray:
    """``r[..., x] = max_{0 <= y <= x' <= x} log ||Phi(x', y)||`` from one-site matrices.

    ``steps[..., k]`` is the matrix of site ``k + 1``. Products are formed
    directly along the diagonals ``x - y = k`` (vectorized over ``y``), so
    every ``Phi(x, y)`` is accurate to rounding; the shortcut
    ``Phi(x, 0) Phi(y, 0)^{-1}`` cancels catastrophically at hyperbolic
    energies. Norms of ``x < y`` pairs coincide (unimodular inverse).
    """
    lead, n = steps.shape[:-3], steps.shape[-3]
    a = np.broadcast_to(np.complex128(1), lead + (n + 1,)).copy()
    b = np.zeros(lead + (n + 1,), dtype=complex)
    c = np.zeros_like(b)
    d = a.copy()
    scale = np.zeros(lead + (n + 1,))
    best = np.zeros(lead + (n + 1,))
    s00, s01, s10, s11 = (steps[..., 0, 0], steps[..., 0, 1], steps[..., 1, 0], steps[..., 1, 1])
    for k in range(1, n + 1):
        m = n - k + 1
        t00, t01, t10, t11 = s00[..., k - 1:], s01[..., k - 1:], s10[..., k - 1:], s11[..., k - 1:]
        a0, b0, c0, d0 = a[..., :m], b[..., :m], c[..., :m], d[..., :m]
        a, b, c, d = (t00 * a0 + t01 * c0, t00 * b0 + t01 * d0,
                      t10 * a0 + t11 * c0, t10 * b0 + t11 * d0)
        scale = scale[..., :m]
        fro = (a.real ** 2 + a.imag ** 2 + b.real ** 2 + b.imag ** 2
               + c.real ** 2 + c.imag ** 2 + d.real ** 2 + d.imag ** 2)
        hit = fro > RESCALE_AT ** 2
        if np.any(hit):
            r = np.where(hit, np.sqrt(fro), 1.0)
            a, b, c, d = a / r, b / r, c / r, d / r
            scale = scale + np.log(r)
        g11 = np.abs(a) ** 2 + np.abs(c) ** 2
        g22 = np.abs(b) ** 2 + np.abs(d) ** 2
        g12 = np.conj(a) * b + np.conj(c) * d
        s2 = 0.5 * (g11 + g22 + np.hypot(g11 - g22, 2.0 * np.abs(g12)))
        lognorm = 0.5 * np.log(s2) + scale
        np.maximum(best[..., k:], lognorm, out=best[..., k:])
    return np.maximum.accumulate(best, axis=-1)


@dataclass
class WindowNormTable:
    """``N -> L_m(N)`` for one energy (``log_entries`` avoids overflow)."""

    energy: complex
    params: DiracParams
    log_entries: dict[int, float]
    provenance: dict = field(default_factory=dict)
    mode: str = "exact"

    @property
    def entries(self) -> dict[int, float]:
        with np.errstate(over="ignore"):
            return {n: float(np.exp(v)) for n, v in self.log_entries.items()}


def log_window_norms(params: DiracParams, E, V: PotentialSeq, n_list, exact_limit: int = EXACT_PAIR_LIMIT) -> np.ndarray:
    """``log L_m(N)`` for each ``N`` in ``n_list`` (and each energy in ``E``).

    Pairs are enumerated exactly up to ``exact_limit``; beyond it the
    estimate ``||Phi(x,0)|| * ||Phi(y,0)||`` (an upper bound) is used.
    """
    n_list = [int(n) for n in np.atleast_1d(n_list)]
    nmax = max(n_list)
    if nmax > len(V):
        raise ValueError(f"N={nmax} exceeds potential length {len(V)}")
    if min(n_list) < 0:
        raise ValueError("N must be >= 0")
    E = np.asarray(E, dtype=complex)
    if nmax <= exact_limit:
        run = running_log_sup(step_matrices(params, E[..., None], V.values[:nmax]))
    else:
        P, logs = prefix_products(params, E, V, nmax)
        with np.errstate(divide="ignore"):
            lp = np.log(operator_norm(P)) + logs
        lp = np.maximum.accumulate(lp, axis=-1)
        run = np.maximum(2.0 * lp, 0.0)
    idx = np.asarray(n_list)
    return run[..., idx]


def window_norm(params: DiracParams, E: complex, V: PotentialSeq, n: int, exact_limit: int = EXACT_PAIR_LIMIT) -> float:
    """``L_m(N) = sup_{0 <= x, y <= N} ||Phi(E, x, y)||``."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_window_norms(params, E, V, [n], exact_limit)[0]))


def window_norm_table(params: DiracParams, E: complex, V: PotentialSeq, n_list,
                      exact_limit: int = EXACT_PAIR_LIMIT) -> WindowNormTable:
    logs = log_window_norms(params, E, V, n_list, exact_limit)
    mode = "exact" if max(n_list) <= exact_limit else "upper_bound"
    return WindowNormTable(complex(E), params, {int(n): float(v) for n, v in zip(n_list, logs)},
                           dict(V.provenance), mode)


def membership(params: DiracParams, E: complex, V: PotentialSeq, alpha: float, C: float, n: int) -> bool:
    """Whether ``E`` lies in ``P_m(alpha, C, N)``."""
    if alpha < 0 or C <= 0:
        raise ValueError("need alpha >= 0 and C > 0")
    logL = log_window_norms(params, E, V, [n])[0]
    return bool(logL <= np.log(C) + alpha * np.log(n))


def _perturbation_kernel(params: DiracParams, E: complex, delta: complex, v) -> np.ndarray:
    """``B_delta`` for each site potential in ``v``; ``T(E+delta) - T(E) = -delta * B_delta``."""
    c = params.c
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.zeros(v.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = delta / c**2 + 2.0 * (E - v) / c**2
    out[..., 0, 1] = -1.0 / c
    out[..., 1, 0] = 1.0 / c
    return out


@dataclass
class PerturbedProduct:
    matrix: np.ndarray
    expansion: np.ndarray
    residual: float
    scale: float


def perturbed_product(params: DiracParams, E: complex, delta: complex, V: PotentialSeq, x: int, y: int) -> PerturbedProduct:
    """``Phi(E+delta, x, y)`` and the residual of the first-order resolvent-type identity

    ``Phi(E+d, x, y) = Phi(E, x, y) - d * sum_{j=y}^{x-1} Phi(E+d, x, j+1) B_d(j+1) Phi(E, j, y)``

    where ``B_d(k)`` is the kernel at the site ``k`` whose step is replaced.
    The residual is the max-entry difference divided by ``scale``, the sum
    of the norms of the terms on the right.
    """
    _check_sites(V, x, y)
    if x < y:
        raise ValueError("perturbed_product expects x >= y")
    Ed = E + delta
    steps = step_matrices(params, E, V.values[y:x])
    steps_d = step_matrices(params, Ed, V.values[y:x])
    kern = _perturbation_kernel(params, E, delta, V.values[y:x])
    n = x - y
    # left[j-y] = Phi(E, j, y); right[j-y] = Phi(E+d, x, j+1)
    left = np.empty((n + 1, 2, 2), dtype=complex)
    left[0] = IDENTITY
    for k in range(n):
        left[k + 1] = steps[k] @ left[k]
    right = np.empty((n + 1, 2, 2), dtype=complex)
    right[n] = IDENTITY
    for k in range(n - 1, -1, -1):
        right[k] = right[k + 1] @ steps_d[k]
    # right[k] = Phi(E+d, x, y+k); the term for j = y+k uses Phi(E+d, x, j+1) = right[k+1]
    terms = right[1:] @ kern @ left[:-1]
    rhs = left[n] - delta * terms.sum(axis=0)
    lhs = right[0]
    scale = float(operator_norm(left[n]) + abs(delta) * np.sum(
        operator_norm(right[1:]) * operator_norm(kern) * operator_norm(left[:-1])))
    resid = float(np.max(np.abs(lhs - rhs))) / max(scale, 1.0)
    return PerturbedProduct(lhs, rhs, resid, scale)


def kernel_constant(params: DiracParams, E: complex, V: PotentialSeq, n: int) -> float:
    """Explicit ``C1``: ``sup_j ||[[2(E-V(j))/c, -1], [1, 0]]||`` over sites ``1..N``.

    With it ``||delta * B_delta(j)|| <= |delta|/c * (|delta|/c + C1)``.
    """
    vals = V.values[:max(n, 1)]
    M = np.zeros((vals.size, 2, 2), dtype=complex)
    M[:, 0, 0] = 2.0 * (E - vals) / params.c
    M[:, 0, 1] = -1.0
    M[:, 1, 0] = 1.0
    return float(np.max(operator_norm(M)))


def perturbation_bound(params: DiracParams, E: complex, delta: complex, V: PotentialSeq, n: int,
                       distance: int | None = None, log: bool = False) -> float:
    """Upper bound on ``||Phi(E+delta, x, y)||`` for ``0 <= x, y <= N`` with ``|x-y| = distance``.

    ``L * exp(|delta|/c * (|delta|/c + C1) * L * distance)``, default distance ``N``.
    """
    dist = n if distance is None else distance
    logL = float(log_window_norms(params, E, V, [n])[0])
    C1 = kernel_constant(params, E, V, n)
    a = abs(delta) / params.c
    with np.errstate(over="ignore"):
        L = np.exp(logL)
        logb = logL + a * (a + C1) * L * dist
    if log:
        return float(logb)
    with np.errstate(over="ignore"):
        return float(np.exp(logb))


@dataclass
class GrowthFit:
    alpha: float
    stderr: float
    band: tuple[float, float]
    residual: float
    regime: str
    log_norms: np.ndarray
    exp_rate: float = 0.0
    exp_residual: float = 0.0

    @property
    def power_law_ok(self) -> bool:
        return self.regime in ("bounded", "power_law")


def fit_growth(n_list, log_norms, bounded_below: float = 0.05) -> GrowthFit:
    """Classify ``log L(N)`` as bounded, power-law or exponential growth."""
    n = np.asarray(n_list, dtype=float)
    y = np.asarray(log_norms, dtype=float)
    if n.size < 4:
        raise ValueError("need at least 4 window sizes")
    if np.ptp(y) == 0.0:
        return GrowthFit(0.0, 0.0, (0.0, 0.0), 0.0, "bounded", y)
    lx = np.log(n)
    pw = stats.linregress(lx, y)
    res_pw = float(np.sqrt(np.mean((y - (pw.intercept + pw.slope * lx)) ** 2)))
    ex = stats.linregress(n, y)
    res_ex = float(np.sqrt(np.mean((y - (ex.intercept + ex.slope * n)) ** 2)))
    half = 2.0 * pw.stderr
    if pw.slope < bounded_below:
        regime = "bounded"
    elif res_ex < res_pw and ex.slope * n[-1] > 2.0 * np.log(n[-1]):
        regime = "exponential"
    else:
        regime = "power_law"
    return GrowthFit(float(pw.slope), float(pw.stderr), (float(pw.slope - half), float(pw.slope + half)),
                     res_pw, regime, y, float(ex.slope), res_ex)


def growth_exponent(params: DiracParams, E: complex, V: PotentialSeq, n_list) -> GrowthFit:
    """Least-squares slope of ``log L_m(N)`` against ``log N``."""
    n_list = sorted(int(k) for k in n_list)
    return fit_growth(n_list, log_window_norms(params, E, V, n_list))
