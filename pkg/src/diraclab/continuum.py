"""Continuum unit cells with constant potential, free solutions, pairings.

The free cell matrix at shifted energy ``E' = E - v`` is written with the
entire functions ``cos(xi)`` and ``sinc(xi) = sin(xi)/xi`` of
``xi**2 = (E'**2 - (mc^2)**2) / c**2``:

    [[cos xi,                      i (E' + mc^2)/c * sinc xi],
     [-i (mc^2 - E')/c * sinc xi,  cos xi                  ]]

which equals the propagating-regime formula and continues analytically
through the gap and its edges with no 0/0.
"""

from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .algebra import IDENTITY, ordered_product
from .potentials import CellWord
from .transfer import DiracParams

SINC_TAYLOR_BELOW = 1e-4
DEFAULT_GRID_STEP = 1.0 / 256


def xi(params: DiracParams, E: float) -> complex:
    """``sqrt(E**2 - (mc^2)**2) / c``, principal branch."""
    return cmath.sqrt(complex(E * E - params.mc2 ** 2)) / params.c


def _xi_sq(params: DiracParams, E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    return (E * E - params.mc2 ** 2) / params.c ** 2


def _cos_sinc(xsq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.sqrt(np.asarray(xsq, dtype=complex))
    small = np.abs(x) < SINC_TAYLOR_BELOW
    safe = np.where(small, 1.0, x)
    sinc = np.where(small, 1.0 - xsq / 6.0 + xsq * xsq / 120.0, np.sin(safe) / safe)
    return np.cos(x), sinc


def free_cell_matrices(params: DiracParams, E, v: float = 0.0) -> np.ndarray:
    """Unit-cell transfer matrices for constant potential ``v``, vectorized over ``E``."""
    Ep = np.asarray(E, dtype=float) - v
    cs, sc = _cos_sinc(_xi_sq(params, Ep))
    mc2, c = params.mc2, params.c
    out = np.empty(Ep.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = cs
    out[..., 1, 1] = cs
    out[..., 0, 1] = 1j * (Ep + mc2) / c * sc
    out[..., 1, 0] = -1j * (mc2 - Ep) / c * sc
    return out


def free_cell_matrix(params: DiracParams, E: float, v: float = 0.0) -> np.ndarray:
    return free_cell_matrices(params, np.asarray(float(E)), v)


def word_product(params: DiracParams, E: float, word: CellWord, x_cells: int, y_cells: int) -> np.ndarray:
    """Ordered product over cells ``y..x-1`` (cell ``x-1`` acts last)."""
    if not 0 <= y_cells <= x_cells <= len(word):
        raise IndexError(f"need 0 <= y <= x <= {len(word)}, got x={x_cells}, y={y_cells}")
    if x_cells == y_cells:
        return IDENTITY.copy()
    cells = np.stack([free_cell_matrix(params, E, word.cell_values[0]),
                      free_cell_matrix(params, E, word.cell_values[1])])
    return ordered_product(cells[word.word[y_cells:x_cells]])


def _require_propagating(params: DiracParams, E: float) -> None:
    if not E * E > params.mc2 ** 2:
        raise ValueError(f"E={E} is not in the propagating regime |E| > mc^2={params.mc2}")


def free_solutions(params: DiracParams, E: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Neumann- and Dirichlet-type free solutions sampled at ``x``.

    Returns ``(uN, uD)`` each of shape ``(2, len(x))`` (rows: plus, minus
    components) with ``uN(0) = (1, 0)`` and ``uD(0) = (0, 1)``.
    """
    _require_propagating(params, E)
    x = np.asarray(x, dtype=float)
    k = float(np.sqrt(E * E - params.mc2 ** 2) / params.c)
    mc2, c = params.mc2, params.c
    cs = np.cos(k * x)
    # x * sinc(k x) = sin(k x) / k
    s = np.sin(k * x) / k
    uN = np.stack([cs + 0j, -1j * (mc2 - E) / c * s])
    uD = np.stack([1j * (E + mc2) / c * s, cs + 0j])
    return uN, uD


@dataclass(frozen=True)
class CompactState:
    """Two-component state sampled on the uniform grid of ``[0, support_end]``."""

    support_end: float
    grid_step: float
    samples_plus: np.ndarray
    samples_minus: np.ndarray

    def __post_init__(self):
        n = self.n_points
        for name in ("samples_plus", "samples_minus"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have {n} samples on the grid, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite samples")
            object.__setattr__(self, name, arr)

    @property
    def n_points(self) -> int:
        n = self.support_end / self.grid_step
        if self.support_end <= 0 or self.grid_step <= 0 or abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("support_end must be a positive multiple of grid_step")
        return int(round(n)) + 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.support_end, self.n_points)

    @classmethod
    def from_functions(cls, f_plus: Callable | None, f_minus: Callable | None,
                       support_end: float = 1.0, grid_step: float = DEFAULT_GRID_STEP) -> "CompactState":
        n = int(round(support_end / grid_step)) + 1
        x = np.linspace(0.0, support_end, n)
        fp = np.zeros(n, complex) if f_plus is None else np.asarray(f_plus(x), dtype=complex) * np.ones(n)
        fm = np.zeros(n, complex) if f_minus is None else np.asarray(f_minus(x), dtype=complex) * np.ones(n)
        return cls(support_end, grid_step, fp, fm)

    def norm(self) -> float:
        dens = np.abs(self.samples_plus) ** 2 + np.abs(self.samples_minus) ** 2
        return float(np.sqrt(simpson(dens, x=self.grid)))


def bracket(g, f: CompactState) -> complex:
    """``[g, f] = int_0^s (conj(g+) f+ + conj(g-) f-) dt`` by composite Simpson.

    ``g`` is a callable returning ``(g+, g-)`` on a grid, a ``(2, n)`` array
    sampled on ``f``'s grid, or another ``CompactState`` on the same grid.
    """
    x = f.grid
    if isinstance(g, CompactState):
        if g.n_points != f.n_points or not np.isclose(g.support_end, f.support_end):
            raise ValueError("grid mismatch between the two states")
        gp, gm = g.samples_plus, g.samples_minus
    elif callable(g):
        gp, gm = g(x)
    else:
        gp, gm = np.asarray(g)
    gp = np.asarray(gp, dtype=complex)
    gm = np.asarray(gm, dtype=complex)
    if gp.shape != x.shape or gm.shape != x.shape:
        raise ValueError(f"grid mismatch: expected {x.shape} samples, got {gp.shape} and {gm.shape}")
    integrand = np.conj(gp) * f.samples_plus + np.conj(gm) * f.samples_minus
    return complex(simpson(integrand, x=x))


def pairing_vectors(params: DiracParams, E: float, x) -> tuple[np.ndarray, np.ndarray]:
    """``w_E`` and ``v_E`` built from the free solutions pinned at 0."""
    uN, uD = free_solutions(params, E, x)
    uN0, uD0 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    flip_D = np.stack([-uD[0], uD[1]])
    flip_N = np.stack([uN[0], -uN[1]])
    w = uN0[0] * flip_D + uD0[0] * flip_N
    v = uN0[1] * flip_D + uD0[1] * flip_N
    return w, v


class CaseTag(str, enum.Enum):
    PLUS_ONLY = "plus_only"
    MINUS_ONLY = "minus_only"
    BOTH_COMPONENTS = "both_components"


@dataclass
class AdmissibilityReport:
    case_tag: CaseTag
    pairing_w: complex
    pairing_v: complex
    solution_pairings: tuple[complex, complex]
    admissible: bool
    energy: float
    tol: float


def admissibility(params: DiracParams, E: float, f: CompactState, rel_tol: float = 1e-9) -> AdmissibilityReport:
    """Decide membership of ``f`` in the admissible class at energy ``E``.

    One-component states are tested against both fundamental solutions
    (every solution is in their span and the pairing is linear); two-component
    states use the ``w_E`` / ``v_E`` pairings.
    """
    fnorm = f.norm()
    if fnorm == 0.0:
        raise ValueError("zero state")
    tol = rel_tol * fnorm
    x = f.grid
    dens_p = float(np.sqrt(simpson(np.abs(f.samples_plus) ** 2, x=x)))
    dens_m = float(np.sqrt(simpson(np.abs(f.samples_minus) ** 2, x=x)))
    has_p, has_m = dens_p > tol, dens_m > tol
    uN, uD = free_solutions(params, E, x)
    w, v = pairing_vectors(params, E, x)
    # conj(conj(g)) = g: pairing against the conjugate is a plain integral of g*f
    pw = bracket(np.conj(w), f)
    pv = bracket(np.conj(v), f)
    if has_p and not has_m:
        tag = CaseTag.PLUS_ONLY
        sols = (complex(simpson(uN[0] * f.samples_plus, x=x)), complex(simpson(uD[0] * f.samples_plus, x=x)))
        ok = max(abs(s) for s in sols) > tol
    elif has_m and not has_p:
        tag = CaseTag.MINUS_ONLY
        sols = (complex(simpson(uN[1] * f.samples_minus, x=x)), complex(simpson(uD[1] * f.samples_minus, x=x)))
        ok = max(abs(s) for s in sols) > tol
    else:
        tag = CaseTag.BOTH_COMPONENTS
        sols = (complex(bracket(np.conj(uN), f)), complex(bracket(np.conj(uD), f)))
        ok = abs(pw) > tol or abs(pv) > tol
    return AdmissibilityReport(tag, pw, pv, sols, bool(ok), float(E), tol)


def critical_family(params: DiracParams, n: int) -> float:
    """``sqrt((mc^2)**2 + (n pi c)**2)``: energies where the free cell is +-I."""
    return float(np.sqrt(params.mc2 ** 2 + (n * np.pi * params.c) ** 2))


def interference_state(params: DiracParams, n: int, n_tilde: int, sign: int = +1,
                       grid_step: float = DEFAULT_GRID_STEP) -> CompactState:
    """Two-component state on ``[0, 1]`` whose ``w_E`` and ``v_E`` pairings both vanish
    at ``E = sign * critical_family(params, n)``.

    ``f+ = (mc^2 - E) / (i n pi c) * sin(n~ pi x)``, ``f- = -cos(n~ pi x)``.
    """
    E = sign * critical_family(params, n)
    coef = (params.mc2 - E) / (1j * n * np.pi * params.c)
    return CompactState.from_functions(lambda x: coef * np.sin(n_tilde * np.pi * x),
                                       lambda x: -np.cos(n_tilde * np.pi * x),
                                       1.0, grid_step)


def load_state(path: str | Path) -> CompactState:
    """Read a state file: ``support_end``/``grid_step`` headers, then one
    ``f_plus f_minus`` pair of complex literals per grid point."""
    header: dict[str, float] = {}
    plus, minus = [], []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key = line.split()[0]
        if key in ("support_end", "grid_step"):
            header[key] = float(line.split()[1])
            continue
        a, b = line.split()
        plus.append(complex(a))
        minus.append(complex(b))
    missing = {"support_end", "grid_step"} - header.keys()
    if missing:
        raise ValueError(f"state file lacks header(s): {sorted(missing)}")
    return CompactState(header["support_end"], header["grid_step"], np.array(plus), np.array(minus))


def save_state(f: CompactState, path: str | Path) -> None:
    lines = [f"support_end {f.support_end!r}", f"grid_step {f.grid_step!r}"]
    lines += [f"{complex(p)!r} {complex(m)!r}" for p, m in zip(f.samples_plus, f.samples_minus)]
    Path(path).write_text("\n".join(lines) + "\n")
