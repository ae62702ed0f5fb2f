"""Potential families as reproducible sequences.

Site potentials ``V(n)`` are stored 0-based: ``values[n - 1]`` is ``V(n)``.
Random draws use numpy's counter-based Philox bit generator so that a
``(seed, stream)`` pair pins a sequence exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

GOLDEN_RHO = (np.sqrt(5.0) - 1.0) / 2.0


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for ``seed`` and an optional stream path.

    ``make_rng(s, k)`` gives the ``k``-th child stream of ``s``; child
    streams are independent and order-free, which is what parallel trials
    need.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PotentialSeq:
    values: np.ndarray
    sup_norm: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("potential must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if np.max(np.abs(vals)) > self.sup_norm * (1 + 1e-12) + 1e-300:
            raise ValueError("sup_norm is smaller than max |V(n)|")

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, n: int) -> float:
        """``V(n)`` for sites ``n = 1..len``."""
        if not 1 <= n <= len(self):
            raise IndexError(f"site {n} outside 1..{len(self)}")
        return float(self.values[n - 1])

    def truncate(self, length: int) -> "PotentialSeq":
        if not 1 <= length <= len(self):
            raise ValueError(f"cannot truncate potential of length {len(self)} to {length}")
        return PotentialSeq(self.values[:length], self.sup_norm, dict(self.provenance, length=length))


@dataclass(frozen=True)
class CellWord:
    """Binary cell labels for the continuum two-block model.

    ``cell_values`` are the constant potential levels on cells labelled 0 and 1.
    """

    word: np.ndarray
    cell_values: tuple[float, float] = (0.0, 1.0)
    bernoulli_p: float | None = None
    seed: int | None = None

    def __post_init__(self):
        w = np.asarray(self.word, dtype=np.int8)
        if w.ndim != 1:
            raise ValueError("word must be 1-D")
        if np.any((w != 0) & (w != 1)):
            raise ValueError("word entries must be 0 or 1")
        w.setflags(write=False)
        object.__setattr__(self, "word", w)

    def __len__(self) -> int:
        return self.word.size

    def levels(self) -> np.ndarray:
        return np.where(self.word == 0, self.cell_values[0], self.cell_values[1])


def constant(value: float, length: int) -> PotentialSeq:
    return PotentialSeq(np.full(length, float(value)), abs(float(value)),
                        {"family": "constant", "value": float(value), "length": length})


def two_valued(a: float, b: float, pattern: Sequence[int]) -> PotentialSeq:
    """``V(n) = a`` where ``pattern`` is 0 and ``b`` where it is 1."""
    pat = np.asarray(pattern, dtype=np.int8)
    if pat.size == 0:
        raise ValueError("pattern must be nonempty")
    if np.any((pat != 0) & (pat != 1)):
        raise ValueError("pattern entries must be 0 or 1")
    vals = np.where(pat == 0, float(a), float(b))
    return PotentialSeq(vals, max(abs(a), abs(b)),
                        {"family": "two_valued", "a": float(a), "b": float(b), "length": int(pat.size)})


def bernoulli_word(p: float, seed: int, n: int, cell_values: tuple[float, float] = (0.0, 1.0),
                   stream: tuple[int, ...] = ()) -> CellWord:
    """i.i.d. word with ``P(w_n = 0) = p``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    rng = make_rng(seed, *stream)
    word = (rng.random(n) >= p).astype(np.int8)
    return CellWord(word, tuple(float(v) for v in cell_values), float(p), seed)


def bernoulli_potential(a: float, b: float, p: float, seed: int, length: int) -> PotentialSeq:
    """Discrete two-valued potential on a Bernoulli pattern (``a`` with probability ``p``)."""
    w = bernoulli_word(p, seed, length)
    pot = two_valued(a, b, w.word)
    return PotentialSeq(pot.values, pot.sup_norm, dict(pot.provenance, family="bernoulli", p=p, seed=seed))


def thue_morse_letters(length: int) -> np.ndarray:
    """First ``length`` letters (0 for a, 1 for b) of the fixed point of a->ab, b->ba."""
    if length < 1:
        raise ValueError("length must be >= 1")
    word = np.zeros(1, dtype=np.int8)
    while word.size < length:
        # S^{k+1}(a) = S^k(a) followed by its letter-swapped copy
        word = np.concatenate([word, 1 - word])
    return word[:length]


def thue_morse(a: float, b: float, length: int) -> PotentialSeq:
    pot = two_valued(a, b, thue_morse_letters(length))
    return PotentialSeq(pot.values, pot.sup_norm, dict(pot.provenance, family="thue_morse"))


def _two_product(a: np.ndarray, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Dekker error-free product: ``a*b == p + e`` exactly."""
    split = 134217729.0  # 2**27 + 1

    def _split(x):
        t = split * x
        hi = t - (t - x)
        return hi, x - hi

    p = a * b
    ah, al = _split(a)
    bh, bl = _split(np.float64(b))
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def rotation_phases(rho: float, theta: float, length: int) -> np.ndarray:
    """``frac(n * rho + theta)`` for ``n = 1..length`` without accumulation drift."""
    n = np.arange(1, length + 1, dtype=np.float64)
    p, e = _two_product(n, float(rho))
    frac = p - np.floor(p)  # exact for doubles
    frac = frac + (e + float(theta))
    return frac - np.floor(frac)


def sturmian(coupling: float, rho: float = GOLDEN_RHO, theta: float = 0.0, length: int = 1) -> PotentialSeq:
    """``V(n) = coupling`` if ``frac(n*rho + theta)`` lies in ``[1 - rho, 1)``, else 0."""
    if coupling == 0:
        raise ValueError("coupling must be nonzero")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if not 0.0 <= theta < 1.0:
        raise ValueError("theta must lie in [0, 1)")
    if _small_denominator(rho):
        raise ValueError(f"rho={rho!r} is a small-denominator rational")
    phase = rotation_phases(rho, theta, length)
    vals = np.where(phase >= 1.0 - rho, float(coupling), 0.0)
    return PotentialSeq(vals, abs(float(coupling)),
                        {"family": "sturmian", "coupling": float(coupling), "rho": float(rho),
                         "theta": float(theta), "length": length})


def _small_denominator(x: float, max_den: int = 1000, tol: float = 1e-12) -> bool:
    approx = Fraction(x).limit_denominator(max_den)
    return abs(float(approx) - x) < tol


def load_potential(path: str | Path) -> PotentialSeq:
    """Read one real per line; optional first line ``sup_norm <value>``.

    Blank lines and ``#`` comments are skipped.
    """
    sup = None
    vals: list[float] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("sup_norm"):
            if vals:
                raise ValueError("sup_norm header must precede the values")
            sup = float(line.split()[1])
            continue
        vals.append(float(line))
    arr = np.asarray(vals)
    computed = float(np.max(np.abs(arr))) if arr.size else 0.0
    return PotentialSeq(arr, computed if sup is None else sup,
                        {"family": "file", "path": str(path), "length": int(arr.size)})


def save_potential(pot: PotentialSeq, path: str | Path) -> None:
    lines = [f"sup_norm {pot.sup_norm!r}"] + [repr(float(v)) for v in pot.values]
    Path(path).write_text("\n".join(lines) + "\n")
